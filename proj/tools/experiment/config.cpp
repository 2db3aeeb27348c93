#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ssls::experiment {

namespace {

const std::map<std::string, ExperimentKind> kExperiments{
    {"linear_gaussian", ExperimentKind::kLinearGaussian},
    {"double_well_linear", ExperimentKind::kDoubleWellLinear},
    {"double_well_nonlinear", ExperimentKind::kDoubleWellNonlinear},
    {"lorenz96", ExperimentKind::kLorenz96},
};

const std::map<std::string, Method> kMethods{
    {"ssls", Method::kSsls}, {"enkf", Method::kEnkf}, {"apf", Method::kApf}, {"kalman", Method::kKalman}};

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) const {
    std::ostringstream msg;
    msg << source_;
    if (node.IsDefined() && node.Mark().line >= 0) msg << ":" << node.Mark().line + 1;
    msg << ": ";
    if (!field.empty()) msg << "field '" << field << "': ";
    msg << what;
    throw ConfigError(msg.str());
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& field, const char* type_name) const {
    if (!node.IsScalar()) fail(node, field, std::string("expected ") + type_name);
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, field, std::string("expected ") + type_name + ", got '" + node.Scalar() + "'");
    }
  }

  double real(const YAML::Node& n, const std::string& f) const { return scalar<double>(n, f, "a number"); }
  int integer(const YAML::Node& n, const std::string& f) const { return scalar<int>(n, f, "an integer"); }
  bool boolean(const YAML::Node& n, const std::string& f) const { return scalar<bool>(n, f, "true or false"); }
  std::string text(const YAML::Node& n, const std::string& f) const { return scalar<std::string>(n, f, "a string"); }

  double positive(const YAML::Node& n, const std::string& f) const {
    const double v = real(n, f);
    if (!(v > 0.0)) fail(n, f, "must be positive");
    return v;
  }
  int at_least(const YAML::Node& n, const std::string& f, int lo) const {
    const int v = integer(n, f);
    if (v < lo) fail(n, f, "must be >= " + std::to_string(lo));
    return v;
  }

  using Handler = std::function<void(const YAML::Node&, const std::string&)>;

  // Dispatches every key of a mapping to its handler; unknown keys are errors.
  void section(const YAML::Node& map, const std::string& prefix, const std::map<std::string, Handler>& handlers) const {
    if (!map.IsMap()) fail(map, prefix, "expected a mapping");
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      const std::string field = prefix.empty() ? key : prefix + "." + key;
      const auto it = handlers.find(key);
      if (it == handlers.end()) fail(kv.first, field, "unknown key");
      it->second(kv.second, field);
    }
  }

 private:
  std::string source_;
};

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [name, k] : kExperiments)
    if (k == kind) return name;
  return "unknown";
}

std::string to_string(Method method) {
  for (const auto& [name, m] : kMethods)
    if (m == method) return name;
  return "unknown";
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  c.methods = {Method::kSsls};
  switch (kind) {
    case ExperimentKind::kLinearGaussian:
      c.ensemble_size = 500;
      c.steps = 10;
      c.ssls.train.epochs = 50;
      c.ssls.initial_epochs = 300;
      c.ssls.plan = AnnealPlan::linear(10, 20, 0.01);
      break;
    case ExperimentKind::kDoubleWellLinear:
    case ExperimentKind::kDoubleWellNonlinear:
      c.ensemble_size = 1000;
      c.steps = 100;
      c.ssls.train.epochs = 20;
      c.ssls.initial_epochs = 200;
      c.ssls.plan = AnnealPlan::linear(10, 10, 0.004);
      if (kind == ExperimentKind::kDoubleWellNonlinear) {
        c.double_well.measurement = MeasurementKind::kExponential;
        c.double_well.sigma_obs = 0.2;
      }
      break;
    case ExperimentKind::kLorenz96:
      c.ensemble_size = 500;
      c.steps = 50;
      c.ssls.train.epochs = 20;
      c.ssls.initial_epochs = 200;
      c.ssls.plan = AnnealPlan::linear(10, 20, 0.01);
      break;
  }
  return c;
}

ModelSpec ExperimentConfig::make_model() const {
  switch (experiment) {
    case ExperimentKind::kLinearGaussian: {
      LinearGaussianParams p = linear_gaussian;
      p.guess_shift += init_prior_shift;
      return make_linear_gaussian(p);
    }
    case ExperimentKind::kDoubleWellLinear:
    case ExperimentKind::kDoubleWellNonlinear: {
      DoubleWellParams p = double_well;
      p.guess_mean += init_prior_shift;
      return make_double_well(p);
    }
    case ExperimentKind::kLorenz96: {
      Lorenz96Params p = lorenz96;
      p.guess_mean += init_prior_shift;
      return make_lorenz96(p);
    }
  }
  throw ConfigError("unknown experiment");
}

SslsConfig ExperimentConfig::ssls_config() const {
  SslsConfig c = ssls;
  c.ensemble_size = ensemble_size;
  c.seed = seed;
  c.threads = threads;
  c.keep_snapshots = keep_snapshots;
  return c;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("no method given");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (methods[i] == methods[j]) throw ConfigError("method '" + to_string(methods[i]) + "' listed twice");
    if (methods[i] == Method::kKalman && experiment != ExperimentKind::kLinearGaussian) {
      throw ConfigError("method 'kalman' requires experiment 'linear_gaussian', got '" + to_string(experiment) + "'");
    }
  }
  const bool ensemble_method =
      std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::kKalman; });
  if (ensemble_method && ensemble_size < 2) throw ConfigError("ensemble_size must be >= 2 for ensemble methods");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (mutation_period && *mutation_period < 1) throw ConfigError("mutation_period must be >= 1");
  try {
    make_model();
    ssls_config().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  const Parser p(source);
  if (!root.IsMap()) p.fail(root, "", "expected a mapping at the top level");
  const YAML::Node exp_node = root["experiment"];
  if (!exp_node) p.fail(root, "experiment", "missing required key");
  const std::string exp_name = p.text(exp_node, "experiment");
  const auto exp_it = kExperiments.find(exp_name);
  if (exp_it == kExperiments.end()) {
    p.fail(exp_node, "experiment",
           "unknown experiment '" + exp_name + "' (linear_gaussian, double_well_linear, double_well_nonlinear, lorenz96)");
  }
  ExperimentConfig c = default_config(exp_it->second);

  const auto method_of = [&](const YAML::Node& n, const std::string& f) {
    const std::string name = p.text(n, f);
    const auto it = kMethods.find(name);
    if (it == kMethods.end()) p.fail(n, f, "unknown method '" + name + "' (ssls, enkf, apf, kalman)");
    if (it->second == Method::kKalman && c.experiment != ExperimentKind::kLinearGaussian) {
      p.fail(n, f, "method 'kalman' requires experiment 'linear_gaussian', got '" + exp_name + "'");
    }
    return it->second;
  };
  bool have_method = false;
  bool have_methods = false;

  using H = Parser::Handler;
  const std::map<std::string, H> model_handlers = [&]() -> std::map<std::string, H> {
    switch (c.experiment) {
      case ExperimentKind::kLinearGaussian:
        return {
            {"process_var", [&](auto& n, auto& f) { c.linear_gaussian.process_var = p.positive(n, f); }},
            {"obs_var", [&](auto& n, auto& f) { c.linear_gaussian.obs_var = p.positive(n, f); }},
            {"prior_mean", [&](auto& n, auto& f) { c.linear_gaussian.prior_mean = p.real(n, f); }},
            {"prior_var", [&](auto& n, auto& f) { c.linear_gaussian.prior_var = p.positive(n, f); }},
        };
      case ExperimentKind::kDoubleWellLinear:
      case ExperimentKind::kDoubleWellNonlinear:
        return {
            {"beta", [&](auto& n, auto& f) { c.double_well.beta = p.positive(n, f); }},
            {"dt", [&](auto& n, auto& f) { c.double_well.dt = p.positive(n, f); }},
            {"sigma_obs", [&](auto& n, auto& f) { c.double_well.sigma_obs = p.positive(n, f); }},
            {"gamma", [&](auto& n, auto& f) { c.double_well.gamma = p.real(n, f); }},
            {"reference_initial_mean", [&](auto& n, auto& f) { c.double_well.reference_initial_mean = p.real(n, f); }},
            {"reference_initial_std", [&](auto& n, auto& f) { c.double_well.reference_initial_std = p.positive(n, f); }},
            {"guess_mean", [&](auto& n, auto& f) { c.double_well.guess_mean = p.real(n, f); }},
            {"guess_std", [&](auto& n, auto& f) { c.double_well.guess_std = p.positive(n, f); }},
        };
      case ExperimentKind::kLorenz96:
        return {
            {"dim", [&](auto& n, auto& f) { c.lorenz96.dim = p.at_least(n, f, 4); }},
            {"forcing", [&](auto& n, auto& f) { c.lorenz96.forcing = p.real(n, f); }},
            {"dt", [&](auto& n, auto& f) { c.lorenz96.dt = p.positive(n, f); }},
            {"process_noise_std", [&](auto& n, auto& f) {
               c.lorenz96.process_noise_std = p.real(n, f);
               if (c.lorenz96.process_noise_std < 0.0) p.fail(n, f, "must be non-negative");
             }},
            {"sigma_obs", [&](auto& n, auto& f) { c.lorenz96.sigma_obs = p.positive(n, f); }},
            {"spinup_steps", [&](auto& n, auto& f) { c.lorenz96.spinup_steps = p.at_least(n, f, 0); }},
            {"guess_mean", [&](auto& n, auto& f) { c.lorenz96.guess_mean = p.real(n, f); }},
            {"guess_std", [&](auto& n, auto& f) { c.lorenz96.guess_std = p.positive(n, f); }},
        };
    }
    return {};
  }();

  int temperatures = static_cast<int>(c.ssls.plan.inverse_temperatures.size());
  const std::map<std::string, H> ssls_handlers{
      {"sigma", [&](auto& n, auto& f) { c.ssls.train.sigma = p.positive(n, f); }},
      {"epochs", [&](auto& n, auto& f) { c.ssls.train.epochs = p.at_least(n, f, 1); }},
      {"initial_epochs", [&](auto& n, auto& f) { c.ssls.initial_epochs = p.at_least(n, f, 0); }},
      {"batch_size", [&](auto& n, auto& f) { c.ssls.train.batch_size = p.at_least(n, f, 1); }},
      {"learning_rate", [&](auto& n, auto& f) { c.ssls.train.adam.learning_rate = p.positive(n, f); }},
      {"adam_beta1", [&](auto& n, auto& f) { c.ssls.train.adam.beta1 = p.real(n, f); }},
      {"adam_beta2", [&](auto& n, auto& f) { c.ssls.train.adam.beta2 = p.real(n, f); }},
      {"adam_epsilon", [&](auto& n, auto& f) { c.ssls.train.adam.epsilon = p.positive(n, f); }},
      {"cosine_decay", [&](auto& n, auto& f) { c.ssls.train.cosine_decay = p.boolean(n, f); }},
      {"warm_start", [&](auto& n, auto& f) { c.ssls.train.warm_start = p.boolean(n, f); }},
      {"hidden_widths",
       [&](auto& n, auto& f) {
         if (!n.IsSequence()) p.fail(n, f, "expected a list of layer widths");
         c.ssls.train.hidden_widths.clear();
         for (const auto& w : n) c.ssls.train.hidden_widths.push_back(p.at_least(w, f, 1));
       }},
      {"activation",
       [&](auto& n, auto& f) {
         const std::string a = p.text(n, f);
         if (a == "sigmoid") c.ssls.train.activation = Activation::kSigmoid;
         else if (a == "relu") c.ssls.train.activation = Activation::kRelu;
         else p.fail(n, f, "expected 'sigmoid' or 'relu', got '" + a + "'");
       }},
      {"temperatures", [&](auto& n, auto& f) { temperatures = p.at_least(n, f, 1); }},
      {"inner_steps", [&](auto& n, auto& f) { c.ssls.plan.inner_steps = p.at_least(n, f, 1); }},
      {"step_size", [&](auto& n, auto& f) { c.ssls.plan.step_size = p.positive(n, f); }},
      {"clip_norm",
       [&](auto& n, auto& f) {
         if (n.IsNull() || (n.IsScalar() && n.Scalar() == "none")) c.ssls.plan.clip_norm.reset();
         else c.ssls.plan.clip_norm = p.positive(n, f);
       }},
  };

  const std::map<std::string, H> top{
      {"experiment", [](auto&, auto&) {}},
      {"method",
       [&](auto& n, auto& f) {
         c.methods = {method_of(n, f)};
         have_method = true;
       }},
      {"methods",
       [&](auto& n, auto& f) {
         if (!n.IsSequence()) p.fail(n, f, "expected a list of methods");
         c.methods.clear();
         for (const auto& m : n) c.methods.push_back(method_of(m, f));
         have_methods = true;
       }},
      {"ensemble_size", [&](auto& n, auto& f) { c.ensemble_size = p.at_least(n, f, 1); }},
      {"steps", [&](auto& n, auto& f) { c.steps = p.at_least(n, f, 1); }},
      {"mutation_period",
       [&](auto& n, auto& f) {
         if (n.IsNull()) c.mutation_period.reset();
         else c.mutation_period = p.at_least(n, f, 1);
       }},
      {"seed",
       [&](auto& n, auto& f) {
         c.seed = p.scalar<std::uint64_t>(n, f, "a non-negative integer");
       }},
      {"threads", [&](auto& n, auto& f) { c.threads = p.at_least(n, f, 1); }},
      {"keep_snapshots", [&](auto& n, auto& f) { c.keep_snapshots = p.boolean(n, f); }},
      {"output_dir", [&](auto& n, auto& f) { c.output_dir = p.text(n, f); }},
      {"init_prior_shift", [&](auto& n, auto& f) { c.init_prior_shift = p.real(n, f); }},
      {"model", [&](auto& n, auto& f) { p.section(n, f, model_handlers); }},
      {"ssls", [&](auto& n, auto& f) { p.section(n, f, ssls_handlers); }},
  };
  p.section(root, "", top);
  if (have_method && have_methods) p.fail(root, "methods", "give either 'method' or 'methods', not both");

  const double h = c.ssls.plan.step_size;
  const int k = c.ssls.plan.inner_steps;
  const auto clip = c.ssls.plan.clip_norm;
  c.ssls.plan = AnnealPlan::linear(temperatures, k, h, clip);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace ssls::experiment
