#include "ssls/score_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

namespace ssls {

namespace {

constexpr double kDegenerateStd = 1e-8;

Matrix activate(const Matrix& pre, Activation act) {
  if (act == Activation::kSigmoid) return (1.0 + (-pre.array()).exp()).inverse().matrix();
  return pre.cwiseMax(0.0);
}

// Derivative of the activation, expressed through the pre-activation and
// the activation output.
Matrix activation_derivative(const Matrix& pre, const Matrix& post, Activation act) {
  if (act == Activation::kSigmoid) return (post.array() * (1.0 - post.array())).matrix();
  return (pre.array() > 0.0).cast<double>().matrix();
}

struct ForwardTrace {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  Matrix output;
};

ForwardTrace trace_forward(const std::vector<DenseLayer>& layers, Activation act, Matrix input) {
  ForwardTrace t;
  t.inputs.reserve(layers.size());
  t.pre.reserve(layers.size());
  Matrix a = std::move(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    t.inputs.push_back(std::move(a));
    if (l + 1 == layers.size()) {
      t.output = std::move(z);
    } else {
      a = activate(z, act);
      t.pre.push_back(std::move(z));
    }
  }
  return t;
}

Matrix perturbed_whitened(const ScoreNetwork& net, const Ensemble& batch, double sigma, const Ensemble& noise) {
  require(batch.rows() > 0, "dsm_loss: empty batch");
  require(sigma > 0.0, "dsm_loss: sigma must be positive");
  require_dim(batch.cols(), net.dim(), "dsm_loss: batch");
  require(noise.rows() == batch.rows() && noise.cols() == batch.cols(), "dsm_loss: one noise draw per batch element");
  return net.whitening().apply(batch) + sigma * noise;
}

// Loss and gradient for a batch already in whitened coordinates.
LossGradient whitened_loss_gradient(const ScoreNetwork& net, const Matrix& perturbed, double sigma,
                                    const Matrix& noise) {
  const auto& layers = net.layers();
  const ForwardTrace t = trace_forward(layers, net.activation(), perturbed);
  const double m = static_cast<double>(perturbed.rows());
  const Matrix residual = sigma * t.output + noise;

  LossGradient out;
  out.loss = residual.squaredNorm() / m;
  out.gradient.resize(net.parameter_count());

  std::vector<Index> offsets(layers.size());
  Index offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offsets[l] = offset;
    offset += layers[l].weight.size() + layers[l].bias.size();
  }

  Matrix delta = (2.0 * sigma / m) * residual;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const DenseLayer& layer = layers[li];
    const Matrix grad_w = delta.transpose() * t.inputs[li];
    const Vector grad_b = delta.colwise().sum().transpose();
    Index o = offsets[li];
    for (Index r = 0; r < grad_w.rows(); ++r)
      for (Index c = 0; c < grad_w.cols(); ++c) out.gradient[o++] = grad_w(r, c);
    out.gradient.segment(o, grad_b.size()) = grad_b;
    if (li > 0) {
      Matrix back = delta * layer.weight;
      delta = back.cwiseProduct(activation_derivative(t.pre[li - 1], t.inputs[li], net.activation()));
    }
  }
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.write(buf, 8);
}

template <typename T>
T read_le(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) throw Error("ScoreNetwork::load: truncated checkpoint");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

Ensemble Whitening::apply(const Ensemble& x) const {
  require_dim(x.cols(), mean.size(), "Whitening::apply");
  Ensemble z = x;
  z.rowwise() -= mean.transpose();
  z.array().rowwise() /= scale.transpose().array();
  return z;
}

WhitenResult whiten(const Ensemble& ensemble) {
  require(ensemble.rows() >= 2, "whiten: ensemble needs at least 2 particles");
  const double n = static_cast<double>(ensemble.rows());
  Whitening w;
  w.mean = ensemble.colwise().mean().transpose();
  const Ensemble centered = ensemble.rowwise() - w.mean.transpose();
  w.scale = (centered.colwise().squaredNorm() / n).cwiseSqrt().transpose();
  for (Index j = 0; j < w.scale.size(); ++j)
    if (!(w.scale[j] >= kDegenerateStd)) w.scale[j] = 1.0;
  Ensemble z = w.apply(ensemble);
  return {std::move(z), std::move(w)};
}

ScoreNetwork::ScoreNetwork(Index dim, std::vector<Index> hidden_widths, Activation activation)
    : dim_(dim), activation_(activation), whitening_(Whitening::identity(dim)) {
  require(dim >= 1, "ScoreNetwork: dimension must be positive");
  Index in = dim;
  for (Index w : hidden_widths) {
    require(w >= 1, "ScoreNetwork: hidden widths must be positive");
    layers_.push_back({Matrix::Zero(w, in), Vector::Zero(w)});
    in = w;
  }
  layers_.push_back({Matrix::Zero(dim, in), Vector::Zero(dim)});
}

ScoreNetwork ScoreNetwork::glorot(Index dim, const std::vector<Index>& hidden_widths, Activation activation,
                                  Stream& rng) {
  ScoreNetwork net(dim, hidden_widths, activation);
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (Index r = 0; r < layer.weight.rows(); ++r)
      for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = limit * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

std::vector<Index> ScoreNetwork::widths() const {
  std::vector<Index> w{dim_};
  for (const auto& layer : layers_) w.push_back(layer.weight.rows());
  return w;
}

void ScoreNetwork::set_whitening(Whitening w) {
  require_dim(w.mean.size(), dim_, "ScoreNetwork::set_whitening mean");
  require_dim(w.scale.size(), dim_, "ScoreNetwork::set_whitening scale");
  whitening_ = std::move(w);
}

Ensemble ScoreNetwork::raw_forward(const Ensemble& z) const {
  require_dim(z.cols(), dim_, "ScoreNetwork::raw_forward");
  Matrix a = z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre = a * layers_[l].weight.transpose();
    pre.rowwise() += layers_[l].bias.transpose();
    a = (l + 1 == layers_.size()) ? std::move(pre) : activate(pre, activation_);
  }
  return a;
}

Ensemble ScoreNetwork::forward_batch(const Ensemble& x) const {
  require_dim(x.cols(), dim_, "ScoreNetwork::forward");
  Ensemble s = raw_forward(whitening_.apply(x));
  s.array().rowwise() /= whitening_.scale.transpose().array();
  return s;
}

Vector ScoreNetwork::forward(const Vector& x) const {
  require_dim(x.size(), dim_, "ScoreNetwork::forward");
  Ensemble row = x.transpose();
  return forward_batch(row).row(0).transpose();
}

Index ScoreNetwork::parameter_count() const {
  Index count = 0;
  for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
  return count;
}

Vector ScoreNetwork::parameters() const {
  Vector theta(parameter_count());
  Index o = 0;
  for (const auto& layer : layers_) {
    for (Index r = 0; r < layer.weight.rows(); ++r)
      for (Index c = 0; c < layer.weight.cols(); ++c) theta[o++] = layer.weight(r, c);
    theta.segment(o, layer.bias.size()) = layer.bias;
    o += layer.bias.size();
  }
  return theta;
}

void ScoreNetwork::set_parameters(const Vector& theta) {
  require_dim(theta.size(), parameter_count(), "ScoreNetwork::set_parameters");
  Index o = 0;
  for (auto& layer : layers_) {
    for (Index r = 0; r < layer.weight.rows(); ++r)
      for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = theta[o++];
    layer.bias = theta.segment(o, layer.bias.size());
    o += layer.bias.size();
  }
}

bool ScoreNetwork::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

void ScoreNetwork::save(std::ostream& out) const {
  const auto w = widths();
  write_le<std::uint64_t>(out, w.size());
  for (Index width : w) write_le<std::uint64_t>(out, static_cast<std::uint64_t>(width));
  write_le<std::uint64_t>(out, activation_ == Activation::kSigmoid ? 0 : 1);
  for (Index j = 0; j < dim_; ++j) write_le<double>(out, whitening_.mean[j]);
  for (Index j = 0; j < dim_; ++j) write_le<double>(out, whitening_.scale[j]);
  const Vector theta = parameters();
  for (Index i = 0; i < theta.size(); ++i) write_le<double>(out, theta[i]);
}

ScoreNetwork ScoreNetwork::load(std::istream& in) {
  const auto count = read_le<std::uint64_t>(in);
  if (count < 2 || count > 64) throw Error("ScoreNetwork::load: bad width header");
  std::vector<Index> w(count);
  for (auto& width : w) width = static_cast<Index>(read_le<std::uint64_t>(in));
  const auto act_code = read_le<std::uint64_t>(in);
  if (act_code > 1) throw Error("ScoreNetwork::load: unknown activation code");
  if (w.front() != w.back()) throw Error("ScoreNetwork::load: input and output widths differ");
  ScoreNetwork net(w.front(), std::vector<Index>(w.begin() + 1, w.end() - 1),
                   act_code == 0 ? Activation::kSigmoid : Activation::kRelu);
  Whitening wh = Whitening::identity(net.dim());
  for (Index j = 0; j < net.dim(); ++j) wh.mean[j] = read_le<double>(in);
  for (Index j = 0; j < net.dim(); ++j) wh.scale[j] = read_le<double>(in);
  net.set_whitening(std::move(wh));
  Vector theta(net.parameter_count());
  for (Index i = 0; i < theta.size(); ++i) theta[i] = read_le<double>(in);
  net.set_parameters(theta);
  return net;
}

double dsm_loss(const ScoreNetwork& net, const Ensemble& batch, double sigma, const Ensemble& noise) {
  const Matrix perturbed = perturbed_whitened(net, batch, sigma, noise);
  const Matrix residual = sigma * Matrix(net.raw_forward(perturbed)) + Matrix(noise);
  return residual.squaredNorm() / static_cast<double>(batch.rows());
}

LossGradient loss_gradient(const ScoreNetwork& net, const Ensemble& batch, double sigma, const Ensemble& noise) {
  const Matrix perturbed = perturbed_whitened(net, batch, sigma, noise);
  return whitened_loss_gradient(net, perturbed, sigma, Matrix(noise));
}

void TrainConfig::validate() const {
  require(sigma > 0.0, "TrainConfig: sigma must be positive");
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
  require(adam.learning_rate > 0.0, "TrainConfig: learning rate must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "TrainConfig: beta1 must be in [0,1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "TrainConfig: beta2 must be in [0,1)");
  require(adam.epsilon > 0.0, "TrainConfig: epsilon must be positive");
}

ScoreNetwork train_score(const Ensemble& ensemble, const TrainConfig& config, const ScoreNetwork* init,
                         std::uint64_t seed) {
  config.validate();
  require(ensemble.rows() >= 2, "train_score: ensemble needs at least 2 particles");
  const Index n = ensemble.rows();
  const Index d = ensemble.cols();

  WhitenResult white = whiten(ensemble);
  ScoreNetwork net = [&] {
    if (init != nullptr && config.warm_start) {
      require_dim(init->dim(), d, "train_score: warm-start network");
      return *init;
    }
    Stream init_rng = Stream::derive(seed, StreamTag::kNetworkInit);
    return ScoreNetwork::glorot(d, config.hidden_widths, config.activation, init_rng);
  }();
  net.set_whitening(white.transform);

  Vector theta = net.parameters();
  Vector m1 = Vector::Zero(theta.size());
  Vector m2 = Vector::Zero(theta.size());
  const AdamParams& adam = config.adam;
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  std::vector<Index> order(static_cast<std::size_t>(n));
  const Index batch = std::min(config.batch_size, n);
  const Index batches_per_epoch = (n + batch - 1) / batch;
  const double total_updates = static_cast<double>(batches_per_epoch) * config.epochs;
  double update = 0.0;
  Matrix perturbed(batch, d);
  Matrix noise(batch, d);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Stream rng = Stream::derive(seed, StreamTag::kTraining, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += batch) {
      const Index m = std::min(batch, n - start);
      perturbed.resize(m, d);
      noise.resize(m, d);
      for (Index r = 0; r < m; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        for (Index c = 0; c < d; ++c) {
          const double eps = rng.normal();
          noise(r, c) = eps;
          perturbed(r, c) = white.whitened(src, c) + config.sigma * eps;
        }
      }
      const LossGradient lg = whitened_loss_gradient(net, perturbed, config.sigma, noise);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw TrainingDivergence("train_score: non-finite loss at epoch " + std::to_string(epoch));
      }
      beta1_power *= adam.beta1;
      beta2_power *= adam.beta2;
      m1 = adam.beta1 * m1 + (1.0 - adam.beta1) * lg.gradient;
      m2 = adam.beta2 * m2 + (1.0 - adam.beta2) * lg.gradient.cwiseAbs2();
      double lr = adam.learning_rate;
      if (config.cosine_decay) lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * update / total_updates));
      update += 1.0;
      const double step = lr * std::sqrt(1.0 - beta2_power) / (1.0 - beta1_power);
      theta.array() -= step * m1.array() / (m2.array().sqrt() + adam.epsilon);
      net.set_parameters(theta);
    }
  }
  if (!net.all_finite()) throw TrainingDivergence("train_score: non-finite weights after training");
  return net;
}

}  // namespace ssls
