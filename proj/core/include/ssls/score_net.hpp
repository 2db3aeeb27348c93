#pragma once

#include "ssls/rng.hpp"
#include "ssls/types.hpp"

#include <iosfwd>
#include <vector>

namespace ssls {

enum class Activation { kSigmoid, kRelu };

/// Per-dimension affine map z = (x - mean) / scale.
struct Whitening {
  Vector mean;
  Vector scale;

  static Whitening identity(Index dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }
  Ensemble apply(const Ensemble& x) const;
};

struct WhitenResult {
  Ensemble whitened;
  Whitening transform;
};

/// Standardizes each dimension with the population (1/n) standard
/// deviation. Dimensions with std < 1e-8 keep scale 1. Requires n >= 2.
WhitenResult whiten(const Ensemble& ensemble);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

/// Feed-forward score model s: R^d -> R^d evaluated in whitened coordinates.
/// Hidden layers use `activation`; the output layer is linear.
class ScoreNetwork {
 public:
  /// Zero weights and identity whitening.
  ScoreNetwork(Index dim, std::vector<Index> hidden_widths, Activation activation);

  /// Glorot-uniform weights, zero biases.
  static ScoreNetwork glorot(Index dim, const std::vector<Index>& hidden_widths, Activation activation, Stream& rng);

  Index dim() const { return dim_; }
  Activation activation() const { return activation_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::vector<Index> widths() const;

  const Whitening& whitening() const { return whitening_; }
  void set_whitening(Whitening w);

  /// Score in original coordinates at a single state.
  Vector forward(const Vector& x) const;
  /// Row-wise score in original coordinates: raw(whiten(x)) / scale.
  Ensemble forward_batch(const Ensemble& x) const;
  /// Network output on already-whitened inputs.
  Ensemble raw_forward(const Ensemble& z) const;

  Index parameter_count() const;
  /// Flattened parameters, layer by layer: weight (row-major) then bias.
  Vector parameters() const;
  void set_parameters(const Vector& theta);
  bool all_finite() const;

  /// Little-endian dump: u64 width count, u64 widths, u64 activation, then
  /// f64 whitening mean and scale, then each layer's weight (row-major) and bias.
  void save(std::ostream& out) const;
  static ScoreNetwork load(std::istream& in);

 private:
  Index dim_;
  Activation activation_;
  std::vector<DenseLayer> layers_;
  Whitening whitening_;
};

/// Empirical denoising score-matching risk
///   (1/m) sum_i || sigma * s(z_i + sigma * eps_i) + eps_i ||^2
/// where z_i is the batch element mapped through the network's whitening.
double dsm_loss(const ScoreNetwork& net, const Ensemble& batch, double sigma, const Ensemble& noise);

struct LossGradient {
  double loss = 0.0;
  Vector gradient;  // same layout as ScoreNetwork::parameters()
};

/// dsm_loss and its exact gradient with respect to all parameters.
LossGradient loss_gradient(const ScoreNetwork& net, const Ensemble& batch, double sigma, const Ensemble& noise);

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  /// Smoothing level, in whitened units.
  double sigma = 0.1;
  int epochs = 50;
  Index batch_size = 128;
  AdamParams adam;
  /// Cosine-anneal the learning rate to zero over the run.
  bool cosine_decay = true;
  bool warm_start = true;
  std::vector<Index> hidden_widths{128, 128};
  Activation activation = Activation::kSigmoid;

  void validate() const;
};

/// Fits a score network to the Gaussian-smoothed law of `ensemble` by DSM
/// with Adam. A fresh standard-normal perturbation is drawn for every sample
/// on every epoch. With `init` and `config.warm_start`, training starts from
/// init's weights; whitening is always recomputed from `ensemble`.
ScoreNetwork train_score(const Ensemble& ensemble, const TrainConfig& config, const ScoreNetwork* init,
                         std::uint64_t seed);

}  // namespace ssls
