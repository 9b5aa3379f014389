#pragma once

#include <random>
#include <utility>
#include <vector>

#include "poprl/common.hpp"

namespace poprl {

enum class OutputActivation { Tanh, Identity };

/// Architecture of a fully connected network with ReLU hidden units.
/// When `layer_norm` is set, a non-learned normalization (scale 1, shift 0)
/// is applied to each hidden preactivation before the ReLU.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  OutputActivation output_activation = OutputActivation::Tanh;
  bool layer_norm = false;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
  int param_count() const;
  void validate() const;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Flat parameter layout: for each layer, the column-major (out x in) weight
/// matrix followed by the bias vector. Matrix views over a flat vector and
/// flattening them back is the identity.
Mat weight_view(const NetworkSpec& spec, const Vec& params, int layer);
Vec bias_view(const NetworkSpec& spec, const Vec& params, int layer);

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, weights and
/// biases alike.
Vec init_params(const NetworkSpec& spec, std::mt19937_64& rng);

/// Per-layer values retained by a forward pass for the matching backward pass.
struct MlpTrace {
  std::vector<Mat> inputs;    // inputs[l]: activation entering layer l
  std::vector<Mat> relu_in;   // hidden layers: value fed to the ReLU
  std::vector<Eigen::RowVectorXd> ln_inv_sigma;  // 1/sqrt(var+eps) per column
  Mat output;
};

/// Batched forward pass; `inputs` holds one sample per column.
Mat forward_batch(const NetworkSpec& spec, const Vec& params, const Mat& inputs,
                  MlpTrace* trace = nullptr);

Vec forward(const NetworkSpec& spec, const Vec& params, const Vec& input);

struct BackwardResult {
  Vec param_grad;   // gradient of sum_i upstream_i . output_i
  Mat input_grad;   // same quantity w.r.t. each input column
};

/// Reverse pass for the forward call that produced `trace`. `upstream` holds
/// d(loss)/d(output) per column; the returned parameter gradient is summed
/// over the batch.
BackwardResult backward_batch(const NetworkSpec& spec, const Vec& params,
                              const MlpTrace& trace, const Mat& upstream);

std::pair<Vec, Vec> backward(const NetworkSpec& spec, const Vec& params,
                             const Vec& input, const Vec& upstream);

struct AdamState {
  Vec m;
  Vec v;
  long t = 0;

  static AdamState zeros(Eigen::Index n);
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam descent step with bias correction; moments updated in place.
/// Rejects non-finite gradients.
void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace poprl
