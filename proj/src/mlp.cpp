#include "poprl/mlp.hpp"

#include <cmath>
#include <string>

#include "poprl/error.hpp"

namespace poprl {

int NetworkSpec::layer_in(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[static_cast<size_t>(layer - 1)];
}

int NetworkSpec::layer_out(int layer) const {
  return layer == num_layers() - 1 ? output_dim
                                   : hidden_dims[static_cast<size_t>(layer)];
}

int NetworkSpec::param_count() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l) n += layer_out(l) * (layer_in(l) + 1);
  return n;
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    fail(ErrorCategory::Config, "network dimensions must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) fail(ErrorCategory::Config, "hidden dimensions must be >= 1");
}

namespace {

struct LayerMap {
  Eigen::Map<const Mat> W;
  Eigen::Map<const Vec> b;
};

LayerMap map_layer(const NetworkSpec& spec, const double* p, int layer,
                   int* offset) {
  const int rows = spec.layer_out(layer);
  const int cols = spec.layer_in(layer);
  Eigen::Map<const Mat> W(p + *offset, rows, cols);
  *offset += rows * cols;
  Eigen::Map<const Vec> b(p + *offset, rows);
  *offset += rows;
  return {W, b};
}

int layer_offset(const NetworkSpec& spec, int layer) {
  int offset = 0;
  for (int l = 0; l < layer; ++l)
    offset += spec.layer_out(l) * (spec.layer_in(l) + 1);
  return offset;
}

void check_params(const NetworkSpec& spec, const Vec& params) {
  if (params.size() != spec.param_count())
    fail(ErrorCategory::Config,
         "parameter vector length " + std::to_string(params.size()) +
             " does not match spec parameter count " +
             std::to_string(spec.param_count()));
}

// Fixed layer normalization: zero-mean, unit-variance per column, no learned
// affine. Returns 1/sqrt(var+eps) per column for the backward pass.
Eigen::RowVectorXd layer_norm_inplace(Mat& z) {
  const double inv_n = 1.0 / static_cast<double>(z.rows());
  Eigen::RowVectorXd mean = z.colwise().sum() * inv_n;
  z.rowwise() -= mean;
  Eigen::RowVectorXd var = z.colwise().squaredNorm() * inv_n;
  Eigen::RowVectorXd inv_sigma =
      (var.array() + kLayerNormEpsilon).rsqrt().matrix();
  z.array().rowwise() *= inv_sigma.array();
  return inv_sigma;
}

}  // namespace

Mat weight_view(const NetworkSpec& spec, const Vec& params, int layer) {
  check_params(spec, params);
  int offset = layer_offset(spec, layer);
  return map_layer(spec, params.data(), layer, &offset).W;
}

Vec bias_view(const NetworkSpec& spec, const Vec& params, int layer) {
  check_params(spec, params);
  int offset = layer_offset(spec, layer);
  return map_layer(spec, params.data(), layer, &offset).b;
}

Vec init_params(const NetworkSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  Vec params(spec.param_count());
  int offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_in(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const int n = spec.layer_out(l) * (spec.layer_in(l) + 1);
    for (int i = 0; i < n; ++i) params[offset + i] = dist(rng);
    offset += n;
  }
  return params;
}

Mat forward_batch(const NetworkSpec& spec, const Vec& params, const Mat& inputs,
                  MlpTrace* trace) {
  spec.validate();
  check_params(spec, params);
  if (inputs.rows() != spec.input_dim)
    fail(ErrorCategory::Config,
         "input dimension " + std::to_string(inputs.rows()) +
             " does not match spec input_dim " +
             std::to_string(spec.input_dim));

  const int layers = spec.num_layers();
  if (trace) {
    trace->inputs.assign(static_cast<size_t>(layers), Mat());
    trace->relu_in.assign(static_cast<size_t>(layers), Mat());
    trace->ln_inv_sigma.assign(static_cast<size_t>(layers),
                               Eigen::RowVectorXd());
  }

  Mat a = inputs;
  int offset = 0;
  for (int l = 0; l < layers; ++l) {
    if (trace) trace->inputs[static_cast<size_t>(l)] = a;
    const auto [W, b] = map_layer(spec, params.data(), l, &offset);
    Mat z = W * a;
    z.colwise() += b;
    if (l < layers - 1) {
      if (spec.layer_norm) {
        Eigen::RowVectorXd inv_sigma = layer_norm_inplace(z);
        if (trace) trace->ln_inv_sigma[static_cast<size_t>(l)] = inv_sigma;
      }
      if (trace) trace->relu_in[static_cast<size_t>(l)] = z;
      a = z.cwiseMax(0.0);
    } else {
      if (spec.output_activation == OutputActivation::Tanh)
        a = z.array().tanh().matrix();
      else
        a = std::move(z);
    }
  }
  if (trace) trace->output = a;
  return a;
}

Vec forward(const NetworkSpec& spec, const Vec& params, const Vec& input) {
  return forward_batch(spec, params, input);
}

BackwardResult backward_batch(const NetworkSpec& spec, const Vec& params,
                              const MlpTrace& trace, const Mat& upstream) {
  check_params(spec, params);
  if (upstream.rows() != spec.output_dim ||
      upstream.cols() != trace.output.cols())
    fail(ErrorCategory::Config, "upstream shape does not match network output");

  const int layers = spec.num_layers();
  BackwardResult result;
  result.param_grad = Vec::Zero(spec.param_count());

  // d(loss)/d(preactivation) of the output layer.
  Mat g;
  if (spec.output_activation == OutputActivation::Tanh)
    g = upstream.cwiseProduct(
        (1.0 - trace.output.array().square()).matrix());
  else
    g = upstream;

  for (int l = layers - 1; l >= 0; --l) {
    const Mat& a_in = trace.inputs[static_cast<size_t>(l)];
    const int base = layer_offset(spec, l);
    int off = base;
    const auto [W, b] = map_layer(spec, params.data(), l, &off);

    const int rows = spec.layer_out(l);
    const int cols = spec.layer_in(l);
    Eigen::Map<Mat> dW(result.param_grad.data() + base, rows, cols);
    Eigen::Map<Vec> db(result.param_grad.data() + base + rows * cols, rows);
    dW.noalias() = g * a_in.transpose();
    db = g.rowwise().sum();

    Mat d_in = W.transpose() * g;
    if (l == 0) {
      result.input_grad = std::move(d_in);
      break;
    }

    // Through the previous layer's ReLU (and normalization when enabled).
    const Mat& relu_in = trace.relu_in[static_cast<size_t>(l - 1)];
    g = d_in.cwiseProduct((relu_in.array() > 0.0).cast<double>().matrix());
    if (spec.layer_norm) {
      const Eigen::RowVectorXd& inv_sigma =
          trace.ln_inv_sigma[static_cast<size_t>(l - 1)];
      const double inv_n = 1.0 / static_cast<double>(relu_in.rows());
      Eigen::RowVectorXd g_mean = g.colwise().sum() * inv_n;
      Eigen::RowVectorXd gx_mean =
          g.cwiseProduct(relu_in).colwise().sum() * inv_n;
      g.noalias() -= relu_in * gx_mean.asDiagonal();
      g.rowwise() -= g_mean;
      g.array().rowwise() *= inv_sigma.array();
    }
  }
  return result;
}

std::pair<Vec, Vec> backward(const NetworkSpec& spec, const Vec& params,
                             const Vec& input, const Vec& upstream) {
  MlpTrace trace;
  forward_batch(spec, params, input, &trace);
  BackwardResult r = backward_batch(spec, params, trace, upstream);
  return {std::move(r.param_grad), Vec(r.input_grad.col(0))};
}

AdamState AdamState::zeros(Eigen::Index n) {
  AdamState s;
  s.m = Vec::Zero(n);
  s.v = Vec::Zero(n);
  s.t = 0;
  return s;
}

void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (lr <= 0.0) fail(ErrorCategory::Config, "learning rate must be positive");
  if (grad.size() != params.size() || state.m.size() != params.size())
    fail(ErrorCategory::Config, "gradient/moment size mismatch");
  if (!grad.allFinite()) {
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < grad.size(); ++i)
      if (!std::isfinite(grad[i])) { bad = i; break; }
    fail(ErrorCategory::Numeric,
         "non-finite gradient at coordinate " + std::to_string(bad));
  }

  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = (cfg.beta2 * state.v.array() +
             (1.0 - cfg.beta2) * grad.array().square())
                .matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  params.array() -= lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace poprl
