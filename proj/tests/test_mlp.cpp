#include <doctest.h>

#include <cstring>
#include <random>

#include "oracles.hpp"
#include "poprl/error.hpp"
#include "poprl/mlp.hpp"
#include "poprl/rng.hpp"

using namespace poprl;

namespace {

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

// Inputs whose hidden preactivations sit close to a ReLU kink make finite
// differences unreliable; resample until every one is clear of zero.
bool kink_free(const NetworkSpec& spec, const Vec& params, const Vec& input) {
  MlpTrace trace;
  forward_batch(spec, params, input, &trace);
  for (size_t l = 0; l + 1 < trace.inputs.size(); ++l)
    if (trace.relu_in[l].cwiseAbs().minCoeff() < 1e-3) return false;
  return true;
}

}  // namespace

TEST_CASE("parameter count and layout round-trip") {
  NetworkSpec spec{3, {5, 4}, 2, OutputActivation::Tanh, true};
  CHECK(spec.param_count() == (5 * 3 + 5) + (4 * 5 + 4) + (2 * 4 + 2));

  auto rng = make_rng(11, Stream::NetInit);
  const Vec params = init_params(spec, rng);
  REQUIRE(params.size() == spec.param_count());

  // Reassemble the flat vector from the per-layer views.
  Vec rebuilt(spec.param_count());
  int offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const Mat w = weight_view(spec, params, l);
    const Vec b = bias_view(spec, params, l);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        rebuilt[offset++] = w(r, c);
    for (Eigen::Index r = 0; r < b.size(); ++r) rebuilt[offset++] = b[r];
  }
  CHECK(rebuilt == params);  // bit-exact
}

TEST_CASE("all-zero parameters with tanh output give the zero vector") {
  NetworkSpec spec{4, {8}, 3, OutputActivation::Tanh, false};
  const Vec params = Vec::Zero(spec.param_count());
  auto rng = make_rng(3, Stream::NetInit);
  const Vec out = forward(spec, params, random_vec(rng, 4));
  CHECK(out.isZero(0.0));
}

TEST_CASE("forward matches the naive scalar-loop oracle") {
  auto rng = make_rng(7, Stream::NetInit);
  for (int trial = 0; trial < 30; ++trial) {
    NetworkSpec spec{2 + trial % 4,
                     trial % 3 == 0 ? std::vector<int>{6}
                                    : std::vector<int>{5, 4},
                     1 + trial % 3,
                     trial % 2 == 0 ? OutputActivation::Tanh
                                    : OutputActivation::Identity,
                     trial % 2 == 1};
    const Vec params = init_params(spec, rng);
    const Vec input = random_vec(rng, spec.input_dim);

    const Vec got = forward(spec, params, input);
    const std::vector<double> expect = oracle::naive_forward(
        spec, {params.data(), params.data() + params.size()},
        {input.data(), input.data() + input.size()});

    REQUIRE(got.size() == static_cast<Eigen::Index>(expect.size()));
    for (Eigen::Index i = 0; i < got.size(); ++i)
      CHECK(std::abs(got[i] - expect[static_cast<size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("forward determinism and tanh boundedness") {
  NetworkSpec spec{3, {6, 6}, 2, OutputActivation::Tanh, true};
  auto rng = make_rng(13, Stream::NetInit);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec params = random_vec(rng, spec.param_count(), 3.0);
    const Vec input = random_vec(rng, 3, 5.0);
    const Vec a = forward(spec, params, input);
    const Vec b = forward(spec, params, input);
    CHECK(std::memcmp(a.data(), b.data(),
                      sizeof(double) * static_cast<size_t>(a.size())) == 0);
    CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("batched forward equals per-sample forward") {
  NetworkSpec spec{4, {7, 5}, 3, OutputActivation::Tanh, true};
  auto rng = make_rng(17, Stream::NetInit);
  const Vec params = init_params(spec, rng);
  Mat inputs(4, 9);
  for (int j = 0; j < 9; ++j) inputs.col(j) = random_vec(rng, 4);
  const Mat batch = forward_batch(spec, params, inputs);
  for (int j = 0; j < 9; ++j) {
    const Vec single = forward(spec, params, Vec(inputs.col(j)));
    CHECK((batch.col(j) - single).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("linear 1x1 network gradients follow the product rule") {
  NetworkSpec spec{1, {}, 1, OutputActivation::Identity, false};
  Vec params(2);
  params << 1.7, 0.0;  // weight w, bias 0
  Vec input(1), upstream(1);
  input << 0.4;
  upstream << 1.0;
  const auto [param_grad, input_grad] = backward(spec, params, input, upstream);
  CHECK(param_grad[0] == doctest::Approx(0.4).epsilon(1e-14));  // d/dw = x
  CHECK(param_grad[1] == doctest::Approx(1.0).epsilon(1e-14));  // d/db = 1
  CHECK(input_grad[0] == doctest::Approx(1.7).epsilon(1e-14));  // d/dx = w
}

TEST_CASE("zero upstream gives zero gradients") {
  NetworkSpec spec{3, {5}, 2, OutputActivation::Tanh, true};
  auto rng = make_rng(23, Stream::NetInit);
  const Vec params = init_params(spec, rng);
  const auto [param_grad, input_grad] =
      backward(spec, params, random_vec(rng, 3), Vec::Zero(2));
  CHECK(param_grad.isZero(0.0));
  CHECK(input_grad.isZero(0.0));
}

TEST_CASE("analytic gradients match central finite differences") {
  auto rng = make_rng(29, Stream::NetInit);
  int checked = 0;
  int attempts = 0;
  while (checked < 24 && attempts < 200) {
    ++attempts;
    const bool actor_style = attempts % 2 == 0;
    NetworkSpec spec{2 + attempts % 3,
                     {4 + attempts % 3, 4},
                     1 + attempts % 2,
                     actor_style ? OutputActivation::Tanh
                                 : OutputActivation::Identity,
                     actor_style};
    const Vec params = init_params(spec, rng);
    const Vec input = random_vec(rng, spec.input_dim);
    const Vec upstream = random_vec(rng, spec.output_dim);
    if (!kink_free(spec, params, input)) continue;

    const auto [param_grad, input_grad] =
        backward(spec, params, input, upstream);

    const Vec fd_params = oracle::central_diff(
        [&](const Vec& p) { return upstream.dot(forward(spec, p, input)); },
        params);
    const Vec fd_input = oracle::central_diff(
        [&](const Vec& x) { return upstream.dot(forward(spec, params, x)); },
        input);

    CHECK(oracle::gradients_close(param_grad, fd_params));
    CHECK(oracle::gradients_close(input_grad, fd_input));
    ++checked;
  }
  // The kink guard must not starve the suite.
  CHECK(checked >= 24);
}

TEST_CASE("batched backward accumulates per-sample gradients") {
  NetworkSpec spec{3, {6}, 2, OutputActivation::Tanh, true};
  auto rng = make_rng(31, Stream::NetInit);
  const Vec params = init_params(spec, rng);
  Mat inputs(3, 5);
  Mat upstream(2, 5);
  for (int j = 0; j < 5; ++j) {
    inputs.col(j) = random_vec(rng, 3);
    upstream.col(j) = random_vec(rng, 2);
  }
  MlpTrace trace;
  forward_batch(spec, params, inputs, &trace);
  const BackwardResult batch = backward_batch(spec, params, trace, upstream);

  Vec summed = Vec::Zero(params.size());
  for (int j = 0; j < 5; ++j) {
    const auto [g, gi] =
        backward(spec, params, Vec(inputs.col(j)), Vec(upstream.col(j)));
    summed += g;
    CHECK((batch.input_grad.col(j) - gi).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK((batch.param_grad - summed).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Vec params(3);
  params << 1.0, -2.0, 0.5;
  const Vec before = params;
  AdamState state = AdamState::zeros(3);
  adam_step(params, Vec::Zero(3), state, 3e-4);
  CHECK(params == before);
}

TEST_CASE("adam: first step from zero moments has near-lr magnitude") {
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps) per
  // coordinate: lr scaled down by an eps-sized factor.
  Vec params(2);
  params << 1.0, -1.0;
  Vec grad(2);
  grad << 0.3, -0.2;
  AdamState state = AdamState::zeros(2);
  const double lr = 3e-4;
  adam_step(params, grad, state, lr);

  const double expected0 = 1.0 - lr * 0.3 / (0.3 + 1e-8);
  const double expected1 = -1.0 + lr * 0.2 / (0.2 + 1e-8);
  CHECK(params[0] == doctest::Approx(expected0).epsilon(1e-14));
  CHECK(params[1] == doctest::Approx(expected1).epsilon(1e-14));
  CHECK(std::abs(params[0] - (1.0 - lr)) <= 1e-10);
  CHECK(state.t == 1);
}

TEST_CASE("adam rejects non-finite gradients") {
  Vec params = Vec::Ones(2);
  Vec grad(2);
  grad << 1.0, std::nan("");
  AdamState state = AdamState::zeros(2);
  CHECK_THROWS_AS(adam_step(params, grad, state, 1e-3), Error);
}

TEST_CASE("dimension mismatches are configuration errors") {
  NetworkSpec spec{3, {4}, 2, OutputActivation::Tanh, false};
  auto rng = make_rng(37, Stream::NetInit);
  const Vec params = init_params(spec, rng);
  CHECK_THROWS_AS(forward(spec, params, Vec::Zero(5)), Error);
  CHECK_THROWS_AS(forward(spec, Vec::Zero(3), Vec::Zero(3)), Error);
  CHECK_THROWS_AS(backward(spec, params, Vec::Zero(3), Vec::Zero(7)), Error);
}
