#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eegroar/layers.hpp"
#include "eegroar/network.hpp"
#include "eegroar/optim.hpp"
#include "oracles.hpp"

using namespace eegroar;
using test::conv2d_reference;
using test::dense_reference;
using test::finite_difference;
using test::maxpool2d_reference;
using test::random_tensor;
using test::relative_error;

TEST_CASE("tensor shape and indexing") {
  Tensord t({2, 3, 4});
  CHECK(t.size() == 24);
  t(1, 2, 3) = 7.0;
  CHECK(t[23] == 7.0);
  CHECK_THROWS_AS(Tensord({0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(t.reshaped({5, 5}), std::invalid_argument);
  const Tensord r = t.reshaped({4, 6});
  CHECK(r(3, 5) == 7.0);
}

TEST_CASE("conv2d forward matches hand results") {
  // all-ones 3x3 image under an all-ones 2x2 kernel
  const Tensord ones_in = Tensord::constant({1, 3, 3}, 1.0);
  const Tensord ones_w = Tensord::constant({1, 1, 2, 2}, 1.0);
  const Tensord zero_b({1});
  const Tensord out = conv2d_forward(ones_in, ones_w, zero_b);
  CHECK(out.shape() == Shape{1, 2, 2});
  for (Index i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(4.0));

  // strided 1-D difference kernel
  const Tensord line = Tensord::from_values({1, 1, 5}, {1, 2, 3, 4, 5});
  const Tensord diff = Tensord::from_values({1, 1, 1, 2}, {1, -1});
  const Tensord strided = conv2d_forward(line, diff, zero_b, 1, 2);
  CHECK(strided.shape() == Shape{1, 1, 2});
  CHECK(strided[0] == doctest::Approx(-1.0));
  CHECK(strided[1] == doctest::Approx(-1.0));
}

TEST_CASE("conv2d forward matches the loop reference") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Tensord x = random_tensor({2, 6, 8}, rng);
    const Tensord w = random_tensor({3, 2, 3, 3}, rng);
    const Tensord b = random_tensor({3}, rng);
    const Tensord fast = conv2d_forward(x, w, b);
    const Tensord slow = conv2d_reference(x, w, b, 1, 1);
    CHECK(max_abs_difference(fast, slow) < 1e-12);

    const Tensord fast2 = conv2d_forward(x, w, b, 2, 2);
    const Tensord slow2 = conv2d_reference(x, w, b, 2, 2);
    CHECK(max_abs_difference(fast2, slow2) < 1e-12);
  }
}

TEST_CASE("conv2d shape errors") {
  const Tensord x({1, 3, 3});
  CHECK_THROWS_WITH_AS(
      conv2d_forward(x, Tensord({1, 1, 4, 4}), Tensord({1})),
      doctest::Contains("larger than input"), std::invalid_argument);
  CHECK_THROWS_AS(conv2d_forward(x, Tensord({1, 2, 2, 2}), Tensord({1})),
                  std::invalid_argument);
}

TEST_CASE("conv2d backward: zero gradient, bias sums, finite differences") {
  Rng rng(12);
  const Tensord x = random_tensor({2, 5, 6}, rng);
  const Tensord w = random_tensor({3, 2, 2, 3}, rng);
  const Tensord b = random_tensor({3}, rng);

  const Tensord out = conv2d_forward(x, w, b);
  const Tensord zeros(out.shape());
  const auto zero_g = conv2d_backward(x, w, zeros, 1, 1);
  CHECK(zero_g.input.max_abs() == 0.0);
  CHECK(zero_g.weights.max_abs() == 0.0);
  CHECK(zero_g.bias.max_abs() == 0.0);

  const Tensord gout = random_tensor(out.shape(), rng);
  const auto g = conv2d_backward(x, w, gout, 1, 1);

  // bias gradient is the per-filter sum of the output gradient
  const Index cells = out.extent(1) * out.extent(2);
  for (Index f = 0; f < 3; ++f) {
    Real sum = 0;
    for (Index p = 0; p < cells; ++p) sum += gout[f * cells + p];
    CHECK(g.bias[f] == doctest::Approx(sum).epsilon(1e-12));
  }

  const auto project = [&](const Tensord& xi, const Tensord& wi,
                           const Tensord& bi) {
    return dot(conv2d_forward(xi, wi, bi), gout);
  };
  const Tensord fd_x = finite_difference(
      [&](const Tensord& t) { return project(t, w, b); }, x);
  const Tensord fd_w = finite_difference(
      [&](const Tensord& t) { return project(x, t, b); }, w);
  const Tensord fd_b = finite_difference(
      [&](const Tensord& t) { return project(x, w, t); }, b);
  CHECK(relative_error(g.input, fd_x) < 1e-4);
  CHECK(relative_error(g.weights, fd_w) < 1e-4);
  CHECK(relative_error(g.bias, fd_b) < 1e-4);
}

TEST_CASE("conv2d backward handles stride >= 2") {
  Rng rng(13);
  const Tensord x = random_tensor({1, 7, 9}, rng);
  const Tensord w = random_tensor({2, 1, 3, 3}, rng);
  const Tensord b = random_tensor({2}, rng);
  const Tensord out = conv2d_forward(x, w, b, 2, 3);
  const Tensord gout = random_tensor(out.shape(), rng);
  const auto g = conv2d_backward(x, w, gout, 2, 3);
  const Tensord fd_x = finite_difference(
      [&](const Tensord& t) { return dot(conv2d_forward(t, w, b, 2, 3), gout); },
      x);
  CHECK(relative_error(g.input, fd_x) < 1e-4);
}

TEST_CASE("maxpool forward: values, argmax, tie-breaking") {
  const Tensord m = Tensord::from_values({1, 2, 2}, {1, 2, 3, 4});
  const auto r = maxpool2d_forward(m, 2, 2);
  CHECK(r.output.size() == 1);
  CHECK(r.output[0] == 4.0);
  CHECK(r.argmax[0] == 3);  // row 1, col 1

  const Tensord flat = Tensord::constant({1, 4, 4}, 5.0);
  const auto rf = maxpool2d_forward(flat, 2, 2);
  for (Index i = 0; i < rf.output.size(); ++i) CHECK(rf.output[i] == 5.0);
  // ties resolve to the first cell of each window in row-major order
  CHECK(rf.argmax[0] == 0);
  CHECK(rf.argmax[1] == 2);
  CHECK(rf.argmax[2] == 8);
  CHECK(rf.argmax[3] == 10);

  Rng rng(14);
  const Tensord x = random_tensor({1, 10, 6}, rng);
  const auto big = maxpool2d_forward(x, 5, 2);
  CHECK(max_abs_difference(big.output, maxpool2d_reference(x, 5, 2)) == 0.0);
}

TEST_CASE("maxpool backward conserves gradient mass at the argmax") {
  Rng rng(15);
  const Tensord x = random_tensor({2, 6, 4}, rng);
  const auto fwd = maxpool2d_forward(x, 2, 2);
  const Tensord gout = random_tensor(fwd.output.shape(), rng);
  const Tensord gx = maxpool2d_backward(fwd.argmax, gout, x.shape());
  CHECK(gx.sum() == doctest::Approx(gout.sum()).epsilon(1e-12));
  // every output gradient lands on exactly one recorded input position
  Index nonzero = 0;
  for (Index i = 0; i < gx.size(); ++i)
    if (gx[i] != 0.0) ++nonzero;
  CHECK(nonzero <= gout.size());
  const Tensord fd = finite_difference(
      [&](const Tensord& t) {
        return dot(maxpool2d_forward(t, 2, 2).output, gout);
      },
      x);
  CHECK(relative_error(gx, fd) < 1e-4);
}

TEST_CASE("dense forward and backward") {
  // identity weights pass the input through
  Tensord eye({3, 3});
  for (Index i = 0; i < 3; ++i) eye(i, i) = 1.0;
  const Tensord v = Tensord::from_values({3}, {4, 5, 6});
  CHECK(max_abs_difference(dense_forward(v, eye, Tensord({3})), v) == 0.0);

  const Tensord w = Tensord::from_values({2, 2}, {1, 2, 3, 4});
  const Tensord x = Tensord::from_values({2}, {1, 1});
  const Tensord b = Tensord::from_values({2}, {0, 1});
  const Tensord y = dense_forward(x, w, b);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 8.0);

  Rng rng(16);
  const Tensord rx = random_tensor({7}, rng);
  const Tensord rw = random_tensor({4, 7}, rng);
  const Tensord rb = random_tensor({4}, rng);
  CHECK(max_abs_difference(dense_forward(rx, rw, rb),
                           dense_reference(rx, rw, rb)) < 1e-12);

  const Tensord gout = random_tensor({4}, rng);
  const auto g = dense_backward(rx, rw, gout);
  const Tensord fd_x = finite_difference(
      [&](const Tensord& t) { return dot(dense_forward(t, rw, rb), gout); },
      rx);
  const Tensord fd_w = finite_difference(
      [&](const Tensord& t) { return dot(dense_forward(rx, t, rb), gout); },
      rw);
  CHECK(relative_error(g.input, fd_x) < 1e-4);
  CHECK(relative_error(g.weights, fd_w) < 1e-4);
  CHECK(max_abs_difference(g.bias, gout) == 0.0);

  CHECK_THROWS_AS(dense_forward(Tensord({3}), rw, rb), std::invalid_argument);
}

TEST_CASE("activation backward passes match finite differences") {
  Rng rng(17);
  const Tensord x = random_tensor({2, 3, 4}, rng, -2.0, 2.0);
  const Tensord gout = random_tensor({2, 3, 4}, rng);

  const Tensord g_relu = relu_backward(x, gout);
  const Tensord fd_relu = finite_difference(
      [&](const Tensord& t) { return dot(relu_forward(t), gout); }, x);
  CHECK(relative_error(g_relu, fd_relu) < 1e-4);

  const Tensord y = sigmoid_forward(x);
  const Tensord g_sig = sigmoid_backward(y, gout);
  const Tensord fd_sig = finite_difference(
      [&](const Tensord& t) { return dot(sigmoid_forward(t), gout); }, x);
  CHECK(relative_error(g_sig, fd_sig) < 1e-4);
}

TEST_CASE("dropout scales kept units and keeps the mask for backward") {
  Rng rng(18);
  const Tensord x = random_tensor({40}, rng);
  Tensord mask;
  Rng drop_rng(99);
  const Tensord y = dropout_forward(x, 0.25, drop_rng, mask);
  Index kept = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (mask[i] == 0.0) {
      CHECK(y[i] == 0.0);
    } else {
      ++kept;
      CHECK(y[i] == doctest::Approx(x[i] / 0.75));
    }
  }
  CHECK(kept > 0);

  const Tensord gout = random_tensor({40}, rng);
  const Tensord gx = dropout_backward(mask, gout);
  // fixed mask makes the layer linear
  const Tensord fd = finite_difference(
      [&](const Tensord& t) {
        Tensord m2;
        Rng r2(99);
        return dot(dropout_forward(t, 0.25, r2, m2), gout);
      },
      x);
  CHECK(relative_error(gx, fd) < 1e-4);
}

TEST_CASE("amplitude normalization: unit peak and exact gradient") {
  Rng rng(19);
  const Tensord x = random_tensor({3, 4, 5}, rng, -2.0, 2.0);
  AmplitudeNormState<Real> state;
  const Tensord y = amplitude_norm_forward(x, state);
  for (Index c = 0; c < 3; ++c) {
    Real peak = 0;
    for (Index k = 0; k < 20; ++k)
      peak = std::max(peak, std::abs(y[c * 20 + k]));
    CHECK(peak == doctest::Approx(1.0));
  }

  const Tensord gout = random_tensor({3, 4, 5}, rng);
  const Tensord gx = amplitude_norm_backward(x, state, gout);
  const Tensord fd = finite_difference(
      [&](const Tensord& t) {
        AmplitudeNormState<Real> s;
        return dot(amplitude_norm_forward(t, s), gout);
      },
      x);
  CHECK(relative_error(gx, fd) < 1e-4);

  // all-zero maps pass through untouched
  const Tensord zeros({1, 2, 2});
  AmplitudeNormState<Real> zstate;
  CHECK(amplitude_norm_forward(zeros, zstate).max_abs() == 0.0);
}

TEST_CASE("softmax cross entropy") {
  const Tensord equal = Tensord::constant({4}, 1.5);
  const auto sym = softmax_cross_entropy(equal, 2);
  for (Index i = 0; i < 4; ++i) CHECK(sym.probs[i] == doctest::Approx(0.25));
  CHECK(sym.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));

  // confident correct answer: loss bounded by exp(-margin)
  const auto conf = softmax_cross_entropy(
      Tensord::from_values({2}, {10.0, -10.0}), 0);
  CHECK(conf.loss == doctest::Approx(std::log1p(std::exp(-20.0))));
  CHECK(conf.loss < 3e-9);

  CHECK_THROWS_AS(
      softmax_cross_entropy(Tensord::from_values({2}, {0.0, 1.0}), 2),
      std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(Tensord({1}), 0),
                  std::invalid_argument);

  Rng rng(20);
  const Tensord logits = random_tensor({5}, rng, -3.0, 3.0);
  const auto sce = softmax_cross_entropy(logits, 3);
  const Tensord fd = finite_difference(
      [&](const Tensord& t) { return softmax_cross_entropy(t, 3).loss; },
      logits);
  CHECK(relative_error(sce.grad_logits, fd) < 1e-6);
}

TEST_CASE("glorot and uniform initialization") {
  Rng rng(21);
  const Tensord g = glorot_init<Real>({3}, rng);  // fan_in = fan_out = 3
  for (Index i = 0; i < g.size(); ++i) {
    CHECK(g[i] >= -1.0);
    CHECK(g[i] <= 1.0);
  }

  Rng a(42), b(42);
  const Tensord ta = glorot_init<Real>({4, 9}, a);
  const Tensord tb = glorot_init<Real>({4, 9}, b);
  CHECK(ta == tb);

  Rng big(7);
  const Tensord sample = glorot_init<Real>({1000, 100}, big);
  const Real limit = std::sqrt(6.0 / 1100.0);
  const Real mean = sample.sum() / static_cast<Real>(sample.size());
  const Real se = limit / std::sqrt(3.0 * static_cast<Real>(sample.size()));
  CHECK(std::abs(mean) < 3 * se);

  Rng u(8);
  const Tensord ub = uniform_init<Real>({5000}, 0.0, 0.1, u);
  const Real half = 0.1 * std::sqrt(3.0);
  CHECK(ub.max() <= half);
  CHECK(ub.min() >= -half);
  Real var = 0;
  for (Index i = 0; i < ub.size(); ++i) var += ub[i] * ub[i];
  var /= static_cast<Real>(ub.size());
  CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("adam: zero gradients, first-step size, quadratic convergence") {
  AdamConfig cfg;
  cfg.lr = 1e-5;
  cfg.decay = 0;

  Tensord w = Tensord::from_values({2}, {0.5, -0.25});
  const Tensord w_before = w;
  AdamState state(cfg, {&w});
  adam_step({&w}, {Tensord({2})}, state);
  CHECK(max_abs_difference(w, w_before) == 0.0);

  Tensord scalar = Tensord::from_values({1}, {1.0});
  AdamState s2(cfg, {&scalar});
  adam_step({&scalar}, {Tensord::from_values({1}, {1.0})}, s2);
  CHECK(std::abs((1.0 - scalar[0]) - 1e-5) < 1e-12);

  // minimize w^2 from w = 1
  AdamConfig quad;
  quad.lr = 0.1;
  quad.decay = 0;
  Tensord q = Tensord::from_values({1}, {1.0});
  AdamState s3(quad, {&q});
  for (int i = 0; i < 500; ++i)
    adam_step({&q}, {Tensord::from_values({1}, {2.0 * q[0]})}, s3);
  CHECK(std::abs(q[0]) < 0.05);
}

TEST_CASE("adam learning-rate decay floors at zero") {
  AdamConfig cfg;
  cfg.lr = 1e-5;
  cfg.decay = 1e-5;  // hits zero after the first step
  Tensord w = Tensord::from_values({1}, {1.0});
  AdamState state(cfg, {&w});
  CHECK(state.effective_lr() == doctest::Approx(1e-5));
  adam_step({&w}, {Tensord::from_values({1}, {1.0})}, state);
  CHECK(state.effective_lr() == 0.0);
  const Real after_first = w[0];
  adam_step({&w}, {Tensord::from_values({1}, {1.0})}, state);
  CHECK(w[0] == after_first);
}

TEST_CASE("network forward/backward against finite differences") {
  Rng rng(22);
  Network net({2, 8, 10});
  net.add(LayerSpec::conv2d(3, 2, 3));
  net.add(LayerSpec::relu());
  net.add(LayerSpec::maxpool2d(2, 2));
  net.add(LayerSpec::amplitude_norm());
  net.add(LayerSpec::flatten());
  net.add(LayerSpec::dense(6));
  net.add(LayerSpec::sigmoid());
  net.add(LayerSpec::dense(3));
  for (Layer& l : net.layers()) {
    if (!l.spec.has_weights()) continue;
    l.weights = glorot_init<Real>(l.weights.shape(), rng);
    l.bias = uniform_init<Real>(l.bias.shape(), 0.0, 0.1, rng);
  }

  const Tensord x = random_tensor({2, 8, 10}, rng);
  std::vector<LayerCache> caches;
  const Tensord logits = forward(net, x, {}, &caches);
  const auto sce = softmax_cross_entropy(logits, 1);
  const NetworkGrads grads = backward(net, caches, sce.grad_logits);

  const auto loss_at_input = [&](const Tensord& t) {
    return softmax_cross_entropy(forward(net, t), 1).loss;
  };
  CHECK(relative_error(grads.input, finite_difference(loss_at_input, x)) <
        1e-4);

  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    if (!net.layers()[li].spec.has_weights()) continue;
    Network probe = net;
    const auto loss_at_w = [&](const Tensord& t) {
      probe.layers()[li].weights = t;
      return softmax_cross_entropy(forward(probe, x), 1).loss;
    };
    CHECK(relative_error(grads.weights[li],
                         finite_difference(loss_at_w, net.layers()[li].weights)) <
          1e-4);
    const auto loss_at_b = [&](const Tensord& t) {
      probe.layers()[li].weights = net.layers()[li].weights;
      probe.layers()[li].bias = t;
      return softmax_cross_entropy(forward(probe, x), 1).loss;
    };
    CHECK(relative_error(grads.biases[li],
                         finite_difference(loss_at_b, net.layers()[li].bias)) <
          1e-4);
  }
}

TEST_CASE("network build errors name the offending layer") {
  Network net({1, 4, 4});
  CHECK_THROWS_WITH_AS(net.add(LayerSpec::conv2d(1, 6, 6)),
                       doctest::Contains("layer 0 (conv2d)"),
                       std::invalid_argument);
  net.add(LayerSpec::conv2d(2, 3, 3));
  CHECK_THROWS_WITH_AS(net.add(LayerSpec::maxpool2d(4, 4)),
                       doctest::Contains("maxpool2d"), std::invalid_argument);
}

TEST_CASE("network serialization round-trips predictions bit-exactly") {
  Rng rng(23);
  Network net({1, 6, 8});
  net.add(LayerSpec::conv2d(2, 2, 3));
  net.add(LayerSpec::relu());
  net.add(LayerSpec::maxpool2d(2, 2));
  net.add(LayerSpec::flatten());
  net.add(LayerSpec::dense(4));
  for (Layer& l : net.layers()) {
    if (!l.spec.has_weights()) continue;
    l.weights = glorot_init<Real>(l.weights.shape(), rng);
    l.bias = uniform_init<Real>(l.bias.shape(), 0.0, 0.1, rng);
  }
  std::stringstream buffer;
  write_network(net, buffer);
  Network loaded = read_network(buffer);

  const Tensord x = random_tensor({1, 6, 8}, rng);
  const Tensord a = forward(net, x);
  const Tensord b = forward(loaded, x);
  CHECK(a == b);
}
