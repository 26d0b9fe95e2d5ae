#include <doctest.h>

#include "ganf/tensor.hpp"
#include "oracles.hpp"

using namespace ganf;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("shape invariants and constructors") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK_FALSE(t.has_grad());
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 0}, {}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), NumericError);
}

TEST_CASE("conv2d scaling and mean examples") {
  auto x = Tensor::full({1, 1, 3, 3}, 1.0);
  auto w = Tensor::from({1, 1, 1, 1}, {2.0});
  auto y = conv2d(x, w);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.data()) CHECK(v == 2.0);

  auto x2 = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y2 = conv2d(x2, Tensor::full({1, 1, 2, 2}, 0.25));
  CHECK(y2.shape() == Shape{1, 1, 1, 1});
  CHECK(y2.item() == 2.5);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  std::mt19937_64 rng(1);
  auto x = oracle::random_tensor({1, 2, 8, 8}, rng);
  auto w = oracle::random_tensor({3, 2, 3, 3}, rng);
  std::size_t oh, ow;
  CHECK(max_abs_diff(conv2d(x, w).data(), oracle::conv2d(x, w, nullptr, 1, 0, oh, ow)) < 1e-12);

  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1, 2}) {
      auto xb = oracle::random_tensor({2, 3, 7, 6}, rng);
      auto wb = oracle::random_tensor({4, 3, 3, 2}, rng);
      auto b = oracle::random_tensor({4}, rng);
      auto y = conv2d(xb, wb, b, stride, pad);
      const auto ref = oracle::conv2d(xb, wb, &b, stride, pad, oh, ow);
      CHECK(y.shape() == Shape{2, 4, oh, ow});
      CHECK(max_abs_diff(y.data(), ref) < 1e-12);
    }
  }
}

TEST_CASE("conv2d rejects bad shapes with the offending dimension") {
  auto x = Tensor::zeros({1, 2, 4, 4});
  CHECK_THROWS_WITH_AS(conv2d(x, Tensor::zeros({1, 3, 3, 3})), doctest::Contains("channel"), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 5, 5})), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), 0, 0), ShapeError);
}

TEST_CASE("conv2d_transposed examples") {
  const double c = 1.5;
  auto k = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = conv2d_transposed(Tensor::from({1, 1, 1, 1}, {c}), k, 2);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == c * k.data()[i]);

  auto y2 = conv2d_transposed(Tensor::full({1, 1, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2}, 0.25), 2);
  CHECK(y2.shape() == Shape{1, 1, 4, 4});
  for (double v : y2.data()) CHECK(v == 0.25);
}

TEST_CASE("adjoint identity between conv2d and conv2d_transposed") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t stride = 1 + trial % 2, k = 2 + trial % 3;
    const std::size_t h = 5 + trial % 4, w = 6 + trial % 3;
    auto x = oracle::random_tensor({2, 3, h, w}, rng);
    auto wt = oracle::random_tensor({4, 3, k, k}, rng);
    auto y = conv2d(x, wt, stride, 0);
    auto g = oracle::random_tensor(y.shape(), rng);
    auto xt = conv2d_transposed(g, wt, stride);
    // The transposed output covers the input window actually read by conv2d.
    double rhs = 0.0;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < xt.dim(2); ++i)
          for (std::size_t j = 0; j < xt.dim(3); ++j) rhs += x.at({b, c, i, j}) * xt.at({b, c, i, j});
    const double lhs = oracle::dot(y.data(), g.data());
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("conv2d_transposed matches the adjoint computed by finite differences") {
  // The map x -> <conv2d(x, w), g> is linear, so its central difference
  // along e_i is exactly column i of the adjoint.
  std::mt19937_64 rng(3);
  auto g = oracle::random_tensor({1, 2, 3, 3}, rng);
  auto w = oracle::random_tensor({2, 3, 3, 3}, rng);
  auto xt = conv2d_transposed(g, w, 2);
  REQUIRE(xt.shape() == Shape{1, 3, 7, 7});
  auto x = Tensor::zeros({1, 3, 7, 7});
  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double h = 1e-3;
    x.mutable_data()[i] = h;
    const double up = oracle::dot(conv2d(x, w, 2, 0).data(), g.data());
    x.mutable_data()[i] = -h;
    const double down = oracle::dot(conv2d(x, w, 2, 0).data(), g.data());
    x.mutable_data()[i] = 0.0;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - xt.data()[i]) / std::max(1e-3, std::abs(numeric)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("elementwise examples") {
  CHECK(ganf::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(relu(Tensor::scalar(-3.0)).item() == 0.0);
  CHECK(leaky_relu(Tensor::scalar(-3.0), 0.2).item() == doctest::Approx(-0.6));
  std::mt19937_64 rng(4);
  auto x = oracle::random_tensor({2, 3, 4}, rng);
  CHECK(l1_distance(x, x).item() == 0.0);
  CHECK(l1_distance(Tensor::zeros({2, 2}), Tensor::full({2, 2}, 0.1)).item() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(add(x, Tensor::scalar(1.0)).at({1, 2, 3}) == x.at({1, 2, 3}) + 1.0);
  CHECK(mul(Tensor::scalar(2.0), x).at({0, 1, 2}) == 2.0 * x.at({0, 1, 2}));
  CHECK_THROWS_AS(add(x, Tensor::zeros({3, 2, 4})), ShapeError);
  CHECK(mean(Tensor::from({4}, {1, 2, 3, 6})).item() == 3.0);
  CHECK(sum(Tensor::from({4}, {1, 2, 3, 6})).item() == 12.0);
}

TEST_CASE("instance_norm examples") {
  auto gamma = Tensor::full({1}, 1.0), beta = Tensor::zeros({1});
  auto c = instance_norm(Tensor::full({1, 1, 2, 2}, 3.0), gamma, beta);
  for (double v : c.data()) CHECK(v == 0.0);

  auto two = instance_norm(Tensor::from({1, 1, 1, 2}, {1, 3}), gamma, beta, 1e-300);
  CHECK(two.data()[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(two.data()[1] == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(5);
  auto x = oracle::random_tensor({2, 3, 5, 5}, rng, false, -4.0, 7.0);
  auto y = instance_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), 1e-12);
  for (std::size_t s = 0; s < 6; ++s) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 25; ++i) m += y.data()[s * 25 + i];
    m /= 25;
    for (std::size_t i = 0; i < 25; ++i) v += (y.data()[s * 25 + i] - m) * (y.data()[s * 25 + i] - m);
    v /= 25;
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
  CHECK_THROWS_AS(instance_norm(Tensor::zeros({1, 1, 1, 1}), gamma, beta), ShapeError);
}

TEST_CASE("backward examples and policies") {
  std::mt19937_64 rng(6);
  auto x = oracle::random_tensor({3, 4}, rng, true);
  sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  sum(mul(x, x)).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 2.0 * x.data()[i]);

  CHECK_THROWS_AS(mul(x, x).backward(), ShapeError);
  CHECK_THROWS(sum(Tensor::zeros({2})).backward());

  // Gradients accumulate across backward calls until zero_grad.
  x.zero_grad();
  auto loss = sum(x);
  loss.backward();
  loss.backward();
  for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("tape visits each operation once in reverse topological order") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  auto a = mul(x, x);
  auto b = add(a, x);
  auto c = add(b, a);  // a is shared
  auto loss = sum(c);
  auto tape = Tape::record(loss);
  CHECK(tape.size() == 4);
  const auto& order = tape.order();
  CHECK(order.front() == &loss.node());
  auto pos = [&](const Tensor& t) { return std::find(order.begin(), order.end(), &t.node()) - order.begin(); };
  CHECK(pos(c) < pos(b));
  CHECK(pos(b) < pos(a));
  CHECK(pos(c) < pos(a));
  tape.replay();
  // d/dx (2x^2 + x) = 4x + 1
  CHECK(x.grad()[0] == 5.0);
  CHECK(x.grad()[1] == 9.0);
}

TEST_CASE("no-grad mode records nothing") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node().parents.empty());
}

TEST_CASE("finite gradient check of every differentiable op") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = oracle::away_from_zero(oracle::random_tensor({2, 3, 4, 4}, rng, true));
    auto b = oracle::away_from_zero(oracle::random_tensor({2, 3, 4, 4}, rng, true));
    auto w = oracle::random_tensor({2, 3, 3, 3}, rng, true);
    auto bias = oracle::random_tensor({2}, rng, true);
    auto wt = oracle::random_tensor({3, 2, 3, 3}, rng, true);
    auto gamma = oracle::random_tensor({3}, rng, true, 0.5, 1.5);
    auto beta = oracle::random_tensor({3}, rng, true);
    auto s = oracle::random_tensor({1}, rng, true);
    // Weighted sums keep the upstream gradient generic.
    auto probe = [&](const Tensor& t) {
      std::mt19937_64 prng(99);
      return sum(mul(t, oracle::random_tensor(t.shape(), prng)));
    };
    const std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
        {"add", [&] { return probe(add(a, b)); }},
        {"sub", [&] { return probe(sub(a, b)); }},
        {"mul", [&] { return probe(mul(a, b)); }},
        {"mul_scalar", [&] { return probe(mul(a, s)); }},
        {"scale", [&] { return probe(scale(a, -1.7)); }},
        {"add_scalar", [&] { return probe(add_scalar(a, 0.3)); }},
        {"relu", [&] { return probe(relu(a)); }},
        {"leaky_relu", [&] { return probe(leaky_relu(a, 0.2)); }},
        {"tanh", [&] { return probe(ganf::tanh(a)); }},
        {"mean", [&] { return mul(mean(a), mean(b)); }},
        {"sum", [&] { return mul(sum(a), sum(b)); }},
        {"l1_distance", [&] { return l1_distance(a, b); }},
        {"conv2d", [&] { return probe(conv2d(a, w, bias, 1 + trial % 2, trial % 2)); }},
        {"conv2d_transposed", [&] { return probe(conv2d_transposed(a, wt, 2)); }},
        {"add_channel_bias", [&] { return probe(add_channel_bias(a, beta)); }},
        {"crop2d", [&] { return probe(crop2d(a, 1, 0, 2, 3)); }},
        {"pad_replicate", [&] { return probe(pad_replicate(a, 2)); }},
        {"upsample_nearest2x", [&] { return probe(upsample_nearest2x(a)); }},
        {"instance_norm", [&] { return probe(instance_norm(a, gamma, beta)); }},
    };
    for (const auto& [name, fn] : cases) {
      auto r = oracle::check_gradients(fn, {a, b, w, bias, wt, gamma, beta, s});
      INFO(std::string(name) << " trial " << trial);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("two-layer conv net parameters pass the finite-difference check") {
  std::mt19937_64 rng(8);
  auto x = oracle::random_tensor({1, 2, 6, 6}, rng);
  auto w1 = oracle::random_tensor({3, 2, 3, 3}, rng, true);
  auto b1 = oracle::random_tensor({3}, rng, true);
  auto w2 = oracle::random_tensor({2, 3, 3, 3}, rng, true);
  auto b2 = oracle::random_tensor({2}, rng, true);
  auto target = oracle::random_tensor({1, 2, 6, 6}, rng);
  auto f = [&] { return l1_distance(conv2d(ganf::tanh(conv2d(x, w1, b1, 1, 1)), w2, b2, 1, 1), target); };
  CHECK(oracle::check_gradients(f, {w1, b1, w2, b2}).max_relative_error < 1e-4);
}

TEST_CASE("identical inputs give bitwise-identical outputs") {
  std::mt19937_64 r1(9), r2(9);
  auto x1 = oracle::random_tensor({1, 3, 9, 9}, r1), x2 = oracle::random_tensor({1, 3, 9, 9}, r2);
  auto w1 = oracle::random_tensor({4, 3, 3, 3}, r1), w2 = oracle::random_tensor({4, 3, 3, 3}, r2);
  auto y1 = conv2d(x1, w1, 2, 1), y2 = conv2d(x2, w2, 2, 1);
  CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

}  // TEST_SUITE
