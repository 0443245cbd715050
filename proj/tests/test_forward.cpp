#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "nnse/error.hpp"
#include "nnse/forward.hpp"
#include "testlib.hpp"

using namespace nnse;

namespace {

Model identity_relu() {
  ModelSpec spec{"id", TensorShape{2}, {LayerSpec::dense(2), LayerSpec::relu()}};
  std::vector<LayerParams> p(2);
  p[0] = {Tensor(TensorShape{2, 2}, {1, 0, 0, 1}), Tensor(TensorShape{2}, {0, 0})};
  return Model(spec, p);
}

}  // namespace

TEST(Forward, ZeroModelGivesLabelZero) {
  std::mt19937_64 rng(1);
  Model m = testlib::small_conv_net(rng, 5, 5, 1);
  auto params = m.params();
  for (auto& p : params) {
    if (p.weights.size()) p.weights = Tensor(p.weights.shape());
    if (p.biases.size()) p.biases = Tensor(p.biases.shape());
  }
  Model zero(m.spec(), params);
  auto r = forward(zero, testlib::random_input(rng, zero.input_shape(), -5, 5));
  for (double v : r.prediction.logits.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.prediction.label, 0u);
}

TEST(Forward, IdentityDenseRelu) {
  auto r = forward(identity_relu(), Tensor(TensorShape{2}, {3, -1}));
  EXPECT_EQ(r.prediction.logits.values(), (std::vector<double>{3, 0}));
  EXPECT_EQ(r.prediction.label, 0u);
  EXPECT_FALSE(r.prediction.probabilities.has_value());
  EXPECT_EQ(r.pattern.relu[0].active, (std::vector<std::uint8_t>{1, 0}));
}

TEST(Forward, MatchesReferenceOnRandomNets) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = trial % 2 ? testlib::small_conv_net(rng, 6, 7, 2) : testlib::toy_net(rng, 5, {4, 3}, 3);
    Tensor x = testlib::random_input(rng, m.input_shape(), -2, 2);
    auto got = forward(m, x);
    auto ref = testlib::reference_forward(m, x.values());
    ASSERT_EQ(got.prediction.logits.size(), ref.logits.size());
    for (std::size_t i = 0; i < ref.logits.size(); ++i) {
      EXPECT_NEAR(got.prediction.logits[i], ref.logits[i], 1e-12 * (1 + std::abs(ref.logits[i])));
    }
    EXPECT_EQ(got.prediction.label, ref.label);
    ASSERT_EQ(got.pattern.relu.size(), ref.relu.size());
    for (std::size_t l = 0; l < ref.relu.size(); ++l) EXPECT_EQ(got.pattern.relu[l].active, ref.relu[l]);
    ASSERT_EQ(got.pattern.pool.size(), ref.pool.size());
    for (std::size_t l = 0; l < ref.pool.size(); ++l) EXPECT_EQ(got.pattern.pool[l].choice, ref.pool[l]);
  }
}

TEST(Forward, SerialAndParallelAreBitIdentical) {
  std::mt19937_64 rng(5);
  Model m = testlib::mnist_scale_model(rng);
  for (int i = 0; i < 3; ++i) {
    Tensor x = testlib::synthetic_digit(rng);
    auto a = forward(m, x, Backend::Serial);
    auto b = forward(m, x, Backend::Parallel);
    EXPECT_EQ(a.prediction.logits, b.prediction.logits);
    EXPECT_EQ(a.pattern, b.pattern);
    EXPECT_EQ(forward(m, x).prediction.logits, b.prediction.logits);
  }
}

TEST(Forward, SoftmaxProbabilities) {
  std::mt19937_64 rng(2);
  Model m = testlib::toy_net(rng, 3, {4}, 5);
  auto r = forward(m, testlib::random_input(rng, m.input_shape(), -1, 1));
  ASSERT_TRUE(r.prediction.probabilities.has_value());
  const auto& p = r.prediction.probabilities->values();
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Forward, ArgmaxOfSoftmaxEqualsArgmax) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-700, 700);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> z(1 + i % 7);
    for (double& v : z) v = d(rng);
    if (i % 5 == 0) z.back() = z.front();
    auto s = softmax(z);
    EXPECT_EQ(argmax(s), argmax(z));
  }
}

TEST(Forward, ArgmaxTieGoesToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0, 0, 0}), 0u);
}

TEST(Forward, ReluAndPoolProperties) {
  std::mt19937_64 rng(4);
  Model m = testlib::small_conv_net(rng, 6, 6, 2);
  Tensor x = testlib::random_input(rng, m.input_shape(), -3, 3);
  auto ref = testlib::reference_forward(m, x.values());
  auto got = forward(m, x);
  // Pool choice names an element that is >= all others in its window.
  ASSERT_EQ(got.pattern.pool.size(), 1u);
  EXPECT_EQ(got.pattern.pool[0].choice, ref.pool[0]);
  for (auto c : got.pattern.pool[0].choice) EXPECT_LT(c, 4u);
}

TEST(Forward, ShapeAndFiniteErrors) {
  Model m = identity_relu();
  try {
    forward(m, Tensor(TensorShape{3}, {1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  ModelSpec spec{"big", TensorShape{1}, {LayerSpec::dense(1), LayerSpec::dense(1)}};
  std::vector<LayerParams> p(2);
  p[0] = {Tensor(TensorShape{1, 1}, {1e300}), Tensor(TensorShape{1}, {0})};
  p[1] = {Tensor(TensorShape{1, 1}, {1e300}), Tensor(TensorShape{1}, {0})};
  try {
    forward(Model(spec, p), Tensor(TensorShape{1}, {1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteActivation);
  }
}

TEST(EvaluateDataset, Accuracy) {
  Model m = identity_relu();
  std::vector<Tensor> xs{Tensor(TensorShape{2}, {3, -1})};
  std::vector<std::size_t> ys{0};
  EXPECT_EQ(evaluate_dataset(m, xs, ys), 1.0);
  xs.push_back(Tensor(TensorShape{2}, {0, 5}));
  ys.push_back(0);
  EXPECT_EQ(evaluate_dataset(m, xs, ys), 0.5);
  try {
    evaluate_dataset(m, std::vector<Tensor>{}, std::vector<std::size_t>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
  std::vector<Tensor> bad{Tensor(TensorShape{3})};
  EXPECT_THROW(evaluate_dataset(m, bad, std::vector<std::size_t>{0}), Error);
}
