#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nnse/analyses.hpp"
#include "nnse/error.hpp"
#include "testlib.hpp"

using namespace nnse;

namespace {

// logits [x, 10 - x] via a linear layer on one input.
Model linear_pair() {
  ModelSpec spec{"pair", TensorShape{1}, {LayerSpec::dense(2), LayerSpec::softmax()}};
  std::vector<LayerParams> p(2);
  p[0] = {Tensor(TensorShape{1, 2}, {1, -1}), Tensor(TensorShape{2}, {0, 10})};
  return Model(spec, p);
}

// h = relu(-x), logits [1, h]. From seed x = 3 (h inactive) only the second
// path, x < -1, changes the label.
Model hidden_flip() {
  ModelSpec spec{"flip", TensorShape{1}, {LayerSpec::dense(1), LayerSpec::relu(), LayerSpec::dense(2)}};
  std::vector<LayerParams> p(3);
  p[0] = {Tensor(TensorShape{1, 1}, {-1}), Tensor(TensorShape{1}, {0})};
  p[2] = {Tensor(TensorShape{1, 2}, {0, 1}), Tensor(TensorShape{2}, {1, 0})};
  return Model(spec, p);
}

}  // namespace

TEST(Attack, LinearPairFound) {
  AttackSpec spec{SymbolicMarking::inputs({{0}}, 0, 255), Tensor(TensorShape{1}, {2}), AnyMisclassification{}, {}, {}};
  auto r = attack(linear_pair(), spec);
  ASSERT_TRUE(r.found());
  const auto& f = std::get<Found>(r.outcome);
  EXPECT_EQ(f.original_label, 1u);
  EXPECT_EQ(f.new_label, 0u);
  EXPECT_GT(f.witness[0], Rational(5));
  EXPECT_GT(f.adversarial[0], 5.0);
  EXPECT_EQ(forward(linear_pair(), f.adversarial).prediction.label, 0u);
}

TEST(Attack, PinnedBoundsProvenRobust) {
  AttackSpec spec{SymbolicMarking::inputs({{0}}, 2, 2), Tensor(TensorShape{1}, {2}), AnyMisclassification{}, {}, {}};
  auto r = attack(linear_pair(), spec);
  EXPECT_TRUE(r.proven_robust());
}

TEST(Attack, TargetedOriginalLabelRejected) {
  AttackSpec spec{SymbolicMarking::inputs({{0}}, 0, 255), Tensor(TensorShape{1}, {2}), Targeted{1}, {}, {}};
  try {
    attack(linear_pair(), spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
  spec.goal = Targeted{0};
  EXPECT_TRUE(attack(linear_pair(), spec).found());
}

TEST(Attack, MisclassificationOnSecondPath) {
  AttackSpec spec{SymbolicMarking::inputs({{0}}, -5, 5), Tensor(TensorShape{1}, {3}), AnyMisclassification{}, {}, {}};
  auto r = attack(hidden_flip(), spec);
  ASSERT_TRUE(r.found());
  EXPECT_EQ(std::get<Found>(r.outcome).path_index, 1u);
  EXPECT_LT(std::get<Found>(r.outcome).adversarial[0], -1.0);
}

TEST(Attack, Deterministic) {
  std::mt19937_64 rng(5);
  Model m = testlib::toy_net(rng, 2, {4, 4}, 3);
  AttackSpec spec{SymbolicMarking::inputs({{0}, {1}}, -1, 1), Tensor(TensorShape{2}, {0.3, -0.4}),
                  AnyMisclassification{}, {}, {}};
  auto a = attack(m, spec);
  auto b = attack(m, spec);
  ASSERT_EQ(a.outcome.index(), b.outcome.index());
  if (a.found()) {
    EXPECT_EQ(std::get<Found>(a.outcome).witness, std::get<Found>(b.outcome).witness);
  }
}

TEST(Attack, OnlyMarkedPositionsChange) {
  std::mt19937_64 rng(6);
  Model m = testlib::small_conv_net(rng, 5, 5, 1);
  Tensor x = testlib::random_input(rng, m.input_shape(), 0, 1);
  AttackSpec spec{SymbolicMarking::inputs({{2, 2, 0}, {1, 3, 0}}, -20, 20), x, AnyMisclassification{}, {}, {}};
  auto r = attack(m, spec);
  if (r.found()) {
    const auto& f = std::get<Found>(r.outcome);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i == x.shape().flat_index(std::vector<std::size_t>{2, 2, 0}) ||
          i == x.shape().flat_index(std::vector<std::size_t>{1, 3, 0})) {
        EXPECT_GE(f.adversarial[i], -20.0);
        EXPECT_LE(f.adversarial[i], 20.0);
      } else {
        EXPECT_EQ(f.adversarial[i], x[i]);
      }
    }
    EXPECT_NE(forward(m, f.adversarial).prediction.label, r.original_label);
  }
}

TEST(Robustness, Verdicts) {
  auto robust = check_robustness(linear_pair(), Tensor(TensorShape{1}, {2}), SymbolicMarking::inputs({}, 0, 1), {});
  EXPECT_TRUE(std::holds_alternative<Robust>(robust));
  auto found = check_robustness(linear_pair(), Tensor(TensorShape{1}, {2}), SymbolicMarking::inputs({{0}}, 0, 255), {});
  EXPECT_TRUE(std::holds_alternative<CounterexampleFound>(found));
  auto limited = check_robustness(hidden_flip(), Tensor(TensorShape{1}, {3}), SymbolicMarking::inputs({{0}}, -5, 5),
                                  ExplorationBudget{1, 100, 10});
  EXPECT_TRUE(std::holds_alternative<Inconclusive>(limited));
}

TEST(Coverage, AllActive) {
  ModelSpec spec{"c", TensorShape{2}, {LayerSpec::dense(3), LayerSpec::relu(), LayerSpec::dense(2)}};
  std::vector<LayerParams> p(3);
  p[0] = {Tensor(TensorShape{2, 3}, {1, 1, 1, 1, 1, 1}), Tensor(TensorShape{3}, {0.5, 0.5, 0.5})};
  p[2] = {Tensor(TensorShape{3, 2}), Tensor(TensorShape{2})};
  Model m(spec, p);
  std::vector<Tensor> data{Tensor(TensorShape{2}, {1, 1})};
  auto r = coverage(m, data);
  EXPECT_EQ(r.neuron_coverage, 1.0);
  EXPECT_EQ(r.distinct_patterns, 1u);
  std::vector<Tensor> zeros{Tensor(TensorShape{2})};
  p[0].biases = Tensor(TensorShape{3});
  EXPECT_EQ(coverage(Model(spec, p), zeros).neuron_coverage, 0.0);
}

TEST(Coverage, MatchesRecount) {
  std::mt19937_64 rng(17);
  Model m = testlib::small_conv_net(rng, 6, 6, 1);
  std::vector<Tensor> data;
  for (int i = 0; i < 100; ++i) data.push_back(testlib::random_input(rng, m.input_shape(), -1, 1));
  auto r = coverage(m, data);
  std::vector<std::vector<bool>> hit;
  std::set<std::vector<std::uint8_t>> patterns;
  for (const auto& x : data) {
    auto ref = testlib::reference_forward(m, x.values());
    if (hit.empty()) {
      for (const auto& l : ref.relu) hit.emplace_back(l.size(), false);
    }
    std::vector<std::uint8_t> flat;
    for (std::size_t l = 0; l < ref.relu.size(); ++l) {
      for (std::size_t n = 0; n < ref.relu[l].size(); ++n) hit[l][n] = hit[l][n] || ref.relu[l][n];
      flat.insert(flat.end(), ref.relu[l].begin(), ref.relu[l].end());
    }
    patterns.insert(flat);
  }
  std::size_t total = 0, covered = 0;
  for (std::size_t l = 0; l < hit.size(); ++l) {
    std::size_t c = 0;
    for (bool b : hit[l]) c += b;
    EXPECT_EQ(r.layers[l].covered, c);
    total += hit[l].size();
    covered += c;
  }
  EXPECT_EQ(r.neurons, total);
  EXPECT_DOUBLE_EQ(r.neuron_coverage, static_cast<double>(covered) / static_cast<double>(total));
  EXPECT_EQ(r.distinct_patterns, patterns.size());
  EXPECT_LE(r.distinct_patterns, data.size());
}

TEST(Coverage, Errors) {
  Model m = linear_pair();
  try {
    coverage(m, std::vector<Tensor>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
  try {
    coverage(m, std::vector<Tensor>{Tensor(TensorShape{2})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}
