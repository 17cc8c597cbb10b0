#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "tvcp/nn/adamw.hpp"
#include "tvcp/nn/graph.hpp"
#include "tvcp/rng.hpp"

using namespace tvcp;
using namespace tvcp::nn;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c, double s = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, s);
  return m;
}

// Reduce any node to a scalar via a fixed random contraction.
Var contract(Var out, std::uint64_t seed) {
  Rng rng(seed);
  Matrix r = random_matrix(rng, out.rows(), out.cols());
  Graph& g = *out.graph();
  Var h = hadamard(out, g.constant(r));
  Var row = matmul_const_left(Matrix::Ones(1, out.rows()), h);
  return matmul(row, g.constant(Matrix::Ones(out.cols(), 1)));
}

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Central differences against the tape on every scalar of every parameter.
double max_rel_error(ParameterSet& ps, const Builder& build) {
  Gradients grads(ps);
  {
    Graph g(&ps, &grads);
    std::vector<Var> p;
    for (std::size_t i = 0; i < ps.size(); ++i) p.push_back(g.param(i));
    g.backward(contract(build(g, p), 99));
  }
  auto eval = [&] {
    Graph g(&ps);
    std::vector<Var> p;
    for (std::size_t i = 0; i < ps.size(); ++i) p.push_back(g.param(i));
    return contract(build(g, p), 99).scalar();
  };
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Matrix& v = ps[k].value;
    for (Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double up = eval();
      v.data()[i] = orig - h;
      const double down = eval();
      v.data()[i] = orig;
      const double num = (up - down) / (2 * h);
      const double ana = grads[k].data()[i];
      worst = std::max(worst, std::abs(num - ana) / std::max(1.0, std::abs(num) + std::abs(ana)));
    }
  }
  return worst;
}

ParameterSet params(std::vector<std::pair<Index, Index>> shapes, std::uint64_t seed = 1) {
  Rng rng(seed);
  ParameterSet ps;
  int i = 0;
  for (auto [r, c] : shapes) ps.add("p" + std::to_string(i++), random_matrix(rng, r, c), "test");
  return ps;
}

}  // namespace

struct OpCase {
  const char* name;
  std::vector<std::pair<Index, Index>> shapes;
  Builder build;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifference) {
  auto ps = params(GetParam().shapes);
  EXPECT_LT(max_rel_error(ps, GetParam().build), 1e-6) << GetParam().name;
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"matmul", {{3, 4}, {4, 2}}, [](Graph&, auto& p) { return matmul(p[0], p[1]); }},
        OpCase{"matmul_nt", {{3, 4}, {5, 4}}, [](Graph&, auto& p) { return matmul_nt(p[0], p[1]); }},
        OpCase{"matmul_const_left", {{4, 3}},
               [](Graph&, auto& p) { return matmul_const_left(Matrix::Constant(2, 4, 0.3), p[0]); }},
        OpCase{"add", {{3, 2}, {3, 2}}, [](Graph&, auto& p) { return add(p[0], p[1]); }},
        OpCase{"sub", {{3, 2}, {3, 2}}, [](Graph&, auto& p) { return sub(p[0], p[1]); }},
        OpCase{"add_row", {{3, 4}, {1, 4}}, [](Graph&, auto& p) { return add_row(p[0], p[1]); }},
        OpCase{"hadamard", {{3, 2}, {3, 2}}, [](Graph&, auto& p) { return hadamard(p[0], p[1]); }},
        OpCase{"hadamard_self", {{3, 2}}, [](Graph&, auto& p) { return hadamard(p[0], p[0]); }},
        OpCase{"scale", {{2, 2}}, [](Graph&, auto& p) { return scale(p[0], -1.7); }},
        OpCase{"mask", {{2, 3}},
               [](Graph&, auto& p) { return mask(p[0], (Matrix(2, 3) << 1, 0, 2, 0, 1, 0).finished()); }},
        OpCase{"gelu", {{3, 3}}, [](Graph&, auto& p) { return gelu(p[0]); }},
        OpCase{"tanh", {{3, 3}}, [](Graph&, auto& p) { return tanh(p[0]); }},
        OpCase{"layer_norm", {{3, 5}, {1, 5}, {1, 5}},
               [](Graph&, auto& p) { return layer_norm(p[0], p[1], p[2]); }},
        OpCase{"softmax_rows", {{3, 4}}, [](Graph&, auto& p) { return softmax_rows(p[0]); }},
        OpCase{"slice_rows", {{5, 2}}, [](Graph&, auto& p) { return slice_rows(p[0], 1, 3); }},
        OpCase{"slice_cols", {{2, 5}}, [](Graph&, auto& p) { return slice_cols(p[0], 2, 2); }},
        OpCase{"concat_cols", {{2, 1}, {2, 3}}, [](Graph&, auto& p) { return concat_cols({p[0], p[1], p[0]}); }},
        OpCase{"concat_rows", {{1, 3}, {2, 3}}, [](Graph&, auto& p) { return concat_rows({p[0], p[1]}); }},
        OpCase{"transpose", {{2, 3}}, [](Graph&, auto& p) { return transpose(p[0]); }},
        OpCase{"cross_entropy", {{1, 3}}, [](Graph&, auto& p) { return cross_entropy(p[0], 2); }},
        OpCase{"squared_error", {{1, 1}}, [](Graph&, auto& p) { return squared_error(p[0], 0.4); }},
        OpCase{"sum_squares", {{2, 3}}, [](Graph&, auto& p) { return sum_squares(p[0]); }},
        OpCase{"embedding", {{6, 3}},
               [](Graph& g, auto&) {
                 static const int rows[] = {4, 0, 4, 2};
                 return g.embedding(0, rows);
               }},
        OpCase{"attention_block", {{4, 6}, {6, 6}, {6, 6}},
               [](Graph&, auto& p) {
                 Var q = matmul(p[0], p[1]), k = matmul(p[0], p[2]);
                 return matmul(softmax_rows(scale(matmul_nt(q, k), 0.4)), p[0]);
               }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Graph, ForwardValues) {
  ParameterSet ps;
  ps.add("x", (Matrix(1, 3) << 1.0, 2.0, 3.0).finished(), "t");
  Graph g(&ps);
  Var x = g.param(0);
  const Matrix s = softmax_rows(x).value();
  EXPECT_NEAR(s.sum(), 1.0, 1e-15);
  EXPECT_NEAR(cross_entropy(x, 2).scalar(), -std::log(s(0, 2)), 1e-12);
  EXPECT_DOUBLE_EQ(sum_squares(x).scalar(), 14.0);
  const Matrix ln = layer_norm(x, g.constant(Matrix::Ones(1, 3)), g.constant(Matrix::Zero(1, 3))).value();
  EXPECT_NEAR(ln.sum(), 0.0, 1e-12);
  EXPECT_FALSE(g.recording());
}

TEST(Graph, CrossEntropyStableForLargeLogits) {
  Graph g;
  Var x = g.constant((Matrix(1, 3) << 1000.0, 0.0, -1000.0).finished());
  EXPECT_TRUE(std::isfinite(cross_entropy(x, 1).scalar()));
  EXPECT_NEAR(cross_entropy(x, 1).scalar(), 1000.0, 1e-9);
}

TEST(Graph, GradientsAccumulateAcrossBackwardCalls) {
  ParameterSet ps;
  ps.add("w", Matrix::Constant(1, 1, 3.0), "t");
  Gradients grads(ps);
  for (int i = 0; i < 2; ++i) {
    Graph g(&ps, &grads);
    g.backward(sum_squares(g.param(0)));
  }
  EXPECT_DOUBLE_EQ(grads[0](0, 0), 12.0);
  grads.zero();
  EXPECT_DOUBLE_EQ(grads[0](0, 0), 0.0);
}

TEST(ParameterSetTest, GroupsAndCounts) {
  ParameterSet ps;
  ps.add("a", Matrix::Zero(2, 3), "embedding");
  ps.add("b", Matrix::Zero(4, 1), "head");
  EXPECT_EQ(ps.scalar_count(), 10u);
  EXPECT_EQ(ps.find("b"), 1u);
  EXPECT_FALSE(ps.find("c"));
  ps.set_trainable("embedding", false);
  EXPECT_FALSE(ps[0].trainable);
  EXPECT_TRUE(ps[1].trainable);
}

TEST(AdamWTest, FirstStepMovesByLearningRate) {
  ParameterSet ps;
  ps.add("w", (Matrix(1, 2) << 1.0, -2.0).finished(), "t");
  Gradients g(ps);
  g[0] << 0.5, -3.0;
  AdamW opt(ps, {.learning_rate = 0.1, .weight_decay = 0.0});
  opt.step(ps, g);
  // bias-corrected first step is lr * sign(grad), up to eps
  EXPECT_NEAR(ps[0].value(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(ps[0].value(0, 1), -1.9, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamWTest, DecoupledDecayWithZeroGradient) {
  ParameterSet ps;
  ps.add("w", Matrix::Constant(1, 1, 2.0), "t");
  Gradients g(ps);
  AdamW opt(ps, {.learning_rate = 0.1, .weight_decay = 0.5});
  opt.step(ps, g);
  EXPECT_NEAR(ps[0].value(0, 0), 2.0 * (1.0 - 0.1 * 0.5), 1e-12);
}

TEST(AdamWTest, FrozenParametersUntouched) {
  ParameterSet ps;
  ps.add("e", Matrix::Constant(2, 2, 1.5), "embedding");
  ps.add("h", Matrix::Constant(1, 1, 1.0), "head");
  ps.set_trainable("embedding", false);
  Gradients g(ps);
  g[0].setConstant(1.0);
  g[1].setConstant(1.0);
  AdamW opt(ps, {});
  for (int i = 0; i < 5; ++i) opt.step(ps, g);
  EXPECT_EQ(ps[0].value, Matrix::Constant(2, 2, 1.5));
  EXPECT_LT(ps[1].value(0, 0), 1.0);
}

TEST(AdamWTest, MinimisesQuadratic) {
  ParameterSet ps;
  ps.add("w", (Matrix(1, 3) << 3.0, -2.0, 0.5).finished(), "t");
  AdamW opt(ps, {.learning_rate = 0.05, .weight_decay = 0.0});
  for (int i = 0; i < 2000; ++i) {
    Gradients g(ps);
    Graph gr(&ps, &g);
    gr.backward(sum_squares(gr.param(0)));
    opt.step(ps, g);
  }
  EXPECT_LT(ps[0].value.norm(), 1e-2);
}
