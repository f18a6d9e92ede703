#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "hybrid/attention.hpp"
#include "hybrid/rng.hpp"

using namespace hybrid;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * (rng.unit() * 2.0 - 1.0);
  return m;
}

AttentionParams zero_qk_head(std::size_t d) {
  AttentionParams p;
  p.w_q = Matrix(1, d);
  p.w_k = Matrix(1, d);
  p.w_v = Matrix::identity(d);
  return p;
}

}  // namespace

TEST(AttentionHead, SingleKeyGetsAllWeight) {
  AttentionParams p = zero_qk_head(3);
  p.window = 1;
  const Matrix x{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  EXPECT_EQ(attention_head(p, x), x);
}

TEST(AttentionHead, PreviousTokenSelectorThroughBias) {
  AttentionParams p = zero_qk_head(2);
  p.window = 2;
  p.null_key = true;
  p.offset_bias = {kMaskedBias, 0.0};
  const Matrix x{{1, 2, 3, 4}, {-1, -2, -3, -4}};
  const Matrix y = attention_head(p, x);
  EXPECT_EQ(y, (Matrix{{0, 1, 2, 3}, {0, -1, -2, -3}}));
}

TEST(AttentionHead, SharpMatchLeavesTinyOffTargetMass) {
  const std::size_t L = 100;
  const int w = position_width(L);
  const double M = 40.0 * w;
  Matrix x(static_cast<std::size_t>(w), L);
  for (std::size_t i = 1; i <= L; ++i) x.set_column(i - 1, pos_encode(i, L, false));
  AttentionParams p;
  p.w_k = Matrix::identity(static_cast<std::size_t>(w));
  p.w_v = Matrix::identity(static_cast<std::size_t>(w));
  for (std::size_t n : {1u, 37u, 64u, 100u}) {
    // query column asks for position n; put the query in the last column's slot
    Matrix xq = x;
    xq.set_column(L - 1, pos_encode(n, L, false));
    p.w_q = M * Matrix::identity(static_cast<std::size_t>(w));
    AttentionWeights aw;
    attention_head(p, xq, &aw);
    double off = 0.0;
    for (const auto& [i, a] : aw.weights[L - 1]) {
      if (i != n && i != L) off += a;
    }
    EXPECT_LE(off, 1e-6) << "n=" << n;
  }
}

TEST(AttentionHead, WeightsSumToOneAndMaskedAreZero) {
  Rng rng(3);
  AttentionParams p;
  p.w_q = random_matrix(3, 4, rng, 3.0);
  p.w_k = random_matrix(3, 4, rng, 3.0);
  p.w_v = random_matrix(4, 4, rng);
  p.window = 5;
  p.offset_bias = {0.0, kMaskedBias, 0.5};
  const Matrix x = random_matrix(4, 12, rng);
  AttentionWeights aw;
  attention_head(p, x, &aw);
  for (std::size_t j = 0; j < 12; ++j) {
    double total = 0.0;
    for (const auto& [i, a] : aw.weights[j]) {
      total += a;
      if (j >= 1 && i == j) EXPECT_EQ(a, 0.0);  // offset 1 is masked
      EXPECT_GE(i + 4, j + 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(AttentionHead, OutputIgnoresColumnsOutsideWindow) {
  Rng rng(4);
  AttentionParams p;
  p.w_q = random_matrix(2, 3, rng, 2.0);
  p.w_k = random_matrix(2, 3, rng, 2.0);
  p.w_v = random_matrix(3, 3, rng);
  p.window = 4;
  for (int t = 0; t < 50; ++t) {
    const Matrix x = random_matrix(3, 15, rng);
    const std::size_t j = 4 + rng.below(11);
    Matrix x2 = x;
    for (std::size_t c = 0; c < 15; ++c) {
      if (c + 4 <= j || c > j) x2.set_column(c, random_matrix(3, 1, rng).column(0));
    }
    const Matrix y = attention_head(p, x), y2 = attention_head(p, x2);
    EXPECT_EQ(y.column(j), y2.column(j));
  }
}

TEST(AttentionHead, LargeLogitsStayFinite) {
  AttentionParams p;
  p.w_q = Matrix{{700.0}};
  p.w_k = Matrix{{1.0}};
  p.w_v = Matrix{{1.0}};
  const Matrix x{{1.0, -1.0, 1.0}};
  const Matrix y = attention_head(p, x);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(std::isfinite(y(0, c)));
  EXPECT_EQ(y(0, 2), 1.0);
}

TEST(AttentionHead, UniformWeightsArePermutationInvariant) {
  AttentionParams p = zero_qk_head(2);
  p.window = 4;
  const Matrix x{{1, 2, 3, 4}, {5, 6, 7, 8}};
  const Matrix x2{{3, 1, 4, 2}, {7, 5, 8, 6}};
  EXPECT_EQ(attention_head(p, x).column(3), attention_head(p, x2).column(3));
}

TEST(AttentionHead, AllMaskedThrows) {
  AttentionParams p = zero_qk_head(1);
  p.window = 1;
  p.offset_bias = {kMaskedBias};
  EXPECT_THROW(attention_head(p, Matrix{{1.0}}), MaskError);
}

TEST(AttentionLayer, OneHeadIdentityProjection) {
  Rng rng(5);
  AttentionParams p;
  p.w_q = random_matrix(2, 3, rng);
  p.w_k = random_matrix(2, 3, rng);
  p.w_v = random_matrix(3, 3, rng);
  const Matrix x = random_matrix(3, 6, rng);
  EXPECT_EQ(attention_layer({{p}, Matrix::identity(3)}, x), attention_head(p, x));
  EXPECT_EQ(attention_layer({{p}, Matrix(3, 3)}, x), Matrix(3, 6));
}

TEST(AttentionLayer, TwoHeadsSummedIntoDisjointBlocks) {
  AttentionParams a = zero_qk_head(2);
  a.window = 1;
  a.w_v = Matrix{{1, 0}, {0, 0}};
  AttentionParams b = zero_qk_head(2);
  b.window = 1;
  b.w_v = Matrix{{0, 0}, {0, 1}};
  Matrix w_o(2, 4);
  w_o.set_block(0, 0, Matrix::identity(2));
  w_o.set_block(0, 2, Matrix::identity(2));
  const Matrix x{{1, 2}, {3, 4}};
  EXPECT_EQ(attention_layer({{a, b}, w_o}, x), x);
  EXPECT_THROW(attention_layer({{a, b}, Matrix::identity(2)}, x), DimensionError);
}

TEST(Mlp, IdentityOnNonNegativeInput) {
  const MlpParams p{Matrix::identity(2), Matrix::identity(2), Activation::relu};
  const Matrix x{{1, 0.5}, {2, 0}};
  EXPECT_EQ(mlp(p, x), x);
  EXPECT_EQ(mlp(p, Matrix{{-1, 1}, {2, -3}}), (Matrix{{0, 1}, {2, 0}}));
}

TEST(Mlp, BlockRelocationMovesSignedBlocks) {
  const MlpParams p = block_relocation_mlp(6, {{0, 2, 2}, {4, 4, 2}});
  const Matrix x{{1, -2}, {-1, 0.5}, {9, 9}, {7, 7}, {-3, 3}, {0.25, -0.25}};
  const Matrix want{{0, 0}, {0, 0}, {1, -2}, {-1, 0.5}, {-3, 3}, {0.25, -0.25}};
  EXPECT_EQ(mlp(p, x), want);
  EXPECT_THROW(block_relocation_mlp(4, {{3, 0, 2}}), DimensionError);
}

TEST(StackForward, EmptyStackIsIdentity) {
  const Matrix x{{1, 2}, {3, 4}};
  std::vector<Matrix> inter;
  EXPECT_EQ(stack_forward(LayerStack{}, x, &inter), x);
  EXPECT_TRUE(inter.empty());
}

TEST(StackForward, CapturesOneMatrixPerLayerAndAppliesResidual) {
  LayerStack s;
  s.layers.push_back({MlpParams{Matrix::identity(2), Matrix::identity(2), Activation::identity}, true, "double"});
  s.layers.push_back({MlpParams{Matrix::identity(2), 3.0 * Matrix::identity(2), Activation::identity}, false, "triple"});
  std::vector<Matrix> inter;
  const Matrix x{{1, -2}, {0.5, 4}};
  const Matrix y = stack_forward(s, x, &inter);
  ASSERT_EQ(inter.size(), 2u);
  EXPECT_EQ(inter[0], 2.0 * x);
  EXPECT_EQ(y, 6.0 * x);
}

TEST(LayerStack, JsonRoundTrip) {
  Rng rng(6);
  LayerStack s;
  MambaParams m;
  m.w_a = Matrix::identity(2);
  m.w_b = random_matrix(2, 3, rng);
  m.w_c = random_matrix(3, 2, rng);
  m.delta = DeltaGate::indicator({1});
  m.h0 = {-1, 0};
  s.layers.push_back({m, true, "mamba"});
  AttentionParams p;
  p.w_q = random_matrix(2, 3, rng);
  p.w_k = random_matrix(2, 3, rng);
  p.w_v = random_matrix(3, 3, rng);
  p.window = 3;
  p.null_key = true;
  p.offset_bias = {kMaskedBias, 0.0, -2.5};
  s.layers.push_back({AttentionLayer{{p}, Matrix::identity(3)}, false, "attn"});
  s.layers.push_back({block_relocation_mlp(3, {{0, 1, 2}}), false, "mlp"});
  const LayerStack back = stack_from_json(to_json(s));
  EXPECT_EQ(back, s);
  const Matrix x = random_matrix(3, 5, rng);
  EXPECT_EQ(stack_forward(back, x), stack_forward(s, x));
}
