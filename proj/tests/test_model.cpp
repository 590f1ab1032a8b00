/*
 * Copyright 2026 The swmt Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "swmt/model.hpp"
#include "test_util.hpp"

namespace swmt {
namespace {

Matrix random_sequence(std::size_t t, std::size_t f, SeededRng& rng) {
  Matrix m(t, f);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

BiLstmParams perturbed_bilstm(const BiLstmDims& d, SeededRng& rng) {
  BiLstmParams p = init_bilstm(d, rng);
  p.for_each_tensor([&](const std::string&, std::span<double> v) {
    for (double& x : v) x += rng.normal(0.0, 0.3);
  });
  return p;
}

// Exchanges the forward and backward halves of every head column.
Matrix swap_halves(const Matrix& w, std::size_t h) {
  Matrix out(w.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < 2 * h; ++c) out(r, c) = w(r, c < h ? c + h : c - h);
  return out;
}

Matrix reverse_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t t = 0; t < m.rows(); ++t)
    std::copy(m.row(m.rows() - 1 - t).begin(), m.row(m.rows() - 1 - t).end(), out.row(t).begin());
  return out;
}

TEST(Encoder, ZeroParamsGiveZeroOutputs) {
  const EncoderParams p(EncoderDims{5, 4, 3, 7, 8});
  const auto out = encoder_forward(p, Vector{1, -2, 3, 0.5, 9});
  for (double v : out.features) EXPECT_EQ(v, 0.0);
  for (double v : out.phase_logits) EXPECT_EQ(v, 0.0);
  for (double v : out.tool_logits) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, OneDimensionalToy) {
  EncoderParams p(EncoderDims{1, 1, 1, 1, 1});
  p.w_in(0, 0) = p.w_feat(0, 0) = p.w_phase(0, 0) = p.w_tool(0, 0) = 1.0;
  const auto out = encoder_forward(p, Vector{2.0});
  EXPECT_EQ(out.features, (Vector{2.0}));
  EXPECT_EQ(out.phase_logits, (Vector{2.0}));
  EXPECT_EQ(encoder_forward(p, Vector{-2.0}).phase_logits, (Vector{0.0}));
}

TEST(Encoder, ShapesAndNonNegativeFeatures) {
  SeededRng rng(1);
  const EncoderDims d{6, 5, 4, 7, 8};
  const auto p = init_encoder(d, rng);
  const auto out = encoder_forward(p, Vector{1, -1, 2, -2, 3, -3});
  EXPECT_EQ(out.features.size(), 4u);
  EXPECT_EQ(out.phase_logits.size(), 7u);
  EXPECT_EQ(out.tool_logits.size(), 8u);
  for (double v : out.features) EXPECT_GE(v, 0.0);
  EXPECT_EQ(testing::error_kind_of([&] { encoder_forward(p, Vector{1.0}); }), ErrorKind::dimension);
}

TEST(Encoder, BackwardBiasGradientsEqualUpstream) {
  SeededRng rng(2);
  const auto p = init_encoder(EncoderDims{3, 4, 4, 7, 8}, rng);
  const auto out = encoder_forward(p, Vector{0.5, -1.0, 2.0});
  Vector gp(7), gt(8);
  for (double& v : gp) v = rng.normal();
  for (double& v : gt) v = rng.normal();
  const auto g = encoder_backward(p, out.cache, gp, gt);
  EXPECT_EQ(g.b_phase, gp);
  EXPECT_EQ(g.b_tool, gt);
  const auto zero = encoder_backward(p, out.cache, Vector(7, 0.0), Vector(8, 0.0));
  for (double v : flatten(zero)) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, StaleCacheIsRejected) {
  SeededRng rng(3);
  const auto small = init_encoder(EncoderDims{3, 4, 4, 7, 8}, rng);
  const auto big = init_encoder(EncoderDims{3, 5, 4, 7, 8}, rng);
  const auto out = encoder_forward(small, Vector{1, 2, 3});
  EXPECT_EQ(testing::error_kind_of(
                [&] { encoder_backward(big, out.cache, Vector(7, 0.0), Vector(8, 0.0)); }),
            ErrorKind::mismatch);
}

TEST(Init, GlorotBoundsZeroBiasesAndForgetGate) {
  SeededRng rng(4);
  const BiLstmDims d{6, 5, 7, 8};
  const auto p = init_bilstm(d, rng);
  const double bound = std::sqrt(6.0 / (4.0 * 5 + 6));
  for (double v : p.fwd.w.values()) EXPECT_LE(std::abs(v), bound);
  for (const LstmDirection* dir : {&p.fwd, &p.bwd})
    for (std::size_t k = 0; k < 4 * d.hidden; ++k)
      EXPECT_EQ(dir->b[k], k >= d.hidden && k < 2 * d.hidden ? 1.0 : 0.0) << k;
  for (double v : p.b_phase) EXPECT_EQ(v, 0.0);

  const auto e = init_encoder(EncoderDims{6, 5, 4, 7, 8}, rng);
  const double eb = std::sqrt(6.0 / (5.0 + 6.0));
  for (double v : e.w_in.values()) EXPECT_LE(std::abs(v), eb);
  for (double v : e.b_in) EXPECT_EQ(v, 0.0);
}

TEST(Init, SameSeedSameParams) {
  SeededRng a(9), b(9);
  EXPECT_EQ(init_bilstm(BiLstmDims{3, 4, 7, 8}, a), init_bilstm(BiLstmDims{3, 4, 7, 8}, b));
  EXPECT_EQ(init_encoder(EncoderDims{3, 4, 4, 7, 8}, a), init_encoder(EncoderDims{3, 4, 4, 7, 8}, b));
}

TEST(BiLstm, ZeroParamsGiveZeroLogits) {
  SeededRng rng(5);
  const BiLstmParams p(BiLstmDims{3, 4, 7, 8});
  const auto out = bilstm_forward(p, random_sequence(6, 3, rng));
  for (double v : out.phase_logits.values()) EXPECT_EQ(v, 0.0);
  for (double v : out.tool_logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(BiLstm, SingleFrameShapes) {
  SeededRng rng(6);
  const auto p = perturbed_bilstm(BiLstmDims{3, 4, 7, 8}, rng);
  const auto out = bilstm_forward(p, random_sequence(1, 3, rng));
  EXPECT_EQ(out.phase_logits.rows(), 1u);
  EXPECT_EQ(out.phase_logits.cols(), 7u);
  EXPECT_EQ(out.tool_logits.cols(), 8u);
}

TEST(BiLstm, HiddenStatesAreBounded) {
  SeededRng rng(7);
  const auto p = perturbed_bilstm(BiLstmDims{3, 4, 7, 8}, rng);
  Matrix seq = random_sequence(20, 3, rng);
  for (double& v : seq.values()) v *= 50.0;
  const auto out = bilstm_forward(p, seq);
  for (const Matrix* h : {&out.cache.fwd.hidden, &out.cache.bwd.hidden})
    for (double v : h->values()) EXPECT_LT(std::abs(v), 1.0);
}

TEST(BiLstm, TimeReversalSymmetry) {
  SeededRng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const BiLstmDims d{3, 4, 7, 8};
    const auto p = perturbed_bilstm(d, rng);
    BiLstmParams mirrored = p;
    std::swap(mirrored.fwd, mirrored.bwd);
    mirrored.w_phase = swap_halves(p.w_phase, d.hidden);
    mirrored.w_tool = swap_halves(p.w_tool, d.hidden);
    const Matrix seq = random_sequence(7, 3, rng);
    const auto a = bilstm_forward(p, seq);
    const auto b = bilstm_forward(mirrored, reverse_rows(seq));
    const Matrix want_p = reverse_rows(a.phase_logits), want_t = reverse_rows(a.tool_logits);
    for (std::size_t i = 0; i < want_p.size(); ++i)
      EXPECT_NEAR(b.phase_logits.values()[i], want_p.values()[i], 1e-12);
    for (std::size_t i = 0; i < want_t.size(); ++i)
      EXPECT_NEAR(b.tool_logits.values()[i], want_t.values()[i], 1e-12);
  }
}

TEST(BiLstm, SingleFrameBackwardMirrorsForwardDirection) {
  SeededRng rng(9);
  const BiLstmDims d{3, 4, 7, 8};
  BiLstmParams p = perturbed_bilstm(d, rng);
  p.bwd = p.fwd;
  // identical halves of each head make the two directions fully symmetric
  for (Matrix* w : {&p.w_phase, &p.w_tool})
    for (std::size_t r = 0; r < w->rows(); ++r)
      for (std::size_t c = 0; c < d.hidden; ++c) (*w)(r, c + d.hidden) = (*w)(r, c);
  const auto out = bilstm_forward(p, random_sequence(1, 3, rng));
  Matrix gp(1, 7), gt(1, 8);
  for (double& v : gp.values()) v = rng.normal();
  for (double& v : gt.values()) v = rng.normal();
  const auto g = bilstm_backward(p, out.cache, gp, gt);
  EXPECT_EQ(g.fwd.w, g.bwd.w);
  EXPECT_EQ(g.fwd.u, g.bwd.u);
  EXPECT_EQ(g.fwd.b, g.bwd.b);
}

TEST(BiLstm, ZeroUpstreamGivesZeroGradients) {
  SeededRng rng(10);
  const auto p = perturbed_bilstm(BiLstmDims{3, 4, 7, 8}, rng);
  const auto out = bilstm_forward(p, random_sequence(5, 3, rng));
  const auto g = bilstm_backward(p, out.cache, Matrix(5, 7), Matrix(5, 8));
  for (double v : flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(BiLstm, ForwardIsDeterministic) {
  SeededRng rng(11);
  const auto p = perturbed_bilstm(BiLstmDims{3, 4, 7, 8}, rng);
  const Matrix seq = random_sequence(9, 3, rng);
  EXPECT_EQ(bilstm_forward(p, seq).phase_logits, bilstm_forward(p, seq).phase_logits);
}

TEST(BiLstm, InputErrors) {
  SeededRng rng(12);
  const auto p = perturbed_bilstm(BiLstmDims{3, 4, 7, 8}, rng);
  EXPECT_EQ(testing::error_kind_of([&] { bilstm_forward(p, Matrix(0, 3)); }),
            ErrorKind::invalid_argument);
  EXPECT_EQ(testing::error_kind_of([&] { bilstm_forward(p, Matrix(2, 4)); }), ErrorKind::dimension);
}

}  // namespace
}  // namespace swmt
