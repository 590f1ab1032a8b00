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

#include <cmath>

#include <gtest/gtest.h>

#include "swmt/labels.hpp"
#include "swmt/losses.hpp"
#include "test_util.hpp"

namespace swmt {
namespace {

ClassWeights weights(Vector w) { return ClassWeights{std::move(w)}; }

CooccurrenceModel uniform_2x2() { return CooccurrenceModel(2, 2, {1, 1, 1, 1}, 1e-8); }

TEST(PhaseTarget, OneHotValidation) {
  EXPECT_EQ(PhaseTarget::from_one_hot(Vector{0, 0, 1}).index(), 2u);
  EXPECT_EQ(testing::error_kind_of([] { PhaseTarget::from_one_hot(Vector{1, 1, 0}); }),
            ErrorKind::invalid_argument);
  EXPECT_EQ(testing::error_kind_of([] { PhaseTarget::from_one_hot(Vector{0, 0.5, 0}); }),
            ErrorKind::invalid_argument);
  EXPECT_EQ(testing::error_kind_of([] { PhaseTarget(3, 3); }), ErrorKind::invalid_argument);
}

TEST(PhaseLoss, SymmetricLogits) {
  const auto r = phase_loss(Vector{0, 0}, PhaseTarget(2, 0), weights({1, 1}));
  EXPECT_NEAR(r.value, std::log(2.0), 1e-12);
  EXPECT_NEAR((*r.grad_phase)[0], -0.5, 1e-12);
  EXPECT_NEAR((*r.grad_phase)[1], 0.5, 1e-12);
  EXPECT_FALSE(r.grad_tool.has_value());
}

TEST(PhaseLoss, ConfidentCorrectPrediction) {
  const auto r = phase_loss(Vector{10, -10}, PhaseTarget(2, 0), weights({1, 1}));
  EXPECT_NEAR(r.value, std::log1p(std::exp(-20.0)), 1e-15);
  EXPECT_NEAR(r.value, 2.061e-9, 1e-12);
}

TEST(PhaseLoss, LinearInTargetWeight) {
  const Vector logits{0.3, -1.2, 2.0};
  const auto a = phase_loss(logits, PhaseTarget(3, 1), weights({1, 1, 1}));
  const auto b = phase_loss(logits, PhaseTarget(3, 1), weights({1, 2, 1}));
  EXPECT_DOUBLE_EQ(b.value, 2.0 * a.value);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ((*b.grad_phase)[i], 2.0 * (*a.grad_phase)[i]);
}

TEST(PhaseLoss, DimensionMismatch) {
  EXPECT_EQ(testing::error_kind_of(
                [] { phase_loss(Vector{0, 0}, PhaseTarget(3, 0), weights({1, 1, 1})); }),
            ErrorKind::dimension);
}

TEST(ToolLoss, ZeroLogitsGiveEightLn2) {
  const Vector target = FrameLabel::from_physical(0, 0b101).tool_multi_hot();
  const auto r = tool_loss(Vector(kNumTools, 0.0), target, weights(Vector(kNumTools, 1.0)));
  EXPECT_NEAR(r.value, 8.0 * std::log(2.0), 1e-12);
}

TEST(ToolLoss, SaturatedCorrectLogitContributesNothing) {
  const auto r = tool_loss(Vector{50.0}, Vector{1.0}, weights({1.0}));
  EXPECT_LT(r.value, 1e-20);
}

TEST(ToolLoss, HandComputedWeightedCase) {
  const auto r = tool_loss(Vector{0, 0}, Vector{1, 0}, weights({2, 1}));
  EXPECT_NEAR(r.value, 3.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR((*r.grad_tool)[0], -1.0, 1e-12);
  EXPECT_NEAR((*r.grad_tool)[1], 0.5, 1e-12);
  EXPECT_FALSE(r.grad_phase.has_value());
}

TEST(ToolLoss, StableForLargeLogits) {
  const auto r = tool_loss(Vector{800.0, -800.0}, Vector{0, 1}, weights({1, 1}));
  EXPECT_NEAR(r.value, 1600.0, 1e-9);
}

TEST(ToolLoss, RejectsNonBinaryTarget) {
  EXPECT_EQ(testing::error_kind_of([] { tool_loss(Vector{0}, Vector{0.5}, weights({1})); }),
            ErrorKind::invalid_argument);
}

TEST(JointLoss, UniformTwoByTwo) {
  for (const Vector& tool_logits : {Vector{0, 0}, Vector{3, -1}}) {
    const auto r = joint_loss(Vector{0, 0}, tool_logits, uniform_2x2());
    EXPECT_NEAR(r.value, 2.0, 1e-7);  // IF = 1/(0.5 + 1e-8)
  }
}

TEST(JointLoss, ConstantPenaltyIgnoresToolLogits) {
  const CooccurrenceModel co = uniform_2x2();
  const double k = co.inv_freq(0, 0);
  const Vector phase{0.7, -2.0};
  const auto r = joint_loss(phase, Vector{1.5, -0.5}, co);
  EXPECT_NEAR(r.value, k * (sigmoid(0.7) + sigmoid(-2.0)), 1e-12);
  for (double g : *r.grad_tool) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(JointLoss, ZeroCellIsPenalisedAtInverseEpsilon) {
  // tool 1 never occurs in phase 0
  const CooccurrenceModel co(2, 2, {5, 1, 0, 1}, 1e-8);
  EXPECT_NEAR(co.inv_freq(1, 0), 1e8, 1e-3);
  const Vector phase{40, -40}, tool{-40, 40};
  const auto r = joint_loss(phase, tool, co);
  const double mass = sigmoid(40.0) * softmax(tool)[1];
  EXPECT_NEAR(r.value / (1e8 * mass), 1.0, 1e-6);
}

TEST(JointLoss, SwappedActivationUsesSoftmaxPhaseAndSigmoidTool) {
  const CooccurrenceModel co(2, 3, {1, 2, 3, 4, 0, 6}, 1e-2);
  const Vector phase{0.2, -0.4, 1.0}, tool{0.5, -1.5};
  const Vector xp = softmax(phase);
  const Vector xt = sigmoid(tool);
  double want = 0.0;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t p = 0; p < 3; ++p) want += xp[p] * xt[t] * co.inv_freq(t, p);
  EXPECT_NEAR(joint_loss(phase, tool, co, JointActivation::swapped).value, want, 1e-12);
}

struct MultitaskCase {
  Vector phase_logits{0.0, 0.0};
  Vector tool_logits{0.0, 0.0};
  PhaseTarget phase_target{2, 0};
  Vector tool_target{1, 0};
  ClassWeights w1 = weights({1, 1});
  ClassWeights w2 = weights({2, 1});
  CooccurrenceModel co = uniform_2x2();

  LossResult run(const MultitaskWeights& a) const {
    return multitask_loss(phase_logits, tool_logits, phase_target, tool_target, w1, w2, co, a);
  }
};

TEST(MultitaskLoss, SingleTermsEqualComponents) {
  const MultitaskCase c;
  const auto l1 = phase_loss(c.phase_logits, c.phase_target, c.w1);
  const auto only1 = c.run({1, 0, 0});
  EXPECT_EQ(only1.value, l1.value);
  EXPECT_EQ(*only1.grad_phase, *l1.grad_phase);
  for (double g : *only1.grad_tool) EXPECT_EQ(g, 0.0);

  const auto l3 = joint_loss(c.phase_logits, c.tool_logits, c.co);
  const auto only3 = c.run({0, 0, 1});
  EXPECT_EQ(only3.value, l3.value);
  EXPECT_EQ(*only3.grad_phase, *l3.grad_phase);
  EXPECT_EQ(*only3.grad_tool, *l3.grad_tool);
}

TEST(MultitaskLoss, AllTermsAreAdditive) {
  const MultitaskCase c;
  const double want = std::log(2.0) + 3.0 * std::log(2.0) +
                      joint_loss(c.phase_logits, c.tool_logits, c.co).value;
  EXPECT_NEAR(c.run({1, 1, 1}).value, want, 1e-12);
}

TEST(MultitaskLoss, RejectsAllZeroWeights) {
  const MultitaskCase c;
  EXPECT_EQ(testing::error_kind_of([&] { c.run({0, 0, 0}); }), ErrorKind::invalid_argument);
}

}  // namespace
}  // namespace swmt
