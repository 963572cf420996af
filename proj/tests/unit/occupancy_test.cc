// Copyright 2026 The Trajplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajplan/occupancy/occupancy.h"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace trajplan {
namespace {

// Two states that swap deterministically under a single action.
TabularMDP SwapMDP() {
  TabularMDP mdp;
  mdp.num_states = 2;
  mdp.num_actions = 1;
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  mdp.transitions = {p};
  mdp.reward = Eigen::Vector2d(1.0, 0.0);
  mdp.initial = Eigen::Vector2d(0.5, 0.5);
  mdp.policy = Eigen::MatrixXd::Ones(2, 1);
  return mdp;
}

// Bellman expectation backups for the MDP's own policy.
Eigen::MatrixXd IteratedPolicyQ(const TabularMDP& mdp, double gamma) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_actions);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    const Eigen::VectorXd v = (mdp.policy.array() * q.array()).rowwise().sum();
    Eigen::MatrixXd next(q.rows(), q.cols());
    for (int a = 0; a < mdp.num_actions; ++a) {
      next.col(a) = mdp.transitions[a] * (mdp.reward + gamma * v);
    }
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < 1e-13) break;
  }
  return q;
}

// Bellman optimality backups; returns Q*.
Eigen::MatrixXd IteratedOptimalQ(const TabularMDP& mdp, double gamma) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_actions);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    Eigen::MatrixXd next(q.rows(), q.cols());
    for (int a = 0; a < mdp.num_actions; ++a) {
      next.col(a) = mdp.transitions[a] * (mdp.reward + gamma * v);
    }
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < 1e-13) break;
  }
  return q;
}

Eigen::MatrixXd GreedyPolicy(const Eigen::MatrixXd& q) {
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best;
    q.row(s).maxCoeff(&best);
    pi(s, best) = 1.0;
  }
  return pi;
}

TEST(SuccessorTest, DeterministicSwap) {
  const Successor succ = SuccessorMatrix(SwapMDP(), 0.5);
  Eigen::Matrix2d expected;
  expected << 1.0 / 3, 2.0 / 3, 2.0 / 3, 1.0 / 3;
  EXPECT_LT((succ.mu - expected).cwiseAbs().maxCoeff(), 1e-12);
  // geometric series by hand: (1 - g) sum_t g^(t-1) P^t
  Eigen::Matrix2d series = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d p_t = Eigen::Matrix2d::Identity();
  double w = 0.5;
  for (int t = 1; t < 200; ++t) {
    p_t = p_t * SwapMDP().transitions[0];
    series += w * p_t;
    w *= 0.5;
  }
  EXPECT_LT((succ.mu - series).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SuccessorTest, ZeroDiscountIsOneStepModel) {
  Rng rng(4);
  TabularMDP mdp = RandomTabularMDP(6, 3, 0.9, rng);
  const Successor succ = SuccessorMatrix(mdp, 0.0);
  EXPECT_TRUE(succ.mu == mdp.PolicyTransitions());
}

TEST(SuccessorTest, RowsSumToOneAndFixedPointHolds) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int states = 1 + static_cast<int>(rng.UniformInt(10));
    const double gamma = rng.Uniform(0.0, 0.99);
    TabularMDP mdp = RandomTabularMDP(states, 2, gamma, rng);
    const Successor succ = SuccessorMatrix(mdp, gamma);
    const Eigen::MatrixXd p = mdp.PolicyTransitions();
    EXPECT_LT((succ.mu.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    EXPECT_GE(succ.mu.minCoeff(), 0.0);
    EXPECT_LT((succ.mu - ((1.0 - gamma) * p + gamma * p * succ.mu))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
  }
}

TEST(SuccessorTest, MonteCarloAgreement) {
  Rng rng(21);
  const double gamma = 0.8;
  TabularMDP mdp = RandomTabularMDP(6, 2, gamma, rng);
  const Eigen::MatrixXd mu = SuccessorMatrix(mdp, gamma).mu;
  const Eigen::MatrixXd empirical = MonteCarloOccupancy(mdp, gamma, 100000, rng);
  for (int s = 0; s < mdp.num_states; ++s) {
    const double tv = 0.5 * (mu.row(s) - empirical.row(s)).cwiseAbs().sum();
    EXPECT_LT(tv, 0.02) << "row " << s;
  }
}

TEST(MdpTest, ValidateRejectsBadRows) {
  TabularMDP mdp = SwapMDP();
  mdp.transitions[0](0, 0) = 0.1;
  EXPECT_THROW(mdp.Validate(), std::invalid_argument);
  mdp = SwapMDP();
  mdp.gamma = 1.0;
  EXPECT_THROW(mdp.Validate(), std::invalid_argument);
}

TEST(RolloutWeightsTest, ZeroModelDiscountIsGeometric) {
  const RolloutWeights w = ComputeRolloutWeights(0.0, 0.9, 30);
  for (int n = 1; n <= 30; ++n) {
    EXPECT_NEAR(w.alpha[n - 1], 0.1 * std::pow(0.9, n - 1), 1e-15);
  }
}

TEST(RolloutWeightsTest, EqualDiscountsPutAllWeightOnFirstStep) {
  const RolloutWeights w = ComputeRolloutWeights(0.7, 0.7, 5);
  EXPECT_EQ(w.alpha, (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_EQ(w.tail, 0.0);
}

TEST(RolloutWeightsTest, ClosedFormExampleAndConvolutionOracle) {
  EXPECT_DOUBLE_EQ(RolloutWeight(1, 0.5, 0.75), 0.5);
  EXPECT_LT(ReweightCheck(0.5, 0.75, 200), 1e-9);
}

TEST(RolloutWeightsTest, InvalidDiscountsThrow) {
  EXPECT_THROW(ComputeRolloutWeights(0.9, 0.5, 3), std::invalid_argument);
  EXPECT_THROW(ComputeRolloutWeights(0.5, 1.0, 3), std::invalid_argument);
  EXPECT_THROW(ComputeRolloutWeights(0.5, 0.6, 0), std::invalid_argument);
}

TEST(RolloutWeightsTest, PartialSumIdentity) {
  for (double gamma : {0.0, 0.3, 0.5, 0.9}) {
    for (double gt : {gamma, 0.5 * (gamma + 1.0), 0.95, 0.999}) {
      if (gt < gamma) continue;
      for (int h = 1; h <= 50; ++h) {
        const RolloutWeights w = ComputeRolloutWeights(gamma, gt, h);
        double sum = 0.0;
        for (double a : w.alpha) {
          EXPECT_GE(a, 0.0);
          sum += a;
        }
        EXPECT_NEAR(1.0 - sum, w.tail, 1e-12)
            << "gamma=" << gamma << " gt=" << gt << " H=" << h;
      }
    }
  }
}

TEST(NegBinTest, Examples) {
  for (int t = 1; t < 20; ++t) {
    EXPECT_NEAR(NegBinPmf(1, 0.3, t), std::pow(0.3, t - 1) * 0.7, 1e-15);
  }
  EXPECT_NEAR(NegBinPmf(2, 0.5, 3), 0.25, 1e-15);
  EXPECT_EQ(NegBinPmf(3, 0.5, 2), 0.0);
}

TEST(NegBinTest, NormalizesForLargeSupport) {
  for (double gamma : {0.1, 0.5, 0.9}) {
    for (int n : {1, 2, 5, 20}) {
      double total = 0.0;
      for (int t = 1; t <= 10000; ++t) total += NegBinPmf(n, gamma, t);
      EXPECT_NEAR(total, 1.0, 1e-9) << "gamma=" << gamma << " n=" << n;
    }
  }
}

// Direct enumeration of the sum of two Geom(1 - gamma) variables.
TEST(NegBinTest, MatchesEnumeratedConvolution) {
  const double gamma = 0.6;
  for (int t = 2; t < 15; ++t) {
    double p = 0.0;
    for (int first = 1; first < t; ++first) {
      p += std::pow(gamma, first - 1) * (1 - gamma) *
           std::pow(gamma, t - first - 1) * (1 - gamma);
    }
    EXPECT_NEAR(NegBinPmf(2, gamma, t), p, 1e-14);
  }
}

TEST(StepsToMassTest, Examples) {
  EXPECT_EQ(StepsToMass(0.0, 0.99, 0.95), 299);
  EXPECT_EQ(StepsToMass(0.6, 0.6, 0.95), 1);
  EXPECT_EQ(StepsToMass(0.0, 0.5, 0.95), 5);
}

TEST(ReweightCheckTest, CertifiesTheorem) {
  EXPECT_LT(ReweightCheck(0.5, 0.9, 200), 1e-9);
  for (double gt : {0.1, 0.5, 0.9, 0.99}) {
    EXPECT_LT(ReweightCheck(0.0, gt, 200), 1e-12);
  }
  // equal discounts: only alpha_1 is nonzero, up to log-space rounding
  EXPECT_LT(ReweightCheck(0.4, 0.4, 200), 1e-15);
}

TEST(QFromOccupancyTest, MatchesBellmanOnRandomMdps) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = rng.Uniform(0.0, 0.95);
    TabularMDP mdp = RandomTabularMDP(6, 3, gamma, rng);
    const Eigen::MatrixXd q = QFromOccupancy(mdp, gamma);
    EXPECT_LT((q - IteratedPolicyQ(mdp, gamma)).cwiseAbs().maxCoeff(), 1e-8);

    const Eigen::MatrixXd q_star = IteratedOptimalQ(mdp, gamma);
    const TabularMDP greedy = mdp.WithPolicy(GreedyPolicy(q_star));
    EXPECT_LT((QFromOccupancy(greedy, gamma) - q_star).cwiseAbs().maxCoeff(),
              1e-8);
  }
}

TEST(QFromOccupancyTest, ConstantRewardAndZeroDiscount) {
  Rng rng(2);
  TabularMDP mdp = RandomTabularMDP(5, 2, 0.9, rng);
  mdp.reward.setConstant(2.0);
  EXPECT_LT((QFromOccupancy(mdp, 0.9).array() - 20.0).abs().maxCoeff(), 1e-10);

  mdp = RandomTabularMDP(5, 2, 0.9, rng);
  const Eigen::MatrixXd q0 = QFromOccupancy(mdp, 0.0);
  for (int a = 0; a < 2; ++a) {
    EXPECT_LT((q0.col(a) - mdp.transitions[a] * mdp.reward).cwiseAbs().maxCoeff(),
              1e-14);
  }
}

TEST(GammaMveTest, ExactOnRandomMdps) {
  Rng rng(12);
  const std::vector<std::pair<double, double>> discounts = {
      {0.0, 0.9}, {0.5, 0.9}, {0.5, 0.75}, {0.8, 0.8}, {0.3, 0.99}};
  for (int trial = 0; trial < 10; ++trial) {
    TabularMDP mdp = RandomTabularMDP(6, 2, 0.9, rng);
    for (const auto& [gamma, gt] : discounts) {
      const Eigen::VectorXd exact = ExactStateValue(mdp, gt);
      for (int h : {1, 2, 5}) {
        const ValueExpansion est = GammaMve(mdp, gamma, gt, h);
        EXPECT_LT((est.value - exact).cwiseAbs().maxCoeff(), 1e-9)
            << "gamma=" << gamma << " gt=" << gt << " H=" << h;
      }
    }
  }
}

TEST(GammaMveTest, ZeroModelDiscountRecoversMveTermByTerm) {
  Rng rng(13);
  TabularMDP mdp = RandomTabularMDP(6, 2, 0.9, rng);
  for (int h : {1, 3, 6}) {
    const ValueExpansion g = GammaMve(mdp, 0.0, 0.9, h);
    const ValueExpansion m = Mve(mdp, 0.9, h);
    ASSERT_EQ(g.reward_terms.size(), m.reward_terms.size());
    for (size_t n = 0; n < g.reward_terms.size(); ++n) {
      EXPECT_LT((g.reward_terms[n] - m.reward_terms[n]).cwiseAbs().maxCoeff(),
                1e-12);
    }
    EXPECT_LT((g.tail_term - m.tail_term).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GammaMveTest, LongHorizonTailVanishes) {
  Rng rng(14);
  TabularMDP mdp = RandomTabularMDP(4, 2, 0.9, rng);
  const ValueExpansion est = GammaMve(mdp, 0.5, 0.8, 200);
  EXPECT_LT(est.tail_term.cwiseAbs().maxCoeff(), 1e-12);
  Eigen::VectorXd rewards_only = Eigen::VectorXd::Zero(4);
  for (const auto& term : est.reward_terms) rewards_only += term;
  EXPECT_LT((rewards_only - ExactStateValue(mdp, 0.8)).cwiseAbs().maxCoeff(),
            1e-9);
}

TEST(GammaMveTest, RejectsInvalidDiscounts) {
  TabularMDP mdp = SwapMDP();
  EXPECT_THROW(GammaMve(mdp, 0.9, 0.5, 2), std::invalid_argument);
}

}  // namespace
}  // namespace trajplan
