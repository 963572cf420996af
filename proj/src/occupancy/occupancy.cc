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
#include <stdexcept>
#include <string>

namespace trajplan {
namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kResidualTolerance = 1e-9;

void CheckDiscount(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("discount must lie in [0, 1), got " +
                                std::to_string(gamma));
  }
}

void CheckDiscountPair(double gamma, double gamma_tilde) {
  CheckDiscount(gamma);
  CheckDiscount(gamma_tilde);
  if (gamma_tilde < gamma) {
    throw std::invalid_argument("target discount " +
                                std::to_string(gamma_tilde) +
                                " is below model discount " +
                                std::to_string(gamma));
  }
}

void CheckStochasticRows(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() < 0.0).any() ||
        std::abs(m.row(i).sum() - 1.0) > kRowTolerance) {
      throw std::invalid_argument(what + " row " + std::to_string(i) +
                                  " is not a probability distribution");
    }
  }
}

Eigen::VectorXd RandomSimplex(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = -std::log(1.0 - rng.Uniform());
  return v / v.sum();
}

}  // namespace

void TabularMDP::Validate() const {
  if (num_states <= 0 || num_actions <= 0) {
    throw std::invalid_argument("MDP needs at least one state and one action");
  }
  if (static_cast<int>(transitions.size()) != num_actions) {
    throw std::invalid_argument("MDP has " + std::to_string(transitions.size()) +
                                " transition matrices for " +
                                std::to_string(num_actions) + " actions");
  }
  for (int a = 0; a < num_actions; ++a) {
    if (transitions[a].rows() != num_states ||
        transitions[a].cols() != num_states) {
      throw std::invalid_argument("transition matrix for action " +
                                  std::to_string(a) + " is not S x S");
    }
    CheckStochasticRows(transitions[a], "transition (action " +
                                            std::to_string(a) + ")");
  }
  if (reward.size() != num_states || initial.size() != num_states) {
    throw std::invalid_argument("reward and initial distribution need S entries");
  }
  if (policy.rows() != num_states || policy.cols() != num_actions) {
    throw std::invalid_argument("policy must be S x A");
  }
  CheckStochasticRows(policy, "policy");
  CheckStochasticRows(initial.transpose(), "initial distribution");
  CheckDiscount(gamma);
}

Eigen::MatrixXd TabularMDP::PolicyTransitions() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(num_states, num_states);
  for (int a = 0; a < num_actions; ++a) {
    p += policy.col(a).asDiagonal() * transitions[a];
  }
  return p;
}

TabularMDP TabularMDP::WithPolicy(Eigen::MatrixXd new_policy) const {
  TabularMDP out = *this;
  out.policy = std::move(new_policy);
  return out;
}

TabularMDP RandomTabularMDP(int num_states, int num_actions, double gamma,
                            Rng& rng) {
  TabularMDP mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.gamma = gamma;
  for (int a = 0; a < num_actions; ++a) {
    Eigen::MatrixXd p(num_states, num_states);
    for (int s = 0; s < num_states; ++s) {
      p.row(s) = RandomSimplex(num_states, rng).transpose();
    }
    mdp.transitions.push_back(std::move(p));
  }
  mdp.reward.resize(num_states);
  for (int s = 0; s < num_states; ++s) mdp.reward(s) = rng.Normal();
  mdp.initial = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
  mdp.policy.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    mdp.policy.row(s) = RandomSimplex(num_actions, rng).transpose();
  }
  mdp.Validate();
  return mdp;
}

Successor SuccessorMatrix(const TabularMDP& mdp, double gamma) {
  mdp.Validate();
  CheckDiscount(gamma);
  const int n = mdp.num_states;
  const Eigen::MatrixXd p = mdp.PolicyTransitions();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - gamma * p;
  // M (I - gamma P) = P, solved through the transpose system.
  Successor out;
  out.m = a.transpose().partialPivLu().solve(p.transpose()).transpose();
  out.mu = (1.0 - gamma) * out.m;
  const double residual = (out.m - p * (Eigen::MatrixXd::Identity(n, n) +
                                        gamma * out.m))
                              .cwiseAbs()
                              .maxCoeff();
  if (!(residual <= kResidualTolerance * (1.0 + out.m.cwiseAbs().maxCoeff()))) {
    throw std::runtime_error("successor solve residual " +
                             std::to_string(residual) + " exceeds tolerance");
  }
  return out;
}

Eigen::MatrixXd StateActionOccupancy(const TabularMDP& mdp, double gamma) {
  const Successor succ = SuccessorMatrix(mdp, gamma);
  const int n = mdp.num_states;
  const Eigen::MatrixXd after =
      Eigen::MatrixXd::Identity(n, n) + gamma * succ.m;
  Eigen::MatrixXd out(n * mdp.num_actions, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      out.row(s * mdp.num_actions + a) =
          (1.0 - gamma) * mdp.transitions[a].row(s) * after;
    }
  }
  return out;
}

Eigen::MatrixXd QFromOccupancy(const TabularMDP& mdp, double gamma) {
  const Eigen::MatrixXd mu_sa = StateActionOccupancy(mdp, gamma);
  const Eigen::VectorXd expected = mu_sa * mdp.reward / (1.0 - gamma);
  Eigen::MatrixXd q(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      q(s, a) = expected(s * mdp.num_actions + a);
    }
  }
  return q;
}

Eigen::VectorXd ExactStateValue(const TabularMDP& mdp, double gamma) {
  mdp.Validate();
  CheckDiscount(gamma);
  const Eigen::MatrixXd p = mdp.PolicyTransitions();
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(mdp.num_states, mdp.num_states) - gamma * p;
  return a.partialPivLu().solve(p * mdp.reward);
}

double RolloutWeight(int n, double gamma, double gamma_tilde) {
  CheckDiscountPair(gamma, gamma_tilde);
  if (n < 1) throw std::invalid_argument("rollout step index starts at 1");
  const double w = (gamma_tilde - gamma) / (1.0 - gamma);
  return (1.0 - gamma_tilde) / (1.0 - gamma) * std::pow(w, n - 1);
}

RolloutWeights ComputeRolloutWeights(double gamma, double gamma_tilde,
                                     int horizon) {
  CheckDiscountPair(gamma, gamma_tilde);
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  RolloutWeights out;
  out.gamma = gamma;
  out.gamma_tilde = gamma_tilde;
  out.horizon = horizon;
  for (int n = 1; n <= horizon; ++n) {
    out.alpha.push_back(RolloutWeight(n, gamma, gamma_tilde));
  }
  out.tail = std::pow((gamma_tilde - gamma) / (1.0 - gamma), horizon);
  return out;
}

double NegBinPmf(int n, double gamma, int64_t t) {
  if (n < 1 || t < 1) {
    throw std::invalid_argument("negative binomial needs n >= 1 and t >= 1");
  }
  CheckDiscount(gamma);
  if (t < n) return 0.0;
  const double failures = static_cast<double>(t - n);
  if (gamma == 0.0) return failures == 0.0 ? 1.0 : 0.0;
  if (n == 1) return std::pow(gamma, failures) * (1.0 - gamma);
  const double log_choose = std::lgamma(static_cast<double>(t)) -
                            std::lgamma(static_cast<double>(n)) -
                            std::lgamma(failures + 1.0);
  return std::exp(log_choose + failures * std::log(gamma) +
                  n * std::log1p(-gamma));
}

int StepsToMass(double gamma, double gamma_tilde, double mass) {
  CheckDiscountPair(gamma, gamma_tilde);
  if (!(mass > 0.0 && mass < 1.0)) {
    throw std::invalid_argument("mass must lie in (0, 1)");
  }
  double total = 0.0;
  for (int h = 1;; ++h) {
    total += RolloutWeight(h, gamma, gamma_tilde);
    if (total >= mass) return h;
  }
}

double ReweightCheck(double gamma, double gamma_tilde, int t_max) {
  CheckDiscountPair(gamma, gamma_tilde);
  double worst = 0.0;
  for (int t = 1; t <= t_max; ++t) {
    double mixture = 0.0;
    for (int n = 1; n <= t; ++n) {
      mixture += RolloutWeight(n, gamma, gamma_tilde) * NegBinPmf(n, gamma, t);
    }
    const double target = std::pow(gamma_tilde, t - 1) * (1.0 - gamma_tilde);
    worst = std::max(worst, std::abs(mixture - target));
  }
  return worst;
}

ValueExpansion GammaMve(const TabularMDP& mdp, double gamma,
                        double gamma_tilde, int horizon) {
  const RolloutWeights weights =
      ComputeRolloutWeights(gamma, gamma_tilde, horizon);
  const Eigen::MatrixXd mu = SuccessorMatrix(mdp, gamma).mu;
  const Eigen::VectorXd v = ExactStateValue(mdp, gamma_tilde);
  ValueExpansion out;
  out.value = Eigen::VectorXd::Zero(mdp.num_states);
  Eigen::MatrixXd mu_n = Eigen::MatrixXd::Identity(mdp.num_states,
                                                   mdp.num_states);
  for (int n = 1; n <= horizon; ++n) {
    mu_n = mu_n * mu;
    out.reward_terms.push_back(weights.alpha[n - 1] / (1.0 - gamma_tilde) *
                               (mu_n * mdp.reward));
    out.value += out.reward_terms.back();
  }
  out.tail_term = weights.tail * (mu_n * v);
  out.value += out.tail_term;
  return out;
}

ValueExpansion Mve(const TabularMDP& mdp, double gamma, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  const Eigen::MatrixXd p = mdp.PolicyTransitions();
  const Eigen::VectorXd v = ExactStateValue(mdp, gamma);
  ValueExpansion out;
  out.value = Eigen::VectorXd::Zero(mdp.num_states);
  Eigen::MatrixXd p_n = Eigen::MatrixXd::Identity(mdp.num_states,
                                                  mdp.num_states);
  double discount = 1.0;
  for (int n = 1; n <= horizon; ++n) {
    p_n = p_n * p;
    out.reward_terms.push_back(discount * (p_n * mdp.reward));
    out.value += out.reward_terms.back();
    discount *= gamma;
  }
  out.tail_term = discount * (p_n * v);
  out.value += out.tail_term;
  return out;
}

int SampleIndex(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng) {
  const double u = rng.Uniform();
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    cumulative += probs(i);
    if (u < cumulative) return static_cast<int>(i);
  }
  // rounding left u above the total; fall back to the last supported index
  for (Eigen::Index i = probs.size(); i-- > 0;) {
    if (probs(i) > 0.0) return static_cast<int>(i);
  }
  throw std::invalid_argument("cannot sample from an all-zero distribution");
}

Eigen::MatrixXd MonteCarloOccupancy(const TabularMDP& mdp, double gamma,
                                    int samples, Rng& rng) {
  mdp.Validate();
  CheckDiscount(gamma);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
  for (int start = 0; start < mdp.num_states; ++start) {
    for (int i = 0; i < samples; ++i) {
      int s = start;
      do {
        const int a = SampleIndex(mdp.policy.row(s), rng);
        s = SampleIndex(mdp.transitions[a].row(s), rng);
      } while (rng.Uniform() < gamma);
      counts(start, s) += 1.0;
    }
  }
  return counts / samples;
}

}  // namespace trajplan
