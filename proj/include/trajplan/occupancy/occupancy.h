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

#ifndef TRAJPLAN_OCCUPANCY_OCCUPANCY_H_
#define TRAJPLAN_OCCUPANCY_OCCUPANCY_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "trajplan/numerics/random.h"

namespace trajplan {

// Finite MDP with rewards on states. A transition s -a-> s' earns r(s'), so
// the value of a state counts rewards from the next step onward.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> transitions;  // per action, S x S, rows p(.|s,a)
  Eigen::VectorXd reward;                    // S
  double gamma = 0.9;
  Eigen::VectorXd initial;  // rho_0, S
  Eigen::MatrixXd policy;   // S x A, rows pi(.|s)

  // Row sums within 1e-12, nonnegative entries, gamma in [0, 1).
  // Throws std::invalid_argument naming the offending row.
  void Validate() const;
  // P_pi(s, s') = sum_a pi(a|s) p(s'|s,a)
  Eigen::MatrixXd PolicyTransitions() const;
  // Same MDP with a different policy.
  TabularMDP WithPolicy(Eigen::MatrixXd policy) const;
};

// Random MDP with Dirichlet(1) transition rows, N(0, 1) rewards, a uniform
// initial distribution and a random stochastic policy.
TabularMDP RandomTabularMDP(int num_states, int num_actions, double gamma,
                            Rng& rng);

struct Successor {
  Eigen::MatrixXd m;   // M = P_pi (I - gamma P_pi)^-1
  Eigen::MatrixXd mu;  // (1 - gamma) M, row-stochastic
};

// Solves for the successor matrix with a partially pivoted LU. Throws
// std::runtime_error if the fixed-point residual exceeds 1e-9.
Successor SuccessorMatrix(const TabularMDP& mdp, double gamma);

// Occupancy conditioned on (s, a): row (s * A + a) holds
// (1 - gamma) p(.|s,a) (I + gamma M).
Eigen::MatrixXd StateActionOccupancy(const TabularMDP& mdp, double gamma);

// Q(s, a; gamma) = E_{s_e ~ mu(.|s,a)}[r(s_e)] / (1 - gamma), S x A.
Eigen::MatrixXd QFromOccupancy(const TabularMDP& mdp, double gamma);

// V(s; gamma) = [P_pi (I - gamma P_pi)^-1 r](s) by direct solve.
Eigen::VectorXd ExactStateValue(const TabularMDP& mdp, double gamma);

struct RolloutWeights {
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  int horizon = 0;
  std::vector<double> alpha;  // alpha_1 .. alpha_H
  double tail = 0.0;          // ((gamma_tilde - gamma) / (1 - gamma))^H
};

// Throws std::invalid_argument unless 0 <= gamma <= gamma_tilde < 1, n >= 1.
double RolloutWeight(int n, double gamma, double gamma_tilde);
RolloutWeights ComputeRolloutWeights(double gamma, double gamma_tilde,
                                     int horizon);

// Probability that the n-th draw of a Geom(1 - gamma) step count lands on
// total t: C(t-1, t-n) gamma^(t-n) (1-gamma)^n, evaluated in log space.
double NegBinPmf(int n, double gamma, int64_t t);

// Smallest H with alpha_1 + ... + alpha_H >= mass.
int StepsToMass(double gamma, double gamma_tilde, double mass);

// max_{t <= t_max} |sum_{n <= t} alpha_n NegBin(n, gamma, t) -
// Geom(1 - gamma_tilde)(t)|.
double ReweightCheck(double gamma, double gamma_tilde, int t_max);

// Value expansion split into its terms. value = sum(reward_terms) + tail_term.
struct ValueExpansion {
  Eigen::VectorXd value;
  std::vector<Eigen::VectorXd> reward_terms;  // one per n = 1..H
  Eigen::VectorXd tail_term;
};

// Estimate of V(.; gamma_tilde) from H compositions of the gamma-occupancy:
// sum_n alpha_n / (1 - gamma_tilde) mu^n r + tail mu^H V(.; gamma_tilde).
ValueExpansion GammaMve(const TabularMDP& mdp, double gamma,
                        double gamma_tilde, int horizon);

// Standard H-step expansion with the single-step model:
// sum_n gamma^(n-1) P^n r + gamma^H P^H V(.; gamma).
ValueExpansion Mve(const TabularMDP& mdp, double gamma, int horizon);

// Empirical occupancy: for each start state, `samples` rollouts of length
// Delta t ~ Geom(1 - gamma) (support 1, 2, ...) under the MDP's policy; row s
// holds the distribution of the final state.
Eigen::MatrixXd MonteCarloOccupancy(const TabularMDP& mdp, double gamma,
                                    int samples, Rng& rng);

// Index drawn from a probability row by inverse CDF.
int SampleIndex(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng);

}  // namespace trajplan

#endif  // TRAJPLAN_OCCUPANCY_OCCUPANCY_H_
