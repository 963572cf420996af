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

#ifndef TRAJPLAN_PLANNER_PLANNER_H_
#define TRAJPLAN_PLANNER_PLANNER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajplan/envs/envs.h"
#include "trajplan/numerics/random.h"
#include "trajplan/seqmodel/decoder.h"
#include "trajplan/tokenizer/tokenizer.h"

namespace trajplan {

// ---------------------------------------------------------------------------
// Token-level beam search

// Anything that scores next tokens autoregressively. Cursors are copied to
// fork hypotheses.
class TokenCursor {
 public:
  virtual ~TokenCursor() = default;
  virtual std::unique_ptr<TokenCursor> Clone() const = 0;
  virtual void Push(int token) = 0;
  // log-probabilities for the next token; only the first NextVocab() entries
  // are candidates
  virtual const Eigen::VectorXd& NextLogProbs() const = 0;
  virtual int NextVocab() const = 0;
};

class SessionCursor : public TokenCursor {
 public:
  explicit SessionCursor(DecoderSession session) : session_(std::move(session)) {}
  std::unique_ptr<TokenCursor> Clone() const override;
  void Push(int token) override { session_.Push(token); }
  const Eigen::VectorXd& NextLogProbs() const override { return session_.log_probs(); }
  int NextVocab() const override { return session_.next_vocab(); }
  const DecoderSession& session() const { return session_; }

 private:
  DecoderSession session_;
};

struct Hypothesis {
  std::vector<int> tokens;  // continuation only, without the prefix
  double score = 0.0;       // summed log-probability, accumulated left to right
};

// Strict ordering used everywhere: higher score first, then lexicographically
// smaller token sequence.
bool RanksBefore(const Hypothesis& a, const Hypothesis& b);

// Keeps the `width` best one-token extensions of each step's hypotheses for
// `steps` steps and returns the best survivor. `cursor` must already hold the
// prefix. Throws std::invalid_argument if steps < 1 or width < 1.
Hypothesis BeamSearch(const TokenCursor& cursor, int steps, int width,
                      std::vector<Hypothesis>* final_beam = nullptr);

// BeamSearch from a fresh session fed with `prefix`. Throws
// std::invalid_argument when the prefix is empty or does not fit the context
// window (prefix.size() >= block size), before any search work.
Hypothesis BeamSearchTokens(std::shared_ptr<const DecoderWeights> model,
                            std::span<const int> prefix, int steps, int width);

// Brute-force argmax over every continuation of length `steps`, scored with
// the same left-to-right summation. Exponential; for tests.
Hypothesis ExhaustiveSearch(const TokenCursor& cursor, int steps);

// ---------------------------------------------------------------------------
// Control

enum class PlanMode { kImitation, kGoal, kOffline };
const char* PlanModeName(PlanMode mode);
PlanMode PlanModeFromName(const std::string& name);

struct PlanConfig {
  int beam_width = 256;
  int horizon = 15;        // transitions
  // Tokens searched in likelihood modes; 0 derives them from `horizon` (the
  // rest of the current transition plus horizon - 1 full transitions).
  // Setting it to the action dimension gives autoregressive behavior cloning.
  int horizon_tokens = 0;
  int k_obs = 1;           // observation, reward and value tokens: top-k
  double k_act = 0.2;      // action tokens: top fraction of the sub-vocabulary
  int expansions = 2;      // offline: sampled children per hypothesis
  double gamma = 0.99;     // offline score discount

  void Validate() const;
};

// Value of what follows a decoded (state, action) pair: the expected
// discounted return from the next state on, E[V(s')] = (Q(s, a) - r) / gamma.
// Must be deterministic and finite.
using ValueHeuristic =
    std::function<double(std::span<const double>, std::span<const double>)>;

// E[V(s')] under value iteration at `gamma` for a tabular environment.
// Decoded states and actions are rounded and clamped to valid indices.
ValueHeuristic TabularValueHeuristic(const TabularEnv& env, double gamma);

// The same quantity estimated from logged data alone: value iteration on the
// empirical MDP of integer-valued 1-d states and actions, using only
// transitions seen in `data` (an action never tried in a state is not
// available there). Unseen (state, action) pairs score 0. The last step of
// an episode has no logged successor and contributes its reward only.
// Throws std::invalid_argument for non-tabular layouts or empty data.
ValueHeuristic EmpiricalValueHeuristic(std::span<const RawTrajectory> data,
                                       double gamma);

// One candidate of the offline search, decoded.
struct OfflineCandidate {
  std::vector<int> tokens;      // continuation after the prefix
  std::vector<double> rewards;  // decoded r per planned transition
  double value = 0.0;  // decoded R of the last transition, or the heuristic
  double score = 0.0;
};

// Score of a plan r_0..r_{H-1} whose last reward-to-go token decodes to R
// (R already contains r_{H-1}):
//   sum_{i < H-1} gamma^i r_i + gamma^(H-1) R.
double RewardToGoScore(std::span<const double> rewards, double last_value,
                       double gamma);

// Score of the same plan with a heuristic tail value T for what follows it:
//   sum_{i < H} gamma^i r_i + gamma^H T.
// With T = (R - r_{H-1}) / gamma both scores agree.
double HeuristicScore(std::span<const double> rewards, double tail,
                      double gamma);

struct PlanResult {
  std::vector<double> action;
  std::vector<int> tokens;  // best continuation
  double score = 0.0;
  nlohmann::json trace;     // per-step beam summary
};

// Receding-horizon planner over a trained model.
class Planner {
 public:
  Planner(std::shared_ptr<const DecoderWeights> model, DiscretizerSpec spec,
          PlanConfig config, PlanMode mode);

  void set_goal(std::vector<double> goal);
  void set_heuristic(ValueHeuristic heuristic) { heuristic_ = std::move(heuristic); }
  void set_trace(bool on) { trace_ = on; }

  // Plans from `state` given the realized transitions so far. `remaining`
  // caps the offline horizon at the episode's remaining steps (0: no cap).
  PlanResult Plan(const RawTrajectory& history, std::span<const double> state,
                  Rng& rng, int remaining = 0) const;

  // Session holding the conditioning prefix: the goal (goal mode), up to
  // window - 1 past transitions, then the current state. Past reward-to-go
  // tokens are unknown at run time and filled with the model's greedy guess.
  DecoderSession Prefix(const RawTrajectory& history,
                        std::span<const double> state) const;

  const DiscretizerSpec& spec() const { return spec_; }
  const PlanConfig& config() const { return config_; }
  PlanMode mode() const { return mode_; }

 private:
  PlanResult PlanLikelihood(const DecoderSession& prefix) const;
  PlanResult PlanOffline(const DecoderSession& prefix, Rng& rng,
                         int remaining) const;

  std::shared_ptr<const DecoderWeights> model_;
  DiscretizerSpec spec_;
  PlanConfig config_;
  PlanMode mode_;
  std::vector<double> goal_;
  ValueHeuristic heuristic_;
  bool trace_ = false;
};

// Runs observe -> plan -> act from `start` for at most max_steps steps (the
// environment's limit when negative). The return is sum_t gamma^t r_t over
// realized rewards. Terminal states are logged as in dataset generation.
// Plan traces are appended to `traces` when given.
Episode RunEpisode(const Environment& env, const Planner& planner,
                   std::vector<double> start, int max_steps, double gamma,
                   Rng& rng, nlohmann::json* traces = nullptr);

}  // namespace trajplan

#endif  // TRAJPLAN_PLANNER_PLANNER_H_
