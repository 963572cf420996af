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

#include "trajplan/planner/planner.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace trajplan {
namespace {

// Lexicographic comparison of parent tokens followed by one extra token.
bool LexLess(const std::vector<int>& a, int a_last, const std::vector<int>& b,
             int b_last) {
  const int c = [&] {
    const size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
      if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    }
    return 0;
  }();
  if (c != 0) return c < 0;
  return a_last < b_last;
}

int ArgMax(const Eigen::VectorXd& lp, int vocab) {
  int best = 0;
  for (int v = 1; v < vocab; ++v) {
    if (lp(v) > lp(best)) best = v;
  }
  return best;
}

// The k most likely tokens among the first `vocab`, best first, lower index
// first on ties.
std::vector<int> TopK(const Eigen::VectorXd& lp, int vocab, int k) {
  std::vector<int> ids(vocab);
  std::iota(ids.begin(), ids.end(), 0);
  k = std::clamp(k, 1, vocab);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int a, int b) {
    return lp(a) > lp(b) || (lp(a) == lp(b) && a < b);
  });
  ids.resize(k);
  return ids;
}

// Draws one of `ids` with probability proportional to exp(lp); removes it
// from `ids` when `without_replacement` is set.
int SampleFrom(std::vector<int>& ids, const Eigen::VectorXd& lp, Rng& rng,
               bool without_replacement) {
  if (ids.size() == 1) {
    const int only = ids[0];
    if (without_replacement) ids.clear();
    return only;
  }
  const double top = lp(ids[0]);
  std::vector<double> w(ids.size());
  double total = 0.0;
  for (size_t i = 0; i < ids.size(); ++i) total += w[i] = std::exp(lp(ids[i]) - top);
  double u = rng.Uniform() * total;
  size_t pick = ids.size() - 1;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (u < w[i]) {
      pick = i;
      break;
    }
    u -= w[i];
  }
  const int token = ids[pick];
  if (without_replacement) ids.erase(ids.begin() + pick);
  return token;
}

int ActionTopK(double fraction, int vocab) {
  return std::max(1, static_cast<int>(std::ceil(fraction * vocab - 1e-9)));
}

}  // namespace

std::unique_ptr<TokenCursor> SessionCursor::Clone() const {
  return std::make_unique<SessionCursor>(session_);
}

bool RanksBefore(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

Hypothesis BeamSearch(const TokenCursor& cursor, int steps, int width,
                      std::vector<Hypothesis>* final_beam) {
  if (steps < 1) throw std::invalid_argument("beam search needs steps >= 1");
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
  struct Node {
    std::unique_ptr<TokenCursor> cursor;
    Hypothesis hyp;
  };
  struct Candidate {
    int parent;
    int token;
    double score;
  };
  std::vector<Node> beam;
  beam.push_back({cursor.Clone(), {}});
  std::vector<Candidate> candidates;
  for (int step = 0; step < steps; ++step) {
    candidates.clear();
    for (size_t p = 0; p < beam.size(); ++p) {
      const Eigen::VectorXd& lp = beam[p].cursor->NextLogProbs();
      const int vocab = beam[p].cursor->NextVocab();
      for (int v = 0; v < vocab; ++v) {
        candidates.push_back({static_cast<int>(p), v, beam[p].hyp.score + lp(v)});
      }
    }
    const size_t keep = std::min(candidates.size(), static_cast<size_t>(width));
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return LexLess(beam[a.parent].hyp.tokens, a.token,
                                       beam[b.parent].hyp.tokens, b.token);
                      });
    std::vector<Node> next;
    next.reserve(keep);
    const bool last = step + 1 == steps;
    for (size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Node node;
      node.hyp.tokens = beam[c.parent].hyp.tokens;
      node.hyp.tokens.push_back(c.token);
      node.hyp.score = c.score;
      if (!last) {
        node.cursor = beam[c.parent].cursor->Clone();
        node.cursor->Push(c.token);
      }
      next.push_back(std::move(node));
    }
    beam = std::move(next);
  }
  if (final_beam != nullptr) {
    final_beam->clear();
    for (const Node& n : beam) final_beam->push_back(n.hyp);
  }
  return beam.front().hyp;
}

Hypothesis BeamSearchTokens(std::shared_ptr<const DecoderWeights> model,
                            std::span<const int> prefix, int steps, int width) {
  if (!model) throw std::invalid_argument("beam search needs a model");
  const int block = model->config.block_size();
  if (prefix.empty() || static_cast<int>(prefix.size()) >= block) {
    throw std::invalid_argument("prefix of " + std::to_string(prefix.size()) +
                                " tokens does not fit the context window of " +
                                std::to_string(block));
  }
  DecoderSession session(std::move(model));
  for (int token : prefix) session.Push(token);
  return BeamSearch(SessionCursor(std::move(session)), steps, width);
}

Hypothesis ExhaustiveSearch(const TokenCursor& cursor, int steps) {
  if (steps < 1) throw std::invalid_argument("search needs steps >= 1");
  Hypothesis best;
  bool found = false;
  Hypothesis current;
  std::function<void(const TokenCursor&)> visit = [&](const TokenCursor& c) {
    const Eigen::VectorXd& lp = c.NextLogProbs();
    const int vocab = c.NextVocab();
    for (int v = 0; v < vocab; ++v) {
      const double saved = current.score;
      current.tokens.push_back(v);
      current.score = saved + lp(v);
      if (static_cast<int>(current.tokens.size()) == steps) {
        if (!found || RanksBefore(current, best)) {
          best = current;
          found = true;
        }
      } else {
        auto child = c.Clone();
        child->Push(v);
        visit(*child);
      }
      current.tokens.pop_back();
      current.score = saved;
    }
  };
  visit(cursor);
  return best;
}

const char* PlanModeName(PlanMode mode) {
  switch (mode) {
    case PlanMode::kImitation:
      return "imitation";
    case PlanMode::kGoal:
      return "goal";
    case PlanMode::kOffline:
      return "offline";
  }
  return "?";
}

PlanMode PlanModeFromName(const std::string& name) {
  if (name == "imitation") return PlanMode::kImitation;
  if (name == "goal") return PlanMode::kGoal;
  if (name == "offline") return PlanMode::kOffline;
  throw std::invalid_argument("unknown plan mode '" + name +
                              "' (expected imitation, goal or offline)");
}

void PlanConfig::Validate() const {
  if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (horizon_tokens < 0) throw std::invalid_argument("horizon_tokens must be >= 0");
  if (k_obs < 1) throw std::invalid_argument("k_obs must be >= 1");
  if (!(k_act > 0.0 && k_act <= 1.0)) {
    throw std::invalid_argument("k_act must be a fraction in (0, 1]");
  }
  if (expansions < 1) throw std::invalid_argument("expansions must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
}

double RewardToGoScore(std::span<const double> rewards, double last_value,
                       double gamma) {
  if (rewards.empty()) throw std::invalid_argument("empty plan");
  double score = 0.0;
  double discount = 1.0;
  for (size_t i = 0; i + 1 < rewards.size(); ++i) {
    score += discount * rewards[i];
    discount *= gamma;
  }
  return score + discount * last_value;
}

double HeuristicScore(std::span<const double> rewards, double tail,
                      double gamma) {
  if (rewards.empty()) throw std::invalid_argument("empty plan");
  double score = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    score += discount * r;
    discount *= gamma;
  }
  return score + discount * tail;
}

Planner::Planner(std::shared_ptr<const DecoderWeights> model,
                 DiscretizerSpec spec, PlanConfig config, PlanMode mode)
    : model_(std::move(model)),
      spec_(std::move(spec)),
      config_(config),
      mode_(mode) {
  config_.Validate();
  if (!model_) throw std::invalid_argument("planner needs a model");
  const ModelConfig& mc = model_->config;
  if (!(mc.layout() == spec_.layout)) {
    throw std::invalid_argument("tokenizer layout (" +
                                std::to_string(spec_.layout.state_dim) + ", " +
                                std::to_string(spec_.layout.action_dim) +
                                ") does not match the model's (" +
                                std::to_string(mc.state_dim) + ", " +
                                std::to_string(mc.action_dim) + ")");
  }
  for (int s = 0; s < mc.stride(); ++s) {
    if (mc.SlotVocab(s) != spec_.dim(s).vocab) {
      throw std::invalid_argument("tokenizer vocabulary of slot " +
                                  std::to_string(s) +
                                  " does not match the model");
    }
  }
  if ((mode_ == PlanMode::kGoal) != mc.goal_conditioned) {
    throw std::invalid_argument(
        mode_ == PlanMode::kGoal
            ? "goal planning needs a model trained in goal mode"
            : "a goal-conditioned model needs goal planning");
  }
}

void Planner::set_goal(std::vector<double> goal) {
  if (static_cast<int>(goal.size()) != spec_.layout.state_dim) {
    throw std::invalid_argument("goal must have the state dimension");
  }
  goal_ = std::move(goal);
}

DecoderSession Planner::Prefix(const RawTrajectory& history,
                               std::span<const double> state) const {
  const ModelConfig& mc = model_->config;
  const TrajectoryLayout& layout = spec_.layout;
  if (static_cast<int>(state.size()) != layout.state_dim) {
    throw std::invalid_argument("state has " + std::to_string(state.size()) +
                                " dims, layout expects " +
                                std::to_string(layout.state_dim));
  }
  DecoderSession session(model_);
  if (mode_ == PlanMode::kGoal) {
    if (goal_.empty()) throw std::logic_error("goal planning without a goal");
    for (int t : spec_.EncodeState(goal_)) session.Push(t);
  }
  const int steps = history.steps();
  const int first = std::max(0, steps - (mc.window_transitions() - 1));
  for (int t = first; t < steps; ++t) {
    for (int tok : spec_.EncodeState(history.state(t))) session.Push(tok);
    for (int tok : spec_.EncodeAction(history.action(t))) session.Push(tok);
    session.Push(spec_.dim(layout.reward_index()).Encode(history.rewards[t]));
    session.Push(ArgMax(session.log_probs(), session.next_vocab()));
  }
  for (int tok : spec_.EncodeState(state)) session.Push(tok);
  return session;
}

PlanResult Planner::Plan(const RawTrajectory& history,
                         std::span<const double> state, Rng& rng,
                         int remaining) const {
  const DecoderSession prefix = Prefix(history, state);
  return mode_ == PlanMode::kOffline ? PlanOffline(prefix, rng, remaining)
                                     : PlanLikelihood(prefix);
}

PlanResult Planner::PlanLikelihood(const DecoderSession& prefix) const {
  const TrajectoryLayout& layout = spec_.layout;
  const int steps = config_.horizon_tokens > 0
                        ? config_.horizon_tokens
                        : layout.action_dim + 2 +
                              (config_.horizon - 1) * layout.stride();
  if (steps < layout.action_dim) {
    throw std::invalid_argument("horizon must cover the action tokens");
  }
  std::vector<Hypothesis> beam;
  const Hypothesis best =
      BeamSearch(SessionCursor(prefix), steps, config_.beam_width, &beam);
  PlanResult out;
  out.tokens = best.tokens;
  out.score = best.score;
  out.action = spec_.DecodeAction(
      std::span<const int>(best.tokens).first(layout.action_dim));
  if (trace_) {
    nlohmann::json hyps = nlohmann::json::array();
    for (size_t i = 0; i < std::min<size_t>(beam.size(), 8); ++i) {
      hyps.push_back({{"tokens", beam[i].tokens}, {"score", beam[i].score}});
    }
    out.trace = {{"mode", PlanModeName(mode_)}, {"steps", steps}, {"beam", hyps}};
  }
  return out;
}

PlanResult Planner::PlanOffline(const DecoderSession& prefix, Rng& rng,
                                int remaining) const {
  const TrajectoryLayout& layout = spec_.layout;
  const int n = layout.state_dim;
  const int m = layout.action_dim;
  int horizon = config_.horizon;
  if (remaining > 0) horizon = std::min(horizon, remaining);

  struct Node {
    DecoderSession session;
    OfflineCandidate plan;
    std::vector<int> state_tokens;  // state of the transition being planned
  };
  auto greedy = [&](DecoderSession& s) {
    const Eigen::VectorXd& lp = s.log_probs();
    std::vector<int> ids = TopK(lp, s.next_vocab(), config_.k_obs);
    const int token = SampleFrom(ids, lp, rng, false);
    s.Push(token);
    return token;
  };

  std::vector<Node> beam;
  {
    const auto& w = prefix.window();
    beam.push_back({prefix, {}, std::vector<int>(w.end() - n, w.end())});
  }
  nlohmann::json trace = nlohmann::json::array();
  for (int h = 0; h < horizon; ++h) {
    std::vector<Node> children;
    for (const Node& node : beam) {
      const int k = ActionTopK(config_.k_act, node.session.next_vocab());
      std::vector<int> first_pool = TopK(node.session.log_probs(),
                                         node.session.next_vocab(), k);
      const int count = std::min<int>(config_.expansions, first_pool.size());
      for (int e = 0; e < count; ++e) {
        Node child = node;
        std::vector<int> action_tokens;
        for (int j = 0; j < m; ++j) {
          const Eigen::VectorXd& lp = child.session.log_probs();
          int token;
          if (j == 0) {
            token = SampleFrom(first_pool, lp, rng, true);
          } else {
            std::vector<int> pool = TopK(
                lp, child.session.next_vocab(),
                ActionTopK(config_.k_act, child.session.next_vocab()));
            token = SampleFrom(pool, lp, rng, false);
          }
          child.session.Push(token);
          action_tokens.push_back(token);
        }
        const int r_token = greedy(child.session);
        const int value_token = greedy(child.session);
        std::vector<int>& tokens = child.plan.tokens;
        tokens.insert(tokens.end(), action_tokens.begin(), action_tokens.end());
        tokens.push_back(r_token);
        tokens.push_back(value_token);
        child.plan.rewards.push_back(
            spec_.dim(layout.reward_index()).Decode(r_token));
        if (heuristic_) {
          const std::vector<double> s = spec_.DecodeState(child.state_tokens);
          const std::vector<double> a = spec_.DecodeAction(action_tokens);
          child.plan.value = heuristic_(s, a);
          if (!std::isfinite(child.plan.value)) {
            throw std::runtime_error("value heuristic returned a non-finite value");
          }
          child.plan.score =
              HeuristicScore(child.plan.rewards, child.plan.value, config_.gamma);
        } else {
          child.plan.value = spec_.dim(layout.value_index()).Decode(value_token);
          child.plan.score =
              RewardToGoScore(child.plan.rewards, child.plan.value, config_.gamma);
        }
        if (h + 1 < horizon) {
          child.state_tokens.clear();
          for (int i = 0; i < n; ++i) {
            child.state_tokens.push_back(greedy(child.session));
          }
          tokens.insert(tokens.end(), child.state_tokens.begin(),
                        child.state_tokens.end());
        }
        children.push_back(std::move(child));
      }
    }
    std::sort(children.begin(), children.end(),
              [](const Node& a, const Node& b) {
                if (a.plan.score != b.plan.score) return a.plan.score > b.plan.score;
                return a.plan.tokens < b.plan.tokens;
              });
    children.erase(std::unique(children.begin(), children.end(),
                               [](const Node& a, const Node& b) {
                                 return a.plan.tokens == b.plan.tokens;
                               }),
                   children.end());
    if (static_cast<int>(children.size()) > config_.beam_width) {
      children.erase(children.begin() + config_.beam_width, children.end());
    }
    beam = std::move(children);
    if (trace_) {
      nlohmann::json step = nlohmann::json::array();
      for (size_t i = 0; i < std::min<size_t>(beam.size(), 4); ++i) {
        step.push_back({{"tokens", beam[i].plan.tokens},
                        {"rewards", beam[i].plan.rewards},
                        {"value", beam[i].plan.value},
                        {"score", beam[i].plan.score}});
      }
      trace.push_back(step);
    }
  }
  const OfflineCandidate& best = beam.front().plan;
  PlanResult out;
  out.tokens = best.tokens;
  out.score = best.score;
  out.action = spec_.DecodeAction(std::span<const int>(best.tokens).first(m));
  if (trace_) out.trace = {{"mode", "offline"}, {"horizon", horizon}, {"steps", trace}};
  return out;
}

Episode RunEpisode(const Environment& env, const Planner& planner,
                   std::vector<double> start, int max_steps, double gamma,
                   Rng& rng, nlohmann::json* traces) {
  if (max_steps < 0) max_steps = env.max_steps();
  Episode ep;
  RawTrajectory& traj = ep.trajectory;
  traj.state_dim = env.state_dim();
  traj.action_dim = env.action_dim();
  std::vector<double> state = std::move(start);
  const std::vector<double> zero_action(env.action_dim(), 0.0);
  auto record = [&](const std::vector<double>& s, const std::vector<double>& a,
                    double r) {
    traj.states.insert(traj.states.end(), s.begin(), s.end());
    traj.actions.insert(traj.actions.end(), a.begin(), a.end());
    traj.rewards.push_back(r);
  };
  if (max_steps == 0) return ep;
  if (env.IsTerminal(state)) {
    ep.success = true;
    if (env.records_terminal_state()) record(state, zero_action, 0.0);
    traj.terminal = true;
    return ep;
  }
  double discount = 1.0;
  for (int t = 0; t < max_steps; ++t) {
    PlanResult plan = planner.Plan(traj, state, rng, max_steps - t);
    if (traces != nullptr) traces->push_back(std::move(plan.trace));
    const std::vector<double> action = env.NormalizeAction(plan.action);
    StepResult step = env.Step(state, action, rng);
    record(state, action, step.reward);
    ep.discounted_return += discount * step.reward;
    discount *= gamma;
    state = std::move(step.state);
    if (step.done) {
      ep.success = true;
      if (env.records_terminal_state()) record(state, zero_action, 0.0);
      break;
    }
  }
  traj.terminal = ep.success;
  return ep;
}

ValueHeuristic TabularValueHeuristic(const TabularEnv& env, double gamma) {
  const Eigen::VectorXd v = ValueIteration(env.mdp(), gamma).v;
  // Copy what the closure needs so it outlives `env`.
  std::vector<Eigen::VectorXd> next_value;
  for (const Eigen::MatrixXd& p : env.mdp().transitions) next_value.push_back(p * v);
  const int states = static_cast<int>(v.size());
  return [next_value, states](std::span<const double> state,
                              std::span<const double> action) {
    const int s = std::clamp(static_cast<int>(std::lround(state[0])), 0, states - 1);
    const int a = std::clamp(static_cast<int>(std::lround(action[0])), 0,
                             static_cast<int>(next_value.size()) - 1);
    return next_value[a](s);
  };
}

ValueHeuristic EmpiricalValueHeuristic(std::span<const RawTrajectory> data,
                                       double gamma) {
  if (data.empty()) throw std::invalid_argument("no trajectories to fit values on");
  auto index = [](double v) {
    if (v < 0 || v != std::round(v)) {
      throw std::invalid_argument("empirical values need integer states and actions");
    }
    return static_cast<int>(v);
  };
  int states = 0, actions = 0;
  for (const RawTrajectory& raw : data) {
    if (raw.state_dim != 1 || raw.action_dim != 1) {
      throw std::invalid_argument("empirical values need 1-d states and actions");
    }
    for (int t = 0; t < raw.steps(); ++t) {
      states = std::max(states, index(raw.state(t)[0]) + 1);
      actions = std::max(actions, index(raw.action(t)[0]) + 1);
    }
  }
  // Per (s, a): visit count, summed reward, successor counts.
  std::vector<double> visits(states * actions, 0.0), reward(states * actions, 0.0);
  std::vector<double> succ(static_cast<size_t>(states) * actions * states, 0.0);
  std::vector<double> succ_total(states * actions, 0.0);
  for (const RawTrajectory& raw : data) {
    for (int t = 0; t < raw.steps(); ++t) {
      const int sa = index(raw.state(t)[0]) * actions + index(raw.action(t)[0]);
      visits[sa] += 1;
      reward[sa] += raw.rewards[t];
      if (t + 1 < raw.steps()) {
        succ[static_cast<size_t>(sa) * states + index(raw.state(t + 1)[0])] += 1;
        succ_total[sa] += 1;
      }
    }
  }
  auto expected_next = [&](int sa, const std::vector<double>& v) {
    if (succ_total[sa] == 0) return 0.0;
    double e = 0.0;
    for (int s2 = 0; s2 < states; ++s2) {
      e += succ[static_cast<size_t>(sa) * states + s2] * v[s2];
    }
    return e / succ_total[sa];
  };
  std::vector<double> v(states, 0.0);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    std::vector<double> next(states, 0.0);
    double change = 0.0;
    for (int s = 0; s < states; ++s) {
      bool any = false;
      for (int a = 0; a < actions; ++a) {
        const int sa = s * actions + a;
        if (visits[sa] == 0) continue;
        const double q = reward[sa] / visits[sa] + gamma * expected_next(sa, v);
        next[s] = any ? std::max(next[s], q) : q;
        any = true;
      }
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v = std::move(next);
    if (change < 1e-12) break;
  }
  std::vector<double> table(states * actions, 0.0);
  for (int sa = 0; sa < states * actions; ++sa) table[sa] = expected_next(sa, v);
  return [table, states, actions](std::span<const double> state,
                                  std::span<const double> action) {
    const long s = std::lround(state[0]), a = std::lround(action[0]);
    if (s < 0 || s >= states || a < 0 || a >= actions) return 0.0;
    return table[s * actions + a];
  };
}

}  // namespace trajplan
