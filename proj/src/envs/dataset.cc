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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "trajplan/envs/envs.h"
#include "trajplan/numerics/checkpoint.h"

namespace trajplan {
namespace {

constexpr uint64_t kAssignmentStream = 0x6d6978ULL;

std::unique_ptr<Policy> MakeBehavior(const Environment& env,
                                     const BehaviorMix& mix,
                                     double myopic_gamma) {
  std::unique_ptr<Policy> base;
  if (mix.name == "expert") {
    base = MakeExpertPolicy(env);
  } else if (mix.name == "random") {
    base = MakeRandomPolicy(env);
  } else if (mix.name == "myopic") {
    const auto* tabular = dynamic_cast<const TabularEnv*>(&env);
    if (tabular == nullptr) {
      throw std::invalid_argument("myopic behavior needs a tabular environment");
    }
    base = MakeGreedyTabularPolicy(*tabular, myopic_gamma);
  } else {
    throw std::invalid_argument("unknown behavior '" + mix.name +
                                "' (expected expert, random or myopic)");
  }
  return MakeNoisyPolicy(env, std::move(base), mix.epsilon);
}

// Largest-remainder apportionment of `total` episodes.
std::vector<int> Apportion(const std::vector<BehaviorMix>& mix, int total) {
  std::vector<int> counts(mix.size());
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < mix.size(); ++i) {
    const double exact = mix[i].fraction * total;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - counts[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

std::vector<double> Flatten(const std::vector<RawTrajectory>& trajectories,
                            std::vector<double> RawTrajectory::*field) {
  std::vector<double> out;
  for (const RawTrajectory& raw : trajectories) {
    out.insert(out.end(), (raw.*field).begin(), (raw.*field).end());
  }
  return out;
}

}  // namespace

std::unique_ptr<Environment> MakeEnvironment(const std::string& id,
                                             std::span<const double> goal) {
  if (id == "chain") return std::make_unique<TabularEnv>(MakeChain());
  if (id == "bandit") return std::make_unique<TabularEnv>(MakeBandit());
  if (id == "ring") return std::make_unique<TabularEnv>(MakeRing());
  if (id == "four_rooms") {
    if (goal.empty()) return std::make_unique<FourRooms>();
    if (goal.size() != 2) {
      throw std::invalid_argument("four rooms goal needs 2 coordinates");
    }
    return std::make_unique<FourRooms>(std::array<double, 2>{goal[0], goal[1]});
  }
  throw std::invalid_argument("unknown environment '" + id +
                              "' (expected chain, bandit, ring or four_rooms)");
}

Episode RollOut(const Environment& env, Policy& policy,
                std::vector<double> start, double gamma, Rng& rng) {
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
  if (env.IsTerminal(state)) {
    ep.success = true;
    if (env.records_terminal_state()) record(state, zero_action, 0.0);
    traj.terminal = true;
    return ep;
  }
  double discount = 1.0;
  for (int t = 0; t < env.max_steps(); ++t) {
    const std::vector<double> action =
        env.NormalizeAction(policy.Act(state, rng));
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

Dataset GenerateDataset(const DatasetConfig& config) {
  if (config.episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (config.mix.empty()) throw std::invalid_argument("empty behavior mix");
  double total_fraction = 0.0;
  for (const BehaviorMix& m : config.mix) {
    if (!(m.fraction >= 0.0)) {
      throw std::invalid_argument("behavior fractions must be nonnegative");
    }
    total_fraction += m.fraction;
  }
  if (std::abs(total_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("behavior fractions sum to " +
                                std::to_string(total_fraction) + ", not 1");
  }
  const std::vector<int> counts = Apportion(config.mix, config.episodes);
  std::vector<int> assignment;
  for (size_t i = 0; i < counts.size(); ++i) {
    assignment.insert(assignment.end(), counts[i], static_cast<int>(i));
  }
  Rng shuffle_rng(HashCounters(config.seed, kAssignmentStream));
  for (size_t i = assignment.size(); i > 1; --i) {
    std::swap(assignment[i - 1],
              assignment[static_cast<size_t>(shuffle_rng.UniformInt(
                  static_cast<int64_t>(i)))]);
  }

  Dataset data;
  for (int e = 0; e < config.episodes; ++e) {
    Rng rng(HashCounters(config.seed, static_cast<uint64_t>(e)));
    std::vector<double> goal;
    if (config.env == "four_rooms") {
      const auto g = FourRooms::SampleFreePoint(rng);
      goal = {g[0], g[1]};
    }
    const auto env = MakeEnvironment(config.env, goal);
    const BehaviorMix& mix = config.mix[assignment[e]];
    const auto policy = MakeBehavior(*env, mix, config.myopic_gamma);
    Episode ep = RollOut(*env, *policy, env->SampleStart(rng), config.gamma, rng);
    data.trajectories.push_back(std::move(ep.trajectory));
    data.goals.push_back(std::move(goal));
    data.behaviors.push_back(mix.name);
  }

  const auto env = MakeEnvironment(config.env);
  nlohmann::json mix = nlohmann::json::array();
  for (size_t i = 0; i < config.mix.size(); ++i) {
    mix.push_back({{"behavior", config.mix[i].name},
                   {"fraction", config.mix[i].fraction},
                   {"epsilon", config.mix[i].epsilon},
                   {"episodes", counts[i]}});
  }
  data.manifest = {{"format", "trajplan-dataset"},
                   {"version", 1},
                   {"env", config.env},
                   {"env_config", env->Describe()},
                   {"gamma", config.gamma},
                   {"myopic_gamma", config.myopic_gamma},
                   {"seed", config.seed},
                   {"episodes", config.episodes},
                   {"episode_rng", "xoshiro256** seeded by hash(seed, episode)"},
                   {"mix", mix},
                   {"state_dim", env->state_dim()},
                   {"action_dim", env->action_dim()},
                   {"tokenizer", nullptr}};
  return data;
}

void SaveDataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = dataset.manifest;
  std::vector<int> lengths;
  std::vector<bool> terminal;
  for (const RawTrajectory& raw : dataset.trajectories) {
    lengths.push_back(raw.steps());
    terminal.push_back(raw.terminal);
  }
  manifest["lengths"] = lengths;
  manifest["terminal"] = terminal;
  manifest["behaviors"] = dataset.behaviors;
  manifest["total_steps"] = std::accumulate(lengths.begin(), lengths.end(), 0);

  nlohmann::json files = nlohmann::json::object();
  auto write = [&](const std::string& name, const std::vector<double>& values) {
    const std::string file = name + ".f32";
    WriteLittleEndianF32(dir / file, values);
    files[name] = {{"file", file},
                   {"count", values.size()},
                   {"fnv1a64", FileChecksum(dir / file)}};
  };
  write("states", Flatten(dataset.trajectories, &RawTrajectory::states));
  write("actions", Flatten(dataset.trajectories, &RawTrajectory::actions));
  write("rewards", Flatten(dataset.trajectories, &RawTrajectory::rewards));
  const bool has_goals =
      std::any_of(dataset.goals.begin(), dataset.goals.end(),
                  [](const auto& g) { return !g.empty(); });
  if (has_goals) {
    std::vector<double> goals;
    for (const auto& g : dataset.goals) {
      if (g.size() != 2) throw std::invalid_argument("every goal needs 2 dims");
      goals.insert(goals.end(), g.begin(), g.end());
    }
    write("goals", goals);
  }
  manifest["files"] = files;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

Dataset LoadDataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw std::runtime_error("no dataset manifest at " +
                             (dir / "manifest.json").string());
  }
  Dataset data;
  data.manifest = nlohmann::json::parse(in);
  if (data.manifest.value("format", "") != "trajplan-dataset") {
    throw std::runtime_error(dir.string() + " is not a trajplan dataset");
  }
  const nlohmann::json& files = data.manifest.at("files");
  auto read = [&](const std::string& name) {
    const nlohmann::json& entry = files.at(name);
    const std::filesystem::path file = dir / entry.at("file").get<std::string>();
    if (FileChecksum(file) != entry.at("fnv1a64").get<std::string>()) {
      throw std::runtime_error("checksum mismatch for " + file.string());
    }
    std::vector<double> values = ReadLittleEndianF32(file);
    if (values.size() != entry.at("count").get<size_t>()) {
      throw std::runtime_error("wrong element count in " + file.string());
    }
    return values;
  };
  const std::vector<double> states = read("states");
  const std::vector<double> actions = read("actions");
  const std::vector<double> rewards = read("rewards");
  std::vector<double> goals;
  if (files.contains("goals")) goals = read("goals");

  const int n = data.manifest.at("state_dim");
  const int m = data.manifest.at("action_dim");
  const auto lengths = data.manifest.at("lengths").get<std::vector<int>>();
  const auto terminal = data.manifest.at("terminal").get<std::vector<bool>>();
  data.behaviors = data.manifest.at("behaviors").get<std::vector<std::string>>();
  size_t offset = 0;
  for (size_t e = 0; e < lengths.size(); ++e) {
    RawTrajectory raw;
    raw.state_dim = n;
    raw.action_dim = m;
    const size_t t = lengths[e];
    if ((offset + t) * n > states.size() || (offset + t) * m > actions.size() ||
        offset + t > rewards.size()) {
      throw std::runtime_error("dataset arrays shorter than episode lengths");
    }
    raw.states.assign(states.begin() + offset * n, states.begin() + (offset + t) * n);
    raw.actions.assign(actions.begin() + offset * m,
                       actions.begin() + (offset + t) * m);
    raw.rewards.assign(rewards.begin() + offset, rewards.begin() + offset + t);
    raw.terminal = terminal.at(e);
    offset += t;
    data.trajectories.push_back(std::move(raw));
    if (goals.empty()) {
      data.goals.emplace_back();
    } else {
      data.goals.push_back({goals.at(2 * e), goals.at(2 * e + 1)});
    }
  }
  if (offset != rewards.size()) {
    throw std::runtime_error("dataset arrays longer than episode lengths");
  }
  return data;
}

double ReplayError(const Dataset& dataset) {
  const std::string id = dataset.manifest.at("env");
  double worst = 0.0;
  Rng unused(0);
  for (size_t e = 0; e < dataset.trajectories.size(); ++e) {
    const RawTrajectory& raw = dataset.trajectories[e];
    if (raw.steps() == 0) continue;
    const auto env = MakeEnvironment(id, dataset.goals[e]);
    std::vector<double> state(raw.state(0).begin(), raw.state(0).end());
    for (int t = 0; t + 1 < raw.steps(); ++t) {
      state = env->Step(state, raw.action(t), unused).state;
      for (int i = 0; i < raw.state_dim; ++i) {
        worst = std::max(worst, std::abs(state[i] - raw.state(t + 1)[i]));
      }
    }
  }
  return worst;
}

}  // namespace trajplan
