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

#include "trajplan/cli/cli.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajplan/cli/svg.h"
#include "trajplan/envs/envs.h"
#include "trajplan/numerics/checkpoint.h"
#include "trajplan/occupancy/occupancy.h"
#include "trajplan/planner/planner.h"
#include "trajplan/seqmodel/train.h"
#include "trajplan/tokenizer/tokenizer.h"

#ifndef TRAJPLAN_VERSION
#define TRAJPLAN_VERSION "0.0.0"
#endif

namespace trajplan {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Settings

enum class Kind { kInt, kDouble, kBool, kString };

struct Setting {
  std::string name;  // JSON key; the flag is --name with '_' -> '-'
  Kind kind;
  json value;        // default; null means "unset"
  std::string help;
  std::string raw;   // flag text
  bool flag = false;
  CLI::Option* option = nullptr;
};

class SettingTable {
 public:
  explicit SettingTable(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_,
                     "JSON file whose \"settings\" object (or the whole file) "
                     "overrides the defaults");
  }

  void Add(const std::string& name, Kind kind, json value, std::string help) {
    auto s = std::make_unique<Setting>();
    s->name = name;
    s->kind = kind;
    s->value = std::move(value);
    std::string flag = "--" + name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (!s->value.is_null()) help += " [" + s->value.dump() + "]";
    s->help = help;
    if (kind == Kind::kBool) {
      s->option = app_->add_flag(flag, s->flag, help);
    } else {
      s->option = app_->add_option(flag, s->raw, help);
    }
    settings_.push_back(std::move(s));
  }

  json Resolve() const {
    json resolved = json::object();
    for (const auto& s : settings_) resolved[s->name] = s->value;
    if (!config_.empty()) {
      std::ifstream in(config_);
      if (!in) throw std::runtime_error("cannot open config file " + config_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw std::runtime_error("config file " + config_ + " is not JSON: " + e.what());
      }
      const json& settings = file.contains("settings") ? file.at("settings") : file;
      for (const auto& [key, v] : settings.items()) {
        if (!resolved.contains(key)) {
          throw std::runtime_error("config file " + config_ +
                                   " has unknown setting '" + key + "'");
        }
        resolved[key] = v;
      }
    }
    if (const char* seed = std::getenv("TRAJPLAN_SEED");
        seed != nullptr && resolved.contains("seed")) {
      resolved["seed"] = ParseValue("seed", Kind::kInt, seed);
    }
    for (const auto& s : settings_) {
      if (s->option->count() == 0) continue;
      resolved[s->name] = s->kind == Kind::kBool ? json(s->flag)
                                                 : ParseValue(s->name, s->kind, s->raw);
    }
    return resolved;
  }

 private:
  static json ParseValue(const std::string& name, Kind kind, const std::string& text) {
    try {
      size_t used = 0;
      switch (kind) {
        case Kind::kInt: {
          const long long v = std::stoll(text, &used);
          if (used == text.size()) return v;
          break;
        }
        case Kind::kDouble: {
          const double v = std::stod(text, &used);
          if (used == text.size()) return v;
          break;
        }
        case Kind::kBool:
          if (text == "true" || text == "1") return true;
          if (text == "false" || text == "0") return false;
          break;
        case Kind::kString:
          return text;
      }
    } catch (const std::exception&) {
    }
    throw std::runtime_error("setting '" + name + "' cannot parse '" + text + "'");
  }

  CLI::App* app_;
  std::string config_;
  std::vector<std::unique_ptr<Setting>> settings_;
};

const json& Required(const json& s, const std::string& name) {
  const json& v = s.at(name);
  if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) {
    std::string flag = "--" + name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    throw std::runtime_error("missing required setting " + flag);
  }
  return v;
}

std::string Str(const json& s, const std::string& name) {
  return s.at(name).is_null() ? std::string() : s.at(name).get<std::string>();
}

// ---------------------------------------------------------------------------
// Files

void WriteText(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

std::string ReadText(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteRunConfig(const fs::path& dir, const std::string& command,
                    const json& settings, const json& inputs) {
  json config = {{"tool", "trajplan"},
                 {"version", TRAJPLAN_VERSION},
                 {"command", command},
                 {"settings", settings},
                 {"seed", settings.contains("seed") ? settings.at("seed") : json()},
                 {"inputs", inputs}};
  WriteText(dir / "config.json", config.dump(2) + "\n");
}

Dataset LoadNonEmptyDataset(const fs::path& dir) {
  if (!fs::exists(dir)) throw std::runtime_error("dataset " + dir.string() + " does not exist");
  Dataset data = LoadDataset(dir);
  if (data.trajectories.empty()) throw std::runtime_error("empty dataset");
  return data;
}

DiscretizerSpec SpecOfModel(const fs::path& model_dir) {
  const Checkpoint checkpoint = LoadCheckpoint(model_dir);
  if (!checkpoint.metadata.contains("tokenizer")) {
    throw std::runtime_error("model " + model_dir.string() +
                             " carries no tokenizer; train it with trajplan train");
  }
  return DiscretizerSpecFromJson(checkpoint.metadata.at("tokenizer"));
}

std::vector<double> ParseList(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::runtime_error(what + ": cannot parse '" + item + "' as a number");
    }
  }
  return values;
}

// "expert:0.25,myopic:0.75:0.2" -> name:fraction[:epsilon] entries.
std::vector<BehaviorMix> ParseMix(const std::string& text) {
  std::vector<BehaviorMix> mix;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::vector<std::string> parts;
    std::stringstream part_in(item);
    std::string part;
    while (std::getline(part_in, part, ':')) parts.push_back(part);
    if (parts.empty() || parts.size() > 3) {
      throw std::runtime_error("mix entry '" + item +
                               "' should be name:fraction[:epsilon]");
    }
    BehaviorMix m;
    m.name = parts[0];
    if (parts.size() > 1) m.fraction = ParseList(parts[1], "mix fraction").at(0);
    if (parts.size() > 2) m.epsilon = ParseList(parts[2], "mix epsilon").at(0);
    mix.push_back(m);
  }
  if (mix.empty()) throw std::runtime_error("empty --mix");
  return mix;
}

double DiscountedReturn(std::span<const double> rewards, double gamma) {
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int Column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error("csv has no column '" + name + "'");
  }
  double Number(size_t row, int column) const {
    return std::stod(rows.at(row).at(column));
  }
};

Csv ReadCsv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream line_in(line);
    std::string cell;
    while (std::getline(line_in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      csv.rows.push_back(std::move(cells));
    }
  }
  return csv;
}

// ---------------------------------------------------------------------------
// make-dataset

void AddDatasetSettings(SettingTable& t) {
  t.Add("env", Kind::kString, "chain", "chain | bandit | ring | four_rooms");
  t.Add("episodes", Kind::kInt, 100, "number of episodes");
  t.Add("seed", Kind::kInt, 0, "dataset seed");
  t.Add("gamma", Kind::kDouble, 0.99, "reward-to-go discount");
  t.Add("myopic_gamma", Kind::kDouble, 0.3, "discount of the myopic behavior");
  t.Add("mix", Kind::kString, "expert:1",
        "behaviors as name:fraction[:epsilon],...; names expert, random, myopic");
  t.Add("out", Kind::kString, nullptr, "output dataset directory");
}

int MakeDatasetCmd(const json& s, std::ostream& out) {
  const fs::path dir = Required(s, "out").get<std::string>();
  DatasetConfig config;
  config.env = s.at("env");
  config.episodes = s.at("episodes");
  config.seed = s.at("seed");
  config.gamma = s.at("gamma");
  config.myopic_gamma = s.at("myopic_gamma");
  config.mix = ParseMix(s.at("mix"));
  const Dataset data = GenerateDataset(config);
  SaveDataset(dir, data);

  std::string csv = "episode,behavior,steps,terminal,return,goal_x,goal_y\n";
  int64_t steps = 0;
  for (size_t e = 0; e < data.trajectories.size(); ++e) {
    const RawTrajectory& raw = data.trajectories[e];
    steps += raw.steps();
    csv += std::to_string(e) + "," + data.behaviors[e] + "," +
           std::to_string(raw.steps()) + "," + (raw.terminal ? "1" : "0") + "," +
           Fmt(DiscountedReturn(raw.rewards, config.gamma)) + ",";
    if (data.goals[e].size() == 2) {
      csv += Fmt(data.goals[e][0]) + "," + Fmt(data.goals[e][1]);
    } else {
      csv += ",";
    }
    csv += "\n";
  }
  WriteText(dir / "episodes.csv", csv);
  WriteRunConfig(dir, "make-dataset", s, json::object());
  out << "wrote " << data.trajectories.size() << " episodes (" << steps
      << " steps) to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tokenize

void AddTokenizerSettings(SettingTable& t) {
  t.Add("vocab", Kind::kInt, 100, "tokens per dimension");
  t.Add("action_vocab", Kind::kInt, 0, "tokens per action dimension (0: --vocab)");
  t.Add("reward_vocab", Kind::kInt, 0, "reward tokens (0: --vocab)");
  t.Add("value_vocab", Kind::kInt, 0, "reward-to-go tokens (0: --vocab)");
  t.Add("scheme", Kind::kString, "uniform", "uniform | quantile");
}

DiscretizerSpec FitTokenizer(const json& s, const Dataset& data, double gamma) {
  VocabOptions vo;
  vo.vocab = s.at("vocab");
  vo.action_vocab = s.at("action_vocab");
  vo.reward_vocab = s.at("reward_vocab");
  vo.value_vocab = s.at("value_vocab");
  const std::string scheme = s.at("scheme");
  if (scheme == "uniform") return FitUniform(data.trajectories, vo, gamma);
  if (scheme == "quantile") return FitQuantile(data.trajectories, vo, gamma);
  throw std::runtime_error("unknown --scheme '" + scheme + "' (uniform or quantile)");
}

double DatasetGamma(const Dataset& data) {
  return data.manifest.value("gamma", 0.99);
}

int TokenizeCmd(const json& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = Required(s, "out").get<std::string>();
  const fs::path dataset_dir = Required(s, "dataset").get<std::string>();
  const Dataset data = LoadNonEmptyDataset(dataset_dir);
  const double gamma = DatasetGamma(data);
  const DiscretizerSpec spec = FitTokenizer(s, data, gamma);
  for (const std::string& w : spec.warnings) err << "warning: " << w << "\n";
  WriteText(dir / "tokenizer.json", ToJson(spec).dump(2) + "\n");

  const TrajectoryLayout layout = spec.layout;
  const int stride = layout.stride();
  std::vector<std::set<int>> used(stride);
  std::vector<double> abs_sum(stride, 0.0), abs_max(stride, 0.0);
  int64_t count = 0;
  for (const RawTrajectory& raw : data.trajectories) {
    const TokenizedTrajectory tok = Encode(spec, raw, gamma);
    for (int t = 0; t < tok.steps; ++t) {
      for (int k = 0; k < stride; ++k) {
        double value;
        if (k < layout.state_dim) {
          value = raw.state(t)[k];
        } else if (k < layout.reward_index()) {
          value = raw.action(t)[k - layout.state_dim];
        } else if (k == layout.reward_index()) {
          value = raw.rewards[t];
        } else {
          value = tok.reward_to_go[t];
        }
        const int token = tok.tokens[t * stride + k];
        used[k].insert(token);
        const double error = std::abs(DecodeValue(spec, k, token) - value);
        abs_sum[k] += error;
        abs_max[k] = std::max(abs_max[k], error);
      }
      ++count;
    }
  }
  std::string csv = "slot,role,scheme,vocab,lo,hi,distinct_tokens,mean_abs_error,max_abs_error\n";
  for (int k = 0; k < stride; ++k) {
    const DimDiscretizer& d = spec.dim(k);
    csv += std::to_string(k) + "," + RoleName(d.role) + "," + SchemeName(d.scheme) +
           "," + std::to_string(d.vocab) + "," + Fmt(d.lo) + "," + Fmt(d.hi) + "," +
           std::to_string(used[k].size()) + "," +
           Fmt(count > 0 ? abs_sum[k] / count : 0.0) + "," + Fmt(abs_max[k]) + "\n";
  }
  WriteText(dir / "token_stats.csv", csv);
  WriteRunConfig(dir, "tokenize", s,
                 {{"dataset", DirectoryChecksum(dataset_dir)}});
  out << "tokenizer with " << spec.vocab() << " tokens per slot written to "
      << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

void AddTrainSettings(SettingTable& t) {
  t.Add("dataset", Kind::kString, nullptr, "dataset directory");
  t.Add("tokenizer", Kind::kString, "",
        "tokenizer.json from trajplan tokenize (empty: fit one here)");
  AddTokenizerSettings(t);
  t.Add("preset", Kind::kString, "desk", "desk | full");
  t.Add("layers", Kind::kInt, nullptr, "transformer blocks (preset)");
  t.Add("heads", Kind::kInt, nullptr, "attention heads (preset)");
  t.Add("embed", Kind::kInt, nullptr, "embedding width (preset)");
  t.Add("dropout", Kind::kDouble, nullptr, "dropout rate (preset)");
  t.Add("context", Kind::kInt, 5, "transitions in the context window");
  t.Add("markovian", Kind::kBool, false, "condition on the previous transition only");
  t.Add("goal", Kind::kBool, false, "prepend the goal state to every window");
  t.Add("updates", Kind::kInt, 0, "optimizer updates (0: --epochs passes)");
  t.Add("epochs", Kind::kInt, 1, "passes over the windows when --updates is 0");
  t.Add("batch", Kind::kInt, 64, "windows per update");
  t.Add("lr", Kind::kDouble, 2.5e-4, "peak learning rate");
  t.Add("warmup", Kind::kInt, 2000, "linear warmup updates");
  t.Add("grad_clip", Kind::kDouble, 1.0, "global gradient norm clip (0: off)");
  t.Add("seed", Kind::kInt, 0, "initialization and shuffling seed");
  t.Add("out", Kind::kString, nullptr, "output run directory");
}

int TrainCmd(const json& s_in, std::ostream& out, std::ostream& err) {
  json s = s_in;
  const fs::path dir = Required(s, "out").get<std::string>();
  const fs::path dataset_dir = Required(s, "dataset").get<std::string>();
  const Dataset data = LoadNonEmptyDataset(dataset_dir);
  const double gamma = DatasetGamma(data);
  json inputs = {{"dataset", DirectoryChecksum(dataset_dir)}};

  DiscretizerSpec spec;
  if (!Str(s, "tokenizer").empty()) {
    const fs::path file = Str(s, "tokenizer");
    spec = DiscretizerSpecFromJson(json::parse(ReadText(file)));
    inputs["tokenizer"] = FileChecksum(file);
    if (!(spec.layout == TrajectoryLayout{data.trajectories[0].state_dim,
                                          data.trajectories[0].action_dim})) {
      throw std::runtime_error("layout mismatch: tokenizer does not fit the dataset's "
                               "state and action dimensions");
    }
  } else {
    spec = FitTokenizer(s, data, gamma);
  }
  for (const std::string& w : spec.warnings) err << "warning: " << w << "\n";

  ModelConfig mc = ModelConfig::Preset(s.at("preset"));
  auto fill = [&](const char* key, auto& field) {
    if (s.at(key).is_null()) {
      s[key] = field;
    } else {
      field = s.at(key).get<std::decay_t<decltype(field)>>();
    }
  };
  fill("layers", mc.layers);
  fill("heads", mc.heads);
  fill("embed", mc.embed_dim);
  fill("dropout", mc.dropout);
  mc.context_transitions = s.at("context");
  mc.markovian = s.at("markovian");
  mc.goal_conditioned = s.at("goal");
  mc = ConfigureForTokenizer(mc, spec);
  mc.Validate();

  std::vector<TokenizedTrajectory> tokens;
  for (const RawTrajectory& raw : data.trajectories) {
    tokens.push_back(Encode(spec, raw, gamma));
  }
  fs::create_directories(dir);
  TrainConfig tc;
  tc.lr_max = s.at("lr");
  tc.warmup_updates = s.at("warmup");
  tc.batch = s.at("batch");
  tc.updates = s.at("updates");
  tc.epochs = s.at("epochs");
  tc.seed = s.at("seed");
  tc.grad_clip = s.at("grad_clip");
  tc.log_csv = dir / "train_log.csv";
  const TrainResult result = Train(InitParams(mc, tc.seed), tokens, tc);

  WriteText(dir / "tokenizer.json", ToJson(spec).dump(2) + "\n");
  SaveModel(dir / "model", result.params, tc.seed,
            {{"tokenizer", ToJson(spec)}, {"gamma", gamma}});
  WriteRunConfig(dir, "train", s, inputs);
  out << "trained " << result.losses.size() << " updates, final nll "
      << (result.losses.empty() ? 0.0 : result.losses.back()) << ", model "
      << DirectoryChecksum(dir / "model") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plan and evaluate

void AddPlannerSettings(SettingTable& t) {
  t.Add("model", Kind::kString, nullptr, "model directory (<train out>/model)");
  t.Add("mode", Kind::kString, "imitation", "imitation | goal | offline");
  t.Add("beam_width", Kind::kInt, 256, "beam width");
  t.Add("horizon", Kind::kInt, 15, "planning horizon in transitions");
  t.Add("horizon_tokens", Kind::kInt, 0,
        "likelihood modes: tokens searched (0: from --horizon)");
  t.Add("k_obs", Kind::kInt, 1, "top-k for observation, reward and value tokens");
  t.Add("k_act", Kind::kDouble, 20, "action tokens sampled from the top k_act percent");
  t.Add("expansions", Kind::kInt, 2, "offline: children per hypothesis");
  t.Add("gamma", Kind::kDouble, 0.99, "discount for offline scores and returns");
  t.Add("heuristic", Kind::kString, "none",
        "offline tail value: none (predicted reward-to-go) | vi (value iteration "
        "on a tabular env) | data (value iteration on the dataset's empirical MDP)");
  t.Add("seed", Kind::kInt, 0, "planning seed");
}

struct LoadedPlanner {
  std::unique_ptr<Planner> planner;
  std::shared_ptr<const DecoderWeights> weights;
  DiscretizerSpec spec;
};

LoadedPlanner MakePlanner(const json& s, const Environment* env,
                          const Dataset* data) {
  const fs::path model_dir = Required(s, "model").get<std::string>();
  LoadedPlanner lp;
  lp.spec = SpecOfModel(model_dir);
  lp.weights = std::make_shared<const DecoderWeights>(LoadModel(model_dir));
  PlanConfig pc;
  pc.beam_width = s.at("beam_width");
  pc.horizon = s.at("horizon");
  pc.horizon_tokens = s.at("horizon_tokens");
  pc.k_obs = s.at("k_obs");
  pc.k_act = s.at("k_act").get<double>() / 100.0;
  pc.expansions = s.at("expansions");
  pc.gamma = s.at("gamma");
  pc.Validate();
  lp.planner = std::make_unique<Planner>(lp.weights, lp.spec, pc,
                                         PlanModeFromName(s.at("mode")));
  const std::string heuristic = s.at("heuristic");
  if (heuristic == "vi") {
    const auto* tabular = dynamic_cast<const TabularEnv*>(env);
    if (tabular == nullptr) {
      throw std::runtime_error("--heuristic vi needs a tabular --env (chain, bandit, ring)");
    }
    lp.planner->set_heuristic(TabularValueHeuristic(*tabular, pc.gamma));
  } else if (heuristic == "data") {
    if (data == nullptr) {
      throw std::runtime_error("--heuristic data needs the training dataset");
    }
    lp.planner->set_heuristic(EmpiricalValueHeuristic(data->trajectories, pc.gamma));
  } else if (heuristic != "none") {
    throw std::runtime_error("unknown --heuristic '" + heuristic +
                             "' (none, vi or data)");
  }
  return lp;
}

int PlanCmd(const json& s, std::ostream& out) {
  const std::vector<double> state = ParseList(Required(s, "state"), "--state");
  std::unique_ptr<Environment> env;
  if (!Str(s, "env").empty()) env = MakeEnvironment(Str(s, "env"));
  std::unique_ptr<Dataset> data;
  if (!Str(s, "dataset").empty()) {
    data = std::make_unique<Dataset>(LoadNonEmptyDataset(Str(s, "dataset")));
  }
  LoadedPlanner lp = MakePlanner(s, env.get(), data.get());
  if (static_cast<int>(state.size()) != lp.spec.layout.state_dim) {
    throw std::runtime_error("layout mismatch: --state has " +
                             std::to_string(state.size()) + " values, the model expects " +
                             std::to_string(lp.spec.layout.state_dim));
  }
  if (!Str(s, "goal").empty()) lp.planner->set_goal(ParseList(Str(s, "goal"), "--goal"));
  const std::string trace = Str(s, "trace");
  lp.planner->set_trace(!trace.empty());
  RawTrajectory history;
  history.state_dim = lp.spec.layout.state_dim;
  history.action_dim = lp.spec.layout.action_dim;
  Rng rng(HashCounters(s.at("seed").get<uint64_t>(), 0));
  const PlanResult result = lp.planner->Plan(history, state, rng);
  for (size_t i = 0; i < result.action.size(); ++i) {
    out << (i ? "," : "") << Fmt(result.action[i]);
  }
  out << "\n";
  if (!trace.empty()) {
    json doc = {{"tool", "trajplan"},
                {"version", TRAJPLAN_VERSION},
                {"settings", s},
                {"inputs", {{"model", DirectoryChecksum(Str(s, "model"))}}},
                {"action", result.action},
                {"tokens", result.tokens},
                {"score", result.score},
                {"trace", result.trace}};
    WriteText(trace, doc.dump(2) + "\n");
  }
  return 0;
}

std::string SlotName(const DiscretizerSpec& spec, int slot) {
  const TrajectoryLayout& l = spec.layout;
  if (slot < l.state_dim) return "s" + std::to_string(slot);
  if (slot < l.reward_index()) return "a" + std::to_string(slot - l.state_dim);
  return slot == l.reward_index() ? "r" : "R";
}

struct EpisodeOutcome {
  Episode episode;
  std::vector<double> start;
  double expert_return = 0.0;
};

int EvaluateCmd(const json& s, std::ostream& out) {
  const fs::path dir = Required(s, "out").get<std::string>();
  const fs::path dataset_dir = Required(s, "dataset").get<std::string>();
  const fs::path model_dir = Required(s, "model").get<std::string>();
  // LoadDataset verifies every array checksum before anything is scored.
  const Dataset data = LoadNonEmptyDataset(dataset_dir);
  const std::string env_id =
      Str(s, "env").empty() ? data.manifest.at("env").get<std::string>() : Str(s, "env");
  const std::unique_ptr<Environment> probe_env = MakeEnvironment(env_id);
  LoadedPlanner lp = MakePlanner(s, probe_env.get(), &data);
  const DiscretizerSpec& spec = lp.spec;
  if (!(spec.layout == TrajectoryLayout{data.trajectories[0].state_dim,
                                        data.trajectories[0].action_dim}) ||
      spec.layout.state_dim != probe_env->state_dim() ||
      spec.layout.action_dim != probe_env->action_dim()) {
    throw std::runtime_error("layout mismatch: the model's state/action dimensions "
                             "differ from the dataset or environment");
  }
  const PlanMode mode = lp.planner->mode();
  const bool four_rooms = env_id == "four_rooms";
  if (mode == PlanMode::kGoal && !four_rooms) {
    throw std::runtime_error("goal mode needs --env four_rooms");
  }

  const double gamma = s.at("gamma");
  const int episodes = s.at("episodes");
  const int max_steps = s.at("max_steps");
  const uint64_t seed = s.at("seed");
  std::vector<EpisodeOutcome> outcomes(std::max(episodes, 0));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    Planner planner = *lp.planner;
    for (int e = next++; e < episodes; e = next++) {
      try {
        Rng rng(HashCounters(seed, static_cast<uint64_t>(e)));
        std::vector<double> goal;
        if (four_rooms) {
          const auto g = FourRooms::SampleFreePoint(rng);
          goal = {g[0], g[1]};
        }
        const std::unique_ptr<Environment> env = MakeEnvironment(env_id, goal);
        EpisodeOutcome& o = outcomes[e];
        o.start = env->SampleStart(rng);
        if (mode == PlanMode::kGoal) planner.set_goal(goal);
        Rng expert_rng(HashCounters(seed, static_cast<uint64_t>(e), 1));
        o.expert_return =
            RollOut(*env, *MakeExpertPolicy(*env), o.start, gamma, expert_rng)
                .discounted_return;
        o.episode = RunEpisode(*env, planner, o.start, max_steps, gamma, rng);
        o.episode.goal = goal;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = episodes;
      }
    }
  };
  const int workers = std::clamp<int>(s.at("workers").get<int>(), 1, 64);
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  const int n = spec.layout.state_dim, m = spec.layout.action_dim;
  std::string episodes_csv = "episode,success,steps,return,expert_return";
  for (int i = 0; i < n; ++i) episodes_csv += ",start_" + std::to_string(i);
  episodes_csv += ",goal_x,goal_y\n";
  std::string traj_csv = "episode,t";
  for (int i = 0; i < n; ++i) traj_csv += ",s" + std::to_string(i);
  for (int i = 0; i < m; ++i) traj_csv += ",a" + std::to_string(i);
  traj_csv += ",r\n";
  double successes = 0, total_return = 0, total_expert = 0, total_steps = 0;
  for (int e = 0; e < episodes; ++e) {
    const EpisodeOutcome& o = outcomes[e];
    const RawTrajectory& raw = o.episode.trajectory;
    successes += o.episode.success;
    total_return += o.episode.discounted_return;
    total_expert += o.expert_return;
    total_steps += raw.steps();
    episodes_csv += std::to_string(e) + "," + (o.episode.success ? "1" : "0") + "," +
                    std::to_string(raw.steps()) + "," +
                    Fmt(o.episode.discounted_return) + "," + Fmt(o.expert_return);
    for (double v : o.start) episodes_csv += "," + Fmt(v);
    if (o.episode.goal.size() == 2) {
      episodes_csv += "," + Fmt(o.episode.goal[0]) + "," + Fmt(o.episode.goal[1]);
    } else {
      episodes_csv += ",,";
    }
    episodes_csv += "\n";
    for (int t = 0; t < raw.steps(); ++t) {
      traj_csv += std::to_string(e) + "," + std::to_string(t);
      for (double v : raw.state(t)) traj_csv += "," + Fmt(v);
      for (double v : raw.action(t)) traj_csv += "," + Fmt(v);
      traj_csv += "," + Fmt(raw.rewards[t]) + "\n";
    }
  }

  // Held-in likelihood per slot over (a prefix of) the dataset.
  const int nll_episodes = s.at("nll_episodes");
  std::vector<TokenizedTrajectory> tokens;
  for (const RawTrajectory& raw : data.trajectories) {
    if (nll_episodes > 0 && static_cast<int>(tokens.size()) >= nll_episodes) break;
    tokens.push_back(Encode(spec, raw, DatasetGamma(data)));
  }
  const std::vector<double> nll = SlotNll(LoadModel(model_dir), tokens);
  std::string nll_csv = "slot,name,role,nll\n";
  for (size_t k = 0; k < nll.size(); ++k) {
    nll_csv += std::to_string(k) + "," + SlotName(spec, k) + "," +
               RoleName(spec.dim(k).role) + "," + Fmt(nll[k]) + "\n";
  }

  const double count = std::max(episodes, 1);
  json summary = {{"env", env_id},
                  {"mode", PlanModeName(mode)},
                  {"episodes", episodes},
                  {"success_rate", successes / count},
                  {"mean_return", total_return / count},
                  {"mean_expert_return", total_expert / count},
                  {"normalized_return",
                   total_expert != 0 ? total_return / total_expert : 0.0},
                  {"mean_steps", total_steps / count},
                  {"slot_nll", nll}};
  WriteText(dir / "episodes.csv", episodes_csv);
  WriteText(dir / "trajectories.csv", traj_csv);
  WriteText(dir / "slot_nll.csv", nll_csv);
  WriteText(dir / "summary.json", summary.dump(2) + "\n");
  WriteRunConfig(dir, "evaluate", s,
                 {{"dataset", DirectoryChecksum(dataset_dir)},
                  {"model", DirectoryChecksum(model_dir)}});
  char line[160];
  std::snprintf(line, sizeof(line),
                "%s %s: success %.3f, mean return %.6g (expert %.6g) over %d episodes\n",
                env_id.c_str(), PlanModeName(mode), successes / count,
                total_return / count, total_expert / count, episodes);
  out << line;
  return 0;
}

// ---------------------------------------------------------------------------
// gamma

const std::vector<double> kHeatGammas = {0.0, 0.25, 0.5, 0.75, 0.9, 0.95};
const std::vector<double> kHeatTargets = {0.9, 0.95, 0.97, 0.99, 0.995};

int GammaCmd(const json& s, std::ostream& out) {
  const double gamma = Required(s, "gamma");
  const double gamma_tilde = Required(s, "gamma_tilde");
  const double mass = s.at("mass");
  const int steps = StepsToMass(gamma, gamma_tilde, mass);
  out << steps << "\n";
  if (Str(s, "out").empty()) return 0;

  const fs::path dir = Str(s, "out");
  const int horizon = s.at("horizon");
  const RolloutWeights w = ComputeRolloutWeights(gamma, gamma_tilde, horizon);
  std::string alpha_csv = "n,alpha,cumulative\n";
  double cumulative = 0.0;
  Series series{"gamma " + Fmt(gamma) + " -> " + Fmt(gamma_tilde), {}, {}};
  for (int k = 0; k < horizon; ++k) {
    cumulative += w.alpha[k];
    alpha_csv += std::to_string(k + 1) + "," + Fmt(w.alpha[k]) + "," + Fmt(cumulative) + "\n";
    series.x.push_back(k + 1);
    series.y.push_back(w.alpha[k]);
  }
  WriteText(dir / "alpha.csv", alpha_csv);
  WriteText(dir / "alpha.svg",
            SvgLinePlot({series}, {"Rollout weights", "model steps n", "alpha_n", false}));

  Eigen::MatrixXd heat(kHeatGammas.size(), kHeatTargets.size());
  std::string heat_csv = "gamma,gamma_tilde,mass,steps\n";
  std::vector<std::string> rows, cols;
  for (size_t i = 0; i < kHeatGammas.size(); ++i) {
    rows.push_back(Fmt(kHeatGammas[i]));
    for (size_t j = 0; j < kHeatTargets.size(); ++j) {
      const bool valid = kHeatTargets[j] >= kHeatGammas[i];
      const int h = valid ? StepsToMass(kHeatGammas[i], kHeatTargets[j], mass) : 0;
      heat(i, j) = valid ? h : std::nan("");
      if (valid) {
        heat_csv += Fmt(kHeatGammas[i]) + "," + Fmt(kHeatTargets[j]) + "," +
                    Fmt(mass) + "," + std::to_string(h) + "\n";
      }
    }
  }
  for (double t : kHeatTargets) cols.push_back(Fmt(t));
  WriteText(dir / "steps_to_mass.csv", heat_csv);
  WriteText(dir / "steps_to_mass.svg",
            SvgHeatmap(heat, rows, cols, "Model steps to cover " + Fmt(mass) + " of the mass",
                       "target discount", "model discount", true));
  WriteRunConfig(dir, "gamma", s, json::object());
  return 0;
}

// ---------------------------------------------------------------------------
// plot

int PlotCmd(const json& s, std::ostream& out) {
  const std::string kind = s.at("kind");
  const fs::path input = Required(s, "input").get<std::string>();
  const fs::path file = Required(s, "out").get<std::string>();
  std::string svg;
  if (kind == "loss") {
    const Csv csv = ReadCsv(input);
    const int u = csv.Column("update"), l = csv.Column("nll");
    Series series{"training nll", {}, {}};
    for (size_t r = 0; r < csv.rows.size(); ++r) {
      series.x.push_back(csv.Number(r, u));
      series.y.push_back(csv.Number(r, l));
    }
    svg = SvgLinePlot({series}, {"Training loss", "update", "nll (nats per token)", false});
  } else if (kind == "alpha") {
    const Csv csv = ReadCsv(input);
    const int n = csv.Column("n"), a = csv.Column("alpha");
    Series series{"alpha_n", {}, {}};
    for (size_t r = 0; r < csv.rows.size(); ++r) {
      series.x.push_back(csv.Number(r, n));
      series.y.push_back(csv.Number(r, a));
    }
    svg = SvgLinePlot({series}, {"Rollout weights", "model steps n", "alpha_n", true});
  } else if (kind == "heatmap") {
    const Csv csv = ReadCsv(input);
    const int g = csv.Column("gamma"), gt = csv.Column("gamma_tilde"),
              st = csv.Column("steps");
    std::map<double, int> row_index, col_index;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
      row_index[csv.Number(r, g)] = 0;
      col_index[csv.Number(r, gt)] = 0;
    }
    std::vector<std::string> rows, cols;
    for (auto& [v, i] : row_index) i = static_cast<int>(rows.size()), rows.push_back(Fmt(v));
    for (auto& [v, i] : col_index) i = static_cast<int>(cols.size()), cols.push_back(Fmt(v));
    Eigen::MatrixXd heat = Eigen::MatrixXd::Constant(rows.size(), cols.size(), std::nan(""));
    for (size_t r = 0; r < csv.rows.size(); ++r) {
      heat(row_index[csv.Number(r, g)], col_index[csv.Number(r, gt)]) = csv.Number(r, st);
    }
    svg = SvgHeatmap(heat, rows, cols, "Model steps to cover the mass", "target discount",
                     "model discount", true);
  } else if (kind == "trajectories") {
    // `input` is an evaluate output directory on four rooms.
    const Csv episodes = ReadCsv(input / "episodes.csv");
    const Csv steps = ReadCsv(input / "trajectories.csv");
    const int max_traces = s.at("max_traces");
    std::vector<Trace> traces;
    const int sc = episodes.Column("success"),
              gx = episodes.Column("goal_x"), gy = episodes.Column("goal_y");
    for (size_t r = 0; r < episodes.rows.size() && static_cast<int>(traces.size()) < max_traces; ++r) {
      if (episodes.rows[r].at(gx).empty()) {
        throw std::runtime_error("trajectory plots need four-rooms episodes with goals");
      }
      Trace t;
      t.goal = {episodes.Number(r, gx), episodes.Number(r, gy)};
      t.success = episodes.Number(r, sc) != 0;
      traces.push_back(t);
    }
    const int e = steps.Column("episode"), x = steps.Column("s0"), y = steps.Column("s1");
    for (size_t r = 0; r < steps.rows.size(); ++r) {
      const int k = static_cast<int>(steps.Number(r, e));
      if (k < static_cast<int>(traces.size())) {
        traces[k].points.push_back({steps.Number(r, x), steps.Number(r, y)});
      }
    }
    svg = SvgFourRooms(traces, "Goal-reaching trajectories");
  } else {
    throw std::runtime_error("unknown --kind '" + kind +
                             "' (loss, alpha, heatmap or trajectories)");
  }
  WriteText(file, svg);
  out << "wrote " << file.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

const char* const kEvaluateFooter = R"(Outputs in --out:
  episodes.csv      episode,success,steps,return,expert_return,start_<i>...,goal_x,goal_y
                    return is sum_t gamma^t r_t; expert_return rolls the scripted
                    expert from the same start; goal columns are empty off four rooms
  trajectories.csv  episode,t,s<i>...,a<i>...,r   one row per logged step
  slot_nll.csv      slot,name,role,nll   mean held-in nats per token position
  summary.json      success_rate, mean_return, mean_expert_return, normalized_return,
                    mean_steps, slot_nll
  config.json       resolved settings, tool version, seed, input checksums)";

}  // namespace

const char* ToolVersion() { return TRAJPLAN_VERSION; }

std::string DirectoryChecksum(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("missing directory " + dir.string());
  }
  std::vector<std::string> entries;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    entries.push_back(fs::relative(entry.path(), dir).generic_string() + "=" +
                      FileChecksum(entry.path()));
  }
  std::sort(entries.begin(), entries.end());
  std::string joined;
  for (const std::string& e : entries) joined += e + "\n";
  return Fnv1a64Hex(joined);
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory modeling and planning with a sequence model", "trajplan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TRAJPLAN_VERSION);

  CLI::App* make_dataset = app.add_subcommand("make-dataset", "Generate a dataset");
  make_dataset->footer(R"(Outputs in --out:
  manifest.json, states.f32, actions.f32, rewards.f32, goals.f32 (four rooms)
  episodes.csv  episode,behavior,steps,terminal,return,goal_x,goal_y
  config.json   resolved settings, tool version, seed)");
  SettingTable make_dataset_settings(make_dataset);
  AddDatasetSettings(make_dataset_settings);

  CLI::App* tokenize = app.add_subcommand("tokenize", "Fit a tokenizer to a dataset");
  tokenize->footer(R"(Outputs in --out:
  tokenizer.json   per-slot discretizers
  token_stats.csv  slot,role,scheme,vocab,lo,hi,distinct_tokens,mean_abs_error,max_abs_error
                   errors are |decode(encode(x)) - x| over the dataset
  config.json      resolved settings, tool version, input checksums)");
  SettingTable tokenize_settings(tokenize);
  tokenize_settings.Add("dataset", Kind::kString, nullptr, "dataset directory");
  AddTokenizerSettings(tokenize_settings);
  tokenize_settings.Add("out", Kind::kString, nullptr, "output directory");

  CLI::App* train = app.add_subcommand("train", "Train the sequence model");
  train->footer(R"(Outputs in --out:
  model/           checkpoint (manifest.json plus tensors), carries the tokenizer
  tokenizer.json   the tokenizer used
  train_log.csv    update,lr,nll   one row per optimizer update
  config.json      resolved settings, tool version, seed, input checksums)");
  SettingTable train_settings(train);
  AddTrainSettings(train_settings);

  CLI::App* plan = app.add_subcommand("plan", "Plan one action from a state");
  plan->footer("Prints the planned action as comma-separated numbers. --trace writes\n"
               "a JSON file with the settings, best continuation and per-step beams.");
  SettingTable plan_settings(plan);
  AddPlannerSettings(plan_settings);
  plan_settings.Add("state", Kind::kString, nullptr, "current state, comma-separated");
  plan_settings.Add("goal", Kind::kString, "", "goal state for goal mode");
  plan_settings.Add("env", Kind::kString, "", "environment for --heuristic vi");
  plan_settings.Add("dataset", Kind::kString, "", "dataset for --heuristic data");
  plan_settings.Add("trace", Kind::kString, "", "write a plan trace JSON here");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Run planning episodes");
  evaluate->footer(kEvaluateFooter);
  SettingTable evaluate_settings(evaluate);
  AddPlannerSettings(evaluate_settings);
  evaluate_settings.Add("dataset", Kind::kString, nullptr,
                        "dataset the model was trained on (checksums are verified)");
  evaluate_settings.Add("env", Kind::kString, "", "environment (empty: the dataset's)");
  evaluate_settings.Add("episodes", Kind::kInt, 100, "episodes to run");
  evaluate_settings.Add("max_steps", Kind::kInt, -1, "step cap (-1: environment limit)");
  evaluate_settings.Add("workers", Kind::kInt, 1, "parallel episode workers");
  evaluate_settings.Add("nll_episodes", Kind::kInt, 200,
                        "dataset episodes scored for slot_nll.csv (0: all)");
  evaluate_settings.Add("out", Kind::kString, nullptr, "output directory");

  CLI::App* gamma = app.add_subcommand("gamma", "Rollout weights between discounts");
  gamma->footer(R"(Prints the number of model steps whose weights cover --mass.
With --out:
  alpha.csv          n,alpha,cumulative   for n = 1..horizon
  alpha.svg          the same weights
  steps_to_mass.csv  gamma,gamma_tilde,mass,steps   over a fixed grid
  steps_to_mass.svg  heatmap of the grid
  config.json        resolved settings, tool version)");
  SettingTable gamma_settings(gamma);
  gamma_settings.Add("gamma", Kind::kDouble, nullptr, "model discount");
  gamma_settings.Add("gamma_tilde", Kind::kDouble, nullptr, "target discount");
  gamma_settings.Add("mass", Kind::kDouble, 0.95, "weight mass to cover");
  gamma_settings.Add("horizon", Kind::kInt, 50, "rows of alpha.csv");
  gamma_settings.Add("out", Kind::kString, "", "output directory (optional)");

  CLI::App* plot = app.add_subcommand("plot", "Render an SVG from CSV outputs");
  plot->footer(R"(Kinds and inputs:
  loss          train_log.csv
  alpha         alpha.csv
  heatmap       steps_to_mass.csv
  trajectories  an evaluate --out directory on four rooms)");
  SettingTable plot_settings(plot);
  plot_settings.Add("kind", Kind::kString, "loss", "loss | alpha | heatmap | trajectories");
  plot_settings.Add("input", Kind::kString, nullptr, "input CSV or directory");
  plot_settings.Add("max_traces", Kind::kInt, 20, "trajectories drawn");
  plot_settings.Add("out", Kind::kString, nullptr, "output SVG file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    if (make_dataset->parsed()) return MakeDatasetCmd(make_dataset_settings.Resolve(), out);
    if (tokenize->parsed()) return TokenizeCmd(tokenize_settings.Resolve(), out, err);
    if (train->parsed()) return TrainCmd(train_settings.Resolve(), out, err);
    if (plan->parsed()) return PlanCmd(plan_settings.Resolve(), out);
    if (evaluate->parsed()) return EvaluateCmd(evaluate_settings.Resolve(), out);
    if (gamma->parsed()) return GammaCmd(gamma_settings.Resolve(), out);
    if (plot->parsed()) return PlotCmd(plot_settings.Resolve(), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv = {"trajplan"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace trajplan
