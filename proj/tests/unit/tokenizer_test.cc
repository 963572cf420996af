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

#include "trajplan/tokenizer/tokenizer.h"

#include <cmath>
#include <map>
#include <vector>

#include "gtest/gtest.h"
#include "trajplan/numerics/random.h"

namespace trajplan {
namespace {

// One-dimensional trajectory whose states are `values`; actions and rewards
// are zero.
RawTrajectory Scalar(const std::vector<double>& values) {
  RawTrajectory raw;
  raw.state_dim = 1;
  raw.action_dim = 1;
  raw.states = values;
  raw.actions.assign(values.size(), 0.0);
  raw.rewards.assign(values.size(), 0.0);
  return raw;
}

DimDiscretizer Uniform(double lo, double hi, int vocab) {
  DimDiscretizer d;
  d.scheme = Scheme::kUniform;
  d.lo = lo;
  d.hi = hi;
  d.vocab = vocab;
  return d;
}

TEST(FitUniformTest, BinsOverUnitInterval) {
  std::vector<RawTrajectory> data = {Scalar({0.0, 0.2, 0.7, 1.0})};
  DiscretizerSpec spec = FitUniform(data, {.vocab = 4}, 0.99);
  const DimDiscretizer& d = spec.dim(0);
  EXPECT_EQ(d.lo, 0.0);
  EXPECT_EQ(d.hi, 1.0);
  EXPECT_DOUBLE_EQ(d.BinWidth(), 0.25);
  EXPECT_EQ(d.Encode(0.0), 0);
  EXPECT_EQ(d.Encode(0.25), 1);
  EXPECT_EQ(d.Encode(0.3), 1);
  EXPECT_EQ(d.Encode(0.5), 2);
  EXPECT_EQ(d.Encode(0.75), 3);
  EXPECT_EQ(d.Encode(1.0), 3);
  EXPECT_EQ(d.Encode(-4.0), 0);
  EXPECT_EQ(d.Encode(9.0), 3);
}

TEST(FitUniformTest, RejectsSmallVocabAndEmptyData) {
  std::vector<RawTrajectory> data = {Scalar({0.0, 1.0})};
  EXPECT_THROW(FitUniform(data, {.vocab = 1}, 0.99), std::invalid_argument);
  std::vector<RawTrajectory> none;
  EXPECT_THROW(FitUniform(none, {.vocab = 4}, 0.99), std::invalid_argument);
}

TEST(FitUniformTest, ConstantDimensionIsWidenedWithWarning) {
  std::vector<RawTrajectory> data = {Scalar({0.5, 0.5, 0.5})};
  DiscretizerSpec spec = FitUniform(data, {.vocab = 4}, 0.99);
  EXPECT_DOUBLE_EQ(spec.dim(0).lo, 0.5 - 1e-6);
  EXPECT_DOUBLE_EQ(spec.dim(0).hi, 0.5 + 1e-6);
  EXPECT_FALSE(spec.warnings.empty());
}

TEST(FitUniformTest, PerRoleVocabOverrides) {
  std::vector<RawTrajectory> data = {Scalar({0.0, 1.0})};
  data[0].actions = {0.0, 1.0};
  data[0].rewards = {0.0, 1.0};
  DiscretizerSpec spec = FitUniform(
      data, {.vocab = 10, .action_vocab = 3, .reward_vocab = 4, .value_vocab = 12},
      0.9);
  EXPECT_EQ(spec.dim(0).vocab, 10);
  EXPECT_EQ(spec.dim(1).vocab, 3);
  EXPECT_EQ(spec.dim(2).vocab, 4);
  EXPECT_EQ(spec.dim(3).vocab, 12);
  EXPECT_EQ(spec.vocab(), 12);
  EXPECT_EQ(spec.dim(3).role, DimRole::kRewardToGo);
}

TEST(FitQuantileTest, MidpointEdge) {
  std::vector<RawTrajectory> data = {Scalar({4.0, 1.0, 3.0, 2.0})};
  DiscretizerSpec spec = FitQuantile(data, {.vocab = 2}, 0.99);
  const DimDiscretizer& d = spec.dim(0);
  ASSERT_EQ(d.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(d.edges[0], 2.5);
  EXPECT_EQ(d.Encode(2.0), 0);
  EXPECT_EQ(d.Encode(3.0), 1);
  EXPECT_DOUBLE_EQ(d.Decode(0), 1.75);
  EXPECT_DOUBLE_EQ(d.Decode(1), 3.25);
}

TEST(FitQuantileTest, IdenticalDataMapsToTokenZero) {
  std::vector<RawTrajectory> data = {Scalar(std::vector<double>(20, 7.0))};
  DiscretizerSpec spec = FitQuantile(data, {.vocab = 5}, 0.99);
  EXPECT_EQ(spec.dim(0).Encode(7.0), 0);
  for (int t = 0; t < 5; ++t) {
    EXPECT_EQ(spec.dim(0).Encode(spec.dim(0).Decode(t)), 0);
  }
}

TEST(FitQuantileTest, UniformSamplesGiveBalancedTokens) {
  Rng rng(11);
  std::vector<double> values(1000);
  for (double& v : values) v = rng.Uniform();
  std::vector<RawTrajectory> data = {Scalar(values)};
  DiscretizerSpec spec = FitQuantile(data, {.vocab = 10}, 0.99);
  std::vector<int> counts(10, 0);
  for (double v : values) ++counts[spec.dim(0).Encode(v)];
  for (int c : counts) {
    EXPECT_GE(c / 1000.0, 0.08);
    EXPECT_LE(c / 1000.0, 0.12);
  }
}

// Count deviation is at most 1 plus the multiplicity of values tied at an edge.
TEST(FitQuantileTest, BalancePropertyWithTies) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.UniformInt(200));
    const int vocab = 2 + static_cast<int>(rng.UniformInt(15));
    const int levels = 1 + static_cast<int>(rng.UniformInt(40));
    std::vector<double> values(n);
    for (double& v : values) v = static_cast<double>(rng.UniformInt(levels));
    std::vector<RawTrajectory> data = {Scalar(values)};
    const DimDiscretizer d = FitQuantile(data, {.vocab = vocab}, 0.99).dim(0);
    std::map<double, int> multiplicity;
    for (double v : values) ++multiplicity[v];
    std::vector<int> counts(vocab, 0);
    for (double v : values) ++counts[d.Encode(v)];
    for (int t = 0; t < vocab; ++t) {
      int tied = 0;
      for (double e : {t > 0 ? d.edges[t - 1] : NAN,
                       t < vocab - 1 ? d.edges[t] : NAN}) {
        for (const auto& [value, count] : multiplicity) {
          if (std::abs(value - e) <= 0.5) tied += count;
        }
      }
      EXPECT_LE(std::abs(counts[t] - static_cast<double>(n) / vocab), 1 + tied)
          << "n=" << n << " V=" << vocab << " token " << t;
    }
  }
}

TEST(RewardToGoTest, Examples) {
  std::vector<double> r1 = RewardToGo(std::vector<double>{1, 1, 1}, 1.0);
  EXPECT_EQ(r1, (std::vector<double>{3, 2, 1}));
  std::vector<double> r2 = RewardToGo(std::vector<double>{1, 0, 2}, 0.5);
  EXPECT_EQ(r2, (std::vector<double>{1.5, 1.0, 2.0}));
}

TEST(RewardToGoTest, RecursionHoldsExactly) {
  Rng rng(2);
  std::vector<double> rewards(50);
  for (double& r : rewards) r = rng.Normal();
  const double gamma = 0.97;
  std::vector<double> rtg = RewardToGo(rewards, gamma);
  EXPECT_EQ(rtg.back(), rewards.back());
  for (size_t t = 0; t + 1 < rewards.size(); ++t) {
    EXPECT_EQ(rtg[t], rewards[t] + gamma * rtg[t + 1]);
  }
}

TEST(EncodeTest, TokenCountAndSubVocabulary) {
  RawTrajectory raw = Scalar({0.1, 0.9});
  raw.actions = {0.0, 1.0};
  raw.rewards = {1.0, 0.0};
  std::vector<RawTrajectory> data = {raw};
  DiscretizerSpec spec = FitUniform(data, {.vocab = 5, .action_vocab = 3}, 0.5);
  TokenizedTrajectory tok = Encode(spec, raw, 0.5);
  ASSERT_EQ(tok.tokens.size(), 8u);
  EXPECT_EQ(tok.steps, 2);
  for (size_t k = 0; k < tok.tokens.size(); ++k) {
    const int slot = tok.layout.SubVocab(static_cast<int>(k));
    EXPECT_EQ(slot, static_cast<int>(k % 4));
    EXPECT_GE(tok.tokens[k], 0);
    EXPECT_LT(tok.tokens[k], spec.dim(slot).vocab);
    EXPECT_EQ(tok.InputOffset(static_cast<int>(k), spec.vocab()), slot * 5);
  }
  EXPECT_EQ(tok.tokens[1], 0);  // action 0
  EXPECT_EQ(tok.tokens[5], 2);  // action 1
  EXPECT_EQ(tok.reward_to_go, (std::vector<double>{1.0, 0.0}));
}

TEST(EncodeTest, NanIsReportedWithFieldAndIndex) {
  RawTrajectory raw = Scalar({0.1, 0.9, 0.4});
  std::vector<RawTrajectory> data = {raw};
  DiscretizerSpec spec = FitUniform(data, {.vocab = 5}, 0.99);
  raw.actions[2] = NAN;
  try {
    Encode(spec, raw, 0.99);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("actions"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
}

TEST(EncodeTest, RejectsMismatchedFieldsAndGamma) {
  RawTrajectory raw = Scalar({0.1, 0.9});
  std::vector<RawTrajectory> data = {raw};
  DiscretizerSpec spec = FitUniform(data, {.vocab = 5}, 0.99);
  EXPECT_THROW(Encode(spec, raw, 1.5), std::invalid_argument);
  raw.rewards.pop_back();
  EXPECT_THROW(Encode(spec, raw, 0.9), std::invalid_argument);
}

TEST(DecodeTest, UniformBinCenter) {
  DimDiscretizer d = Uniform(0.0, 1.0, 4);
  EXPECT_DOUBLE_EQ(d.Decode(1), 0.375);
  EXPECT_THROW(d.Decode(4), std::out_of_range);
  EXPECT_THROW(d.Decode(-1), std::out_of_range);
}

TEST(DecodeTest, EncodeDecodeRoundTripBothSchemes) {
  Rng rng(9);
  std::vector<double> values(300);
  for (double& v : values) v = rng.Normal() * 3.0;
  std::vector<RawTrajectory> data = {Scalar(values)};
  for (int vocab : {2, 7, 50}) {
    for (const DiscretizerSpec& spec :
         {FitUniform(data, {.vocab = vocab}, 0.99),
          FitQuantile(data, {.vocab = vocab}, 0.99)}) {
      const DimDiscretizer& d = spec.dim(0);
      for (int t = 0; t < vocab; ++t) EXPECT_EQ(d.Encode(d.Decode(t)), t);
      for (double v : values) {
        const int t = d.Encode(v);
        EXPECT_EQ(d.Encode(d.Decode(t)), t);
        if (d.scheme == Scheme::kUniform) {
          EXPECT_LE(std::abs(d.Decode(t) - v), 0.5 * d.BinWidth() + 1e-12);
        }
      }
    }
  }
}

TEST(OracleTest, AppendixFormula) {
  DiscretizerSpec spec;
  spec.layout = {1, 1};
  spec.dims = {Uniform(0, 1, 100), Uniform(0, 1, 100), Uniform(0, 1, 100),
               Uniform(0, 1, 100)};
  EXPECT_NEAR(DiscreteOracleLogLikelihood(spec), 4.60517, 1e-5);

  spec.dims[0] = Uniform(2.0, 6.0, 1);
  EXPECT_DOUBLE_EQ(DiscreteOracleLogLikelihood(spec), std::log(1.0 / 4.0));

  spec.layout = {2, 1};
  spec.dims = {Uniform(0, 1, 10), Uniform(0, 2, 10), Uniform(0, 1, 10),
               Uniform(0, 1, 10), Uniform(0, 1, 10)};
  EXPECT_NEAR(DiscreteOracleLogLikelihood(spec), std::log(10.0) + std::log(5.0),
              1e-12);
}

TEST(OracleTest, QuantileSpecIsRejected) {
  std::vector<RawTrajectory> data = {Scalar({1, 2, 3, 4})};
  DiscretizerSpec spec = FitQuantile(data, {.vocab = 2}, 0.99);
  EXPECT_THROW(DiscreteOracleLogLikelihood(spec), std::invalid_argument);
}

TEST(JsonTest, RoundTrip) {
  RawTrajectory raw = Scalar({0.1, 0.9, 0.4});
  raw.rewards = {0.0, 1.0, 0.5};
  std::vector<RawTrajectory> data = {raw};
  for (const DiscretizerSpec& spec : {FitUniform(data, {.vocab = 6}, 0.9),
                                      FitQuantile(data, {.vocab = 3}, 0.9)}) {
    DiscretizerSpec back = DiscretizerSpecFromJson(ToJson(spec));
    EXPECT_EQ(back.layout, spec.layout);
    EXPECT_EQ(back.gamma, 0.9);
    ASSERT_EQ(back.dims.size(), spec.dims.size());
    for (size_t i = 0; i < spec.dims.size(); ++i) {
      EXPECT_EQ(back.dims[i].scheme, spec.dims[i].scheme);
      EXPECT_EQ(back.dims[i].role, spec.dims[i].role);
      EXPECT_EQ(back.dims[i].vocab, spec.dims[i].vocab);
      EXPECT_EQ(back.dims[i].lo, spec.dims[i].lo);
      EXPECT_EQ(back.dims[i].hi, spec.dims[i].hi);
      EXPECT_EQ(back.dims[i].edges, spec.dims[i].edges);
    }
    EXPECT_EQ(Encode(back, raw, 0.9).tokens, Encode(spec, raw, 0.9).tokens);
  }
}

}  // namespace
}  // namespace trajplan
