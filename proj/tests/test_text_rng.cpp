// Copyright 2026 The icegraph Authors
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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "icegraph/parallel.hpp"
#include "icegraph/rng.hpp"
#include "icegraph/text.hpp"

using namespace icegraph;

TEST(Text, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(i % 40) - 20);
    EXPECT_EQ(text::parse_double(text::format_double(v)), v);
  }
  EXPECT_EQ(text::format_double(0.5), "0.5");
  EXPECT_EQ(text::parse_double(text::format_double(HUGE_VAL)), HUGE_VAL);
  EXPECT_EQ(text::parse_double(text::format_double(-HUGE_VAL)), -HUGE_VAL);
}

TEST(Text, ParseErrorsCarryLineNumbers) {
  try {
    text::parse_key_values("a=1\n# comment\nnot a pair\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(text::parse_double("1.5x"), ParseError);
  EXPECT_THROW(text::parse_int<int>("3.5"), ParseError);
}

TEST(Text, KeyValuesRoundTripSorted) {
  const auto kv = text::parse_key_values(" b = 2 \na=1\n\n# x=y\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "2");
  EXPECT_EQ(text::format_key_values(kv), "a=1\nb=2\n");
  EXPECT_EQ(text::parse_key_values(text::format_key_values(kv)), kv);
}

TEST(Rng, SameKeySameSequence) {
  CounterRng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs_stream |= x != c();
    differs_seed |= x != d();
  }
  EXPECT_TRUE(differs_stream);
  EXPECT_TRUE(differs_seed);
}

TEST(Rng, UniformMomentsAndRange) {
  CounterRng r(1, 0);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = r.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += v;
    sum2 += v * v;
    const double p = r.uniform_pos();
    ASSERT_GT(p, 0.0);
    ASSERT_LE(p, 1.0);
  }
  // Mean 1/2 and variance 1/12; 5 sigma bounds.
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sum2 / n - (sum / n) * (sum / n), 1.0 / 12, 0.002);
}

TEST(Rng, WorksWithStdDistributions) {
  CounterRng a(9, 1), b(9, 1);
  std::poisson_distribution<int> p(3.5);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(p(a), p(b));
}

TEST(Parallel, ResultsIndependentOfWorkers) {
  std::vector<double> one(1000), four(1000);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      CounterRng r(5, i);
      out[i] = r.uniform();
    };
  };
  parallel_for(one.size(), 1, fill(one));
  parallel_for(four.size(), 4, fill(four));
  EXPECT_EQ(one, four);
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 57) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
