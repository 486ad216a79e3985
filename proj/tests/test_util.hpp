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

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/graph.hpp"

namespace testutil {

inline const icegraph::DetectorGeometry& standard_geometry() {
  static const auto g = icegraph::build_standard_geometry();
  return g;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("icegraph_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Event with `n` distinct random modules of the standard geometry.
inline icegraph::Event random_event(std::mt19937_64& rng, int n, icegraph::Label label = icegraph::Label::signal) {
  const auto& g = standard_geometry();
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g.size()) - 1);
  std::uniform_real_distribution<double> q(0.0, 50.0), u(0.3, 1.0), t(0.0, 3000.0);
  std::vector<char> used(g.size(), 0);
  icegraph::Event e;
  e.label = label;
  e.weight = 1.0;
  while (static_cast<int>(e.hits.size()) < n) {
    const int id = pick(rng);
    if (used[static_cast<std::size_t>(id)]) continue;
    used[static_cast<std::size_t>(id)] = 1;
    const double qt = q(rng);
    e.hits.push_back({id, qt * u(rng), qt, t(rng)});
  }
  e.truth.anchor = icegraph::Vec3(0, 0, -1950);
  e.truth.direction = icegraph::Vec3(0.3, 0.2, -1).normalized();
  e.truth.energy = 1e4;
  return e;
}

/// Random positions (n x 3) in a 1 km cube.
inline icegraph::Matrix random_positions(std::mt19937_64& rng, int n, double extent = 1000.0) {
  std::uniform_real_distribution<double> u(-extent / 2, extent / 2);
  icegraph::Matrix p(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) p(i, k) = u(rng);
  return p;
}

}  // namespace testutil
