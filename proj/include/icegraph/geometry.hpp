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

/**
 * @file geometry.hpp
 * @brief Sensor-array geometry: strings of optical modules in the ice.
 *
 * Coordinates are meters with z = -depth. The standard build places 78
 * strings on a 125 m triangular lattice plus 8 denser infill strings near
 * the center, 60 modules per string.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

using Vec3 = Eigen::Vector3d;

struct Dom {
  int dom_id = 0;
  int string_id = 0;
  Vec3 position = Vec3::Zero();

  bool operator==(const Dom& o) const {
    return dom_id == o.dom_id && string_id == o.string_id && position == o.position;
  }
};

/// Axis-aligned box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Box inflated(double margin) const { return {lo.array() - margin, hi.array() + margin}; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

namespace geometry_constants {
inline constexpr int kMainStrings = 78;
inline constexpr int kInfillStrings = 8;
inline constexpr int kDomsPerString = 60;
inline constexpr double kStringPitch = 125.0;
inline constexpr double kMainSpacing = 17.0;
inline constexpr double kTopDepth = 1450.0;
inline constexpr double kInfillSpacing = 7.0;
inline constexpr double kInfillBottomDepth = 2450.0;
inline constexpr int kInfillDenseDoms = 50;
inline constexpr double kMinDomSeparation = 1.0;
}  // namespace geometry_constants

class DetectorGeometry {
 public:
  DetectorGeometry() = default;

  /// Takes ownership of the modules and validates them (see validate()).
  DetectorGeometry(std::string name, std::vector<Dom> doms) : name_(std::move(name)), doms_(std::move(doms)) {
    validate();
    index_.assign(doms_.size(), -1);
    for (std::size_t i = 0; i < doms_.size(); ++i) index_[static_cast<std::size_t>(doms_[i].dom_id)] = static_cast<int>(i);
    box_ = compute_box();
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Dom>& doms() const noexcept { return doms_; }
  std::size_t size() const noexcept { return doms_.size(); }
  bool empty() const noexcept { return doms_.empty(); }

  bool contains(int dom_id) const noexcept {
    return dom_id >= 0 && static_cast<std::size_t>(dom_id) < index_.size() && index_[static_cast<std::size_t>(dom_id)] >= 0;
  }

  const Dom& dom(int dom_id) const {
    if (!contains(dom_id)) throw ValidationError("unknown dom_id " + std::to_string(dom_id));
    return doms_[static_cast<std::size_t>(index_[static_cast<std::size_t>(dom_id)])];
  }

  const Vec3& position(int dom_id) const { return dom(dom_id).position; }

  /// Bounding box of all module positions.
  const Box& bounding_box() const noexcept { return box_; }

  int string_count() const {
    std::vector<int> ids;
    for (const auto& d : doms_) ids.push_back(d.string_id);
    std::sort(ids.begin(), ids.end());
    return static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }

  bool operator==(const DetectorGeometry& o) const { return doms_ == o.doms_; }

 private:
  // dom_ids dense from 0 and unique, finite positions, strings vertical.
  void validate() const {
    std::vector<char> seen(doms_.size(), 0);
    for (const auto& d : doms_) {
      if (d.dom_id < 0 || static_cast<std::size_t>(d.dom_id) >= doms_.size())
        throw ValidationError("dom_id " + std::to_string(d.dom_id) + " outside dense range 0.." +
                              std::to_string(static_cast<long long>(doms_.size()) - 1));
      if (seen[static_cast<std::size_t>(d.dom_id)]) throw ValidationError("duplicate dom_id " + std::to_string(d.dom_id));
      seen[static_cast<std::size_t>(d.dom_id)] = 1;
      if (!d.position.allFinite()) throw ValidationError("non-finite position for dom_id " + std::to_string(d.dom_id));
    }
    std::vector<const Dom*> by_string;
    for (const auto& d : doms_) by_string.push_back(&d);
    std::sort(by_string.begin(), by_string.end(), [](auto* a, auto* b) { return a->string_id < b->string_id; });
    for (std::size_t i = 1; i < by_string.size(); ++i) {
      const auto& a = *by_string[i - 1];
      const auto& b = *by_string[i];
      if (a.string_id == b.string_id && (a.position.x() != b.position.x() || a.position.y() != b.position.y()))
        throw ValidationError("string " + std::to_string(a.string_id) + " is not vertical");
    }
  }

  Box compute_box() const {
    Box b;
    if (doms_.empty()) return b;
    b.lo = b.hi = doms_.front().position;
    for (const auto& d : doms_) {
      b.lo = b.lo.cwiseMin(d.position);
      b.hi = b.hi.cwiseMax(d.position);
    }
    return b;
  }

  std::string name_;
  std::vector<Dom> doms_;
  std::vector<int> index_;
  Box box_;
};

/// Smallest pairwise module distance. O(n^2) across strings, O(n) within.
inline double min_dom_separation(const DetectorGeometry& g) {
  double best = HUGE_VAL;
  const auto& d = g.doms();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) best = std::min(best, (d[i].position - d[j].position).norm());
  return best;
}

/// The standard 86-string, 5160-module array.
inline DetectorGeometry build_standard_geometry() {
  namespace gc = geometry_constants;
  const double pitch = gc::kStringPitch;
  const double row_height = pitch * std::sqrt(3.0) / 2.0;

  struct Site {
    double x, y, r2, angle;
  };
  std::vector<Site> sites;
  for (int j = -8; j <= 8; ++j) {
    for (int i = -8; i <= 8; ++i) {
      // Odd rows shift by half a pitch: row-offset hexagonal packing.
      const double x = (i + 0.5 * (j & 1)) * pitch;
      const double y = j * row_height;
      sites.push_back({x, y, x * x + y * y, std::atan2(y, x)});
    }
  }
  // The lattice centroid is the site at the origin. Ties in radius are
  // broken by polar angle so the trimmed footprint is deterministic.
  std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
    if (std::abs(a.r2 - b.r2) > 1e-6) return a.r2 < b.r2;
    return a.angle < b.angle;
  });
  sites.resize(gc::kMainStrings);

  // Infill: midpoints between the center string and its six neighbours,
  // plus two midpoints between neighbour pairs on opposite sides.
  std::vector<std::array<double, 2>> infill;
  for (int k = 0; k < 6; ++k) {
    const double a = k * M_PI / 3.0;
    infill.push_back({0.5 * pitch * std::cos(a), 0.5 * pitch * std::sin(a)});
  }
  for (int k : {0, 3}) {
    const double a0 = k * M_PI / 3.0;
    const double a1 = (k + 1) * M_PI / 3.0;
    infill.push_back({0.5 * pitch * (std::cos(a0) + std::cos(a1)), 0.5 * pitch * (std::sin(a0) + std::sin(a1))});
  }

  std::vector<Dom> doms;
  doms.reserve(static_cast<std::size_t>((gc::kMainStrings + gc::kInfillStrings) * gc::kDomsPerString));
  int dom_id = 0;
  int string_id = 0;
  for (const auto& s : sites) {
    for (int k = 0; k < gc::kDomsPerString; ++k)
      doms.push_back({dom_id++, string_id, Vec3(s.x, s.y, -(gc::kTopDepth + gc::kMainSpacing * k))});
    ++string_id;
  }
  const int sparse_doms = gc::kDomsPerString - gc::kInfillDenseDoms;
  const double dense_top = gc::kInfillBottomDepth - gc::kInfillSpacing * (gc::kInfillDenseDoms - 1);
  for (const auto& xy : infill) {
    // Sparse section above the dense region, top to bottom.
    for (int k = sparse_doms; k >= 1; --k)
      doms.push_back({dom_id++, string_id, Vec3(xy[0], xy[1], -(dense_top - gc::kMainSpacing * k))});
    for (int k = 0; k < gc::kInfillDenseDoms; ++k)
      doms.push_back({dom_id++, string_id, Vec3(xy[0], xy[1], -(dense_top + gc::kInfillSpacing * k))});
    ++string_id;
  }
  return DetectorGeometry("standard-86", std::move(doms));
}

// ---------------------------------------------------------------------------
// File format: header line, then one `dom_id,string_id,x,y,z` record per line.

inline constexpr const char* kGeometryHeader = "dom_id,string_id,x,y,z";

inline std::string serialize_geometry(const DetectorGeometry& g) {
  std::string out = std::string(kGeometryHeader) + "\n";
  for (const auto& d : g.doms()) {
    out += std::to_string(d.dom_id) + "," + std::to_string(d.string_id) + "," + text::format_double(d.position.x()) + "," +
           text::format_double(d.position.y()) + "," + text::format_double(d.position.z()) + "\n";
  }
  return out;
}

inline DetectorGeometry parse_geometry(std::string_view content, std::string name = "loaded") {
  const auto lines = text::split(content, '\n');
  if (lines.empty() || text::trim(lines[0]).empty()) throw ParseError("empty geometry file", 1);
  if (text::trim(lines[0]) != kGeometryHeader)
    throw ParseError("expected header '" + std::string(kGeometryHeader) + "'", 1);
  std::vector<Dom> doms;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 5) throw ParseError("expected 5 comma-separated fields", i + 1);
    doms.push_back({text::parse_int<int>(f[0], i + 1), text::parse_int<int>(f[1], i + 1),
                    Vec3(text::parse_double(f[2], i + 1), text::parse_double(f[3], i + 1), text::parse_double(f[4], i + 1))});
  }
  if (doms.empty()) throw ParseError("geometry file has no records", lines.size());
  return DetectorGeometry(std::move(name), std::move(doms));
}

inline void save_geometry(const DetectorGeometry& g, const std::string& path) { text::write_file(path, serialize_geometry(g)); }

inline DetectorGeometry load_geometry(const std::string& path) { return parse_geometry(text::read_file(path), path); }

}  // namespace icegraph
