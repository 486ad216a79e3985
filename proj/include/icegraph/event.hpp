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
 * @file event.hpp
 * @brief Events (sets of hit modules) and their line-oriented file formats.
 *
 * Events file, one event per line:
 *
 *     <label> <weight> <n_hits> <dom_id>:<q_first>:<q_total>:<t_first> ...
 *
 * with label `signal` or `background`. Lines starting with '#' are comments.
 * The truth sidecar (`<events>.truth`) holds one line per event, same order:
 *
 *     <anchor_x> <anchor_y> <anchor_z> <dir_x> <dir_y> <dir_z> <energy> <multiplicity>
 */

#pragma once

#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

enum class Label { background = 0, signal = 1 };

inline const char* to_string(Label l) { return l == Label::signal ? "signal" : "background"; }

inline Label parse_label(std::string_view s, std::size_t line = 0) {
  if (s == "signal") return Label::signal;
  if (s == "background") return Label::background;
  throw ParseError("unknown label '" + std::string(s) + "'", line);
}

/// Muon (or bundle axis) as an infinite line with an energy.
struct Track {
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3(0, 0, -1);
  double energy = 1.0;  // GeV
  int multiplicity = 1;

  bool operator==(const Track&) const = default;
};

struct Hit {
  int dom_id = 0;
  double q_first = 0;  // photoelectrons
  double q_total = 0;
  double t_first = 0;  // ns

  bool operator==(const Hit&) const = default;
};

struct Event {
  std::vector<Hit> hits;
  double weight = 1.0;  // events / year
  Label label = Label::background;
  Track truth;

  bool is_signal() const noexcept { return label == Label::signal; }
  bool operator==(const Event&) const = default;
};

/// Checks the per-event invariants; `geometry` may be null to skip id lookup.
inline void validate_event(const Event& e, const DetectorGeometry* geometry = nullptr) {
  if (!(e.weight > 0) || !std::isfinite(e.weight)) throw ValidationError("event weight must be finite and > 0");
  if (e.hits.empty()) throw ValidationError("event has no hits");
  std::unordered_set<int> ids;
  for (const auto& h : e.hits) {
    if (!ids.insert(h.dom_id).second) throw ValidationError("duplicate dom_id " + std::to_string(h.dom_id) + " in event");
    if (!(h.q_first >= 0) || !(h.q_total >= h.q_first) || !std::isfinite(h.q_total))
      throw ValidationError("hit charges must satisfy q_total >= q_first >= 0");
    if (!std::isfinite(h.t_first)) throw ValidationError("non-finite hit time");
    if (geometry && !geometry->contains(h.dom_id)) throw ValidationError("unknown dom_id " + std::to_string(h.dom_id));
  }
}

inline constexpr const char* kEventsHeader = "# icegraph-events v1";

inline std::string serialize_events(const std::vector<Event>& events) {
  std::string out = std::string(kEventsHeader) + "\n";
  for (const auto& e : events) {
    out += to_string(e.label);
    out += ' ';
    out += text::format_double(e.weight);
    out += ' ';
    out += std::to_string(e.hits.size());
    for (const auto& h : e.hits) {
      out += ' ';
      out += std::to_string(h.dom_id);
      out += ':';
      out += text::format_double(h.q_first);
      out += ':';
      out += text::format_double(h.q_total);
      out += ':';
      out += text::format_double(h.t_first);
    }
    out += '\n';
  }
  return out;
}

inline std::string serialize_truth(const std::vector<Event>& events) {
  std::string out = "# anchor_x anchor_y anchor_z dir_x dir_y dir_z energy multiplicity\n";
  for (const auto& e : events) {
    const auto& t = e.truth;
    for (double v : {t.anchor.x(), t.anchor.y(), t.anchor.z(), t.direction.x(), t.direction.y(), t.direction.z(), t.energy}) {
      out += text::format_double(v);
      out += ' ';
    }
    out += std::to_string(t.multiplicity);
    out += '\n';
  }
  return out;
}

inline std::vector<Event> parse_events(std::string_view content) {
  std::vector<Event> events;
  std::size_t lineno = 0;
  for (auto line : text::split(content, '\n')) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::tokens(line);
    if (tok.size() < 3) throw ParseError("expected '<label> <weight> <n_hits> ...'", lineno);
    Event e;
    e.label = parse_label(tok[0], lineno);
    e.weight = text::parse_double(tok[1], lineno);
    const auto n = text::parse_int<std::size_t>(tok[2], lineno);
    if (tok.size() != 3 + n) throw ParseError("hit count mismatch: header says " + std::to_string(n), lineno);
    e.hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = text::split(tok[3 + i], ':');
      if (f.size() != 4) throw ParseError("expected dom_id:q_first:q_total:t_first", lineno);
      e.hits.push_back({text::parse_int<int>(f[0], lineno), text::parse_double(f[1], lineno), text::parse_double(f[2], lineno),
                        text::parse_double(f[3], lineno)});
    }
    try {
      validate_event(e);
    } catch (const ValidationError& err) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + err.what());
    }
    events.push_back(std::move(e));
  }
  return events;
}

/// Attaches truth tracks parsed from a sidecar to already-parsed events.
inline void parse_truth_into(std::string_view content, std::vector<Event>& events) {
  std::size_t lineno = 0;
  std::size_t idx = 0;
  for (auto line : text::split(content, '\n')) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::tokens(line);
    if (tok.size() != 8) throw ParseError("expected 8 truth fields", lineno);
    if (idx >= events.size()) throw ValidationError("truth file has more records than the events file");
    double v[7];
    for (int k = 0; k < 7; ++k) v[k] = text::parse_double(tok[static_cast<std::size_t>(k)], lineno);
    auto& t = events[idx++].truth;
    t.anchor = Vec3(v[0], v[1], v[2]);
    t.direction = Vec3(v[3], v[4], v[5]);
    t.energy = v[6];
    t.multiplicity = text::parse_int<int>(tok[7], lineno);
  }
  if (idx != events.size()) throw ValidationError("truth file has fewer records than the events file");
}

inline std::string truth_path_for(const std::string& events_path) { return events_path + ".truth"; }

inline void save_events(const std::vector<Event>& events, const std::string& path) {
  text::write_file(path, serialize_events(events));
  text::write_file(truth_path_for(path), serialize_truth(events));
}

/// Loads events and, if present, the truth sidecar.
inline std::vector<Event> load_events(const std::string& path, bool require_truth = false) {
  auto events = parse_events(text::read_file(path));
  std::ifstream probe(truth_path_for(path));
  if (probe) {
    parse_truth_into(text::read_file(truth_path_for(path)), events);
  } else if (require_truth) {
    throw ValidationError("missing truth sidecar '" + truth_path_for(path) + "'");
  }
  return events;
}

}  // namespace icegraph
