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
 * @file cli.hpp
 * @brief The `icegraph` command-line tool.
 *
 * Exit codes: 0 success, 1 usage error, 2 data or validation error,
 * 3 numerical failure. Every run that writes files also writes
 * `<first output>.manifest`.
 */

#pragma once

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

#include "icegraph/baseline.hpp"
#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/metrics.hpp"
#include "icegraph/model.hpp"
#include "icegraph/simulator.hpp"
#include "icegraph/text.hpp"
#include "icegraph/training.hpp"
#include "icegraph/version.hpp"

namespace icegraph::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Lower-case hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw ValidationError("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(text::read_file(path)); }

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run record written next to the outputs.
class Manifest {
 public:
  Manifest(std::string subcommand, const std::vector<std::string>& args) : started_(utc_timestamp()) {
    kv_["subcommand"] = std::move(subcommand);
    std::string joined;
    for (const auto& a : args) joined += (joined.empty() ? "" : " ") + a;
    kv_["args"] = joined;
    kv_["version"] = kVersion;
  }

  void input(const std::string& name, const std::string& path) {
    kv_["input." + name + ".path"] = path;
    kv_["input." + name + ".sha256"] = file_sha256(path);
  }
  void output(const std::string& name, const std::string& path) {
    kv_["output." + name + ".path"] = path;
    if (first_output_.empty()) first_output_ = path;
  }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void config(const std::string& prefix, const text::KeyValues& values) {
    for (const auto& [k, v] : values) kv_[prefix + "." + k] = v;
  }

  void write() {
    if (first_output_.empty()) return;
    kv_["started"] = started_;
    kv_["finished"] = utc_timestamp();
    text::write_file(first_output_ + ".manifest", text::format_key_values(kv_));
  }

 private:
  text::KeyValues kv_;
  std::string started_;
  std::string first_output_;
};

inline std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> v;
  for (auto part : text::split(s, ',')) v.push_back(text::parse_double(text::trim(part)));
  if (v.size() != 3) throw ConfigError("--fractions needs three comma-separated values");
  return v;
}

inline std::string fixed(double v) {
  if (!std::isfinite(v)) return text::format_double(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline double summary_value(const text::KeyValues& kv, const std::string& key, const std::string& what) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(what + " summary is missing '" + key + "'");
  return text::parse_double(it->second);
}

struct CompareRow {
  std::string method;
  double signal = 0;
  double background = 0;
};

/// Table of signal/yr, background/yr and signal:noise, baseline first.
inline std::string compare_table(const CompareRow& baseline, const CompareRow& gnn) {
  const double ratio = baseline.signal > 0 ? gnn.signal / baseline.signal : HUGE_VAL;
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-10s %14s %14s %14s\n", "Method", "Signal", "Background", "Signal:Noise");
  out += line;
  for (const auto* r : {&baseline, &gnn}) {
    std::snprintf(line, sizeof line, "%-10s %14s %14s %14s\n", r->method.c_str(), fixed(r->signal).c_str(),
                  fixed(r->background).c_str(), fixed(signal_to_noise(r->signal, r->background)).c_str());
    out += line;
  }
  out += "GNN/Baseline signal ratio: " + fixed(ratio) + "\n";
  return out;
}

inline std::string compare_csv(const CompareRow& baseline, const CompareRow& gnn) {
  using text::format_double;
  const double ratio = baseline.signal > 0 ? gnn.signal / baseline.signal : HUGE_VAL;
  std::string out = "method,signal_per_year,background_per_year,signal_to_noise,signal_ratio_to_baseline\n";
  out += "Baseline," + format_double(baseline.signal) + "," + format_double(baseline.background) + "," +
         format_double(signal_to_noise(baseline.signal, baseline.background)) + ",1\n";
  out += "GNN," + format_double(gnn.signal) + "," + format_double(gnn.background) + "," +
         format_double(signal_to_noise(gnn.signal, gnn.background)) + "," + format_double(ratio) + "\n";
  return out;
}

inline text::KeyValues read_config(const std::string& path) {
  return path.empty() ? text::KeyValues{} : text::parse_key_values(text::read_file(path));
}

/// Runs the tool; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"icegraph: detector simulation, graph neural network classifier and physics baseline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  unsigned threads = 1;
  auto add_threads = [&](CLI::App* c) { c->add_option("--threads", threads, "Worker threads (results do not depend on it)"); };

  // geom
  auto* geom = app.add_subcommand("geom", "Detector geometry");
  geom->require_subcommand(1);
  std::string geom_out, geom_in;
  auto* geom_build = geom->add_subcommand("build", "Write the standard 86-string geometry");
  geom_build->add_option("--out", geom_out, "Output CSV")->required();
  auto* geom_validate = geom->add_subcommand("validate", "Check a geometry file");
  geom_validate->add_option("path", geom_in, "Geometry CSV")->required();

  // sim
  auto* sim = app.add_subcommand("sim", "Simulate a labeled, weighted event set");
  std::string sim_geom, sim_config, sim_out;
  std::size_t n_signal = 0, n_background = 0;
  std::uint64_t seed = 1;
  sim->add_option("--geom", sim_geom, "Geometry CSV")->required();
  sim->add_option("--config", sim_config, "Simulation config (key=value)");
  sim->add_option("--n-signal", n_signal, "Signal events")->required();
  sim->add_option("--n-background", n_background, "Background events")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Seed (overrides the config)");
  sim->add_option("--out", sim_out, "Output events file")->required();
  add_threads(sim);

  // split
  auto* split = app.add_subcommand("split", "Per-class train/validation/test split");
  std::string split_events, split_prefix, split_fractions = "0.5,0.25,0.25";
  split->add_option("--events", split_events, "Events file")->required();
  split->add_option("--seed", seed, "Seed")->required();
  split->add_option("--out-prefix", split_prefix, "Writes <prefix>.{train,validation,test}.events")->required();
  split->add_option("--fractions", split_fractions, "train,validation,test")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train the graph network");
  std::string tr_events, tr_geom, tr_config, tr_model, tr_report, tr_val;
  trn->add_option("--events", tr_events, "Training events")->required();
  trn->add_option("--geom", tr_geom, "Geometry CSV")->required();
  trn->add_option("--config", tr_config, "Training config (key=value)");
  auto* tr_seed = trn->add_option("--seed", seed, "Seed (overrides the config)");
  trn->add_option("--out-model", tr_model, "Output model file")->required();
  trn->add_option("--report", tr_report, "Per-epoch CSV")->required();
  trn->add_option("--val-events", tr_val, "Validation events; without it --events is split by the seed");
  std::string tr_weighted;
  trn->add_option("--weighted-loss", tr_weighted, "Weight the loss by events/year (overrides the config)")
      ->check(CLI::IsMember({"true", "false"}));
  add_threads(trn);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a model");
  std::string ev_model, ev_events, ev_geom, ev_roc, ev_summary;
  double target_snr = 1.0;
  ev->add_option("--model", ev_model, "Model file")->required();
  ev->add_option("--events", ev_events, "Events file")->required();
  ev->add_option("--geom", ev_geom, "Geometry CSV")->required();
  ev->add_option("--roc-out", ev_roc, "ROC CSV")->required();
  ev->add_option("--summary-out", ev_summary, "Summary (key=value)")->required();
  ev->add_option("--target-snr", target_snr, "Signal-to-noise floor")->capture_default_str();
  add_threads(ev);

  // baseline
  auto* base = app.add_subcommand("baseline", "Stochasticity cut baseline");
  base->require_subcommand(1);
  std::string bl_events, bl_geom, bl_cuts, bl_summary, bl_roc, bl_peak = "mean";
  std::size_t grid = 50;
  auto* bl_tune = base->add_subcommand("tune", "Grid-search the two cuts");
  bl_tune->add_option("--events", bl_events, "Events file (with truth sidecar)")->required();
  bl_tune->add_option("--geom", bl_geom, "Geometry CSV")->required();
  bl_tune->add_option("--out-cuts", bl_cuts, "Output cuts file")->required();
  bl_tune->add_option("--target-snr", target_snr, "Signal-to-noise floor")->capture_default_str();
  bl_tune->add_option("--grid", grid, "Quantile grid size per statistic")->capture_default_str();
  bl_tune->add_option("--peak-statistic", bl_peak, "mean or median")->capture_default_str()->check(CLI::IsMember({"mean", "median"}));
  add_threads(bl_tune);
  auto* bl_eval = base->add_subcommand("eval", "Apply tuned cuts");
  bl_eval->add_option("--events", bl_events, "Events file (with truth sidecar)")->required();
  bl_eval->add_option("--geom", bl_geom, "Geometry CSV")->required();
  bl_eval->add_option("--cuts", bl_cuts, "Cuts file")->required();
  bl_eval->add_option("--summary-out", bl_summary, "Summary (key=value)")->required();
  bl_eval->add_option("--roc-out", bl_roc, "ROC CSV of the baseline score");
  bl_eval->add_option("--target-snr", target_snr, "Signal-to-noise floor")->capture_default_str();
  add_threads(bl_eval);

  // compare
  auto* cmp = app.add_subcommand("compare", "Table of both methods");
  std::string cmp_gnn, cmp_base, cmp_out;
  cmp->add_option("--gnn", cmp_gnn, "GNN summary")->required();
  cmp->add_option("--baseline", cmp_base, "Baseline summary")->required();
  cmp->add_option("--out", cmp_out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    // Help of the innermost selected subcommand.
    const CLI::App* leaf = &app;
    for (bool descended = true; descended;) {
      descended = false;
      for (const auto* sub : leaf->get_subcommands()) {
        leaf = sub;
        descended = true;
        break;
      }
    }
    err << leaf->help();
    return kUsage;
  }

  try {
    if (geom_build->parsed()) {
      Manifest m("geom build", args);
      const auto g = build_standard_geometry();
      save_geometry(g, geom_out);
      m.output("geometry", geom_out);
      m.set("doms", std::to_string(g.doms().size()));
      m.write();
      out << "wrote " << g.doms().size() << " modules on " << g.string_count() << " strings to " << geom_out << "\n";
    } else if (geom_validate->parsed()) {
      const auto g = load_geometry(geom_in);
      out << "ok: " << g.doms().size() << " modules, " << g.string_count() << " strings, minimum separation "
          << text::format_double(min_dom_separation(g)) << " m\n";
    } else if (sim->parsed()) {
      Manifest m("sim", args);
      const auto g = load_geometry(sim_geom);
      m.input("geometry", sim_geom);
      SimConfig config = sim_config_from(read_config(sim_config));
      if (!sim_config.empty()) m.input("config", sim_config);
      if (sim_seed->count()) config.seed = seed;
      config.validate();
      const auto events = generate_dataset(config, g, n_signal, n_background, threads);
      save_events(events, sim_out);
      m.output("events", sim_out);
      m.output("truth", truth_path_for(sim_out));
      m.config("config", to_key_values(config));
      m.set("seed", std::to_string(config.seed));
      m.write();
      out << "wrote " << n_signal << " signal and " << n_background << " background events to " << sim_out << "\n";
    } else if (split->parsed()) {
      Manifest m("split", args);
      const auto events = load_events(split_events);
      m.input("events", split_events);
      SplitSpec spec;
      const auto f = parse_fractions(split_fractions);
      spec.fractions = {f[0], f[1], f[2]};
      spec.seed = seed;
      const auto parts = split_dataset(events, spec);
      const std::array<std::pair<const char*, const std::vector<Event>*>, 3> named{
          {{"train", &parts.train}, {"validation", &parts.validation}, {"test", &parts.test}}};
      for (const auto& [name, set] : named) {
        const std::string path = split_prefix + "." + name + ".events";
        save_events(*set, path);
        m.output(name, path);
        out << name << ": " << set->size() << " events -> " << path << "\n";
      }
      m.set("seed", std::to_string(seed));
      m.set("fractions", split_fractions);
      m.write();
    } else if (trn->parsed()) {
      Manifest m("train", args);
      const auto g = load_geometry(tr_geom);
      m.input("geometry", tr_geom);
      TrainConfig config = train_config_from(read_config(tr_config));
      if (!tr_config.empty()) m.input("config", tr_config);
      if (tr_seed->count()) config.seed = seed;
      if (!tr_weighted.empty()) config.weighted_loss = parse_bool(tr_weighted);
      config.validate();
      auto train_set = load_events(tr_events);
      m.input("events", tr_events);
      std::vector<Event> val_set;
      if (!tr_val.empty()) {
        val_set = load_events(tr_val);
        m.input("val_events", tr_val);
      } else {
        auto parts = split_dataset(train_set, SplitSpec{{0.5, 0.25, 0.25}, config.seed});
        train_set = std::move(parts.train);
        val_set = std::move(parts.validation);
      }
      auto result = train_new(train_set, val_set, g, config, threads, [&](const EpochRecord& r) {
        err << "epoch " << r.epoch << "  loss " << text::format_double(r.train_loss) << "  val_signal_per_year "
            << text::format_double(r.val_metric) << "  " << fixed(r.seconds) << " s\n";
      });
      result.report.model_path = tr_model;
      save_model(result.model, tr_model);
      text::write_file(tr_report, report_csv(result.report));
      m.output("model", tr_model);
      m.output("report", tr_report);
      m.config("config", to_key_values(config));
      m.set("seed", std::to_string(config.seed));
      m.set("best_epoch", std::to_string(result.report.best_epoch));
      m.set("best_val_metric", text::format_double(result.report.best_metric));
      m.set("epochs_run", std::to_string(result.report.epochs.size()));
      m.write();
      out << "best epoch " << result.report.best_epoch << " of " << result.report.epochs.size() << ", validation signal/yr "
          << text::format_double(result.report.best_metric) << "\n";
    } else if (ev->parsed()) {
      Manifest m("eval", args);
      const auto g = load_geometry(ev_geom);
      m.input("geometry", ev_geom);
      const auto model = load_model(ev_model);
      m.input("model", ev_model);
      const std::string bytes = text::read_file(ev_events);
      const auto events = parse_events(bytes);
      m.input("events", ev_events);
      const auto report = evaluate(model, events, g, target_snr, threads);
      auto summary = report_summary(report);
      summary["method"] = "gnn";
      summary["events_sha256"] = sha256_hex(bytes);
      text::write_file(ev_summary, text::format_key_values(summary));
      text::write_file(ev_roc, roc_csv(report.roc));
      m.output("summary", ev_summary);
      m.output("roc", ev_roc);
      m.set("target_snr", text::format_double(target_snr));
      m.write();
      out << text::format_key_values(summary);
    } else if (bl_tune->parsed()) {
      Manifest m("baseline tune", args);
      const auto g = load_geometry(bl_geom);
      m.input("geometry", bl_geom);
      const auto events = load_events(bl_events, true);
      m.input("events", bl_events);
      BaselineSettings settings;
      settings.peak_statistic = bl_peak == "median" ? PeakStatistic::median : PeakStatistic::mean;
      const auto stats = baseline_statistics(events, g, settings, threads);
      const auto tuned = tune_cuts(events, stats, target_snr, grid, settings);
      text::write_file(bl_cuts, serialize_cuts(tuned.cuts));
      m.output("cuts", bl_cuts);
      m.set("target_snr", text::format_double(target_snr));
      m.set("grid", std::to_string(grid));
      m.write();
      out << serialize_cuts(tuned.cuts) << "training selection: signal/yr " << text::format_double(tuned.selection.signal)
          << ", background/yr " << text::format_double(tuned.selection.background) << "\n";
    } else if (bl_eval->parsed()) {
      Manifest m("baseline eval", args);
      const auto g = load_geometry(bl_geom);
      m.input("geometry", bl_geom);
      const auto cuts = parse_cuts(text::read_file(bl_cuts));
      m.input("cuts", bl_cuts);
      const std::string bytes = text::read_file(bl_events);
      auto events = parse_events(bytes);
      parse_truth_into(text::read_file(truth_path_for(bl_events)), events);
      m.input("events", bl_events);
      const auto stats = baseline_statistics(events, g, cuts.settings, threads);
      const auto report = baseline_report(events, stats, cuts, target_snr);
      auto summary = report_summary(report);
      summary["method"] = "baseline";
      summary["events_sha256"] = sha256_hex(bytes);
      text::write_file(bl_summary, text::format_key_values(summary));
      m.output("summary", bl_summary);
      if (!bl_roc.empty()) {
        text::write_file(bl_roc, roc_csv(report.roc));
        m.output("roc", bl_roc);
      }
      m.set("target_snr", text::format_double(target_snr));
      m.write();
      out << text::format_key_values(summary);
    } else if (cmp->parsed()) {
      const auto gs = text::parse_key_values(text::read_file(cmp_gnn));
      const auto bs = text::parse_key_values(text::read_file(cmp_base));
      const auto gd = gs.find("events_sha256");
      const auto bd = bs.find("events_sha256");
      if (gd == gs.end() || bd == bs.end()) throw ValidationError("both summaries must carry events_sha256");
      if (gd->second != bd->second) throw ValidationError("summaries were computed on different event sets");
      const CompareRow gnn{"GNN", summary_value(gs, "signal_per_year", "GNN"), summary_value(gs, "background_per_year", "GNN")};
      const CompareRow baseline{"Baseline", summary_value(bs, "signal_per_year", "baseline"),
                                summary_value(bs, "background_per_year", "baseline")};
      out << compare_table(baseline, gnn);
      if (!cmp_out.empty()) {
        Manifest m("compare", args);
        m.input("gnn_summary", cmp_gnn);
        m.input("baseline_summary", cmp_base);
        text::write_file(cmp_out, compare_csv(baseline, gnn));
        m.output("table", cmp_out);
        m.write();
      }
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

}  // namespace icegraph::cli
