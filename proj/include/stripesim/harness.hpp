// SPDX-License-Identifier: Apache-2.0
//
// stripesim - cell-free MIMO downlink over serial fronthaul
// Copyright (C) 2026 the stripesim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Monte Carlo sweep driver. A plan names one sweep axis, its values, the
// schemes and robustness modes to compare, and a trial count; every
// (value, trial) pair shares one channel realization across all schemes
// and modes so comparisons are paired. Output is a flat CSV or JSON table
// plus per-(value, scheme, mode) mean aggregates.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stripesim/channel.hpp"
#include "stripesim/config.hpp"
#include "stripesim/optimizer.hpp"
#include "stripesim/rng.hpp"

namespace stripesim {

enum class SweepAxis { snr_db, num_aps, fronthaul_capacity, csi_error_fraction };
enum class RobustnessMode { robust, non_robust };
enum class OutputFormat { csv, json };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::snr_db: return "snr_db";
    case SweepAxis::num_aps: return "num_aps";
    case SweepAxis::fronthaul_capacity: return "fronthaul_capacity";
    default: return "csi_error_fraction";
  }
}

inline SweepAxis axis_from_string(const std::string& s) {
  if (s == "snr_db") return SweepAxis::snr_db;
  if (s == "num_aps") return SweepAxis::num_aps;
  if (s == "fronthaul_capacity") return SweepAxis::fronthaul_capacity;
  if (s == "csi_error_fraction") return SweepAxis::csi_error_fraction;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

inline std::string to_string(RobustnessMode m) {
  return m == RobustnessMode::robust ? "robust" : "non_robust";
}

inline RobustnessMode mode_from_string(const std::string& s) {
  if (s == "robust") return RobustnessMode::robust;
  if (s == "non_robust") return RobustnessMode::non_robust;
  throw std::invalid_argument("unknown robustness mode: " + s);
}

inline std::string to_string(OutputFormat f) {
  return f == OutputFormat::csv ? "csv" : "json";
}

inline OutputFormat format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw std::invalid_argument("unknown output format: " + s);
}

struct ExperimentPlan {
  NetworkConfig base;
  SweepAxis axis = SweepAxis::snr_db;
  std::vector<double> values;
  std::vector<Scheme> schemes = {Scheme::WZ, Scheme::P2P};
  std::vector<RobustnessMode> modes = {RobustnessMode::robust};
  int num_trials = 50;
  std::uint64_t base_seed = 1;
  std::string output_path;
  OutputFormat format = OutputFormat::csv;
  OptimizerConfig optimizer;
  int num_threads = 0;  // 0: use the hardware concurrency
  // Wall-clock runtimes make output files run-dependent, so rows carry
  // runtime_s = 0 unless timing is explicitly requested.
  bool record_timing = false;

  void validate() const {
    base.validate();
    if (values.empty()) throw std::invalid_argument("plan: no sweep values");
    if (schemes.empty()) throw std::invalid_argument("plan: no schemes");
    if (modes.empty()) throw std::invalid_argument("plan: no modes");
    if (num_trials < 1) throw std::invalid_argument("plan: num_trials < 1");
    for (double v : values) {
      if (axis == SweepAxis::num_aps &&
          (v < 1.0 || v != static_cast<double>(static_cast<int>(v))))
        throw std::invalid_argument("plan: num_aps values must be integers >= 1");
      if (axis == SweepAxis::fronthaul_capacity && !(v > 0.0))
        throw std::invalid_argument("plan: fronthaul capacities must be > 0");
      if (axis == SweepAxis::csi_error_fraction && !(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("plan: csi fractions must be in [0, 1]");
    }
  }
};

inline NetworkConfig apply_sweep_value(const NetworkConfig& base,
                                       SweepAxis axis, double value) {
  NetworkConfig cfg = base;
  switch (axis) {
    case SweepAxis::snr_db: cfg.set_snr_db(value); break;
    case SweepAxis::num_aps: cfg.num_aps = static_cast<int>(value); break;
    case SweepAxis::fronthaul_capacity: cfg.fronthaul_capacity = value; break;
    case SweepAxis::csi_error_fraction:
      cfg.csi_error_fraction = value;
      cfg.csi_error_fraction_matrix.resize(0, 0);
      break;
  }
  return cfg;
}

struct ResultRow {
  SweepAxis axis = SweepAxis::snr_db;
  double sweep_value = 0.0;
  Scheme scheme = Scheme::WZ;
  RobustnessMode mode = RobustnessMode::robust;
  int trial = 0;
  std::uint64_t seed = 0;
  double sum_rate = 0.0;  // bits/symbol
  Eigen::VectorXd per_ue_rates;
  int iterations = 0;
  double runtime_s = 0.0;
  std::string status;
};

struct AggregateRow {
  double sweep_value = 0.0;
  Scheme scheme = Scheme::WZ;
  RobustnessMode mode = RobustnessMode::robust;
  double mean_sum_rate = 0.0;
  int num_rows = 0;
};

struct PlanResult {
  std::vector<ResultRow> rows;         // (value, scheme, mode, trial) order
  std::vector<AggregateRow> aggregates;
};

inline PlanResult run_plan(const ExperimentPlan& plan) {
  plan.validate();
  const int nv = static_cast<int>(plan.values.size());
  const int ns = static_cast<int>(plan.schemes.size());
  const int nm = static_cast<int>(plan.modes.size());
  const int nt = plan.num_trials;

  std::vector<ResultRow> rows(
      static_cast<std::size_t>(nv) * ns * nm * nt);
  auto slot = [&](int vi, int si, int mi, int trial) {
    return ((static_cast<std::size_t>(vi) * ns + si) * nm + mi) * nt + trial;
  };

  // One task = one (value, trial) pair; all schemes/modes inside the task
  // reuse its channel realization. Tasks write disjoint row slots.
  const int num_tasks = nv * nt;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int task = next.fetch_add(1); task < num_tasks;
         task = next.fetch_add(1)) {
      const int vi = task / nt;
      const int trial = task % nt;
      const std::uint64_t seed =
          plan.base_seed ^ static_cast<std::uint64_t>(trial);
      const NetworkConfig cfg =
          apply_sweep_value(plan.base, plan.axis, plan.values[vi]);

      Topology topo;
      CsiRealization csi;
      bool channel_ok = true;
      std::string channel_error;
      try {
        topo = generate_topology(cfg, derive_seed(seed, 0));
        csi = sample_csi(topo, cfg, derive_seed(seed, 1));
      } catch (const std::exception& ex) {
        channel_ok = false;
        channel_error = ex.what();
      }

      for (int si = 0; si < ns; ++si)
        for (int mi = 0; mi < nm; ++mi) {
          ResultRow row;
          row.axis = plan.axis;
          row.sweep_value = plan.values[vi];
          row.scheme = plan.schemes[si];
          row.mode = plan.modes[mi];
          row.trial = trial;
          row.seed = seed;
          if (!channel_ok) {
            row.status = "error: " + channel_error;
          } else {
            OptimizerConfig oc = plan.optimizer;
            oc.scheme = plan.schemes[si];
            oc.non_robust = plan.modes[mi] == RobustnessMode::non_robust;
            oc.log = nullptr;
            const auto start = std::chrono::steady_clock::now();
            try {
              const SolveResult res = run(csi, cfg, oc);
              row.sum_rate = res.sum_rate;
              row.per_ue_rates = res.per_ue_rates;
              row.iterations = res.outer_iterations;
              row.status = to_string(res.status);
            } catch (const std::exception& ex) {
              row.sum_rate = 0.0;
              row.iterations = 0;
              row.status = std::string("error: ") + ex.what();
            }
            if (plan.record_timing)
              row.runtime_s =
                  std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
          }
          for (char& ch : row.status)
            if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
          rows[slot(vi, si, mi, trial)] = std::move(row);
        }
    }
  };

  int threads = plan.num_threads > 0
                    ? plan.num_threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, num_tasks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  PlanResult out;
  out.rows = std::move(rows);
  for (int vi = 0; vi < nv; ++vi)
    for (int si = 0; si < ns; ++si)
      for (int mi = 0; mi < nm; ++mi) {
        AggregateRow agg;
        agg.sweep_value = plan.values[vi];
        agg.scheme = plan.schemes[si];
        agg.mode = plan.modes[mi];
        agg.num_rows = nt;
        double acc = 0.0;
        for (int trial = 0; trial < nt; ++trial)
          acc += out.rows[slot(vi, si, mi, trial)].sum_rate;
        agg.mean_sum_rate = acc / nt;
        out.aggregates.push_back(agg);
      }
  return out;
}

// 12-significant-digit decimal rendering used for every floating value in
// both output formats; parsing it back recovers the printed digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

namespace detail {

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline void emit(const std::vector<ResultRow>& rows, OutputFormat format,
                 const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit: cannot open " + path);
  if (format == OutputFormat::csv) {
    f << "sweep_axis,sweep_value,scheme,mode,trial,seed,sum_rate_bps,"
         "iterations,runtime_s,status\n";
    for (const ResultRow& r : rows) {
      f << to_string(r.axis) << ',' << format_double(r.sweep_value) << ','
        << to_string(r.scheme) << ',' << to_string(r.mode) << ',' << r.trial
        << ',' << r.seed << ',' << format_double(r.sum_rate) << ','
        << r.iterations << ',' << format_double(r.runtime_s) << ','
        << r.status << '\n';
    }
  } else {
    f << "[";
    bool first = true;
    for (const ResultRow& r : rows) {
      f << (first ? "\n" : ",\n");
      first = false;
      f << "  {\"sweep_axis\": \"" << to_string(r.axis)
        << "\", \"sweep_value\": " << format_double(r.sweep_value)
        << ", \"scheme\": \"" << to_string(r.scheme) << "\", \"mode\": \""
        << to_string(r.mode) << "\", \"trial\": " << r.trial
        << ", \"seed\": " << r.seed
        << ", \"sum_rate_bps\": " << format_double(r.sum_rate)
        << ", \"iterations\": " << r.iterations
        << ", \"runtime_s\": " << format_double(r.runtime_s)
        << ", \"status\": \"" << detail::json_escape(r.status) << "\"}";
    }
    f << "\n]\n";
  }
  if (!f) throw std::runtime_error("emit: write failed for " + path);
}

// ---- Config file ----------------------------------------------------------
// Sectioned key = value text; '#' or ';' start comments. Sections group
// keys per module: [network], [optimizer], [sweep]. CLI flags override.

struct ConfigFile {
  std::map<std::string, std::string> entries;  // "section.key" -> value

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    return entries.at(key);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw std::invalid_argument("config: bad number for " + key);
  }
  if (pos != s.size())
    throw std::invalid_argument("config: trailing junk for " + key);
  return v;
}

inline int parse_int(const std::string& s, const std::string& key) {
  const double v = parse_double(s, key);
  if (v != static_cast<double>(static_cast<int>(v)))
    throw std::invalid_argument("config: expected integer for " + key);
  return static_cast<int>(v);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline ConfigFile load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  ConfigFile cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: malformed section at line " +
                                    std::to_string(lineno));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " +
                                  std::to_string(lineno));
    cfg.entries[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

inline ExperimentPlan plan_from_config(const ConfigFile& file) {
  ExperimentPlan plan;
  using detail::parse_double;
  using detail::parse_int;

  auto num = [&](const std::string& key, double& target) {
    if (file.has(key)) target = parse_double(file.get(key), key);
  };
  auto integer = [&](const std::string& key, int& target) {
    if (file.has(key)) target = parse_int(file.get(key), key);
  };

  integer("network.num_ues", plan.base.num_ues);
  integer("network.num_aps", plan.base.num_aps);
  integer("network.antennas_per_ap", plan.base.antennas_per_ap);
  num("network.tx_power", plan.base.tx_power);
  num("network.noise_power", plan.base.noise_power);
  if (file.has("network.snr_db"))
    plan.base.set_snr_db(parse_double(file.get("network.snr_db"), "snr_db"));
  num("network.fronthaul_capacity", plan.base.fronthaul_capacity);
  num("network.phase_ratio", plan.base.phase_ratio);
  num("network.cell_radius", plan.base.cell_radius);
  num("network.ref_distance", plan.base.ref_distance);
  num("network.ref_pathloss", plan.base.ref_pathloss);
  num("network.pathloss_exponent", plan.base.pathloss_exponent);
  num("network.csi_error_fraction", plan.base.csi_error_fraction);

  integer("optimizer.max_outer_iterations",
          plan.optimizer.max_outer_iterations);
  num("optimizer.convergence_threshold",
      plan.optimizer.convergence_threshold);
  num("optimizer.tol_feas", plan.optimizer.subproblem.tol_feas);
  num("optimizer.tol_kkt", plan.optimizer.subproblem.tol_kkt);
  integer("optimizer.newton_cap_per_stage",
          plan.optimizer.subproblem.newton_cap_per_stage);
  integer("optimizer.max_barrier_stages",
          plan.optimizer.subproblem.max_barrier_stages);

  if (file.has("sweep.axis"))
    plan.axis = axis_from_string(file.get("sweep.axis"));
  if (file.has("sweep.values")) {
    plan.values.clear();
    for (const auto& tok : detail::split_list(file.get("sweep.values")))
      plan.values.push_back(parse_double(tok, "sweep.values"));
  }
  if (file.has("sweep.schemes")) {
    plan.schemes.clear();
    for (const auto& tok : detail::split_list(file.get("sweep.schemes")))
      plan.schemes.push_back(scheme_from_string(tok));
  }
  if (file.has("sweep.modes")) {
    plan.modes.clear();
    for (const auto& tok : detail::split_list(file.get("sweep.modes")))
      plan.modes.push_back(mode_from_string(tok));
  }
  integer("sweep.trials", plan.num_trials);
  if (file.has("sweep.seed"))
    plan.base_seed = static_cast<std::uint64_t>(
        std::stoull(file.get("sweep.seed")));
  if (file.has("sweep.out")) plan.output_path = file.get("sweep.out");
  if (file.has("sweep.format"))
    plan.format = format_from_string(file.get("sweep.format"));
  integer("sweep.threads", plan.num_threads);
  if (file.has("sweep.timing"))
    plan.record_timing = file.get("sweep.timing") == "true" ||
                         file.get("sweep.timing") == "1";
  return plan;
}

}  // namespace stripesim
