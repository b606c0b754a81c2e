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

// Sweep driver CLI. A config file seeds the plan; flags override it.
// Exit codes: 0 all rows converged, 2 at least one row did not, 1 usage or
// runtime error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stripesim/harness.hpp"
#include "stripesim/metrics.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  return stripesim::detail::split_list(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cell-free MIMO downlink sweep driver (serial fronthaul)"};

  std::string config_path, axis_str, values_str, schemes_str, modes_str;
  std::string out_path, format_str;
  int trials = -1;
  long long seed = -1;
  int threads = -1;
  int schedule_aps = 0;
  bool verbose = false;
  bool timing = false;

  app.add_option("--config", config_path, "plan config file (sectioned key = value)");
  app.add_option("--axis", axis_str,
                 "sweep axis: snr_db | num_aps | fronthaul_capacity | csi_error_fraction");
  app.add_option("--values", values_str, "comma-separated sweep values");
  app.add_option("--schemes", schemes_str, "comma-separated schemes: WZ,P2P");
  app.add_option("--modes", modes_str,
                 "comma-separated robustness modes: robust,non_robust");
  app.add_option("--trials", trials, "Monte Carlo trials per sweep value");
  app.add_option("--seed", seed, "base RNG seed");
  app.add_option("--out", out_path, "output file path");
  app.add_option("--format", format_str, "output format: csv | json");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_flag("--timing", timing,
               "record wall-clock runtimes (makes output run-dependent)");
  app.add_flag("--verbose", verbose, "print one line per result row");
  app.add_option("--print-schedule", schedule_aps,
                 "print the serial fronthaul transfer schedule for L APs and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (schedule_aps > 0) {
      for (int t = 1; t <= schedule_aps; ++t) {
        std::printf("slot %d:", t);
        for (const auto& [block, link] :
             stripesim::fronthaul_schedule(schedule_aps, t))
          std::printf(" B%d->F%d", block, link);
        std::printf("\n");
      }
      return 0;
    }

    stripesim::ExperimentPlan plan;
    if (!config_path.empty())
      plan = stripesim::plan_from_config(
          stripesim::load_config_file(config_path));

    if (!axis_str.empty()) plan.axis = stripesim::axis_from_string(axis_str);
    if (!values_str.empty()) {
      plan.values.clear();
      for (const auto& tok : split_csv(values_str))
        plan.values.push_back(
            stripesim::detail::parse_double(tok, "--values"));
    }
    if (!schemes_str.empty()) {
      plan.schemes.clear();
      for (const auto& tok : split_csv(schemes_str))
        plan.schemes.push_back(stripesim::scheme_from_string(tok));
    }
    if (!modes_str.empty()) {
      plan.modes.clear();
      for (const auto& tok : split_csv(modes_str))
        plan.modes.push_back(stripesim::mode_from_string(tok));
    }
    if (trials >= 0) plan.num_trials = trials;
    if (seed >= 0) plan.base_seed = static_cast<std::uint64_t>(seed);
    if (!out_path.empty()) plan.output_path = out_path;
    if (!format_str.empty())
      plan.format = stripesim::format_from_string(format_str);
    if (threads >= 0) plan.num_threads = threads;
    if (timing) plan.record_timing = true;

    if (plan.values.empty()) {
      std::cerr << "no sweep values given (use --values or a config file)\n";
      return 1;
    }

    const stripesim::PlanResult result = stripesim::run_plan(plan);

    if (verbose)
      for (const auto& r : result.rows)
        std::printf("%s=%s %s %s trial %d sum_rate %.6f iters %d %s\n",
                    stripesim::to_string(r.axis).c_str(),
                    stripesim::format_double(r.sweep_value).c_str(),
                    stripesim::to_string(r.scheme).c_str(),
                    stripesim::to_string(r.mode).c_str(), r.trial, r.sum_rate,
                    r.iterations, r.status.c_str());

    std::printf("%-22s %-5s %-11s %s\n", "sweep_value", "sch", "mode",
                "mean_sum_rate");
    for (const auto& a : result.aggregates)
      std::printf("%-22s %-5s %-11s %s\n",
                  stripesim::format_double(a.sweep_value).c_str(),
                  stripesim::to_string(a.scheme).c_str(),
                  stripesim::to_string(a.mode).c_str(),
                  stripesim::format_double(a.mean_sum_rate).c_str());

    if (!plan.output_path.empty()) {
      stripesim::emit(result.rows, plan.format, plan.output_path);
      std::printf("wrote %zu rows to %s\n", result.rows.size(),
                  plan.output_path.c_str());
    }

    for (const auto& r : result.rows)
      if (r.status != "converged") return 2;
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
