// Copyright 2026 The eprb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPRB_PIPELINE_H
#define EPRB_PIPELINE_H

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eprb/error.h"
#include "eprb/event_sim.h"
#include "eprb/fitting.h"
#include "eprb/io.h"
#include "eprb/scan_series.h"

namespace eprb {

namespace fs = std::filesystem;

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitNotConverged = 2,
    kExitDataInconsistency = 3,
};

int exit_code_for(ErrorKind kind);

struct ObserverSettings {
    std::array<double, 4> efficiency{};
    /// Multiplies each profile by 1 + amplitude cos(2 pi bin / period).
    double subcycle_period_ns = 20.0;
    double subcycle_amplitude = 0.0;
    std::array<double, 4> delay_prompt_fraction{1.0, 1.0, 1.0, 1.0};
    std::array<double, 4> delay_tail_ns{};
    int64_t phase_ns = 0;
    double background_rate_hz = 0.0;
};

struct SimulateSettings {
    int experiments = 41;
    uint64_t seed = 1;
    double duration_ns = kDefaultDurationNs;
    double pairs_per_quadrant = 1.0e6;
    int cycle_ns = kCycleNs;
    int switch_time_ns = kSwitchTimeNs;
    bool periodic_settings = true;
    /// rho = visibility * singlet + (1 - visibility) * I/4.
    double visibility = 0.95;
    double offset_ns = 15.0;
    double clock_drift_ns_per_s = 0.0;
    double experiment_gap_s = kScanGapSeconds;
    double window_ns = kDefaultWindowNs;
    /// Defaults give about 200,000 Alice and 140,000 Bob detections in 5 s.
    ObserverSettings alice{{0.056, 0.052, 0.055, 0.053}};
    ObserverSettings bob{{0.039, 0.036, 0.038, 0.0365}};
};

struct TabulateSettings {
    double window_ns = kDefaultWindowNs;
    std::optional<double> delta_ns;
};

struct FitSettings {
    int model = 3;
    FitConfig config;
    /// Matcher half-width used when the counts file carries none.
    double window_ns = kDefaultWindowNs;
    /// Use window_ns for every row even when the counts file has windows.
    bool window_override = false;
    double duration_ns = kDefaultDurationNs;
    std::optional<std::string> cv_file;
};

struct PipelineConfig {
    SimulateSettings simulate;
    TabulateSettings tabulate;
    FitSettings fit;
    /// Canonical JSON of the resolved settings, hashed into manifests.
    Json resolved;
};

/// Parses {"simulate": {...}, "tabulate": {...}, "fit": {...}}; every
/// section and key is optional but unknown keys raise Config.
PipelineConfig parse_config(const Json &j);
PipelineConfig load_config(const std::optional<fs::path> &path);
Json resolved_config(const PipelineConfig &config);

/// The simulator configuration for experiment m of the scan.
SimConfig experiment_sim_config(const SimulateSettings &settings, int m);

struct SimulateReport {
    fs::path manifest;
    int experiments = 0;
};
/// Writes <id>_alice.csv, <id>_bob.csv, <id>_truth.json per experiment
/// and manifest.json.
SimulateReport cmd_simulate(const PipelineConfig &config, const fs::path &out_dir);

struct TabulateOverrides {
    std::optional<double> window_ns;
    std::optional<double> delta_ns;
};
/// Matches every experiment listed in <event_dir>/manifest.json and writes
/// the counts CSV. delta defaults to minus the simulated offset.
std::vector<CountRow> cmd_tabulate(const PipelineConfig &config, const fs::path &event_dir,
                                   const TabulateOverrides &overrides, const fs::path &out_path);

/// Builds the fit problem from a counts file. Theta comes from the
/// theta_over_pi column or the scan table; windows are matcher half-widths
/// converted to acceptance widths.
FitProblem fit_problem_from_counts(const std::vector<CountRow> &rows, const FitSettings &settings);

struct FitCommandResult {
    FitResult result;
    FitProblem problem;
    int exit_code = kExitOk;
};
/// Writes the FitResult JSON to out_path and residuals next to it
/// (<stem>_residuals.csv).
FitCommandResult cmd_fit(const PipelineConfig &config, const fs::path &counts_path, const fs::path &out_path);

/// Writes model<N>_panels.csv per model and summary.csv ordered by Z.
void cmd_report(const std::vector<fs::path> &fit_paths, const fs::path &out_dir);

}  // namespace eprb

#endif
