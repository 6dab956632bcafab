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

#ifndef EPRB_IO_H
#define EPRB_IO_H

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "eprb/count_model.h"
#include "eprb/event_sim.h"
#include "eprb/fitting.h"
#include "eprb/quantum.h"

namespace eprb {

using Json = nlohmann::ordered_json;

/// Shortest decimal text with at most `digits` significant digits.
std::string format_number(double value, int digits = 17);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);
std::string read_file(const std::filesystem::path &path);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string &data);

// Event logs: header time_ns,setting,result.
std::string event_log_csv(const EventLog &log);
EventLog parse_event_log_csv(const std::string &text);

/// One counts CSV row: experiment_id, a_00..a_11, b_00..b_11,
/// c_0000..c_1111, then optional metadata columns theta_over_pi,
/// window_ns, delta_ns, duration_ns.
struct CountRow {
    CountTable table;
    std::optional<double> theta_over_pi;
    std::optional<double> window_ns;
    std::optional<double> delta_ns;
    std::optional<double> duration_ns;
};

std::string counts_csv(const std::vector<CountRow> &rows);
/// Throws InvalidInput on unknown or missing columns, non-numeric or
/// negative counts, or ragged rows.
std::vector<CountRow> parse_counts_csv(const std::string &text);

/// 4 x 4 array of [re, im] pairs.
Json density_to_json(const DensityMatrix &rho);
DensityMatrix density_from_json(const Json &j);

Json ground_truth_to_json(const SimGroundTruth &truth);

/// Coefficients of variation for model 4: {"cva": [4], "cvb": [4], "cvc": [16]}.
struct CoefficientsOfVariation {
    std::vector<double> cva;
    std::vector<double> cvb;
    std::vector<double> cvc;
};
CoefficientsOfVariation cv_from_json(const Json &j);

/// Fit output with per-channel observed, predicted and variance values.
/// Floating values are rounded to 6 significant digits.
Json fit_result_to_json(const FitResult &result, const FitProblem &problem);
/// experiment_id,channel,observed,predicted,std_error,contribution.
std::string residuals_csv(const FitResult &result, const FitProblem &problem);

}  // namespace eprb

#endif
