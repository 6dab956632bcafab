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

#ifndef EPRB_SCAN_SERIES_H
#define EPRB_SCAN_SERIES_H

#include <optional>
#include <string>
#include <vector>

namespace eprb {

struct ScanExperiment {
    std::string id;
    double theta_over_pi;
    double theta() const;
};

/// The 41 experiments scanblue110 .. scanblue151 (scanblue138 omitted as a
/// duplicate of scanblue137) with Alice's bias angles.
const std::vector<ScanExperiment> &scan_series();

/// Bias angle in radians for a scan id, if it is one of the 41.
std::optional<double> scan_theta(const std::string &id);

/// Seconds between consecutive experiments, from 460 s over 40 gaps.
inline constexpr double kScanGapSeconds = 460.0 / 40.0;

}  // namespace eprb

#endif
