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

#include "eprb/scan_series.h"

#include <numbers>

namespace eprb {

double ScanExperiment::theta() const {
    return theta_over_pi * std::numbers::pi;
}

const std::vector<ScanExperiment> &scan_series() {
    // Bias angles in units of pi, as tabulated (137 and 139 share 0.35).
    static const std::vector<ScanExperiment> series = {
        {"scanblue110", -1.00},
        {"scanblue111", -0.95},
        {"scanblue112", -0.90},
        {"scanblue113", -0.85},
        {"scanblue114", -0.80},
        {"scanblue115", -0.75},
        {"scanblue116", -0.70},
        {"scanblue117", -0.65},
        {"scanblue118", -0.60},
        {"scanblue119", -0.55},
        {"scanblue120", -0.50},
        {"scanblue121", -0.45},
        {"scanblue122", -0.40},
        {"scanblue123", -0.35},
        {"scanblue124", -0.30},
        {"scanblue125", -0.25},
        {"scanblue126", -0.20},
        {"scanblue127", -0.15},
        {"scanblue128", -0.10},
        {"scanblue129", -0.05},
        {"scanblue130", 0.00},
        {"scanblue131", 0.05},
        {"scanblue132", 0.10},
        {"scanblue133", 0.15},
        {"scanblue134", 0.20},
        {"scanblue135", 0.25},
        {"scanblue136", 0.30},
        {"scanblue137", 0.35},
        {"scanblue139", 0.35},
        {"scanblue140", 0.40},
        {"scanblue141", 0.45},
        {"scanblue142", 0.50},
        {"scanblue143", 0.55},
        {"scanblue144", 0.60},
        {"scanblue145", 0.65},
        {"scanblue146", 0.70},
        {"scanblue147", 0.75},
        {"scanblue148", 0.80},
        {"scanblue149", 0.85},
        {"scanblue150", 0.90},
        {"scanblue151", 0.95},
    };
    return series;
}

std::optional<double> scan_theta(const std::string &id) {
    for (const ScanExperiment &e : scan_series()) {
        if (e.id == id) {
            return e.theta();
        }
    }
    return std::nullopt;
}

}  // namespace eprb
