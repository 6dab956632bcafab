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

#ifndef EPRB_OPTIMIZER_H
#define EPRB_OPTIMIZER_H

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace eprb {

using ObjectiveFn = std::function<double(std::span<const double>)>;

struct TracePoint {
    int64_t evaluation;
    double value;
};

struct MinimizeOptions {
    int64_t max_evaluations = 100000;
    /// Converged once the best value improves by less than this over
    /// stall_iterations consecutive iterations.
    double tolerance = 1e-6;
    int stall_iterations = 50;
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int64_t evaluations = 0;
    int64_t iterations = 0;
    bool converged = false;
    /// Best value each time it strictly improved; non-increasing.
    std::vector<TracePoint> trace;
};

/// Nelder-Mead simplex search with dimension-adaptive coefficients
/// (reflection 1, expansion 1 + 2/n, contraction 3/4 - 1/(2n),
/// shrink 1 - 1/n). The initial simplex is start plus steps[d] along each
/// axis. Non-finite objective values are treated as +infinity.
MinimizeResult nelder_mead(const ObjectiveFn &f, std::vector<double> start, std::span<const double> steps,
                           const MinimizeOptions &options);

/// Cyclic coordinate search: along each axis fit a parabola through three
/// points and jump to its vertex when that improves; per-axis steps grow
/// after success and shrink after failure. Stops when a full sweep
/// improves by less than the tolerance or the budget runs out.
MinimizeResult coordinate_polish(const ObjectiveFn &f, std::vector<double> start, std::span<const double> steps,
                                 const MinimizeOptions &options);

}  // namespace eprb

#endif
