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

#include "eprb/optimizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eprb/error.h"

namespace eprb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Counts evaluations and keeps the running best for the trace.
class Tracker {
   public:
    explicit Tracker(const ObjectiveFn &f) : f_(f) {
    }

    double operator()(std::span<const double> x) {
        double v = f_(x);
        if (!std::isfinite(v)) {
            v = kInf;
        }
        ++evaluations_;
        if (v < best_) {
            best_ = v;
            trace_.push_back({evaluations_, v});
        }
        return v;
    }

    int64_t evaluations() const {
        return evaluations_;
    }
    std::vector<TracePoint> take_trace() {
        return std::move(trace_);
    }

   private:
    const ObjectiveFn &f_;
    int64_t evaluations_ = 0;
    double best_ = kInf;
    std::vector<TracePoint> trace_;
};

void check_inputs(const std::vector<double> &start, std::span<const double> steps) {
    if (start.empty()) {
        fail(ErrorKind::InvalidInput, "cannot minimize over zero variables");
    }
    if (steps.size() != start.size()) {
        fail(ErrorKind::InvalidInput, "step vector length does not match the start point");
    }
}

}  // namespace

MinimizeResult nelder_mead(const ObjectiveFn &f, std::vector<double> start, std::span<const double> steps,
                           const MinimizeOptions &options) {
    check_inputs(start, steps);
    const size_t n = start.size();
    const double nd = static_cast<double>(n);
    const double reflect = 1.0;
    const double expand = 1.0 + 2.0 / nd;
    const double contract = 0.75 - 0.5 / nd;
    const double shrink = n > 1 ? 1.0 - 1.0 / nd : 0.5;

    Tracker eval(f);
    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    for (size_t d = 0; d < n; ++d) {
        pts[d + 1][d] += steps[d];
    }
    for (size_t v = 0; v <= n; ++v) {
        vals[v] = eval(pts[v]);
    }

    std::vector<size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    std::vector<double> best_history;
    MinimizeResult result;
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return vals[a] < vals[b]; });
    };
    auto along = [&](std::vector<double> &out, const std::vector<double> &from, const std::vector<double> &to,
                     double t) {
        for (size_t d = 0; d < n; ++d) {
            out[d] = from[d] + t * (to[d] - from[d]);
        }
    };

    while (true) {
        sort_simplex();
        const size_t best = order.front();
        const size_t worst = order.back();
        const size_t second_worst = order[n - 1];
        best_history.push_back(vals[best]);
        size_t it = best_history.size() - 1;
        if (static_cast<int>(it) >= options.stall_iterations &&
            best_history[it - options.stall_iterations] - vals[best] < options.tolerance) {
            result.converged = true;
            break;
        }
        if (vals[worst] - vals[best] == 0.0 && std::isfinite(vals[best])) {
            // Flat simplex: nothing left to learn from it.
            double spread = 0.0;
            for (size_t v = 0; v <= n; ++v) {
                for (size_t d = 0; d < n; ++d) {
                    spread = std::max(spread, std::abs(pts[v][d] - pts[best][d]));
                }
            }
            if (spread < 1e-14) {
                result.converged = true;
                break;
            }
        }
        if (eval.evaluations() >= options.max_evaluations) {
            break;
        }
        ++result.iterations;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (size_t v = 0; v < n; ++v) {
            const auto &p = pts[order[v]];
            for (size_t d = 0; d < n; ++d) {
                centroid[d] += p[d];
            }
        }
        for (double &c : centroid) {
            c /= nd;
        }

        along(trial, centroid, pts[worst], -reflect);
        double f_reflect = eval(trial);
        if (f_reflect < vals[best]) {
            along(trial2, centroid, trial, expand);
            double f_expand = eval(trial2);
            if (f_expand < f_reflect) {
                pts[worst] = trial2;
                vals[worst] = f_expand;
            } else {
                pts[worst] = trial;
                vals[worst] = f_reflect;
            }
            continue;
        }
        if (f_reflect < vals[second_worst]) {
            pts[worst] = trial;
            vals[worst] = f_reflect;
            continue;
        }
        bool accepted = false;
        if (f_reflect < vals[worst]) {
            along(trial2, centroid, trial, contract);
            double f_out = eval(trial2);
            if (f_out <= f_reflect) {
                pts[worst] = trial2;
                vals[worst] = f_out;
                accepted = true;
            }
        } else {
            along(trial2, centroid, pts[worst], contract);
            double f_in = eval(trial2);
            if (f_in < vals[worst]) {
                pts[worst] = trial2;
                vals[worst] = f_in;
                accepted = true;
            }
        }
        if (!accepted) {
            const auto anchor = pts[best];
            for (size_t v = 0; v <= n; ++v) {
                if (v == best) {
                    continue;
                }
                along(pts[v], anchor, pts[v], shrink);
                vals[v] = eval(pts[v]);
            }
        }
    }

    sort_simplex();
    result.x = pts[order.front()];
    result.value = vals[order.front()];
    result.evaluations = eval.evaluations();
    result.trace = eval.take_trace();
    return result;
}

MinimizeResult coordinate_polish(const ObjectiveFn &f, std::vector<double> start, std::span<const double> steps,
                                 const MinimizeOptions &options) {
    check_inputs(start, steps);
    const size_t n = start.size();
    Tracker eval(f);
    std::vector<double> x = std::move(start);
    std::vector<double> h(steps.begin(), steps.end());
    double fx = eval(x);
    MinimizeResult result;
    std::vector<double> probe;

    while (eval.evaluations() < options.max_evaluations) {
        ++result.iterations;
        const double sweep_start = fx;
        for (size_t d = 0; d < n && eval.evaluations() < options.max_evaluations; ++d) {
            const double x0 = x[d];
            probe = x;
            probe[d] = x0 + h[d];
            double f_plus = eval(probe);
            probe[d] = x0 - h[d];
            double f_minus = eval(probe);

            double best_x = x0;
            double best_f = fx;
            if (f_plus < best_f) {
                best_x = x0 + h[d];
                best_f = f_plus;
            }
            if (f_minus < best_f) {
                best_x = x0 - h[d];
                best_f = f_minus;
            }
            double curvature = f_plus - 2.0 * fx + f_minus;
            if (curvature > 0.0 && std::isfinite(curvature)) {
                double t = 0.5 * h[d] * (f_minus - f_plus) / curvature;
                t = std::clamp(t, -4.0 * h[d], 4.0 * h[d]);
                if (t != 0.0 && t != h[d] && t != -h[d]) {
                    probe[d] = x0 + t;
                    double f_vertex = eval(probe);
                    if (f_vertex < best_f) {
                        best_x = x0 + t;
                        best_f = f_vertex;
                    }
                }
            }
            if (best_f < fx) {
                double moved = std::abs(best_x - x0);
                x[d] = best_x;
                fx = best_f;
                h[d] = std::max(moved, 0.5 * h[d]) * 1.5;
            } else {
                h[d] = std::max(h[d] * 0.25, 1e-12);
            }
        }
        // A quiet sweep only counts once the steps are fine enough that
        // the quiet is not an artifact of overshooting.
        if (sweep_start - fx < options.tolerance && *std::max_element(h.begin(), h.end()) < 1e-6) {
            result.converged = true;
            break;
        }
    }
    result.x = std::move(x);
    result.value = fx;
    result.evaluations = eval.evaluations();
    result.trace = eval.take_trace();
    return result;
}

}  // namespace eprb
