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

#include "eprb/fitting.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "eprb/error.h"
#include "eprb/seeding.h"

namespace eprb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// exp() arguments are clamped here so decoded rates stay finite.
constexpr double kMaxLog = 700.0;

// Typical magnitudes used when the counts are too sparse for moments.
constexpr double kTypicalPa = 0.05;
constexpr double kTypicalPb = 0.036;

double logistic(double u) {
    return 1.0 / (1.0 + std::exp(-u));
}

double logit(double p) {
    return std::log(p / (1.0 - p));
}

double bounded_exp(double u) {
    return std::exp(std::clamp(u, -kMaxLog, kMaxLog));
}

int filter_size(ModelId model) {
    switch (model) {
        case ModelId::One:
            return 1 + 4;
        case ModelId::Two:
            return 1 + 8;
        case ModelId::Three:
        case ModelId::Four:
            return 24;
    }
    return 0;
}

double window_for(const FitProblem &problem, size_t m) {
    return problem.window_ns.empty() ? kDefaultWindowNs : problem.window_ns[m];
}

// Filter parameters from the tail of an optimizer vector.
FilterParams decode_filter(const FitProblem &problem, std::span<const double> f) {
    FilterParams p;
    p.model = problem.model;
    p.duration_ns = problem.duration_ns;
    p.window_ns = window_for(problem, 0);
    switch (problem.model) {
        case ModelId::One:
        case ModelId::Two: {
            size_t n = problem.model == ModelId::One ? 2 : 4;
            p.pairs = bounded_exp(f[0]);
            for (size_t s = 0; s < n; ++s) {
                p.pa.push_back(logistic(f[1 + s]));
            }
            for (size_t s = 0; s < n; ++s) {
                p.pb.push_back(logistic(f[1 + n + s]));
            }
            break;
        }
        case ModelId::Three:
        case ModelId::Four: {
            for (int s = 0; s < 4; ++s) {
                p.pa.push_back(bounded_exp(f[s]));
                p.pb.push_back(bounded_exp(f[4 + s]));
            }
            for (int c = 0; c < 16; ++c) {
                p.pc.push_back(bounded_exp(f[8 + c]));
            }
            if (problem.model == ModelId::Four) {
                p.cva = problem.cva;
                p.cvb = problem.cvb;
                p.cvc = problem.cvc;
            }
            break;
        }
    }
    return p;
}

struct Moments24 {
    std::array<double, 4> a{};
    std::array<double, 4> b{};
    std::array<double, 16> c{};
};

Moments24 mean_counts(const FitProblem &problem) {
    Moments24 out;
    const double inv = 1.0 / static_cast<double>(problem.observed.size());
    for (const CountTable &t : problem.observed) {
        for (int s = 0; s < 4; ++s) {
            out.a[s] += t.a[s] * inv;
            out.b[s] += t.b[s] * inv;
        }
        for (int c = 0; c < 16; ++c) {
            out.c[c] += t.c[c] * inv;
        }
    }
    return out;
}

// Pairs per quadrant from singles and quadrant coincidence totals:
// N pa_i * N pb_k / (N pa_i pb_k), geometric mean over quadrants.
double moment_pairs(const Moments24 &mc) {
    double log_sum = 0.0;
    int used = 0;
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < 2; ++k) {
            double na = 0.5 * (mc.a[single_index(i, 0)] + mc.a[single_index(i, 1)]);
            double nb = 0.5 * (mc.b[single_index(k, 0)] + mc.b[single_index(k, 1)]);
            double quad = 0.0;
            for (int j = 0; j < 2; ++j) {
                for (int l = 0; l < 2; ++l) {
                    quad += mc.c[coincidence_index(i, j, k, l)];
                }
            }
            if (na > 0.0 && nb > 0.0 && quad > 0.0) {
                log_sum += std::log(na * nb / quad);
                ++used;
            }
        }
    }
    return used > 0 ? std::exp(log_sum / used) : 0.0;
}

double clamp_probability(double p, double fallback) {
    if (!(p > 0.0) || !std::isfinite(p)) {
        return fallback;
    }
    return std::min(p, 0.999);
}

std::vector<double> initial_filter(const FitProblem &problem, const Matrix4c &rho) {
    Moments24 mc = mean_counts(problem);
    std::vector<double> f;
    switch (problem.model) {
        case ModelId::One:
        case ModelId::Two: {
            double n = moment_pairs(mc);
            double singles_a = (mc.a[0] + mc.a[1] + mc.a[2] + mc.a[3]) / 4.0;
            if (!(n > 0.0) || !std::isfinite(n)) {
                n = singles_a > 0.0 ? singles_a / kTypicalPa : 1e6;
            }
            f.push_back(std::log(n));
            if (problem.model == ModelId::One) {
                for (int i = 0; i < 2; ++i) {
                    double na = 0.5 * (mc.a[single_index(i, 0)] + mc.a[single_index(i, 1)]);
                    f.push_back(logit(clamp_probability(na / n, kTypicalPa)));
                }
                for (int k = 0; k < 2; ++k) {
                    double nb = 0.5 * (mc.b[single_index(k, 0)] + mc.b[single_index(k, 1)]);
                    f.push_back(logit(clamp_probability(nb / n, kTypicalPb)));
                }
            } else {
                for (int s = 0; s < 4; ++s) {
                    f.push_back(logit(clamp_probability(mc.a[s] / n, kTypicalPa)));
                }
                for (int s = 0; s < 4; ++s) {
                    f.push_back(logit(clamp_probability(mc.b[s] / n, kTypicalPb)));
                }
            }
            break;
        }
        case ModelId::Three:
        case ModelId::Four: {
            for (int s = 0; s < 4; ++s) {
                f.push_back(std::log(std::max(mc.a[s], 1e-3)));
            }
            for (int s = 0; s < 4; ++s) {
                f.push_back(std::log(std::max(mc.b[s], 1e-3)));
            }
            // N pc from coincidences net of the expected accidentals,
            // divided by the starting state's average joint probability.
            std::array<double, 16> qc_sum{};
            for (size_t m = 0; m < problem.theta.size(); ++m) {
                QuantumProbs q = TraceRuleEvaluator(geometry_for_experiment(problem.theta[m])).evaluate(rho);
                for (int c = 0; c < 16; ++c) {
                    qc_sum[c] += q.qc[c] / static_cast<double>(problem.theta.size());
                }
            }
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    for (int k = 0; k < 2; ++k) {
                        for (int l = 0; l < 2; ++l) {
                            int c = coincidence_index(i, j, k, l);
                            double accidental = false_positive_term(mc.a[single_index(i, j)],
                                                                    mc.b[single_index(k, l)],
                                                                    window_for(problem, 0), problem.duration_ns);
                            double net = std::max(mc.c[c] - accidental, 0.0);
                            double v = qc_sum[c] > 0.05 ? net / qc_sum[c] : 2.0 * net;
                            f.push_back(std::log(std::max(v, 1e-3)));
                        }
                    }
                }
            }
            break;
        }
    }
    return f;
}

std::vector<double> make_steps(const ParameterLayout &layout, double scale) {
    std::vector<double> steps(layout.raw_size(), 0.1 * scale);
    std::fill(steps.begin(), steps.begin() + layout.density_size, 0.05 * scale);
    return steps;
}

void append_trace(std::vector<TracePoint> &into, const std::vector<TracePoint> &stage, int64_t offset) {
    for (const TracePoint &p : stage) {
        if (into.empty() || p.value < into.back().value) {
            into.push_back({p.evaluation + offset, p.value});
        }
    }
}

struct RestartOutcome {
    std::vector<double> x;
    double value = kInf;
    int64_t evaluations = 0;
    bool converged = false;
    std::vector<TracePoint> trace;
};

RestartOutcome run_restart(const ObjectiveFn &f, const ParameterLayout &layout, std::vector<double> start,
                           const FitConfig &config) {
    RestartOutcome out;
    MinimizeOptions nm_options{config.max_evaluations, config.tolerance, config.stall_iterations};
    std::vector<double> steps = make_steps(layout, 1.0);

    // Simplex search, restarted from its own best point with a fresh
    // simplex until a restart stops paying off.
    MinimizeResult stage = nelder_mead(f, std::move(start), steps, nm_options);
    append_trace(out.trace, stage.trace, 0);
    out.evaluations = stage.evaluations;
    bool simplex_converged = stage.converged;
    while (out.evaluations < config.max_evaluations) {
        MinimizeOptions again = nm_options;
        again.max_evaluations = config.max_evaluations - out.evaluations;
        MinimizeResult next = nelder_mead(f, stage.x, steps, again);
        append_trace(out.trace, next.trace, out.evaluations);
        out.evaluations += next.evaluations;
        bool improved = stage.value - next.value >= config.tolerance;
        simplex_converged = next.converged;
        if (next.value < stage.value) {
            stage = std::move(next);
        }
        if (!improved) {
            break;
        }
    }

    MinimizeOptions polish_options{config.polish_evaluations, config.tolerance, config.stall_iterations};
    MinimizeResult polished = coordinate_polish(f, stage.x, make_steps(layout, 0.1), polish_options);
    append_trace(out.trace, polished.trace, out.evaluations);
    out.evaluations += polished.evaluations;
    if (polished.value <= stage.value) {
        out.x = std::move(polished.x);
        out.value = polished.value;
    } else {
        out.x = std::move(stage.x);
        out.value = stage.value;
    }
    out.converged = simplex_converged;
    return out;
}

FitResult finish(const FitProblem &problem, const ChiSquareObjective &objective, RestartOutcome best,
                 std::vector<RestartSummary> summaries) {
    FitResult result;
    result.model = problem.model;
    DecodedParameters decoded = decode_parameters(problem, best.x);
    result.rho = fix_unobserved_components(decoded.rho);
    result.params = decoded.filter;
    result.predictions = objective.predictions(result.rho, result.params);
    result.statistics = fit_statistics(problem.model, problem.observed, result.predictions);
    result.best_vector = std::move(best.x);
    result.trace = std::move(best.trace);
    result.restarts = std::move(summaries);
    result.converged = best.converged;
    for (const RestartSummary &s : result.restarts) {
        result.evaluations += s.evaluations;
    }
    return result;
}

}  // namespace

void validate(const FitProblem &problem) {
    if (problem.observed.empty()) {
        fail(ErrorKind::InvalidInput, "a fit needs at least one experiment");
    }
    if (problem.theta.size() != problem.observed.size()) {
        fail(ErrorKind::InvalidInput, "one bias angle is required per experiment");
    }
    if (!problem.window_ns.empty() && problem.window_ns.size() != problem.observed.size()) {
        fail(ErrorKind::InvalidInput, "window widths must be given for every experiment or none");
    }
    for (double w : problem.window_ns) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            fail(ErrorKind::InvalidInput, "window widths must be non-negative");
        }
    }
    if (!(problem.duration_ns > 0.0)) {
        fail(ErrorKind::InvalidInput, "experiment duration must be positive");
    }
    if (problem.config.restarts < 1) {
        fail(ErrorKind::InvalidInput, "at least one restart is required");
    }
    if (problem.config.max_evaluations < 1 || problem.config.polish_evaluations < 0) {
        fail(ErrorKind::InvalidInput, "evaluation budgets must be positive");
    }
    if (problem.model == ModelId::Four) {
        if (problem.cva.size() != 4 || problem.cvb.size() != 4 || problem.cvc.size() != 16) {
            fail(ErrorKind::InvalidInput, "model 4 needs coefficients of variation cva[4], cvb[4], cvc[16]");
        }
        for (const auto *v : {&problem.cva, &problem.cvb, &problem.cvc}) {
            for (double cv : *v) {
                if (!(cv >= 0.0)) {
                    fail(ErrorKind::InvalidInput, "coefficients of variation must be non-negative");
                }
            }
        }
    }
    for (const CountTable &t : problem.observed) {
        unpaired_singles(t);
    }
    degrees_of_freedom(problem.model, static_cast<int>(problem.observed.size()) * kChannelsPerExperiment);
}

ParameterLayout pack_parameters(ModelId model) {
    ParameterLayout layout;
    layout.model = model;
    layout.filter_size = filter_size(model);
    return layout;
}

DecodedParameters decode_parameters(const FitProblem &problem, std::span<const double> x) {
    ParameterLayout layout = pack_parameters(problem.model);
    if (static_cast<int>(x.size()) != layout.raw_size()) {
        fail(ErrorKind::InvalidInput, "parameter vector does not match the model layout");
    }
    DensityParams dp;
    std::copy_n(x.begin(), 16, dp.begin());
    return {decode_density(dp), decode_filter(problem, x.subspan(16))};
}

std::vector<double> encode_parameters(const DensityMatrix &rho, const FilterParams &filter) {
    validate(filter);
    DensityParams dp = encode_density(rho);
    std::vector<double> x(dp.begin(), dp.end());
    switch (filter.model) {
        case ModelId::One:
        case ModelId::Two:
            x.push_back(std::log(filter.pairs));
            for (double p : filter.pa) {
                x.push_back(logit(p));
            }
            for (double p : filter.pb) {
                x.push_back(logit(p));
            }
            break;
        case ModelId::Three:
        case ModelId::Four:
            for (const auto *v : {&filter.pa, &filter.pb, &filter.pc}) {
                for (double p : *v) {
                    x.push_back(std::log(p));
                }
            }
            break;
    }
    return x;
}

ChiSquareObjective::ChiSquareObjective(const FitProblem &problem, bool use_variances)
    : problem_(problem), layout_(pack_parameters(problem.model)), use_variances_(use_variances) {
    validate(problem);
    evaluators_.reserve(problem.theta.size());
    for (double theta : problem.theta) {
        evaluators_.emplace_back(geometry_for_experiment(theta));
    }
}

std::vector<Prediction> ChiSquareObjective::predictions(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != layout_.raw_size()) {
        fail(ErrorKind::InvalidInput, "parameter vector does not match the model layout");
    }
    DensityParams dp;
    std::copy_n(x.begin(), 16, dp.begin());
    return predictions(decode_density(dp), decode_filter(problem_, x.subspan(16)));
}

std::vector<Prediction> ChiSquareObjective::predictions(const DensityMatrix &rho, FilterParams filter) const {
    std::vector<Prediction> out;
    out.reserve(evaluators_.size());
    for (size_t m = 0; m < evaluators_.size(); ++m) {
        filter.window_ns = window_for(problem_, m);
        out.push_back(predict(filter, evaluators_[m].evaluate(rho.matrix())));
    }
    return out;
}

double ChiSquareObjective::operator()(std::span<const double> x) const {
    DensityParams dp;
    std::copy_n(x.begin(), 16, dp.begin());
    Matrix4c factor = density_factor(dp);
    if (!(factor.squaredNorm() > 0.0) || !factor.allFinite()) {
        return kInf;
    }
    std::vector<Prediction> preds = predictions(x);
    std::vector<double> terms =
        chi_square_contributions(problem_.observed, preds, use_variances_, DenominatorPolicy::Clamp);
    double total = 0.0;
    for (double t : terms) {
        total += t;
    }
    return std::isfinite(total) ? total : kInf;
}

double objective(const FitProblem &problem, std::span<const double> x) {
    return ChiSquareObjective(problem, problem.model == ModelId::Four)(x);
}

std::vector<double> initial_parameters(const FitProblem &problem, uint64_t seed, double density_noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    DensityParams dp = encode_density(singlet_state());
    for (double &v : dp) {
        v += density_noise * noise(rng);
    }
    Matrix4c rho = decode_density(dp).matrix();
    std::vector<double> x(dp.begin(), dp.end());
    std::vector<double> f = initial_filter(problem, rho);
    x.insert(x.end(), f.begin(), f.end());
    return x;
}

FitResult fit(const FitProblem &problem) {
    validate(problem);
    const FitConfig &config = problem.config;

    if (problem.model == ModelId::Four && !config.refit_means) {
        FitProblem means = problem;
        means.model = ModelId::Three;
        FitResult base = fit(means);
        ChiSquareObjective objective(problem, true);
        RestartOutcome best;
        best.x = base.best_vector;
        best.trace = base.trace;
        best.converged = base.converged;
        best.value = objective(best.x);
        return finish(problem, objective, std::move(best), base.restarts);
    }

    ChiSquareObjective objective(problem, problem.model == ModelId::Four);
    ObjectiveFn f = [&objective](std::span<const double> x) { return objective(x); };
    const ParameterLayout &layout = objective.layout();

    std::vector<RestartSummary> summaries;
    RestartOutcome best;
    for (int r = 0; r < config.restarts; ++r) {
        uint64_t seed = derive_seed(config.seed, "restart", static_cast<uint64_t>(r));
        // The first restart starts next to the singlet; later ones are
        // spread wider so the restarts explore distinct basins.
        std::vector<double> start = initial_parameters(problem, seed, r == 0 ? 1e-3 : 0.1);
        if (r > 0) {
            std::mt19937_64 rng(derive_seed(seed, "filter-jitter"));
            std::normal_distribution<double> jitter(0.0, 0.05);
            for (int i = layout.density_size; i < layout.raw_size(); ++i) {
                start[i] += jitter(rng);
            }
        }
        RestartOutcome outcome = run_restart(f, layout, std::move(start), config);
        summaries.push_back({seed, outcome.value, outcome.evaluations, outcome.converged});
        if (outcome.value < best.value) {
            best = std::move(outcome);
        }
    }
    if (!std::isfinite(best.value)) {
        std::ostringstream out;
        out << "optimizer diverged: no restart reached a finite objective (trace length " << best.trace.size()
            << ")";
        fail(ErrorKind::Internal, out.str());
    }
    return finish(problem, objective, std::move(best), std::move(summaries));
}

}  // namespace eprb
