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

#ifndef EPRB_FITTING_H
#define EPRB_FITTING_H

#include <cstdint>
#include <span>
#include <vector>

#include "eprb/count_model.h"
#include "eprb/optimizer.h"
#include "eprb/quantum.h"
#include "eprb/statistics.h"

namespace eprb {

struct FitConfig {
    int restarts = 5;
    uint64_t seed = 1;
    /// Budget for the simplex stage of each restart.
    int64_t max_evaluations = 100000;
    double tolerance = 1e-6;
    int stall_iterations = 50;
    /// Budget for the coordinate polish of each restart.
    int64_t polish_evaluations = 20000;
    /// Model 4 only: re-optimize the means under Xrev instead of reusing
    /// the model 3 optimum.
    bool refit_means = false;
};

/// One simultaneous fit over all experiments.
struct FitProblem {
    ModelId model = ModelId::One;
    std::vector<CountTable> observed;
    /// Alice's bias angle per experiment, radians.
    std::vector<double> theta;
    /// Coincidence-window width per experiment for the false-positive term
    /// (models 3 and 4). Empty means kDefaultWindowNs everywhere.
    std::vector<double> window_ns;
    double duration_ns = kDefaultDurationNs;
    /// Model 4 coefficients of variation (4, 4, 16); not fitted.
    std::vector<double> cva;
    std::vector<double> cvb;
    std::vector<double> cvc;
    FitConfig config;
};

/// Throws InvalidInput when the problem is malformed.
void validate(const FitProblem &problem);

/// Optimizer vector layout: 16 density-factor entries, then the model's
/// filter variables (log N and logit probabilities for models 1 and 2,
/// log products for models 3 and 4). One density variable is a pure
/// scale, so the effective count is raw - 1.
struct ParameterLayout {
    ModelId model = ModelId::One;
    int density_size = 16;
    int filter_size = 0;
    int raw_size() const {
        return density_size + filter_size;
    }
    int effective_size() const {
        return raw_size() - 1;
    }
};

ParameterLayout pack_parameters(ModelId model);

struct DecodedParameters {
    DensityMatrix rho;
    FilterParams filter;
};

/// Maps an optimizer vector to a state and filter parameters. The window
/// and duration come from the problem (window of the first experiment).
DecodedParameters decode_parameters(const FitProblem &problem, std::span<const double> x);

/// Inverse of decode_parameters for models 1-3 (model 4 shares model 3's
/// layout).
std::vector<double> encode_parameters(const DensityMatrix &rho, const FilterParams &filter);

/// X (or Xrev) as a function of the optimizer vector. Construct once per
/// problem; evaluation is const and thread-compatible.
class ChiSquareObjective {
   public:
    explicit ChiSquareObjective(const FitProblem &problem, bool use_variances = false);

    double operator()(std::span<const double> x) const;
    std::vector<Prediction> predictions(std::span<const double> x) const;
    /// Predictions for explicit parameters; filter.window_ns is replaced
    /// per experiment.
    std::vector<Prediction> predictions(const DensityMatrix &rho, FilterParams filter) const;
    const ParameterLayout &layout() const {
        return layout_;
    }

   private:
    const FitProblem &problem_;
    ParameterLayout layout_;
    bool use_variances_;
    std::vector<TraceRuleEvaluator> evaluators_;
};

double objective(const FitProblem &problem, std::span<const double> x);

/// Starting point: singlet factor plus `density_noise` Gaussian noise, and
/// filter values from count moments (falling back to typical magnitudes
/// when the data are degenerate).
std::vector<double> initial_parameters(const FitProblem &problem, uint64_t seed, double density_noise = 1e-3);

struct RestartSummary {
    uint64_t seed;
    double value;
    int64_t evaluations;
    bool converged;
};

struct FitResult {
    ModelId model = ModelId::One;
    DensityMatrix rho = singlet_state();
    FilterParams params;
    FitStatistics statistics;
    std::vector<Prediction> predictions;
    std::vector<double> best_vector;
    /// Best objective value each time it improved, evaluations counted
    /// cumulatively over restarts of the winning search.
    std::vector<TracePoint> trace;
    std::vector<RestartSummary> restarts;
    int64_t evaluations = 0;
    bool converged = false;
};

/// Minimizes X (Xrev for model 4 with refit_means) over the density
/// factor and filter parameters. Deterministic for a given config.seed.
FitResult fit(const FitProblem &problem);

}  // namespace eprb

#endif
