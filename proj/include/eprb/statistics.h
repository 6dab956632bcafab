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

#ifndef EPRB_STATISTICS_H
#define EPRB_STATISTICS_H

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eprb/count_model.h"

namespace eprb {

/// Channels per experiment entering the statistic: 4 unpaired Alice
/// singles, 4 unpaired Bob singles, 16 coincidences, in that order.
inline constexpr int kChannelsPerExperiment = 24;
/// 41 experiments x 24 channels.
inline constexpr int kScanCountTotal = 984;
inline constexpr double kRejectionZ = 5.0;
/// Chi-square denominators below this are raised to it.
inline constexpr double kDenominatorFloor = 1e-6;
/// Expected counts below this make the normal approximation doubtful.
inline constexpr double kLowCountWarning = 10.0;

/// "ua_00" .. "ub_11", "c_0000" .. "c_1111".
std::string channel_name(int channel);

struct ChannelValue {
    double observed;
    double predicted;
    double variance;
};

/// Observed, predicted and variance (Poisson unless the prediction carries
/// model 4 variances and use_variances is set) for one channel.
ChannelValue channel_value(const CountTable &observed, const Prediction &predicted, int channel, bool use_variances);

enum class DenominatorPolicy {
    /// Non-positive or non-finite denominators raise DegeneratePrediction.
    Strict,
    /// Every denominator is clamped to kDenominatorFloor; never throws.
    /// Used by the optimizer, where trial points may predict negative
    /// unpaired singles.
    Clamp,
};

/// Per-channel (obs - pred)^2 / denominator, experiment-major, 24 per
/// experiment.
std::vector<double> chi_square_contributions(std::span<const CountTable> observed,
                                             std::span<const Prediction> predicted, bool use_variances,
                                             DenominatorPolicy policy = DenominatorPolicy::Strict);

/// Pearson statistic with Poisson denominators.
double chi_square_X(std::span<const CountTable> observed, std::span<const Prediction> predicted);
/// Same sum with model 4 variance denominators; predictions must carry
/// variances.
double chi_square_Xrev(std::span<const CountTable> observed, std::span<const Prediction> predicted);

/// Effective free parameters: 15 density + model filter parameters.
/// Model 4 reuses model 3's count because its coefficients of variation
/// are chosen inputs, not fitted.
int free_parameter_count(ModelId model);
/// n_counts - free_parameter_count(model); throws InvalidInput if <= 0.
int degrees_of_freedom(ModelId model, int n_counts = kScanCountTotal);

struct ZScore {
    double z;
    bool accepted;  ///< |z| < 5
};
ZScore z_score(double x, int df);

struct FitStatistics {
    ModelId model = ModelId::One;
    double x = 0.0;
    int df = 0;
    double z = 0.0;
    bool accepted = false;
    bool uses_variances = false;
    int low_count_channels = 0;
    std::vector<double> contributions;
};

/// X (or Xrev for model 4 predictions), DF from the actual count total,
/// and Z.
FitStatistics fit_statistics(ModelId model, std::span<const CountTable> observed,
                             std::span<const Prediction> predicted);

// Compound binomial-Poisson counting: a Poisson number of events, each
// detected with a random probability x.

struct CompoundCountSpec {
    double expected_events;  ///< E(N)
    double mean_x;           ///< E(x)
    double cv_x;             ///< CV(x)
};

struct Moments {
    double mean;
    double variance;
};

/// E(n | N, x) = N x.
double conditional_mean(double events, double x);
/// V(n | N, x) = N x (1 - x).
double conditional_variance(double events, double x);
/// E(n) = E(N) E(x); V(n) = E(n) + (E(n) CV(x))^2 for Poisson N.
Moments compound_variance(const CompoundCountSpec &spec);
/// Monte Carlo estimate of the same moments: N ~ Poisson, x ~ Beta matched
/// to (E(x), CV(x)), n ~ Binomial(N, x). Throws InvalidInput for
/// trials < 10000 or a CV unattainable by a Beta law on [0, 1].
Moments compound_variance_mc_oracle(const CompoundCountSpec &spec, int64_t trials, uint64_t seed);

void validate(const CompoundCountSpec &spec);

}  // namespace eprb

#endif
