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

#include "eprb/statistics.h"

#include <cmath>
#include <random>
#include <sstream>

#include "eprb/error.h"

namespace eprb {

std::string channel_name(int channel) {
    if (channel < 0 || channel >= kChannelsPerExperiment) {
        fail(ErrorKind::InvalidInput, "channel index out of range");
    }
    auto bits = [](int v, int width) {
        std::string s;
        for (int b = width - 1; b >= 0; --b) {
            s.push_back(((v >> b) & 1) ? '1' : '0');
        }
        return s;
    };
    if (channel < 4) {
        return "ua_" + bits(channel, 2);
    }
    if (channel < 8) {
        return "ub_" + bits(channel - 4, 2);
    }
    return "c_" + bits(channel - 8, 4);
}

ChannelValue channel_value(const CountTable &obs, const Prediction &pred, int channel, bool use_variances) {
    // Observed unpaired singles are derived without validation here; the
    // statistic is defined for any table.
    auto u = unpaired_singles_unchecked(obs.a, obs.b, obs.c);
    bool var = use_variances && pred.has_variances;
    if (channel < 4) {
        return {u.ua[channel], pred.ua[channel], var ? pred.var_ua[channel] : pred.ua[channel]};
    }
    if (channel < 8) {
        int s = channel - 4;
        return {u.ub[s], pred.ub[s], var ? pred.var_ub[s] : pred.ub[s]};
    }
    int c = channel - 8;
    return {obs.c[c], pred.c[c], var ? pred.var_c[c] : pred.c[c]};
}

std::vector<double> chi_square_contributions(std::span<const CountTable> observed,
                                             std::span<const Prediction> predicted, bool use_variances,
                                             DenominatorPolicy policy) {
    if (observed.size() != predicted.size()) {
        fail(ErrorKind::InvalidInput, "observed and predicted experiment counts differ");
    }
    std::vector<double> out;
    out.reserve(observed.size() * kChannelsPerExperiment);
    for (size_t m = 0; m < observed.size(); ++m) {
        const CountTable &obs = observed[m];
        const Prediction &pred = predicted[m];
        if (use_variances && !pred.has_variances) {
            fail(ErrorKind::InvalidInput, "prediction carries no variances");
        }
        auto u = unpaired_singles_unchecked(obs.a, obs.b, obs.c);
        auto term = [&](double o, double p, double v, int channel) {
            if (policy == DenominatorPolicy::Strict && (!(v > 0.0) || !std::isfinite(v))) {
                std::ostringstream msg;
                msg << "experiment " << m << " channel " << channel_name(channel) << " has denominator " << v;
                fail(ErrorKind::DegeneratePrediction, msg.str());
            }
            double d = std::isfinite(v) ? std::max(v, kDenominatorFloor) : kDenominatorFloor;
            double r = o - p;
            return r * r / d;
        };
        for (int s = 0; s < 4; ++s) {
            out.push_back(term(u.ua[s], pred.ua[s], use_variances ? pred.var_ua[s] : pred.ua[s], s));
        }
        for (int s = 0; s < 4; ++s) {
            out.push_back(term(u.ub[s], pred.ub[s], use_variances ? pred.var_ub[s] : pred.ub[s], 4 + s));
        }
        for (int c = 0; c < 16; ++c) {
            out.push_back(term(obs.c[c], pred.c[c], use_variances ? pred.var_c[c] : pred.c[c], 8 + c));
        }
    }
    return out;
}

namespace {

double sum(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

}  // namespace

double chi_square_X(std::span<const CountTable> observed, std::span<const Prediction> predicted) {
    return sum(chi_square_contributions(observed, predicted, false));
}

double chi_square_Xrev(std::span<const CountTable> observed, std::span<const Prediction> predicted) {
    return sum(chi_square_contributions(observed, predicted, true));
}

int free_parameter_count(ModelId model) {
    switch (model) {
        case ModelId::One:
            return 15 + 5;
        case ModelId::Two:
            return 15 + 9;
        case ModelId::Three:
        case ModelId::Four:
            return 15 + 24;
    }
    fail(ErrorKind::InvalidInput, "unknown model");
}

int degrees_of_freedom(ModelId model, int n_counts) {
    int df = n_counts - free_parameter_count(model);
    if (df <= 0) {
        std::ostringstream out;
        out << n_counts << " counts leave no degrees of freedom for model " << to_int(model);
        fail(ErrorKind::InvalidInput, out.str());
    }
    return df;
}

ZScore z_score(double x, int df) {
    if (df <= 0) {
        fail(ErrorKind::InvalidInput, "degrees of freedom must be positive");
    }
    double z = (x - df) / std::sqrt(2.0 * df);
    return {z, std::abs(z) < kRejectionZ};
}

FitStatistics fit_statistics(ModelId model, std::span<const CountTable> observed,
                             std::span<const Prediction> predicted) {
    FitStatistics st;
    st.model = model;
    st.uses_variances = model == ModelId::Four;
    st.contributions = chi_square_contributions(observed, predicted, st.uses_variances);
    st.x = sum(st.contributions);
    st.df = degrees_of_freedom(model, static_cast<int>(observed.size()) * kChannelsPerExperiment);
    ZScore z = z_score(st.x, st.df);
    st.z = z.z;
    st.accepted = z.accepted;
    for (const Prediction &p : predicted) {
        for (int s = 0; s < 4; ++s) {
            st.low_count_channels += (p.ua[s] < kLowCountWarning) + (p.ub[s] < kLowCountWarning);
        }
        for (double c : p.c) {
            st.low_count_channels += c < kLowCountWarning;
        }
    }
    return st;
}

void validate(const CompoundCountSpec &spec) {
    if (!(spec.expected_events >= 0.0) || !std::isfinite(spec.expected_events)) {
        fail(ErrorKind::InvalidInput, "E(N) must be non-negative");
    }
    if (!(spec.mean_x >= 0.0 && spec.mean_x <= 1.0)) {
        fail(ErrorKind::InvalidInput, "E(x) must lie in [0, 1]");
    }
    if (!(spec.cv_x >= 0.0) || !std::isfinite(spec.cv_x)) {
        fail(ErrorKind::InvalidInput, "CV(x) must be non-negative");
    }
}

double conditional_mean(double events, double x) {
    return events * x;
}

double conditional_variance(double events, double x) {
    return events * x * (1.0 - x);
}

Moments compound_variance(const CompoundCountSpec &spec) {
    validate(spec);
    double mean = spec.expected_events * spec.mean_x;
    double spread = mean * spec.cv_x;
    return {mean, mean + spread * spread};
}

Moments compound_variance_mc_oracle(const CompoundCountSpec &spec, int64_t trials, uint64_t seed) {
    validate(spec);
    if (trials < 10000) {
        fail(ErrorKind::InvalidInput, "the Monte Carlo oracle needs at least 10000 trials");
    }
    const double m = spec.mean_x;
    const double var_x = (m * spec.cv_x) * (m * spec.cv_x);
    // Beta(alpha, beta) with the requested mean and variance.
    double alpha = 0.0;
    double beta = 0.0;
    if (var_x > 0.0) {
        if (!(var_x < m * (1.0 - m))) {
            fail(ErrorKind::InvalidInput, "CV(x) too large for a distribution on [0, 1]");
        }
        double concentration = m * (1.0 - m) / var_x - 1.0;
        alpha = m * concentration;
        beta = (1.0 - m) * concentration;
    }
    std::mt19937_64 rng(seed);
    std::poisson_distribution<int64_t> events(spec.expected_events);
    std::gamma_distribution<double> gamma_a(alpha > 0 ? alpha : 1.0, 1.0);
    std::gamma_distribution<double> gamma_b(beta > 0 ? beta : 1.0, 1.0);

    // Welford accumulation.
    double mean = 0.0;
    double m2 = 0.0;
    for (int64_t t = 0; t < trials; ++t) {
        int64_t n_events = spec.expected_events > 0.0 ? events(rng) : 0;
        double x = m;
        if (var_x > 0.0) {
            double ga = gamma_a(rng);
            double gb = gamma_b(rng);
            x = ga / (ga + gb);
        }
        std::binomial_distribution<int64_t> detect(n_events, x);
        double n = static_cast<double>(detect(rng));
        double delta = n - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta * (n - mean);
    }
    return {mean, m2 / static_cast<double>(trials - 1)};
}

}  // namespace eprb
