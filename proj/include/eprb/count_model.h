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

#ifndef EPRB_COUNT_MODEL_H
#define EPRB_COUNT_MODEL_H

#include <array>
#include <string>
#include <vector>

#include "eprb/quantum.h"

namespace eprb {

/// The four filter models, from per-setting efficiencies (1) up to
/// between-experiment parameter noise (4).
enum class ModelId : int { One = 1, Two = 2, Three = 3, Four = 4 };

/// Throws InvalidInput for anything outside 1..4.
ModelId model_from_int(int id);
inline int to_int(ModelId m) {
    return static_cast<int>(m);
}

inline constexpr double kDefaultDurationNs = 5e9;
inline constexpr double kDefaultWindowNs = 30.0;

/// 24 counts of one experiment: Alice singles a (single_index), Bob singles
/// b, and coincidences c (coincidence_index). Stored as reals because the
/// same layout holds model expectations.
struct CountTable {
    std::string experiment_id;
    std::array<double, 4> a{};
    std::array<double, 4> b{};
    std::array<double, 16> c{};
};

struct UnpairedSingles {
    std::array<double, 4> ua{};
    std::array<double, 4> ub{};
};

/// ua_ij = a_ij - sum_kl c_ijkl, ub_kl = b_kl - sum_ij c_ijkl. No validation.
UnpairedSingles unpaired_singles_unchecked(const std::array<double, 4> &a, const std::array<double, 4> &b,
                                           const std::array<double, 16> &c);

/// As above; throws DataInconsistency if any unpaired count is negative.
UnpairedSingles unpaired_singles(const CountTable &table);

/// Model parameters. For models 1 and 2, `pairs` is N and pa/pb hold
/// detection probabilities (2+2 for model 1, indexed by setting; 4+4 for
/// model 2, indexed by single_index). For models 3 and 4, N is not
/// separately identifiable and pa/pb/pc hold the products N*pa_ij,
/// N*pb_kl and N*pc_ijkl (4, 4, 16 entries); `pairs` is ignored.
/// Model 4 adds coefficients of variation cva/cvb/cvc (4, 4, 16).
struct FilterParams {
    ModelId model = ModelId::One;
    double pairs = 0.0;
    std::vector<double> pa;
    std::vector<double> pb;
    std::vector<double> pc;
    std::vector<double> cva;
    std::vector<double> cvb;
    std::vector<double> cvc;
    /// Total acceptance width of the coincidence window used in the
    /// false-positive term (models 3 and 4).
    double window_ns = kDefaultWindowNs;
    double duration_ns = kDefaultDurationNs;
};

/// Throws InvalidInput on wrong arity or out-of-range values.
void validate(const FilterParams &params);

/// Model expectations for one experiment. Variances are filled only for
/// model 4 (has_variances); otherwise the Poisson variance equals the mean.
struct Prediction {
    std::array<double, 4> a{};
    std::array<double, 4> b{};
    std::array<double, 16> c{};
    std::array<double, 4> ua{};
    std::array<double, 4> ub{};
    bool has_variances = false;
    std::array<double, 4> var_ua{};
    std::array<double, 4> var_ub{};
    std::array<double, 16> var_c{};
};

/// Expected accidental coincidences between two independent channels.
double false_positive_term(double a_hat, double b_hat, double window_ns, double duration_ns);

Prediction predict_model1(const FilterParams &params, const QuantumProbs &qp);
Prediction predict_model2(const FilterParams &params, const QuantumProbs &qp);
Prediction predict_model3(const FilterParams &params, const QuantumProbs &qp);
Prediction predict_model4(const FilterParams &params, const QuantumProbs &qp);

/// Dispatches on params.model.
Prediction predict(const FilterParams &params, const QuantumProbs &qp);

/// Predicted coincidence fractions within each quadrant (i, k). Throws
/// DegenerateInput if a quadrant sums to zero.
std::array<double, 16> fair_sampling_ratios(const Prediction &pred);

/// Converts model 1 or 2 parameters into the equivalent model 3 products
/// (pc = pa * pb, window zero). Useful for nesting checks and warm starts.
FilterParams as_model3(const FilterParams &params);

}  // namespace eprb

#endif
