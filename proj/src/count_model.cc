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

#include "eprb/count_model.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "eprb/error.h"

namespace eprb {

namespace {

void require_size(const std::vector<double> &v, size_t n, const char *name, ModelId model) {
    if (v.size() != n) {
        std::ostringstream out;
        out << "model " << to_int(model) << " expects " << n << " values for " << name << ", got " << v.size();
        fail(ErrorKind::InvalidInput, out.str());
    }
}

void require_range(const std::vector<double> &v, double lo, double hi, const char *name) {
    for (double x : v) {
        if (!(x >= lo && x <= hi)) {
            std::ostringstream out;
            out << name << " value " << x << " outside [" << lo << ", " << hi << "]";
            fail(ErrorKind::InvalidInput, out.str());
        }
    }
}

void require_model(const FilterParams &p, ModelId expected) {
    if (p.model != expected) {
        std::ostringstream out;
        out << "parameters are for model " << to_int(p.model) << ", predictor is model " << to_int(expected);
        fail(ErrorKind::InvalidInput, out.str());
    }
}

void fill_unpaired(Prediction &pred) {
    auto u = unpaired_singles_unchecked(pred.a, pred.b, pred.c);
    pred.ua = u.ua;
    pred.ub = u.ub;
}

// Shared by models 3 and 4: singles from N-scaled products, coincidences
// with the accidental term.
Prediction predict_products(const FilterParams &p, const QuantumProbs &qp) {
    Prediction pred;
    for (int s = 0; s < 4; ++s) {
        pred.a[s] = 2.0 * p.pa[s] * qp.qa[s];
        pred.b[s] = 2.0 * p.pb[s] * qp.qb[s];
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    int c = coincidence_index(i, j, k, l);
                    double accidental =
                        false_positive_term(pred.a[single_index(i, j)], pred.b[single_index(k, l)], p.window_ns,
                                            p.duration_ns);
                    pred.c[c] = p.pc[c] * qp.qc[c] + accidental;
                }
            }
        }
    }
    fill_unpaired(pred);
    return pred;
}

}  // namespace

ModelId model_from_int(int id) {
    if (id < 1 || id > 4) {
        fail(ErrorKind::InvalidInput, "model id must be 1, 2, 3 or 4, got " + std::to_string(id));
    }
    return static_cast<ModelId>(id);
}

UnpairedSingles unpaired_singles_unchecked(const std::array<double, 4> &a, const std::array<double, 4> &b,
                                           const std::array<double, 16> &c) {
    UnpairedSingles u{a, b};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    double v = c[coincidence_index(i, j, k, l)];
                    u.ua[single_index(i, j)] -= v;
                    u.ub[single_index(k, l)] -= v;
                }
            }
        }
    }
    return u;
}

UnpairedSingles unpaired_singles(const CountTable &t) {
    auto u = unpaired_singles_unchecked(t.a, t.b, t.c);
    for (int s = 0; s < 4; ++s) {
        if (u.ua[s] < 0.0 || u.ub[s] < 0.0) {
            std::ostringstream out;
            out << "experiment '" << t.experiment_id << "': coincidences exceed singles in channel " << s
                << " (ua=" << u.ua[s] << ", ub=" << u.ub[s] << ")";
            fail(ErrorKind::DataInconsistency, out.str());
        }
    }
    return u;
}

void validate(const FilterParams &p) {
    if (!(p.duration_ns > 0.0)) {
        fail(ErrorKind::InvalidInput, "experiment duration must be positive");
    }
    switch (p.model) {
        case ModelId::One:
        case ModelId::Two: {
            size_t n = p.model == ModelId::One ? 2 : 4;
            require_size(p.pa, n, "pa", p.model);
            require_size(p.pb, n, "pb", p.model);
            require_range(p.pa, 0.0, 1.0, "pa");
            require_range(p.pb, 0.0, 1.0, "pb");
            if (!(p.pairs > 0.0) || !std::isfinite(p.pairs)) {
                fail(ErrorKind::InvalidInput, "pairs per quadrant N must be positive");
            }
            break;
        }
        case ModelId::Three:
        case ModelId::Four: {
            const double inf = std::numeric_limits<double>::infinity();
            require_size(p.pa, 4, "N*pa", p.model);
            require_size(p.pb, 4, "N*pb", p.model);
            require_size(p.pc, 16, "N*pc", p.model);
            require_range(p.pa, 0.0, inf, "N*pa");
            require_range(p.pb, 0.0, inf, "N*pb");
            require_range(p.pc, 0.0, inf, "N*pc");
            if (!(p.window_ns >= 0.0) || !std::isfinite(p.window_ns)) {
                fail(ErrorKind::InvalidInput, "coincidence window width must be non-negative");
            }
            if (p.model == ModelId::Four) {
                require_size(p.cva, 4, "cva", p.model);
                require_size(p.cvb, 4, "cvb", p.model);
                require_size(p.cvc, 16, "cvc", p.model);
                require_range(p.cva, 0.0, inf, "cva");
                require_range(p.cvb, 0.0, inf, "cvb");
                require_range(p.cvc, 0.0, inf, "cvc");
            }
            break;
        }
    }
}

double false_positive_term(double a_hat, double b_hat, double window_ns, double duration_ns) {
    return a_hat * b_hat * (window_ns / duration_ns);
}

Prediction predict_model1(const FilterParams &p, const QuantumProbs &qp) {
    require_model(p, ModelId::One);
    validate(p);
    const double n = p.pairs;
    Prediction pred;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            pred.a[single_index(i, j)] = 2.0 * n * p.pa[i] * qp.qa[single_index(i, j)];
            pred.b[single_index(i, j)] = 2.0 * n * p.pb[i] * qp.qb[single_index(i, j)];
        }
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    int c = coincidence_index(i, j, k, l);
                    pred.c[c] = n * p.pa[i] * p.pb[k] * qp.qc[c];
                }
            }
        }
    }
    fill_unpaired(pred);
    return pred;
}

Prediction predict_model2(const FilterParams &p, const QuantumProbs &qp) {
    require_model(p, ModelId::Two);
    validate(p);
    const double n = p.pairs;
    Prediction pred;
    for (int s = 0; s < 4; ++s) {
        pred.a[s] = 2.0 * n * p.pa[s] * qp.qa[s];
        pred.b[s] = 2.0 * n * p.pb[s] * qp.qb[s];
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    int c = coincidence_index(i, j, k, l);
                    pred.c[c] = n * p.pa[single_index(i, j)] * p.pb[single_index(k, l)] * qp.qc[c];
                }
            }
        }
    }
    fill_unpaired(pred);
    return pred;
}

Prediction predict_model3(const FilterParams &p, const QuantumProbs &qp) {
    require_model(p, ModelId::Three);
    validate(p);
    return predict_products(p, qp);
}

Prediction predict_model4(const FilterParams &p, const QuantumProbs &qp) {
    require_model(p, ModelId::Four);
    validate(p);
    Prediction pred = predict_products(p, qp);
    pred.has_variances = true;
    for (int s = 0; s < 4; ++s) {
        double sa = pred.ua[s] * p.cva[s];
        double sb = pred.ub[s] * p.cvb[s];
        pred.var_ua[s] = pred.ua[s] + sa * sa;
        pred.var_ub[s] = pred.ub[s] + sb * sb;
    }
    for (int c = 0; c < 16; ++c) {
        double sc = pred.c[c] * p.cvc[c];
        pred.var_c[c] = pred.c[c] + sc * sc;
    }
    return pred;
}

Prediction predict(const FilterParams &p, const QuantumProbs &qp) {
    switch (p.model) {
        case ModelId::One:
            return predict_model1(p, qp);
        case ModelId::Two:
            return predict_model2(p, qp);
        case ModelId::Three:
            return predict_model3(p, qp);
        case ModelId::Four:
            return predict_model4(p, qp);
    }
    fail(ErrorKind::InvalidInput, "unknown model");
}

std::array<double, 16> fair_sampling_ratios(const Prediction &pred) {
    std::array<double, 16> ratios{};
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < 2; ++k) {
            double total = 0.0;
            for (int j = 0; j < 2; ++j) {
                for (int l = 0; l < 2; ++l) {
                    total += pred.c[coincidence_index(i, j, k, l)];
                }
            }
            if (!(total > 0.0)) {
                std::ostringstream out;
                out << "quadrant (" << i << "," << k << ") has no predicted coincidences";
                fail(ErrorKind::DegenerateInput, out.str());
            }
            for (int j = 0; j < 2; ++j) {
                for (int l = 0; l < 2; ++l) {
                    int c = coincidence_index(i, j, k, l);
                    ratios[c] = pred.c[c] / total;
                }
            }
        }
    }
    return ratios;
}

FilterParams as_model3(const FilterParams &p) {
    validate(p);
    if (p.model != ModelId::One && p.model != ModelId::Two) {
        fail(ErrorKind::InvalidInput, "as_model3 expects model 1 or 2 parameters");
    }
    auto pa_at = [&](int i, int j) { return p.model == ModelId::One ? p.pa[i] : p.pa[single_index(i, j)]; };
    auto pb_at = [&](int k, int l) { return p.model == ModelId::One ? p.pb[k] : p.pb[single_index(k, l)]; };
    FilterParams out;
    out.model = ModelId::Three;
    out.pairs = p.pairs;
    out.window_ns = 0.0;
    out.duration_ns = p.duration_ns;
    out.pa.resize(4);
    out.pb.resize(4);
    out.pc.resize(16);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.pa[single_index(i, j)] = p.pairs * pa_at(i, j);
            out.pb[single_index(i, j)] = p.pairs * pb_at(i, j);
        }
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    out.pc[coincidence_index(i, j, k, l)] = p.pairs * pa_at(i, j) * pb_at(k, l);
                }
            }
        }
    }
    return out;
}

}  // namespace eprb
