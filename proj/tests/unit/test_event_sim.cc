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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "eprb/error.h"
#include "eprb/event_sim.h"
#include "synthetic.h"

namespace eprb {
namespace {

EventLog log_of(std::initializer_list<std::array<int64_t, 3>> rows) {
    EventLog log;
    for (const auto &r : rows) {
        log.events.push_back({r[0], static_cast<int>(r[1]), static_cast<int>(r[2])});
    }
    return log;
}

// Homogeneous Poisson log with uniformly random labels.
EventLog poisson_log(double rate_per_ns, double duration_ns, std::mt19937_64 &rng) {
    EventLog log;
    std::exponential_distribution<double> gap(rate_per_ns);
    int64_t last = -1;
    for (double t = gap(rng); t < duration_ns; t += gap(rng)) {
        int64_t ns = std::llround(t);
        if (ns == last) continue;
        last = ns;
        log.events.push_back({ns, static_cast<int>(rng() & 1), static_cast<int>(rng() & 1)});
    }
    return log;
}

SimConfig base_config(double pairs_per_quadrant, uint64_t seed) {
    SimConfig c;
    c.pairs_per_quadrant = pairs_per_quadrant;
    c.alice = flat_observer({0.2, 0.2, 0.2, 0.2});
    c.bob = flat_observer({0.2, 0.2, 0.2, 0.2});
    c.seed = seed;
    return c;
}

std::set<std::pair<size_t, size_t>> as_set(const CoincidenceSet &s) {
    std::set<std::pair<size_t, size_t>> out;
    for (const Coincidence &c : s.pairs) out.insert({c.alice_index, c.bob_index});
    return out;
}

// ---- Matching ----

TEST(Matching, WindowBoundsAreInclusive) {
    EventLog a = log_of({{1000, 0, 0}});
    for (int64_t tb : {954, 955, 985, 1015, 1016}) {
        EventLog b = log_of({{tb, 0, 0}});
        bool inside = tb >= 955 && tb <= 1015;
        EXPECT_EQ(match_coincidences(a, b, 15.0, 30.0).pairs.size(), inside ? 1u : 0u) << tb;
    }
}

TEST(Matching, ZeroWindowOnExactOffsetMatchesEveryPair) {
    std::mt19937_64 rng(1);
    EventLog a = poisson_log(1e-3, 1e7, rng);
    EventLog b;
    for (const DetectionEvent &e : a.events) b.events.push_back({e.time_ns + 15, e.setting, e.result});
    CoincidenceSet s = match_coincidences(a, b, -15.0, 0.0);
    ASSERT_EQ(s.pairs.size(), a.events.size());
    for (size_t n = 0; n < s.pairs.size(); ++n) {
        EXPECT_EQ(s.pairs[n].alice_index, n);
        EXPECT_EQ(s.pairs[n].bob_index, n);
    }
}

TEST(Matching, NearestCandidateWins) {
    // Bob's 1003 is closer to Alice's 1000 than to 1010.
    EventLog a = log_of({{1000, 0, 0}, {1010, 0, 1}});
    EventLog b = log_of({{1003, 1, 0}});
    CoincidenceSet s = match_coincidences(a, b, 0.0, 20.0);
    ASSERT_EQ(s.pairs.size(), 1u);
    EXPECT_EQ(s.pairs[0].alice_index, 0u);
}

TEST(Matching, SymmetricUnderRoleSwap) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        EventLog a = poisson_log(0.02, 2e5, rng);
        EventLog b = poisson_log(0.03, 2e5, rng);
        double delta = static_cast<double>(static_cast<int>(rng() % 41) - 20);
        double w = static_cast<double>(rng() % 25);
        auto forward = as_set(match_coincidences(a, b, delta, w));
        std::set<std::pair<size_t, size_t>> swapped;
        for (const Coincidence &c : match_coincidences(b, a, -delta, w).pairs) {
            swapped.insert({c.bob_index, c.alice_index});
        }
        EXPECT_EQ(forward, swapped) << "trial " << trial;
    }
}

TEST(Matching, NoEventUsedTwiceAndAllPairsInsideWindow) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        EventLog a = poisson_log(0.05, 2e4, rng);
        EventLog b = poisson_log(0.05, 2e4, rng);
        double delta = static_cast<double>(static_cast<int>(rng() % 21) - 10) + 0.5 * (trial % 2);
        double w = static_cast<double>(rng() % 30);
        CoincidenceSet s = match_coincidences(a, b, delta, w);
        std::set<size_t> used_a, used_b;
        for (size_t n = 0; n < s.pairs.size(); ++n) {
            const Coincidence &c = s.pairs[n];
            EXPECT_TRUE(used_a.insert(c.alice_index).second);
            EXPECT_TRUE(used_b.insert(c.bob_index).second);
            double d = static_cast<double>(b.events[c.bob_index].time_ns - a.events[c.alice_index].time_ns) + delta;
            EXPECT_LE(std::abs(d), w);
            if (n > 0) EXPECT_LT(s.pairs[n - 1].alice_index, c.alice_index);
        }
        // Maximality: no unused pair remains inside the window.
        for (size_t i = 0; i < a.events.size(); ++i) {
            if (used_a.count(i)) continue;
            for (size_t j = 0; j < b.events.size(); ++j) {
                if (used_b.count(j)) continue;
                double d = static_cast<double>(b.events[j].time_ns - a.events[i].time_ns) + delta;
                EXPECT_GT(std::abs(d), w);
            }
        }
    }
}

TEST(Matching, AccidentalRateFollowsAcceptanceWidth) {
    const double rate = 4e-5, duration = 5e9, w = 30.0;
    double observed = 0.0, expected = 0.0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        EventLog a = poisson_log(rate, duration, rng);
        EventLog b = poisson_log(rate, duration, rng);
        observed += static_cast<double>(match_coincidences(a, b, -15.0, w).pairs.size());
        expected += static_cast<double>(a.events.size()) * static_cast<double>(b.events.size()) * (2 * w + 1) /
                    duration;
    }
    EXPECT_NEAR(observed, expected, 3.0 * std::sqrt(expected));
    EXPECT_EQ(acceptance_width(30.0), 61.0);
    EXPECT_EQ(acceptance_width(0.0), 1.0);
    EXPECT_EQ(acceptance_width(6.5), 13.0);
}

TEST(Matching, RejectsInvalidInput) {
    EventLog a = log_of({{10, 0, 0}, {10, 1, 0}});
    EventLog b;
    EXPECT_THROW(match_coincidences(a, b, 0, 1), Error);
    EventLog ok = log_of({{10, 0, 0}});
    EXPECT_THROW(match_coincidences(ok, b, 0, -1), Error);
    EXPECT_THROW(validate(log_of({{1, 2, 0}})), Error);
}

// ---- Tabulation ----

TEST(Tabulate, HandBuiltLogs) {
    EventLog a = log_of({{100, 0, 1}, {500, 1, 0}});
    EventLog b = log_of({{112, 1, 1}});
    CoincidenceSet s = match_coincidences(a, b, -15.0, 5.0);
    CountTable t = tabulate_counts(a, b, s, "x");
    EXPECT_EQ(t.a[single_index(0, 1)], 1);
    EXPECT_EQ(t.a[single_index(1, 0)], 1);
    EXPECT_EQ(t.b[single_index(1, 1)], 1);
    EXPECT_EQ(t.c[coincidence_index(0, 1, 1, 1)], 1);
    EXPECT_EQ(std::accumulate(t.c.begin(), t.c.end(), 0.0), 1.0);
    auto u = unpaired_singles(t);
    EXPECT_EQ(u.ua[single_index(0, 1)], 0);
    EXPECT_EQ(u.ua[single_index(1, 0)], 1);
    EXPECT_EQ(u.ub[single_index(1, 1)], 0);
    CountTable empty = tabulate_counts(EventLog{}, EventLog{}, CoincidenceSet{});
    EXPECT_EQ(std::accumulate(empty.a.begin(), empty.a.end(), 0.0), 0.0);
}

// ---- Simulator ----

TEST(Simulator, DeterministicInSeed) {
    SimConfig c = base_config(1e4, 9);
    c.duration_ns = 1e8;
    SimulatedExperiment x = simulate_experiment(c);
    SimulatedExperiment y = simulate_experiment(c);
    ASSERT_EQ(x.alice.events.size(), y.alice.events.size());
    for (size_t n = 0; n < x.alice.events.size(); ++n) EXPECT_EQ(x.alice.events[n].time_ns, y.alice.events[n].time_ns);
    c.seed = 10;
    SimulatedExperiment z = simulate_experiment(c);
    EXPECT_NE(x.alice.events.size() + 1000000 * x.bob.events.size(),
              z.alice.events.size() + 1000000 * z.bob.events.size());
}

TEST(Simulator, RejectsBadConfig) {
    SimConfig c = base_config(1e3, 1);
    c.alice.profile[2].resize(50);
    EXPECT_THROW(simulate_experiment(c), Error);
    c = base_config(1e3, 1);
    c.switch_time_ns = 0;
    EXPECT_THROW(simulate_experiment(c), Error);
    c = base_config(1e3, 1);
    c.bob.profile[0][3] = 1.5;
    EXPECT_THROW(simulate_experiment(c), Error);
    c = base_config(-1.0, 1);
    try {
        simulate_experiment(c);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
}

TEST(Simulator, LogsAreValidAndTruthIsConsistent) {
    SimConfig c = base_config(2.5e4, 3);
    c.duration_ns = 5e8;
    c.bob.background_rate = 1e-5;
    c.alice.delay[1] = {0.5, 8.0};
    SimulatedExperiment e = simulate_experiment(c);
    validate(e.alice);
    validate(e.bob);
    ASSERT_EQ(e.truth.alice_pair.size(), e.alice.events.size());
    ASSERT_EQ(e.truth.bob_pair.size(), e.bob.events.size());
    int64_t detected_a = 0;
    for (const auto &ch : e.truth.alice_detected) detected_a += std::accumulate(ch.begin(), ch.end(), int64_t{0});
    int64_t tagged_a = std::count_if(e.truth.alice_pair.begin(), e.truth.alice_pair.end(), [](int64_t p) { return p >= 0; });
    EXPECT_EQ(detected_a, tagged_a);
    EXPECT_EQ(std::accumulate(e.truth.arrival_bins.begin(), e.truth.arrival_bins.end(), int64_t{0}), e.truth.pairs);
    EXPECT_EQ(std::accumulate(e.truth.joint_arrived.begin(), e.truth.joint_arrived.end(), int64_t{0}), e.truth.pairs);
    EXPECT_GT(std::count(e.truth.bob_pair.begin(), e.truth.bob_pair.end(), -1), 0);
}

TEST(Simulator, GroundTruthAudit) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        SimConfig c = base_config(5e4, seed);
        c.duration_ns = 1e9;
        c.alice.delay = {DelayModel{0.7, 20.0}, DelayModel{0.9, 5.0}, DelayModel{}, DelayModel{0.5, 40.0}};
        c.alice.background_rate = 2e-5;
        SimulatedExperiment e = simulate_experiment(c);
        CoincidenceSet s = match_coincidences(e.alice, e.bob, -c.offset_ns, 30.0);

        // Pairs detected on both sides, found independently from the id tags.
        std::vector<int64_t> bob_index(static_cast<size_t>(e.truth.pairs), -1);
        for (size_t n = 0; n < e.truth.bob_pair.size(); ++n) {
            if (e.truth.bob_pair[n] >= 0) bob_index[e.truth.bob_pair[n]] = static_cast<int64_t>(n);
        }
        std::set<std::pair<size_t, size_t>> true_pairs;
        for (size_t n = 0; n < e.truth.alice_pair.size(); ++n) {
            int64_t id = e.truth.alice_pair[n];
            if (id >= 0 && bob_index[id] >= 0) true_pairs.insert({n, static_cast<size_t>(bob_index[id])});
        }
        int64_t joint = std::accumulate(e.truth.joint_detected.begin(), e.truth.joint_detected.end(), int64_t{0});
        ASSERT_EQ(static_cast<int64_t>(true_pairs.size()), joint);

        int64_t matched_true = 0;
        for (const Coincidence &m : s.pairs) matched_true += true_pairs.count({m.alice_index, m.bob_index});
        auto matched = as_set(s);
        int64_t false_negative = 0;
        for (const auto &p : true_pairs) false_negative += matched.count(p) == 0;
        EXPECT_EQ(false_negative + matched_true, joint);
        // Long Alice delays produce some false negatives.
        EXPECT_GT(false_negative, 0);
    }
}

TEST(Simulator, SinglesFollowModelExpectation) {
    const double n = 2.5e5;
    const double eff = 0.2;
    SimConfig c = base_config(n, 4);
    c.rho = synthetic::werner(0.9);
    c.theta = 0.3;
    SimulatedExperiment e = simulate_experiment(c);
    QuantumProbs q = quantum_probs(c.rho, geometry_for_experiment(c.theta));
    // Half the boundaries change the setting and suppress 14 of 100 ns.
    double mean_eff = eff * (1.0 - 0.5 * 14.0 / 100.0);
    CountTable t = tabulate_counts(e.alice, e.bob, CoincidenceSet{});
    for (int s = 0; s < 4; ++s) {
        double expect_a = 2.0 * n * mean_eff * q.qa[s];
        double expect_b = 2.0 * n * mean_eff * q.qb[s];
        EXPECT_NEAR(t.a[s], expect_a, 3.0 * std::sqrt(expect_a)) << s;
        EXPECT_NEAR(t.b[s], expect_b, 3.0 * std::sqrt(expect_b)) << s;
    }
}

TEST(Simulator, SwitchingBinsDetectAtHalfRate) {
    SimConfig c = base_config(2.5e5, 5);
    SimulatedExperiment e = simulate_experiment(c);
    BinHistogram h = bin_histogram(e.alice);
    double sw = 0.0, rest = 0.0;
    for (int ch = 0; ch < 4; ++ch) {
        for (int b = 0; b < kCycleNs; ++b) (b < kSwitchTimeNs ? sw : rest) += static_cast<double>(h[ch][b]);
    }
    ASSERT_GT(sw + rest, 1e5);
    double ratio = (sw / kSwitchTimeNs) / (rest / (kCycleNs - kSwitchTimeNs));
    EXPECT_NEAR(ratio, 0.5, 0.05);
}

TEST(Simulator, TwentyNanosecondProfileShowsInHistogram) {
    SimConfig c = base_config(2.5e5, 6);
    for (auto *o : {&c.alice, &c.bob}) {
        for (auto &p : o->profile) {
            for (int b = 0; b < kCycleNs; ++b) p[b] = 0.2 * (1.0 + 0.5 * std::cos(2.0 * M_PI * b / 20.0));
        }
    }
    SimulatedExperiment e = simulate_experiment(c);
    BinHistogram h = bin_histogram(e.alice);
    std::vector<double> total(kCycleNs, 0.0);
    for (const auto &ch : h) {
        for (int b = 0; b < kCycleNs; ++b) total[b] += static_cast<double>(ch[b]);
    }
    // Autocorrelation over the unsuppressed bins only.
    auto autocorr = [&](int lag) {
        std::vector<double> x, y;
        for (int b = kSwitchTimeNs; b + lag < kCycleNs; ++b) {
            x.push_back(total[b]);
            y.push_back(total[b + lag]);
        }
        double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
        double sxy = 0, sxx = 0, syy = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        return sxy / std::sqrt(sxx * syy);
    };
    int best = 0;
    for (int lag = 5; lag <= 35; ++lag) {
        if (best == 0 || autocorr(lag) > autocorr(best)) best = lag;
    }
    EXPECT_EQ(best, 20);
}

TEST(BinHistogram, EmptyAndUniform) {
    BinHistogram empty = bin_histogram(EventLog{});
    for (const auto &ch : empty) EXPECT_EQ(std::accumulate(ch.begin(), ch.end(), int64_t{0}), 0);

    std::mt19937_64 rng(7);
    EventLog log = poisson_log(0.01, 1e8, rng);
    BinHistogram h = bin_histogram(log);
    double n = static_cast<double>(log.events.size());
    for (const auto &ch : h) {
        for (int64_t v : ch) {
            // Each (channel, bin) cell holds about n / 400 counts.
            double p = 1.0 / 400.0;
            EXPECT_NEAR(static_cast<double>(v), n * p, 4.5 * std::sqrt(n * p * (1 - p)));
        }
    }
}

// ---- Coincidence bin matrix ----

TEST(CoincidenceBinMatrix, OffsetConcentratesOnDiagonal) {
    SimConfig c = base_config(2.5e5, 8);
    c.offset_ns = 15.0;
    SimulatedExperiment e = simulate_experiment(c);
    CoincidenceSet s = match_coincidences(e.alice, e.bob, -15.0, 30.0);
    BinMatrix m = coincidence_bin_matrix(s, e.alice, e.bob);
    for (int q = 0; q < 4; ++q) EXPECT_GE(diagonal_fraction(m[q], kCycleNs, 15, 1), 0.95) << q;

    c.offset_ns = 0.0;
    SimulatedExperiment e0 = simulate_experiment(c);
    BinMatrix m0 = coincidence_bin_matrix(match_coincidences(e0.alice, e0.bob, 0.0, 30.0), e0.alice, e0.bob);
    for (int q = 0; q < 4; ++q) EXPECT_GE(diagonal_fraction(m0[q], kCycleNs, 0, 0), 0.95) << q;
}

TEST(CoincidenceBinMatrix, AliceDelaysPushMassToOneSide) {
    SimConfig c = base_config(2.5e5, 9);
    c.offset_ns = 15.0;
    for (auto &d : c.alice.delay) d = {0.6, 6.0};
    SimulatedExperiment e = simulate_experiment(c);
    CoincidenceSet s = match_coincidences(e.alice, e.bob, -15.0, 30.0);
    BinMatrix m = coincidence_bin_matrix(s, e.alice, e.bob);
    // Alice's delayed detections shrink beta - alpha below the offset.
    int64_t below = 0, above = 0;
    for (const auto &quadrant : m) {
        for (int alpha = 0; alpha < kCycleNs; ++alpha) {
            for (int beta = 0; beta < kCycleNs; ++beta) {
                int d = ((beta - alpha - 15) % kCycleNs + kCycleNs) % kCycleNs;
                int64_t v = quadrant[static_cast<size_t>(alpha) * kCycleNs + beta];
                if (d >= 1 && d <= 49) above += v;
                if (d >= 51) below += v;
            }
        }
    }
    EXPECT_GT(below, 1000);
    // Only accidentals land above the diagonal.
    EXPECT_LT(static_cast<double>(above), 0.02 * static_cast<double>(below));
}

// ---- Zero-time reconciliation ----

TEST(ZeroTime, IdenticalAndRolledHistograms) {
    std::vector<double> h(100);
    for (int b = 0; b < 100; ++b) h[b] = (b < 14 ? 50.0 : 100.0) + 10.0 * std::sin(b * 0.37);
    ZeroTimeShift same = reconcile_zero_times(h, h);
    EXPECT_EQ(same.shift, 0);
    EXPECT_NEAR(same.correlation, 1.0, 1e-12);
    std::vector<double> rolled(100);
    for (int b = 0; b < 100; ++b) rolled[(b + 40) % 100] = h[b];
    ZeroTimeShift r = reconcile_zero_times(h, rolled);
    EXPECT_EQ(r.shift, 40);
    EXPECT_NEAR(r.correlation, 1.0, 1e-12);
    EXPECT_THROW(reconcile_zero_times(std::vector<double>(100, 3.0), h), Error);
}

TEST(ZeroTime, SimulatedPhasesReconcile) {
    auto histogram = [](int64_t phase, uint64_t seed) {
        SimConfig c = base_config(2.5e5, seed);
        for (auto &p : c.alice.profile) {
            for (int b = 0; b < kCycleNs; ++b) p[b] = 0.2 * (1.0 + 0.4 * std::cos(2.0 * M_PI * b / 20.0));
        }
        c.alice.phase_ns = phase;
        SimulatedExperiment e = simulate_experiment(c);
        BinHistogram h = bin_histogram(e.alice);
        std::vector<double> total(kCycleNs, 0.0);
        for (const auto &ch : h) {
            for (int b = 0; b < kCycleNs; ++b) total[b] += static_cast<double>(ch[b]);
        }
        return total;
    };
    std::vector<double> base = histogram(0, 10);
    for (int64_t phase : {20, 40, 60, 80}) {
        ZeroTimeShift r = reconcile_zero_times(base, histogram(phase, 10 + phase));
        EXPECT_EQ(r.shift, phase);
        EXPECT_GT(r.correlation, 0.95);
    }
}

// ---- Joint detection ratio ----

TEST(JointDetectionRatio, ReferenceCases) {
    std::vector<double> uniform(100 * 100, 1e-4);
    std::vector<double> p(100, 0.05);
    for (int b = 0; b < 100; ++b) p[b] += 0.03 * std::sin(b);
    EXPECT_NEAR(joint_detection_ratio(p, p, uniform), 1.0, 1e-12);
    EXPECT_NEAR(joint_detection_ratio({1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0, 0.0, 0.0}), 4.0, 1e-15);
    EXPECT_THROW(joint_detection_ratio({0.0, 0.0}, {1.0, 0.0}, {0.25, 0.25, 0.25, 0.25}), Error);
    EXPECT_THROW(joint_detection_ratio({1.0, 0.0}, {1.0, 0.0}, {0.5, 0.0, 0.0, 0.0}), Error);
}

TEST(JointDetectionRatio, DiagonalSweepsAroundOne) {
    std::vector<double> p(100);
    for (int b = 0; b < 100; ++b) p[b] = 0.05 * (1.0 + 0.5 * std::cos(2.0 * M_PI * b / 20.0));
    double lo = 10.0, hi = 0.0;
    for (int offset = 0; offset < 20; ++offset) {
        std::vector<double> lambda = diagonal_lambda(100, offset);
        EXPECT_NEAR(std::accumulate(lambda.begin(), lambda.end(), 0.0), 1.0, 1e-12);
        double r = joint_detection_ratio(p, p, lambda);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    EXPECT_LT(lo, 1.0);
    EXPECT_GT(hi, 1.0);
    EXPECT_NEAR(hi, 1.125, 1e-12);
    EXPECT_NEAR(lo, 0.875, 1e-12);
}

TEST(JointDetectionRatio, EmpiricalRatioConvergesOnSimulation) {
    // 10^6 pairs, 20 ns sub-cycle on both sides, offset on a sub-cycle
    // multiple so the joint probability exceeds the product.
    SimConfig c = base_config(2.5e5, 11);
    c.offset_ns = 20.0;
    std::vector<double> profile(kCycleNs);
    for (int b = 0; b < kCycleNs; ++b) profile[b] = 0.3 * (1.0 + 0.8 * std::cos(2.0 * M_PI * b / 20.0));
    for (auto *o : {&c.alice, &c.bob}) {
        for (auto &p : o->profile) p = profile;
    }
    SimulatedExperiment e = simulate_experiment(c);
    const SimGroundTruth &t = e.truth;

    // Generating side: profiles with the mean switching loss.
    std::vector<double> effective = profile;
    for (int b = 0; b < kSwitchTimeNs; ++b) effective[b] *= 0.5;
    double generating = joint_detection_ratio(effective, effective, diagonal_lambda(kCycleNs, 20));
    EXPECT_GT(generating, 1.1);

    // Empirical side: lambda-hat from arrival bins, profiles from per-bin
    // detection fractions pooled over channels.
    std::vector<double> lambda(t.arrival_bins.size());
    for (size_t n = 0; n < lambda.size(); ++n) {
        lambda[n] = static_cast<double>(t.arrival_bins[n]) / static_cast<double>(t.pairs);
    }
    auto empirical_profile = [](const auto &arrived, const auto &detected) {
        std::vector<double> p(kCycleNs);
        for (int b = 0; b < kCycleNs; ++b) {
            double n = 0, d = 0;
            for (int ch = 0; ch < 4; ++ch) {
                n += static_cast<double>(arrived[ch][b]);
                d += static_cast<double>(detected[ch][b]);
            }
            p[b] = d / n;
        }
        return p;
    };
    std::vector<double> pa = empirical_profile(t.alice_arrived, t.alice_detected);
    std::vector<double> pb = empirical_profile(t.bob_arrived, t.bob_detected);
    EXPECT_NEAR(joint_detection_ratio(pa, pb, lambda) / generating, 1.0, 0.05);

    // Direct count ratio: joint detection fraction over the product of the
    // marginal fractions.
    double arrived = 0, joint = 0, det_a = 0, det_b = 0;
    for (int n = 0; n < 16; ++n) {
        arrived += static_cast<double>(t.joint_arrived[n]);
        joint += static_cast<double>(t.joint_detected[n]);
    }
    for (int ch = 0; ch < 4; ++ch) {
        det_a += std::accumulate(t.alice_detected[ch].begin(), t.alice_detected[ch].end(), 0.0);
        det_b += std::accumulate(t.bob_detected[ch].begin(), t.bob_detected[ch].end(), 0.0);
    }
    double direct = (joint / arrived) / ((det_a / arrived) * (det_b / arrived));
    EXPECT_NEAR(direct / generating, 1.0, 0.05);
}

// ---- Drift ----

TEST(Drift, OffsetScan) {
    double shift = drift_offset_scan(0, 0.055, 460.0) - drift_offset_scan(40, 0.055, 460.0 / 40.0);
    EXPECT_NEAR(shift, 25.3, 1e-9);
    EXPECT_NEAR(drift_offset_scan(40, 0.055, 460.0 / 40.0), -10.3, 1e-9);
    EXPECT_EQ(drift_offset_scan(17, 0.0, 11.5), 15.0);
    EXPECT_EQ(drift_offset_scan(0, 0.055, 11.5), 15.0);
    // Wraps into (-50, 50].
    EXPECT_NEAR(drift_offset_scan(1, 1.0, 70.0), 45.0, 1e-12);
    EXPECT_NEAR(drift_offset_scan(1, -1.0, 35.0), 50.0, 1e-12);
    EXPECT_THROW(drift_offset_scan(1, std::nan(""), 1.0), Error);
}

TEST(Drift, SimulatedClockDriftMovesTheDiagonal) {
    SimConfig c = base_config(2.5e5, 12);
    c.offset_ns = 15.0;
    c.clock_drift_ns_per_s = 4.0;  // 20 ns over the 5 s run
    SimulatedExperiment e = simulate_experiment(c);
    CoincidenceSet s = match_coincidences(e.alice, e.bob, -5.0, 30.0);
    std::vector<int64_t> early(61, 0), late(61, 0);
    for (const Coincidence &m : s.pairs) {
        int64_t ta = e.alice.events[m.alice_index].time_ns;
        int64_t d = e.bob.events[m.bob_index].time_ns - ta;
        if (d < -15 || d > 45) continue;
        if (ta < 1e9) {
            ++early[d + 15];
        } else if (ta > 4e9) {
            ++late[d + 15];
        }
    }
    auto mode = [](const std::vector<int64_t> &h) {
        return static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin()) - 15;
    };
    EXPECT_NEAR(mode(early), 13, 2);
    EXPECT_NEAR(mode(late), -3, 2);
}

}  // namespace
}  // namespace eprb
