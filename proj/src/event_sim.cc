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

#include "eprb/event_sim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "eprb/error.h"
#include "eprb/seeding.h"

namespace eprb {

namespace {

int64_t floor_mod(int64_t x, int64_t m) {
    int64_t r = x % m;
    return r < 0 ? r + m : r;
}

int cycle_bin(double t, int64_t phase, int cycle) {
    return static_cast<int>(floor_mod(static_cast<int64_t>(std::floor(t)) - phase, cycle));
}

// Setting sequence of one observer. Queries must not go back in time.
class SettingTrack {
   public:
    SettingTrack(uint64_t seed, const SimConfig &config, int64_t phase)
        : seed_(seed),
          cycle_(config.cycle_ns),
          switch_time_(config.switch_time_ns),
          phase_(phase),
          periodic_(config.periodic_settings),
          rng_(seed),
          dwell_(1.0 / config.cycle_ns) {
        if (!periodic_) {
            // Start as if a boundary without a change lies far in the past.
            current_ = draw_bit();
            previous_ = current_;
            start_ = -std::numeric_limits<double>::infinity();
            next_ = static_cast<double>(phase_) + dwell_(rng_);
        }
    }

    struct State {
        int setting;
        bool suppressed;
    };

    State at(double t) {
        if (periodic_) {
            auto n = static_cast<int64_t>(std::floor((t - static_cast<double>(phase_)) / cycle_));
            int bit = periodic_bit(n);
            double since = t - static_cast<double>(phase_ + n * cycle_);
            return {bit, since < switch_time_ && bit != periodic_bit(n - 1)};
        }
        while (t >= next_) {
            start_ = next_;
            next_ += dwell_(rng_);
            previous_ = current_;
            current_ = draw_bit();
        }
        return {current_, t - start_ < switch_time_ && current_ != previous_};
    }

   private:
    int periodic_bit(int64_t n) const {
        return static_cast<int>(splitmix64(seed_ + static_cast<uint64_t>(n)) & 1U);
    }
    int draw_bit() {
        return static_cast<int>(rng_() & 1U);
    }

    uint64_t seed_;
    int cycle_;
    int switch_time_;
    int64_t phase_;
    bool periodic_;
    std::mt19937_64 rng_;
    std::exponential_distribution<double> dwell_;
    int current_ = 0;
    int previous_ = 0;
    double start_ = 0.0;
    double next_ = 0.0;
};

struct Pending {
    int64_t time;
    int setting;
    int result;
    int64_t pair;
    int bin;
};

double draw_delay(const DelayModel &d, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (d.tail_ns <= 0.0 || u(rng) < d.prompt_fraction) {
        return 0.0;
    }
    return std::exponential_distribution<double>(1.0 / d.tail_ns)(rng);
}

// Sorts by time keeping generation order among equal times, then drops all
// but the first event at each ns.
std::vector<Pending> settle(std::vector<Pending> pending) {
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending &x, const Pending &y) { return x.time < y.time; });
    auto last = std::unique(pending.begin(), pending.end(),
                            [](const Pending &x, const Pending &y) { return x.time == y.time; });
    pending.erase(last, pending.end());
    return pending;
}

void validate_observer(const ObserverConfig &o, int cycle, const char *who) {
    for (int ch = 0; ch < 4; ++ch) {
        if (static_cast<int>(o.profile[ch].size()) != cycle) {
            std::ostringstream out;
            out << who << " profile " << ch << " has " << o.profile[ch].size() << " bins, cycle has " << cycle;
            fail(ErrorKind::Config, out.str());
        }
        for (double p : o.profile[ch]) {
            if (!(p >= 0.0 && p <= 1.0)) {
                fail(ErrorKind::Config, std::string(who) + " profile values must lie in [0, 1]");
            }
        }
        const DelayModel &d = o.delay[ch];
        if (!(d.prompt_fraction >= 0.0 && d.prompt_fraction <= 1.0) || !(d.tail_ns >= 0.0) ||
            !std::isfinite(d.tail_ns)) {
            fail(ErrorKind::Config, std::string(who) + " delay needs prompt_fraction in [0, 1] and tail_ns >= 0");
        }
    }
    if (!(o.background_rate >= 0.0) || !std::isfinite(o.background_rate)) {
        fail(ErrorKind::Config, std::string(who) + " background_rate must be finite and >= 0");
    }
}

}  // namespace

void validate(const EventLog &log) {
    for (size_t n = 0; n < log.events.size(); ++n) {
        const DetectionEvent &e = log.events[n];
        if ((e.setting != 0 && e.setting != 1) || (e.result != 0 && e.result != 1)) {
            fail(ErrorKind::InvalidInput, "event setting and result must be 0 or 1");
        }
        if (n > 0 && e.time_ns <= log.events[n - 1].time_ns) {
            std::ostringstream out;
            out << "event log is not strictly increasing at index " << n;
            fail(ErrorKind::InvalidInput, out.str());
        }
    }
}

ObserverConfig flat_observer(const std::array<double, 4> &efficiency, int bins) {
    ObserverConfig o;
    for (int ch = 0; ch < 4; ++ch) {
        o.profile[ch].assign(bins, efficiency[ch]);
    }
    return o;
}

void validate(const SimConfig &c) {
    if (!(c.duration_ns > 0.0) || !std::isfinite(c.duration_ns)) {
        fail(ErrorKind::Config, "duration_ns must be positive");
    }
    if (!(c.pairs_per_quadrant >= 0.0) || !std::isfinite(c.pairs_per_quadrant)) {
        fail(ErrorKind::Config, "pairs_per_quadrant must be finite and >= 0");
    }
    if (c.cycle_ns <= 0) {
        fail(ErrorKind::Config, "cycle_ns must be positive");
    }
    if (c.switch_time_ns <= 0 || c.switch_time_ns >= c.cycle_ns) {
        fail(ErrorKind::Config, "switch_time_ns must lie strictly between 0 and cycle_ns");
    }
    validate_observer(c.alice, c.cycle_ns, "alice");
    validate_observer(c.bob, c.cycle_ns, "bob");
    if (!std::isfinite(c.offset_ns) || !std::isfinite(c.clock_drift_ns_per_s) || !std::isfinite(c.theta)) {
        fail(ErrorKind::Config, "offset, drift and theta must be finite");
    }
    if (!(c.window_ns >= 0.0)) {
        fail(ErrorKind::Config, "window_ns must be >= 0");
    }
}

SimulatedExperiment simulate_experiment(const SimConfig &config) {
    validate(config);
    const int cycle = config.cycle_ns;
    SimulatedExperiment out;
    SimGroundTruth &truth = out.truth;
    for (int ch = 0; ch < 4; ++ch) {
        truth.alice_arrived[ch].assign(cycle, 0);
        truth.alice_detected[ch].assign(cycle, 0);
        truth.bob_arrived[ch].assign(cycle, 0);
        truth.bob_detected[ch].assign(cycle, 0);
    }
    truth.arrival_bins.assign(static_cast<size_t>(cycle) * cycle, 0);

    // Outcome tables per quadrant (i, k): cumulative over (j, l).
    QuantumProbs q = quantum_probs(config.rho, geometry_for_experiment(config.theta));
    std::array<std::array<double, 4>, 4> cumulative{};
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < 2; ++k) {
            double acc = 0.0;
            for (int jl = 0; jl < 4; ++jl) {
                acc += std::max(0.0, q.qc[coincidence_index(i, jl >> 1, k, jl & 1)]);
                cumulative[2 * i + k][jl] = acc;
            }
            for (double &v : cumulative[2 * i + k]) {
                v /= acc;
            }
        }
    }

    const uint64_t seed = config.seed;
    SettingTrack track_a(derive_seed(seed, "settings-alice"), config, config.alice.phase_ns);
    SettingTrack track_b(derive_seed(seed, "settings-bob"), config, config.bob.phase_ns);
    std::mt19937_64 pair_rng(derive_seed(seed, "pairs"));
    std::mt19937_64 delay_rng(derive_seed(seed, "delays"));
    std::mt19937_64 bg_rng_a(derive_seed(seed, "background-alice"));
    std::mt19937_64 bg_rng_b(derive_seed(seed, "background-bob"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double drift_per_ns = config.clock_drift_ns_per_s * 1e-9;
    auto bob_clock = [&](double t) { return t + config.offset_ns - drift_per_ns * t; };

    std::vector<Pending> pending_a;
    std::vector<Pending> pending_b;
    std::vector<uint8_t> pair_channel;

    // Background processes are merged in time order with the pairs so the
    // setting tracks are queried monotonically.
    auto make_background = [&](const ObserverConfig &o, std::mt19937_64 &rng) {
        std::vector<double> times;
        if (o.background_rate > 0.0) {
            std::exponential_distribution<double> gap(o.background_rate);
            for (double t = gap(rng); t < config.duration_ns; t += gap(rng)) {
                times.push_back(t);
            }
        }
        return times;
    };
    std::vector<double> bg_a = make_background(config.alice, bg_rng_a);
    std::vector<double> bg_b = make_background(config.bob, bg_rng_b);
    size_t next_bg_a = 0;
    size_t next_bg_b = 0;
    auto flush_background = [&](double t_alice, double t_bob) {
        for (; next_bg_a < bg_a.size() && bg_a[next_bg_a] <= t_alice; ++next_bg_a) {
            double t = bg_a[next_bg_a];
            auto st = track_a.at(t);
            int result = static_cast<int>(bg_rng_a() & 1U);
            if (!st.suppressed) {
                pending_a.push_back({std::llround(t), st.setting, result, -1, 0});
            }
        }
        for (; next_bg_b < bg_b.size() && bob_clock(bg_b[next_bg_b]) <= t_bob; ++next_bg_b) {
            double t = bob_clock(bg_b[next_bg_b]);
            auto st = track_b.at(t);
            int result = static_cast<int>(bg_rng_b() & 1U);
            if (!st.suppressed) {
                pending_b.push_back({std::llround(t), st.setting, result, -1, 0});
            }
        }
    };

    const double total_rate = 4.0 * config.pairs_per_quadrant / config.duration_ns;
    if (total_rate > 0.0) {
        std::exponential_distribution<double> gap(total_rate);
        for (double t = gap(pair_rng); t < config.duration_ns; t += gap(pair_rng)) {
            double tb = bob_clock(t);
            flush_background(t, tb);
            auto sa = track_a.at(t);
            auto sb = track_b.at(tb);
            const int i = sa.setting;
            const int k = sb.setting;
            const auto &cum = cumulative[2 * i + k];
            double u = unit(pair_rng);
            int jl = 0;
            while (jl < 3 && u >= cum[jl]) {
                ++jl;
            }
            const int j = jl >> 1;
            const int l = jl & 1;
            const int ch_a = single_index(i, j);
            const int ch_b = single_index(k, l);
            const int alpha = cycle_bin(t, config.alice.phase_ns, cycle);
            const int beta = cycle_bin(tb, config.bob.phase_ns, cycle);
            const int64_t id = truth.pairs++;
            pair_channel.push_back(static_cast<uint8_t>(coincidence_index(i, j, k, l)));
            ++truth.joint_arrived[coincidence_index(i, j, k, l)];
            ++truth.alice_arrived[ch_a][alpha];
            ++truth.bob_arrived[ch_b][beta];
            ++truth.arrival_bins[static_cast<size_t>(alpha) * cycle + beta];

            bool det_a = !sa.suppressed && unit(pair_rng) < config.alice.profile[ch_a][alpha];
            bool det_b = !sb.suppressed && unit(pair_rng) < config.bob.profile[ch_b][beta];
            if (det_a) {
                double d = draw_delay(config.alice.delay[ch_a], delay_rng);
                pending_a.push_back({std::llround(t + d), i, j, id, alpha});
            }
            if (det_b) {
                double d = draw_delay(config.bob.delay[ch_b], delay_rng);
                pending_b.push_back({std::llround(tb + d), k, l, id, beta});
            }
        }
    }
    flush_background(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());

    std::vector<uint8_t> logged(pair_channel.size(), 0);
    auto emit = [&](std::vector<Pending> pending, EventLog &log, std::vector<int64_t> &ids,
                    std::array<std::vector<int64_t>, 4> &detected, uint8_t flag) {
        pending = settle(std::move(pending));
        log.events.reserve(pending.size());
        ids.reserve(pending.size());
        for (const Pending &p : pending) {
            log.events.push_back({p.time, p.setting, p.result});
            ids.push_back(p.pair);
            if (p.pair >= 0) {
                ++detected[single_index(p.setting, p.result)][p.bin];
                logged[p.pair] |= flag;
            }
        }
    };
    emit(std::move(pending_a), out.alice, truth.alice_pair, truth.alice_detected, 1);
    emit(std::move(pending_b), out.bob, truth.bob_pair, truth.bob_detected, 2);
    for (size_t id = 0; id < logged.size(); ++id) {
        if (logged[id] == 3) {
            ++truth.joint_detected[pair_channel[id]];
        }
    }
    return out;
}

double acceptance_width(double window_ns) {
    return 2.0 * std::floor(window_ns) + 1.0;
}

CoincidenceSet match_coincidences(const EventLog &alice, const EventLog &bob, double delta_ns, double window_ns) {
    validate(alice);
    validate(bob);
    if (!(window_ns >= 0.0) || !std::isfinite(window_ns) || !std::isfinite(delta_ns)) {
        fail(ErrorKind::InvalidInput, "window must be finite and >= 0, delta finite");
    }
    struct Candidate {
        double distance;
        int64_t sum;
        size_t a;
        size_t b;
    };
    std::vector<Candidate> candidates;
    const auto &ea = alice.events;
    const auto &eb = bob.events;
    size_t lo = 0;
    for (size_t a = 0; a < ea.size(); ++a) {
        auto diff = [&](size_t b) { return static_cast<double>(eb[b].time_ns - ea[a].time_ns) + delta_ns; };
        while (lo < eb.size() && diff(lo) < -window_ns) {
            ++lo;
        }
        for (size_t b = lo; b < eb.size() && diff(b) <= window_ns; ++b) {
            candidates.push_back({std::abs(diff(b)), ea[a].time_ns + eb[b].time_ns, a, b});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate &x, const Candidate &y) {
        if (x.distance != y.distance) {
            return x.distance < y.distance;
        }
        if (x.sum != y.sum) {
            return x.sum < y.sum;
        }
        return x.a < y.a;
    });
    std::vector<uint8_t> used_a(ea.size(), 0);
    std::vector<uint8_t> used_b(eb.size(), 0);
    CoincidenceSet out;
    for (const Candidate &c : candidates) {
        if (!used_a[c.a] && !used_b[c.b]) {
            used_a[c.a] = 1;
            used_b[c.b] = 1;
            out.pairs.push_back({c.a, c.b});
        }
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const Coincidence &x, const Coincidence &y) { return x.alice_index < y.alice_index; });
    return out;
}

BinHistogram bin_histogram(const EventLog &log, int cycle_ns) {
    if (cycle_ns <= 0) {
        fail(ErrorKind::InvalidInput, "cycle must be positive");
    }
    BinHistogram h;
    for (auto &v : h) {
        v.assign(cycle_ns, 0);
    }
    for (const DetectionEvent &e : log.events) {
        ++h[single_index(e.setting, e.result)][floor_mod(e.time_ns, cycle_ns)];
    }
    return h;
}

BinMatrix coincidence_bin_matrix(const CoincidenceSet &coincidences, const EventLog &alice, const EventLog &bob,
                                 int cycle_ns) {
    if (cycle_ns <= 0) {
        fail(ErrorKind::InvalidInput, "cycle must be positive");
    }
    BinMatrix m;
    for (auto &v : m) {
        v.assign(static_cast<size_t>(cycle_ns) * cycle_ns, 0);
    }
    for (const Coincidence &c : coincidences.pairs) {
        if (c.alice_index >= alice.events.size() || c.bob_index >= bob.events.size()) {
            fail(ErrorKind::InvalidInput, "coincidence index out of range");
        }
        const DetectionEvent &a = alice.events[c.alice_index];
        const DetectionEvent &b = bob.events[c.bob_index];
        size_t alpha = floor_mod(a.time_ns, cycle_ns);
        size_t beta = floor_mod(b.time_ns, cycle_ns);
        ++m[2 * a.setting + b.setting][alpha * cycle_ns + beta];
    }
    return m;
}

double diagonal_fraction(const std::vector<int64_t> &matrix, int cycle_ns, int offset, int spread) {
    int64_t total = 0;
    int64_t near = 0;
    for (int alpha = 0; alpha < cycle_ns; ++alpha) {
        for (int beta = 0; beta < cycle_ns; ++beta) {
            int64_t v = matrix[static_cast<size_t>(alpha) * cycle_ns + beta];
            total += v;
            int64_t d = floor_mod(beta - alpha - offset, cycle_ns);
            if (d <= spread || d >= cycle_ns - spread) {
                near += v;
            }
        }
    }
    return total > 0 ? static_cast<double>(near) / static_cast<double>(total) : 0.0;
}

ZeroTimeShift reconcile_zero_times(const std::vector<double> &hist_a, const std::vector<double> &hist_b) {
    const size_t n = hist_a.size();
    if (n == 0 || hist_b.size() != n) {
        fail(ErrorKind::InvalidInput, "histograms must be non-empty and of equal length");
    }
    auto centered = [n](const std::vector<double> &h) {
        double mean = std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(n);
        std::vector<double> c(n);
        double ss = 0.0;
        for (size_t x = 0; x < n; ++x) {
            c[x] = h[x] - mean;
            ss += c[x] * c[x];
        }
        if (!(ss > 0.0)) {
            fail(ErrorKind::DegenerateInput, "constant histogram has undefined correlation");
        }
        return std::make_pair(c, std::sqrt(ss));
    };
    auto [ca, na] = centered(hist_a);
    auto [cb, nb] = centered(hist_b);
    ZeroTimeShift best{0, -std::numeric_limits<double>::infinity()};
    for (size_t s = 0; s < n; s += kZeroTimeStepNs) {
        double dot = 0.0;
        for (size_t x = 0; x < n; ++x) {
            dot += ca[x] * cb[(x + s) % n];
        }
        double r = dot / (na * nb);
        if (r > best.correlation) {
            best = {static_cast<int>(s), r};
        }
    }
    return best;
}

double joint_detection_ratio(const std::vector<double> &pa, const std::vector<double> &pb,
                             const std::vector<double> &lambda) {
    const size_t n = pa.size();
    if (n == 0 || pb.size() != n || lambda.size() != n * n) {
        fail(ErrorKind::InvalidInput, "profiles need equal length n and lambda n*n entries");
    }
    for (size_t x = 0; x < n; ++x) {
        if (!(pa[x] >= 0.0 && pa[x] <= 1.0) || !(pb[x] >= 0.0 && pb[x] <= 1.0)) {
            fail(ErrorKind::InvalidInput, "profile values must lie in [0, 1]");
        }
    }
    double total = 0.0;
    for (double v : lambda) {
        if (!(v >= 0.0)) {
            fail(ErrorKind::InvalidInput, "lambda must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        fail(ErrorKind::InvalidInput, "lambda must sum to 1");
    }
    double mean_a = std::accumulate(pa.begin(), pa.end(), 0.0) / static_cast<double>(n);
    double mean_b = std::accumulate(pb.begin(), pb.end(), 0.0) / static_cast<double>(n);
    if (!(mean_a > 0.0) || !(mean_b > 0.0)) {
        fail(ErrorKind::DegenerateInput, "profile mean is zero");
    }
    double joint = 0.0;
    for (size_t alpha = 0; alpha < n; ++alpha) {
        for (size_t beta = 0; beta < n; ++beta) {
            joint += pa[alpha] * pb[beta] * lambda[alpha * n + beta];
        }
    }
    return joint / (mean_a * mean_b);
}

std::vector<double> diagonal_lambda(int bins, int offset) {
    if (bins <= 0) {
        fail(ErrorKind::InvalidInput, "bins must be positive");
    }
    std::vector<double> lambda(static_cast<size_t>(bins) * bins, 0.0);
    for (int alpha = 0; alpha < bins; ++alpha) {
        lambda[static_cast<size_t>(alpha) * bins + floor_mod(alpha + offset, bins)] = 1.0 / bins;
    }
    return lambda;
}

double drift_offset_scan(int experiment_index, double drift_ns_per_s, double gap_s, double initial_offset_ns,
                         double cycle_ns) {
    if (!std::isfinite(drift_ns_per_s) || !std::isfinite(gap_s) || !std::isfinite(initial_offset_ns) ||
        !(cycle_ns > 0.0)) {
        fail(ErrorKind::InvalidInput, "drift, gap and offset must be finite, cycle positive");
    }
    double v = initial_offset_ns - drift_ns_per_s * gap_s * experiment_index;
    return v - cycle_ns * std::ceil((v - cycle_ns / 2) / cycle_ns);
}

CountTable tabulate_counts(const EventLog &alice, const EventLog &bob, const CoincidenceSet &coincidences,
                           const std::string &experiment_id) {
    CountTable t;
    t.experiment_id = experiment_id;
    for (const DetectionEvent &e : alice.events) {
        t.a[single_index(e.setting, e.result)] += 1;
    }
    for (const DetectionEvent &e : bob.events) {
        t.b[single_index(e.setting, e.result)] += 1;
    }
    for (const Coincidence &c : coincidences.pairs) {
        if (c.alice_index >= alice.events.size() || c.bob_index >= bob.events.size()) {
            fail(ErrorKind::InvalidInput, "coincidence index out of range");
        }
        const DetectionEvent &a = alice.events[c.alice_index];
        const DetectionEvent &b = bob.events[c.bob_index];
        t.c[coincidence_index(a.setting, a.result, b.setting, b.result)] += 1;
    }
    return t;
}

}  // namespace eprb
