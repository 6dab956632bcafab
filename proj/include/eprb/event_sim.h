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

#ifndef EPRB_EVENT_SIM_H
#define EPRB_EVENT_SIM_H

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eprb/count_model.h"
#include "eprb/quantum.h"

namespace eprb {

inline constexpr int kCycleNs = 100;
inline constexpr int kSwitchTimeNs = 14;
inline constexpr int kZeroTimeStepNs = 20;

struct DetectionEvent {
    int64_t time_ns = 0;
    int setting = 0;
    int result = 0;
};

/// One observer's detections, strictly increasing in time.
struct EventLog {
    std::vector<DetectionEvent> events;
};

/// Throws InvalidInput unless times strictly increase and every setting
/// and result is 0 or 1.
void validate(const EventLog &log);

/// Detection delay: zero with probability prompt_fraction, otherwise
/// exponential with mean tail_ns.
struct DelayModel {
    double prompt_fraction = 1.0;
    double tail_ns = 0.0;
};

struct ObserverConfig {
    /// Detection probability per (setting, result) channel, one entry per
    /// 1 ns bin of the cycle.
    std::array<std::vector<double>, 4> profile;
    std::array<DelayModel, 4> delay;
    /// Position of the observer's cycle start relative to its clock zero.
    int64_t phase_ns = 0;
    /// Uncorrelated detections (dark counts), per ns.
    double background_rate = 0.0;
};

/// Flat profile of `bins` entries per channel with the given efficiencies.
ObserverConfig flat_observer(const std::array<double, 4> &efficiency, int bins = kCycleNs);

struct SimConfig {
    double duration_ns = kDefaultDurationNs;
    /// Expected pairs per quadrant; the total pair count is Poisson with
    /// mean 4 * pairs_per_quadrant.
    double pairs_per_quadrant = 0.0;
    int cycle_ns = kCycleNs;
    int switch_time_ns = kSwitchTimeNs;
    /// Settings change only at cycle boundaries when true; otherwise
    /// boundaries are Poisson with mean spacing cycle_ns.
    bool periodic_settings = true;
    ObserverConfig alice;
    ObserverConfig bob;
    /// Bob's clock minus Alice's clock at time zero.
    double offset_ns = 15.0;
    /// Rate at which Alice's clock gains on Bob's.
    double clock_drift_ns_per_s = 0.0;
    /// Coincidence window recorded alongside the logs for tabulation.
    double window_ns = kDefaultWindowNs;
    DensityMatrix rho = singlet_state();
    double theta = 0.0;
    uint64_t seed = 0;
};

/// Throws Config on a malformed configuration (profile length differing
/// from cycle_ns, probabilities outside [0, 1], switch_time outside
/// (0, cycle), non-positive duration, negative rates).
void validate(const SimConfig &config);

/// Audit record of one simulated experiment. Channel arrays use
/// single_index / coincidence_index; per-bin arrays have cycle_ns entries.
struct SimGroundTruth {
    int64_t pairs = 0;
    /// Pair id of each logged event, -1 for background.
    std::vector<int64_t> alice_pair;
    std::vector<int64_t> bob_pair;
    /// Pair photons reaching each channel / logged from it, by arrival bin.
    std::array<std::vector<int64_t>, 4> alice_arrived;
    std::array<std::vector<int64_t>, 4> alice_detected;
    std::array<std::vector<int64_t>, 4> bob_arrived;
    std::array<std::vector<int64_t>, 4> bob_detected;
    /// Pairs per joint channel, and those logged on both sides.
    std::array<int64_t, 16> joint_arrived{};
    std::array<int64_t, 16> joint_detected{};
    /// Pair arrival bins (alpha, beta), row-major cycle x cycle.
    std::vector<int64_t> arrival_bins;
};

struct SimulatedExperiment {
    EventLog alice;
    EventLog bob;
    SimGroundTruth truth;
};

/// Deterministic in config.seed. Times are rounded to integer ns; a
/// detection that lands on an occupied ns is dropped.
SimulatedExperiment simulate_experiment(const SimConfig &config);

struct Coincidence {
    size_t alice_index;
    size_t bob_index;
};

struct CoincidenceSet {
    std::vector<Coincidence> pairs;
};

/// Accepts (a, b) when |t_b - (t_a - delta)| <= window and pairs accepted
/// candidates greedily, nearest first, so no event is used twice. Ties
/// break on t_a + t_b, which keeps the result unchanged when the logs swap
/// roles and delta changes sign. Output is sorted by alice_index.
CoincidenceSet match_coincidences(const EventLog &alice, const EventLog &bob, double delta_ns, double window_ns);

/// Number of distinct integer differences accepted by a window of
/// half-width w: 2 floor(w) + 1.
double acceptance_width(double window_ns);

/// Counts per channel over time mod cycle; [channel][bin].
using BinHistogram = std::array<std::vector<int64_t>, 4>;
BinHistogram bin_histogram(const EventLog &log, int cycle_ns = kCycleNs);

/// Coincidence counts over (alpha, beta) = (t_a mod cycle, t_b mod cycle)
/// for each quadrant (i, k) at index 2i + k; row-major cycle x cycle.
using BinMatrix = std::array<std::vector<int64_t>, 4>;
BinMatrix coincidence_bin_matrix(const CoincidenceSet &coincidences, const EventLog &alice, const EventLog &bob,
                                 int cycle_ns = kCycleNs);

/// Fraction of a quadrant's mass on the diagonals (beta - alpha) mod cycle
/// within `spread` of `offset`.
double diagonal_fraction(const std::vector<int64_t> &matrix, int cycle_ns, int offset, int spread);

struct ZeroTimeShift {
    int shift = 0;
    double correlation = 0.0;
};

/// The circular shift s, a multiple of 20 below the histogram length, that
/// maximizes the Pearson correlation of hist_a[x] with hist_b[(x + s) mod n].
/// Throws DegenerateInput when either histogram is constant.
ZeroTimeShift reconcile_zero_times(const std::vector<double> &hist_a, const std::vector<double> &hist_b);

/// sum pa(alpha) pb(beta) lambda(alpha, beta) over the product of the
/// profile means. lambda is row-major n x n over (alpha, beta) and must sum
/// to 1. Throws DegenerateInput when a profile mean is zero.
double joint_detection_ratio(const std::vector<double> &pa, const std::vector<double> &pb,
                             const std::vector<double> &lambda);

/// lambda = 1/n where (beta - alpha) mod n == offset mod n, else 0.
std::vector<double> diagonal_lambda(int bins, int offset);

/// offset - drift * index * gap, wrapped into (-cycle/2, cycle/2].
double drift_offset_scan(int experiment_index, double drift_ns_per_s, double gap_s, double initial_offset_ns = 15.0,
                         double cycle_ns = kCycleNs);

/// Singles by (setting, result) and coincidences by joint labels.
CountTable tabulate_counts(const EventLog &alice, const EventLog &bob, const CoincidenceSet &coincidences,
                           const std::string &experiment_id = "");

}  // namespace eprb

#endif
