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

#include "eprb/io.h"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "eprb/error.h"
#include "eprb/statistics.h"

namespace eprb {

namespace {

const char *const kMetadataColumns[] = {"theta_over_pi", "window_ns", "delta_ns", "duration_ns"};

std::vector<std::string> split(const std::string &line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            out.push_back(line);
        }
    }
    return out;
}

double parse_double(const std::string &s, const std::string &what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        fail(ErrorKind::InvalidInput, "malformed number '" + s + "' in " + what);
    }
    return v;
}

int64_t parse_int(const std::string &s, const std::string &what) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        fail(ErrorKind::InvalidInput, "malformed integer '" + s + "' in " + what);
    }
    return v;
}

std::vector<std::string> count_columns() {
    std::vector<std::string> cols{"experiment_id"};
    for (const char *side : {"a", "b"}) {
        for (int s = 0; s < 2; ++s) {
            for (int r = 0; r < 2; ++r) {
                cols.push_back(std::string(side) + "_" + std::to_string(s) + std::to_string(r));
            }
        }
    }
    for (int c = 0; c < 16; ++c) {
        cols.push_back("c_" + std::to_string((c >> 3) & 1) + std::to_string((c >> 2) & 1) +
                       std::to_string((c >> 1) & 1) + std::to_string(c & 1));
    }
    return cols;
}

double rounded(double v) {
    return std::stod(format_number(v, 6));
}

Json rounded_array(const std::vector<double> &v) {
    Json out = Json::array();
    for (double x : v) {
        out.push_back(rounded(x));
    }
    return out;
}

}  // namespace

std::string format_number(double value, int digits) {
    if (!std::isfinite(value)) {
        fail(ErrorKind::InvalidInput, "cannot format a non-finite number");
    }
    if (value == std::floor(value) && std::abs(value) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", value == 0.0 ? 0.0 : value);
        return buf;
    }
    // Shortest representation that survives the requested precision.
    char buf[40];
    for (int p = 1; p <= digits; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, value);
        if (p == digits || std::stod(buf) == value) {
            break;
        }
    }
    return buf;
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fail(ErrorKind::Io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot rename onto " + path.string());
    }
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(const std::string &data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::Internal, "SHA-256 failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int n = 0; n < len; ++n) {
        out.push_back(hex[digest[n] >> 4]);
        out.push_back(hex[digest[n] & 15]);
    }
    return out;
}

std::string event_log_csv(const EventLog &log) {
    std::string out = "time_ns,setting,result\n";
    for (const DetectionEvent &e : log.events) {
        out += std::to_string(e.time_ns) + ',' + std::to_string(e.setting) + ',' + std::to_string(e.result) + '\n';
    }
    return out;
}

EventLog parse_event_log_csv(const std::string &text) {
    std::vector<std::string> lines = lines_of(text);
    if (lines.empty() || lines[0] != "time_ns,setting,result") {
        fail(ErrorKind::InvalidInput, "event log must start with header time_ns,setting,result");
    }
    EventLog log;
    log.events.reserve(lines.size() - 1);
    for (size_t n = 1; n < lines.size(); ++n) {
        auto f = split(lines[n], ',');
        if (f.size() != 3) {
            fail(ErrorKind::InvalidInput, "event log line " + std::to_string(n + 1) + " needs 3 fields");
        }
        log.events.push_back({parse_int(f[0], "time_ns"), static_cast<int>(parse_int(f[1], "setting")),
                              static_cast<int>(parse_int(f[2], "result"))});
    }
    validate(log);
    return log;
}

std::string counts_csv(const std::vector<CountRow> &rows) {
    std::vector<std::string> cols = count_columns();
    bool has[4] = {false, false, false, false};
    for (const CountRow &r : rows) {
        has[0] |= r.theta_over_pi.has_value();
        has[1] |= r.window_ns.has_value();
        has[2] |= r.delta_ns.has_value();
        has[3] |= r.duration_ns.has_value();
    }
    std::string out;
    for (size_t n = 0; n < cols.size(); ++n) {
        out += (n ? "," : "") + cols[n];
    }
    for (int m = 0; m < 4; ++m) {
        if (has[m]) {
            out += std::string(",") + kMetadataColumns[m];
        }
    }
    out += '\n';
    for (const CountRow &r : rows) {
        if (r.table.experiment_id.find_first_of(",\n\"") != std::string::npos) {
            fail(ErrorKind::InvalidInput, "experiment id may not contain commas, quotes or newlines");
        }
        out += r.table.experiment_id;
        for (double v : r.table.a) {
            out += ',' + format_number(v);
        }
        for (double v : r.table.b) {
            out += ',' + format_number(v);
        }
        for (double v : r.table.c) {
            out += ',' + format_number(v);
        }
        const std::optional<double> *meta[4] = {&r.theta_over_pi, &r.window_ns, &r.delta_ns, &r.duration_ns};
        for (int m = 0; m < 4; ++m) {
            if (has[m]) {
                out += ',';
                if (meta[m]->has_value()) {
                    out += format_number(**meta[m]);
                }
            }
        }
        out += '\n';
    }
    return out;
}

std::vector<CountRow> parse_counts_csv(const std::string &text) {
    std::vector<std::string> lines = lines_of(text);
    if (lines.empty()) {
        fail(ErrorKind::InvalidInput, "counts file is empty");
    }
    std::vector<std::string> header = split(lines[0], ',');
    std::vector<std::string> expected = count_columns();
    if (header.size() < expected.size() || !std::equal(expected.begin(), expected.end(), header.begin())) {
        fail(ErrorKind::InvalidInput, "counts header must start with experiment_id, a_00..a_11, b_00..b_11, "
                                      "c_0000..c_1111");
    }
    std::vector<int> meta_slot;
    for (size_t n = expected.size(); n < header.size(); ++n) {
        int slot = -1;
        for (int m = 0; m < 4; ++m) {
            if (header[n] == kMetadataColumns[m]) {
                slot = m;
            }
        }
        if (slot < 0) {
            fail(ErrorKind::InvalidInput, "unknown counts column '" + header[n] + "'");
        }
        meta_slot.push_back(slot);
    }
    std::vector<CountRow> rows;
    for (size_t n = 1; n < lines.size(); ++n) {
        auto f = split(lines[n], ',');
        if (f.size() != header.size()) {
            fail(ErrorKind::InvalidInput, "counts line " + std::to_string(n + 1) + " has " +
                                              std::to_string(f.size()) + " fields, header has " +
                                              std::to_string(header.size()));
        }
        CountRow row;
        row.table.experiment_id = f[0];
        for (int k = 0; k < 24; ++k) {
            double v = parse_double(f[1 + k], expected[1 + k]);
            if (v < 0.0) {
                fail(ErrorKind::InvalidInput, "negative count in column " + expected[1 + k]);
            }
            if (k < 4) {
                row.table.a[k] = v;
            } else if (k < 8) {
                row.table.b[k - 4] = v;
            } else {
                row.table.c[k - 8] = v;
            }
        }
        for (size_t m = 0; m < meta_slot.size(); ++m) {
            const std::string &cell = f[expected.size() + m];
            if (cell.empty()) {
                continue;
            }
            double v = parse_double(cell, kMetadataColumns[meta_slot[m]]);
            std::optional<double> *dst[4] = {&row.theta_over_pi, &row.window_ns, &row.delta_ns, &row.duration_ns};
            *dst[meta_slot[m]] = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Json density_to_json(const DensityMatrix &rho) {
    Json out = Json::array();
    for (int r = 0; r < 4; ++r) {
        Json row = Json::array();
        for (int c = 0; c < 4; ++c) {
            row.push_back(Json::array({rounded(rho.matrix()(r, c).real()), rounded(rho.matrix()(r, c).imag())}));
        }
        out.push_back(row);
    }
    return out;
}

DensityMatrix density_from_json(const Json &j) {
    if (!j.is_array() || j.size() != 4) {
        fail(ErrorKind::InvalidInput, "density matrix JSON must be a 4 x 4 array of [re, im]");
    }
    Matrix4c m;
    for (int r = 0; r < 4; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) {
            fail(ErrorKind::InvalidInput, "density matrix JSON must be a 4 x 4 array of [re, im]");
        }
        for (int c = 0; c < 4; ++c) {
            const Json &e = j[r][c];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                fail(ErrorKind::InvalidInput, "density matrix entries must be [re, im] numbers");
            }
            m(r, c) = {e[0].get<double>(), e[1].get<double>()};
        }
    }
    return DensityMatrix::from_matrix(m);
}

Json ground_truth_to_json(const SimGroundTruth &truth) {
    Json j;
    j["pairs"] = truth.pairs;
    j["joint_arrived"] = truth.joint_arrived;
    j["joint_detected"] = truth.joint_detected;
    j["alice_arrived"] = truth.alice_arrived;
    j["alice_detected"] = truth.alice_detected;
    j["bob_arrived"] = truth.bob_arrived;
    j["bob_detected"] = truth.bob_detected;
    j["alice_pair"] = truth.alice_pair;
    j["bob_pair"] = truth.bob_pair;
    return j;
}

CoefficientsOfVariation cv_from_json(const Json &j) {
    if (!j.is_object()) {
        fail(ErrorKind::Config, "coefficient-of-variation file must be a JSON object");
    }
    CoefficientsOfVariation cv;
    for (const auto &[key, value] : j.items()) {
        std::vector<double> *dst = key == "cva" ? &cv.cva : key == "cvb" ? &cv.cvb : key == "cvc" ? &cv.cvc : nullptr;
        if (dst == nullptr) {
            fail(ErrorKind::Config, "unknown key '" + key + "' in coefficient-of-variation file");
        }
        if (!value.is_array()) {
            fail(ErrorKind::Config, "'" + key + "' must be an array of numbers");
        }
        for (const Json &v : value) {
            if (!v.is_number()) {
                fail(ErrorKind::Config, "'" + key + "' must be an array of numbers");
            }
            dst->push_back(v.get<double>());
        }
    }
    if (cv.cva.size() != 4 || cv.cvb.size() != 4 || cv.cvc.size() != 16) {
        fail(ErrorKind::Config, "coefficient-of-variation file needs cva[4], cvb[4], cvc[16]");
    }
    return cv;
}

Json fit_result_to_json(const FitResult &result, const FitProblem &problem) {
    const FitStatistics &st = result.statistics;
    Json j;
    j["model"] = to_int(result.model);
    j["statistic"] = st.uses_variances ? "Xrev" : "X";
    j["x"] = rounded(st.x);
    j["df"] = st.df;
    j["z"] = rounded(st.z);
    j["accepted"] = st.accepted;
    j["converged"] = result.converged;
    j["evaluations"] = result.evaluations;
    j["seed"] = problem.config.seed;
    j["low_count_channels"] = st.low_count_channels;
    Json restarts = Json::array();
    for (const RestartSummary &r : result.restarts) {
        restarts.push_back({{"seed", r.seed},
                            {"value", rounded(r.value)},
                            {"evaluations", r.evaluations},
                            {"converged", r.converged}});
    }
    j["restarts"] = restarts;
    j["rho"] = density_to_json(result.rho);
    const FilterParams &p = result.params;
    Json params;
    if (p.model == ModelId::One || p.model == ModelId::Two) {
        params["pairs"] = rounded(p.pairs);
    }
    params["pa"] = rounded_array(p.pa);
    params["pb"] = rounded_array(p.pb);
    if (!p.pc.empty()) {
        params["pc"] = rounded_array(p.pc);
    }
    if (p.model == ModelId::Four) {
        params["cva"] = rounded_array(p.cva);
        params["cvb"] = rounded_array(p.cvb);
        params["cvc"] = rounded_array(p.cvc);
    }
    params["duration_ns"] = rounded(p.duration_ns);
    j["params"] = params;
    Json experiments = Json::array();
    for (size_t m = 0; m < problem.observed.size(); ++m) {
        Json e;
        e["experiment_id"] = problem.observed[m].experiment_id;
        e["theta_over_pi"] = rounded(problem.theta[m] / std::numbers::pi);
        Json channels = Json::array();
        for (int ch = 0; ch < kChannelsPerExperiment; ++ch) {
            ChannelValue v = channel_value(problem.observed[m], result.predictions[m], ch, st.uses_variances);
            channels.push_back({{"channel", channel_name(ch)},
                                {"observed", rounded(v.observed)},
                                {"predicted", rounded(v.predicted)},
                                {"variance", rounded(v.variance)}});
        }
        e["channels"] = channels;
        experiments.push_back(e);
    }
    j["experiments"] = experiments;
    return j;
}

std::string residuals_csv(const FitResult &result, const FitProblem &problem) {
    const FitStatistics &st = result.statistics;
    std::string out = "experiment_id,channel,observed,predicted,std_error,contribution\n";
    for (size_t m = 0; m < problem.observed.size(); ++m) {
        for (int ch = 0; ch < kChannelsPerExperiment; ++ch) {
            ChannelValue v = channel_value(problem.observed[m], result.predictions[m], ch, st.uses_variances);
            double contribution = st.contributions[m * kChannelsPerExperiment + ch];
            double std_error = std::sqrt(std::max(0.0, v.variance));
            out += problem.observed[m].experiment_id + ',' + channel_name(ch) + ',' + format_number(v.observed, 6) +
                   ',' + format_number(v.predicted, 6) + ',' + format_number(std_error, 6) + ',' +
                   format_number(contribution, 6) + '\n';
        }
    }
    return out;
}

}  // namespace eprb
