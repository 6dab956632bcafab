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

#include "eprb/pipeline.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <set>

#include "eprb/seeding.h"
#include "eprb/statistics.h"

namespace eprb {

namespace {

// Reads typed keys from one JSON object and rejects any key not read.
class Section {
   public:
    Section(const Json &parent, const std::string &key, const std::string &full_name = "") : name_(full_name) {
        if (name_.empty()) {
            name_ = key;
        }
        if (parent.contains(key)) {
            obj_ = parent.at(key);
            present_ = true;
            if (!obj_.is_object()) {
                fail(ErrorKind::Config, "config section '" + name_ + "' must be an object");
            }
        }
    }

    template <typename T>
    void read(const char *key, T &dst) {
        seen_.insert(key);
        if (!present_ || !obj_.contains(key)) {
            return;
        }
        const Json &v = obj_.at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) {
                    throw std::invalid_argument("number expected");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) {
                    throw std::invalid_argument("boolean expected");
                }
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) {
                    throw std::invalid_argument("integer expected");
                }
            }
            dst = v.get<T>();
        } catch (const std::exception &e) {
            fail(ErrorKind::Config, "config key " + name_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void read_optional(const char *key, std::optional<T> &dst) {
        seen_.insert(key);
        if (!present_ || !obj_.contains(key) || obj_.at(key).is_null()) {
            return;
        }
        T value{};
        read(key, value);
        dst = value;
    }

    Section sub(const char *key) {
        seen_.insert(key);
        return Section(present_ ? obj_ : Json::object(), key, name_ + "." + key);
    }

    void finish() const {
        if (!present_) {
            return;
        }
        for (const auto &[key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                fail(ErrorKind::Config, "unknown config key " + name_ + "." + key);
            }
        }
    }

   private:
    std::string name_;
    Json obj_;
    bool present_ = false;
    std::set<std::string> seen_;
};

void read_observer(Section s, ObserverSettings &o) {
    s.read("efficiency", o.efficiency);
    s.read("subcycle_period_ns", o.subcycle_period_ns);
    s.read("subcycle_amplitude", o.subcycle_amplitude);
    s.read("delay_prompt_fraction", o.delay_prompt_fraction);
    s.read("delay_tail_ns", o.delay_tail_ns);
    s.read("phase_ns", o.phase_ns);
    s.read("background_rate_hz", o.background_rate_hz);
    s.finish();
}

Json observer_json(const ObserverSettings &o) {
    return {{"efficiency", o.efficiency},
            {"subcycle_period_ns", o.subcycle_period_ns},
            {"subcycle_amplitude", o.subcycle_amplitude},
            {"delay_prompt_fraction", o.delay_prompt_fraction},
            {"delay_tail_ns", o.delay_tail_ns},
            {"phase_ns", o.phase_ns},
            {"background_rate_hz", o.background_rate_hz}};
}

ObserverConfig observer_config(const ObserverSettings &o, int cycle) {
    if (!(o.subcycle_period_ns > 0.0)) {
        fail(ErrorKind::Config, "subcycle_period_ns must be positive");
    }
    ObserverConfig c;
    for (int ch = 0; ch < 4; ++ch) {
        c.profile[ch].resize(cycle);
        for (int bin = 0; bin < cycle; ++bin) {
            double shape = 1.0 + o.subcycle_amplitude * std::cos(2.0 * std::numbers::pi * bin / o.subcycle_period_ns);
            c.profile[ch][bin] = std::clamp(o.efficiency[ch] * shape, 0.0, 1.0);
        }
        c.delay[ch] = {o.delay_prompt_fraction[ch], o.delay_tail_ns[ch]};
    }
    c.phase_ns = o.phase_ns;
    c.background_rate = o.background_rate_hz * 1e-9;
    return c;
}

Json parse_json_text(const std::string &text, const std::string &what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorKind::InvalidInput, "malformed JSON in " + what + ": " + e.what());
    }
}

double require_number(const Json &j, const char *key, const std::string &what) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        fail(ErrorKind::InvalidInput, what + " lacks numeric '" + key + "'");
    }
    return j.at(key).get<double>();
}

std::string require_string(const Json &j, const char *key, const std::string &what) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        fail(ErrorKind::InvalidInput, what + " lacks string '" + key + "'");
    }
    return j.at(key).get<std::string>();
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DataInconsistency:
        case ErrorKind::DegenerateInput:
        case ErrorKind::DegeneratePrediction:
            return kExitDataInconsistency;
        case ErrorKind::InvalidInput:
        case ErrorKind::Config:
        case ErrorKind::Io:
        case ErrorKind::Internal:
            return kExitUsage;
    }
    return kExitUsage;
}

PipelineConfig parse_config(const Json &j) {
    if (!j.is_object()) {
        fail(ErrorKind::Config, "config must be a JSON object");
    }
    for (const auto &[key, value] : j.items()) {
        if (key != "simulate" && key != "tabulate" && key != "fit") {
            fail(ErrorKind::Config, "unknown config section '" + key + "'");
        }
    }
    PipelineConfig c;
    {
        SimulateSettings &s = c.simulate;
        Section sec(j, "simulate");
        sec.read("experiments", s.experiments);
        sec.read("seed", s.seed);
        sec.read("duration_ns", s.duration_ns);
        sec.read("pairs_per_quadrant", s.pairs_per_quadrant);
        sec.read("cycle_ns", s.cycle_ns);
        sec.read("switch_time_ns", s.switch_time_ns);
        sec.read("periodic_settings", s.periodic_settings);
        sec.read("visibility", s.visibility);
        sec.read("offset_ns", s.offset_ns);
        sec.read("clock_drift_ns_per_s", s.clock_drift_ns_per_s);
        sec.read("experiment_gap_s", s.experiment_gap_s);
        sec.read("window_ns", s.window_ns);
        read_observer(sec.sub("alice"), s.alice);
        read_observer(sec.sub("bob"), s.bob);
        sec.finish();
    }
    {
        Section sec(j, "tabulate");
        sec.read("window_ns", c.tabulate.window_ns);
        sec.read_optional("delta_ns", c.tabulate.delta_ns);
        sec.finish();
    }
    {
        FitSettings &f = c.fit;
        Section sec(j, "fit");
        sec.read("model", f.model);
        sec.read("restarts", f.config.restarts);
        sec.read("seed", f.config.seed);
        sec.read("max_evaluations", f.config.max_evaluations);
        sec.read("tolerance", f.config.tolerance);
        sec.read("stall_iterations", f.config.stall_iterations);
        sec.read("polish_evaluations", f.config.polish_evaluations);
        sec.read("refit_means", f.config.refit_means);
        sec.read("window_ns", f.window_ns);
        sec.read("duration_ns", f.duration_ns);
        sec.read_optional("cv_file", f.cv_file);
        sec.finish();
    }
    if (c.simulate.experiments < 1 || c.simulate.experiments > static_cast<int>(scan_series().size())) {
        fail(ErrorKind::Config, "simulate.experiments must be between 1 and 41");
    }
    if (!(c.simulate.visibility >= 0.0 && c.simulate.visibility <= 1.0)) {
        fail(ErrorKind::Config, "simulate.visibility must lie in [0, 1]");
    }
    if (c.fit.config.restarts < 1 || c.fit.config.max_evaluations < 1 || !(c.fit.config.tolerance > 0.0)) {
        fail(ErrorKind::Config, "fit.restarts, fit.max_evaluations and fit.tolerance must be positive");
    }
    model_from_int(c.fit.model);
    c.resolved = resolved_config(c);
    return c;
}

PipelineConfig load_config(const std::optional<fs::path> &path) {
    if (!path) {
        return parse_config(Json::object());
    }
    Json j;
    try {
        j = Json::parse(read_file(*path));
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorKind::Config, "config " + path->string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

Json resolved_config(const PipelineConfig &c) {
    const SimulateSettings &s = c.simulate;
    const FitSettings &f = c.fit;
    Json j;
    j["simulate"] = {{"experiments", s.experiments},
                     {"seed", s.seed},
                     {"duration_ns", s.duration_ns},
                     {"pairs_per_quadrant", s.pairs_per_quadrant},
                     {"cycle_ns", s.cycle_ns},
                     {"switch_time_ns", s.switch_time_ns},
                     {"periodic_settings", s.periodic_settings},
                     {"visibility", s.visibility},
                     {"offset_ns", s.offset_ns},
                     {"clock_drift_ns_per_s", s.clock_drift_ns_per_s},
                     {"experiment_gap_s", s.experiment_gap_s},
                     {"window_ns", s.window_ns},
                     {"alice", observer_json(s.alice)},
                     {"bob", observer_json(s.bob)}};
    j["tabulate"] = {{"window_ns", c.tabulate.window_ns},
                     {"delta_ns", c.tabulate.delta_ns ? Json(*c.tabulate.delta_ns) : Json()}};
    j["fit"] = {{"model", f.model},
                {"restarts", f.config.restarts},
                {"seed", f.config.seed},
                {"max_evaluations", f.config.max_evaluations},
                {"tolerance", f.config.tolerance},
                {"stall_iterations", f.config.stall_iterations},
                {"polish_evaluations", f.config.polish_evaluations},
                {"refit_means", f.config.refit_means},
                {"window_ns", f.window_ns},
                {"duration_ns", f.duration_ns},
                {"cv_file", f.cv_file ? Json(*f.cv_file) : Json()}};
    return j;
}

SimConfig experiment_sim_config(const SimulateSettings &s, int m) {
    const auto &series = scan_series();
    if (m < 0 || m >= static_cast<int>(series.size())) {
        fail(ErrorKind::Config, "experiment index out of range");
    }
    SimConfig c;
    c.duration_ns = s.duration_ns;
    c.pairs_per_quadrant = s.pairs_per_quadrant;
    c.cycle_ns = s.cycle_ns;
    c.switch_time_ns = s.switch_time_ns;
    c.periodic_settings = s.periodic_settings;
    c.alice = observer_config(s.alice, s.cycle_ns);
    c.bob = observer_config(s.bob, s.cycle_ns);
    c.offset_ns = drift_offset_scan(m, s.clock_drift_ns_per_s, s.experiment_gap_s, s.offset_ns, s.cycle_ns);
    c.clock_drift_ns_per_s = s.clock_drift_ns_per_s;
    c.window_ns = s.window_ns;
    c.rho = mix_states(singlet_state(), maximally_mixed_state(), s.visibility);
    c.theta = series[m].theta();
    c.seed = derive_seed(s.seed, "simulate", static_cast<uint64_t>(m));
    validate(c);
    return c;
}

SimulateReport cmd_simulate(const PipelineConfig &config, const fs::path &out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        fail(ErrorKind::Io, "cannot create " + out_dir.string());
    }
    const SimulateSettings &s = config.simulate;
    Json manifest;
    manifest["format"] = "eprb-events/1";
    manifest["root_seed"] = s.seed;
    manifest["config_hash"] = sha256_hex(config.resolved.dump());
    manifest["config"] = config.resolved;
    Json experiments = Json::array();
    for (int m = 0; m < s.experiments; ++m) {
        const ScanExperiment &e = scan_series()[m];
        SimConfig sc = experiment_sim_config(s, m);
        SimulatedExperiment sim = simulate_experiment(sc);
        const std::string alice_name = e.id + "_alice.csv";
        const std::string bob_name = e.id + "_bob.csv";
        const std::string truth_name = e.id + "_truth.json";
        std::string alice_csv = event_log_csv(sim.alice);
        std::string bob_csv = event_log_csv(sim.bob);
        std::string truth = ground_truth_to_json(sim.truth).dump() + "\n";
        write_file_atomic(out_dir / alice_name, alice_csv);
        write_file_atomic(out_dir / bob_name, bob_csv);
        write_file_atomic(out_dir / truth_name, truth);
        experiments.push_back({{"experiment_id", e.id},
                               {"theta_over_pi", e.theta_over_pi},
                               {"seed", sc.seed},
                               {"offset_ns", sc.offset_ns},
                               {"window_ns", sc.window_ns},
                               {"duration_ns", sc.duration_ns},
                               {"alice_log", alice_name},
                               {"bob_log", bob_name},
                               {"truth", truth_name},
                               {"sha256",
                                {{"alice_log", sha256_hex(alice_csv)},
                                 {"bob_log", sha256_hex(bob_csv)},
                                 {"truth", sha256_hex(truth)}}}});
    }
    manifest["experiments"] = experiments;
    SimulateReport report{out_dir / "manifest.json", s.experiments};
    write_file_atomic(report.manifest, manifest.dump(2) + "\n");
    return report;
}

std::vector<CountRow> cmd_tabulate(const PipelineConfig &config, const fs::path &event_dir,
                                   const TabulateOverrides &overrides, const fs::path &out_path) {
    const fs::path manifest_path = event_dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        fail(ErrorKind::Io, "missing " + manifest_path.string());
    }
    Json manifest = parse_json_text(read_file(manifest_path), manifest_path.string());
    if (!manifest.contains("experiments") || !manifest.at("experiments").is_array()) {
        fail(ErrorKind::InvalidInput, "manifest lacks an experiments array");
    }
    const double window = overrides.window_ns.value_or(config.tabulate.window_ns);
    std::vector<CountRow> rows;
    for (const Json &e : manifest.at("experiments")) {
        const std::string id = require_string(e, "experiment_id", "manifest entry");
        auto load = [&](const char *key) {
            fs::path p = event_dir / require_string(e, key, "manifest entry " + id);
            if (!fs::exists(p)) {
                fail(ErrorKind::Io, "missing event log " + p.string());
            }
            std::string text = read_file(p);
            if (e.contains("sha256") && e.at("sha256").contains(key) &&
                e.at("sha256").at(key).get<std::string>() != sha256_hex(text)) {
                fail(ErrorKind::DataInconsistency, p.string() + " does not match its manifest hash");
            }
            return parse_event_log_csv(text);
        };
        EventLog alice = load("alice_log");
        EventLog bob = load("bob_log");
        double delta = overrides.delta_ns ? *overrides.delta_ns
                       : config.tabulate.delta_ns
                           ? *config.tabulate.delta_ns
                           : -require_number(e, "offset_ns", "manifest entry " + id);
        CoincidenceSet matched = match_coincidences(alice, bob, delta, window);
        CountRow row;
        row.table = tabulate_counts(alice, bob, matched, id);
        row.theta_over_pi = require_number(e, "theta_over_pi", "manifest entry " + id);
        row.window_ns = window;
        row.delta_ns = delta;
        if (e.contains("duration_ns")) {
            row.duration_ns = require_number(e, "duration_ns", "manifest entry " + id);
        }
        if (alice.events.empty() && bob.events.empty()) {
            std::cerr << "warning: " << id << " has no detections; its counts are all zero\n";
        }
        rows.push_back(std::move(row));
    }
    write_file_atomic(out_path, counts_csv(rows));
    return rows;
}

FitProblem fit_problem_from_counts(const std::vector<CountRow> &rows, const FitSettings &settings) {
    if (rows.empty()) {
        fail(ErrorKind::InvalidInput, "counts file has no experiment rows");
    }
    FitProblem p;
    p.model = model_from_int(settings.model);
    p.config = settings.config;
    p.duration_ns = settings.duration_ns;
    const bool any_window = std::any_of(rows.begin(), rows.end(), [](const CountRow &r) { return r.window_ns; });
    std::optional<double> duration;
    for (const CountRow &r : rows) {
        p.observed.push_back(r.table);
        if (r.theta_over_pi) {
            p.theta.push_back(*r.theta_over_pi * std::numbers::pi);
        } else if (auto t = scan_theta(r.table.experiment_id)) {
            p.theta.push_back(*t);
        } else {
            fail(ErrorKind::InvalidInput, "no theta for experiment '" + r.table.experiment_id +
                                              "': add a theta_over_pi column or use a scan id");
        }
        if (any_window && !r.window_ns && !settings.window_override) {
            fail(ErrorKind::InvalidInput, "window_ns must be given for every row or none");
        }
        double w = settings.window_override ? settings.window_ns : r.window_ns.value_or(settings.window_ns);
        p.window_ns.push_back(acceptance_width(w));
        if (r.duration_ns) {
            if (duration && *duration != *r.duration_ns) {
                fail(ErrorKind::InvalidInput, "rows disagree on duration_ns");
            }
            duration = r.duration_ns;
        }
    }
    if (duration) {
        p.duration_ns = *duration;
    }
    if (p.model == ModelId::Four) {
        if (!settings.cv_file) {
            fail(ErrorKind::Config, "model 4 needs a coefficient-of-variation file (--cv-file)");
        }
        CoefficientsOfVariation cv = cv_from_json(parse_json_text(read_file(*settings.cv_file), *settings.cv_file));
        p.cva = cv.cva;
        p.cvb = cv.cvb;
        p.cvc = cv.cvc;
    }
    validate(p);
    return p;
}

FitCommandResult cmd_fit(const PipelineConfig &config, const fs::path &counts_path, const fs::path &out_path) {
    FitCommandResult out;
    out.problem = fit_problem_from_counts(parse_counts_csv(read_file(counts_path)), config.fit);
    out.result = fit(out.problem);
    write_file_atomic(out_path, fit_result_to_json(out.result, out.problem).dump(2) + "\n");
    fs::path residuals = out_path.parent_path() / (out_path.stem().string() + "_residuals.csv");
    write_file_atomic(residuals, residuals_csv(out.result, out.problem));
    out.exit_code = out.result.converged ? kExitOk : kExitNotConverged;
    return out;
}

void cmd_report(const std::vector<fs::path> &fit_paths, const fs::path &out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        fail(ErrorKind::Io, "cannot create " + out_dir.string());
    }
    struct SummaryRow {
        std::string fit;
        int model;
        std::string statistic;
        double x;
        int df;
        double z;
        bool accepted;
    };
    std::vector<SummaryRow> summary;
    std::map<int, std::string> panels;
    for (const fs::path &path : fit_paths) {
        Json j = parse_json_text(read_file(path), path.string());
        const std::string what = "fit result " + path.string();
        const std::string name = path.stem().string();
        SummaryRow row{name,
                       static_cast<int>(require_number(j, "model", what)),
                       require_string(j, "statistic", what),
                       require_number(j, "x", what),
                       static_cast<int>(require_number(j, "df", what)),
                       require_number(j, "z", what),
                       j.value("accepted", false)};
        summary.push_back(row);
        std::string &panel = panels[row.model];
        if (panel.empty()) {
            panel = "fit,experiment_id,theta_over_pi,channel,observed,predicted,std_error\n";
        }
        if (!j.contains("experiments") || !j.at("experiments").is_array()) {
            fail(ErrorKind::InvalidInput, what + " lacks experiments");
        }
        for (const Json &e : j.at("experiments")) {
            const std::string id = require_string(e, "experiment_id", what);
            const double theta = require_number(e, "theta_over_pi", what);
            for (const Json &ch : e.at("channels")) {
                panel += name + ',' + id + ',' + format_number(theta, 6) + ',' + require_string(ch, "channel", what) +
                         ',' + format_number(require_number(ch, "observed", what), 6) + ',' +
                         format_number(require_number(ch, "predicted", what), 6) + ',' +
                         format_number(std::sqrt(std::max(0.0, require_number(ch, "variance", what))), 6) + '\n';
            }
        }
    }
    std::stable_sort(summary.begin(), summary.end(),
                     [](const SummaryRow &a, const SummaryRow &b) { return a.z < b.z; });
    std::string text = "fit,model,statistic,x,df,z,accepted\n";
    for (const SummaryRow &r : summary) {
        text += r.fit + ',' + std::to_string(r.model) + ',' + r.statistic + ',' + format_number(r.x, 6) + ',' +
                std::to_string(r.df) + ',' + format_number(r.z, 6) + ',' + (r.accepted ? "true" : "false") + '\n';
    }
    for (const auto &[model, panel] : panels) {
        write_file_atomic(out_dir / ("model" + std::to_string(model) + "_panels.csv"), panel);
    }
    write_file_atomic(out_dir / "summary.csv", text);
}

}  // namespace eprb
