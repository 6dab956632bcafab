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

// eprb simulate | tabulate | fit | report

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "eprb/pipeline.h"

namespace {

using namespace eprb;

struct Options {
    std::optional<std::string> config;
    std::optional<uint64_t> seed;
    std::string out;
    std::optional<int> experiments;
    std::optional<int> model;
    std::optional<double> window;
    std::optional<double> delta;
    std::optional<std::string> cv_file;
    bool refit_means = false;
    std::string input;
    std::vector<std::string> fits;
};

PipelineConfig configure(const Options &o) {
    PipelineConfig c = load_config(o.config ? std::optional<fs::path>(*o.config) : std::nullopt);
    if (o.seed) {
        c.simulate.seed = *o.seed;
        c.fit.config.seed = *o.seed;
    }
    if (o.experiments) {
        if (*o.experiments < 1 || *o.experiments > static_cast<int>(scan_series().size())) {
            fail(ErrorKind::Config, "--experiments must be between 1 and 41");
        }
        c.simulate.experiments = *o.experiments;
    }
    if (o.model) {
        model_from_int(*o.model);
        c.fit.model = *o.model;
    }
    if (o.window) {
        c.tabulate.window_ns = *o.window;
        c.fit.window_ns = *o.window;
        c.fit.window_override = true;
    }
    if (o.delta) {
        c.tabulate.delta_ns = *o.delta;
    }
    if (o.cv_file) {
        c.fit.cv_file = *o.cv_file;
    }
    if (o.refit_means) {
        c.fit.config.refit_means = true;
    }
    c.resolved = resolved_config(c);
    return c;
}

int run(const std::string &command, const Options &o) {
    PipelineConfig config = configure(o);
    if (command == "simulate") {
        SimulateReport r = cmd_simulate(config, o.out);
        std::cout << "simulated " << r.experiments << " experiments; manifest " << r.manifest.string() << "\n";
        return kExitOk;
    }
    if (command == "tabulate") {
        auto rows = cmd_tabulate(config, o.input, TabulateOverrides{o.window, o.delta}, o.out);
        std::cout << "tabulated " << rows.size() << " experiments into " << o.out << "\n";
        return kExitOk;
    }
    if (command == "fit") {
        FitCommandResult r = cmd_fit(config, o.input, o.out);
        const FitStatistics &st = r.result.statistics;
        std::printf("model %d: %s = %.2f, DF = %d, Z = %.2f (%s)%s\n", to_int(r.result.model),
                    st.uses_variances ? "Xrev" : "X", st.x, st.df, st.z, st.accepted ? "accepted" : "rejected",
                    r.result.converged ? "" : "; optimizer stopped at its evaluation limit");
        return r.exit_code;
    }
    std::vector<fs::path> paths(o.fits.begin(), o.fits.end());
    cmd_report(paths, o.out);
    std::cout << "report for " << paths.size() << " fits in " << o.out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Simulate, tabulate and fit two-observer photon-pair experiments"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config, "JSON config with simulate/tabulate/fit sections")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output path")->required();
    };

    CLI::App *simulate = app.add_subcommand("simulate", "simulate event logs for the scan series");
    add_common(simulate);
    simulate->add_option("--seed", o.seed, "root seed");
    simulate->add_option("--experiments", o.experiments, "number of experiments (1-41)");

    CLI::App *tabulate = app.add_subcommand("tabulate", "match coincidences and write the counts CSV");
    add_common(tabulate);
    tabulate->add_option("events", o.input, "directory holding manifest.json and event logs")
        ->required()
        ->check(CLI::ExistingDirectory);
    tabulate->add_option("--window", o.window, "coincidence window half-width w, ns (default 30)");
    tabulate->add_option("--delta", o.delta, "offset delta in |t_b - (t_a - delta)| <= w, ns");

    CLI::App *fitc = app.add_subcommand("fit", "fit a count model and write the result JSON");
    add_common(fitc);
    fitc->add_option("counts", o.input, "counts CSV")->required()->check(CLI::ExistingFile);
    fitc->add_option("--model", o.model, "model 1, 2, 3 or 4")->check(CLI::Range(1, 4));
    fitc->add_option("--seed", o.seed, "optimizer seed");
    fitc->add_option("--window", o.window, "coincidence window half-width w used for every experiment, ns");
    fitc->add_option("--cv-file", o.cv_file, "model 4 coefficients of variation (JSON)")
        ->check(CLI::ExistingFile);
    fitc->add_flag("--refit-means", o.refit_means, "model 4: re-optimize the means under Xrev");

    CLI::App *report = app.add_subcommand("report", "tabulate fits into panel and summary CSVs");
    add_common(report);
    report->add_option("fits", o.fits, "fit result JSON files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const Error &e) {
        std::cerr << "eprb: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception &e) {
        std::cerr << "eprb: " << e.what() << "\n";
        return kExitUsage;
    }
}
