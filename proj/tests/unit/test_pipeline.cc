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

#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <sys/wait.h>

#include "eprb/pipeline.h"
#include "eprb/seeding.h"
#include "oracles.h"
#include "synthetic.h"

namespace eprb {
namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / ("eprb_test_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ErrorKind kind_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Internal;
}

// Small, fast configuration: short runs, few restarts.
PipelineConfig small_config(int experiments, uint64_t seed = 7) {
    Json j = {{"simulate", {{"experiments", experiments}, {"seed", seed}, {"duration_ns", 1e9}}},
              {"fit", {{"restarts", 1}, {"seed", seed}}}};
    return parse_config(j);
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

// ---- Config ----

TEST(Config, DefaultsAndOverrides) {
    PipelineConfig d = parse_config(Json::object());
    EXPECT_EQ(d.simulate.experiments, 41);
    EXPECT_EQ(d.simulate.duration_ns, 5e9);
    EXPECT_EQ(d.tabulate.window_ns, 30.0);
    EXPECT_FALSE(d.tabulate.delta_ns.has_value());
    EXPECT_EQ(d.fit.model, 3);
    PipelineConfig c = parse_config(
        {{"simulate", {{"alice", {{"delay_tail_ns", {1, 2, 3, 4}}}}}}, {"tabulate", {{"delta_ns", -12}}}});
    EXPECT_EQ(c.simulate.alice.delay_tail_ns[3], 4.0);
    EXPECT_EQ(*c.tabulate.delta_ns, -12.0);
    EXPECT_EQ(c.resolved["tabulate"]["delta_ns"], -12.0);
}

TEST(Config, UnknownKeysAndBadTypesAreRejected) {
    EXPECT_EQ(kind_of([] { parse_config({{"simulat", Json::object()}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { parse_config({{"simulate", {{"seeds", 1}}}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { parse_config({{"simulate", {{"bob", {{"eficiency", {0, 0, 0, 0}}}}}}}); }),
              ErrorKind::Config);
    EXPECT_EQ(kind_of([] { parse_config({{"fit", {{"restarts", "five"}}}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { parse_config({{"simulate", {{"experiments", 42}}}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { parse_config(Json::array()); }), ErrorKind::Config);
    fs::path dir = scratch("config");
    write_file_atomic(dir / "bad.json", "{not json");
    EXPECT_EQ(kind_of([&] { load_config(dir / "bad.json"); }), ErrorKind::Config);
}

TEST(Config, ExperimentSeedsFollowSplittingRule) {
    PipelineConfig c = small_config(3, 99);
    for (int m = 0; m < 3; ++m) {
        EXPECT_EQ(experiment_sim_config(c.simulate, m).seed, derive_seed(99, "simulate", m));
    }
    c.simulate.clock_drift_ns_per_s = 0.055;
    EXPECT_NEAR(experiment_sim_config(c.simulate, 40).offset_ns, -10.3, 1e-9);
}

// ---- simulate / tabulate ----

TEST(Simulate, WritesLogsAndManifest) {
    fs::path dir = scratch("simulate");
    PipelineConfig c = small_config(3);
    SimulateReport r = cmd_simulate(c, dir);
    EXPECT_EQ(r.experiments, 3);
    Json m = Json::parse(read_file(r.manifest));
    ASSERT_EQ(m["experiments"].size(), 3u);
    EXPECT_EQ(m["root_seed"], 7);
    EXPECT_EQ(m["config_hash"], sha256_hex(c.resolved.dump()));
    for (const Json &e : m["experiments"]) {
        for (const char *key : {"alice_log", "bob_log", "truth"}) {
            fs::path p = dir / e[key].get<std::string>();
            ASSERT_TRUE(fs::exists(p)) << p;
            EXPECT_EQ(e["sha256"][key], sha256_hex(read_file(p)));
        }
    }
    EXPECT_EQ(m["experiments"][0]["experiment_id"], "scanblue110");
    EXPECT_EQ(m["experiments"][0]["duration_ns"], 1e9);
}

TEST(Simulate, SameSeedIsByteIdentical) {
    fs::path a = scratch("same_a"), b = scratch("same_b"), d = scratch("same_d");
    cmd_simulate(small_config(2), a);
    cmd_simulate(small_config(2), b);
    cmd_simulate(small_config(2, 8), d);
    for (const char *name : {"manifest.json", "scanblue111_alice.csv", "scanblue111_bob.csv", "scanblue111_truth.json"}) {
        EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
    }
    EXPECT_NE(read_file(a / "scanblue111_alice.csv"), read_file(d / "scanblue111_alice.csv"));
}

TEST(Simulate, DefaultScaleMatchesReferenceRates) {
    PipelineConfig c = parse_config(Json::object());
    SimulatedExperiment e = simulate_experiment(experiment_sim_config(c.simulate, 0));
    EXPECT_NEAR(static_cast<double>(e.alice.events.size()), 200000.0, 10000.0);
    EXPECT_NEAR(static_cast<double>(e.bob.events.size()), 140000.0, 7000.0);
}

TEST(Tabulate, ZeroWindowOnExactOffsetRecoversTruePairs) {
    fs::path dir = scratch("tab_zero");
    PipelineConfig c = small_config(2);
    cmd_simulate(c, dir);
    auto rows = cmd_tabulate(c, dir, TabulateOverrides{0.0, std::nullopt}, dir / "counts.csv");
    ASSERT_EQ(rows.size(), 2u);
    Json m = Json::parse(read_file(dir / "manifest.json"));
    for (size_t n = 0; n < rows.size(); ++n) {
        Json truth = Json::parse(read_file(dir / m["experiments"][n]["truth"].get<std::string>()));
        auto joint = truth["joint_detected"].get<std::vector<int64_t>>();
        EXPECT_EQ(*rows[n].delta_ns, -15.0);
        EXPECT_EQ(*rows[n].window_ns, 0.0);
        for (int k = 0; k < 16; ++k) {
            // Exact-time accidentals: Poisson with mean a * b / T.
            double mu = rows[n].table.a[k >> 2] * rows[n].table.b[k & 3] / 1e9;
            EXPECT_GE(rows[n].table.c[k], static_cast<double>(joint[k]));
            EXPECT_LE(rows[n].table.c[k], static_cast<double>(joint[k]) + mu + 5.0 * std::sqrt(mu) + 1.0);
        }
    }
    EXPECT_EQ(parse_counts_csv(read_file(dir / "counts.csv")).size(), 2u);
}

TEST(Tabulate, NarrowWindowLosesCoincidences) {
    fs::path dir = scratch("tab_narrow");
    Json j = {{"simulate",
               {{"experiments", 2},
                {"duration_ns", 1e9},
                {"alice", {{"delay_prompt_fraction", {0.6, 0.7, 0.8, 0.9}}, {"delay_tail_ns", {8, 6, 4, 2}}}}}}};
    PipelineConfig c = parse_config(j);
    cmd_simulate(c, dir);
    auto wide = cmd_tabulate(c, dir, {30.0, std::nullopt}, dir / "w30.csv");
    auto narrow = cmd_tabulate(c, dir, {6.0, std::nullopt}, dir / "w6.csv");
    for (size_t n = 0; n < wide.size(); ++n) {
        double cw = std::accumulate(wide[n].table.c.begin(), wide[n].table.c.end(), 0.0);
        double cn = std::accumulate(narrow[n].table.c.begin(), narrow[n].table.c.end(), 0.0);
        EXPECT_LT(cn, cw);
        EXPECT_EQ(wide[n].table.a, narrow[n].table.a);
    }
}

TEST(Tabulate, EmptyLogsGiveZeroRows) {
    fs::path dir = scratch("tab_empty");
    Json j = {{"simulate",
               {{"experiments", 1}, {"duration_ns", 1e8}, {"alice", {{"efficiency", {0, 0, 0, 0}}}},
                {"bob", {{"efficiency", {0, 0, 0, 0}}}}}}};
    PipelineConfig c = parse_config(j);
    cmd_simulate(c, dir);
    auto rows = cmd_tabulate(c, dir, {}, dir / "counts.csv");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(std::accumulate(rows[0].table.a.begin(), rows[0].table.a.end(), 0.0), 0.0);
}

TEST(Tabulate, MissingOrTamperedLogs) {
    fs::path dir = scratch("tab_bad");
    PipelineConfig c = small_config(1);
    EXPECT_EQ(kind_of([&] { cmd_tabulate(c, dir, {}, dir / "x.csv"); }), ErrorKind::Io);
    cmd_simulate(c, dir);
    std::string text = read_file(dir / "scanblue110_bob.csv");
    write_file_atomic(dir / "scanblue110_bob.csv", text + "9999999999,0,0\n");
    EXPECT_EQ(kind_of([&] { cmd_tabulate(c, dir, {}, dir / "x.csv"); }), ErrorKind::DataInconsistency);
    fs::remove(dir / "scanblue110_bob.csv");
    EXPECT_EQ(kind_of([&] { cmd_tabulate(c, dir, {}, dir / "x.csv"); }), ErrorKind::Io);
}

// ---- fit ----

TEST(FitProblemFromCounts, WindowsThetaAndDuration) {
    CountRow r;
    r.table.experiment_id = "scanblue130";
    r.table.a = {10, 10, 10, 10};
    r.table.b = {10, 10, 10, 10};
    std::vector<CountRow> rows(3, r);
    rows[1].table.experiment_id = "elsewhere";
    rows[1].theta_over_pi = 0.25;
    rows[2].table.experiment_id = "scanblue151";
    FitSettings s;
    s.model = 1;
    FitProblem p = fit_problem_from_counts(rows, s);
    EXPECT_NEAR(p.theta[0], *scan_theta("scanblue130"), 1e-15);
    EXPECT_NEAR(p.theta[1], 0.25 * M_PI, 1e-15);
    EXPECT_NEAR(p.theta[2], 0.95 * M_PI, 1e-15);
    EXPECT_EQ(p.window_ns[0], 61.0);

    for (CountRow &row : rows) row.window_ns = 6.0;
    EXPECT_EQ(fit_problem_from_counts(rows, s).window_ns[2], 13.0);
    s.window_override = true;
    s.window_ns = 0.0;
    EXPECT_EQ(fit_problem_from_counts(rows, s).window_ns[2], 1.0);
    s.window_override = false;

    rows[0].window_ns.reset();
    EXPECT_THROW(fit_problem_from_counts(rows, s), Error);
    rows[0].window_ns = 6.0;
    rows[0].duration_ns = 1e9;
    rows[1].duration_ns = 2e9;
    EXPECT_THROW(fit_problem_from_counts(rows, s), Error);
    rows[1].duration_ns = 1e9;
    EXPECT_EQ(fit_problem_from_counts(rows, s).duration_ns, 1e9);

    rows[1].theta_over_pi.reset();
    EXPECT_THROW(fit_problem_from_counts(rows, s), Error);
    EXPECT_THROW(fit_problem_from_counts({}, s), Error);
    s.model = 4;
    rows[1].theta_over_pi = 0.25;
    EXPECT_EQ(kind_of([&] { fit_problem_from_counts(rows, s); }), ErrorKind::Config);
}

void write_counts(const fs::path &path, const std::vector<CountTable> &tables) {
    std::vector<CountRow> rows;
    for (const CountTable &t : tables) rows.push_back({t, std::nullopt, std::nullopt, std::nullopt, std::nullopt});
    write_file_atomic(path, counts_csv(rows));
}

// Model 3 mechanisms: per-channel singles and coincidence products plus
// accidentals in a 30 ns window.
std::vector<CountTable> rich_mechanism_data(uint64_t seed) {
    FilterParams p = oracle::reference_params_model3(acceptance_width(kDefaultWindowNs));
    DensityMatrix rho = synthetic::werner(0.95);
    return synthetic::poisson_tables(synthetic::scan_expected(p, rho), seed);
}

TEST(FitCommand, WritesResultAndResidualsAndReports) {
    fs::path dir = scratch("fit");
    write_counts(dir / "rich.csv", rich_mechanism_data(3));
    PipelineConfig c = small_config(1);
    std::vector<double> xs;
    std::vector<fs::path> fits;
    for (int model : {1, 2, 3}) {
        c.fit.model = model;
        fs::path out = dir / ("m" + std::to_string(model) + ".json");
        FitCommandResult r = cmd_fit(c, dir / "rich.csv", out);
        EXPECT_EQ(r.exit_code, kExitOk);
        ASSERT_TRUE(fs::exists(out));
        ASSERT_TRUE(fs::exists(dir / ("m" + std::to_string(model) + "_residuals.csv")));
        Json j = Json::parse(read_file(out));
        EXPECT_EQ(j["model"], model);
        xs.push_back(r.result.statistics.x);
        fits.push_back(out);
        if (model == 1) EXPECT_GE(r.result.statistics.z, 5.0);
        if (model == 3) EXPECT_LT(r.result.statistics.z, 5.0);
    }
    // Nested models on the same data.
    EXPECT_GE(xs[0], xs[1]);
    EXPECT_GE(xs[1], xs[2]);

    // Model 4 from the same counts.
    Json cv = {{"cva", std::vector<double>(4, 0.004)},
               {"cvb", std::vector<double>(4, 0.004)},
               {"cvc", std::vector<double>(16, 0.05)}};
    write_file_atomic(dir / "cv.json", cv.dump());
    c.fit.model = 4;
    c.fit.cv_file = (dir / "cv.json").string();
    FitCommandResult r4 = cmd_fit(c, dir / "rich.csv", dir / "m4.json");
    EXPECT_EQ(Json::parse(read_file(dir / "m4.json"))["statistic"], "Xrev");
    EXPECT_LT(r4.result.statistics.x, xs[2]);
    fits.push_back(dir / "m4.json");

    cmd_report({fits[2], fits[0], fits[1], fits[3]}, dir / "report");
    auto summary = lines_of(read_file(dir / "report" / "summary.csv"));
    ASSERT_EQ(summary.size(), 5u);
    EXPECT_EQ(summary[0], "fit,model,statistic,x,df,z,accepted");
    double last = -1e300;
    for (size_t n = 1; n < summary.size(); ++n) {
        std::vector<std::string> f;
        std::istringstream in(summary[n]);
        for (std::string cell; std::getline(in, cell, ',');) f.push_back(cell);
        double z = std::stod(f[5]);
        EXPECT_GE(z, last);
        last = z;
    }
    EXPECT_EQ(summary.back().substr(0, 3), "m1,");

    auto panels = lines_of(read_file(dir / "report" / "model4_panels.csv"));
    ASSERT_EQ(panels.size(), 1u + 41 * 24);
    EXPECT_EQ(panels[0], "fit,experiment_id,theta_over_pi,channel,observed,predicted,std_error");
    // std_error = sqrt(variance) for model 4, sqrt(predicted) otherwise.
    Json j4 = Json::parse(read_file(dir / "m4.json"));
    const Json &ch = j4["experiments"][0]["channels"][8];
    std::string expect4 = "m4,scanblue110,-1,c_0000," + format_number(ch["observed"].get<double>(), 6) + "," +
                          format_number(ch["predicted"].get<double>(), 6) + "," +
                          format_number(std::sqrt(ch["variance"].get<double>()), 6);
    EXPECT_EQ(panels[9], expect4);
    EXPECT_GT(ch["variance"].get<double>(), ch["predicted"].get<double>());
    Json j3 = Json::parse(read_file(fits[2]));
    const Json &ch3 = j3["experiments"][0]["channels"][8];
    auto panels3 = lines_of(read_file(dir / "report" / "model3_panels.csv"));
    EXPECT_EQ(panels3[9].substr(panels3[9].rfind(',') + 1), format_number(std::sqrt(ch3["predicted"].get<double>()), 6));
}

TEST(FitCommand, WellSpecifiedModel1IsAccepted) {
    fs::path dir = scratch("fit_m1");
    FilterParams p = oracle::reference_params_model1();
    DensityMatrix rho = oracle::normalized_state(oracle::reference_state_model1());
    write_counts(dir / "m1.csv", synthetic::poisson_tables(synthetic::scan_expected(p, rho), 4));
    PipelineConfig c = small_config(1);
    c.fit.model = 1;
    FitCommandResult r = cmd_fit(c, dir / "m1.csv", dir / "out.json");
    EXPECT_LT(r.result.statistics.z, 5.0);
    EXPECT_EQ(r.exit_code, kExitOk);
}

TEST(FitCommand, BudgetStopGivesExitTwo) {
    fs::path dir = scratch("fit_budget");
    write_counts(dir / "rich.csv", rich_mechanism_data(5));
    PipelineConfig c = parse_config({{"fit", {{"model", 3}, {"restarts", 1}, {"max_evaluations", 50},
                                              {"polish_evaluations", 0}}}});
    FitCommandResult r = cmd_fit(c, dir / "rich.csv", dir / "out.json");
    EXPECT_FALSE(r.result.converged);
    EXPECT_EQ(r.exit_code, kExitNotConverged);
    EXPECT_TRUE(fs::exists(dir / "out.json"));
}

TEST(Report, EmptyInputGivesHeaderOnly) {
    fs::path dir = scratch("report_empty");
    cmd_report({}, dir);
    EXPECT_EQ(read_file(dir / "summary.csv"), "fit,model,statistic,x,df,z,accepted\n");
}

// ---- End to end ----

std::string pipeline_once(const fs::path &dir, uint64_t seed) {
    PipelineConfig c = small_config(3, seed);
    c.fit.model = 2;
    cmd_simulate(c, dir / "events");
    cmd_tabulate(c, dir / "events", {}, dir / "counts.csv");
    cmd_fit(c, dir / "counts.csv", dir / "fit.json");
    return read_file(dir / "counts.csv") + read_file(dir / "fit.json") + read_file(dir / "fit_residuals.csv");
}

TEST(EndToEnd, DeterministicAcrossRuns) {
    EXPECT_EQ(pipeline_once(scratch("e2e_a"), 21), pipeline_once(scratch("e2e_b"), 21));
}

TEST(EndToEnd, Model3FitsSimulatedDataAcrossSeeds) {
    // Twenty seeds of the full 41-experiment scan at one second each, default pair rate.
    const uint64_t kSeeds = 20;
    int accepted = 0;
    std::ostringstream zs;
    for (uint64_t seed = 1; seed <= kSeeds; ++seed) {
        fs::path dir = scratch("selfconsistency");
        Json j = {{"simulate", {{"seed", seed}, {"duration_ns", 1e9}, {"pairs_per_quadrant", 2e5}}},
                  {"fit", {{"model", 3}, {"restarts", 1}}}};
        PipelineConfig c = parse_config(j);
        cmd_simulate(c, dir / "events");
        cmd_tabulate(c, dir / "events", {}, dir / "counts.csv");
        FitCommandResult r = cmd_fit(c, dir / "counts.csv", dir / "fit.json");
        zs << r.result.statistics.z << ' ';
        accepted += r.result.statistics.z < 5.0;
    }
    EXPECT_EQ(accepted, static_cast<int>(kSeeds)) << "Z values: " << zs.str();
}

// ---- CLI ----

#ifdef EPRB_CLI_PATH
int run_cli(const std::string &args) {
    std::string cmd = std::string(EPRB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    fs::path dir = scratch("cli");
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("simulate"), 1);
    EXPECT_EQ(run_cli("fit --bogus 1 --out x"), 1);
    write_file_atomic(dir / "bad.json", R"({"simulate": {"sedd": 1}})");
    EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "ev").string()), 1);
    write_file_atomic(dir / "small.json", R"({"simulate": {"duration_ns": 2e8}, "fit": {"restarts": 1}})");
    std::string cfg = " --config " + (dir / "small.json").string();
    ASSERT_EQ(run_cli("simulate --experiments 3 --seed 4" + cfg + " --out " + (dir / "ev").string()), 0);
    EXPECT_EQ(Json::parse(read_file(dir / "ev" / "manifest.json"))["experiments"].size(), 3u);
    ASSERT_EQ(run_cli("tabulate " + (dir / "ev").string() + cfg + " --out " + (dir / "counts.csv").string()), 0);
    EXPECT_EQ(run_cli("fit " + (dir / "counts.csv").string() + cfg + " --model 2 --out " +
                      (dir / "fit.json").string()),
              0);
    EXPECT_EQ(run_cli("fit " + (dir / "counts.csv").string() + cfg + " --model 5 --out " +
                      (dir / "fit.json").string()),
              1);
    EXPECT_EQ(run_cli("fit " + (dir / "counts.csv").string() + cfg + " --model 4 --out " +
                      (dir / "fit.json").string()),
              1);
    EXPECT_EQ(run_cli("report " + (dir / "fit.json").string() + " --out " + (dir / "rep").string()), 0);

    write_file_atomic(dir / "budget.json", R"({"fit": {"restarts": 1, "max_evaluations": 20, "polish_evaluations": 0}})");
    EXPECT_EQ(run_cli("fit " + (dir / "counts.csv").string() + " --config " + (dir / "budget.json").string() +
                      " --model 3 --out " + (dir / "fit2.json").string()),
              2);

    std::string log = read_file(dir / "ev" / "scanblue110_alice.csv");
    write_file_atomic(dir / "ev" / "scanblue110_alice.csv", log + "99999999999,1,1\n");
    EXPECT_EQ(run_cli("tabulate " + (dir / "ev").string() + " --out " + (dir / "c2.csv").string()), 3);

    // Coincidences exceeding singles.
    auto rows = parse_counts_csv(read_file(dir / "counts.csv"));
    rows[0].table.c[0] = rows[0].table.a[0] + 1;
    write_file_atomic(dir / "inconsistent.csv", counts_csv(rows));
    EXPECT_EQ(run_cli("fit " + (dir / "inconsistent.csv").string() + " --out " + (dir / "f3.json").string()), 3);
}
#endif

}  // namespace
}  // namespace eprb
