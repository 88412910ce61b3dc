#include "acekit/cli.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "acekit/csv.hpp"
#include "acekit/error.hpp"
#include "acekit/estimators.hpp"
#include "acekit/harness.hpp"
#include "acekit/simgen.hpp"

namespace acekit {

namespace {

struct DataArgs {
    std::string path;
    std::string treatment;
    std::string response;
    std::vector<std::string> covariates;
    std::optional<std::uint64_t> impute_seed;
};

void add_data_options(CLI::App* sub, DataArgs& a) {
    sub->add_option("--data", a.path, "CSV file with a header row")->required();
    sub->add_option("--treatment", a.treatment, "binary treatment column")->required();
    sub->add_option("--response", a.response, "response column")->required();
    sub->add_option("--covariates", a.covariates, "covariate columns (default: all others)")
        ->delimiter(',');
    sub->add_option("--impute-seed", a.impute_seed, "hot-deck impute missing cells with this seed");
}

Dataset load_data(const DataArgs& a) {
    auto table = ingest_csv(std::filesystem::path(a.path), a.treatment, a.response, a.covariates);
    if (table.has_missing()) {
        if (!a.impute_seed) {
            fail(ErrorKind::MissingData,
                 "'" + a.path + "' has missing cells; pass --impute-seed to hot-deck impute them");
        }
        numkit::SeededRng rng(*a.impute_seed);
        table = hot_deck_impute(table, rng);
    }
    return to_dataset(table);
}

struct ScenarioArgs {
    std::string name;
    std::string file;
};

void add_scenario_options(CLI::App* sub, ScenarioArgs& a) {
    auto* by_name = sub->add_option("--scenario", a.name, "built-in scenario name");
    auto* by_file = sub->add_option("--scenario-file", a.file, "scenario JSON file");
    by_name->excludes(by_file);
    by_file->excludes(by_name);
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::ConfigError, "cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, "'" + path + "': " + e.what());
    }
}

Scenario load_scenario(const ScenarioArgs& a, nlohmann::json* raw = nullptr) {
    if (!a.file.empty()) {
        auto j = read_json(a.file);
        if (raw) {
            *raw = j;
        }
        return scenario_from_json(j);
    }
    if (a.name.empty()) {
        fail(ErrorKind::ConfigError, "one of --scenario or --scenario-file is required");
    }
    return scenario(a.name);
}

void estimate_method_spec(const std::string& method, const std::string& ps, const std::string& m,
                          EstimatorSpec& spec) {
    spec.ps = ps;
    spec.m = m == "optimal" ? "optimal:per-arm" : m;
    if (method == "face") {
        spec.method = "face";
    } else if (method == "reg") {
        spec.method = "reg";
        spec.adjust = "x";
    } else if (method == "reg-ld") {
        spec.method = "reg";
        spec.adjust = "ld*";
    } else if (method == "reg-qd") {
        spec.method = "reg";
        spec.adjust = "qd*";
    } else if (method == "subclass") {
        spec.method = "subclass";
        spec.adjust = ps == "logistic" ? "ps*" : ps + "*";
    } else {
        spec.method = method;
    }
    spec.name = method;
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage:
            return 2;
        case ErrorCategory::Data:
            return 3;
        case ErrorCategory::Numerical:
            return 4;
    }
    return 3;
}

std::string_view category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage:
            return "usage";
        case ErrorCategory::Data:
            return "data";
        case ErrorCategory::Numerical:
            return "numerical";
    }
    return "data";
}

void report(std::ostream& err, std::string_view kind, std::string_view category,
            const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"category", category}, {"message", message}};
    err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Average causal effect estimation and simulation toolkit", "acekit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment for a scenario");
    ScenarioArgs sim_scenario;
    add_scenario_options(sim, sim_scenario);
    std::optional<int> sim_reps;
    std::optional<Eigen::Index> sim_n;
    std::uint64_t sim_seed = 31;
    int sim_workers = 1;
    std::string sim_out;
    std::string sim_estimators;
    std::vector<double> sim_edges;
    sim->add_option("--reps", sim_reps, "replicate count");
    sim->add_option("--n", sim_n, "sample size per replicate");
    sim->add_option("--seed", sim_seed, "master seed")->capture_default_str();
    sim->add_option("--workers", sim_workers, "worker threads (0: all cores)")
        ->capture_default_str();
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--estimators-file", sim_estimators, "JSON array of estimator specs");
    sim->add_option("--hist-edges", sim_edges, "lo,hi,step")->delimiter(',')->expected(3);

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate an average causal effect from a CSV file");
    DataArgs est_data;
    add_data_options(est, est_data);
    std::string est_method;
    std::string est_ps = "logistic";
    std::string est_m = "per-arm";
    int est_k = 5;
    bool est_clip = false;
    est->add_option("--method", est_method)
        ->required()
        ->check(CLI::IsMember({"face", "reg", "reg-ld", "reg-qd", "subclass", "ipw", "aipw", "wresp"}));
    est->add_option("--ps", est_ps)->check(CLI::IsMember({"logistic", "ld", "qd"}))->capture_default_str();
    est->add_option("--m", est_m)
        ->check(CLI::IsMember({"joint", "per-arm", "zero", "optimal"}))
        ->capture_default_str();
    est->add_option("--k", est_k, "subclass count")->capture_default_str();
    est->add_flag("--clip", est_clip, "clip propensities to [1e-6, 1 - 1e-6]");

    // asymptotics
    auto* asy = app.add_subcommand("asymptotics", "Closed-form n*Var multipliers for the two-covariate normal model");
    ScenarioArgs asy_scenario;
    add_scenario_options(asy, asy_scenario);

    // ps-density
    auto* dens = app.add_subcommand("ps-density", "Per-arm density of the estimated propensity score");
    DataArgs dens_data;
    add_data_options(dens, dens_data);
    std::string dens_ps = "logistic";
    int dens_grid = 101;
    bool dens_clip = false;
    dens->add_option("--ps", dens_ps)->check(CLI::IsMember({"logistic", "ld", "qd"}))->capture_default_str();
    dens->add_option("--grid", dens_grid, "grid points on [0, 1]")->capture_default_str();
    dens->add_flag("--clip", dens_clip);

    // scenario
    auto* scen = app.add_subcommand("scenario", "Print a built-in scenario as JSON, or list names");
    std::string scen_name;
    scen->add_option("--name", scen_name);

    // generate
    auto* gen = app.add_subcommand("generate", "Write one simulated dataset as CSV");
    ScenarioArgs gen_scenario;
    add_scenario_options(gen, gen_scenario);
    std::optional<Eigen::Index> gen_n;
    std::uint64_t gen_seed = 31;
    std::uint64_t gen_stream = 0;
    std::string gen_regime = "observational";
    std::string gen_out;
    gen->add_option("--n", gen_n);
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--stream", gen_stream)->capture_default_str();
    gen->add_option("--regime", gen_regime)
        ->check(CLI::IsMember({"observational", "t0", "t1"}))
        ->capture_default_str();
    gen->add_option("--out", gen_out, "output file (default: stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report(err, "UsageError", "usage", e.what());
        return 2;
    }

    try {
        if (sim->parsed()) {
            nlohmann::json raw;
            auto sc = load_scenario(sim_scenario, &raw);
            if (!sim_edges.empty()) {
                sc.histogram_edges = histogram_edges(sim_edges[0], sim_edges[1], sim_edges[2]);
            }
            ExperimentPlan plan = default_plan(sc);
            if (raw.is_object() && raw.contains("estimators")) {
                plan.estimators.clear();
                for (const auto& e : raw.at("estimators")) {
                    plan.estimators.push_back(estimator_spec_from_json(e));
                }
            }
            if (!sim_estimators.empty()) {
                plan.estimators.clear();
                for (const auto& e : read_json(sim_estimators)) {
                    plan.estimators.push_back(estimator_spec_from_json(e));
                }
            }
            if (sim_reps) {
                plan.replicates = *sim_reps;
            }
            if (sim_n) {
                plan.n = *sim_n;
            }
            plan.seed = sim_seed;
            plan.workers = sim_workers == 0
                               ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                               : sim_workers;
            const auto summary = run_experiment(plan);
            write_summary(summary, sim_out);
            out << summary_csv(summary);
        } else if (est->parsed()) {
            const Dataset data = load_data(est_data);
            EstimatorSpec spec;
            estimate_method_spec(est_method, est_ps, est_m, spec);
            spec.k = est_k;
            spec.clip = est_clip;
            const auto result = run_estimator(spec, data);
            out << nlohmann::json(result).dump(2) << '\n';
        } else if (asy->parsed()) {
            const auto sc = load_scenario(asy_scenario);
            const auto* model = std::get_if<NormalLinearModel>(&sc.model);
            if (!model) {
                fail(ErrorKind::WrongShape, "asymptotics needs a normal linear scenario");
            }
            nlohmann::json j;
            j["M0"] = asymptotic_variance_toy(*model, ToyRegression::M0);
            j["M1"] = asymptotic_variance_toy(*model, ToyRegression::M1);
            j["M2"] = asymptotic_variance_toy(*model, ToyRegression::M2);
            j["M3"] = j["M0"];
            out << j.dump(2) << '\n';
        } else if (dens->parsed()) {
            const Dataset data = load_data(dens_data);
            const auto ps = resolve_ps(dens_ps, data, nullptr, dens_clip);
            out << nlohmann::json(ps_density(ps.evaluate_rows(data.x()), data.t(), dens_grid)).dump(2)
                << '\n';
        } else if (scen->parsed()) {
            if (scen_name.empty()) {
                out << nlohmann::json(scenario_names()).dump(2) << '\n';
            } else {
                out << nlohmann::json(scenario(scen_name)).dump(2) << '\n';
            }
        } else if (gen->parsed()) {
            const auto sc = load_scenario(gen_scenario);
            const Regime regime = gen_regime == "t0"   ? Regime::InterventionT0
                                  : gen_regime == "t1" ? Regime::InterventionT1
                                                       : Regime::Observational;
            numkit::SeededRng rng(gen_seed, gen_stream);
            const auto data = generate(sc.model, gen_n.value_or(sc.n), regime, rng);
            if (gen_out.empty()) {
                write_dataset_csv(out, data);
            } else {
                std::ofstream f(gen_out, std::ios::binary | std::ios::trunc);
                if (!f) {
                    fail(ErrorKind::ConfigError, "cannot write '" + gen_out + "'");
                }
                write_dataset_csv(f, data);
            }
        }
    } catch (const Error& e) {
        const auto category = category_of(e.kind());
        report(err, to_string(e.kind()), category_name(category), e.what());
        return exit_code(category);
    } catch (const nlohmann::json::exception& e) {
        report(err, "ConfigError", "usage", e.what());
        return 2;
    }
    return 0;
}

}  // namespace acekit
