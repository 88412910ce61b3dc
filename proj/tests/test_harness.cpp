#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acekit/csv.hpp"
#include "acekit/harness.hpp"
#include "acekit/propensity.hpp"
#include "support.hpp"

using namespace acekit;
using Eigen::VectorXd;
using numkit::SeededRng;
using testing::kind_of;

namespace {

CsvTable parse(const std::string& text, const std::vector<std::string>& covariates = {}) {
    std::istringstream in(text);
    return ingest_csv(in, "t", "y", covariates);
}

std::string error_message(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

// Y = T exactly, up to noise far below double resolution.
Scenario deterministic_scenario() {
    auto model = fig5_model();
    model.d = 0.0;
    model.delta = 1.0;
    model.b.setZero();
    model.phi = 1e-300;
    return Scenario{"y_equals_t", model, 20, 1, histogram_edges(-2.5, 2.5, 0.5)};
}

ExperimentPlan small_plan(int workers) {
    auto plan = default_plan(scenario("fig5"));
    plan.replicates = 40;
    plan.workers = workers;
    plan.estimators = {EstimatorSpec{"face", "face"}, EstimatorSpec{"ipw", "ipw"}};
    return plan;
}

}  // namespace

TEST_CASE("csv ingest") {
    const auto table = parse("x1,x2,t,y\n0.5,1,0,2.25\n-1.5,0,1,+3\n2,1,1,-4e-1\n");
    REQUIRE(table.rows() == 3);
    REQUIRE(table.covariates.size() == 2);
    CHECK(table.covariates[0].type == ColumnType::Numeric);
    CHECK(table.covariates[1].type == ColumnType::Binary);
    CHECK(table.treatment.type == ColumnType::Binary);
    const auto data = to_dataset(table);
    CHECK(data.x()(1, 0) == -1.5);
    CHECK(data.y()(1) == 3.0);
    CHECK(data.y()(2) == -0.4);
    CHECK(data.t()(0) == 0.0);

    std::ostringstream out;
    write_dataset_csv(out, data);
    const auto back = to_dataset(parse(out.str().replace(0, 5, "x1,x2")));
    CHECK(back.x() == data.x());
    CHECK(back.y() == data.y());

    const auto picked = parse("a,t,b,y\n1,0,2,3\n4,1,5,6\n", {"b"});
    REQUIRE(picked.covariates.size() == 1);
    CHECK(picked.covariates[0].name == "b");
    CHECK(picked.covariates[0].values[1] == 5.0);

    const auto quoted = parse("\"x,1\",t,y\n\"7\", 1 ,2\n3,0,NA\n");
    CHECK(quoted.covariates[0].name == "x,1");
    CHECK(quoted.covariates[0].values[0] == 7.0);
    CHECK(quoted.response.missing[1]);
}

TEST_CASE("csv missing cells and errors") {
    const auto table = parse("x1,t,y\n1,0,2\n,1,3\n4,1,NA\n");
    CHECK(table.has_missing());
    CHECK(table.covariates[0].missing == std::vector<bool>{false, true, false});
    CHECK(table.response.missing_count() == 1);
    CHECK(kind_of([&] { to_dataset(table); }) == ErrorKind::MissingData);

    CHECK(kind_of([] { parse("x1,t,y\n1,2,3\n"); }) == ErrorKind::DomainError);
    const auto msg = error_message([] { parse("x1,t,y\n1,0,3\n1,2,3\n"); });
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);

    CHECK(kind_of([] { parse("x1,t,y\n1,0,abc\n"); }) == ErrorKind::ParseError);
    const auto parse_msg = error_message([] { parse("x1,t,y\n1,0,abc\n"); });
    CHECK(parse_msg.find("line 2") != std::string::npos);
    CHECK(parse_msg.find("'y'") != std::string::npos);
    CHECK(kind_of([] { parse("x1,t,y\n1,0\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([] { parse("x1,tt,y\n1,0,1\n"); }) == ErrorKind::MissingColumn);
    CHECK(kind_of([] { parse("x1,t,y\n1,0,1\n", {"x9"}); }) == ErrorKind::MissingColumn);
}

TEST_CASE("hot-deck imputation") {
    const auto complete = parse("x1,t,y\n1,0,2\n3,1,4\n");
    SeededRng rng(1);
    const auto same = hot_deck_impute(complete, rng);
    CHECK(same.covariates[0].values == complete.covariates[0].values);
    CHECK(same.response.values == complete.response.values);

    const auto single = parse("x1,t,y\n,0,2\n5,1,4\n,1,NA\n");
    SeededRng rng2(2);
    const auto filled = hot_deck_impute(single, rng2);
    CHECK(!filled.has_missing());
    CHECK(filled.covariates[0].values == std::vector<double>{5.0, 5.0, 5.0});
    CHECK((filled.response.values[2] == 2.0 || filled.response.values[2] == 4.0));
    CHECK(filled.response.values[0] == 2.0);

    std::string text = "x1,t,y\n";
    for (int i = 0; i < 100; ++i) {
        const char* cell = i % 2 == 1 ? "" : (i % 10 < 4 ? "1" : "0");
        text += std::string(cell) + "," + std::to_string(i % 2) + ",1\n";
    }
    const auto half = parse(text);
    double mean_imputed = 0.0;
    const int seeds = 400;
    for (int s = 0; s < seeds; ++s) {
        SeededRng r(static_cast<std::uint64_t>(s));
        const auto imputed = hot_deck_impute(half, r);
        double sum = 0.0;
        for (std::size_t i = 1; i < 100; i += 2) {
            sum += imputed.covariates[0].values[i];
        }
        mean_imputed += sum / 50.0;
    }
    mean_imputed /= seeds;
    // 20 of 50 observed values are 1.
    CHECK(std::abs(mean_imputed - 0.4) < 0.01);

    SeededRng a(3);
    SeededRng b(3);
    CHECK(hot_deck_impute(single, a).covariates[0].values ==
          hot_deck_impute(single, b).covariates[0].values);

    const auto hollow = parse("x1,t,y\n,0,2\nNA,1,4\n");
    SeededRng rng3(4);
    CHECK(kind_of([&] { hot_deck_impute(hollow, rng3); }) == ErrorKind::AllMissingColumn);
}

TEST_CASE("experiment over a deterministic response") {
    auto plan = default_plan(deterministic_scenario());
    plan.estimators = {EstimatorSpec{"face", "face"}};
    const auto one = run_experiment(plan);
    const auto& face_summary = one.at("face");
    CHECK(face_summary.successes == 1);
    CHECK(*face_summary.mean == 1.0);
    CHECK(*face_summary.sd == 0.0);
    CHECK(*face_summary.mse == 0.0);
    CHECK(one.true_ace == 1.0);
    CHECK(face_summary.histogram == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 0, 0, 0});
}

TEST_CASE("replicate estimates are regenerated from their own stream") {
    const auto plan = small_plan(1);
    const auto summary = run_experiment(plan);
    const auto& ipw = summary.at("ipw");
    for (int r : {0, 17, 39}) {
        SeededRng rng(plan.seed, static_cast<std::uint64_t>(r));
        const auto data = generate(plan.scenario.model, plan.n, Regime::Observational, rng);
        CHECK(summary.at("face").estimates[static_cast<std::size_t>(r)].value() ==
              face(data).estimate);
        CHECK(ipw.estimates[static_cast<std::size_t>(r)].value() ==
              run_estimator(EstimatorSpec{"ipw", "ipw"}, data).estimate);
    }
}

TEST_CASE("summaries do not depend on the worker count") {
    const auto base = nlohmann::json(run_experiment(small_plan(1))).dump();
    for (int workers : {2, 3, 8}) {
        CHECK(nlohmann::json(run_experiment(small_plan(workers))).dump() == base);
    }
}

TEST_CASE("summary statistics") {
    auto plan = small_plan(2);
    plan.estimators = default_estimators(plan.scenario);
    const auto summary = run_experiment(plan);
    for (const auto& e : summary.estimators) {
        std::vector<double> values;
        for (const auto& v : e.estimates) {
            if (v) {
                values.push_back(*v);
            }
        }
        const auto m = testing::moments(values);
        CHECK(e.successes == static_cast<int>(values.size()));
        CHECK(*e.mean == doctest::Approx(m.mean).epsilon(1e-14));
        CHECK(*e.sd == doctest::Approx(m.sd).epsilon(1e-12));
        const double bias = *e.mean - summary.true_ace;
        CHECK(std::abs(*e.mse - (*e.sd * *e.sd + bias * bias)) < 1e-12);
        int total = 0;
        for (int c : e.histogram) {
            total += c;
        }
        CHECK(total == e.successes);
    }
}

TEST_CASE("failures are counted by kind") {
    auto plan = default_plan(scenario("fig6_7"));
    plan.n = 12;
    plan.replicates = 6;
    plan.estimators = {EstimatorSpec{"reg_x", "reg"}, EstimatorSpec{"face", "face"}};
    const auto summary = run_experiment(plan);
    const auto& reg = summary.at("reg_x");
    CHECK(reg.successes == 0);
    CHECK(reg.failures == 6);
    CHECK(!reg.mean.has_value());
    CHECK(reg.failure_kinds.at("DimensionMismatch") == 6);
    CHECK(summary.at("face").successes == 6);
    CHECK(summary_csv(summary).find("reg_x,reg,NA,NA,NA,0,6") != std::string::npos);
}

TEST_CASE("histogram binning") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    CHECK(histogram_counts({-5.0, 0.0, 0.5, 1.0, 1.5, 2.0, 9.0}, edges) == std::vector<int>{4, 3});
}

TEST_CASE("plan and estimator validation") {
    auto plan = small_plan(1);
    plan.replicates = 0;
    CHECK(kind_of([&] { run_experiment(plan); }) == ErrorKind::ConfigError);
    plan = small_plan(1);
    plan.workers = 0;
    CHECK(kind_of([&] { plan.validate(); }) == ErrorKind::ConfigError);
    plan = small_plan(1);
    plan.estimators.push_back(EstimatorSpec{"face", "face"});
    CHECK(kind_of([&] { plan.validate(); }) == ErrorKind::ConfigError);
    plan = small_plan(1);
    plan.estimators = {};
    CHECK(kind_of([&] { plan.validate(); }) == ErrorKind::ConfigError);
    plan = small_plan(1);
    plan.scenario.histogram_edges = {1.0, 0.0};
    CHECK(kind_of([&] { plan.validate(); }) == ErrorKind::ConfigError);
    plan = small_plan(1);
    plan.estimators = {EstimatorSpec{"bad", "nonsense"}};
    CHECK(kind_of([&] { run_experiment(plan); }) == ErrorKind::ConfigError);

    const auto data = testing::rows({{0, 0, 1}, {1, 1, 2}, {2, 0, 2}, {3, 1, 5}});
    CHECK(kind_of([&] { run_estimator(EstimatorSpec{"a", "reg", "lp"}, data); }) ==
          ErrorKind::ConfigError);
    CHECK(kind_of([&] { run_estimator(EstimatorSpec{"a", "aipw", "x", "logistic", "bogus"}, data); }) ==
          ErrorKind::ConfigError);
    CHECK(kind_of([] { estimator_spec_from_json(nlohmann::json{{"name", "x"}}); }) ==
          ErrorKind::ConfigError);

    const EstimatorSpec spec{"opt", "aipw", "x", "true", "optimal:per-arm", std::vector<int>{1, 3}, 4,
                             true};
    const auto back = estimator_spec_from_json(nlohmann::json(spec));
    CHECK(nlohmann::json(back).dump() == nlohmann::json(spec).dump());
    CHECK(estimator_spec_from_json(nlohmann::json{{"method", "face"}}).name == "face");
}

TEST_CASE("estimator tokens") {
    const auto s = scenario("fig10");
    SeededRng rng(5);
    const auto data = generate(s.model, 400, Regime::Observational, rng);
    const auto& model = std::get<LogisticAssignmentModel>(s.model);
    VectorXd ps(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        ps(i) = model.propensity(data.x().row(i).transpose());
    }
    const auto ipw_true = run_estimator(EstimatorSpec{"a", "ipw", "x", "true"}, data, &s.model);
    CHECK(ipw_true.estimate == doctest::Approx(ipw_ace(data, ps).estimate).epsilon(1e-13));

    const auto half = run_estimator(EstimatorSpec{"a", "ipw", "x", "const:0.5"}, data);
    VectorXd halves = VectorXd::Constant(data.n(), 0.5);
    CHECK(half.estimate == doctest::Approx(ipw_ace(data, halves).estimate).epsilon(1e-13));

    const auto marginal = run_estimator(EstimatorSpec{"a", "ipw", "x", "marginal"}, data);
    CHECK(marginal.estimate == doctest::Approx(face(data).estimate).epsilon(1e-12));

    const auto known = run_estimator(EstimatorSpec{"a", "outcome", "x", "true", "known"}, data, &s.model);
    double manual = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const VectorXd x = data.x().row(i).transpose();
        manual += model.outcome_mean(1, x) - model.outcome_mean(0, x);
    }
    CHECK(known.estimate == doctest::Approx(manual / static_cast<double>(data.n())).epsilon(1e-12));

    const auto sub = run_estimator(EstimatorSpec{"a", "subclass", "ps*", "logistic", "zero", {}, 1}, data);
    CHECK(sub.estimate == face(data).estimate);

    const auto intercepts = run_estimator(
        EstimatorSpec{"a", "reg", "x", "logistic", "zero", std::vector<int>{}}, data);
    CHECK(intercepts.estimate == doctest::Approx(face(data).estimate).epsilon(1e-12));
}

TEST_CASE("summary files") {
    auto plan = small_plan(1);
    plan.replicates = 5;
    const auto summary = run_experiment(plan);
    const auto dir = std::filesystem::temp_directory_path() / "acekit_test_harness_out";
    std::filesystem::remove_all(dir);
    write_summary(summary, dir);
    CHECK(std::filesystem::exists(dir / "summary.csv"));
    CHECK(std::filesystem::exists(dir / "hist_face.csv"));
    std::ifstream json_in(dir / "summary.json");
    const auto j = nlohmann::json::parse(json_in);
    CHECK(j.at("estimators").size() == 2);
    CHECK(j.at("seed") == 31);
    std::ifstream csv_in(dir / "summary.csv");
    std::string header;
    std::getline(csv_in, header);
    CHECK(header == "estimator,method,mean,sd,mse,successes,failures");
    std::ifstream hist_in(dir / "hist_face.csv");
    std::getline(hist_in, header);
    CHECK(header == "bin_left,bin_right,count");
    std::filesystem::remove_all(dir);
}

TEST_CASE("propensity densities") {
    CHECK(silverman_bandwidth({1.0, 1.0, 1.0}) == 1e-3);
    const double h = silverman_bandwidth({0.0, 1.0, 2.0, 3.0});
    const double sd = std::sqrt(5.0 / 3.0);
    CHECK(h == doctest::Approx(0.9 * std::min(sd, 1.5 / 1.34) * std::pow(4.0, -0.2)));

    SeededRng rng(8);
    const auto data = generate(scenario("fig10").model, 2000, Regime::Observational, rng);
    const auto fit = estimate_ps_logistic(data);
    const auto density = ps_density(fit.evaluate_rows(data.x()), data.t());
    REQUIRE(density.grid.size() == 101);
    CHECK(density.grid.front() == 0.0);
    CHECK(density.grid.back() == 1.0);
    CHECK(density.n_control + density.n_treated == 2000);
    double mass0 = 0.0;
    double mass1 = 0.0;
    for (std::size_t i = 0; i + 1 < density.grid.size(); ++i) {
        const double w = density.grid[i + 1] - density.grid[i];
        mass0 += 0.5 * w * (density.control[i] + density.control[i + 1]);
        mass1 += 0.5 * w * (density.treated[i] + density.treated[i + 1]);
    }
    CHECK(mass0 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(mass1 == doctest::Approx(1.0).epsilon(0.05));
    const VectorXd short_t = VectorXd::Zero(3);
    CHECK(kind_of([&] { ps_density(VectorXd::Zero(2), short_t); }) == ErrorKind::DimensionMismatch);
}
