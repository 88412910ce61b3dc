#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "acekit/dataset.hpp"
#include "acekit/estimators.hpp"
#include "acekit/simgen.hpp"

namespace acekit {

// One configured estimator.
//
// method   face | reg | subclass | ipw | aipw | outcome | wresp
// adjust   score used by reg and subclass:
//            x          the covariate columns (all, or `covariates`)
//            lp ld qd ps        population objects (needs a generating model)
//            ld* qd* ps*        sample discriminants, logistic-fitted PS
// ps       propensity used by ipw, aipw and wresp:
//            true | logistic | ld | qd | marginal | const:<p>
//          ld and qd are the discriminant posteriors from sample moments.
// m        outcome model used by aipw and outcome:
//            zero | const:<v> | joint | per-arm | known
//            optimal:<base>   (1 - pi) m1 + pi m0 built from <base> and ps
//            m1-only:<base>   m(t, x) = m1(x) for both arms
// covariates  1-based columns for reg on x and for fitted m; absent means all.
struct EstimatorSpec {
    std::string name;
    std::string method;
    std::string adjust = "x";
    std::string ps = "logistic";
    std::string m = "zero";
    std::optional<std::vector<int>> covariates;
    int k = 5;
    bool clip = false;
};

void to_json(nlohmann::json& j, const EstimatorSpec& s);
EstimatorSpec estimator_spec_from_json(const nlohmann::json& j);

// Throws ConfigError for unknown tokens or options that the model cannot
// supply (population scores without a generating model, for instance).
AceEstimate run_estimator(const EstimatorSpec& spec, const Dataset& data,
                          const ScenarioModel* population = nullptr);

PropensityFunction resolve_score(const std::string& token, const Dataset& data,
                                 const ScenarioModel* population);
PropensityFunction resolve_ps(const std::string& token, const Dataset& data,
                              const ScenarioModel* population, bool clip);
OutcomeModel resolve_outcome(const std::string& token, const Dataset& data,
                             const ScenarioModel* population, const PropensityFunction* ps,
                             const std::optional<std::vector<int>>& covariates);

std::vector<EstimatorSpec> default_estimators(const Scenario& s);

struct ExperimentPlan {
    Scenario scenario;
    int replicates = 1;
    Eigen::Index n = 0;
    std::uint64_t seed = 31;
    int workers = 1;
    std::vector<EstimatorSpec> estimators;

    // Throws ConfigError.
    void validate() const;
};

// Scenario defaults for n, replicates and estimators; seed 31.
ExperimentPlan default_plan(const Scenario& s);

struct EstimatorSummary {
    std::string name;
    std::string method;
    std::optional<double> mean;
    std::optional<double> sd;
    std::optional<double> mse;
    int successes = 0;
    int failures = 0;
    std::map<std::string, int> failure_kinds;
    std::vector<std::optional<double>> estimates;  // by replicate
    std::vector<int> histogram;
};

struct McSummary {
    std::string scenario;
    double true_ace = 0.0;
    Eigen::Index n = 0;
    int replicates = 0;
    std::uint64_t seed = 0;
    long treatment_redraws = 0;
    std::vector<double> histogram_edges;
    std::vector<EstimatorSummary> estimators;

    const EstimatorSummary& at(const std::string& name) const;
};

void to_json(nlohmann::json& j, const McSummary& s);

// Replicate r draws its dataset from stream r of the master seed. Estimator
// failures are counted and excluded; the result does not depend on workers.
McSummary run_experiment(const ExperimentPlan& plan);

// Values below the first edge or above the last fall into the end bins.
std::vector<int> histogram_counts(const std::vector<double>& values,
                                  const std::vector<double>& edges);

// summary.json, summary.csv and hist_<estimator>.csv.
void write_summary(const McSummary& summary, const std::filesystem::path& dir);
std::string summary_csv(const McSummary& summary);

struct PsDensity {
    std::vector<double> grid;
    std::vector<double> control;
    std::vector<double> treated;
    double bandwidth_control = 0.0;
    double bandwidth_treated = 0.0;
    Eigen::Index n_control = 0;
    Eigen::Index n_treated = 0;
};

void to_json(nlohmann::json& j, const PsDensity& d);

// 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to sd, then 1e-3, when degenerate.
double silverman_bandwidth(std::vector<double> values);

// Gaussian kernel densities of the scores within each arm on an even grid over [0, 1].
PsDensity ps_density(const Eigen::VectorXd& ps, const Eigen::VectorXd& t, int grid_points = 101);

}  // namespace acekit
