#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "acekit/dataset.hpp"
#include "acekit/models.hpp"
#include "acekit/numkit/rng.hpp"

namespace acekit {

enum class Regime { Observational, InterventionT0, InterventionT1 };

std::string_view to_string(Regime r) noexcept;

// Observational: T ~ Bernoulli(theta), X | T ~ N(mu_T, Sigma_T).
// Interventional: T fixed and X drawn from the theta-mixture of the two
// arm distributions, so the covariate law is the same in every regime.
Dataset generate_normal(const NormalLinearModel& model, Eigen::Index n, Regime regime,
                        numkit::SeededRng& rng);

Dataset generate_logistic(const BinaryLogisticModel& model, Eigen::Index n, Regime regime,
                          numkit::SeededRng& rng);

Dataset generate_assignment(const LogisticAssignmentModel& model, Eigen::Index n, Regime regime,
                            numkit::SeededRng& rng);

using ScenarioModel = std::variant<NormalLinearModel, BinaryLogisticModel, LogisticAssignmentModel>;

Dataset generate(const ScenarioModel& model, Eigen::Index n, Regime regime,
                 numkit::SeededRng& rng);

double true_ace(const ScenarioModel& model);
Eigen::Index covariate_dim(const ScenarioModel& model);

struct Scenario {
    std::string name;
    ScenarioModel model;
    Eigen::Index n = 0;
    int replicates = 0;
    std::vector<double> histogram_edges;
};

// fig5, fig6_7, fig10, fig10_heavy, fig10_hetero, logit_toy.
Scenario scenario(std::string_view name);
std::vector<std::string> scenario_names();

NormalLinearModel fig5_model();
NormalLinearModel fig6_7_model();
LogisticAssignmentModel fig10_model();
BinaryLogisticModel logit_toy_model();

// Evenly spaced edges lo, lo + step, ..., hi.
std::vector<double> histogram_edges(double lo, double hi, double step);

void to_json(nlohmann::json& j, const ScenarioModel& model);
ScenarioModel scenario_model_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace acekit
