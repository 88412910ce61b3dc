#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "acekit/dataset.hpp"
#include "acekit/models.hpp"
#include "acekit/propensity.hpp"

namespace acekit {

struct AceEstimate {
    std::string method;
    double estimate = 0.0;
    std::optional<double> se;
    std::map<std::string, double> diagnostics;
};

void to_json(nlohmann::json& j, const AceEstimate& e);

enum class OutcomeProvenance { FittedJoint, FittedPerArm, Known, Zero, OptimalBlend };

std::string_view to_string(OutcomeProvenance p) noexcept;

// m(t, x): the working response regression used by the augmented estimators.
class OutcomeModel {
public:
    using ArmFunction = std::function<double(const Eigen::VectorXd&)>;

    OutcomeModel(OutcomeProvenance provenance, ArmFunction control, ArmFunction treated);

    double operator()(int t, const Eigen::VectorXd& x) const;
    const ArmFunction& arm(int t) const { return t == 1 ? treated_ : control_; }
    OutcomeProvenance provenance() const { return provenance_; }

private:
    OutcomeProvenance provenance_;
    ArmFunction control_;
    ArmFunction treated_;
};

OutcomeModel zero_outcome();
OutcomeModel constant_outcome(double value);
// The same function for both arms.
OutcomeModel single_outcome(OutcomeModel::ArmFunction m, OutcomeProvenance provenance);
// m(t, x) = intercept_t + coef_t'x
OutcomeModel linear_outcome(double intercept0, Eigen::VectorXd coef0, double intercept1,
                            Eigen::VectorXd coef1,
                            OutcomeProvenance provenance = OutcomeProvenance::Known);
// m(t, x) = E(Y | X = x, T = t) under the generating model.
OutcomeModel known_outcome(const LogisticAssignmentModel& model);

// Y ~ 1 + T + X[covariates], one fit. No list means all columns; an empty
// list fits intercepts only.
OutcomeModel fit_outcome_joint(const Dataset& data,
                               std::optional<std::vector<Eigen::Index>> covariates = {});
// Y ~ 1 + X[covariates] separately within each arm.
OutcomeModel fit_outcome_per_arm(const Dataset& data,
                                 std::optional<std::vector<Eigen::Index>> covariates = {});

// m(x) = (1 - pi(x)) m1(x) + pi(x) m0(x): the blend minimising the variance of
// the augmented estimator among functions of x.
OutcomeModel optimal_m(const PropensityFunction& ps, OutcomeModel::ArmFunction m1,
                       OutcomeModel::ArmFunction m0);

// Columns added to (1, T) in a regression adjustment.
struct Adjustment {
    std::vector<Eigen::Index> covariates;
    std::vector<PropensityFunction> scores;

    static Adjustment all_covariates(Eigen::Index p);
    static Adjustment covariate_subset(std::vector<Eigen::Index> columns);
    static Adjustment score(PropensityFunction f);
};

struct WeightOptions {
    bool clip = false;
    double clip_low = 1e-6;
    double clip_high = 1.0 - 1e-6;
};

AceEstimate face(const Dataset& data);

// Coefficient of T in the OLS fit of Y on (1, T, adjustment columns).
AceEstimate regression_adjusted_ace(const Dataset& data, const Adjustment& adjust);

// Sort by (score, row index), cut into k strata of floor(n/k) units (the first
// n mod k strata get one more), and average the within-stratum mean differences.
AceEstimate subclassification_ace(const Dataset& data, const PropensityFunction& score, int k);

AceEstimate ipw_ace(const Dataset& data, const Eigen::VectorXd& ps,
                    const WeightOptions& options = {});
AceEstimate ipw_ace(const Dataset& data, const PropensityFunction& ps,
                    const WeightOptions& options = {});

// mu1 - mu0 with mu1 = mean(T Y / pi + (1 - T / pi) m(1, X)) and mu0 likewise.
AceEstimate aipw_ace(const Dataset& data, const Eigen::VectorXd& ps, const Eigen::VectorXd& m1,
                     const Eigen::VectorXd& m0, const WeightOptions& options = {});
AceEstimate aipw_ace(const Dataset& data, const PropensityFunction& ps, const OutcomeModel& m,
                     const WeightOptions& options = {});

// Plug-in response-regression estimator mean(m(1, X) - m(0, X)).
AceEstimate outcome_regression_ace(const Dataset& data, const OutcomeModel& m);

// The weighted response [(1/pi - 1) T + (1/(1 - pi) - 1)(1 - T)] Y, row by row.
Eigen::VectorXd weighted_response(const Dataset& data, const Eigen::VectorXd& ps);

// Regress the weighted response [(1/pi - 1) T + (1/(1 - pi) - 1)(1 - T)] Y on (1, X)
// and use the fit as m(X) in the augmented estimator.
AceEstimate weighted_response_ace(const Dataset& data, const PropensityFunction& ps,
                                  const WeightOptions& options = {});

// Closed form for p = 3, a = (a1, a2, 0)', b = (0, b2, b3)'. Throws WrongShape otherwise.
double logistic_ace_closed_form(const BinaryLogisticModel& model);
// Exact expectation over all 2^p covariate patterns (p <= 20).
double logistic_ace_enumerate(const BinaryLogisticModel& model);

enum class ToyRegression {
    M0,  // Y on (T, X1, X2)
    M1,  // Y on (T, X1)
    M2,  // Y on (T, X2)
};

// n * asymptotic Var of the T coefficient for p = 2, Sigma = tau I and
// E(X2 | T) constant.
double asymptotic_variance_toy(const NormalLinearModel& model, ToyRegression which);

}  // namespace acekit
