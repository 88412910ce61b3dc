#include "acekit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "acekit/error.hpp"
#include "acekit/numkit/linalg.hpp"

namespace acekit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using numkit::expit;

void to_json(nlohmann::json& j, const AceEstimate& e) {
    j = nlohmann::json{{"method", e.method}, {"estimate", e.estimate}};
    j["se"] = e.se ? nlohmann::json(*e.se) : nlohmann::json(nullptr);
    j["diagnostics"] = e.diagnostics;
}

std::string_view to_string(OutcomeProvenance p) noexcept {
    switch (p) {
        case OutcomeProvenance::FittedJoint: return "FittedJoint";
        case OutcomeProvenance::FittedPerArm: return "FittedPerArm";
        case OutcomeProvenance::Known: return "Known";
        case OutcomeProvenance::Zero: return "Zero";
        case OutcomeProvenance::OptimalBlend: return "OptimalBlend";
    }
    return "Known";
}

OutcomeModel::OutcomeModel(OutcomeProvenance provenance, ArmFunction control,
                           ArmFunction treated)
    : provenance_(provenance), control_(std::move(control)), treated_(std::move(treated)) {}

double OutcomeModel::operator()(int t, const VectorXd& x) const {
    return t == 1 ? treated_(x) : control_(x);
}

OutcomeModel zero_outcome() {
    auto zero = [](const VectorXd&) { return 0.0; };
    return OutcomeModel(OutcomeProvenance::Zero, zero, zero);
}

OutcomeModel constant_outcome(double value) {
    auto constant = [value](const VectorXd&) { return value; };
    return OutcomeModel(OutcomeProvenance::Known, constant, constant);
}

OutcomeModel single_outcome(OutcomeModel::ArmFunction m, OutcomeProvenance provenance) {
    return OutcomeModel(provenance, m, m);
}

OutcomeModel linear_outcome(double intercept0, VectorXd coef0, double intercept1, VectorXd coef1,
                            OutcomeProvenance provenance) {
    auto arm0 = [intercept0, coef0 = std::move(coef0)](const VectorXd& x) {
        return intercept0 + coef0.dot(x);
    };
    auto arm1 = [intercept1, coef1 = std::move(coef1)](const VectorXd& x) {
        return intercept1 + coef1.dot(x);
    };
    return OutcomeModel(provenance, std::move(arm0), std::move(arm1));
}

OutcomeModel known_outcome(const LogisticAssignmentModel& model) {
    model.validate();
    return OutcomeModel(
        OutcomeProvenance::Known, [model](const VectorXd& x) { return model.outcome_mean(0, x); },
        [model](const VectorXd& x) { return model.outcome_mean(1, x); });
}

namespace {

std::vector<Index> resolve_columns(const Dataset& data,
                                   const std::optional<std::vector<Index>>& covariates) {
    std::vector<Index> cols;
    if (covariates) {
        cols = *covariates;
    } else {
        cols.resize(static_cast<std::size_t>(data.p()));
        std::iota(cols.begin(), cols.end(), Index{0});
    }
    for (Index c : cols) {
        if (c < 0 || c >= data.p()) {
            fail(ErrorKind::DimensionMismatch, "covariate index " + std::to_string(c) +
                                                   " out of range for p=" +
                                                   std::to_string(data.p()));
        }
    }
    return cols;
}

VectorXd gather(const VectorXd& x, const std::vector<Index>& cols) {
    VectorXd out(static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out(static_cast<Index>(j)) = x(cols[j]);
    }
    return out;
}

VectorXd row_of(const Dataset& data, Index i) { return data.x().row(i).transpose(); }

struct ArmStats {
    Index count = 0;
    double mean = 0.0;
    double variance = 0.0;  // n - 1 denominator; 0 when count < 2
};

// Accumulates in the order given so that callers visiting the same rows in the
// same order reproduce identical sums.
ArmStats arm_stats(const VectorXd& y, const VectorXd& t, const std::vector<Index>& rows,
                   double arm) {
    ArmStats s;
    double sum = 0.0;
    for (Index i : rows) {
        if (t(i) == arm) {
            sum += y(i);
            ++s.count;
        }
    }
    if (s.count == 0) {
        return s;
    }
    s.mean = sum / static_cast<double>(s.count);
    if (s.count > 1) {
        double ss = 0.0;
        for (Index i : rows) {
            if (t(i) == arm) {
                ss += (y(i) - s.mean) * (y(i) - s.mean);
            }
        }
        s.variance = ss / static_cast<double>(s.count - 1);
    }
    return s;
}

double sample_sd(const VectorXd& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

void require_both_arms(const Dataset& data, const char* who) {
    if (data.treated_count() == 0 || data.control_count() == 0) {
        fail(ErrorKind::EmptyGroup, std::string(who) + ": a treatment arm has no observations");
    }
}

}  // namespace

OutcomeModel fit_outcome_joint(const Dataset& data,
                               std::optional<std::vector<Index>> covariates) {
    data.require_complete();
    const auto cols = resolve_columns(data, covariates);
    const Index k = static_cast<Index>(cols.size());
    MatrixXd design(data.n(), k + 2);
    design.col(0).setOnes();
    design.col(1) = data.t();
    for (Index j = 0; j < k; ++j) {
        design.col(j + 2) = data.x().col(cols[static_cast<std::size_t>(j)]);
    }
    const auto fit = numkit::ols(design, data.y());
    const double b0 = fit.coefficients(0);
    const double bt = fit.coefficients(1);
    VectorXd bx = fit.coefficients.tail(k);
    auto arm = [cols, bx](double base) {
        return [cols, bx, base](const VectorXd& x) { return base + bx.dot(gather(x, cols)); };
    };
    return OutcomeModel(OutcomeProvenance::FittedJoint, arm(b0), arm(b0 + bt));
}

OutcomeModel fit_outcome_per_arm(const Dataset& data,
                                 std::optional<std::vector<Index>> covariates) {
    data.require_complete();
    require_both_arms(data, "fit_outcome_per_arm");
    const auto cols = resolve_columns(data, covariates);
    const Index k = static_cast<Index>(cols.size());
    OutcomeModel::ArmFunction arms[2];
    for (int arm = 0; arm < 2; ++arm) {
        const Index count = arm == 1 ? data.treated_count() : data.control_count();
        MatrixXd design(count, k + 1);
        VectorXd response(count);
        Index r = 0;
        for (Index i = 0; i < data.n(); ++i) {
            if (data.t()(i) != static_cast<double>(arm)) {
                continue;
            }
            design(r, 0) = 1.0;
            for (Index j = 0; j < k; ++j) {
                design(r, j + 1) = data.x()(i, cols[static_cast<std::size_t>(j)]);
            }
            response(r) = data.y()(i);
            ++r;
        }
        const auto fit = numkit::ols(design, response);
        const double b0 = fit.coefficients(0);
        VectorXd bx = fit.coefficients.tail(k);
        arms[arm] = [cols, bx, b0](const VectorXd& x) { return b0 + bx.dot(gather(x, cols)); };
    }
    return OutcomeModel(OutcomeProvenance::FittedPerArm, arms[0], arms[1]);
}

OutcomeModel optimal_m(const PropensityFunction& ps, OutcomeModel::ArmFunction m1,
                       OutcomeModel::ArmFunction m0) {
    if (!ps.is_probability()) {
        fail(ErrorKind::ConfigError, "optimal_m requires a probability-valued propensity score");
    }
    auto blend = [ps, m1 = std::move(m1), m0 = std::move(m0)](const VectorXd& x) {
        const double pi = ps(x);
        return (1.0 - pi) * m1(x) + pi * m0(x);
    };
    return single_outcome(std::move(blend), OutcomeProvenance::OptimalBlend);
}

Adjustment Adjustment::all_covariates(Index p) {
    Adjustment a;
    a.covariates.resize(static_cast<std::size_t>(p));
    std::iota(a.covariates.begin(), a.covariates.end(), Index{0});
    return a;
}

Adjustment Adjustment::covariate_subset(std::vector<Index> columns) {
    Adjustment a;
    a.covariates = std::move(columns);
    return a;
}

Adjustment Adjustment::score(PropensityFunction f) {
    Adjustment a;
    a.scores.push_back(std::move(f));
    return a;
}

AceEstimate face(const Dataset& data) {
    data.require_complete();
    require_both_arms(data, "face");
    std::vector<Index> rows(static_cast<std::size_t>(data.n()));
    std::iota(rows.begin(), rows.end(), Index{0});
    const ArmStats treated = arm_stats(data.y(), data.t(), rows, 1.0);
    const ArmStats control = arm_stats(data.y(), data.t(), rows, 0.0);
    AceEstimate e;
    e.method = "face";
    e.estimate = treated.mean - control.mean;
    if (treated.count > 1 && control.count > 1) {
        e.se = std::sqrt(treated.variance / static_cast<double>(treated.count) +
                         control.variance / static_cast<double>(control.count));
    }
    e.diagnostics["n_treated"] = static_cast<double>(treated.count);
    e.diagnostics["n_control"] = static_cast<double>(control.count);
    return e;
}

AceEstimate regression_adjusted_ace(const Dataset& data, const Adjustment& adjust) {
    data.require_complete();
    const auto cols = resolve_columns(data, adjust.covariates);
    const Index extra = static_cast<Index>(cols.size() + adjust.scores.size());
    MatrixXd design(data.n(), extra + 2);
    design.col(0).setOnes();
    design.col(1) = data.t();
    Index c = 2;
    for (Index col : cols) {
        design.col(c++) = data.x().col(col);
    }
    for (const auto& f : adjust.scores) {
        design.col(c++) = f.evaluate_rows(data.x());
    }
    const auto fit = numkit::ols(design, data.y());
    AceEstimate e;
    e.method = "regression";
    e.estimate = fit.coefficients(1);
    e.se = fit.standard_error(1);
    e.diagnostics["residual_variance"] = fit.residual_variance;
    e.diagnostics["columns"] = static_cast<double>(design.cols());
    return e;
}

AceEstimate subclassification_ace(const Dataset& data, const PropensityFunction& score, int k) {
    data.require_complete();
    const Index n = data.n();
    if (k < 1 || k > n) {
        fail(ErrorKind::ConfigError, "subclassification: need 1 <= k <= n, got k=" +
                                         std::to_string(k));
    }
    const VectorXd s = score.evaluate_rows(data.x());
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return s(a) < s(b) || (s(a) == s(b) && a < b);
    });

    const Index base = n / k;
    const Index larger = n % k;
    double sum_diff = 0.0;
    double sum_var = 0.0;
    bool se_available = true;
    Index min_arm = n;
    Index start = 0;
    for (int j = 0; j < k; ++j) {
        const Index size = base + (j < larger ? 1 : 0);
        std::vector<Index> rows(order.begin() + start, order.begin() + start + size);
        start += size;
        std::sort(rows.begin(), rows.end());
        const ArmStats treated = arm_stats(data.y(), data.t(), rows, 1.0);
        const ArmStats control = arm_stats(data.y(), data.t(), rows, 0.0);
        if (treated.count == 0 || control.count == 0) {
            fail(ErrorKind::EmptySubclassArm,
                 "subclassification: stratum " + std::to_string(j) + " has no " +
                     (treated.count == 0 ? "treated" : "control") + " units");
        }
        min_arm = std::min({min_arm, treated.count, control.count});
        sum_diff += treated.mean - control.mean;
        if (treated.count > 1 && control.count > 1) {
            sum_var += treated.variance / static_cast<double>(treated.count) +
                       control.variance / static_cast<double>(control.count);
        } else {
            se_available = false;
        }
    }
    AceEstimate e;
    e.method = "subclassification";
    e.estimate = sum_diff / static_cast<double>(k);
    if (se_available) {
        e.se = std::sqrt(sum_var) / static_cast<double>(k);
    }
    e.diagnostics["strata"] = static_cast<double>(k);
    e.diagnostics["min_arm_count"] = static_cast<double>(min_arm);
    return e;
}

namespace {

VectorXd checked_ps(const VectorXd& ps, Index n, const WeightOptions& options, Index& clipped) {
    if (ps.size() != n) {
        fail(ErrorKind::DimensionMismatch, "propensity vector length differs from n");
    }
    VectorXd out = ps;
    clipped = 0;
    for (Index i = 0; i < n; ++i) {
        const double pi = out(i);
        if (options.clip) {
            const double c = std::clamp(std::isnan(pi) ? 0.5 : pi, options.clip_low,
                                        options.clip_high);
            if (c != pi) {
                ++clipped;
            }
            out(i) = c;
        } else if (!(pi > 0.0 && pi < 1.0)) {
            fail(ErrorKind::DegeneratePS, "propensity score at row " + std::to_string(i) +
                                              " is " + std::to_string(pi) +
                                              ", outside (0,1)");
        }
    }
    return out;
}

VectorXd evaluate_probability(const PropensityFunction& ps, const Dataset& data) {
    if (!ps.is_probability()) {
        fail(ErrorKind::ConfigError, std::string("weighting needs a probability score, got ") +
                                         std::string(to_string(ps.kind())));
    }
    return ps.evaluate_rows(data.x());
}

AceEstimate augmented(const Dataset& data, const VectorXd& ps_in, const VectorXd* m1,
                      const VectorXd* m0, const WeightOptions& options, const char* method) {
    data.require_complete();
    const Index n = data.n();
    if (m1 != nullptr && (m1->size() != n || m0->size() != n)) {
        fail(ErrorKind::DimensionMismatch, "outcome predictions length differs from n");
    }
    Index clipped = 0;
    const VectorXd ps = checked_ps(ps_in, n, options, clipped);
    const VectorXd& t = data.t();
    const VectorXd& y = data.y();
    double sum1 = 0.0;
    double sum0 = 0.0;
    double max_weight = 0.0;
    VectorXd contribution(n);
    for (Index i = 0; i < n; ++i) {
        const double w1 = t(i) / ps(i);
        const double w0 = (1.0 - t(i)) / (1.0 - ps(i));
        double a = w1 * y(i);
        double b = w0 * y(i);
        if (m1 != nullptr) {
            a += (1.0 - w1) * (*m1)(i);
            b += (1.0 - w0) * (*m0)(i);
        }
        sum1 += a;
        sum0 += b;
        contribution(i) = a - b;
        max_weight = std::max({max_weight, w1, w0});
    }
    AceEstimate e;
    e.method = method;
    e.estimate = sum1 / static_cast<double>(n) - sum0 / static_cast<double>(n);
    e.se = sample_sd(contribution) / std::sqrt(static_cast<double>(n));
    e.diagnostics["mu1"] = sum1 / static_cast<double>(n);
    e.diagnostics["mu0"] = sum0 / static_cast<double>(n);
    e.diagnostics["min_ps"] = ps.minCoeff();
    e.diagnostics["max_ps"] = ps.maxCoeff();
    e.diagnostics["max_weight"] = max_weight;
    e.diagnostics["clipped"] = static_cast<double>(clipped);
    return e;
}

}  // namespace

AceEstimate ipw_ace(const Dataset& data, const VectorXd& ps, const WeightOptions& options) {
    return augmented(data, ps, nullptr, nullptr, options, "ipw");
}

AceEstimate ipw_ace(const Dataset& data, const PropensityFunction& ps,
                    const WeightOptions& options) {
    return ipw_ace(data, evaluate_probability(ps, data), options);
}

AceEstimate aipw_ace(const Dataset& data, const VectorXd& ps, const VectorXd& m1,
                     const VectorXd& m0, const WeightOptions& options) {
    return augmented(data, ps, &m1, &m0, options, "aipw");
}

AceEstimate aipw_ace(const Dataset& data, const PropensityFunction& ps, const OutcomeModel& m,
                     const WeightOptions& options) {
    data.require_complete();
    const Index n = data.n();
    VectorXd m1(n);
    VectorXd m0(n);
    for (Index i = 0; i < n; ++i) {
        const VectorXd x = row_of(data, i);
        m1(i) = m(1, x);
        m0(i) = m(0, x);
    }
    auto e = aipw_ace(data, evaluate_probability(ps, data), m1, m0, options);
    e.diagnostics["outcome_model"] = static_cast<double>(m.provenance());
    return e;
}

AceEstimate outcome_regression_ace(const Dataset& data, const OutcomeModel& m) {
    data.require_complete();
    const Index n = data.n();
    VectorXd contribution(n);
    for (Index i = 0; i < n; ++i) {
        const VectorXd x = row_of(data, i);
        contribution(i) = m(1, x) - m(0, x);
    }
    AceEstimate e;
    e.method = "outcome_regression";
    e.estimate = contribution.sum() / static_cast<double>(n);
    e.se = sample_sd(contribution) / std::sqrt(static_cast<double>(n));
    return e;
}

VectorXd weighted_response(const Dataset& data, const VectorXd& ps) {
    if (ps.size() != data.n()) {
        fail(ErrorKind::DimensionMismatch, "propensity vector length differs from n");
    }
    VectorXd out(data.n());
    for (Index i = 0; i < data.n(); ++i) {
        const double t = data.t()(i);
        const double w = (1.0 / ps(i) - 1.0) * t + (1.0 / (1.0 - ps(i)) - 1.0) * (1.0 - t);
        out(i) = w * data.y()(i);
    }
    return out;
}

AceEstimate weighted_response_ace(const Dataset& data, const PropensityFunction& ps,
                                  const WeightOptions& options) {
    data.require_complete();
    Index clipped = 0;
    const VectorXd pi = checked_ps(evaluate_probability(ps, data), data.n(), options, clipped);
    const VectorXd ytilde = weighted_response(data, pi);
    const auto fit = numkit::ols(numkit::with_intercept(data.x()), ytilde);
    const VectorXd fitted = numkit::with_intercept(data.x()) * fit.coefficients;
    auto e = aipw_ace(data, pi, fitted, fitted, options);
    e.method = "weighted_response";
    e.diagnostics["clipped"] = static_cast<double>(clipped);
    e.diagnostics["max_abs_weighted_response"] = ytilde.cwiseAbs().maxCoeff();
    return e;
}

double logistic_ace_closed_form(const BinaryLogisticModel& model) {
    model.validate();
    if (model.p != 3 || model.a(2) != 0.0 || model.b(0) != 0.0) {
        fail(ErrorKind::WrongShape,
             "closed-form logistic ACE needs p = 3, a = (a1, a2, 0), b = (0, b2, b3); use "
             "logistic_ace_enumerate");
    }
    const double d = model.d;
    const double delta = model.delta;
    const double b2 = model.b(1);
    const double b3 = model.b(2);
    const double pi2 = model.pi(1);
    const double pi3 = model.pi(2);
    auto diff = [&](double shift) { return expit(d + delta + shift) - expit(d + shift); };
    return pi2 * pi3 * diff(b2 + b3) + (1.0 - pi2) * pi3 * diff(b3) +
           pi2 * (1.0 - pi3) * diff(b2) + (1.0 - pi2) * (1.0 - pi3) * diff(0.0);
}

double logistic_ace_enumerate(const BinaryLogisticModel& model) {
    model.validate();
    if (model.p > 20) {
        fail(ErrorKind::TooManyCovariates, "enumeration over 2^p patterns limited to p <= 20");
    }
    const auto p = static_cast<unsigned>(model.p);
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
        double weight = 1.0;
        double lp = 0.0;
        for (unsigned j = 0; j < p; ++j) {
            const bool on = (mask >> j) & 1u;
            weight *= on ? model.pi(j) : 1.0 - model.pi(j);
            lp += on ? model.b(j) : 0.0;
        }
        total += weight * (expit(model.d + model.delta + lp) - expit(model.d + lp));
    }
    return total;
}

double asymptotic_variance_toy(const NormalLinearModel& model, ToyRegression which) {
    model.validate();
    if (model.p != 2 || !model.homoscedastic()) {
        fail(ErrorKind::WrongShape, "toy asymptotics need p = 2 and a common covariance");
    }
    const MatrixXd& sigma = model.sigma0;
    const double tau = sigma(0, 0);
    if (sigma(1, 1) != tau || sigma(0, 1) != 0.0 || sigma(1, 0) != 0.0) {
        fail(ErrorKind::WrongShape, "toy asymptotics need Sigma = tau * I");
    }
    if (model.mu0(1) != model.mu1(1)) {
        fail(ErrorKind::WrongShape, "toy asymptotics need E(X2 | T) constant");
    }
    const double theta = model.theta;
    const double m11 = model.mu1(0);
    const double m01 = model.mu0(0);
    const double mean_x1 = theta * m11 + (1.0 - theta) * m01;
    const double ex1_sq = tau + theta * m11 * m11 + (1.0 - theta) * m01 * m01;
    const double var_x1 = ex1_sq - mean_x1 * mean_x1;
    const double within_x1 = ex1_sq - theta * m11 * m11 - (1.0 - theta) * m01 * m01;
    const double arm_balance = theta * (1.0 - theta);
    const double b1 = model.b(0);
    const double b2 = model.b(1);
    switch (which) {
        case ToyRegression::M0:
            return model.phi * var_x1 / (arm_balance * within_x1);
        case ToyRegression::M1:
            return (model.phi + b2 * b2 * tau) * var_x1 / (arm_balance * within_x1);
        case ToyRegression::M2: {
            // X2 is balanced across arms, so its W/V ratio is one.
            return (model.phi + b1 * b1 * tau) / arm_balance;
        }
    }
    return 0.0;
}

}  // namespace acekit
