#pragma once

#include <optional>
#include <string_view>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "acekit/dataset.hpp"
#include "acekit/models.hpp"
#include "acekit/numkit/linalg.hpp"

namespace acekit {

enum class ScoreKind { PS, LD, QD, LP, EstimatedPS, EstimatedLD, EstimatedQD };

std::string_view to_string(ScoreKind kind) noexcept;
ScoreKind score_kind_from_string(std::string_view name);

// x -> intercept + linear'x + x'Qx. Probability kinds (PS, EstimatedPS) report
// expit of that value, i.e. the stored terms live on the logit scale.
class PropensityFunction {
public:
    PropensityFunction(ScoreKind kind, double intercept, Eigen::VectorXd linear,
                       Eigen::MatrixXd quad);

    static PropensityFunction linear_score(ScoreKind kind, double intercept,
                                           Eigen::VectorXd linear);
    // A probability that does not depend on x.
    static PropensityFunction constant_probability(double p, ScoreKind kind = ScoreKind::PS);

    ScoreKind kind() const { return kind_; }
    bool is_probability() const {
        return kind_ == ScoreKind::PS || kind_ == ScoreKind::EstimatedPS;
    }
    double intercept() const { return intercept_; }
    const Eigen::VectorXd& linear() const { return linear_; }
    const Eigen::MatrixXd& quad() const { return quad_; }
    Eigen::Index dim() const { return linear_.size(); }

    // Clamp probability evaluations to [low, high]. Only for probability kinds.
    PropensityFunction with_clipping(double low = 1e-6, double high = 1.0 - 1e-6) const;
    const std::optional<std::pair<double, double>>& clipping() const { return clip_; }

    double raw(const Eigen::VectorXd& x) const;
    double operator()(const Eigen::VectorXd& x) const;
    Eigen::VectorXd evaluate_rows(const Eigen::MatrixXd& x) const;

private:
    ScoreKind kind_;
    double intercept_;
    Eigen::VectorXd linear_;
    Eigen::MatrixXd quad_;
    std::optional<std::pair<double, double>> clip_;
    bool has_quad_ = false;
};

void to_json(nlohmann::json& j, const PropensityFunction& f);
PropensityFunction propensity_from_json(const nlohmann::json& j);

struct GroupMoments {
    double theta = 0.5;
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
    Eigen::MatrixXd sigma0;
    Eigen::MatrixXd sigma1;
    Eigen::MatrixXd pooled;
    bool estimated = false;
};

// theta * lambda / (1 - theta + theta * lambda)
double ps_from_lambda(double lambda, double theta);

GroupMoments population_moments(const NormalLinearModel& model);

// Per-arm means and (n_g - 1)-denominator covariances, theta = n1/n, and the
// pooled within-group dispersion (S0 + S1) / (n - 2).
GroupMoments sample_moments(const Dataset& data);

PropensityFunction ld_from_moments(const GroupMoments& moments);
PropensityFunction qd_from_moments(const GroupMoments& moments, bool include_constant = false);
// Posterior P(T=1 | x) implied by normal group densities, linear (LD) or
// quadratic (QD) in x.
PropensityFunction ps_from_moments(const GroupMoments& moments, bool quadratic);

PropensityFunction population_ld(const NormalLinearModel& model);
PropensityFunction population_qd(const NormalLinearModel& model, bool include_constant = false);
PropensityFunction population_lp(const NormalLinearModel& model);
PropensityFunction population_ps(const NormalLinearModel& model);

PropensityFunction sample_ld(const Dataset& data);
PropensityFunction sample_qd(const Dataset& data, bool include_constant = false);

struct PsOptions {
    bool clip = false;
    double clip_low = 1e-6;
    double clip_high = 1.0 - 1e-6;
    numkit::LogisticOptions logistic{};
};

// Logistic regression of T on (1, X).
PropensityFunction estimate_ps_logistic(const Dataset& data, const PsOptions& options = {});

}  // namespace acekit
