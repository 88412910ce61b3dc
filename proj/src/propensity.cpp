#include "acekit/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acekit/error.hpp"

namespace acekit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(ScoreKind kind) noexcept {
    switch (kind) {
        case ScoreKind::PS: return "PS";
        case ScoreKind::LD: return "LD";
        case ScoreKind::QD: return "QD";
        case ScoreKind::LP: return "LP";
        case ScoreKind::EstimatedPS: return "EstimatedPS";
        case ScoreKind::EstimatedLD: return "EstimatedLD";
        case ScoreKind::EstimatedQD: return "EstimatedQD";
    }
    return "PS";
}

ScoreKind score_kind_from_string(std::string_view name) {
    for (auto kind : {ScoreKind::PS, ScoreKind::LD, ScoreKind::QD, ScoreKind::LP,
                      ScoreKind::EstimatedPS, ScoreKind::EstimatedLD, ScoreKind::EstimatedQD}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    fail(ErrorKind::ParseError, "unknown propensity kind '" + std::string(name) + "'");
}

PropensityFunction::PropensityFunction(ScoreKind kind, double intercept, VectorXd linear,
                                       MatrixXd quad)
    : kind_(kind), intercept_(intercept), linear_(std::move(linear)), quad_(std::move(quad)) {
    const Index p = linear_.size();
    if (quad_.rows() != p || quad_.cols() != p) {
        fail(ErrorKind::DimensionMismatch, "propensity: quadratic part must be p x p");
    }
    if ((kind_ == ScoreKind::LD || kind_ == ScoreKind::EstimatedLD || kind_ == ScoreKind::LP) &&
        !quad_.isZero(0.0)) {
        fail(ErrorKind::DomainError, "propensity: linear kinds carry no quadratic part");
    }
    if (p > 0 && (quad_ - quad_.transpose()).cwiseAbs().maxCoeff() != 0.0) {
        quad_ = 0.5 * (quad_ + quad_.transpose()).eval();
    }
    has_quad_ = !quad_.isZero(0.0);
}

PropensityFunction PropensityFunction::linear_score(ScoreKind kind, double intercept,
                                                    VectorXd linear) {
    const Index p = linear.size();
    return PropensityFunction(kind, intercept, std::move(linear), MatrixXd::Zero(p, p));
}

PropensityFunction PropensityFunction::constant_probability(double p, ScoreKind kind) {
    return linear_score(kind, numkit::logit(p), VectorXd());
}

PropensityFunction PropensityFunction::with_clipping(double low, double high) const {
    if (!is_probability()) {
        fail(ErrorKind::ConfigError, "clipping applies to probability scores only");
    }
    if (!(low > 0.0 && low < high && high < 1.0)) {
        fail(ErrorKind::DomainError, "clipping bounds must satisfy 0 < low < high < 1");
    }
    PropensityFunction out = *this;
    out.clip_ = std::make_pair(low, high);
    return out;
}

double PropensityFunction::raw(const VectorXd& x) const {
    if (linear_.size() == 0) {
        return intercept_;
    }
    if (x.size() != linear_.size()) {
        fail(ErrorKind::DimensionMismatch, "propensity: expected " +
                                               std::to_string(linear_.size()) +
                                               " covariates, got " + std::to_string(x.size()));
    }
    double value = intercept_ + linear_.dot(x);
    if (has_quad_) {
        value += x.dot(quad_ * x);
    }
    return value;
}

double PropensityFunction::operator()(const VectorXd& x) const {
    const double value = raw(x);
    if (!is_probability()) {
        return value;
    }
    double prob = numkit::expit(value);
    if (clip_) {
        prob = std::clamp(prob, clip_->first, clip_->second);
    }
    return prob;
}

VectorXd PropensityFunction::evaluate_rows(const MatrixXd& x) const {
    VectorXd out(x.rows());
    VectorXd row(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        row = x.row(i).transpose();
        out(i) = (*this)(row);
    }
    return out;
}

void to_json(nlohmann::json& j, const PropensityFunction& f) {
    std::vector<double> linear(f.linear().data(), f.linear().data() + f.linear().size());
    std::vector<std::vector<double>> quad(static_cast<std::size_t>(f.dim()));
    for (Index r = 0; r < f.dim(); ++r) {
        for (Index c = 0; c < f.dim(); ++c) {
            quad[static_cast<std::size_t>(r)].push_back(f.quad()(r, c));
        }
    }
    j = nlohmann::json{{"kind", std::string(to_string(f.kind()))},
                       {"intercept", f.intercept()},
                       {"linear", linear},
                       {"quad", quad}};
    if (f.clipping()) {
        j["clip"] = {f.clipping()->first, f.clipping()->second};
    }
}

PropensityFunction propensity_from_json(const nlohmann::json& j) {
    try {
        const ScoreKind kind = score_kind_from_string(j.at("kind").get<std::string>());
        const auto linear = j.at("linear").get<std::vector<double>>();
        const auto quad = j.at("quad").get<std::vector<std::vector<double>>>();
        const auto p = static_cast<Index>(linear.size());
        VectorXd lin = Eigen::Map<const VectorXd>(linear.data(), p);
        MatrixXd q = MatrixXd::Zero(p, p);
        if (static_cast<Index>(quad.size()) != p) {
            fail(ErrorKind::ParseError, "propensity json: quad must have one row per covariate");
        }
        for (Index r = 0; r < p; ++r) {
            const auto& row = quad[static_cast<std::size_t>(r)];
            if (static_cast<Index>(row.size()) != p) {
                fail(ErrorKind::ParseError, "propensity json: quad row length mismatch");
            }
            for (Index c = 0; c < p; ++c) {
                q(r, c) = row[static_cast<std::size_t>(c)];
            }
        }
        PropensityFunction f(kind, j.at("intercept").get<double>(), std::move(lin), std::move(q));
        if (j.contains("clip")) {
            const auto bounds = j.at("clip").get<std::vector<double>>();
            if (bounds.size() != 2) {
                fail(ErrorKind::ParseError, "propensity json: clip must be [low, high]");
            }
            f = f.with_clipping(bounds[0], bounds[1]);
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("propensity json: ") + e.what());
    }
}

double ps_from_lambda(double lambda, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) {
        fail(ErrorKind::DomainError, "ps_from_lambda: theta must lie in (0,1)");
    }
    if (!(lambda > 0.0)) {
        fail(ErrorKind::DomainError, "ps_from_lambda: lambda must be positive");
    }
    if (std::isinf(lambda)) {
        return 1.0;
    }
    return theta * lambda / (1.0 - theta + theta * lambda);
}

GroupMoments population_moments(const NormalLinearModel& model) {
    model.validate();
    GroupMoments m;
    m.theta = model.theta;
    m.mu0 = model.mu0;
    m.mu1 = model.mu1;
    m.sigma0 = model.sigma0;
    m.sigma1 = model.sigma1;
    m.pooled = model.homoscedastic()
                   ? model.sigma0
                   : MatrixXd((1.0 - model.theta) * model.sigma0 + model.theta * model.sigma1);
    m.estimated = false;
    return m;
}

GroupMoments sample_moments(const Dataset& data) {
    data.require_complete();
    const Index n = data.n();
    const Index p = data.p();
    const Index n1 = data.treated_count();
    const Index n0 = n - n1;
    if (n1 == 0 || n0 == 0) {
        fail(ErrorKind::EmptyGroup, "sample_moments: a treatment arm has no observations");
    }
    if (n1 < 2 || n0 < 2) {
        fail(ErrorKind::InsufficientGroupSize,
             "sample_moments: each arm needs at least two observations");
    }
    GroupMoments m;
    m.estimated = true;
    m.theta = static_cast<double>(n1) / static_cast<double>(n);
    m.mu0 = VectorXd::Zero(p);
    m.mu1 = VectorXd::Zero(p);
    for (Index i = 0; i < n; ++i) {
        if (data.treated(i)) {
            m.mu1 += data.x().row(i).transpose();
        } else {
            m.mu0 += data.x().row(i).transpose();
        }
    }
    m.mu1 /= static_cast<double>(n1);
    m.mu0 /= static_cast<double>(n0);
    MatrixXd s0 = MatrixXd::Zero(p, p);
    MatrixXd s1 = MatrixXd::Zero(p, p);
    for (Index i = 0; i < n; ++i) {
        if (data.treated(i)) {
            const VectorXd dev = data.x().row(i).transpose() - m.mu1;
            s1.noalias() += dev * dev.transpose();
        } else {
            const VectorXd dev = data.x().row(i).transpose() - m.mu0;
            s0.noalias() += dev * dev.transpose();
        }
    }
    m.sigma0 = s0 / static_cast<double>(n0 - 1);
    m.sigma1 = s1 / static_cast<double>(n1 - 1);
    m.pooled = (s0 + s1) / static_cast<double>(n - 2);
    return m;
}

namespace {

Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& m, const char* what) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::NotPositiveDefinite, std::string(what) + " is not positive definite");
    }
    // LLT only reads one triangle; a semidefinite matrix can slip through with
    // a zero pivot.
    const VectorXd diag = MatrixXd(llt.matrixL()).diagonal();
    if (diag.size() > 0 && !(diag.minCoeff() > 1e-12 * std::max(1.0, diag.maxCoeff()))) {
        fail(ErrorKind::NotPositiveDefinite, std::string(what) + " is numerically singular");
    }
    return llt;
}

struct QuadraticParts {
    VectorXd linear;
    MatrixXd quad;
    double constant;
};

QuadraticParts quadratic_parts(const GroupMoments& m) {
    const Index p = m.mu0.size();
    const auto llt0 = factor_spd(m.sigma0, "control covariance");
    const auto llt1 = factor_spd(m.sigma1, "treated covariance");
    const MatrixXd inv0 = llt0.solve(MatrixXd::Identity(p, p));
    const MatrixXd inv1 = llt1.solve(MatrixXd::Identity(p, p));
    QuadraticParts parts;
    const VectorXd a0 = llt0.solve(m.mu0);
    const VectorXd a1 = llt1.solve(m.mu1);
    parts.linear = a1 - a0;
    parts.quad = -0.5 * (inv1 - inv0);
    parts.quad = 0.5 * (parts.quad + parts.quad.transpose()).eval();
    const double logdet0 = 2.0 * MatrixXd(llt0.matrixL()).diagonal().array().log().sum();
    const double logdet1 = 2.0 * MatrixXd(llt1.matrixL()).diagonal().array().log().sum();
    parts.constant = -0.5 * (logdet1 - logdet0 + m.mu1.dot(a1) - m.mu0.dot(a0));
    return parts;
}

}  // namespace

PropensityFunction ld_from_moments(const GroupMoments& m) {
    const auto llt = factor_spd(m.pooled, "pooled covariance");
    VectorXd gamma = llt.solve(m.mu1 - m.mu0);
    return PropensityFunction::linear_score(m.estimated ? ScoreKind::EstimatedLD : ScoreKind::LD,
                                            0.0, std::move(gamma));
}

PropensityFunction qd_from_moments(const GroupMoments& m, bool include_constant) {
    auto parts = quadratic_parts(m);
    return PropensityFunction(m.estimated ? ScoreKind::EstimatedQD : ScoreKind::QD,
                              include_constant ? parts.constant : 0.0, std::move(parts.linear),
                              std::move(parts.quad));
}

PropensityFunction ps_from_moments(const GroupMoments& m, bool quadratic) {
    const ScoreKind kind = m.estimated ? ScoreKind::EstimatedPS : ScoreKind::PS;
    const double prior = numkit::logit(m.theta);
    if (quadratic) {
        auto parts = quadratic_parts(m);
        return PropensityFunction(kind, prior + parts.constant, std::move(parts.linear),
                                  std::move(parts.quad));
    }
    const auto llt = factor_spd(m.pooled, "pooled covariance");
    VectorXd gamma = llt.solve(m.mu1 - m.mu0);
    const double constant =
        -0.5 * (m.mu1.dot(llt.solve(m.mu1)) - m.mu0.dot(llt.solve(m.mu0)));
    return PropensityFunction::linear_score(kind, prior + constant, std::move(gamma));
}

PropensityFunction population_ld(const NormalLinearModel& model) {
    return ld_from_moments(population_moments(model));
}

PropensityFunction population_qd(const NormalLinearModel& model, bool include_constant) {
    return qd_from_moments(population_moments(model), include_constant);
}

PropensityFunction population_lp(const NormalLinearModel& model) {
    model.validate();
    return PropensityFunction::linear_score(ScoreKind::LP, 0.0, model.b);
}

PropensityFunction population_ps(const NormalLinearModel& model) {
    return ps_from_moments(population_moments(model), true);
}

PropensityFunction sample_ld(const Dataset& data) {
    const GroupMoments m = sample_moments(data);
    if (data.n() - 2 < data.p()) {
        fail(ErrorKind::InsufficientGroupSize,
             "sample_ld: pooled covariance needs n - 2 >= p observations");
    }
    return ld_from_moments(m);
}

PropensityFunction sample_qd(const Dataset& data, bool include_constant) {
    const GroupMoments m = sample_moments(data);
    const Index n1 = data.treated_count();
    if (n1 <= data.p() || data.n() - n1 <= data.p()) {
        fail(ErrorKind::InsufficientGroupSize,
             "sample_qd: each arm needs more than p observations");
    }
    return qd_from_moments(m, include_constant);
}

PropensityFunction estimate_ps_logistic(const Dataset& data, const PsOptions& options) {
    data.require_complete();
    if (data.treated_count() == 0 || data.control_count() == 0) {
        fail(ErrorKind::EmptyGroup, "estimate_ps_logistic: a treatment arm is empty");
    }
    numkit::LogisticOptions lo = options.logistic;
    if (options.clip) {
        lo.throw_on_separation = false;
    }
    const auto fit = numkit::logistic_irls(numkit::with_intercept(data.x()), data.t(), lo);
    VectorXd slopes = fit.coefficients.tail(data.p());
    auto f = PropensityFunction::linear_score(ScoreKind::EstimatedPS, fit.coefficients(0),
                                              std::move(slopes));
    if (options.clip) {
        f = f.with_clipping(options.clip_low, options.clip_high);
    }
    return f;
}

}  // namespace acekit
