#include "acekit/simgen.hpp"

#include <cmath>
#include <string>

#include "acekit/error.hpp"
#include "acekit/estimators.hpp"
#include "acekit/numkit/linalg.hpp"

namespace acekit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using numkit::SeededRng;

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Observational: return "observational";
        case Regime::InterventionT0: return "intervention_t0";
        case Regime::InterventionT1: return "intervention_t1";
    }
    return "observational";
}

namespace {

constexpr int kMaxTreatmentRedraws = 1000;

void require_n(Index n) {
    if (n < 1) {
        fail(ErrorKind::ConfigError, "sample size must be positive");
    }
}

bool both_arms(const VectorXd& t) {
    const double treated = t.sum();
    return treated > 0.0 && treated < static_cast<double>(t.size());
}

// Fills t from per-row probabilities, redrawing the whole vector while an arm
// is empty (observational regime with n >= 2 only).
int draw_treatment(VectorXd& t, const VectorXd& prob, Regime regime, SeededRng& rng) {
    const Index n = prob.size();
    if (regime != Regime::Observational) {
        t.setConstant(n, regime == Regime::InterventionT1 ? 1.0 : 0.0);
        return 0;
    }
    t.resize(n);
    for (int redraws = 0; redraws <= kMaxTreatmentRedraws; ++redraws) {
        for (Index i = 0; i < n; ++i) {
            t(i) = rng.bernoulli(prob(i)) ? 1.0 : 0.0;
        }
        if (n < 2 || both_arms(t)) {
            return redraws;
        }
    }
    fail(ErrorKind::EmptyGroup, "generator: could not draw both treatment arms");
}

}  // namespace

Dataset generate_normal(const NormalLinearModel& model, Index n, Regime regime, SeededRng& rng) {
    model.validate();
    require_n(n);
    const numkit::MvnSampler arm0(model.mu0, model.sigma0);
    const numkit::MvnSampler arm1(model.mu1, model.sigma1);
    VectorXd t;
    const int redraws = draw_treatment(t, VectorXd::Constant(n, model.theta), regime, rng);

    MatrixXd x(n, model.p);
    VectorXd row(model.p);
    for (Index i = 0; i < n; ++i) {
        bool group = t(i) == 1.0;
        if (regime != Regime::Observational) {
            group = rng.bernoulli(model.theta);
        }
        (group ? arm1 : arm0).draw_into(rng, row);
        x.row(i) = row.transpose();
    }
    VectorXd y(n);
    const double noise_sd = std::sqrt(model.phi);
    for (Index i = 0; i < n; ++i) {
        y(i) = model.d + model.delta * t(i) + x.row(i).dot(model.b) + noise_sd * rng.normal();
    }
    Dataset data(std::move(x), std::move(t), std::move(y));
    data.treatment_redraws = redraws;
    return data;
}

Dataset generate_logistic(const BinaryLogisticModel& model, Index n, Regime regime,
                          SeededRng& rng) {
    model.validate();
    require_n(n);
    MatrixXd x(n, model.p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < model.p; ++j) {
            x(i, j) = rng.bernoulli(model.pi(j)) ? 1.0 : 0.0;
        }
    }
    VectorXd prob(n);
    for (Index i = 0; i < n; ++i) {
        prob(i) = numkit::expit(model.c + x.row(i).dot(model.a));
    }
    VectorXd t;
    const int redraws = draw_treatment(t, prob, regime, rng);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        const double eta = model.d + model.delta * t(i) + x.row(i).dot(model.b);
        y(i) = rng.bernoulli(numkit::expit(eta)) ? 1.0 : 0.0;
    }
    Dataset data(std::move(x), std::move(t), std::move(y));
    data.treatment_redraws = redraws;
    return data;
}

Dataset generate_assignment(const LogisticAssignmentModel& model, Index n, Regime regime,
                            SeededRng& rng) {
    model.validate();
    require_n(n);
    MatrixXd x = numkit::mvn_sample(rng, model.mean, model.cov, n);
    VectorXd prob(n);
    for (Index i = 0; i < n; ++i) {
        prob(i) = numkit::expit(model.c + x.row(i).dot(model.a));
    }
    VectorXd t;
    const int redraws = draw_treatment(t, prob, regime, rng);
    VectorXd y(n);
    const double noise_sd = std::sqrt(model.phi);
    for (Index i = 0; i < n; ++i) {
        y(i) = model.d + model.delta * t(i) + x.row(i).dot(model.b) +
               t(i) * x.row(i).dot(model.effect_modifier) + noise_sd * rng.normal();
    }
    Dataset data(std::move(x), std::move(t), std::move(y));
    data.treatment_redraws = redraws;
    return data;
}

Dataset generate(const ScenarioModel& model, Index n, Regime regime, SeededRng& rng) {
    return std::visit(
        [&](const auto& m) -> Dataset {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, NormalLinearModel>) {
                return generate_normal(m, n, regime, rng);
            } else if constexpr (std::is_same_v<M, BinaryLogisticModel>) {
                return generate_logistic(m, n, regime, rng);
            } else {
                return generate_assignment(m, n, regime, rng);
            }
        },
        model);
}

double true_ace(const ScenarioModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, NormalLinearModel>) {
                return m.delta;
            } else if constexpr (std::is_same_v<M, BinaryLogisticModel>) {
                return logistic_ace_enumerate(m);
            } else {
                return m.true_ace();
            }
        },
        model);
}

Index covariate_dim(const ScenarioModel& model) {
    return std::visit([](const auto& m) { return m.p; }, model);
}

NormalLinearModel fig5_model() {
    NormalLinearModel m;
    m.p = 2;
    m.d = 0.0;
    m.delta = 0.5;
    m.b = VectorXd(2);
    m.b << 0.0, 1.0;
    m.phi = 1.0;
    m.theta = 0.5;
    m.mu0 = VectorXd::Zero(2);
    m.mu1 = VectorXd(2);
    m.mu1 << 1.0, 0.0;
    m.sigma0 = MatrixXd::Identity(2, 2);
    m.sigma1 = MatrixXd::Identity(2, 2);
    return m;
}

NormalLinearModel fig6_7_model() {
    NormalLinearModel m;
    m.p = 20;
    m.d = 0.0;
    m.delta = 0.5;
    m.b = VectorXd::Zero(20);
    m.b(1) = 1.0;
    m.phi = 1.0;
    m.theta = 0.5;
    m.mu0 = VectorXd::Zero(20);
    m.mu1 = VectorXd::Zero(20);
    m.mu1(0) = 0.5;
    VectorXd diag0(20);
    diag0.head(10).setConstant(0.8);
    diag0.tail(10).setConstant(1.3);
    m.sigma0 = diag0.asDiagonal();
    m.sigma1 = MatrixXd::Identity(20, 20);
    return m;
}

// Not taken from any published table: a nondegenerate logistic assignment on
// X1, X2 with X2 also driving the response, so the raw contrast is confounded.
LogisticAssignmentModel fig10_model() {
    LogisticAssignmentModel m;
    m.p = 4;
    m.mean = VectorXd::Zero(4);
    m.cov = MatrixXd::Identity(4, 4);
    m.c = 0.0;
    m.a = VectorXd(4);
    m.a << 0.4, 0.4, 0.0, 0.0;
    m.d = 0.0;
    m.delta = 0.5;
    m.b = VectorXd(4);
    m.b << 0.0, 1.0, 1.0, 0.0;
    m.effect_modifier = VectorXd::Zero(4);
    m.phi = 1.0;
    return m;
}

BinaryLogisticModel logit_toy_model() {
    BinaryLogisticModel m;
    m.p = 3;
    m.pi = VectorXd(3);
    m.pi << 0.3, 0.5, 0.6;
    m.c = -0.5;
    m.a = VectorXd(3);
    m.a << 1.2, -0.8, 0.0;
    m.d = -1.0;
    m.delta = 0.8;
    m.b = VectorXd(3);
    m.b << 0.0, 1.1, -0.7;
    return m;
}

std::vector<double> histogram_edges(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) {
        fail(ErrorKind::ConfigError, "histogram edges need lo < hi and step > 0");
    }
    std::vector<double> edges;
    const auto count = static_cast<long>(std::llround((hi - lo) / step));
    for (long i = 0; i <= count; ++i) {
        edges.push_back(lo + static_cast<double>(i) * step);
    }
    return edges;
}

std::vector<std::string> scenario_names() {
    return {"fig5", "fig6_7", "fig10", "fig10_heavy", "fig10_hetero", "logit_toy"};
}

Scenario scenario(std::string_view name) {
    Scenario s;
    s.name = std::string(name);
    if (name == "fig5") {
        s.model = fig5_model();
        s.n = 20;
        s.replicates = 200;
        s.histogram_edges = histogram_edges(-2.5, 2.5, 0.5);
    } else if (name == "fig6_7") {
        s.model = fig6_7_model();
        s.n = 500;
        s.replicates = 200;
        s.histogram_edges = histogram_edges(-0.1, 1.1, 0.1);
    } else if (name == "fig10" || name == "fig10_heavy" || name == "fig10_hetero") {
        auto m = fig10_model();
        if (name == "fig10_heavy") {
            m.a << 1.5, 1.5, 0.0, 0.0;
        } else if (name == "fig10_hetero") {
            m.effect_modifier << 0.5, 0.0, 0.5, 0.0;
        }
        s.model = m;
        s.n = 500;
        s.replicates = 100;
        s.histogram_edges = histogram_edges(-0.1, 1.1, 0.1);
    } else if (name == "logit_toy") {
        const auto m = logit_toy_model();
        s.model = m;
        s.n = 1000;
        s.replicates = 200;
        s.histogram_edges = histogram_edges(-0.2, 0.6, 0.05);
    } else {
        fail(ErrorKind::UnknownScenario, "unknown scenario '" + std::string(name) + "'");
    }
    return s;
}

namespace {

using nlohmann::json;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        rows.push_back(vec_json(m.row(r).transpose()));
    }
    return rows;
}

VectorXd vec_from(const json& j, Index p, const char* name) {
    const auto v = j.at(name).get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != p) {
        fail(ErrorKind::WrongShape, std::string("scenario json: ") + name + " must have length " +
                                        std::to_string(p));
    }
    return Eigen::Map<const VectorXd>(v.data(), p);
}

MatrixXd mat_from(const json& j, Index p, const char* name) {
    const auto rows = j.at(name).get<std::vector<std::vector<double>>>();
    if (static_cast<Index>(rows.size()) != p) {
        fail(ErrorKind::WrongShape, std::string("scenario json: ") + name + " must be p x p");
    }
    MatrixXd m(p, p);
    for (Index r = 0; r < p; ++r) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != p) {
            fail(ErrorKind::WrongShape, std::string("scenario json: ") + name + " must be p x p");
        }
        for (Index c = 0; c < p; ++c) {
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    return m;
}

}  // namespace

void to_json(json& j, const ScenarioModel& model) {
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, NormalLinearModel>) {
                j = json{{"type", "normal_linear"}, {"p", m.p},         {"d", m.d},
                         {"delta", m.delta},        {"b", vec_json(m.b)}, {"phi", m.phi},
                         {"theta", m.theta},        {"mu0", vec_json(m.mu0)},
                         {"mu1", vec_json(m.mu1)},  {"sigma0", mat_json(m.sigma0)},
                         {"sigma1", mat_json(m.sigma1)}};
            } else if constexpr (std::is_same_v<M, BinaryLogisticModel>) {
                j = json{{"type", "binary_logistic"}, {"p", m.p},         {"pi", vec_json(m.pi)},
                         {"c", m.c},                  {"a", vec_json(m.a)}, {"d", m.d},
                         {"delta", m.delta},          {"b", vec_json(m.b)}};
            } else {
                j = json{{"type", "logistic_assignment"},
                         {"p", m.p},
                         {"mean", vec_json(m.mean)},
                         {"cov", mat_json(m.cov)},
                         {"c", m.c},
                         {"a", vec_json(m.a)},
                         {"d", m.d},
                         {"delta", m.delta},
                         {"b", vec_json(m.b)},
                         {"effect_modifier", vec_json(m.effect_modifier)},
                         {"phi", m.phi}};
            }
        },
        model);
}

ScenarioModel scenario_model_from_json(const json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        const Index p = j.at("p").get<Index>();
        if (type == "normal_linear") {
            NormalLinearModel m;
            m.p = p;
            m.d = j.at("d").get<double>();
            m.delta = j.at("delta").get<double>();
            m.b = vec_from(j, p, "b");
            m.phi = j.at("phi").get<double>();
            m.theta = j.at("theta").get<double>();
            m.mu0 = vec_from(j, p, "mu0");
            m.mu1 = vec_from(j, p, "mu1");
            m.sigma0 = mat_from(j, p, "sigma0");
            m.sigma1 = mat_from(j, p, "sigma1");
            m.validate();
            return m;
        }
        if (type == "binary_logistic") {
            BinaryLogisticModel m;
            m.p = p;
            m.pi = vec_from(j, p, "pi");
            m.c = j.at("c").get<double>();
            m.a = vec_from(j, p, "a");
            m.d = j.at("d").get<double>();
            m.delta = j.at("delta").get<double>();
            m.b = vec_from(j, p, "b");
            m.validate();
            return m;
        }
        if (type == "logistic_assignment") {
            LogisticAssignmentModel m;
            m.p = p;
            m.mean = vec_from(j, p, "mean");
            m.cov = mat_from(j, p, "cov");
            m.c = j.at("c").get<double>();
            m.a = vec_from(j, p, "a");
            m.d = j.at("d").get<double>();
            m.delta = j.at("delta").get<double>();
            m.b = vec_from(j, p, "b");
            m.effect_modifier = j.contains("effect_modifier")
                                    ? vec_from(j, p, "effect_modifier")
                                    : VectorXd::Zero(p);
            m.phi = j.at("phi").get<double>();
            m.validate();
            return m;
        }
        fail(ErrorKind::ParseError, "scenario json: unknown model type '" + type + "'");
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("scenario json: ") + e.what());
    }
}

void to_json(json& j, const Scenario& s) {
    j = json{{"name", s.name},
             {"model", s.model},
             {"n", s.n},
             {"replicates", s.replicates},
             {"histogram_edges", s.histogram_edges}};
}

Scenario scenario_from_json(const json& j) {
    try {
        Scenario s;
        s.name = j.value("name", std::string("custom"));
        s.model = scenario_model_from_json(j.at("model"));
        s.n = j.at("n").get<Index>();
        s.replicates = j.at("replicates").get<int>();
        if (j.contains("histogram_edges")) {
            s.histogram_edges = j.at("histogram_edges").get<std::vector<double>>();
        } else {
            const double ace = true_ace(s.model);
            s.histogram_edges = histogram_edges(ace - 1.0, ace + 1.0, 0.1);
        }
        return s;
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("scenario json: ") + e.what());
    }
}

}  // namespace acekit
