#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acekit/numkit/linalg.hpp"
#include "acekit/propensity.hpp"
#include "acekit/simgen.hpp"
#include "support.hpp"

using namespace acekit;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::kind_of;

namespace {

NormalLinearModel scalar_model(double s0, double s1, double m0, double m1) {
    NormalLinearModel m;
    m.p = 1;
    m.b = VectorXd::Zero(1);
    m.mu0 = VectorXd::Constant(1, m0);
    m.mu1 = VectorXd::Constant(1, m1);
    m.sigma0 = MatrixXd::Constant(1, 1, s0);
    m.sigma1 = MatrixXd::Constant(1, 1, s1);
    return m;
}

MatrixXd random_spd(numkit::SeededRng& rng, int p) {
    MatrixXd a(p, p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            a(i, j) = rng.normal();
        }
    }
    return a * a.transpose() + p * MatrixXd::Identity(p, p);
}

}  // namespace

TEST_CASE("ps_from_lambda arithmetic and limits") {
    CHECK(ps_from_lambda(1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(ps_from_lambda(2.0, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(ps_from_lambda(1e300, 0.5) == doctest::Approx(1.0));
    CHECK(ps_from_lambda(1e-300, 0.5) < 1e-299);
    double last = 0.0;
    for (double lambda = 0.01; lambda < 100.0; lambda *= 1.5) {
        const double v = ps_from_lambda(lambda, 0.4);
        CHECK(v > last);
        CHECK(v < 1.0);
        last = v;
    }
    CHECK(ps_from_lambda(3.0, 0.2) < ps_from_lambda(3.0, 0.6));
    CHECK(kind_of([] { ps_from_lambda(1.0, 0.0); }) == ErrorKind::DomainError);
    CHECK(kind_of([] { ps_from_lambda(1.0, 1.0); }) == ErrorKind::DomainError);
    CHECK(kind_of([] { ps_from_lambda(0.0, 0.5); }) == ErrorKind::DomainError);
}

TEST_CASE("population LD for the two-covariate homoscedastic model is X1") {
    const auto ld = population_ld(fig5_model());
    CHECK(ld.kind() == ScoreKind::LD);
    CHECK(ld.intercept() == 0.0);
    CHECK(std::abs(ld.linear()(0) - 1.0) < 1e-15);
    CHECK(std::abs(ld.linear()(1)) < 1e-15);
    CHECK(ld.quad().isZero(0.0));
}

TEST_CASE("heteroscedastic population LD and QD coefficients") {
    const auto model = fig6_7_model();
    const auto ld = population_ld(model);
    CHECK(std::abs(ld.linear()(0) - 5.0 / 9.0) < 1e-12);
    CHECK(ld.linear().tail(19).cwiseAbs().maxCoeff() < 1e-12);

    const auto qd = population_qd(model);
    CHECK(qd.kind() == ScoreKind::QD);
    CHECK(qd.intercept() == 0.0);
    CHECK(std::abs(qd.linear()(0) - 0.5) < 1e-12);
    CHECK(qd.linear().tail(19).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 20; ++i) {
        const double expected = i < 10 ? 1.0 / 8.0 : -3.0 / 26.0;
        CHECK(std::abs(qd.quad()(i, i) - expected) < 1e-12);
        for (int j = 0; j < 20; ++j) {
            if (j != i) {
                CHECK(qd.quad()(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("identical group means give a zero discriminant") {
    auto model = fig5_model();
    model.mu1 = model.mu0;
    const auto ld = population_ld(model);
    CHECK(ld.linear().isZero(0.0));
}

TEST_CASE("scalar QD by hand") {
    const auto qd = population_qd(scalar_model(4.0, 1.0, 0.0, 1.0));
    CHECK(qd.linear()(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(qd.quad()(0, 0) == doctest::Approx(-3.0 / 8.0).epsilon(1e-15));
    VectorXd x(1);
    x << 2.0;
    CHECK(qd(x) == doctest::Approx(2.0 - 1.5).epsilon(1e-15));
}

TEST_CASE("QD degenerates to LD under equal covariances") {
    numkit::SeededRng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const int p = 2 + rep % 4;
        NormalLinearModel m;
        m.p = p;
        m.b = VectorXd::Zero(p);
        m.mu0 = VectorXd::Zero(p);
        m.mu1 = VectorXd::Zero(p);
        for (int j = 0; j < p; ++j) {
            m.mu0(j) = rng.normal();
            m.mu1(j) = rng.normal();
        }
        m.sigma0 = random_spd(rng, p);
        m.sigma1 = m.sigma0;
        const auto qd = population_qd(m);
        const auto ld = population_ld(m);
        CHECK(qd.quad().cwiseAbs().maxCoeff() < 1e-12);
        CHECK((qd.linear() - ld.linear()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("LD evaluation is linear without intercept") {
    const auto ld = population_ld(fig6_7_model());
    numkit::SeededRng rng(4);
    VectorXd x(20);
    for (int j = 0; j < 20; ++j) {
        x(j) = rng.normal();
    }
    CHECK(ld(2.5 * x) == doctest::Approx(2.5 * ld(x)).epsilon(1e-14));
}

TEST_CASE("linear kinds refuse a quadratic part") {
    CHECK(kind_of([] {
              PropensityFunction(ScoreKind::LD, 0.0, VectorXd::Ones(2), MatrixXd::Identity(2, 2));
          }) == ErrorKind::DomainError);
    CHECK(kind_of([] {
              PropensityFunction(ScoreKind::QD, 0.0, VectorXd::Ones(2), MatrixXd::Identity(3, 3));
          }) == ErrorKind::DimensionMismatch);
    MatrixXd asym(2, 2);
    asym << 1.0, 2.0, 0.0, 1.0;
    const PropensityFunction f(ScoreKind::QD, 0.0, VectorXd::Zero(2), asym);
    CHECK(f.quad()(0, 1) == f.quad()(1, 0));
}

TEST_CASE("probability kinds stay in (0,1) and clip on request") {
    const auto ps = population_ps(fig6_7_model());
    CHECK(ps.is_probability());
    auto data = [] {
        numkit::SeededRng rng(8);
        return generate_normal(fig6_7_model(), 1000, Regime::Observational, rng);
    }();
    const VectorXd v = ps.evaluate_rows(data.x());
    CHECK(v.minCoeff() > 0.0);
    CHECK(v.maxCoeff() < 1.0);

    const auto extreme = PropensityFunction::linear_score(ScoreKind::PS, 0.0, VectorXd::Constant(1, 100.0));
    const auto clipped = extreme.with_clipping(0.01, 0.99);
    VectorXd x(1);
    x << 1.0;
    CHECK(clipped(x) == 0.99);
    CHECK(kind_of([] { population_ld(fig5_model()).with_clipping(); }) == ErrorKind::ConfigError);

    const auto half = PropensityFunction::constant_probability(0.25);
    CHECK(half(VectorXd::Ones(7)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sample moments by hand") {
    // p = 1; controls {1, 3}, treated {2, 6}
    const auto data = testing::rows({{1, 0, 0}, {2, 1, 0}, {3, 0, 0}, {6, 1, 0}});
    const auto m = sample_moments(data);
    CHECK(m.theta == 0.5);
    CHECK(m.mu0(0) == 2.0);
    CHECK(m.mu1(0) == 4.0);
    CHECK(m.sigma0(0, 0) == 2.0);
    CHECK(m.sigma1(0, 0) == 8.0);
    CHECK(m.pooled(0, 0) == doctest::Approx(10.0 / 2.0));
    CHECK(m.estimated);
}

TEST_CASE("duplicated groups give equal moments and a constant LD*") {
    const auto data = testing::rows({{1, 2, 0, 0}, {1, 2, 1, 0}, {3, -1, 0, 0}, {3, -1, 1, 0},
                                     {0, 5, 0, 0}, {0, 5, 1, 0}, {2, 2, 0, 0}, {2, 2, 1, 0}});
    const auto m = sample_moments(data);
    CHECK(m.mu0 == m.mu1);
    CHECK(m.sigma0 == m.sigma1);
    const auto ld = sample_ld(data);
    CHECK(ld.kind() == ScoreKind::EstimatedLD);
    CHECK(ld.linear().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample moments converge to the heteroscedastic parameters") {
    const auto model = fig6_7_model();
    numkit::SeededRng rng(21);
    const auto data = generate_normal(model, 40000, Regime::Observational, rng);
    const auto m = sample_moments(data);
    CHECK(std::abs(m.theta - 0.5) < 0.02);
    CHECK((m.mu0 - model.mu0).cwiseAbs().maxCoeff() < 0.05);
    CHECK((m.mu1 - model.mu1).cwiseAbs().maxCoeff() < 0.05);
    CHECK((m.sigma0 - model.sigma0).cwiseAbs().maxCoeff() < 0.07);
    CHECK((m.sigma1 - model.sigma1).cwiseAbs().maxCoeff() < 0.07);
}

TEST_CASE("sample LD* converges to X1 and composes with moments bit for bit") {
    numkit::SeededRng rng(22);
    const auto data = generate_normal(fig5_model(), 50000, Regime::Observational, rng);
    const auto ld = sample_ld(data);
    CHECK(std::abs(ld.linear()(0) - 1.0) < 0.05);
    CHECK(std::abs(ld.linear()(1)) < 0.05);
    const auto composed = ld_from_moments(sample_moments(data));
    CHECK(composed.linear() == ld.linear());
    CHECK(composed.intercept() == ld.intercept());

    const auto qd = sample_qd(data);
    CHECK(qd.kind() == ScoreKind::EstimatedQD);
    CHECK(qd.linear() == qd_from_moments(sample_moments(data)).linear());
}

TEST_CASE("sample moment error paths") {
    CHECK(kind_of([] { sample_moments(testing::rows({{1, 1, 0}, {2, 1, 0}, {3, 1, 1}})); }) ==
          ErrorKind::EmptyGroup);
    CHECK(kind_of([] { sample_moments(testing::rows({{1, 1, 0}, {2, 1, 0}, {3, 0, 1}})); }) ==
          ErrorKind::InsufficientGroupSize);
    // p = 2 with two units per arm: pooled dispersion exists, per-arm does not.
    const auto small = testing::rows({{1, 0, 0, 0}, {2, 1, 0, 0}, {0, 3, 1, 0}, {1, 1, 1, 0}});
    CHECK(kind_of([&] { sample_qd(small); }) == ErrorKind::InsufficientGroupSize);
    CHECK_NOTHROW(sample_ld(small));
}

TEST_CASE("logistic PS: null model fits the treated share") {
    numkit::SeededRng rng(31);
    const int n = 20000;
    MatrixXd x(n, 2);
    VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        t(i) = rng.bernoulli(0.3) ? 1.0 : 0.0;
    }
    const Dataset data(x, t, VectorXd::Zero(n));
    const auto ps = estimate_ps_logistic(data);
    CHECK(ps.kind() == ScoreKind::EstimatedPS);
    CHECK(ps.linear().cwiseAbs().maxCoeff() < 0.05);
    const double share = t.mean();
    const VectorXd fitted = ps.evaluate_rows(x);
    CHECK((fitted.array() - share).abs().maxCoeff() < 0.03);
}

TEST_CASE("logistic PS recovers the binary assignment model") {
    const auto model = logit_toy_model();
    numkit::SeededRng rng(32);
    const auto data = generate_logistic(model, 100000, Regime::Observational, rng);
    const auto ps = estimate_ps_logistic(data);
    CHECK(std::abs(ps.intercept() - model.c) < 0.06);
    CHECK((ps.linear() - model.a).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("logistic PS on an enumerable binary design matches the closed-form MLE") {
    // Single binary covariate: the MLE reproduces the observed share in each cell,
    // so the grid optimum is known exactly.
    const auto data = testing::rows({{0, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0, 0, 0},
                                     {1, 1, 0}, {1, 1, 0}, {1, 0, 0}, {1, 1, 0}});
    const auto ps = estimate_ps_logistic(data);
    VectorXd zero(1);
    zero << 0.0;
    VectorXd one(1);
    one << 1.0;
    CHECK(std::abs(ps(zero) - 0.25) < 1e-6);
    CHECK(std::abs(ps(one) - 0.75) < 1e-6);
}

TEST_CASE("logistic PS separation is an error unless clipping is requested") {
    const auto data = testing::rows({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 1, 0}, {4, 1, 0}, {5, 1, 0}});
    CHECK(kind_of([&] { estimate_ps_logistic(data); }) == ErrorKind::Separation);
    PsOptions options;
    options.clip = true;
    const auto ps = estimate_ps_logistic(data, options);
    const VectorXd v = ps.evaluate_rows(data.x());
    CHECK(v.minCoeff() >= 1e-6);
    CHECK(v.maxCoeff() <= 1.0 - 1e-6);
}

TEST_CASE("propensity JSON round trip") {
    const auto qd = population_qd(fig6_7_model(), true);
    const nlohmann::json j = qd;
    CHECK(j.at("kind") == "QD");
    const auto back = propensity_from_json(j);
    CHECK(back.kind() == qd.kind());
    CHECK(back.intercept() == qd.intercept());
    CHECK(back.linear() == qd.linear());
    CHECK(back.quad() == qd.quad());

    const auto clipped = estimate_ps_logistic([] {
        numkit::SeededRng rng(3);
        return generate_logistic(logit_toy_model(), 500, Regime::Observational, rng);
    }()).with_clipping(0.05, 0.95);
    const auto back2 = propensity_from_json(nlohmann::json(clipped));
    CHECK(back2.clipping() == clipped.clipping());
    CHECK(kind_of([] { propensity_from_json(nlohmann::json{{"kind", "XX"}}); }) ==
          ErrorKind::ParseError);
    CHECK(score_kind_from_string(to_string(ScoreKind::EstimatedQD)) == ScoreKind::EstimatedQD);
}
