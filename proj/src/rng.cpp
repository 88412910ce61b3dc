#include "acekit/numkit/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "acekit/error.hpp"

namespace acekit::numkit {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
    key_a_ = mix64(seed + kGolden);
    key_a_ = mix64(key_a_ ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL));
    key_b_ = mix64(key_a_ + 0xD1B54A32D192ED03ULL);
}

SeededRng::result_type SeededRng::operator()() {
    const std::uint64_t c = counter_++;
    std::uint64_t z = mix64(c * kGolden + key_a_);
    return mix64(z ^ key_b_);
}

double SeededRng::uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

bool SeededRng::bernoulli(double p) { return uniform() < p; }

std::size_t SeededRng::index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
}

MvnSampler::MvnSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)) {
    const Eigen::Index p = mean_.size();
    if (cov.rows() != p || cov.cols() != p) {
        fail(ErrorKind::DimensionMismatch, "mvn: covariance must be " + std::to_string(p) +
                                               "x" + std::to_string(p));
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        fail(ErrorKind::NotPositiveDefinite, "mvn: covariance is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        fail(ErrorKind::NotPositiveDefinite, "mvn: covariance is not positive definite");
    }
    lower_ = llt.matrixL();
}

void MvnSampler::draw_into(SeededRng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
    Eigen::VectorXd z(mean_.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        z(j) = rng.normal();
    }
    out = mean_ + lower_.triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd MvnSampler::draw(SeededRng& rng) const {
    Eigen::VectorXd out(mean_.size());
    draw_into(rng, out);
    return out;
}

Eigen::MatrixXd mvn_sample(SeededRng& rng, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov, Eigen::Index n) {
    const MvnSampler sampler(mean, cov);
    Eigen::MatrixXd out(n, mean.size());
    Eigen::VectorXd row(mean.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        sampler.draw_into(rng, row);
        out.row(i) = row.transpose();
    }
    return out;
}

}  // namespace acekit::numkit
