#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace acekit::numkit {

// Counter-based generator keyed by (seed, stream). Draw k of a stream is a
// pure function of (seed, stream, k), so replicate r can own stream r and the
// results do not depend on how replicates are scheduled.
class SeededRng {
public:
    using result_type = std::uint64_t;

    explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    bool bernoulli(double p);
    // Uniform on {0, ..., n-1}; n > 0.
    std::size_t index(std::size_t n);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_a_;
    std::uint64_t key_b_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

// Lower Cholesky factor plus mean; reusable across many draws.
class MvnSampler {
public:
    // Throws NotPositiveDefinite unless cov is symmetric positive definite.
    MvnSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);

    Eigen::VectorXd draw(SeededRng& rng) const;
    void draw_into(SeededRng& rng, Eigen::Ref<Eigen::VectorXd> out) const;
    Eigen::Index dim() const { return mean_.size(); }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd lower_;
};

// n i.i.d. rows from N(mean, cov).
Eigen::MatrixXd mvn_sample(SeededRng& rng, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov, Eigen::Index n);

}  // namespace acekit::numkit
