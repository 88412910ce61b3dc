#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "acekit/dataset.hpp"
#include "acekit/error.hpp"

namespace testing {

inline acekit::ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const acekit::Error& e) {
        return e.kind();
    }
    FAIL("expected an acekit::Error");
    return acekit::ErrorKind::ConfigError;
}

// Rows of {x..., t, y}.
inline acekit::Dataset rows(const std::vector<std::vector<double>>& r) {
    const auto n = static_cast<Eigen::Index>(r.size());
    const auto p = static_cast<Eigen::Index>(r.front().size()) - 2;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd t(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = r[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) {
            x(i, j) = row[static_cast<std::size_t>(j)];
        }
        t(i) = row[static_cast<std::size_t>(p)];
        y(i) = row[static_cast<std::size_t>(p + 1)];
    }
    return acekit::Dataset(x, t, y);
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
    double se() const { return sd / std::sqrt(static_cast<double>(count)); }
    std::size_t count = 0;
};

inline Moments moments(const std::vector<double>& v) {
    Moments m;
    m.count = v.size();
    for (double x : v) {
        m.mean += x;
    }
    m.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m.mean) * (x - m.mean);
    }
    m.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return m;
}

}  // namespace testing
