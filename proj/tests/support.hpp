// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lpflow/field.hpp"
#include "lpflow/flow.hpp"

namespace testing_support {

using lpflow::Matrix;
using lpflow::Vector;

inline Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return x;
}

inline Matrix diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

inline Matrix rotation(double angle)
{
    Matrix r(2, 2);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

/// Well-conditioned random basis (condition number below 20).
inline Matrix random_basis(std::mt19937_64& rng, int m)
{
    std::normal_distribution<double> n;
    while (true) {
        Matrix v(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) v(i, j) = n(rng);
        const auto sv = Eigen::JacobiSVD<Matrix>(v).singularValues();
        if (sv(0) / sv(m - 1) < 20.0) return v;
    }
}

/// V diag(exp(exponents)) V^{-1}: a constant block whose exponents per unit
/// time (T = 1) are exactly `exponents`, with eigenvectors the columns of V.
inline Matrix block_with_exponents(const Matrix& v, const std::vector<double>& exponents)
{
    Vector d(static_cast<Eigen::Index>(exponents.size()));
    for (std::size_t i = 0; i < exponents.size(); ++i) d[static_cast<Eigen::Index>(i)] = std::exp(exponents[i]);
    return v * d.asDiagonal() * v.inverse();
}

/// Exponents in [-2, 2] with adjacent gaps of at least `gap`.
inline std::vector<double> separated_exponents(std::mt19937_64& rng, int m, double gap)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    while (true) {
        std::vector<double> e(static_cast<std::size_t>(m));
        for (double& x : e) x = u(rng);
        std::sort(e.begin(), e.end());
        bool ok = true;
        for (std::size_t i = 1; i < e.size(); ++i) ok = ok && e[i] - e[i - 1] >= gap;
        if (ok) return e;
    }
}

/// All n-fold sums of distinct entries, ascending.
inline std::vector<double> fold_sums(const std::vector<double>& base, int n)
{
    std::vector<double> out;
    const int m = static_cast<int>(base.size());
    std::vector<bool> pick(static_cast<std::size_t>(m), false);
    std::fill(pick.begin(), pick.begin() + n, true);
    do {
        double s = 0.0;
        for (int i = 0; i < m; ++i)
            if (pick[static_cast<std::size_t>(i)]) s += base[static_cast<std::size_t>(i)];
        out.push_back(s);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    std::sort(out.begin(), out.end());
    return out;
}

/// A point on the Lorenz attractor after a transient.
inline Vector lorenz_attractor_point()
{
    const auto f = lpflow::VectorField::lorenz();
    return lpflow::flow_map(f, vec({1, 1, 20}), 20.0, {});
}

}  // namespace testing_support
