#ifndef SPECGAP_TEST_HELPERS_HPP
#define SPECGAP_TEST_HELPERS_HPP

#include <random>

#include "specgap/specgap.hpp"

// Shared fixtures and independent oracles. Oracles deliberately avoid the
// library's computation paths: the exponential oracle is a plain scaled
// Taylor series, eigen ground truth comes from dense decompositions only.

namespace sgtest {

using specgap::Index;
using specgap::Matrix;
using specgap::Vector;

/// Reducible 2x2 upper-triangular kernel with dominant eigenvalue 2 and
/// positive right eigenvector (1,1).
inline specgap::KernelOperator fixture_2x2(double tau = 1.0) {
    Matrix m(2, 2);
    m << 1.0, 1.0, 0.0, 2.0;
    return specgap::KernelOperator(m, tau);
}

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

/// Independent matrix exponential: scaling and squaring around a plain Taylor
/// series, no uniformization, no positivity handling.
inline Matrix taylor_expm(const Matrix& A, double t) {
    Matrix At = A * t;
    double norm = At.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    while (norm > 0.25) {
        norm /= 2.0;
        ++s;
    }
    Matrix X = At / std::pow(2.0, s);
    Matrix out = Matrix::Identity(A.rows(), A.cols());
    Matrix term = Matrix::Identity(A.rows(), A.cols());
    for (int k = 1; k <= 40; ++k) {
        term = term * X / static_cast<double>(k);
        out += term;
    }
    for (int i = 0; i < s; ++i) out = out * out;
    return out;
}

/// Dense random Metzler generator: conservative random chain plus a random
/// diagonal tilt, so the semigroup is genuinely non-conservative.
inline specgap::GeneratorMatrix random_metzler(Index n, std::mt19937_64& rng,
                                               double tilt = 0.5) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix L = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = 0.5 * unif(rng);
            L(i, j) = v;
            row += v;
        }
        L(i, i) = -row + tilt * (unif(rng) - 0.5) * 2.0;
    }
    return specgap::GeneratorMatrix(L);
}

/// Row-stochastic kernel of a lazy random walk with reflecting boundaries.
inline Matrix conservative_birth_death_chain(Index n, double up = 0.3, double down = 0.5) {
    Matrix P = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        double u = (i + 1 < n) ? up : 0.0;
        double d = (i > 0) ? down : 0.0;
        if (i + 1 < n) P(i, i + 1) = u;
        if (i > 0) P(i, i - 1) = d;
        P(i, i) = 1.0 - u - d;
    }
    return P;
}

/// Dense strictly positive random kernel (Perron pair always exists).
inline specgap::KernelOperator random_positive_kernel(Index n, std::mt19937_64& rng,
                                                      double tau = 1.0) {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = unif(rng);
    return specgap::KernelOperator(m, tau);
}

/// Exhaustive dual of the weighted TV norm: max of |mu(f)| over all 2^n sign
/// vectors f = +-phi.
inline double tv_norm_by_sign_enumeration(const specgap::SignedMeasure& mu, const Vector& phi) {
    const Index n = phi.size();
    double best = 0.0;
    for (long mask = 0; mask < (1L << n); ++mask) {
        Vector f(n);
        for (Index i = 0; i < n; ++i) f[i] = (mask >> i) & 1 ? phi[i] : -phi[i];
        best = std::max(best, std::abs(mu(f)));
    }
    return best;
}

}  // namespace sgtest

#endif  // SPECGAP_TEST_HELPERS_HPP
