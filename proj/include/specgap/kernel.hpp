#ifndef SPECGAP_KERNEL_HPP
#define SPECGAP_KERNEL_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "specgap/core.hpp"

// Semigroup skeletons: Metzler generators L and the one-step kernels M = e^{tau L}.
//
// Kernels act on functions on the right, (Mf)(x) = sum_y M[x][y] f(y), and on
// measures on the left, (mu M)(y) = sum_x mu(x) M[x][y], with (mu M)(f) = mu(Mf).

namespace specgap {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Nonnegativity clamp for results of floating-point exponentials.
inline constexpr double kNegativityClamp = 1e-14;

/// Dense storage is used up to this dimension, compressed sparse rows above.
inline constexpr Index kDenseStorageLimit = 2000;

/// Square real matrix with nonnegative off-diagonal entries.
class GeneratorMatrix {
public:
    explicit GeneratorMatrix(SparseMatrix entries) : entries_(std::move(entries)) {
        validate();
    }

    explicit GeneratorMatrix(const Matrix& dense) {
        if (dense.rows() != dense.cols())
            throw std::invalid_argument("GeneratorMatrix: matrix must be square");
        entries_ = dense.sparseView();
        entries_.makeCompressed();
        validate();
    }

    Index n() const { return entries_.rows(); }
    const SparseMatrix& entries() const { return entries_; }
    Matrix to_dense() const { return Matrix(entries_); }

    /// Uniformization rate: max |diagonal|.
    double uniformization_rate() const {
        double q = 0.0;
        for (Index i = 0; i < n(); ++i) q = std::max(q, std::abs(entries_.coeff(i, i)));
        return q;
    }

    double max_row_sum() const {
        double m = -std::numeric_limits<double>::infinity();
        Vector ones = Vector::Ones(n());
        Vector rs = entries_ * ones;
        for (Index i = 0; i < n(); ++i) m = std::max(m, rs[i]);
        return m;
    }

private:
    void validate() const {
        if (entries_.rows() != entries_.cols())
            throw std::invalid_argument("GeneratorMatrix: matrix must be square");
        if (entries_.rows() == 0)
            throw std::invalid_argument("GeneratorMatrix: empty state space");
        for (Index i = 0; i < entries_.outerSize(); ++i) {
            for (SparseMatrix::InnerIterator it(entries_, i); it; ++it) {
                if (!std::isfinite(it.value()))
                    throw std::invalid_argument("GeneratorMatrix: non-finite entry");
                if (it.row() != it.col() && it.value() < 0.0)
                    throw std::invalid_argument(
                        "GeneratorMatrix: negative off-diagonal entry (not Metzler)");
            }
        }
    }

    SparseMatrix entries_;
};

/// Nonnegative square matrix representing the tau-step kernel M_tau.
///
/// Stored dense below kDenseStorageLimit, as compressed sparse rows above.
/// Immutable after construction.
class KernelOperator {
public:
    KernelOperator(Matrix dense, double tau) : tau_(tau) {
        check_tau();
        if (dense.rows() != dense.cols())
            throw std::invalid_argument("KernelOperator: matrix must be square");
        if (dense.rows() == 0) throw std::invalid_argument("KernelOperator: empty state space");
        clamp_and_check(dense);
        if (dense.rows() > kDenseStorageLimit) {
            sparse_ = dense.sparseView();
            sparse_.makeCompressed();
            use_dense_ = false;
        } else {
            dense_ = std::move(dense);
            use_dense_ = true;
        }
    }

    KernelOperator(SparseMatrix sparse, double tau)
        : sparse_(std::move(sparse)), tau_(tau), use_dense_(false) {
        check_tau();
        if (sparse_.rows() != sparse_.cols())
            throw std::invalid_argument("KernelOperator: matrix must be square");
        if (sparse_.rows() == 0) throw std::invalid_argument("KernelOperator: empty state space");
        sparse_.makeCompressed();
        for (Index i = 0; i < sparse_.outerSize(); ++i) {
            for (SparseMatrix::InnerIterator it(sparse_, i); it; ++it) {
                if (!std::isfinite(it.value()) || it.value() < -kNegativityClamp)
                    throw std::invalid_argument("KernelOperator: negative or non-finite entry");
                if (it.value() < 0.0) it.valueRef() = 0.0;
            }
        }
        if (sparse_.rows() <= kDenseStorageLimit) {
            dense_ = Matrix(sparse_);
            use_dense_ = true;
        }
    }

    Index n() const { return use_dense_ ? dense_.rows() : sparse_.rows(); }
    double tau() const { return tau_; }
    bool is_dense() const { return use_dense_; }

    /// Right action (Mf)(x) = sum_y M[x][y] f(y).
    Vector apply(const Vector& f) const {
        require_dim(f);
        return use_dense_ ? Vector(dense_ * f) : Vector(sparse_ * f);
    }

    /// Left action (mu M)(y) = sum_x mu(x) M[x][y].
    Vector apply_left(const Vector& mu) const {
        require_dim(mu);
        return use_dense_ ? Vector(dense_.transpose() * mu)
                          : Vector(sparse_.transpose() * mu);
    }

    Vector row(Index x) const {
        if (x < 0 || x >= n()) throw std::out_of_range("KernelOperator::row");
        if (use_dense_) return dense_.row(x).transpose();
        return Vector(sparse_.row(x).transpose());
    }

    double entry(Index i, Index j) const {
        if (i < 0 || i >= n() || j < 0 || j >= n())
            throw std::out_of_range("KernelOperator::entry");
        return use_dense_ ? dense_(i, j) : sparse_.coeff(i, j);
    }

    Matrix to_dense() const { return use_dense_ ? dense_ : Matrix(sparse_); }

    const Matrix& dense() const {
        if (!use_dense_) throw std::logic_error("KernelOperator: stored sparse, use to_dense()");
        return dense_;
    }

private:
    void check_tau() const {
        if (!(tau_ > 0.0) || !std::isfinite(tau_))
            throw std::invalid_argument("KernelOperator: tau must be positive");
    }
    void require_dim(const Vector& v) const {
        if (v.size() != n()) throw std::invalid_argument("KernelOperator: dimension mismatch");
    }
    static void clamp_and_check(Matrix& m) {
        for (Index j = 0; j < m.cols(); ++j) {
            for (Index i = 0; i < m.rows(); ++i) {
                double v = m(i, j);
                if (!std::isfinite(v))
                    throw std::invalid_argument("KernelOperator: non-finite entry");
                if (v < 0.0) {
                    if (v < -kNegativityClamp)
                        throw std::invalid_argument("KernelOperator: negative entry");
                    m(i, j) = 0.0;
                }
            }
        }
    }

    Matrix dense_;
    SparseMatrix sparse_;
    double tau_ = 0.0;
    bool use_dense_ = true;
};

namespace detail {

/// Poisson weights of the uniformization series, with the truncation index
/// chosen so the neglected tail is below `tail_tol` in total mass.
inline std::vector<double> poisson_weights(double qt, double tail_tol, long max_terms) {
    std::vector<double> w;
    if (qt <= 0.0) {
        w.push_back(1.0);
        return w;
    }
    const double log_qt = std::log(qt);
    double cumulative = 0.0;
    for (long k = 0; k < max_terms; ++k) {
        double log_w = -qt + static_cast<double>(k) * log_qt - std::lgamma(k + 1.0);
        double wk = std::exp(log_w);
        w.push_back(wk);
        cumulative += wk;
        // Past the mode the terms decay superexponentially; stop once both the
        // term and the remaining mass are negligible.
        if (static_cast<double>(k) > qt && (wk < 1e-2 * tail_tol || 1.0 - cumulative < tail_tol))
            return w;
    }
    throw std::overflow_error(
        "matrix_exp: uniformization series did not converge (rate too large for requested t)");
}

/// y += scale * x with running rescaling so the accumulator stays representable.
/// Both vectors carry their own base-e exponents; returns the accumulator exponent.
struct ScaledAccumulator {
    Vector sum;
    double log_scale = 0.0;

    explicit ScaledAccumulator(Index n) : sum(Vector::Zero(n)) {}

    void add(const Vector& term, double term_log_scale) {
        double shift = term_log_scale - log_scale;
        if (shift > 200.0) {
            // Accumulator is negligible against the new term; rebase.
            sum *= std::exp(-shift);
            log_scale = term_log_scale;
            sum += term;
        } else {
            sum += term * std::exp(shift);
        }
        double m = sum.cwiseAbs().maxCoeff();
        if (m > 1e250) {
            sum /= m;
            log_scale += std::log(m);
        }
    }

    Vector value() const { return sum * std::exp(log_scale); }
};

}  // namespace detail

struct ExpmOptions {
    double tail_tol = 1e-16;
    long max_terms = 2'000'000;
    /// Row-sum tolerance used when verifying conservative generators downstream.
    double conservative_tol = 1e-12;
};

/// Matrix-free action of e^{tL} for a Metzler generator L, via uniformization.
///
/// Suitable for state spaces too large to materialise the kernel; the per-call
/// cost is one sparse matrix-vector product per retained Poisson term.
class ExpActionKernel {
public:
    ExpActionKernel(GeneratorMatrix L, double t, ExpmOptions opts = {})
        : t_(t), opts_(opts) {
        if (!(t > 0.0) || !std::isfinite(t))
            throw std::invalid_argument("ExpActionKernel: t must be positive");
        const double q = std::max(L.uniformization_rate(), 1e-300);
        q_ = q;
        SparseMatrix P = L.entries() / q;
        for (Index i = 0; i < P.rows(); ++i) P.coeffRef(i, i) += 1.0;
        P.makeCompressed();
        P_ = P;
        Pt_ = SparseMatrix(P.transpose());
        Pt_.makeCompressed();
        weights_ = detail::poisson_weights(q * t, opts.tail_tol, opts.max_terms);
    }

    Index n() const { return P_.rows(); }
    double tau() const { return t_; }

    Vector apply(const Vector& f) const { return series(P_, f); }
    Vector apply_left(const Vector& mu) const { return series(Pt_, mu); }

    Vector row(Index x) const {
        Vector e = Vector::Zero(n());
        e[x] = 1.0;
        return apply_left(e);
    }

private:
    Vector series(const SparseMatrix& P, const Vector& v0) const {
        if (v0.size() != n()) throw std::invalid_argument("ExpActionKernel: dimension mismatch");
        detail::ScaledAccumulator acc(n());
        Vector v = v0;
        double v_log_scale = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            if (weights_[k] > 0.0)
                acc.add(v * weights_[k], v_log_scale);
            if (k + 1 < weights_.size()) {
                v = P * v;
                double m = v.cwiseAbs().maxCoeff();
                if (m > 1e250) {
                    v /= m;
                    v_log_scale += std::log(m);
                }
            }
        }
        return acc.value();
    }

    double t_ = 0.0;
    double q_ = 0.0;
    ExpmOptions opts_;
    SparseMatrix P_;
    SparseMatrix Pt_;
    std::vector<double> weights_;
};

namespace detail {

inline Matrix expm_uniformization(const GeneratorMatrix& L, double t, const ExpmOptions& opts) {
    ExpActionKernel action(L, t, opts);
    const Index n = L.n();
    Matrix out(n, n);
    // Row-by-row vector recursion: cache friendly and overflow safe.
    for (Index x = 0; x < n; ++x) out.row(x) = action.row(x).transpose();
    return out;
}

/// Scaling-and-squaring with a Taylor core; nonnegativity restored by clamping.
inline Matrix expm_scaling_squaring(const Matrix& A, double t) {
    const Index n = A.rows();
    Matrix At = A * t;
    double norm = At.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    while (norm > 0.5 && s < 60) {
        norm /= 2.0;
        ++s;
    }
    Matrix X = At / std::pow(2.0, s);
    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 30; ++k) {
        term = (term * X) / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-19) break;
    }
    for (int i = 0; i < s; ++i) result = result * result;
    return result;
}

}  // namespace detail

/// e^{tL} as a kernel operator, entrywise nonnegative by construction.
///
/// Uniformization is the primary route (it preserves positivity exactly);
/// scaling-and-squaring is the fallback when the series is impractically long,
/// with entries below -1e-14 rejected and small negatives clamped to zero.
inline KernelOperator matrix_exp(const GeneratorMatrix& L, double t, ExpmOptions opts = {}) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw std::invalid_argument("matrix_exp: t must be positive");
    const double qt = L.uniformization_rate() * t;
    const double estimated_terms = qt + 60.0 * std::sqrt(qt + 1.0) + 40.0;
    if (estimated_terms < static_cast<double>(opts.max_terms))
        return KernelOperator(detail::expm_uniformization(L, t, opts), t);
    if (L.n() > kDenseStorageLimit)
        throw std::overflow_error("matrix_exp: generator too stiff for this dimension");
    Matrix E = detail::expm_scaling_squaring(L.to_dense(), t);
    double min_entry = E.minCoeff();
    if (min_entry < -kNegativityClamp)
        throw std::overflow_error("matrix_exp: result lost positivity beyond clamp threshold");
    return KernelOperator(E.cwiseMax(0.0), t);
}

/// M_{k tau} = M_tau^k on the skeleton; k = 0 gives the identity.
///
/// No internal rescaling: for large k use the normalized iterations of the
/// eigensolver instead.
inline KernelOperator semigroup_power(const KernelOperator& M, long k) {
    if (k < 0) throw std::invalid_argument("semigroup_power: k must be nonnegative");
    const Index n = M.n();
    if (k == 0) return KernelOperator(Matrix::Identity(n, n), M.tau());

    Matrix base = M.to_dense();
    Matrix result = Matrix::Identity(n, n);
    long e = k;
    while (e > 0) {
        if (e & 1) result = result * base;
        e >>= 1;
        if (e > 0) base = base * base;
    }
    if (!result.allFinite())
        throw std::overflow_error("semigroup_power: overflow, use normalized iterations");
    return KernelOperator(std::move(result), M.tau() * static_cast<double>(k));
}

}  // namespace specgap

#endif  // SPECGAP_KERNEL_HPP
