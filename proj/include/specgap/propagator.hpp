#ifndef SPECGAP_PROPAGATOR_HPP
#define SPECGAP_PROPAGATOR_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specgap/constants.hpp"

// The embedded conservative propagator over a fixed horizon t = n tau:
//
//   P^{(n tau)}_{k tau, m tau} f = M_{(m-k) tau} (f . M_{(n-m) tau} psi) / M_{(n-k) tau} psi,
//
// its Lyapunov family V_k = nu(M_{k tau} psi / psi) V / M_{k tau} psi, and the
// two-function Harris contraction check.

namespace specgap {

class EmbeddedPropagator {
public:
    EmbeddedPropagator(KernelOperator M, Vector psi, int horizon_steps)
        : M_(std::move(M)), psi_(std::move(psi)), horizon_(horizon_steps) {
        if (horizon_ <= 0)
            throw std::invalid_argument("EmbeddedPropagator: horizon must be positive");
        detail::require_positive(psi_, "EmbeddedPropagator.psi");
        if (psi_.size() != M_.n())
            throw std::invalid_argument("EmbeddedPropagator: dimension mismatch");
        // Forward iterates of psi, each renormalized with a log-scale ledger.
        // Every propagator evaluation is a vector recursion against this cache.
        scaled_.reserve(static_cast<std::size_t>(horizon_) + 1);
        log_scale_.reserve(static_cast<std::size_t>(horizon_) + 1);
        Vector v = psi_;
        double ls = 0.0;
        scaled_.push_back(v);
        log_scale_.push_back(ls);
        for (int j = 1; j <= horizon_; ++j) {
            v = M_.apply(v);
            double m = v.maxCoeff();
            if (!(m > 0.0) || !std::isfinite(m))
                throw std::domain_error(
                    "EmbeddedPropagator: kernel does not keep psi strictly positive");
            v /= m;
            ls += std::log(m);
            if (v.minCoeff() <= 0.0)
                throw std::domain_error(
                    "EmbeddedPropagator: zero entry in M^k psi (model defect)");
            scaled_.push_back(v);
            log_scale_.push_back(ls);
        }
    }

    Index n_states() const { return M_.n(); }
    int horizon() const { return horizon_; }
    double tau() const { return M_.tau(); }
    const KernelOperator& kernel() const { return M_; }
    const Vector& psi() const { return psi_; }

    /// M^j psi up to scale: value = scaled_iterate(j) * exp(iterate_log_scale(j)).
    const Vector& scaled_iterate(int j) const { return scaled_.at(static_cast<std::size_t>(j)); }
    double iterate_log_scale(int j) const { return log_scale_.at(static_cast<std::size_t>(j)); }

    /// P^{(n tau)}_{k tau, m tau} f.
    Vector apply(int k, int m, const Vector& f) const {
        check_window(k, m);
        if (f.size() != n_states())
            throw std::invalid_argument("EmbeddedPropagator::apply: dimension mismatch");
        Vector g = f.cwiseProduct(scaled_iterate(horizon_ - m));
        double gls = iterate_log_scale(horizon_ - m);
        for (int j = 0; j < m - k; ++j) {
            g = M_.apply(g);
            double mg = g.cwiseAbs().maxCoeff();
            if (mg > 1e250 || (mg > 0.0 && mg < 1e-250)) {
                g /= mg;
                gls += std::log(mg);
            }
        }
        double shift = std::exp(gls - iterate_log_scale(horizon_ - k));
        return (g.cwiseQuotient(scaled_iterate(horizon_ - k))) * shift;
    }

    /// V_k = nu(M^k psi / psi) V / M^k psi, evaluated scale-free.
    Vector lyapunov_Vk(const Vector& nu, const Vector& V, int k) const {
        if (k < 0 || k > horizon_)
            throw std::invalid_argument("EmbeddedPropagator::lyapunov_Vk: k out of range");
        const Vector& w = scaled_iterate(k);
        double mass = nu.dot(w.cwiseQuotient(psi_));
        if (!(mass > 0.0))
            throw std::domain_error("EmbeddedPropagator::lyapunov_Vk: nu(M^k psi/psi) <= 0");
        return (V.cwiseQuotient(w)) * mass;
    }

private:
    void check_window(int k, int m) const {
        if (k < 0 || m < k || m > horizon_)
            throw std::invalid_argument("EmbeddedPropagator: need 0 <= k <= m <= horizon");
    }

    KernelOperator M_;
    Vector psi_;
    int horizon_;
    std::vector<Vector> scaled_;
    std::vector<double> log_scale_;
};

struct DriftCheckReport {
    double lhs_max_violation = 0.0;
    double frak_a = 0.0;
    double frak_c = 0.0;
    bool pass = false;
};

/// Checks P^{(n tau)}_{k tau, m tau} V_{n-m} <= frak_a V_{n-k} + frak_c entrywise.
inline DriftCheckReport check_lyapunov_drift(const EmbeddedPropagator& ep, const Witness& w,
                                             const Vector& V, int k, int m) {
    if (!(w.beta > w.alpha) || !(w.c > 0.0))
        throw std::invalid_argument("check_lyapunov_drift: witness missing or invalid");
    if (m < k + 1 || m > ep.horizon())
        throw std::invalid_argument("check_lyapunov_drift: need k+1 <= m <= horizon");
    DriftCheckReport rep;
    rep.frak_a = w.alpha / w.beta;
    rep.frak_c = w.theta / (w.c * (w.beta - w.alpha));
    const int n = ep.horizon();
    Vector lhs = ep.apply(k, m, ep.lyapunov_Vk(w.nu, V, n - m));
    Vector rhs = rep.frak_a * ep.lyapunov_Vk(w.nu, V, n - k) + Vector::Constant(V.size(), rep.frak_c);
    rep.lhs_max_violation = (lhs - rhs).maxCoeff();
    rep.pass = rep.lhs_max_violation <= 1e-9;
    return rep;
}

struct MinorizationOptions {
    int k = 0;
    std::optional<long> p_override;
};

struct MinorizationReport {
    long frak_p = 0;
    double frak_b = 0.0;
    double empirical_b = 0.0;
    long ell = 0;  // summation bound used in the coupling constant; fixed to frak_p
    long sublevel_size = 0;
    std::string nu_construction;
    bool witness_valid = true;
    bool pass = false;
};

/// Empirical minorization of the embedded propagator on the sublevel set
/// {V_{n-k} <= frak_R}, against the reference measure
///   nu_{k,n}(y) ~ nu(y) M^{(n-k-p) tau} psi(y) / psi(y).
inline MinorizationReport check_minorization(const EmbeddedPropagator& ep, const Witness& w,
                                             const Vector& V, double frak_R,
                                             const MinorizationOptions& opts = {}) {
    MinorizationReport rep;
    if (!w.valid()) {
        rep.witness_valid = false;
        rep.nu_construction = "witness invalid, minorization constants undefined";
        return rep;
    }
    auto mc = minorization_constants(w.alpha, w.beta, w.theta, w.c, w.d, w.R_sup, frak_R,
                                     opts.p_override);
    rep.frak_p = mc.frak_p;
    rep.frak_b = mc.frak_b;
    rep.ell = mc.ell;
    const int n = ep.horizon();
    const int k = opts.k;
    if (k < 0 || n < k + static_cast<int>(rep.frak_p))
        throw std::invalid_argument("check_minorization: frak_p exceeds horizon");

    // nu_{k,n} materialized from the nu_i family, i = n - k - p.
    const Vector& wi = ep.scaled_iterate(n - k - static_cast<int>(rep.frak_p));
    Vector nu_kn = w.nu.cwiseProduct(wi.cwiseQuotient(ep.psi()));
    double z = nu_kn.sum();
    if (!(z > 0.0)) throw std::domain_error("check_minorization: degenerate nu_{k,n}");
    nu_kn /= z;
    rep.nu_construction = "normalized nu(. M^{i tau} psi / psi), i = n-k-p";

    Vector Vnk = ep.lyapunov_Vk(w.nu, V, n - k);
    const double ls_num = ep.iterate_log_scale(n - k - static_cast<int>(rep.frak_p));
    const double ls_den = ep.iterate_log_scale(n - k);

    double empirical = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < ep.n_states(); ++x) {
        if (Vnk[x] > frak_R) continue;
        ++rep.sublevel_size;
        // Row of the p-step kernel from x, by left iteration.
        Vector u = Vector::Zero(ep.n_states());
        u[x] = 1.0;
        double uls = 0.0;
        for (long j = 0; j < rep.frak_p; ++j) {
            u = ep.kernel().apply_left(u);
            double mu = u.maxCoeff();
            if (mu > 1e250) {
                u /= mu;
                uls += std::log(mu);
            }
        }
        const double shift = std::exp(uls + ls_num - ls_den);
        for (Index y = 0; y < ep.n_states(); ++y) {
            if (nu_kn[y] <= 0.0) continue;
            double mass = u[y] * wi[y] / ep.scaled_iterate(n - k)[x] * shift;
            empirical = std::min(empirical, mass / nu_kn[y]);
        }
    }
    rep.empirical_b = std::isfinite(empirical) ? empirical : 0.0;
    rep.pass = rep.sublevel_size > 0 && rep.empirical_b >= rep.frak_b - 1e-12;
    return rep;
}

/// Inputs of the two-function Harris contraction for a conservative operator:
///   P scrV <= frak_a scrW + frak_c   and   delta_x P >= frak_b nu on {scrW <= frak_R}.
struct HarrisContractionSpec {
    Matrix P;
    Vector scrV;
    Vector scrW;
    double frak_a = 0.0;
    double frak_b = 0.0;
    double frak_c = 0.0;
    double frak_R = 0.0;
    Vector nu;
    std::optional<double> frak_bprime;  // default frak_b / 2
    std::optional<double> frak_aprime;  // default midpoint of its admissible interval
    long steps = 1;  // P may be a power of the base chain (local kernels need it)
};

struct HarrisReport {
    double kappa = 0.0;
    double frak_y = 0.0;
    double worst_ratio = 0.0;
    Index worst_x = -1;
    Index worst_y = -1;
    double drift_slack = 0.0;
    double minorization_slack = 0.0;
    bool pass = false;
};

/// Exhaustive pairwise check of
///   ||d_x P - d_y P||_{M(1 + kappa scrV)} <= frak_y ||d_x - d_y||_{M(1 + kappa scrW)}.
inline HarrisReport verify_harris_contraction(const HarrisContractionSpec& spec) {
    const Index n = spec.P.rows();
    if (spec.P.cols() != n || spec.scrV.size() != n || spec.scrW.size() != n ||
        spec.nu.size() != n)
        throw std::invalid_argument("verify_harris_contraction: dimension mismatch");
    for (Index x = 0; x < n; ++x) {
        if (std::abs(spec.P.row(x).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("verify_harris_contraction: P is not row-stochastic");
    }
    if (!(spec.frak_a > 0.0 && spec.frak_a < 1.0))
        throw std::invalid_argument("verify_harris_contraction: frak_a must lie in (0,1)");
    if (!(spec.frak_b > 0.0 && spec.frak_b < 1.0))
        throw std::invalid_argument("verify_harris_contraction: frak_b must lie in (0,1)");
    if (!(spec.frak_c > 0.0))
        throw std::invalid_argument("verify_harris_contraction: frak_c must be positive");
    if (!(spec.frak_R > 2.0 * spec.frak_c / (1.0 - spec.frak_a)))
        throw std::invalid_argument(
            "verify_harris_contraction: frak_R must exceed 2 frak_c/(1-frak_a)");

    const double bprime = spec.frak_bprime.value_or(0.5 * spec.frak_b);
    if (!(bprime > 0.0 && bprime < spec.frak_b))
        throw std::invalid_argument("verify_harris_contraction: frak_bprime outside (0, frak_b)");
    const double ap_lo = spec.frak_a + 2.0 * spec.frak_c / spec.frak_R;
    const double aprime = spec.frak_aprime.value_or(0.5 * (ap_lo + 1.0));
    if (!(aprime > ap_lo && aprime < 1.0))
        throw std::invalid_argument(
            "verify_harris_contraction: frak_aprime outside (frak_a + 2 frak_c/frak_R, 1)");

    HarrisReport rep;
    rep.kappa = bprime / spec.frak_c;
    const double kR = rep.kappa * spec.frak_R;
    rep.frak_y = std::max(1.0 - (spec.frak_b - bprime), (2.0 + kR * aprime) / (2.0 + kR));

    // Premise slacks (diagnostics).
    Vector PV = spec.P * spec.scrV;
    rep.drift_slack =
        (spec.frak_a * spec.scrW + Vector::Constant(n, spec.frak_c) - PV).minCoeff();
    rep.minorization_slack = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < n; ++x) {
        if (spec.scrW[x] > spec.frak_R) continue;
        for (Index y = 0; y < n; ++y) {
            if (spec.nu[y] <= 0.0) continue;
            rep.minorization_slack =
                std::min(rep.minorization_slack, spec.P(x, y) - spec.frak_b * spec.nu[y]);
        }
    }
    if (!std::isfinite(rep.minorization_slack)) rep.minorization_slack = 0.0;

    rep.worst_ratio = 0.0;
    for (Index x = 0; x < n; ++x) {
        for (Index y = x + 1; y < n; ++y) {
            double lhs = 0.0;
            for (Index z = 0; z < n; ++z)
                lhs += std::abs(spec.P(x, z) - spec.P(y, z)) * (1.0 + rep.kappa * spec.scrV[z]);
            double rhs = 2.0 + rep.kappa * (spec.scrW[x] + spec.scrW[y]);
            double ratio = lhs / rhs;
            if (ratio > rep.worst_ratio) {
                rep.worst_ratio = ratio;
                rep.worst_x = x;
                rep.worst_y = y;
            }
        }
    }
    rep.pass = rep.worst_ratio <= rep.frak_y + 1e-12;
    return rep;
}

/// Fit (frak_a, frak_b, frak_c, frak_R, nu) for a row-stochastic P and weight
/// scrV = scrW, scanning a coarse drift grid and taking the infimum measure of
/// the sublevel rows. Local kernels cannot minorize a wide sublevel set in one
/// step, so powers of P are tried until one couples; within the first coupling
/// power the candidate with the smallest contraction factor wins.
inline HarrisContractionSpec fit_harris_spec(const Matrix& P, const Vector& scrV) {
    const Index n = P.rows();
    if (P.cols() != n || scrV.size() != n)
        throw std::invalid_argument("fit_harris_spec: dimension mismatch");
    Matrix Pm = P;
    for (long steps : {1, 2, 4, 8, 16, 32, 64}) {
        if (steps > 1) Pm = Pm * Pm;
        Vector PV = Pm * scrV;
        std::optional<HarrisContractionSpec> best;
        double best_y = std::numeric_limits<double>::infinity();
        for (double a : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
            double c = std::max((PV - a * scrV).maxCoeff(), 1e-12);
            double R = std::max(4.0 * c / (1.0 - a), scrV.minCoeff() * (1.0 + 1e-12));
            Vector inf_measure = Vector::Zero(n);
            bool first = true;
            for (Index x = 0; x < n; ++x) {
                if (scrV[x] > R) continue;
                if (first) {
                    inf_measure = Pm.row(x).transpose();
                    first = false;
                } else {
                    inf_measure = inf_measure.cwiseMin(Pm.row(x).transpose());
                }
            }
            double b = first ? 0.0 : inf_measure.sum();
            if (!(b > 0.0)) continue;
            b = std::min(b, 1.0 - 1e-9);
            HarrisContractionSpec spec;
            spec.P = Pm;
            spec.scrV = scrV;
            spec.scrW = scrV;
            spec.frak_a = a;
            spec.frak_b = b;
            spec.frak_c = c;
            spec.frak_R = R;
            spec.nu = inf_measure / inf_measure.sum();
            spec.steps = steps;
            double bprime = 0.5 * b;
            double kR = (bprime / c) * R;
            double ap = 0.5 * (a + 2.0 * c / R + 1.0);
            double y = std::max(1.0 - (b - bprime), (2.0 + kR * ap) / (2.0 + kR));
            if (y < best_y) {
                best_y = y;
                best = std::move(spec);
            }
        }
        if (best) return *best;
    }
    throw std::domain_error("fit_harris_spec: no admissible drift/minorization pair");
}

}  // namespace specgap

#endif  // SPECGAP_PROPAGATOR_HPP
