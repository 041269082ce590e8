#ifndef SPECGAP_ASSUMPTIONS_HPP
#define SPECGAP_ASSUMPTIONS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "specgap/core.hpp"
#include "specgap/kernel.hpp"

// Fitting and verification of the four-condition hypothesis set behind the
// spectral-gap certificate:
//
//   A1 (drift)        M V      <= alpha V + theta 1_K psi
//   A2 (growth)       M psi    >= beta psi
//   A3 (minorization) M(f psi) >= c nu(f) M psi      on K, for f >= 0
//   A4 (mass ratio)   nu(M^n psi / psi) >= d sup_K M^n psi / psi   for all n
//
// with beta > alpha > 0, theta > 0, c, d in (0,1], nu a probability supported
// on K. A4 is certified on a finite horizon with a stabilization certificate;
// the residual "for all n" assumption is flagged in serialized output.

namespace specgap {

/// theta is kept strictly positive even when the fit yields zero.
inline constexpr double kThetaFloor = 1e-15;

struct ConditionReport {
    bool pass = false;
    double slack = 0.0;
    std::string detail;
};

enum class A4Status { Converged, Inconclusive, Degrading };

inline const char* to_string(A4Status s) {
    switch (s) {
        case A4Status::Converged: return "converged";
        case A4Status::Inconclusive: return "inconclusive";
        case A4Status::Degrading: return "degrading";
    }
    return "unknown";
}

struct A4Certificate {
    A4Status status = A4Status::Inconclusive;
    long n_used = 0;
    double limit_estimate = 0.0;
    bool converged() const { return status == A4Status::Converged; }
};

struct Witness {
    double tau = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double theta = 0.0;
    double c = 0.0;
    double d = 0.0;
    std::vector<bool> K;
    Vector nu;
    double R_sup = 0.0;  // sup over K of V/psi, recorded at fit time

    ConditionReport a1, a2, a3, a4;
    A4Certificate a4_certificate;
    bool theta_floored = false;

    Index n() const { return nu.size(); }
    long K_size() const { return std::count(K.begin(), K.end(), true); }

    bool valid() const {
        return beta > alpha && alpha > 0.0 && theta > 0.0 && c > 0.0 && c <= 1.0 &&
               d > 0.0 && d <= 1.0 && a4_certificate.converged();
    }
};

namespace detail {

inline void require_mask(const std::vector<bool>& K, Index n, const char* where) {
    if (static_cast<Index>(K.size()) != n)
        throw std::invalid_argument(std::string(where) + ": mask size mismatch");
}

inline bool mask_empty(const std::vector<bool>& K) {
    return std::none_of(K.begin(), K.end(), [](bool b) { return b; });
}

}  // namespace detail

/// beta = min_x (M psi)(x) / psi(x); zero signals psi leaving the cone.
inline double fit_A2_from_image(const Vector& Mpsi, const Vector& psi) {
    return (Mpsi.cwiseQuotient(psi)).minCoeff();
}

inline double fit_A2(const KernelOperator& M, const Vector& psi) {
    return fit_A2_from_image(M.apply(psi), psi);
}

/// Drift fit against a precomputed image MV.
///
/// alpha is the tight ratio over the complement of K; theta then binds the
/// inequality on K. When K is the whole space alpha is free (theta is fitted
/// against the raw alpha = 0), and the convention alpha = (sup_K MV/V)/2
/// keeps it strictly positive; if that collides with a known growth constant
/// beta the free choice drops to beta/2 instead.
inline std::pair<double, double> fit_A1_from_image(const Vector& MV, const Vector& V,
                                                   const Vector& psi, const std::vector<bool>& K,
                                                   std::optional<double> beta_cap = {}) {
    detail::require_mask(K, V.size(), "fit_A1");
    if (detail::mask_empty(K)) throw std::invalid_argument("fit_A1: K must be nonempty");
    const bool complement_empty =
        std::all_of(K.begin(), K.end(), [](bool b) { return b; });
    double alpha_raw = 0.0;
    for (Index x = 0; x < V.size(); ++x)
        if (!K[static_cast<std::size_t>(x)]) alpha_raw = std::max(alpha_raw, MV[x] / V[x]);

    double theta = 0.0;
    for (Index x = 0; x < V.size(); ++x)
        if (K[static_cast<std::size_t>(x)])
            theta = std::max(theta, (MV[x] - alpha_raw * V[x]) / psi[x]);
    theta = std::max(theta, kThetaFloor);

    double alpha = alpha_raw;
    if (complement_empty) {
        double sup_K = 0.0;
        for (Index x = 0; x < V.size(); ++x) sup_K = std::max(sup_K, MV[x] / V[x]);
        alpha = 0.5 * sup_K;
        if (beta_cap && alpha >= *beta_cap) alpha = 0.5 * *beta_cap;
    }
    if (alpha <= 0.0) alpha = kThetaFloor;
    return {alpha, theta};
}

inline std::pair<double, double> fit_A1(const KernelOperator& M, const Vector& V,
                                        const Vector& psi, const std::vector<bool>& K) {
    return fit_A1_from_image(M.apply(V), V, psi, K, fit_A2(M, psi));
}

/// Optimal minorization constant for a fixed nu on a finite space:
///   c = min over x in K, y in supp(nu) of M[x][y] psi(y) / (nu(y) (M psi)(x)),
/// capped at 1. Zero means no mass transfer from K through nu.
inline double fit_A3(const KernelOperator& M, const Vector& psi, const std::vector<bool>& K,
                     const Vector& nu) {
    detail::require_mask(K, psi.size(), "fit_A3");
    detail::require_same_size(nu, psi, "fit_A3");
    const Index n = psi.size();
    Vector Mpsi = M.apply(psi);
    double c = std::numeric_limits<double>::infinity();
    if (M.is_dense()) {
        const Matrix& A = M.dense();
        for (Index y = 0; y < n; ++y) {
            if (nu[y] <= 0.0) continue;
            const double scale = psi[y] / nu[y];
            for (Index x = 0; x < n; ++x) {
                if (!K[static_cast<std::size_t>(x)]) continue;
                c = std::min(c, A(x, y) * scale / Mpsi[x]);
            }
        }
    } else {
        for (Index x = 0; x < n; ++x) {
            if (!K[static_cast<std::size_t>(x)]) continue;
            for (Index y = 0; y < n; ++y) {
                if (nu[y] <= 0.0) continue;
                c = std::min(c, M.entry(x, y) * psi[y] / (nu[y] * Mpsi[x]));
            }
        }
    }
    if (!std::isfinite(c)) c = 0.0;
    return std::min(c, 1.0);
}

/// Normalized forward iterates w_j = M^j psi / psi, each scaled to sup 1.
/// The scaling cancels in every ratio the fits consume. Iteration stops early
/// once the direction stabilizes (the ratios are then constant in j).
struct PsiIterates {
    std::vector<Vector> w;  // w[j-1] = M^j psi / psi, normalized
    bool stabilized = false;
};

template <class Kernel>
PsiIterates compute_psi_iterates(const Kernel& M, const Vector& psi, long n_max) {
    PsiIterates out;
    Vector v = psi;
    int stable_run = 0;
    Vector prev_dir;
    for (long j = 1; j <= n_max; ++j) {
        v = M.apply(v);
        double m = v.maxCoeff();
        if (!(m > 0.0) || !std::isfinite(m)) break;  // kernel killed psi: A2 will report
        v /= m;
        Vector w = v.cwiseQuotient(psi);
        double wmax = w.maxCoeff();
        Vector dir = w / wmax;
        out.w.push_back(std::move(w));
        if (prev_dir.size() == dir.size() &&
            (dir - prev_dir).cwiseAbs().maxCoeff() < 1e-12) {
            if (++stable_run >= 5) {
                out.stabilized = true;
                break;
            }
        } else {
            stable_run = 0;
        }
        prev_dir = std::move(dir);
    }
    return out;
}

struct A4Result {
    double d = 0.0;
    A4Certificate certificate;
    std::vector<double> ratios;
};

/// Mass-ratio fit against precomputed iterates.
///
/// ratio_n = nu(M^n psi / psi) / sup_K (M^n psi / psi); d is the running
/// minimum. Convergence means five consecutive increments below 1e-10 (the
/// ratio stabilizes to nu(h/psi)/sup_K(h/psi) once iterates align with h).
inline A4Result fit_A4_from_iterates(const PsiIterates& iterates, const std::vector<bool>& K,
                                     const Vector& nu) {
    A4Result res;
    if (iterates.w.empty()) {
        res.certificate.status = A4Status::Degrading;
        res.certificate.n_used = 0;
        return res;
    }
    detail::require_mask(K, nu.size(), "fit_A4");
    int stable_run = 0;
    double prev = -1.0;
    bool converged = false;
    for (const Vector& w : iterates.w) {
        double nu_val = nu.dot(w);
        double sup_K = 0.0;
        for (Index x = 0; x < w.size(); ++x)
            if (K[static_cast<std::size_t>(x)]) sup_K = std::max(sup_K, w[x]);
        double ratio = (sup_K > 0.0) ? nu_val / sup_K : 0.0;
        res.ratios.push_back(ratio);
        // Stabilization must hold absolutely and relatively: a ratio halving
        // its way to zero passes any absolute tolerance eventually but never
        // the relative one.
        if (prev >= 0.0 && std::abs(ratio - prev) < 1e-10 &&
            std::abs(ratio - prev) < 1e-6 * std::max(ratio, 1e-300)) {
            if (++stable_run >= 5) converged = true;
        } else {
            stable_run = 0;
        }
        prev = ratio;
        if (converged) break;
    }
    res.d = *std::min_element(res.ratios.begin(), res.ratios.end());
    res.certificate.n_used = static_cast<long>(res.ratios.size());
    res.certificate.limit_estimate = res.ratios.back();

    std::size_t window = std::min<std::size_t>(10, res.ratios.size() / 2);
    bool decreasing = window >= 2;
    for (std::size_t i = res.ratios.size() - window; i + 1 < res.ratios.size(); ++i)
        if (res.ratios[i + 1] >= res.ratios[i] * (1.0 - 1e-9) - 1e-300) decreasing = false;

    if (converged || (iterates.stabilized && !decreasing)) {
        res.certificate.status = A4Status::Converged;
    } else if (decreasing) {
        res.certificate.status = A4Status::Degrading;
    } else {
        res.certificate.status = A4Status::Inconclusive;
    }
    return res;
}

template <class Kernel>
A4Result fit_A4(const Kernel& M, const Vector& psi, const std::vector<bool>& K,
                const Vector& nu, long n_max) {
    if (n_max < 1) throw std::invalid_argument("fit_A4: n_max must be at least 1");
    return fit_A4_from_iterates(compute_psi_iterates(M, psi, n_max), K, nu);
}

/// Candidate reference measures for the minorization condition.
enum class NuFamily { Uniform, PsiWeighted, InfMeasure };

inline const char* to_string(NuFamily f) {
    switch (f) {
        case NuFamily::Uniform: return "uniform";
        case NuFamily::PsiWeighted: return "psi-weighted";
        case NuFamily::InfMeasure: return "inf-measure";
    }
    return "unknown";
}

/// Build a probability vector supported on K. Returns a zero vector when the
/// family degenerates (e.g. the inf-measure of a chain with no common overlap).
inline Vector make_nu(NuFamily family, const KernelOperator& M, const Vector& psi,
                      const std::vector<bool>& K) {
    const Index n = psi.size();
    detail::require_mask(K, n, "make_nu");
    Vector nu = Vector::Zero(n);
    switch (family) {
        case NuFamily::Uniform: {
            for (Index y = 0; y < n; ++y)
                if (K[static_cast<std::size_t>(y)]) nu[y] = 1.0;
            break;
        }
        case NuFamily::PsiWeighted: {
            for (Index y = 0; y < n; ++y)
                if (K[static_cast<std::size_t>(y)]) nu[y] = psi[y];
            break;
        }
        case NuFamily::InfMeasure: {
            // nu(y) ~ min over x in K of M[x][y] psi(y) / (M psi)(x): the largest
            // measure through which every K-row can be minorized.
            Vector Mpsi = M.apply(psi);
            Vector inf = Vector::Constant(n, std::numeric_limits<double>::infinity());
            if (M.is_dense()) {
                const Matrix& A = M.dense();
                for (Index y = 0; y < n; ++y) {
                    if (!K[static_cast<std::size_t>(y)]) continue;
                    for (Index x = 0; x < n; ++x) {
                        if (!K[static_cast<std::size_t>(x)]) continue;
                        inf[y] = std::min(inf[y], A(x, y) * psi[y] / Mpsi[x]);
                    }
                }
            } else {
                for (Index x = 0; x < n; ++x) {
                    if (!K[static_cast<std::size_t>(x)]) continue;
                    for (Index y = 0; y < n; ++y) {
                        if (!K[static_cast<std::size_t>(y)]) continue;
                        inf[y] = std::min(inf[y], M.entry(x, y) * psi[y] / Mpsi[x]);
                    }
                }
            }
            for (Index y = 0; y < n; ++y)
                if (K[static_cast<std::size_t>(y)] && std::isfinite(inf[y])) nu[y] = inf[y];
            break;
        }
    }
    double total = nu.sum();
    if (total <= 0.0) return Vector::Zero(n);
    return nu / total;
}

/// Direct re-verification of a fitted witness on the kernel. Slacks are
/// normalized so that a sound witness reports slack >= -1e-12 per condition.
struct WitnessCheck {
    ConditionReport a1, a2, a3, a4;
    bool pass = false;
};

inline WitnessCheck check_witness(const KernelOperator& M, const Vector& V, const Vector& psi,
                                  const Witness& w, long a4_horizon = 200) {
    WitnessCheck out;
    Vector MV = M.apply(V);
    Vector Mpsi = M.apply(psi);

    double s1 = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < V.size(); ++x) {
        double bound = w.alpha * V[x] + (w.K[static_cast<std::size_t>(x)] ? w.theta * psi[x] : 0.0);
        s1 = std::min(s1, (bound - MV[x]) / V[x]);
    }
    out.a1 = {s1 >= -1e-12, s1, "min_x (alpha V + theta 1_K psi - MV)/V"};

    double s2 = (Mpsi.cwiseQuotient(psi)).minCoeff() - w.beta;
    out.a2 = {s2 >= -1e-12, s2, "min_x (M psi)/psi - beta"};

    double s3 = fit_A3(M, psi, w.K, w.nu) - w.c;
    out.a3 = {s3 >= -1e-12, s3, "min ratio - c over K x supp(nu)"};

    A4Result a4 = fit_A4(M, psi, w.K, w.nu, a4_horizon);
    double s4 = a4.d - w.d;
    out.a4 = {s4 >= -1e-12 && a4.certificate.status != A4Status::Degrading, s4,
              std::string("min ratio_n - d, horizon status ") + to_string(a4.certificate.status)};

    out.pass = out.a1.pass && out.a2.pass && out.a3.pass && out.a4.pass;
    return out;
}

/// Generator-level drift data: L V <= a V + zeta psi, L psi >= b psi,
/// L varphi <= xi varphi with psi <= varphi <= C_equiv psi.
struct DriftCertificate {
    double a = 0.0;
    double b = 0.0;
    double xi = 0.0;
    double zeta = 0.0;
    Vector varphi;
    double C_equiv = 1.0;
    double R = 0.0;
    double tau = 1.0;

    /// Smallest threshold for which the induced kernel constants satisfy
    /// alpha < beta.
    double R0() const {
        double theta = C_equiv * C_equiv * zeta * std::exp(xi * tau) / (b - a);
        return theta / (std::exp(b * tau) - std::exp(a * tau));
    }
};

struct A1A2Part {
    double tau = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double theta = 0.0;
    std::vector<bool> K;
    bool theta_floored = false;
};

/// Kernel-level constants induced by generator drift over one step tau:
///   alpha = e^{a tau} + C^2 zeta e^{xi tau} / ((b-a) R),
///   beta  = e^{b tau},
///   theta = C^2 zeta e^{xi tau} / (b-a),
/// with K = {V <= R psi}.
inline A1A2Part drift_to_A1A2(const DriftCertificate& cert, const Vector& V, const Vector& psi) {
    if (!(cert.a < cert.b)) throw std::invalid_argument("drift_to_A1A2: requires a < b");
    if (!(cert.tau > 0.0)) throw std::invalid_argument("drift_to_A1A2: tau must be positive");
    detail::require_same_size(V, psi, "drift_to_A1A2");

    A1A2Part part;
    part.tau = cert.tau;
    const double C2 = cert.C_equiv * cert.C_equiv;
    double theta = C2 * cert.zeta * std::exp(cert.xi * cert.tau) / (cert.b - cert.a);
    if (theta < kThetaFloor) {
        theta = kThetaFloor;
        part.theta_floored = true;
    }
    part.theta = theta;
    part.beta = std::exp(cert.b * cert.tau);
    part.alpha = std::exp(cert.a * cert.tau) + theta / cert.R;
    part.K.assign(static_cast<std::size_t>(V.size()), false);
    long count = 0;
    for (Index x = 0; x < V.size(); ++x) {
        if (V[x] <= cert.R * psi[x]) {
            part.K[static_cast<std::size_t>(x)] = true;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("drift_to_A1A2: sublevel set {V <= R psi} is empty");
    if (part.alpha >= part.beta)
        throw std::invalid_argument("drift_to_A1A2: R too small (alpha >= beta), need R > R0");
    return part;
}

}  // namespace specgap

#endif  // SPECGAP_ASSUMPTIONS_HPP
