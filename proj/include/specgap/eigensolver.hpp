#ifndef SPECGAP_EIGENSOLVER_HPP
#define SPECGAP_EIGENSOLVER_HPP

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <set>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "specgap/search.hpp"

// Perron triplet (lambda, h, gamma) by normalized forward/backward iterations,
// convergence audits against the certified rate, and a dense eigendecomposition
// oracle for cross-checking.
//
// All iterations renormalize every step; the kernel is never powered up
// explicitly, so the routines are overflow-safe for growing or decaying
// semigroups alike.

namespace specgap {

struct IterationTrace {
    Vector value;
    long iterations = 0;
    bool converged = false;
    double last_increment = 0.0;
    std::vector<double> increments;
};

/// Iterates h <- M h / nu(M h / psi) from h_0 = psi until the increment in
/// B(V^2/psi) drops below tol. Positivity keeps the iteration cancellation
/// free, so a pointwise relative criterion is also enforced: without it the
/// deep tail (where the stopping weight psi/V^2 is tiny) would stop with junk
/// relative accuracy and poison the psi := h re-run downstream. The returned
/// h satisfies nu(h/psi) = 1.
template <class Kernel>
IterationTrace compute_h(const Kernel& M, const WeightPair& w, const Vector& nu,
                         double tol = 1e-12, long cap = 100000) {
    detail::require_same_size(nu, w.psi, "compute_h");
    const Vector norm_weight = w.psi.cwiseQuotient(w.V.cwiseProduct(w.V));  // 1/(V^2/psi)
    const double rel_tol = std::max(tol, 1e-13);
    IterationTrace out;
    Vector h = w.psi;  // nu(psi/psi) = nu(1) = 1
    double mass0 = nu.dot(h.cwiseQuotient(w.psi));
    if (!(mass0 > 0.0)) throw std::invalid_argument("compute_h: nu must have positive mass");
    h /= mass0;
    long polish = -1;
    for (long k = 0; k < cap; ++k) {
        Vector g = M.apply(h);
        double mass = nu.dot(g.cwiseQuotient(w.psi));
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw std::domain_error("compute_h: nu(M h / psi) not positive (gapless or defective model)");
        g /= mass;
        double inc = ((g - h).cwiseProduct(norm_weight)).cwiseAbs().maxCoeff();
        double inc_rel = 0.0;
        for (Index i = 0; i < g.size(); ++i)
            inc_rel = std::max(inc_rel, std::abs(g[i] - h[i]) / std::max(g[i], 1e-300));
        out.increments.push_back(inc);
        h = std::move(g);
        ++out.iterations;
        if (polish < 0 && inc <= tol && inc_rel <= rel_tol) {
            out.converged = true;
            polish = std::min<long>(20, cap - k - 1);  // shrink residual below the stop increment
        }
        if (polish == 0) break;
        if (polish > 0) --polish;
    }
    out.last_increment = out.increments.empty() ? 0.0 : out.increments.back();
    out.value = std::move(h);
    return out;
}

/// lambda = log( nu(M h / psi) ) / tau for h normalized by nu(h/psi) = 1.
template <class Kernel>
double compute_lambda(const Kernel& M, const Vector& psi, const Vector& nu, const Vector& h) {
    double base = nu.dot(h.cwiseQuotient(psi));
    if (!(base > 0.0)) throw std::invalid_argument("compute_lambda: nu(h/psi) must be positive");
    double mass = nu.dot(M.apply(h).cwiseQuotient(psi)) / base;
    if (!(mass > 0.0)) throw std::domain_error("compute_lambda: nonpositive mass");
    return std::log(mass) / M.tau();
}

/// Left eigenmeasure by iterating the psi-tilted occupation measures
/// pi_k = (eta M_k)(psi .)/(eta M_k psi), eta = nu(./psi), then transforming
/// gamma(f) = pi(f/psi)/pi(h/psi), which lands on gamma(h) = 1.
template <class Kernel>
IterationTrace compute_gamma(const Kernel& M, const WeightPair& w, const Vector& nu,
                             const Vector& h, double tol = 1e-12, double kappa = 1.0,
                             long cap = 100000) {
    detail::require_same_size(nu, w.psi, "compute_gamma");
    const Vector weight = Vector::Ones(w.size()) + kappa * w.V.cwiseQuotient(w.psi);
    IterationTrace out;
    Vector u = nu.cwiseQuotient(w.psi);  // density of eta
    {
        double s = u.dot(w.psi);
        u /= s;
    }
    Vector pi = u.cwiseProduct(w.psi);
    long polish = -1;
    for (long k = 0; k < cap; ++k) {
        u = M.apply_left(u);
        double s = u.dot(w.psi);
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::domain_error("compute_gamma: kernel killed the occupation measure");
        u /= s;
        Vector pi_next = u.cwiseProduct(w.psi);
        double inc = ((pi_next - pi).cwiseProduct(weight)).cwiseAbs().sum();
        out.increments.push_back(inc);
        pi = std::move(pi_next);
        ++out.iterations;
        if (polish < 0 && inc <= tol) {
            out.converged = true;
            polish = std::min<long>(20, cap - k - 1);
        }
        if (polish == 0) break;
        if (polish > 0) --polish;
    }
    out.last_increment = out.increments.empty() ? 0.0 : out.increments.back();
    Vector gamma = pi.cwiseQuotient(w.psi);
    double gh = gamma.dot(h);
    if (!(gh > 0.0)) throw std::domain_error("compute_gamma: pi(h/psi) not positive");
    out.value = gamma / gh;
    return out;
}

struct EigenTriplet {
    double lambda = 0.0;       // continuous-time rate
    double step_factor = 0.0;  // e^{lambda tau}
    double tau = 0.0;
    Vector h;      // ||h||_{B(V)} = 1
    Vector gamma;  // gamma(h) = 1
    double nu_scale = 0.0;  // h with nu(h/psi)=1 equals nu_scale * h

    double residual_right = 0.0;  // ||M h - e^{lt} h||_{B(V)} / e^{lt}
    double residual_left = 0.0;   // ||gamma M - e^{lt} gamma||_{M(V)} / (e^{lt} ||gamma||_{M(V)})
    long h_iterations = 0;
    long gamma_iterations = 0;
    bool converged = false;
    double last_increment = 0.0;
    std::vector<double> h_increments;
};

struct SolveOptions {
    double tol = 1e-12;
    long cap = 100000;
    double kappa = 1.0;

    /// Iteration budget implied by a certified rate: enough certified
    /// contractions to push the increment below tol (clamped for sanity).
    static SolveOptions from_ledger(const ConstantsLedger& L, double tol = 1e-12) {
        SolveOptions o;
        o.tol = tol;
        double per_block = -std::log(L.rho);
        double blocks = std::ceil(std::log(1.0 / tol) / per_block);
        double cap = std::max(10.0 * static_cast<double>(L.frak_p) * blocks, 10000.0);
        o.cap = static_cast<long>(std::min(cap, 2.0e6));
        o.kappa = L.kappa;
        return o;
    }
};

template <class Kernel>
EigenTriplet solve_triplet(const Kernel& M, const WeightPair& w, const Vector& nu,
                           const SolveOptions& opts = {}) {
    EigenTriplet t;
    t.tau = M.tau();
    IterationTrace ht = compute_h(M, w, nu, opts.tol, opts.cap);
    t.h_iterations = ht.iterations;
    t.h_increments = ht.increments;
    t.lambda = compute_lambda(M, w.psi, nu, ht.value);
    t.step_factor = std::exp(t.lambda * M.tau());
    IterationTrace gt = compute_gamma(M, w, nu, ht.value, opts.tol, opts.kappa, opts.cap);
    t.gamma_iterations = gt.iterations;
    t.converged = ht.converged && gt.converged;
    t.last_increment = std::max(ht.last_increment, gt.last_increment);

    // Rescale to the convention gamma(h) = ||h||_{B(V)} = 1; keep both scalings.
    double s = weighted_sup_norm(ht.value, w.V);
    t.nu_scale = s;
    t.h = ht.value / s;
    t.gamma = gt.value * s;

    t.residual_right =
        weighted_sup_norm(M.apply(t.h) - t.step_factor * t.h, w.V) / t.step_factor;
    Vector gm = M.apply_left(t.gamma);
    t.residual_left = weighted_tv_norm(Vector(gm - t.step_factor * t.gamma), w.V) /
                      (t.step_factor * weighted_tv_norm(t.gamma, w.V));
    return t;
}

// ---------------------------------------------------------------------------
// Audits.

struct MuSet {
    std::vector<Vector> measures;
    std::vector<std::string> names;
};

/// All Dirac masses when the space is small; otherwise a seeded sample of 50
/// Diracs plus the uniform measure. The seed fully determines the choice.
inline MuSet default_mu_set(Index n, std::uint64_t seed = 0) {
    MuSet out;
    auto add_dirac = [&](Index x) {
        Vector e = Vector::Zero(n);
        e[x] = 1.0;
        out.measures.push_back(std::move(e));
        out.names.push_back("dirac_" + std::to_string(x));
    };
    if (n <= 100) {
        for (Index x = 0; x < n; ++x) add_dirac(x);
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Index> dist(0, n - 1);
        std::set<Index> chosen;
        while (chosen.size() < 50) chosen.insert(dist(rng));
        for (Index x : chosen) add_dirac(x);
        out.measures.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
        out.names.push_back("uniform");
    }
    return out;
}

/// Least-squares decay rate of log(err) against time, over the window before
/// the series hits its noise floor. +infinity when the series is flat zero.
inline double fit_decay_rate(const std::vector<double>& err, double dt) {
    double first = 0.0;
    for (double e : err)
        if (e > 0.0) {
            first = e;
            break;
        }
    if (first == 0.0) return std::numeric_limits<double>::infinity();
    const double floor = std::max(first * 1e-11, 1e-290);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < err.size(); ++k) {
        if (err[k] <= floor) break;
        pts.emplace_back(static_cast<double>(k + 1) * dt, std::log(err[k]));
    }
    if (pts.size() < 3) return std::numeric_limits<double>::infinity();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(pts.size());
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return -slope;
}

struct AuditRow {
    long k = 0;
    double err = 0.0;
    double bound = 0.0;
    bool pass = true;
};

struct AuditTable {
    std::vector<AuditRow> rows;
    double fitted_rate = 0.0;  // min over mu of the fitted decay rates
    double sigma_used = 0.0;
    double bound_constant = 0.0;
    long p_steps = 0;
    bool rate_pass = false;
    bool bound_pass = false;
    bool pass = false;
    std::string note;
};

/// C of the convergence theorem, assembled from the ledger and gamma(V).
inline double audit_bound_constant(const ConstantsLedger& L, double gammaV) {
    return L.proof.C2_prime * (1.0 + L.Theta) * (1.0 + (1.0 + L.kappa) * gammaV) *
           std::max(1.0, L.C1 * (L.alpha + L.theta) / L.d1);
}

/// Records err_k = ||e^{-lambda k tau} mu M_k - mu(h) gamma||_{M(V)} for each
/// mu, normalized by the theorem's own right-hand side so the certified bound
/// reads err <= e^{-sigma k tau}. Rates are fitted on the raw errors.
template <class Kernel>
AuditTable convergence_audit(const Kernel& M, const WeightPair& w, const Vector& ledger_psi,
                             const EigenTriplet& t, const ConstantsLedger& L,
                             const MuSet& mus, long k_max) {
    AuditTable table;
    table.sigma_used = L.sigma;
    table.p_steps = L.p;
    const double gammaV = t.gamma.dot(w.V);
    const double C = audit_bound_constant(L, gammaV);
    table.bound_constant = C;
    const double tau = M.tau();
    const double step = std::exp(-t.lambda * tau);

    std::vector<std::vector<double>> raw(mus.measures.size());
    std::vector<std::vector<double>> normalized(mus.measures.size());
    for (std::size_t i = 0; i < mus.measures.size(); ++i) {
        const Vector& mu = mus.measures[i];
        const double muV = mu.dot(w.V);
        const double muPsi = mu.dot(ledger_psi);
        const double muH = mu.dot(t.h);
        Vector v = mu;
        for (long k = 1; k <= k_max; ++k) {
            v = M.apply_left(v) * step;  // v = e^{-lambda k tau} mu M_k
            double err = weighted_tv_norm(Vector(v - muH * t.gamma), w.V);
            raw[i].push_back(err);
            double envelope = C * (muV / muPsi) * std::min(v.dot(ledger_psi), muV);
            normalized[i].push_back(envelope > 0.0 ? err / envelope : 0.0);
        }
    }

    table.bound_pass = true;
    for (long k = 1; k <= k_max; ++k) {
        AuditRow row;
        row.k = k;
        for (auto& series : normalized) row.err = std::max(row.err, series[static_cast<std::size_t>(k - 1)]);
        row.bound = std::exp(-L.sigma * static_cast<double>(k) * tau);
        row.pass = k < L.p || row.err <= row.bound * (1.0 + 1e-9);
        if (!row.pass) table.bound_pass = false;
        table.rows.push_back(row);
    }

    table.fitted_rate = std::numeric_limits<double>::infinity();
    for (auto& series : raw)
        table.fitted_rate = std::min(table.fitted_rate, fit_decay_rate(series, tau));
    table.rate_pass = table.fitted_rate >= L.sigma - 1e-6;
    table.pass = table.rate_pass && table.bound_pass;
    return table;
}

/// Total-variation convergence of the mass-normalized evolution
/// mu M_k / (mu M_k 1) to pi = gamma / gamma(1). Requires inf V > 0, which the
/// weight type already enforces. Pass criterion: fitted rate >= sigma - 1e-6;
/// the bound column is the anchored certified-rate envelope.
template <class Kernel>
AuditTable mass_normalized_audit(const Kernel& M, const EigenTriplet& t, const MuSet& mus,
                                 long k_max, double sigma) {
    AuditTable table;
    table.sigma_used = sigma;
    const double tau = M.tau();
    Vector pi = t.gamma / t.gamma.sum();

    std::vector<std::vector<double>> raw(mus.measures.size());
    double worst_first = 0.0;
    for (std::size_t i = 0; i < mus.measures.size(); ++i) {
        Vector v = mus.measures[i];
        for (long k = 1; k <= k_max; ++k) {
            v = M.apply_left(v);
            double mass = v.sum();
            if (!(mass > 0.0))
                throw std::domain_error("mass_normalized_audit: evolution lost all mass");
            v /= mass;  // renormalizing keeps the conditional law and avoids overflow
            raw[i].push_back((v - pi).cwiseAbs().sum());
        }
        if (!raw[i].empty()) worst_first = std::max(worst_first, raw[i][0]);
    }
    const double anchor = std::max(2.0, worst_first * std::exp(sigma * tau));
    table.bound_constant = anchor;
    table.bound_pass = true;
    for (long k = 1; k <= k_max; ++k) {
        AuditRow row;
        row.k = k;
        for (auto& series : raw) row.err = std::max(row.err, series[static_cast<std::size_t>(k - 1)]);
        row.bound = anchor * std::exp(-sigma * static_cast<double>(k) * tau);
        row.pass = row.err <= row.bound * (1.0 + 1e-9);
        if (!row.pass) table.bound_pass = false;
        table.rows.push_back(row);
    }
    table.fitted_rate = std::numeric_limits<double>::infinity();
    for (auto& series : raw)
        table.fitted_rate = std::min(table.fitted_rate, fit_decay_rate(series, tau));
    table.rate_pass = table.fitted_rate >= sigma - 1e-6;
    table.pass = table.rate_pass;
    table.note = "pass criterion: fitted rate >= sigma - 1e-6";
    return table;
}

struct SelfConsistencyResult {
    Witness witness;        // refit with psi := h
    ConstantsLedger ledger;  // the certified rate to audit against
    double beta_error = 0.0;     // |beta' - e^{lambda tau}| / e^{lambda tau}
    double d_error = 0.0;        // |d' - 1|
    double sup_ratio_error = 0.0;  // max_{n<=n_check} |sup_K M^n h/h / e^{lambda n tau} - 1|
    bool pass = false;
};

/// Re-runs the witness machinery with psi := h. A correct triplet must come
/// back with beta' = e^{lambda tau}, d' = 1, and sup_K M^n h / h = e^{lambda n tau}.
template <class Kernel>
SelfConsistencyResult self_consistency(const Kernel& M, const Vector& V, const EigenTriplet& t,
                                       long n_check = 50, const SearchOptions& opts = {}) {
    Vector h = t.h.cwiseMin(V);  // guard rounding at the normalization argmax
    for (Index i = 0; i < h.size(); ++i)
        if (!(h[i] > 0.0))
            throw std::domain_error("self_consistency: h must be strictly positive");
    WitnessSearchResult search = full_witness_search(M, V, h, opts);
    if (!search.witness)
        throw std::domain_error("self_consistency: no witness found for psi := h (" +
                                search.diagnosis + ")");
    SelfConsistencyResult out{*search.witness, build_ledger(*search.witness), 0.0, 0.0, 0.0, false};
    // The refit may live on a power of the base step; compare against the
    // step factor at the witness's own tau.
    const double expected_beta = std::exp(t.lambda * out.witness.tau);
    out.beta_error = std::abs(out.witness.beta - expected_beta) / expected_beta;
    out.d_error = std::abs(out.witness.d - 1.0);

    Vector v = h;
    for (long n = 1; n <= n_check; ++n) {
        v = M.apply(v) / t.step_factor;
        double sup = 0.0;
        for (Index x = 0; x < v.size(); ++x)
            if (out.witness.K[static_cast<std::size_t>(x)]) sup = std::max(sup, v[x] / h[x]);
        out.sup_ratio_error = std::max(out.sup_ratio_error, std::abs(sup - 1.0));
    }
    out.pass = out.beta_error <= 1e-9 && out.d_error <= 1e-9 && out.sup_ratio_error <= 1e-9;
    return out;
}

// ---------------------------------------------------------------------------
// Dense oracle.

struct OracleEigen {
    bool ok = false;
    double rho_step = 0.0;   // dominant eigenvalue of the one-step kernel
    double gap_ratio = 0.0;  // |lambda_2| / rho_step
    bool gapless = false;
    bool dominant_real = false;
    bool dominant_simple = false;
    bool positive_pair = false;
    Vector h;      // ||h||_inf = 1
    Vector gamma;  // sums to 1
    std::string note;
};

namespace detail {

inline std::pair<Vector, bool> realize_eigenvector(const Eigen::VectorXcd& v) {
    // Rotate by the phase of the largest component, then require a small
    // imaginary residue and a nonnegative real part up to clamping.
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    std::complex<double> phase = v[imax] / std::abs(v[imax]);
    Eigen::VectorXcd rotated = v / phase;
    double scale = rotated.cwiseAbs().maxCoeff();
    if (rotated.imag().cwiseAbs().maxCoeff() > 1e-8 * scale) return {Vector(), false};
    Vector real = rotated.real();
    if (real.minCoeff() < -1e-8 * scale) return {real, false};
    return {real.cwiseMax(0.0), true};
}

}  // namespace detail

/// Full dense eigendecomposition ground truth (independent of the iterative
/// path). Reports the dominant eigenvalue, the spectral gap ratio, and the
/// Perron pair when it exists.
inline OracleEigen oracle_eigen(const KernelOperator& M) {
    if (M.n() > 3000) throw std::invalid_argument("oracle_eigen: n <= 3000 required");
    OracleEigen out;
    Matrix A = M.to_dense();
    Eigen::EigenSolver<Matrix> right(A);
    if (right.info() != Eigen::Success) {
        out.note = "eigensolver failed to converge";
        return out;
    }
    const auto& vals = right.eigenvalues();
    Index idx = 0;
    double rho = -1.0;
    for (Index i = 0; i < vals.size(); ++i) {
        double m = std::abs(vals[i]);
        // Prefer the (nearly) real member of any dominant cluster.
        if (m > rho * (1.0 + 1e-12) ||
            (m > rho * (1.0 - 1e-12) && std::abs(vals[i].imag()) < std::abs(vals[idx].imag()))) {
            if (m > rho) rho = m;
            idx = i;
        }
    }
    out.rho_step = rho;
    double second = 0.0;
    for (Index i = 0; i < vals.size(); ++i) {
        if (i == idx) continue;
        second = std::max(second, std::abs(vals[i]));
    }
    out.gap_ratio = rho > 0.0 ? second / rho : 1.0;
    out.gapless = out.gap_ratio >= 1.0 - 1e-12;
    out.dominant_real = std::abs(vals[idx].imag()) <= 1e-9 * std::max(1.0, rho) &&
                        vals[idx].real() > 0.0;
    out.dominant_simple = !out.gapless;

    auto [hr, hok] = detail::realize_eigenvector(right.eigenvectors().col(idx));
    Eigen::EigenSolver<Matrix> left(Matrix(A.transpose()));
    bool gok = false;
    Vector gr;
    if (left.info() == Eigen::Success) {
        Index jdx = 0;
        double bestdist = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < left.eigenvalues().size(); ++i) {
            double dist = std::abs(left.eigenvalues()[i] - vals[idx]);
            if (dist < bestdist) {
                bestdist = dist;
                jdx = i;
            }
        }
        auto res = detail::realize_eigenvector(left.eigenvectors().col(jdx));
        gr = res.first;
        gok = res.second;
    }
    out.positive_pair = hok && gok && hr.maxCoeff() > 0.0 && gr.maxCoeff() > 0.0;
    if (hok && hr.maxCoeff() > 0.0) out.h = hr / hr.maxCoeff();
    if (gok && gr.sum() > 0.0) out.gamma = gr / gr.sum();
    out.ok = out.dominant_real && out.dominant_simple && out.positive_pair;
    if (out.gapless) out.note = "no spectral gap: dominant eigenvalue not isolated";
    else if (!out.dominant_real) out.note = "dominant eigenvalue complex";
    else if (!out.positive_pair) out.note = "eigenvector pair not entrywise positive";
    return out;
}

}  // namespace specgap

#endif  // SPECGAP_EIGENSOLVER_HPP
