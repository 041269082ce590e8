#ifndef SPECGAP_CONSTANTS_HPP
#define SPECGAP_CONSTANTS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specgap/assumptions.hpp"

// The explicit-constants ledger: everything the quantitative spectral-gap
// certificate needs, computed by direct formula evaluation from a witness.

namespace specgap {

struct LedgerChoices {
    std::optional<double> frak_R;       // sublevel threshold, default 4c/(1-a)
    std::optional<double> frak_bprime;  // default frak_b / 2
    std::optional<double> frak_aprime;  // default midpoint of (a + 2c/R, 1)
};

/// Constants internal to the proofs, exposed for debugging the chain.
struct ProofConstants {
    double C2_prime = 0.0;  // C2 * max(1, ((alpha+theta)/beta)^p_minor)
    double C3 = 0.0;        // h-iteration Cauchy constant
    double S_p = 0.0;       // sum_{j=1}^{p_minor} (a/(c r))^j
    double log_frak_b = 0.0;
    double log_C1 = 0.0;
    double log_c1 = 0.0;
    double log_rho = 0.0;
};

struct ConstantsLedger {
    // Witness inputs.
    double tau = 0.0, alpha = 0.0, beta = 0.0, theta = 0.0, c = 0.0, d = 0.0;

    double Theta = 0.0;   // theta / (beta - alpha)
    double R_sup = 0.0;   // sup_K V / psi
    double Xi = 0.0;      // alpha (R + Theta) + theta
    double frak_a = 0.0;  // alpha / beta
    double frak_c = 0.0;  // theta / (c (beta - alpha))
    double r = 0.0;       // (beta / Xi)^2
    double q = 0.0;       // log(c r) / log(frak_a)
    std::vector<double> c_seq;  // c_0 = 1, c_k = c^k (beta/Xi)^{k-1}
    double d1 = 0.0;      // (1 - frak_a) d
    double d2 = 0.0;      // (beta - alpha) d / (alpha + theta)

    // Chosen Harris parameters.
    double frak_R = 0.0;
    double frak_bprime = 0.0;
    double frak_aprime = 0.0;

    long frak_p = 0;      // minorization step count
    double frak_b = 0.0;  // minorization constant
    long ell = 0;         // summation bound in S: fixed to frak_p, recorded explicitly
    double kappa = 0.0;   // frak_bprime / frak_c
    double frak_y = 0.0;
    double rho = 0.0;     // max{frak_y, frak_a^frak_p}
    double sigma = 0.0;   // -log(rho) / (frak_p tau)

    long p = 0;           // charge-K step count
    double C1 = 0.0;
    double C2 = 0.0;
    double c1_lower = 0.0;  // lower-bound constant of h (nu-normalized)
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;

    bool floored_theta = false;
    ProofConstants proof;

    /// With the ||h||_{B(V)} = 1 normalization the lower bound on h reads
    /// c1 d2 (psi/V)^q psi.
    double h_lower_constant() const { return c1_lower * d2; }
};

struct MinorizationConstants {
    long frak_p = 0;
    double frak_b = 0.0;
    double log_frak_b = 0.0;
    double S = 0.0;  // sum_{j=1}^{frak_p} (frak_a/(c r))^j
    long ell = 0;
};

namespace detail {

/// log of sum_{j=1}^{p} g^j, stable for g around and above 1.
inline double log_geometric_sum(double g, long p) {
    if (p <= 0) return -std::numeric_limits<double>::infinity();
    if (std::abs(g - 1.0) < 1e-14) return std::log(static_cast<double>(p));
    double lg = std::log(g);
    if (g > 1.0) {
        // g (g^p - 1)/(g - 1) = g^p * (g - g^{1-p})/(g-1)
        return static_cast<double>(p) * lg + std::log((g - std::pow(g, 1.0 - static_cast<double>(p))) / (g - 1.0));
    }
    return std::log(g * (1.0 - std::pow(g, static_cast<double>(p))) / (1.0 - g));
}

}  // namespace detail

/// Step count and coupling constant of the embedded-propagator minorization:
///   frak_p = floor( log(2 R_level (alpha+theta) / ((beta-alpha) d)) / log(beta/alpha) ) + 1
///   frak_b = c^2 beta (beta-alpha)^2 d^2 / (2 theta (alpha+theta)(alpha R_sup + theta)) / S.
inline MinorizationConstants minorization_constants(double alpha, double beta, double theta,
                                                    double c, double d, double R_sup,
                                                    double frak_R,
                                                    std::optional<long> p_override = {}) {
    MinorizationConstants out;
    const double frak_a = alpha / beta;
    const double arg = 2.0 * frak_R * (alpha + theta) / ((beta - alpha) * d);
    long p = static_cast<long>(std::floor(std::log(arg) / std::log(beta / alpha))) + 1;
    out.frak_p = std::max<long>(1, p);
    if (p_override) out.frak_p = *p_override;
    out.ell = out.frak_p;

    const double Theta = theta / (beta - alpha);
    const double Xi = alpha * (R_sup + Theta) + theta;
    const double r = (beta / Xi) * (beta / Xi);
    const double g = frak_a / (c * r);
    const double logS = detail::log_geometric_sum(g, out.frak_p);
    out.S = std::exp(logS);

    double log_num = 2.0 * std::log(c) + std::log(beta) + 2.0 * std::log(beta - alpha) +
                     2.0 * std::log(d);
    double log_den = std::log(2.0) + std::log(theta) + std::log(alpha + theta) +
                     std::log(alpha * R_sup + theta);
    out.log_frak_b = log_num - log_den - logS;
    out.frak_b = std::min(std::exp(out.log_frak_b), 1.0);
    return out;
}

/// Evaluate every explicit constant from a valid witness. All ledger
/// invariants are asserted; violations flag arithmetic misconfiguration.
inline ConstantsLedger build_ledger(const Witness& w, const LedgerChoices& choices = {}) {
    if (!(w.beta > w.alpha) || !(w.alpha > 0.0))
        throw std::invalid_argument("build_ledger: witness requires beta > alpha > 0");
    if (!(w.theta > 0.0) || !(w.c > 0.0) || w.c > 1.0 || !(w.d > 0.0) || w.d > 1.0)
        throw std::invalid_argument("build_ledger: witness constants out of range");
    if (!(w.R_sup >= 1.0))
        throw std::invalid_argument("build_ledger: R_sup = sup_K V/psi must be >= 1");

    ConstantsLedger L;
    L.tau = w.tau;
    L.alpha = w.alpha;
    L.beta = w.beta;
    L.theta = w.theta;
    L.c = w.c;
    L.d = w.d;
    L.floored_theta = w.theta_floored;

    L.Theta = w.theta / (w.beta - w.alpha);
    L.R_sup = w.R_sup;
    L.Xi = w.alpha * (L.R_sup + L.Theta) + w.theta;
    L.frak_a = w.alpha / w.beta;
    L.frak_c = w.theta / (w.c * (w.beta - w.alpha));
    L.r = (w.beta / L.Xi) * (w.beta / L.Xi);
    L.q = std::log(w.c * L.r) / std::log(L.frak_a);
    L.d1 = (1.0 - L.frak_a) * w.d;
    L.d2 = (w.beta - w.alpha) * w.d / (w.alpha + w.theta);

    L.frak_R = choices.frak_R.value_or(4.0 * L.frak_c / (1.0 - L.frak_a));
    if (!(L.frak_R > 2.0 * L.frak_c / (1.0 - L.frak_a)))
        throw std::invalid_argument("build_ledger: frak_R must exceed 2 frak_c/(1-frak_a)");

    auto mc = minorization_constants(w.alpha, w.beta, w.theta, w.c, w.d, L.R_sup, L.frak_R);
    L.frak_p = mc.frak_p;
    L.frak_b = mc.frak_b;
    L.ell = mc.ell;
    L.proof.S_p = mc.S;
    L.proof.log_frak_b = mc.log_frak_b;

    L.frak_bprime = choices.frak_bprime.value_or(0.5 * L.frak_b);
    if (!(L.frak_bprime > 0.0) || !(L.frak_bprime < L.frak_b))
        throw std::invalid_argument("build_ledger: frak_bprime must lie in (0, frak_b)");
    const double aprime_lo = L.frak_a + 2.0 * L.frak_c / L.frak_R;
    L.frak_aprime = choices.frak_aprime.value_or(0.5 * (aprime_lo + 1.0));
    if (!(L.frak_aprime > aprime_lo) || !(L.frak_aprime < 1.0))
        throw std::invalid_argument("build_ledger: frak_aprime must lie in (frak_a + 2 frak_c/frak_R, 1)");

    L.kappa = L.frak_bprime / L.frak_c;
    // Both candidate contraction factors have the form 1 - x with x possibly
    // tiny; track their logs directly so sigma keeps full precision.
    const double x1 = L.frak_b - L.frak_bprime;
    const double kR = L.kappa * L.frak_R;
    const double x2 = kR * (1.0 - L.frak_aprime) / (2.0 + kR);
    const double log_y = std::max(std::log1p(-x1), std::log1p(-x2));
    L.frak_y = std::exp(log_y);
    const double log_ap = static_cast<double>(L.frak_p) * std::log(L.frak_a);
    const double log_rho = std::max(log_y, log_ap);
    L.rho = std::exp(log_rho);
    L.proof.log_rho = log_rho;
    L.sigma = -log_rho / (static_cast<double>(L.frak_p) * w.tau);

    // Charge-K step count and the h-iteration constants.
    L.p = std::max<long>(
        1, static_cast<long>(std::floor(std::log(2.0 * (1.0 + w.theta / w.alpha) * (L.Theta + L.R_sup)) /
                                        std::log(1.0 / L.frak_a))) +
               1);

    const long seq_len = std::max<long>({L.p + 2, L.frak_p + 2, 16});
    L.c_seq.resize(static_cast<std::size_t>(seq_len));
    L.c_seq[0] = 1.0;
    const double log_ratio = std::log(w.beta / L.Xi);
    for (long k = 1; k < seq_len; ++k)
        L.c_seq[static_cast<std::size_t>(k)] =
            std::exp(static_cast<double>(k) * std::log(w.c) + static_cast<double>(k - 1) * log_ratio);

    const double log_c_pm1 =
        (L.p >= 2) ? (static_cast<double>(L.p - 1) * std::log(w.c) + static_cast<double>(L.p - 2) * log_ratio)
                   : 0.0;
    L.proof.log_C1 = std::log(2.0) + static_cast<double>(L.p + 1) * (std::log(L.Xi) - std::log(w.beta)) -
                     std::log(w.c) - log_c_pm1;
    L.C1 = std::exp(L.proof.log_C1);

    const double a_pow_negp = std::exp(-static_cast<double>(L.frak_p) * std::log(L.frak_a));
    const double branch1 = 2.0 * a_pow_negp + L.kappa * L.C1 * (1.0 + 2.0 * L.Theta * a_pow_negp);
    const double branch2 =
        2.0 * (1.0 + L.kappa * L.Theta) *
            std::exp(-static_cast<double>(L.p + L.frak_p) * std::log(L.frak_a)) +
        L.kappa;
    L.C2 = std::max(branch1, branch2);
    L.proof.C2_prime =
        L.C2 * std::max(1.0, std::pow((w.alpha + w.theta) / w.beta, static_cast<double>(L.frak_p)));
    L.proof.C3 = L.C1 * L.proof.C2_prime * (w.alpha + w.theta) * (w.alpha + w.theta) *
                 (1.0 + L.R_sup) / (L.d1 * L.d1 * w.beta * w.beta * L.kappa);

    const double expo = 2.0 + std::log(w.beta / (2.0 * (w.alpha + w.theta))) / std::log(L.frak_a);
    L.proof.log_c1 = std::log(w.c) + expo * std::log(w.c * L.r) - std::log(2.0);
    L.c1_lower = std::exp(L.proof.log_c1);

    L.lambda_lo = std::log(w.beta) / w.tau;
    L.lambda_hi = std::log(w.alpha + w.theta) / w.tau;

    auto check = [](bool ok, const char* what) {
        if (!ok) throw std::domain_error(std::string("build_ledger: invariant violated: ") + what);
    };
    check(L.frak_a > 0.0 && L.frak_a < 1.0, "frak_a in (0,1)");
    // rho may round to 1.0 when the coupling constant is tiny; the log keeps
    // the sign information.
    check(L.rho > 0.0 && L.proof.log_rho < 0.0, "rho in (0,1)");
    check(L.sigma > 0.0, "sigma > 0");
    check(L.d2 > 0.0, "d2 > 0");
    check(L.q > 0.0, "q > 0");
    check(L.lambda_lo <= L.lambda_hi + 1e-12, "lambda_lo <= lambda_hi");
    return L;
}

struct RateCertificate {
    double sigma = 0.0;
    double rho = 0.0;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
};

inline RateCertificate rate_certificate(const ConstantsLedger& L) {
    return RateCertificate{L.sigma, L.rho, L.lambda_lo, L.lambda_hi};
}

/// Coarse grid search over (frak_R, frak_bprime, frak_aprime) maximizing sigma.
inline ConstantsLedger tune_ledger(const Witness& w) {
    ConstantsLedger best = build_ledger(w);
    const double frak_a = w.alpha / w.beta;
    const double frak_c = w.theta / (w.c * (w.beta - w.alpha));
    const double base = frak_c / (1.0 - frak_a);
    for (double rm : {2.5, 4.0, 8.0, 16.0, 32.0}) {
        for (double bp : {0.25, 0.5, 0.75}) {
            for (double ap : {0.25, 0.5, 0.75}) {
                LedgerChoices ch;
                ch.frak_R = rm * base;
                auto mc = minorization_constants(w.alpha, w.beta, w.theta, w.c, w.d, w.R_sup,
                                                 *ch.frak_R);
                ch.frak_bprime = bp * mc.frak_b;
                const double lo = frak_a + 2.0 * frak_c / *ch.frak_R;
                ch.frak_aprime = lo + ap * (1.0 - lo);
                try {
                    ConstantsLedger cand = build_ledger(w, ch);
                    if (cand.sigma > best.sigma) best = cand;
                } catch (const std::exception&) {
                    // inadmissible corner of the grid
                }
            }
        }
    }
    return best;
}

}  // namespace specgap

#endif  // SPECGAP_CONSTANTS_HPP
