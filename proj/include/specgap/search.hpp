#ifndef SPECGAP_SEARCH_HPP
#define SPECGAP_SEARCH_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "specgap/constants.hpp"

// Witness search: iterate K = {V <= R psi} over a threshold grid and a small
// family of reference measures, fit the four conditions, and keep the valid
// witness whose ledger certifies the largest rate sigma (smallest R on ties).
// On failure, report the first failing condition of the candidate that got
// furthest.

namespace specgap {

struct SearchOptions {
    long r_grid = 24;
    long a4_horizon = 400;
    // Powers of the base step: one-step fits can be contaminated by
    // truncation boundary layers that wash out under iteration.
    std::vector<long> tau_multiples = {1, 2, 4, 8};
    std::optional<Vector> explicit_nu;  // used in addition to the canonical families
    LedgerChoices ledger_choices;
    bool rank_by_sigma = true;  // false: stop at the first valid witness
};

struct WitnessSearchResult {
    std::optional<Witness> witness;
    double sigma = 0.0;
    std::string diagnosis;  // empty when a witness was found
    long candidates_tried = 0;
};

namespace detail {

inline std::vector<double> threshold_grid(const Vector& V, const Vector& psi, long grid_size) {
    std::set<double> distinct;
    for (Index i = 0; i < V.size(); ++i) distinct.insert(V[i] / psi[i]);
    std::vector<double> ratios(distinct.begin(), distinct.end());
    if (static_cast<long>(ratios.size()) <= grid_size) return ratios;
    std::vector<double> out;
    const double lo = ratios.front();
    const double hi = ratios.back();
    for (long i = 0; i < grid_size; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(grid_size - 1);
        out.push_back(lo * std::pow(hi / lo, t));
    }
    out.push_back(hi);  // always include the full space
    return out;
}

struct CandidateFailure {
    int progress = -1;  // 0: A1/A2, 1: A3, 2: A4, 3: ledger
    std::string message;
};

/// Fill the per-condition slack reports by direct re-verification.
inline void finalize_witness(const KernelOperator& Mj, const Vector& V, const Vector& psi,
                             Witness& w, long a4_horizon) {
    WitnessCheck check = check_witness(Mj, V, psi, w, a4_horizon);
    w.a1 = check.a1;
    w.a2 = check.a2;
    w.a3 = check.a3;
    w.a4 = check.a4;
}

}  // namespace detail

inline WitnessSearchResult full_witness_search(const KernelOperator& M, const Vector& V,
                                               const Vector& psi,
                                               const SearchOptions& opts = {}) {
    detail::require_same_size(V, psi, "full_witness_search");
    WitnessSearchResult result;
    detail::CandidateFailure best_failure;
    std::optional<Witness> best;
    std::optional<KernelOperator> best_kernel;
    double best_sigma = -1.0;
    double best_R = std::numeric_limits<double>::infinity();
    // Valid witnesses whose ledger cannot be evaluated in double precision
    // (the coupling constant underflows) are kept as a fallback, ranked by
    // the contraction ratio alpha/beta.
    std::optional<Witness> fallback;
    std::optional<KernelOperator> fallback_kernel;
    double fallback_ratio = std::numeric_limits<double>::infinity();

    const std::vector<double> thresholds = detail::threshold_grid(V, psi, opts.r_grid);

    for (long multiple : opts.tau_multiples) {
        if (multiple < 1) continue;
        if (multiple > 1 && M.n() > kDenseStorageLimit) break;
        const KernelOperator Mj = multiple == 1 ? M : semigroup_power(M, multiple);
        const Vector MV = Mj.apply(V);
        const Vector Mpsi = Mj.apply(psi);
        const double beta = fit_A2_from_image(Mpsi, psi);
        if (!(beta > 0.0)) {
            if (best_failure.progress < 0)
                best_failure = {0, "A2 fails: beta = 0 (kernel kills psi)"};
            continue;
        }
        const PsiIterates iterates = compute_psi_iterates(Mj, psi, opts.a4_horizon);

        for (double R : thresholds) {
            std::vector<bool> K(static_cast<std::size_t>(V.size()), false);
            double R_sup = 0.0;
            long K_count = 0;
            for (Index x = 0; x < V.size(); ++x) {
                double ratio = V[x] / psi[x];
                if (ratio <= R * (1.0 + 1e-15)) {
                    K[static_cast<std::size_t>(x)] = true;
                    R_sup = std::max(R_sup, ratio);
                    ++K_count;
                }
            }
            if (K_count == 0) continue;

            auto [alpha, theta] = fit_A1_from_image(MV, V, psi, K, beta);

            std::vector<std::pair<std::string, Vector>> nus;
            for (NuFamily fam : {NuFamily::InfMeasure, NuFamily::Uniform, NuFamily::PsiWeighted}) {
                Vector nu = make_nu(fam, Mj, psi, K);
                if (nu.sum() > 0.0) nus.emplace_back(to_string(fam), std::move(nu));
            }
            if (opts.explicit_nu) {
                Vector nu = *opts.explicit_nu;
                bool on_K = true;
                for (Index y = 0; y < nu.size(); ++y)
                    if (nu[y] > 0.0 && !K[static_cast<std::size_t>(y)]) on_K = false;
                if (on_K && nu.sum() > 0.0) nus.emplace_back("explicit", nu / nu.sum());
            }

            for (auto& [nu_name, nu] : nus) {
                ++result.candidates_tried;
                Witness w;
                w.tau = Mj.tau();
                w.alpha = alpha;
                w.beta = beta;
                w.theta = theta;
                w.theta_floored = (theta <= kThetaFloor);
                w.K = K;
                w.nu = nu;
                w.R_sup = R_sup;

                if (!(beta > alpha)) {
                    if (best_failure.progress < 0) {
                        std::ostringstream os;
                        os << "A1/A2 fail: beta <= alpha (beta=" << beta << ", alpha=" << alpha
                           << ")";
                        best_failure = {0, os.str()};
                    }
                    continue;
                }
                w.c = fit_A3(Mj, psi, K, nu);
                if (!(w.c > 0.0)) {
                    if (best_failure.progress < 1) best_failure = {1, "A3 fails: c = 0"};
                    continue;
                }
                A4Result a4 = fit_A4_from_iterates(iterates, K, nu);
                w.d = a4.d;
                w.a4_certificate = a4.certificate;
                if (!(w.d > 0.0) || !a4.certificate.converged()) {
                    if (best_failure.progress < 2) {
                        std::ostringstream os;
                        os << "A4 fails: horizon status " << to_string(a4.certificate.status)
                           << " (d=" << a4.d << ", n=" << a4.certificate.n_used << ")";
                        best_failure = {2, os.str()};
                    }
                    continue;
                }

                double sigma;
                try {
                    sigma = build_ledger(w, opts.ledger_choices).sigma;
                } catch (const std::exception& e) {
                    if (best_failure.progress < 3)
                        best_failure = {3, std::string("ledger fails: ") + e.what()};
                    if (alpha / beta < fallback_ratio) {
                        fallback = w;
                        fallback_kernel = Mj;
                        fallback_ratio = alpha / beta;
                    }
                    continue;
                }

                const bool better =
                    !best || sigma > best_sigma * (1.0 + 1e-9) ||
                    (std::abs(sigma - best_sigma) <= 1e-9 * std::abs(best_sigma) && R < best_R);
                if (better) {
                    best = w;
                    best_kernel = Mj;
                    best_sigma = sigma;
                    best_R = R;
                }
                if (!opts.rank_by_sigma) {
                    detail::finalize_witness(Mj, V, psi, *best, opts.a4_horizon);
                    result.witness = best;
                    result.sigma = best_sigma;
                    return result;
                }
            }
        }
    }

    if (best) {
        detail::finalize_witness(*best_kernel, V, psi, *best, opts.a4_horizon);
        result.witness = best;
        result.sigma = best_sigma;
    } else if (fallback) {
        detail::finalize_witness(*fallback_kernel, V, psi, *fallback, opts.a4_horizon);
        result.witness = fallback;
        result.sigma = 0.0;  // conditions hold but the rate certificate underflows
    } else {
        result.diagnosis =
            best_failure.progress >= 0 ? best_failure.message : "no admissible candidate";
    }
    return result;
}

}  // namespace specgap

#endif  // SPECGAP_SEARCH_HPP
