#ifndef SPECGAP_MODELS_HPP
#define SPECGAP_MODELS_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "specgap/eigensolver.hpp"
#include "specgap/propagator.hpp"

// Application front-ends: the absorbed linear birth-death chain (conditioned
// on survival) and the growth-fragmentation equation on a truncated grid.
// Each produces a Metzler generator plus canonical weights (V, psi) and the
// closed-form drift constants feeding the witness machinery.

namespace specgap {

/// Raised when a model is rejected before any computation (maps to CLI exit 3).
struct ModelRejected : std::domain_error {
    using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Birth-death chain absorbed at zero.

struct BirthDeathModel {
    double b = 1.0;   // birth rate for populations >= 2
    double d = 4.0;   // death rate for populations >= 2
    double b1 = 1.0;  // birth rate at population 1
    double d1 = 1.0;  // absorption rate at population 1
    Index N = 200;    // truncation level; states are populations 1..N
    double tau = 1.0;

    /// Survival-mode criterion: Delta = (sqrt(b)-sqrt(d))^2 + b1(sqrt(d/b)-1) - d1.
    double Delta() const {
        double s = std::sqrt(b) - std::sqrt(d);
        return s * s + b1 * (std::sqrt(d / b) - 1.0) - d1;
    }
    double eta() const { return std::sqrt(d / b) - Delta() / (2.0 * b1); }
    bool condition_H() const { return Delta() > 0.0; }
};

struct BirthDeathBuild {
    GeneratorMatrix L;
    StateSpace states;
    WeightPair weights;
    DriftCertificate drift;
    bool witness_mode_ok = false;
    std::string warning;
};

/// Tridiagonal sub-Markov generator on {1..N}: absorption mass at 0 dropped,
/// birth suppressed at the cap (b_N = 0) so the truncation error stays
/// one-sided. V(n) = sqrt(d/b)^n, psi(n) = eta^n.
inline BirthDeathBuild bd_build(const BirthDeathModel& m) {
    if (!(m.b > 0.0 && m.d > 0.0 && m.b1 > 0.0 && m.d1 > 0.0))
        throw std::invalid_argument("bd_build: rates must be positive");
    if (m.N < 3) throw std::invalid_argument("bd_build: need N >= 3");
    if (!(m.tau > 0.0)) throw std::invalid_argument("bd_build: tau must be positive");
    const double g = std::sqrt(m.d / m.b);
    if (static_cast<double>(m.N) * std::abs(std::log(g)) > 690.0)
        throw std::invalid_argument("bd_build: V(N) overflows at this truncation level");

    const Index N = m.N;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(3 * N));
    // state i <-> population n = i+1
    trip.emplace_back(0, 0, -(m.b1 + m.d1));
    trip.emplace_back(0, 1, m.b1);
    for (Index i = 1; i < N - 1; ++i) {
        trip.emplace_back(i, i - 1, m.d);
        trip.emplace_back(i, i, -(m.b + m.d));
        trip.emplace_back(i, i + 1, m.b);
    }
    trip.emplace_back(N - 1, N - 2, m.d);
    trip.emplace_back(N - 1, N - 1, -m.d);
    SparseMatrix L(N, N);
    L.setFromTriplets(trip.begin(), trip.end());

    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) labels.push_back(std::to_string(i + 1));

    Vector V(N), psi(N);
    const double eta = m.eta();
    const bool ok = m.condition_H() && eta > 0.0;
    for (Index i = 0; i < N; ++i) {
        double n = static_cast<double>(i + 1);
        V[i] = std::pow(g, n);
        psi[i] = ok ? std::pow(eta, n) : V[i];  // fallback keeps the build usable
    }

    auto lambda_u = [&](double u) { return m.b * (u - 1.0) + m.d * (1.0 / u - 1.0); };
    auto lambda_u1 = [&](double u) { return m.b1 * (u - 1.0) - m.d1; };

    DriftCertificate drift;
    drift.tau = m.tau;
    drift.a = -std::pow(std::sqrt(m.d) - std::sqrt(m.b), 2);
    if (ok) {
        drift.zeta = m.Delta() * V[0] / psi[0];
        drift.b = std::min(lambda_u(eta), lambda_u1(eta));
        drift.xi = std::max(lambda_u(eta), lambda_u1(eta));
    }
    drift.varphi = psi;
    drift.C_equiv = 1.0;

    BirthDeathBuild out{GeneratorMatrix(std::move(L)), StateSpace(std::move(labels)),
                        WeightPair(std::move(V), std::move(psi)), std::move(drift), ok, ""};
    if (!ok) {
        std::ostringstream os;
        os << "(H) fails: Delta = " << m.Delta() << (eta <= 0.0 ? " (psi ratio nonpositive)" : "")
           << "; model buildable for exploration only";
        out.warning = os.str();
    }
    return out;
}

struct QsdOptions {
    double tail_tol = 1e-6;
    Index N_cap = 3200;
    double eigen_tol = 1e-12;
    long k_max = 60;
    long a4_horizon = 400;
    std::uint64_t seed = 0;
    bool include_geometric_mu = true;
};

struct QsdResult {
    Index N_used = 0;
    bool truncation_converged = false;
    double tail_tv = 0.0;
    Witness witness;
    ConstantsLedger ledger;
    EigenTriplet triplet;
    SelfConsistencyResult self;
    double lambda0 = 0.0;  // decay rate of the survival probability, -lambda
    Vector pi;             // quasi-stationary law, gamma / gamma(1)
    Vector h;
    AuditTable conditional_audit;  // TV convergence of the conditioned law
    AuditTable weighted_audit;     // M(V) convergence at the certified rate
};

namespace detail {

struct BdSolved {
    BirthDeathBuild build;
    KernelOperator kernel;
    Witness witness;
    ConstantsLedger ledger;
    EigenTriplet triplet;
    BdSolved(BirthDeathBuild b, KernelOperator k, Witness w, ConstantsLedger l, EigenTriplet t)
        : build(std::move(b)), kernel(std::move(k)), witness(std::move(w)),
          ledger(std::move(l)), triplet(std::move(t)) {}
};

inline BdSolved bd_solve_at(BirthDeathModel m, Index N, const QsdOptions& opts) {
    m.N = N;
    BirthDeathBuild build = bd_build(m);
    KernelOperator kernel = matrix_exp(build.L, m.tau);
    SearchOptions sopts;
    sopts.a4_horizon = opts.a4_horizon;
    WitnessSearchResult search =
        full_witness_search(kernel, build.weights.V, build.weights.psi, sopts);
    if (!search.witness)
        throw ModelRejected("bd_qsd: witness search failed at N=" + std::to_string(N) + ": " +
                            search.diagnosis);
    ConstantsLedger ledger = build_ledger(*search.witness);
    SolveOptions eopts = SolveOptions::from_ledger(ledger, opts.eigen_tol);
    EigenTriplet triplet = solve_triplet(kernel, build.weights, search.witness->nu, eopts);
    return BdSolved(std::move(build), std::move(kernel), std::move(*search.witness),
                    std::move(ledger), std::move(triplet));
}

}  // namespace detail

/// Quasi-stationary analysis of the absorbed chain: lambda0 = -lambda, the
/// QSD pi = gamma/gamma(1), and convergence tables for the conditioned law.
/// The truncation level doubles until pi moves by less than tail_tol in TV.
inline QsdResult bd_qsd(const BirthDeathModel& model, const QsdOptions& opts = {}) {
    if (!model.condition_H()) {
        std::ostringstream os;
        os << "(H) fails: Delta = " << model.Delta();
        throw ModelRejected(os.str());
    }
    if (model.eta() <= 0.0) throw ModelRejected("psi ratio eta nonpositive");

    QsdResult out;
    Index N = model.N;
    auto solved = detail::bd_solve_at(model, N, opts);
    while (true) {
        Index N2 = 2 * N;
        bool can_double = N2 <= opts.N_cap &&
                          static_cast<double>(N2) * std::abs(std::log(std::sqrt(model.d / model.b))) <= 690.0;
        if (!can_double) {
            out.truncation_converged = false;
            out.tail_tv = std::numeric_limits<double>::quiet_NaN();
            break;
        }
        auto refined = detail::bd_solve_at(model, N2, opts);
        Vector pi_N = solved.triplet.gamma / solved.triplet.gamma.sum();
        Vector pi_2N = refined.triplet.gamma / refined.triplet.gamma.sum();
        Vector padded = Vector::Zero(N2);
        padded.head(N) = pi_N;
        out.tail_tv = (padded - pi_2N).cwiseAbs().sum();
        if (out.tail_tv <= opts.tail_tol) {
            out.truncation_converged = true;
            break;
        }
        N = N2;
        solved = std::move(refined);
    }

    out.N_used = N;
    out.witness = solved.witness;
    out.ledger = solved.ledger;
    out.triplet = solved.triplet;
    out.lambda0 = -solved.triplet.lambda;
    out.pi = solved.triplet.gamma / solved.triplet.gamma.sum();
    out.h = solved.triplet.h;
    out.self = self_consistency(solved.kernel, solved.build.weights.V, solved.triplet);

    MuSet mus = default_mu_set(N, opts.seed);
    if (opts.include_geometric_mu) {
        // Non-compactly supported initial law with mu(V) finite:
        // mu(n) ~ r^n with r V(1) ratio strictly inside the V-geometric tail.
        double r = 0.9 * std::sqrt(model.b / model.d);
        Vector mu(N);
        for (Index i = 0; i < N; ++i) mu[i] = std::pow(r, static_cast<double>(i + 1));
        mu /= mu.sum();
        mus.measures.push_back(std::move(mu));
        mus.names.push_back("geometric_tail");
    }
    const double sigma_h = out.self.ledger.sigma;
    out.conditional_audit =
        mass_normalized_audit(solved.kernel, solved.triplet, mus, opts.k_max, sigma_h);
    out.weighted_audit = convergence_audit(solved.kernel, solved.build.weights,
                                           Vector(solved.triplet.h), solved.triplet,
                                           out.self.ledger, mus, opts.k_max);
    return out;
}

// ---------------------------------------------------------------------------
// Growth-fragmentation equation.

/// Fragment-size distribution: point masses plus an optional uniform block
/// [z0 - eps, z0] of weight c0 (midpoint-discretized; midpoint quadrature is
/// exact for the first moment, so the mass-conservation constraint survives
/// discretization). Moments are evaluated in closed form.
class FragmentationKernel {
public:
    struct UniformPart {
        double z0 = 0.5;
        double eps = 0.1;
        double c0 = 1.0;
    };

    static FragmentationKernel from_atoms(std::vector<std::pair<double, double>> atoms) {
        FragmentationKernel k;
        k.atoms_ = std::move(atoms);
        k.finish();
        return k;
    }

    static FragmentationKernel with_uniform(UniformPart u,
                                            std::vector<std::pair<double, double>> extra = {},
                                            int quad_pieces = 256) {
        if (!(u.eps > 0.0) || u.eps > u.z0)
            throw std::invalid_argument("FragmentationKernel: need 0 < eps <= z0");
        FragmentationKernel k;
        k.uniform_ = u;
        k.atoms_ = std::move(extra);
        const double width = u.eps / static_cast<double>(quad_pieces);
        for (int i = 0; i < quad_pieces; ++i) {
            double z = u.z0 - u.eps + (static_cast<double>(i) + 0.5) * width;
            k.quad_atoms_.emplace_back(z, u.c0 / static_cast<double>(quad_pieces));
        }
        k.finish();
        return k;
    }

    /// Exact moment of order r.
    double moment(double r) const {
        double m = 0.0;
        for (auto [z, w] : atoms_) m += w * std::pow(z, r);
        if (uniform_) {
            const auto& u = *uniform_;
            m += u.c0 * (std::pow(u.z0, r + 1.0) - std::pow(u.z0 - u.eps, r + 1.0)) /
                 (u.eps * (r + 1.0));
        }
        return m;
    }

    /// Atoms actually placed into the discrete generator.
    const std::vector<std::pair<double, double>>& quadrature_atoms() const { return all_; }

    /// Parameters (z0, eps, c0) of the lower-bound condition on the kernel.
    double z0() const { return uniform_ ? uniform_->z0 : dominant_atom_.first; }
    double eps() const { return uniform_ ? uniform_->eps : 0.0; }
    double c0() const { return uniform_ ? uniform_->c0 : dominant_atom_.second; }

private:
    void finish() {
        for (auto [z, w] : atoms_) {
            if (!(z > 0.0) || !(z < 1.0))
                throw std::invalid_argument("FragmentationKernel: atoms must lie in (0,1)");
            if (!(w > 0.0)) throw std::invalid_argument("FragmentationKernel: weights must be positive");
        }
        all_ = atoms_;
        all_.insert(all_.end(), quad_atoms_.begin(), quad_atoms_.end());
        if (all_.empty()) throw std::invalid_argument("FragmentationKernel: empty kernel");
        if (std::abs(moment(1.0) - 1.0) > 1e-12)
            throw std::invalid_argument("FragmentationKernel: first moment must equal 1");
        if (!(moment(0.0) > 1.0))
            throw std::invalid_argument("FragmentationKernel: mean fragment count must exceed 1");
        dominant_atom_ = {0.5, 0.0};
        for (auto [z, w] : atoms_)
            if (w > dominant_atom_.second) dominant_atom_ = {z, w};
    }

    std::vector<std::pair<double, double>> atoms_;
    std::vector<std::pair<double, double>> quad_atoms_;
    std::vector<std::pair<double, double>> all_;
    std::optional<UniformPart> uniform_;
    std::pair<double, double> dominant_atom_{0.5, 0.0};
};

/// Division rate B: power law beta0 x^gamma_hat or a tabulated increasing
/// function on the grid.
struct DivisionRate {
    enum class Kind { PowerLaw, Tabulated };
    Kind kind = Kind::PowerLaw;
    double beta0 = 1.0;
    double gamma_hat = 1.0;
    std::vector<double> table;  // values at the grid nodes when tabulated
    double table_dx = 0.0;

    double operator()(double x) const {
        if (kind == Kind::PowerLaw) return beta0 * std::pow(x, gamma_hat);
        if (table.empty()) throw std::logic_error("DivisionRate: empty table");
        double t = x / table_dx;
        auto hi = static_cast<std::size_t>(std::min<double>(
            std::max(0.0, std::ceil(t)), static_cast<double>(table.size() - 1)));
        auto lo = static_cast<std::size_t>(std::min<double>(
            std::max(0.0, std::floor(t)), static_cast<double>(table.size() - 1)));
        if (hi == lo) return table[lo];
        double frac = t - std::floor(t);
        return (1.0 - frac) * table[lo] + frac * table[hi];
    }
    bool unbounded() const { return kind == Kind::PowerLaw && gamma_hat > 0.0; }
};

struct GrowthFragModel {
    DivisionRate B;
    FragmentationKernel kernel = FragmentationKernel::from_atoms({{0.5, 2.0}});
    double k_weight = 2.0;  // V(x) = 1 + x^k, k > 1
    double x_max = 30.0;
    Index n_cells = 3000;
    double scheme_dt = 0.0;      // explicit-stepping/reference step; defaults to dx
    double tau_skeleton = 1.0;   // kernel step for the witness machinery
};

struct GrowthFragBuild {
    GeneratorMatrix L;
    StateSpace states;
    Vector grid;
    WeightPair weights;  // V = 1 + x^k, psi = (1+x)/2
    Vector varphi;       // 1 - sqrt(x) + x
    DriftCertificate drift;
    double dx = 0.0;
};

/// First-order upwind transport plus fragmentation with atoms placed by
/// linear interpolation onto the grid (exact for the identity, so the
/// discrete fragmentation conserves the first moment). Zero-gradient closure
/// at the right boundary keeps the generator Metzler and the psi-drift
/// nonnegative.
inline GrowthFragBuild gf_build(const GrowthFragModel& m) {
    if (!(m.k_weight > 1.0)) throw std::invalid_argument("gf_build: need k > 1");
    if (!(m.x_max > 0.0) || m.n_cells < 8) throw std::invalid_argument("gf_build: bad grid");
    const Index n = m.n_cells + 1;
    const double dx = m.x_max / static_cast<double>(m.n_cells);

    Vector grid(n);
    for (Index i = 0; i < n; ++i) grid[i] = static_cast<double>(i) * dx;

    // B must be increasing on the grid.
    double prev = m.B(grid[0]);
    for (Index i = 1; i < n; ++i) {
        double cur = m.B(grid[i]);
        if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev)))
            throw std::invalid_argument("gf_build: division rate must be increasing on the grid");
        prev = cur;
    }

    const auto& atoms = m.kernel.quadrature_atoms();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (2 + 2 * atoms.size()));
    for (Index i = 0; i < n; ++i) {
        const double x = grid[i];
        const double Bx = m.B(x);
        if (i < n - 1) {
            trip.emplace_back(i, i + 1, 1.0 / dx);
            trip.emplace_back(i, i, -1.0 / dx);
        }
        if (Bx > 0.0) {
            trip.emplace_back(i, i, -Bx);
            for (auto [z, w] : atoms) {
                double target = z * x;
                auto lo = static_cast<Index>(std::floor(target / dx));
                if (lo >= n - 1) lo = n - 2;
                double frac = target / dx - static_cast<double>(lo);
                trip.emplace_back(i, lo, Bx * w * (1.0 - frac));
                if (frac > 0.0) trip.emplace_back(i, lo + 1, Bx * w * frac);
            }
        }
    }
    SparseMatrix L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());

    Vector V(n), psi(n), varphi(n);
    for (Index i = 0; i < n; ++i) {
        V[i] = 1.0 + std::pow(grid[i], m.k_weight);
        psi[i] = 0.5 * (1.0 + grid[i]);
        varphi[i] = 1.0 - std::sqrt(grid[i]) + grid[i];
    }

    const double p0 = m.kernel.moment(0.0);
    const double ph = m.kernel.moment(0.5);
    const double pk = m.kernel.moment(m.k_weight);

    DriftCertificate drift;
    drift.tau = m.tau_skeleton;
    double limitB = m.B.unbounded() ? std::numeric_limits<double>::infinity() : m.B(m.x_max);
    double l = (pk - 1.0) * limitB;  // pk < 1, so l < 0 (possibly -inf)
    drift.a = std::max(std::isinf(l) ? -1.0 : l / 2.0, -1.0);
    drift.b = 0.0;  // 2 L psi = 1 + (p0 - 1) B >= 0
    drift.xi = 2.0 * (1.0 + (p0 - 1.0) * m.B(std::pow((p0 - 1.0) / (ph - 1.0), 2.0)));
    drift.C_equiv = 2.0;  // psi <= varphi <= 2 psi
    drift.varphi = varphi;

    // Threshold x1: the point past which the V-drift expression stays below a.
    auto drift_expr = [&](double x) {
        return ((pk - 1.0) + (p0 - 1.0) * std::pow(x, -m.k_weight)) * m.B(x) + m.k_weight / x;
    };
    Index i1 = n;  // first index from which the suffix condition holds
    for (Index i = n - 1; i >= 1; --i) {
        if (drift_expr(grid[i]) <= drift.a)
            i1 = i;
        else
            break;
    }
    if (i1 == n)
        throw std::invalid_argument("gf_build: grid too short to resolve the drift threshold x1");
    const double x1 = grid[i1];
    drift.zeta = 2.0 * (m.k_weight * std::pow(x1, m.k_weight - 1.0) + (p0 - 1.0) * m.B(x1) -
                        drift.a);

    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        std::ostringstream os;
        os << "x=" << grid[i];
        labels.push_back(os.str());
    }

    GrowthFragBuild out{GeneratorMatrix(std::move(L)),
                        StateSpace(std::move(labels)),
                        std::move(grid),
                        WeightPair(std::move(V), std::move(psi)),
                        std::move(varphi),
                        std::move(drift),
                        dx};
    return out;
}

struct SmallSetConstants {
    double t0 = 0.0, t1 = 0.0, tau = 0.0;
    int n_level = 0;
    double y_n = 0.0;
    double x0 = 0.0;
    double B_lower = 0.0;
    Vector nu;  // Lebesgue-uniform on [z0(y0+tau), z0(y0+tau)+1], discretized
    double lower_bound = 0.0;
    bool degenerate = false;
    bool verified = false;
    double empirical_min_ratio = 0.0;
    long states_checked = 0;
};

struct SmallSetOptions {
    std::optional<double> x0;       // default: smallest grid x with B(x) >= 0.1 B(x_max/2)
    std::optional<double> B_lower;  // default: B(x0)
    bool verify = true;
};

/// Regeneration constants for the fragmentation small set:
///   t0 = (1 + z0 + (1+eps) x0)/(1-z0) + 1/2,  t1 = (1-z0)/(2 z0),  tau = t0+t1,
///   y_n = ((1+z0)/(2 z0))^n + x0,
///   lower bound e^{-tau B(y_n + tau)} (c0 Bl)^{n+1} t1^n / ((1-z0) n!).
/// Optionally verifies delta_x M_tau >= bound * nu row by row on the grid.
inline SmallSetConstants gf_small_set_constants(const GrowthFragModel& m,
                                                const GrowthFragBuild& build, int n_level,
                                                const SmallSetOptions& opts = {}) {
    if (n_level < 0) throw std::invalid_argument("gf_small_set_constants: n_level >= 0");
    SmallSetConstants out;
    out.n_level = n_level;
    const double z0 = m.kernel.z0();
    const double eps = m.kernel.eps();
    const double c0 = m.kernel.c0();

    double x0 = 0.0;
    if (opts.x0) {
        x0 = *opts.x0;
    } else {
        double target = 0.1 * m.B(m.x_max / 2.0);
        x0 = build.grid[build.grid.size() - 1];
        for (Index i = 0; i < build.grid.size(); ++i) {
            if (m.B(build.grid[i]) >= target) {
                x0 = build.grid[i];
                break;
            }
        }
    }
    out.x0 = x0;
    out.B_lower = opts.B_lower.value_or(m.B(x0));

    out.t0 = (1.0 + z0 + (1.0 + eps) * x0) / (1.0 - z0) + 0.5;
    out.t1 = (1.0 - z0) / (2.0 * z0);
    out.tau = out.t0 + out.t1;
    out.y_n = std::pow((1.0 + z0) / (2.0 * z0), n_level) + x0;

    const double y0 = 1.0 + x0;
    const double A = z0 * (y0 + out.tau);
    if (A + 1.0 > m.x_max)
        throw std::invalid_argument("gf_small_set_constants: support of nu exceeds the grid");
    const Index n = build.grid.size();
    out.nu = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
        if (build.grid[i] >= A && build.grid[i] <= A + 1.0) out.nu[i] = 1.0;
    double mass = out.nu.sum();
    if (!(mass > 0.0)) throw std::invalid_argument("gf_small_set_constants: empty nu support");
    out.nu /= mass;

    if (out.B_lower <= 0.0) {
        out.degenerate = true;
        out.lower_bound = 0.0;
    } else {
        double log_lb = -out.tau * m.B(out.y_n + out.tau) +
                        (n_level + 1.0) * (std::log(c0) + std::log(out.B_lower)) -
                        std::log(1.0 - z0) + n_level * std::log(out.t1) -
                        std::lgamma(n_level + 1.0);
        out.lower_bound = std::exp(log_lb);
        out.degenerate = !(out.lower_bound > 1e-300);
    }

    if (opts.verify && !out.degenerate) {
        ExpActionKernel action(build.L, out.tau);
        double worst = std::numeric_limits<double>::infinity();
        for (Index x = 0; x < n; ++x) {
            if (build.grid[x] > out.y_n) break;
            ++out.states_checked;
            Vector row = action.row(x);
            for (Index y = 0; y < n; ++y) {
                if (out.nu[y] <= 0.0) continue;
                worst = std::min(worst, row[y] / out.nu[y]);
            }
        }
        out.empirical_min_ratio = std::isfinite(worst) ? worst : 0.0;
        out.verified = out.empirical_min_ratio >= out.lower_bound * (1.0 - 1e-9);
    }
    return out;
}

struct MonotonicityReport {
    double t_violation = 0.0;  // relative to the sup of the running iterate
    double x_violation = 0.0;
    long steps = 0;
    bool pass = false;
};

/// Skeleton iterates of psi must be nondecreasing in time and in the size
/// variable, up to scheme tolerance.
template <class Kernel>
MonotonicityReport gf_monotonicity(const Kernel& M, const Vector& psi, long k_max,
                                   double tol = 1e-8) {
    MonotonicityReport rep;
    Vector v = psi;
    for (long k = 0; k < k_max; ++k) {
        Vector w = M.apply(v);
        double scale = w.cwiseAbs().maxCoeff();
        rep.t_violation = std::max(rep.t_violation, (v - w).maxCoeff() / scale);
        for (Index i = 0; i + 1 < w.size(); ++i)
            rep.x_violation = std::max(rep.x_violation, (w[i] - w[i + 1]) / scale);
        v = w / scale;
        ++rep.steps;
    }
    rep.pass = rep.t_violation <= tol && rep.x_violation <= tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Duhamel reference for the growth-fragmentation semigroup (small grids).

struct DuhamelOptions {
    double T = 1.0;
    double x_limit = 8.0;
    Index n_x = 400;
    long n_t = 50;
    long max_inner = 60;
    double tol = 1e-13;
};

/// Evaluates M_T f on [0, x_limit - T] by Picard iteration on the mild
/// (integral) formulation, time level by time level. Independent of the
/// generator discretization, so the two routes cross-validate each other.
inline Vector gf_duhamel_apply(const GrowthFragModel& m,
                               const std::function<double(double)>& f,
                               const DuhamelOptions& opts) {
    const Index J = opts.n_x;
    const double dxd = opts.x_limit / static_cast<double>(J);
    const long I = opts.n_t;
    const double dt = opts.T / static_cast<double>(I);
    const auto& atoms = m.kernel.quadrature_atoms();

    auto cumB = [&](double x) {
        if (m.B.kind == DivisionRate::Kind::PowerLaw)
            return m.B.beta0 * std::pow(x, m.B.gamma_hat + 1.0) / (m.B.gamma_hat + 1.0);
        // trapezoid on the fly for tabulated rates
        const long steps = 64;
        double h = x / static_cast<double>(steps);
        double s = 0.5 * (m.B(0.0) + m.B(x));
        for (long i = 1; i < steps; ++i) s += m.B(static_cast<double>(i) * h);
        return s * h;
    };

    std::vector<Vector> g(static_cast<std::size_t>(I) + 1, Vector::Zero(J + 1));
    for (Index j = 0; j <= J; ++j) g[0][j] = f(static_cast<double>(j) * dxd);

    auto interp = [&](const Vector& level, double x) {
        double t = x / dxd;
        Index lo = static_cast<Index>(std::floor(t));
        if (lo < 0) lo = 0;
        if (lo >= J) return level[J];
        double frac = t - static_cast<double>(lo);
        return (1.0 - frac) * level[lo] + frac * level[lo + 1];
    };

    for (long i = 1; i <= I; ++i) {
        const double t = static_cast<double>(i) * dt;
        Vector cur = g[static_cast<std::size_t>(i - 1)];  // warm start
        for (long sweep = 0; sweep < opts.max_inner; ++sweep) {
            Vector next = Vector::Zero(J + 1);
            double change = 0.0;
            for (Index j = 0; j <= J; ++j) {
                const double x = static_cast<double>(j) * dxd;
                if (x + t > opts.x_limit + 1e-12) {
                    next[j] = cur[j];
                    continue;
                }
                double val = f(x + t) * std::exp(-(cumB(x + t) - cumB(x)));
                // trapezoid in s over the time grid; s = t refers to level 0,
                // s = 0 couples back to the current level through the kernel.
                for (long l = 0; l <= i; ++l) {
                    const double s = static_cast<double>(l) * dt;
                    double weight = (l == 0 || l == i) ? 0.5 * dt : dt;
                    double damp = std::exp(-(cumB(x + s) - cumB(x)));
                    double Bxs = m.B(x + s);
                    if (Bxs <= 0.0) continue;
                    const Vector& ref =
                        (l == 0) ? cur : g[static_cast<std::size_t>(i - l)];
                    double frag = 0.0;
                    for (auto [z, w] : atoms) frag += w * interp(ref, z * (x + s));
                    val += weight * damp * Bxs * frag;
                }
                next[j] = val;
                change = std::max(change, std::abs(val - cur[j]));
            }
            cur = std::move(next);
            if (change < opts.tol) break;
        }
        g[static_cast<std::size_t>(i)] = std::move(cur);
    }

    const Index out_n = static_cast<Index>(std::floor((opts.x_limit - opts.T) / dxd)) + 1;
    return g[static_cast<std::size_t>(I)].head(out_n);
}

// ---------------------------------------------------------------------------
// End-to-end growth-fragmentation analysis.

struct GfOptions {
    double eigen_tol = 1e-12;
    long k_max = 30;
    long a4_horizon = 400;
    std::uint64_t seed = 0;
    bool check_doubling = true;
    int smallset_n_level = 1;
    bool verify_smallset = true;
    double doubling_tol = 1e-10;  // eigensolver tolerance on the doubled grid
};

struct GrowthFragAnalysis {
    GrowthFragBuild build;
    Witness witness;
    ConstantsLedger ledger;
    EigenTriplet triplet;
    SelfConsistencyResult self;
    AuditTable weighted_audit;
    MonotonicityReport monotonicity;
    SmallSetConstants smallset;
    double lambda_doubled = 0.0;
    double lambda_rel_change = 0.0;

    GrowthFragAnalysis(GrowthFragBuild b) : build(std::move(b)) {}
};

inline GrowthFragAnalysis gf_analyze(const GrowthFragModel& model, const GfOptions& opts = {}) {
    GrowthFragAnalysis out(gf_build(model));
    KernelOperator kernel = matrix_exp(out.build.L, model.tau_skeleton);

    SearchOptions sopts;
    sopts.a4_horizon = opts.a4_horizon;
    WitnessSearchResult search =
        full_witness_search(kernel, out.build.weights.V, out.build.weights.psi, sopts);
    if (!search.witness)
        throw ModelRejected("growth-frag: witness search failed: " + search.diagnosis);
    out.witness = *search.witness;
    out.ledger = build_ledger(out.witness);

    SolveOptions eopts = SolveOptions::from_ledger(out.ledger, opts.eigen_tol);
    out.triplet = solve_triplet(kernel, out.build.weights, out.witness.nu, eopts);
    out.self = self_consistency(kernel, out.build.weights.V, out.triplet);

    MuSet mus = default_mu_set(kernel.n(), opts.seed);
    out.weighted_audit = convergence_audit(kernel, out.build.weights, Vector(out.triplet.h),
                                           out.triplet, out.self.ledger, mus, opts.k_max);
    out.monotonicity = gf_monotonicity(kernel, out.build.weights.psi, 40);
    out.smallset = gf_small_set_constants(model, out.build, opts.smallset_n_level,
                                          SmallSetOptions{{}, {}, opts.verify_smallset});

    if (opts.check_doubling) {
        GrowthFragModel doubled = model;
        doubled.n_cells = 2 * model.n_cells;
        GrowthFragBuild b2 = gf_build(doubled);
        ExpActionKernel action(b2.L, std::min(model.tau_skeleton, 1.0));
        Vector nu2 = Vector::Constant(b2.grid.size(), 1.0 / static_cast<double>(b2.grid.size()));
        IterationTrace h2 = compute_h(action, b2.weights, nu2, opts.doubling_tol, 100000);
        out.lambda_doubled = compute_lambda(action, b2.weights.psi, nu2, h2.value);
        out.lambda_rel_change = std::abs(out.lambda_doubled - out.triplet.lambda) /
                                std::max(std::abs(out.triplet.lambda), 1e-8);
    }
    return out;
}

}  // namespace specgap

#endif  // SPECGAP_MODELS_HPP
