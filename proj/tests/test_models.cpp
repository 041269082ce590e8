#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace specgap;

TEST(BirthDeath, ClosedFormDriftConstants) {
    BirthDeathModel m;  // b=1, d=4, b1=d1=1
    m.N = 50;
    EXPECT_DOUBLE_EQ(m.Delta(), 1.0);
    EXPECT_DOUBLE_EQ(m.eta(), 1.5);
    auto build = bd_build(m);
    EXPECT_TRUE(build.witness_mode_ok);
    EXPECT_DOUBLE_EQ(build.drift.a, -1.0);
    EXPECT_NEAR(build.drift.zeta, 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(build.drift.b, -5.0 / 6.0, 1e-15);
    EXPECT_NEAR(build.drift.xi, -0.5, 1e-15);
    EXPECT_DOUBLE_EQ(build.weights.V[0], 2.0);
    EXPECT_DOUBLE_EQ(build.weights.psi[0], 1.5);
}

TEST(BirthDeath, EtaDriftIdentity) {
    // b1(eta - 1) - d1 == a + Delta/2 whenever eta is defined.
    std::mt19937_64 rng(139);
    std::uniform_real_distribution<double> unif(0.5, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        BirthDeathModel m;
        m.b = unif(rng);
        m.d = m.b + unif(rng);  // keep d > b
        m.b1 = unif(rng);
        m.d1 = 0.1 * unif(rng);
        double lhs = m.b1 * (m.eta() - 1.0) - m.d1;
        double a = -std::pow(std::sqrt(m.d) - std::sqrt(m.b), 2);
        EXPECT_NEAR(lhs, a + m.Delta() / 2.0, 1e-12);
    }
}

TEST(BirthDeath, GeneratorStructure) {
    BirthDeathModel m;
    m.N = 6;
    auto build = bd_build(m);
    Matrix L = build.L.to_dense();
    // Absorption leak at the first state, conservative interior rows, and a
    // birth-suppressed cap.
    EXPECT_DOUBLE_EQ(L.row(0).sum(), -m.d1);
    for (Index i = 1; i < 5; ++i) EXPECT_NEAR(L.row(i).sum(), 0.0, 1e-15);
    EXPECT_NEAR(L.row(5).sum(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(L(5, 5), -m.d);
    EXPECT_DOUBLE_EQ(L(0, 1), m.b1);
    EXPECT_DOUBLE_EQ(L(2, 1), m.d);
    EXPECT_DOUBLE_EQ(L(2, 3), m.b);
}

TEST(BirthDeath, ConditionHBoundary) {
    BirthDeathModel equal;
    equal.b = equal.d = 2.0;
    EXPECT_LE(equal.Delta(), -equal.d1);
    EXPECT_THROW(bd_qsd(equal), ModelRejected);

    BirthDeathModel narrow;
    narrow.b = 1.0;
    narrow.d = 2.0;
    EXPECT_NEAR(narrow.Delta(), 1.0 - std::sqrt(2.0), 1e-12);
    EXPECT_THROW(bd_qsd(narrow), ModelRejected);

    // Rejected for witness mode but still buildable for exploration.
    narrow.N = 10;
    auto build = bd_build(narrow);
    EXPECT_FALSE(build.witness_mode_ok);
    EXPECT_FALSE(build.warning.empty());
}

TEST(BirthDeath, QsdOnModerateTruncation) {
    BirthDeathModel m;
    m.N = 60;
    QsdOptions opts;
    opts.k_max = 40;
    QsdResult res = bd_qsd(m, opts);
    EXPECT_TRUE(res.truncation_converged);
    EXPECT_LE(res.tail_tv, opts.tail_tol);
    EXPECT_GT(res.lambda0, 0.0);
    EXPECT_NEAR(res.pi.sum(), 1.0, 1e-12);
    EXPECT_TRUE(res.conditional_audit.pass);
    EXPECT_TRUE(res.weighted_audit.pass);
    EXPECT_TRUE(res.self.pass);
    EXPECT_GT(res.conditional_audit.fitted_rate, 0.0);
    // Bracket from the ledger contains the computed rate.
    EXPECT_GE(res.triplet.lambda, res.ledger.lambda_lo - 1e-10);
    EXPECT_LE(res.triplet.lambda, res.ledger.lambda_hi + 1e-10);
}

TEST(BirthDeath, RateScalingCovariance) {
    BirthDeathModel base;
    base.N = 60;
    QsdOptions opts;
    opts.k_max = 10;
    QsdResult r1 = bd_qsd(base, opts);

    BirthDeathModel scaled = base;
    const double s = 2.0;
    scaled.b *= s;
    scaled.d *= s;
    scaled.b1 *= s;
    scaled.d1 *= s;
    QsdResult r2 = bd_qsd(scaled, opts);

    EXPECT_NEAR(r2.lambda0, s * r1.lambda0, 1e-9 * std::abs(s * r1.lambda0));
    Index n = std::min(r1.pi.size(), r2.pi.size());
    EXPECT_LE((r1.pi.head(n) - r2.pi.head(n)).cwiseAbs().sum(), 1e-9);
}

TEST(GrowthFrag, MitosisDriftConstantsClosedForm) {
    GrowthFragModel m;  // B(x) = x, mitosis kernel, k = 2, grid [0,30]
    m.n_cells = 300;
    auto build = gf_build(m);
    EXPECT_DOUBLE_EQ(build.drift.b, 0.0);
    EXPECT_DOUBLE_EQ(build.drift.a, -1.0);
    EXPECT_NEAR(build.drift.xi, 8.0 + 4.0 * std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(build.drift.C_equiv, 2.0);
    // psi <= varphi <= 2 psi on the grid.
    for (Index i = 0; i < build.grid.size(); ++i) {
        EXPECT_LE(build.weights.psi[i], build.varphi[i] + 1e-15);
        EXPECT_LE(build.varphi[i], 2.0 * build.weights.psi[i] + 1e-15);
    }
}

TEST(GrowthFrag, ConstantDivisionRate) {
    GrowthFragModel m;
    m.B.kind = DivisionRate::Kind::PowerLaw;
    m.B.beta0 = 3.0;
    m.B.gamma_hat = 0.0;  // constant rate
    m.n_cells = 200;
    m.x_max = 10.0;
    auto build = gf_build(m);
    double pk = m.kernel.moment(m.k_weight);
    double l = (pk - 1.0) * 3.0;
    EXPECT_DOUBLE_EQ(build.drift.a, std::max(l / 2.0, -1.0));
}

TEST(GrowthFrag, RejectsBadKernels) {
    EXPECT_THROW(FragmentationKernel::from_atoms({{0.5, 1.0}}), std::invalid_argument);
    EXPECT_THROW(FragmentationKernel::from_atoms({{1.5, 1.0}}), std::invalid_argument);
    // Conservative-in-number kernel (p0 = 1) is out of scope here.
    EXPECT_THROW(FragmentationKernel::from_atoms({{1.0 - 1e-12, 1.0}}), std::invalid_argument);
}

TEST(GrowthFrag, UniformKernelMomentsAreExact) {
    FragmentationKernel::UniformPart u{0.6, 0.2, 1.0};
    // Add an atom balancing the first moment to 1: uniform part mass c0=1 with
    // mean 0.5, so the atom at z=0.5 needs weight (1 - 0.5)/0.5 = 1.
    auto k = FragmentationKernel::with_uniform(u, {{0.5, 1.0}});
    EXPECT_NEAR(k.moment(1.0), 1.0, 1e-15);
    EXPECT_NEAR(k.moment(0.0), 2.0, 1e-15);
    // Midpoint quadrature reproduces the first moment of the uniform block.
    double quad_first = 0.0;
    for (auto [z, w] : k.quadrature_atoms()) quad_first += z * w;
    EXPECT_NEAR(quad_first, 1.0, 1e-13);
    EXPECT_DOUBLE_EQ(k.z0(), 0.6);
    EXPECT_DOUBLE_EQ(k.eps(), 0.2);
}

TEST(GrowthFrag, FragmentationConservesFirstMomentForConstantB) {
    GrowthFragModel m;
    m.B.gamma_hat = 0.0;
    m.B.beta0 = 2.0;
    m.n_cells = 150;
    m.x_max = 12.0;
    auto build = gf_build(m);
    // Duality check with f(x) = x: fragmentation contributes exactly zero
    // because linear interpolation is exact on linear functions, so
    // (L f)(x) = upwind f' = 1 in the interior, 0 at the cap.
    Vector f = build.grid;
    Vector Lf = build.L.entries() * f;
    for (Index i = 0; i + 1 < f.size(); ++i) EXPECT_NEAR(Lf[i], 1.0, 1e-10);
    EXPECT_NEAR(Lf[f.size() - 1], 0.0, 1e-10);
}

TEST(GrowthFrag, SkeletonMonotoneInTimeAndSize) {
    GrowthFragModel m;
    m.n_cells = 600;
    auto build = gf_build(m);
    KernelOperator M = matrix_exp(build.L, 1.0);
    auto rep = gf_monotonicity(M, build.weights.psi, 25);
    EXPECT_TRUE(rep.pass) << "t=" << rep.t_violation << " x=" << rep.x_violation;
}

TEST(GrowthFrag, SmallSetClosedFormsAndDegenerateLimit) {
    GrowthFragModel m;
    m.n_cells = 400;
    auto build = gf_build(m);
    // x0 = 0 forces B_lower = B(0) = 0: the degenerate limit.
    SmallSetOptions opts;
    opts.x0 = 0.0;
    opts.verify = false;
    auto s = gf_small_set_constants(m, build, 2, opts);
    EXPECT_DOUBLE_EQ(s.t0, 3.5);
    EXPECT_DOUBLE_EQ(s.t1, 0.5);
    EXPECT_DOUBLE_EQ(s.tau, 4.0);
    EXPECT_DOUBLE_EQ(s.y_n, std::pow(1.5, 2));
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.lower_bound, 0.0);
}

TEST(GrowthFrag, SmallSetVerifiesOnFineGrid) {
    GrowthFragModel m;
    m.n_cells = 600;
    auto build = gf_build(m);
    auto s = gf_small_set_constants(m, build, 0, SmallSetOptions{});
    EXPECT_FALSE(s.degenerate);
    EXPECT_GT(s.states_checked, 0);
    EXPECT_TRUE(s.verified) << "empirical=" << s.empirical_min_ratio
                            << " bound=" << s.lower_bound;
}

TEST(GrowthFrag, DuhamelReferenceMatchesGeneratorRoute) {
    GrowthFragModel m;
    m.x_max = 8.0;
    m.n_cells = 320;  // dx = 0.025 on [0, 8]
    auto build = gf_build(m);
    KernelOperator M = matrix_exp(build.L, 1.0);
    Vector gen_route = M.apply(build.weights.psi);

    DuhamelOptions dopts;
    dopts.T = 1.0;
    dopts.x_limit = 8.0;
    dopts.n_x = 320;
    dopts.n_t = 64;
    Vector duhamel = gf_duhamel_apply(
        m, [](double x) { return 0.5 * (1.0 + x); }, dopts);

    // Compare well inside the untruncated region.
    double worst = 0.0;
    for (Index i = 0; i < duhamel.size(); ++i) {
        double x = build.grid[i];
        if (x > 3.0) break;
        worst = std::max(worst, std::abs(duhamel[i] - gen_route[i]) / gen_route[i]);
    }
    EXPECT_LT(worst, 2e-2);
}

TEST(GrowthFrag, EndToEndAnalysisOnCoarseGrid) {
    GrowthFragModel m;
    m.n_cells = 400;
    GfOptions opts;
    opts.k_max = 20;
    opts.smallset_n_level = 0;
    GrowthFragAnalysis res = gf_analyze(m, opts);
    EXPECT_TRUE(res.weighted_audit.pass);
    EXPECT_TRUE(res.monotonicity.pass);
    EXPECT_TRUE(res.self.pass);
    EXPECT_GT(res.triplet.lambda, 0.0);  // supercritical growth
    EXPECT_GE(res.triplet.lambda, res.ledger.lambda_lo - 1e-10);
    EXPECT_LE(res.triplet.lambda, res.ledger.lambda_hi + 1e-10);
    EXPECT_LT(res.lambda_rel_change, 1e-2);  // coarse grid: loose doubling check

    // Oracle cross-check on this moderate grid.
    KernelOperator M = matrix_exp(res.build.L, m.tau_skeleton);
    OracleEigen oracle = oracle_eigen(M);
    ASSERT_TRUE(oracle.ok);
    EXPECT_NEAR(std::log(oracle.rho_step), res.triplet.lambda,
                1e-8 * std::max(1.0, std::abs(res.triplet.lambda)));
}

TEST(GrowthFrag, EvolutionFromGammaStaysPut) {
    GrowthFragModel m;
    m.n_cells = 300;
    m.x_max = 20.0;
    GfOptions opts;
    opts.k_max = 10;
    opts.check_doubling = false;
    opts.verify_smallset = false;
    GrowthFragAnalysis res = gf_analyze(m, opts);
    KernelOperator M = matrix_exp(res.build.L, m.tau_skeleton);
    MuSet mus;
    mus.measures.push_back(res.triplet.gamma);
    mus.names.push_back("gamma");
    AuditTable a = convergence_audit(M, res.build.weights, Vector(res.triplet.h), res.triplet,
                                     res.self.ledger, mus, 10);
    for (const auto& row : a.rows) EXPECT_LE(row.err, 1e-9);
}
