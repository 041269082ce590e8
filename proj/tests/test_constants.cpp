#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace specgap;
using sgtest::vec2;

namespace {

Witness worked_witness() {
    Witness w;
    w.tau = 1.0;
    w.alpha = 0.5;
    w.beta = 1.0;
    w.theta = 1.0;
    w.c = 0.5;
    w.d = 1.0;
    w.R_sup = 2.0;
    w.K = {true, true};
    w.nu = vec2(0.5, 0.5);
    w.a4_certificate.status = A4Status::Converged;
    return w;
}

}  // namespace

TEST(Ledger, WorkedClosedFormExample) {
    ConstantsLedger L = build_ledger(worked_witness());

    // Independent hand evaluation, bit for bit.
    EXPECT_EQ(L.Theta, 1.0 / (1.0 - 0.5));
    EXPECT_EQ(L.Theta, 2.0);
    EXPECT_EQ(L.Xi, 0.5 * (2.0 + 2.0) + 1.0);
    EXPECT_EQ(L.Xi, 3.0);
    EXPECT_EQ(L.frak_a, 0.5);
    EXPECT_EQ(L.frak_c, 1.0 / (0.5 * (1.0 - 0.5)));
    EXPECT_EQ(L.frak_c, 4.0);
    EXPECT_EQ(L.r, (1.0 / 3.0) * (1.0 / 3.0));
    EXPECT_EQ(L.d2, (1.0 - 0.5) * 1.0 / (0.5 + 1.0));
    EXPECT_EQ(L.d2, 0.5 / 1.5);
    EXPECT_EQ(L.frak_R, 4.0 * 4.0 / (1.0 - 0.5));
    EXPECT_EQ(L.frak_R, 32.0);
    EXPECT_EQ(L.frak_p,
              static_cast<long>(std::floor(std::log(2.0 * 32.0 * 1.5 / (0.5 * 1.0)) /
                                           std::log(1.0 / 0.5))) +
                  1);
    EXPECT_EQ(L.frak_p, 8);
    EXPECT_EQ(L.d1, 0.5);
    EXPECT_EQ(L.q, std::log(0.5 * (1.0 / 9.0)) / std::log(0.5));
    EXPECT_EQ(L.lambda_lo, 0.0);
    EXPECT_EQ(L.lambda_hi, std::log(1.5));
    EXPECT_EQ(L.ell, L.frak_p);
}

TEST(Ledger, ChargeStepAndC1) {
    ConstantsLedger L = build_ledger(worked_witness());
    // p = floor(log(2 (1+theta/alpha)(Theta+R)) / log(1/a)) + 1 = floor(log2 24)+1.
    EXPECT_EQ(L.p, static_cast<long>(std::floor(std::log(24.0) / std::log(2.0))) + 1);
    EXPECT_EQ(L.p, 5);
    // c_4 = c^4 (beta/Xi)^3, C1 = 2 Xi^6 / (c c_4 beta^6).
    double c4 = std::pow(0.5, 4) * std::pow(1.0 / 3.0, 3);
    EXPECT_NEAR(L.c_seq[4], c4, 1e-18);
    EXPECT_NEAR(L.C1, 2.0 * std::pow(3.0, 6) / (0.5 * c4), 1e-6);
}

TEST(Ledger, SequenceIsGeometricAndDecreasing) {
    ConstantsLedger L = build_ledger(worked_witness());
    ASSERT_GE(L.c_seq.size(), 10u);
    EXPECT_EQ(L.c_seq[0], 1.0);
    const double ratio = L.c / 1.0 * L.beta / L.Xi;  // c * beta / Xi
    EXPECT_LT(ratio, 1.0);
    for (std::size_t k = 1; k + 1 < 10; ++k) {
        EXPECT_LT(L.c_seq[k + 1], L.c_seq[k]);
        EXPECT_NEAR(L.c_seq[k + 1] / L.c_seq[k], ratio, 1e-12);
    }
}

TEST(Ledger, RateCertificateExtractsFields) {
    ConstantsLedger L = build_ledger(worked_witness());
    RateCertificate rc = rate_certificate(L);
    EXPECT_EQ(rc.sigma, L.sigma);
    EXPECT_EQ(rc.rho, L.rho);
    EXPECT_EQ(rc.lambda_lo, L.lambda_lo);
    EXPECT_EQ(rc.lambda_hi, L.lambda_hi);
    EXPECT_GT(rc.sigma, 0.0);
    EXPECT_NEAR(rc.sigma, -L.proof.log_rho / (8.0 * 1.0), 1e-18);
}

TEST(Ledger, BracketCollapsesForNearExactEigenvector) {
    // beta = alpha + theta makes both bracket ends coincide at log beta.
    Witness w = worked_witness();
    w.alpha = 1.9;
    w.beta = 2.0;
    w.theta = 0.1;
    w.c = 0.9;
    w.R_sup = 1.0;
    ConstantsLedger L = build_ledger(w);
    EXPECT_DOUBLE_EQ(L.lambda_lo, std::log(2.0));
    EXPECT_DOUBLE_EQ(L.lambda_hi, std::log(2.0));
}

TEST(Ledger, IncreasingThetaNeverImprovesSigma) {
    double prev_sigma = std::numeric_limits<double>::infinity();
    for (double theta : {1.0, 1.5, 2.0, 4.0}) {
        Witness w = worked_witness();
        w.theta = theta;
        ConstantsLedger L = build_ledger(w);
        EXPECT_LE(L.sigma, prev_sigma + 1e-18);
        prev_sigma = L.sigma;
    }
}

TEST(Ledger, RejectsInvalidWitnessesAndChoices) {
    Witness w = worked_witness();
    w.beta = 0.4;  // beta <= alpha
    EXPECT_THROW(build_ledger(w), std::invalid_argument);

    w = worked_witness();
    LedgerChoices ch;
    ch.frak_R = 1.0;  // below 2 frak_c / (1 - frak_a) = 16
    EXPECT_THROW(build_ledger(w, ch), std::invalid_argument);

    ch = LedgerChoices{};
    ch.frak_bprime = 1.0;  // not inside (0, frak_b)
    EXPECT_THROW(build_ledger(w, ch), std::invalid_argument);
}

TEST(Ledger, FlooredThetaWithRealGapIsInconsistent) {
    // theta at the floor with a genuine gap beta - alpha would imply
    // beta > alpha + theta, which no eigenvalue can satisfy. The bracket
    // invariant must flag such witnesses as misconfigured.
    Witness w = worked_witness();
    w.theta = kThetaFloor;
    w.theta_floored = true;
    EXPECT_THROW(build_ledger(w), std::domain_error);
}

TEST(Ledger, MinorizationConstantFormsAgree) {
    // The lemma's display and the proof's display are the same number.
    Witness w = worked_witness();
    ConstantsLedger L = build_ledger(w);
    double S = L.proof.S_p;
    double lemma_form = w.d * w.d * w.beta /
                        (2.0 * L.frak_c * L.frak_c * (w.alpha / w.theta + 1.0) *
                         (w.alpha * L.R_sup + w.theta)) /
                        S;
    double proof_form = w.c * w.c * w.beta * std::pow(w.beta - w.alpha, 2) * w.d * w.d /
                        (2.0 * w.theta * (w.alpha + w.theta) * (w.alpha * L.R_sup + w.theta)) /
                        S;
    EXPECT_NEAR(L.frak_b, lemma_form, 1e-15);
    EXPECT_NEAR(L.frak_b, proof_form, 1e-15);
}

TEST(Ledger, EigenvalueBracketHoldsOnFixture) {
    KernelOperator M = sgtest::fixture_2x2();
    auto res = full_witness_search(M, vec2(1.0, 2.0), vec2(1.0, 1.0));
    ASSERT_TRUE(res.witness.has_value());
    ConstantsLedger L = build_ledger(*res.witness);
    double lambda_star = std::log(2.0);  // dominant eigenvalue of the fixture
    EXPECT_GE(lambda_star, L.lambda_lo - 1e-10);
    EXPECT_LE(lambda_star, L.lambda_hi + 1e-10);
}

TEST(Ledger, TuningNeverWorsensSigma) {
    Witness w = worked_witness();
    ConstantsLedger base = build_ledger(w);
    ConstantsLedger tuned = tune_ledger(w);
    EXPECT_GE(tuned.sigma, base.sigma);
}
