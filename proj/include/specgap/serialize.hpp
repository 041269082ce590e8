#ifndef SPECGAP_SERIALIZE_HPP
#define SPECGAP_SERIALIZE_HPP

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specgap/eigensolver.hpp"
#include "specgap/io.hpp"
#include "specgap/models.hpp"
#include "specgap/propagator.hpp"

// JSON/CSV views of the artifact outputs. JSON for structured records, CSV
// for per-step series.

namespace specgap {

inline json to_json(const ConditionReport& r) {
    return json{{"pass", r.pass}, {"slack", r.slack}, {"detail", r.detail}};
}

inline json to_json(const Witness& w) {
    std::vector<Index> K_indices;
    for (Index i = 0; i < static_cast<Index>(w.K.size()); ++i)
        if (w.K[static_cast<std::size_t>(i)]) K_indices.push_back(i);
    json a4 = to_json(w.a4);
    a4["status"] = to_string(w.a4_certificate.status);
    a4["n_used"] = w.a4_certificate.n_used;
    a4["limit_estimate"] = w.a4_certificate.limit_estimate;
    return json{
        {"tau", w.tau},
        {"alpha", w.alpha},
        {"beta", w.beta},
        {"theta", w.theta},
        {"c", w.c},
        {"d", w.d},
        {"R_sup", w.R_sup},
        {"K", K_indices},
        {"nu", std::vector<double>(w.nu.data(), w.nu.data() + w.nu.size())},
        {"theta_floored", w.theta_floored},
        {"conditions",
         json{{"A1", to_json(w.a1)}, {"A2", to_json(w.a2)}, {"A3", to_json(w.a3)}, {"A4", a4}}},
        {"residual_assumption",
         "mass-ratio condition certified on a finite horizon with a stabilization "
         "certificate; the all-horizons statement remains assumed"},
    };
}

inline json to_json(const ConstantsLedger& L) {
    return json{
        {"tau", L.tau},
        {"alpha", L.alpha},
        {"beta", L.beta},
        {"theta", L.theta},
        {"c", L.c},
        {"d", L.d},
        {"Theta", L.Theta},
        {"R_sup", L.R_sup},
        {"Xi", L.Xi},
        {"frak_a", L.frak_a},
        {"frak_c", L.frak_c},
        {"r", L.r},
        {"q", L.q},
        {"c_seq", L.c_seq},
        {"d1", L.d1},
        {"d2", L.d2},
        {"frak_R", L.frak_R},
        {"frak_bprime", L.frak_bprime},
        {"frak_aprime", L.frak_aprime},
        {"frak_p", L.frak_p},
        {"frak_b", L.frak_b},
        {"ell", L.ell},
        {"kappa", L.kappa},
        {"frak_y", L.frak_y},
        {"rho", L.rho},
        {"sigma", L.sigma},
        {"p", L.p},
        {"C1", L.C1},
        {"C2", L.C2},
        {"c1_lower", L.c1_lower},
        {"lambda_lo", L.lambda_lo},
        {"lambda_hi", L.lambda_hi},
        {"floored_theta", L.floored_theta},
        {"proof_constants",
         json{{"C2_prime", L.proof.C2_prime},
              {"C3", L.proof.C3},
              {"S_p", L.proof.S_p},
              {"log_frak_b", L.proof.log_frak_b},
              {"log_C1", L.proof.log_C1},
              {"log_c1", L.proof.log_c1}}},
    };
}

inline std::string ledger_table(const ConstantsLedger& L) {
    std::ostringstream os;
    os.precision(12);
    auto row = [&](const char* name, double v) { os << "  " << name << " = " << v << "\n"; };
    os << "constants ledger (tau = " << L.tau << ")\n";
    os << " witness\n";
    row("alpha", L.alpha);
    row("beta", L.beta);
    row("theta", L.theta);
    row("c", L.c);
    row("d", L.d);
    os << " derived\n";
    row("Theta", L.Theta);
    row("R_sup", L.R_sup);
    row("Xi", L.Xi);
    row("frak_a", L.frak_a);
    row("frak_c", L.frak_c);
    row("r", L.r);
    row("q", L.q);
    row("d1", L.d1);
    row("d2", L.d2);
    os << " coupling\n";
    row("frak_R", L.frak_R);
    row("frak_p", static_cast<double>(L.frak_p));
    row("frak_b", L.frak_b);
    row("frak_bprime", L.frak_bprime);
    row("frak_aprime", L.frak_aprime);
    row("kappa", L.kappa);
    row("frak_y", L.frak_y);
    os << " rate certificate\n";
    row("rho", L.rho);
    row("sigma", L.sigma);
    row("lambda_lo", L.lambda_lo);
    row("lambda_hi", L.lambda_hi);
    os << " h bounds\n";
    row("p", static_cast<double>(L.p));
    row("C1", L.C1);
    row("C2", L.C2);
    row("c1_lower", L.c1_lower);
    return os.str();
}

inline json to_json(const EigenTriplet& t) {
    return json{
        {"lambda", t.lambda},
        {"step_factor", t.step_factor},
        {"tau", t.tau},
        {"h", std::vector<double>(t.h.data(), t.h.data() + t.h.size())},
        {"gamma", std::vector<double>(t.gamma.data(), t.gamma.data() + t.gamma.size())},
        {"normalization",
         json{{"gamma_h", 1.0}, {"h_sup_V", 1.0}, {"nu_scale", t.nu_scale}}},
        {"residuals", json{{"right", t.residual_right}, {"left", t.residual_left}}},
        {"iterations", json{{"h", t.h_iterations}, {"gamma", t.gamma_iterations}}},
        {"converged", t.converged},
        {"last_increment", t.last_increment},
    };
}

inline json to_json(const AuditTable& a) {
    json rows = json::array();
    for (const auto& r : a.rows)
        rows.push_back(json{{"k", r.k}, {"err", r.err}, {"bound", r.bound}, {"pass", r.pass}});
    return json{{"rows", rows},
                {"fitted_rate", a.fitted_rate},
                {"sigma_used", a.sigma_used},
                {"bound_constant", a.bound_constant},
                {"p_steps", a.p_steps},
                {"rate_pass", a.rate_pass},
                {"bound_pass", a.bound_pass},
                {"pass", a.pass},
                {"note", a.note}};
}

inline std::string audit_to_csv(const AuditTable& a) {
    std::ostringstream os;
    os.precision(17);
    os << "k,err,bound,pass\n";
    for (const auto& r : a.rows)
        os << r.k << "," << r.err << "," << r.bound << "," << (r.pass ? 1 : 0) << "\n";
    return os.str();
}

inline json to_json(const HarrisReport& r) {
    return json{{"pass", r.pass},
                {"constants",
                 json{{"kappa", r.kappa},
                      {"frak_y", r.frak_y},
                      {"drift_slack", r.drift_slack},
                      {"minorization_slack", r.minorization_slack}}},
                {"worst_case", json{{"x", r.worst_x}, {"y", r.worst_y}, {"ratio", r.worst_ratio}}}};
}

inline json to_json(const DriftCheckReport& r) {
    return json{{"pass", r.pass},
                {"constants", json{{"frak_a", r.frak_a}, {"frak_c", r.frak_c}}},
                {"lhs_max_violation", r.lhs_max_violation}};
}

inline json to_json(const MinorizationReport& r) {
    return json{{"pass", r.pass},
                {"witness_valid", r.witness_valid},
                {"constants",
                 json{{"frak_p", r.frak_p},
                      {"frak_b", r.frak_b},
                      {"ell", r.ell},
                      {"sublevel_size", r.sublevel_size}}},
                {"empirical_b", r.empirical_b},
                {"nu_construction", r.nu_construction}};
}

inline json to_json(const SmallSetConstants& s) {
    return json{{"t0", s.t0},
                {"t1", s.t1},
                {"tau", s.tau},
                {"n_level", s.n_level},
                {"y_n", s.y_n},
                {"x0", s.x0},
                {"B_lower", s.B_lower},
                {"lower_bound", s.lower_bound},
                {"degenerate", s.degenerate},
                {"verified", s.verified},
                {"empirical_min_ratio", s.empirical_min_ratio},
                {"states_checked", s.states_checked},
                {"nu_support",
                 [&] {
                     std::vector<Index> idx;
                     for (Index i = 0; i < s.nu.size(); ++i)
                         if (s.nu[i] > 0.0) idx.push_back(i);
                     return idx;
                 }()}};
}

inline json to_json(const SelfConsistencyResult& s) {
    return json{{"pass", s.pass},
                {"beta_error", s.beta_error},
                {"d_error", s.d_error},
                {"sup_ratio_error", s.sup_ratio_error},
                {"witness", to_json(s.witness)},
                {"sigma", s.ledger.sigma}};
}

/// "state,value" series keyed by the state labels.
inline std::string vector_to_csv(const StateSpace& states, const Vector& v,
                                 const std::string& value_name = "value") {
    std::ostringstream os;
    os.precision(17);
    os << "state," << value_name << "\n";
    for (Index i = 0; i < v.size(); ++i) os << states.label(i) << "," << v[i] << "\n";
    return os.str();
}

}  // namespace specgap

#endif  // SPECGAP_SERIALIZE_HPP
