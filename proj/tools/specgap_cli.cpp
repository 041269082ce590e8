// Command-line front door: load a kernel or model, fit witnesses, build
// ledgers, solve eigen-triplets, run audits, emit plottable data files.
//
// Exit codes: 0 all checks pass, 1 input error, 2 audit failure,
// 3 witness not found / model rejected.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "specgap/specgap.hpp"

namespace fs = std::filesystem;
using namespace specgap;

namespace {

struct RunConfig {
    std::string command;
    std::string input_path;
    std::string output_dir = ".";
    std::string witness_out;
    std::string ledger_format = "json";
    double eigen_tol = 1e-12;
    long a4_horizon = 400;
    double tail_tol = 1e-6;
    std::uint64_t seed = 0;
    bool tune = false;
};

struct LoadedProblem {
    std::optional<BirthDeathModel> bd;
    std::optional<GrowthFragModel> gf;
    std::optional<LabelledKernel> kernel;
    Vector V, psi;
};

int finish(const RunConfig& cfg, int code, const std::string& status, const std::string& detail) {
    json summary{{"command", cfg.command}, {"status", status}, {"exit", code}};
    if (!detail.empty()) summary["detail"] = detail;
    std::cerr << "specgap: " << summary.dump() << "\n";
    return code;
}

DivisionRate parse_division_rate(const json& j) {
    DivisionRate B;
    std::string type = j.value("type", "power");
    if (type == "power") {
        B.kind = DivisionRate::Kind::PowerLaw;
        B.beta0 = j.value("beta0", 1.0);
        B.gamma_hat = j.value("gamma", 1.0);
    } else if (type == "table") {
        B.kind = DivisionRate::Kind::Tabulated;
        B.table = j.at("values").get<std::vector<double>>();
        B.table_dx = j.at("dx").get<double>();
    } else {
        throw std::invalid_argument("division rate type must be 'power' or 'table'");
    }
    return B;
}

FragmentationKernel parse_fragmentation(const json& j) {
    std::vector<std::pair<double, double>> atoms;
    if (j.contains("atoms"))
        for (const auto& a : j.at("atoms"))
            atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    if (j.contains("uniform")) {
        const auto& u = j.at("uniform");
        FragmentationKernel::UniformPart part{u.at("z0").get<double>(),
                                              u.at("eps").get<double>(),
                                              u.at("c0").get<double>()};
        return FragmentationKernel::with_uniform(part, std::move(atoms),
                                                 j.value("quad_pieces", 256));
    }
    return FragmentationKernel::from_atoms(std::move(atoms));
}

LoadedProblem load_problem(const json& doc) {
    LoadedProblem out;
    if (doc.contains("model")) {
        std::string model = doc.at("model").get<std::string>();
        if (model == "birth-death") {
            BirthDeathModel m;
            m.b = doc.value("b", 1.0);
            m.d = doc.value("d", 4.0);
            m.b1 = doc.value("b1", 1.0);
            m.d1 = doc.value("d1", 1.0);
            m.N = doc.value("N", 200);
            m.tau = doc.value("tau", 1.0);
            out.bd = m;
            return out;
        }
        if (model == "growth-frag") {
            GrowthFragModel m;
            if (doc.contains("B")) m.B = parse_division_rate(doc.at("B"));
            if (doc.contains("kernel")) m.kernel = parse_fragmentation(doc.at("kernel"));
            m.k_weight = doc.value("k", 2.0);
            if (doc.contains("grid")) {
                m.x_max = doc.at("grid").value("x_max", 30.0);
                m.n_cells = doc.at("grid").value("n_cells", 3000);
            }
            m.tau_skeleton = doc.value("tau", 1.0);
            m.scheme_dt = doc.value("scheme_dt", 0.0);
            out.gf = m;
            return out;
        }
        throw std::invalid_argument("unknown model '" + model + "'");
    }

    if (doc.contains("kernel_csv")) {
        KernelOperator M = kernel_from_csv_file(doc.at("kernel_csv").get<std::string>());
        out.kernel = LabelledKernel{StateSpace::indexed(M.n()), std::move(M)};
    } else if (doc.contains("kernel")) {
        out.kernel = kernel_from_json(doc.at("kernel"));
    } else if (doc.contains("generator")) {
        const auto& rows = doc.at("generator").at("rows");
        const Index n = static_cast<Index>(rows.size());
        Matrix G(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                G(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
        double tau = doc.value("tau", 1.0);
        out.kernel = LabelledKernel{StateSpace::indexed(n),
                                    matrix_exp(GeneratorMatrix(G), tau)};
    } else {
        throw std::invalid_argument("input must provide 'model', 'kernel', 'kernel_csv' or 'generator'");
    }

    const Index n = out.kernel->kernel.n();
    if (doc.contains("V")) {
        auto vv = doc.at("V").get<std::vector<double>>();
        if (static_cast<Index>(vv.size()) != n) throw std::invalid_argument("V has wrong length");
        out.V = Eigen::Map<const Vector>(vv.data(), n);
    } else {
        out.V = Vector::Ones(n);
    }
    if (doc.contains("psi")) {
        auto pv = doc.at("psi").get<std::vector<double>>();
        if (static_cast<Index>(pv.size()) != n)
            throw std::invalid_argument("psi has wrong length");
        out.psi = Eigen::Map<const Vector>(pv.data(), n);
    } else {
        out.psi = Vector::Ones(n);
    }
    return out;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
    atomic_write_file(fs::path(cfg.output_dir) / name, j.dump(2) + "\n");
}

void write_text(const RunConfig& cfg, const std::string& name, const std::string& text) {
    atomic_write_file(fs::path(cfg.output_dir) / name, text);
}

struct KernelPipeline {
    LabelledKernel lk;
    WeightPair weights;
    WitnessSearchResult search;
};

KernelPipeline run_witness_stage(LoadedProblem&& prob, const RunConfig& cfg) {
    if (!prob.kernel) throw std::invalid_argument("this command requires a kernel-style input");
    SearchOptions sopts;
    sopts.a4_horizon = cfg.a4_horizon;
    WeightPair weights(prob.V, prob.psi);
    WitnessSearchResult search =
        full_witness_search(prob.kernel->kernel, weights.V, weights.psi, sopts);
    return KernelPipeline{std::move(*prob.kernel), std::move(weights), std::move(search)};
}

void emit_witness(const RunConfig& cfg, const Witness& w) {
    json j = to_json(w);
    write_json(cfg, "witness.json", j);
    if (!cfg.witness_out.empty()) atomic_write_file(cfg.witness_out, j.dump(2) + "\n");
}

int cmd_check(LoadedProblem&& prob, const RunConfig& cfg) {
    auto pipe = run_witness_stage(std::move(prob), cfg);
    if (!pipe.search.witness)
        return finish(cfg, 3, "witness-not-found", pipe.search.diagnosis);
    emit_witness(cfg, *pipe.search.witness);
    return finish(cfg, 0, "ok", "");
}

int cmd_ledger(LoadedProblem&& prob, const RunConfig& cfg) {
    auto pipe = run_witness_stage(std::move(prob), cfg);
    if (!pipe.search.witness)
        return finish(cfg, 3, "witness-not-found", pipe.search.diagnosis);
    emit_witness(cfg, *pipe.search.witness);
    ConstantsLedger L =
        cfg.tune ? tune_ledger(*pipe.search.witness) : build_ledger(*pipe.search.witness);
    write_json(cfg, "ledger.json", to_json(L));
    if (cfg.ledger_format == "table")
        std::cout << ledger_table(L);
    else
        std::cout << to_json(L).dump(2) << "\n";
    return finish(cfg, 0, "ok", "");
}

int cmd_eigen(LoadedProblem&& prob, const RunConfig& cfg) {
    auto pipe = run_witness_stage(std::move(prob), cfg);
    const KernelOperator& M = pipe.lk.kernel;
    Vector nu;
    std::optional<ConstantsLedger> ledger;
    if (pipe.search.witness) {
        emit_witness(cfg, *pipe.search.witness);
        nu = pipe.search.witness->nu;
        ledger = build_ledger(*pipe.search.witness);
        write_json(cfg, "ledger.json", to_json(*ledger));
    } else {
        nu = Vector::Constant(M.n(), 1.0 / static_cast<double>(M.n()));
    }
    SolveOptions eopts =
        ledger ? SolveOptions::from_ledger(*ledger, cfg.eigen_tol) : SolveOptions{cfg.eigen_tol};
    EigenTriplet t = solve_triplet(M, pipe.weights, nu, eopts);
    write_json(cfg, "triplet.json", to_json(t));
    if (!pipe.search.witness)
        return finish(cfg, 2, "audit-fail", "no certified gap: " + pipe.search.diagnosis);
    bool residual_ok = t.residual_right <= 1e-9 && t.residual_left <= 1e-9 && t.converged;
    bool bracket_ok = t.lambda >= ledger->lambda_lo - 1e-10 && t.lambda <= ledger->lambda_hi + 1e-10;
    if (!residual_ok || !bracket_ok)
        return finish(cfg, 2, "audit-fail",
                      residual_ok ? "eigenvalue outside certified bracket"
                                  : "eigen residuals above tolerance");
    return finish(cfg, 0, "ok", "");
}

int cmd_audit(LoadedProblem&& prob, const RunConfig& cfg) {
    auto pipe = run_witness_stage(std::move(prob), cfg);
    if (!pipe.search.witness)
        return finish(cfg, 3, "witness-not-found", pipe.search.diagnosis);
    const KernelOperator& M = pipe.lk.kernel;
    emit_witness(cfg, *pipe.search.witness);
    ConstantsLedger L =
        cfg.tune ? tune_ledger(*pipe.search.witness) : build_ledger(*pipe.search.witness);
    write_json(cfg, "ledger.json", to_json(L));
    EigenTriplet t =
        solve_triplet(M, pipe.weights, pipe.search.witness->nu,
                      SolveOptions::from_ledger(L, cfg.eigen_tol));
    write_json(cfg, "triplet.json", to_json(t));
    SelfConsistencyResult self = self_consistency(M, pipe.weights.V, t);
    write_json(cfg, "self_consistency.json", to_json(self));

    MuSet mus = default_mu_set(M.n(), cfg.seed);
    AuditTable conv = convergence_audit(M, pipe.weights, Vector(t.h), t, self.ledger, mus, 50);
    write_text(cfg, "audit.csv", audit_to_csv(conv));
    AuditTable mass = mass_normalized_audit(M, t, mus, 50, self.ledger.sigma);
    write_text(cfg, "audit_tv.csv", audit_to_csv(mass));
    json report{{"weighted", to_json(conv)}, {"mass_normalized", to_json(mass)},
                {"self_consistency_pass", self.pass}};
    write_json(cfg, "audit.json", report);
    bool ok = conv.pass && mass.pass && self.pass;
    if (!ok) return finish(cfg, 2, "audit-fail", "see audit.json");
    return finish(cfg, 0, "ok", "");
}

int cmd_bd_qsd(LoadedProblem&& prob, const RunConfig& cfg) {
    if (!prob.bd) throw std::invalid_argument("bd-qsd requires a birth-death model input");
    QsdOptions opts;
    opts.tail_tol = cfg.tail_tol;
    opts.eigen_tol = cfg.eigen_tol;
    opts.a4_horizon = cfg.a4_horizon;
    opts.seed = cfg.seed;
    QsdResult res = bd_qsd(*prob.bd, opts);

    BirthDeathModel used = *prob.bd;
    used.N = res.N_used;
    StateSpace states = bd_build(used).states;
    emit_witness(cfg, res.witness);
    write_json(cfg, "ledger.json", to_json(res.ledger));
    write_json(cfg, "triplet.json", to_json(res.triplet));
    write_json(cfg, "self_consistency.json", to_json(res.self));
    write_text(cfg, "pi.csv", vector_to_csv(states, res.pi, "pi"));
    write_text(cfg, "h.csv", vector_to_csv(states, res.h, "h"));
    write_text(cfg, "audit.csv", audit_to_csv(res.conditional_audit));
    write_text(cfg, "audit_weighted.csv", audit_to_csv(res.weighted_audit));
    json summary{{"N_used", res.N_used},
                 {"truncation_converged", res.truncation_converged},
                 {"tail_tv", res.tail_tv},
                 {"lambda0", res.lambda0},
                 {"conditional_rate", res.conditional_audit.fitted_rate},
                 {"weighted_rate", res.weighted_audit.fitted_rate},
                 {"sigma", res.self.ledger.sigma}};
    write_json(cfg, "qsd.json", summary);
    bool ok = res.truncation_converged && res.lambda0 > 0.0 && res.conditional_audit.pass &&
              res.weighted_audit.pass && res.self.pass;
    if (!ok) return finish(cfg, 2, "audit-fail", "see qsd.json");
    return finish(cfg, 0, "ok", "");
}

int cmd_growth_frag(LoadedProblem&& prob, const RunConfig& cfg) {
    if (!prob.gf) throw std::invalid_argument("growth-frag requires a growth-frag model input");
    GfOptions opts;
    opts.eigen_tol = cfg.eigen_tol;
    opts.a4_horizon = cfg.a4_horizon;
    opts.seed = cfg.seed;
    GrowthFragAnalysis res = gf_analyze(*prob.gf, opts);
    emit_witness(cfg, res.witness);
    write_json(cfg, "ledger.json", to_json(res.ledger));
    write_json(cfg, "triplet.json", to_json(res.triplet));
    write_json(cfg, "self_consistency.json", to_json(res.self));
    write_json(cfg, "smallset.json", to_json(res.smallset));
    write_text(cfg, "audit.csv", audit_to_csv(res.weighted_audit));
    write_text(cfg, "gamma.csv", vector_to_csv(res.build.states, res.triplet.gamma, "gamma"));
    write_text(cfg, "h.csv", vector_to_csv(res.build.states, res.triplet.h, "h"));
    json summary{{"lambda", res.triplet.lambda},
                 {"lambda_doubled", res.lambda_doubled},
                 {"lambda_rel_change", res.lambda_rel_change},
                 {"drift", json{{"a", res.build.drift.a},
                                {"b", res.build.drift.b},
                                {"xi", res.build.drift.xi},
                                {"zeta", res.build.drift.zeta}}},
                 {"monotonicity",
                  json{{"t_violation", res.monotonicity.t_violation},
                       {"x_violation", res.monotonicity.x_violation},
                       {"pass", res.monotonicity.pass}}},
                 {"weighted_rate", res.weighted_audit.fitted_rate},
                 {"sigma", res.self.ledger.sigma}};
    write_json(cfg, "growth_frag.json", summary);
    bool ok = res.weighted_audit.pass && res.monotonicity.pass && res.self.pass &&
              res.lambda_rel_change < 1e-3;
    if (!ok) return finish(cfg, 2, "audit-fail", "see growth_frag.json");
    return finish(cfg, 0, "ok", "");
}

int cmd_harris(LoadedProblem&& prob, const RunConfig& cfg) {
    if (!prob.kernel) throw std::invalid_argument("harris requires a kernel-style input");
    Matrix P = prob.kernel->kernel.to_dense();
    HarrisContractionSpec spec = fit_harris_spec(P, prob.V);
    HarrisReport rep = verify_harris_contraction(spec);
    write_json(cfg, "harris.json", to_json(rep));
    if (!rep.pass) return finish(cfg, 2, "audit-fail", "contraction check failed");
    return finish(cfg, 0, "ok", "");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Perron eigen-triplets and spectral-gap certificates for positive kernels"};
    app.add_option("command", cfg.command,
                   "one of: check, ledger, eigen, audit, bd-qsd, growth-frag, harris");
    app.add_option("--command", cfg.command, "alternative to the positional command");
    app.add_option("--input", cfg.input_path, "input JSON (kernel or model)")->required();
    app.add_option("--out", cfg.output_dir, "output directory (default .)");
    app.add_option("--tol", cfg.eigen_tol, "eigen iteration tolerance");
    app.add_option("--a4-horizon", cfg.a4_horizon, "mass-ratio certification horizon");
    app.add_option("--tail-tol", cfg.tail_tol, "truncation TV tolerance for bd-qsd");
    app.add_option("--seed", cfg.seed, "seed for randomized mu-sets (fully reproducible)");
    app.add_option("--ledger-format", cfg.ledger_format, "ledger stdout rendering: json|table");
    app.add_option("--witness-out", cfg.witness_out, "extra path for the witness JSON");
    app.add_flag("--tune", cfg.tune, "coarse grid tuning of the coupling parameters");
    CLI11_PARSE(app, argc, argv);

    json doc;
    try {
        std::ifstream in(cfg.input_path);
        if (!in) throw std::invalid_argument("cannot open input " + cfg.input_path);
        in >> doc;
        // Config file overrides flags; flags override defaults.
        if (doc.contains("command")) cfg.command = doc.at("command").get<std::string>();
        if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
        if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("tolerances")) {
            const auto& t = doc.at("tolerances");
            cfg.eigen_tol = t.value("eigen_tol", cfg.eigen_tol);
            cfg.a4_horizon = t.value("a4_horizon", cfg.a4_horizon);
            cfg.tail_tol = t.value("tail_tol", cfg.tail_tol);
        }
        if (cfg.command.empty())
            throw std::invalid_argument("no command given (flag, positional, or config)");

        LoadedProblem prob = load_problem(doc);
        if (cfg.command == "check") return cmd_check(std::move(prob), cfg);
        if (cfg.command == "ledger") return cmd_ledger(std::move(prob), cfg);
        if (cfg.command == "eigen") return cmd_eigen(std::move(prob), cfg);
        if (cfg.command == "audit") return cmd_audit(std::move(prob), cfg);
        if (cfg.command == "bd-qsd") return cmd_bd_qsd(std::move(prob), cfg);
        if (cfg.command == "growth-frag") return cmd_growth_frag(std::move(prob), cfg);
        if (cfg.command == "harris") return cmd_harris(std::move(prob), cfg);
        throw std::invalid_argument("unknown command '" + cfg.command + "'");
    } catch (const ModelRejected& e) {
        return finish(cfg, 3, "witness-not-found", e.what());
    } catch (const json::exception& e) {
        return finish(cfg, 1, "input-error", e.what());
    } catch (const std::invalid_argument& e) {
        return finish(cfg, 1, "input-error", e.what());
    } catch (const std::exception& e) {
        return finish(cfg, 1, "input-error", e.what());
    }
}
