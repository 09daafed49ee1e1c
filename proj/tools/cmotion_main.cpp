#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cmotion/problem_file.hpp"
#include "cmotion/report.hpp"

using namespace cmotion;

namespace {

struct Options {
    std::string file;
    std::string csv_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> rtol;
    std::optional<double> atol;
    std::string report_format = "text";
};

std::uint64_t effective_seed(const Options& opt, const ProblemFile& pf) {
    if (opt.seed) return *opt.seed;
    if (pf.discover) return pf.discover->seed;
    return 0;
}

RunReport base_report(const std::string& cmd, const ProblemFile& pf, std::uint64_t seed) {
    const OCProblem& p = pf.problem;
    RunReport rep;
    rep.command = cmd;
    rep.problem_name = p.name;
    rep.n = p.n;
    rep.r = p.r;
    rep.a = p.a;
    rep.b = p.b;
    rep.seed = seed;

    Expr H = build_hamiltonian(p);
    rep.derivation.hamiltonian = to_string(H);
    for (const auto& s : stationarity_system(p, H))
        rep.derivation.stationarity.push_back(to_string(s));
    try {
        ControlElimination elim = eliminate_controls(p, H);
        for (int j = 1; j <= p.r; ++j) {
            const std::string uj = OCProblem::control_name(j);
            rep.derivation.elimination.emplace_back(uj, to_string(elim.control_map.at(uj)));
        }
        ExtremalField field = build_field(p, elim);
        for (int i = 1; i <= p.n; ++i)
            rep.derivation.reduced_field.emplace_back("d" + OCProblem::state_name(i) + "/dt",
                                                      to_string(field.rhs()[i - 1]));
        for (int i = 1; i <= p.n; ++i)
            rep.derivation.reduced_field.emplace_back(
                "d" + OCProblem::costate_name(i) + "/dt", to_string(field.rhs()[p.n + i - 1]));
    } catch (const Error& e) {
        rep.derivation.error = e.what();
    }
    return rep;
}

void print_report(const RunReport& rep, const Options& opt) {
    if (opt.report_format == "json")
        std::cout << to_json(rep).dump(2) << "\n";
    else
        std::cout << to_text(rep);
}

Trajectory run_simulation(const ProblemFile& pf, const Options& opt) {
    const SimulateSpec& sim = *pf.simulate;
    ExtremalField field =
        build_field(pf.problem, eliminate_controls(pf.problem, build_hamiltonian(pf.problem)));
    return integrate(field, sim.x0, sim.psi_init, sim.t_start, sim.t_end,
                     opt.rtol.value_or(sim.rtol), opt.atol.value_or(sim.atol), sim.samples);
}

int cmd_derive(const ProblemFile& pf, const Options& opt,
               std::chrono::steady_clock::time_point started) {
    RunReport rep = base_report("derive", pf, effective_seed(opt, pf));
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started)
                      .count();
    print_report(rep, opt);
    return rep.derivation.error.empty() ? 0 : 1;
}

int cmd_check(const ProblemFile& pf, const Options& opt,
              std::chrono::steady_clock::time_point started) {
    if (pf.candidates.empty())
        throw FileError(0, "check requires a nonempty [candidates] section");
    std::uint64_t seed = effective_seed(opt, pf);
    RunReport rep = base_report("check", pf, seed);

    std::vector<Trajectory> trajectories;
    if (pf.simulate && rep.derivation.error.empty())
        trajectories.push_back(run_simulation(pf, opt));

    bool all_conserved = true;
    for (const auto& [name, expr] : pf.candidates) {
        CandidateReport cr;
        cr.name = name;
        cr.verdict = check_symbolic(expr, pf.problem, seed);
        if (!trajectories.empty()) check_numeric(cr.verdict, trajectories, 1e-7);
        if (cr.verdict.symbolic_status != SymbolicStatus::ConservedSymbolically)
            all_conserved = false;
        rep.candidates.push_back(std::move(cr));
    }

    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started)
                      .count();
    print_report(rep, opt);
    return all_conserved ? 0 : 1;
}

int cmd_simulate(const ProblemFile& pf, const Options& opt,
                 std::chrono::steady_clock::time_point started) {
    if (!pf.simulate) throw FileError(0, "simulate requires a [simulate] section");
    ExtremalField field =
        build_field(pf.problem, eliminate_controls(pf.problem, build_hamiltonian(pf.problem)));
    Trajectory tr = run_simulation(pf, opt);

    if (opt.csv_path.empty()) {
        write_csv(std::cout, tr, field, pf.candidates);
        return 0;
    }
    std::ofstream os(opt.csv_path);
    if (!os) throw FileError(0, "cannot write '" + opt.csv_path + "'");
    write_csv(os, tr, field, pf.candidates);

    RunReport rep = base_report("simulate", pf, effective_seed(opt, pf));
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started)
                      .count();
    print_report(rep, opt);
    return 0;
}

int cmd_discover(const ProblemFile& pf, const Options& opt,
                 std::chrono::steady_clock::time_point started) {
    if (!pf.discover) throw FileError(0, "discover requires a [discover] section");
    AnsatzSpec spec = *pf.discover;
    if (opt.seed) spec.seed = *opt.seed;
    RunReport rep = base_report("discover", pf, spec.seed);
    rep.discovery = discover(pf.problem, spec);
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started)
                      .count();
    print_report(rep, opt);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pontryagin hamiltonian toolkit: extremals and constants of the motion"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub, bool tolerances, bool csv) {
        sub->add_option("file", opt.file, "problem file")->required();
        sub->add_option("--seed", opt.seed, "seed override for sampling and discovery");
        sub->add_option("--report", opt.report_format, "report format")
            ->check(CLI::IsMember({"json", "text"}));
        if (tolerances) {
            sub->add_option("--rtol", opt.rtol, "relative tolerance override");
            sub->add_option("--atol", opt.atol, "absolute tolerance override");
        }
        if (csv) sub->add_option("--csv", opt.csv_path, "write trajectory CSV to this path");
    };
    CLI::App* derive = app.add_subcommand("derive", "print H, stationarity and elimination");
    add_common(derive, false, false);
    CLI::App* check = app.add_subcommand("check", "verify candidate constants of the motion");
    add_common(check, true, false);
    CLI::App* simulate = app.add_subcommand("simulate", "integrate an extremal and emit CSV");
    add_common(simulate, true, true);
    CLI::App* discover_cmd = app.add_subcommand("discover", "search an ansatz basis");
    add_common(discover_cmd, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    auto started = std::chrono::steady_clock::now();
    try {
        ProblemFile pf = load_problem_file(opt.file);
        if (derive->parsed()) return cmd_derive(pf, opt, started);
        if (check->parsed()) return cmd_check(pf, opt, started);
        if (simulate->parsed()) return cmd_simulate(pf, opt, started);
        return cmd_discover(pf, opt, started);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
