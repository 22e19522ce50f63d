/// entropy_cg: benchmark runs, mesh-convergence studies, and seeded
/// property suites for the entropy-stable continuous Galerkin solver.
///
/// Subcommands: run, eoc, verify.  Every flag mirrors a key in the
/// flat key=value config format, flags override the file, and each
/// run writes a manifest that relaunches it exactly.
/// Exit codes: 0 ok, 1 config error, 2 blow-up, 3 verification failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entropycg/io.hpp"
#include "entropycg/solver.hpp"
#include "entropycg/verify.hpp"

namespace ecg = entropycg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitBlowUp = 2;
constexpr int kExitVerify = 3;

/// Raw option storage shared by the run and eoc subcommands.
struct Options {
    std::string config_path;
    std::string preset;
    std::string scheme;
    std::string basis = "bernstein";
    std::string recovery = "lumped";
    std::string integrator = "ssprk3";
    std::string outdir = "out";
    std::string dofs_list;
    int degree = 1;
    int cells = 0;
    long long dofs = 0;
    int output_every = 0;
    double omega = 1.0;
    double cfl = 0.25;
    double tfinal = 0.0;
    unsigned long long seed = 12345;
};

/// CLI11 option handles, used to detect which flags were given.
struct OptionHandles {
    CLI::Option* preset = nullptr;
    CLI::Option* scheme = nullptr;
    CLI::Option* basis = nullptr;
    CLI::Option* recovery = nullptr;
    CLI::Option* integrator = nullptr;
    CLI::Option* outdir = nullptr;
    CLI::Option* dofs_list = nullptr;
    CLI::Option* degree = nullptr;
    CLI::Option* cells = nullptr;
    CLI::Option* dofs = nullptr;
    CLI::Option* output_every = nullptr;
    CLI::Option* omega = nullptr;
    CLI::Option* cfl = nullptr;
    CLI::Option* tfinal = nullptr;
    CLI::Option* seed = nullptr;
};

OptionHandles add_common_options(CLI::App* cmd, Options& o) {
    OptionHandles h;
    cmd->add_option("--config", o.config_path, "key=value config file; flags override it");
    h.preset = cmd->add_option("--preset", o.preset,
                               "benchmark preset: adv1d_cos, adv1d_threebody, burgers1d, "
                               "solid_body_rotation (sbr), buckley_leverett (bl), kpp");
    h.scheme = cmd->add_option("--scheme", o.scheme,
                               "scheme variant, e.g. CG, HO-SUPG, HO-VMS-EV, HO-VMS-EV-BP/FL");
    h.basis = cmd->add_option("--basis", o.basis, "bernstein or lagrange");
    h.recovery = cmd->add_option("--recovery", o.recovery, "VMS gradient recovery: lumped or l2");
    h.integrator = cmd->add_option("--integrator", o.integrator, "ssprk3 or rk76");
    h.outdir = cmd->add_option("--outdir", o.outdir, "output directory (one run at a time)");
    h.degree = cmd->add_option("--degree", o.degree, "polynomial degree p >= 1");
    h.cells = cmd->add_option("--cells", o.cells, "mesh cells per direction");
    h.dofs = cmd->add_option("--dofs", o.dofs, "total node count N_h (alternative to --cells)");
    h.output_every = cmd->add_option("--output-every", o.output_every,
                                     "diagnostics/snapshot cadence in steps (0: ends only)");
    h.omega = cmd->add_option("--omega", o.omega, "stabilization scaling factor");
    h.cfl = cmd->add_option("--cfl", o.cfl, "CFL number for the graph-viscosity time step");
    h.tfinal = cmd->add_option("--tfinal", o.tfinal, "final time (overrides the preset)");
    h.seed = cmd->add_option("--seed", o.seed, "random seed recorded in the manifest");
    return h;
}

/// Keys every config file may carry; manifests additionally carry
/// informational keys that the loader tolerates.
const std::set<std::string>& known_keys() {
    static const std::set<std::string> k = {
        "preset", "scheme", "basis",  "recovery", "integrator",   "outdir", "dofs-list",
        "degree", "cells",  "dofs",   "omega",    "cfl",          "tfinal", "output-every",
        "seed",   "suite",  "config", "version",  "threads"};
    return k;
}

/// Worker cap from the environment; this build runs serially, so the
/// value is validated and recorded but never exceeds one worker.
int resolve_threads() {
    const char* env = std::getenv("ENTROPY_CG_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (*end != '\0' || v < 1)
        throw std::invalid_argument("ENTROPY_CG_THREADS must be a positive integer, got '" +
                                    std::string(env) + "'");
    return 1;  // serial build: any cap >= 1 is satisfied by one worker
}

/// Fully resolved run settings (flags > config file > preset defaults).
struct Settings {
    ecg::BenchmarkProblem bench;
    ecg::SchemeConfig scheme;
    std::string scheme_name;
    ecg::BasisType basis = ecg::BasisType::bernstein;
    ecg::IntegratorKind integrator = ecg::IntegratorKind::ssprk3;
    std::string outdir;
    int degree = 1;
    int cells = 0;  // per direction
    double cfl = 0.25;
    double tfinal = 0.0;
    int output_every = 0;
    unsigned long long seed = 12345;
    std::vector<long long> dofs_list;  // eoc only
    int threads = 1;
    std::string basis_name, recovery_name, integrator_name;
};

/// Per-direction node count from a total dof target; must be an exact
/// power and divisible by the degree.
int cells_from_dofs(long long dofs, int dim, int p) {
    if (dofs < 1) throw std::invalid_argument("dofs must be positive");
    long long n1 = dofs;
    if (dim == 2) {
        n1 = std::llround(std::sqrt(static_cast<double>(dofs)));
        if (n1 * n1 != dofs)
            throw std::invalid_argument("dofs = " + std::to_string(dofs) +
                                        " is not a perfect square for a 2D preset");
    }
    if (n1 % p != 0)
        throw std::invalid_argument("node count " + std::to_string(n1) +
                                    " per direction is not divisible by degree " +
                                    std::to_string(p));
    return static_cast<int>(n1 / p);
}

std::vector<long long> parse_dofs_list(const std::string& text) {
    std::vector<long long> out;
    std::string cur;
    for (char ch : text + ",") {
        if (ch == ',') {
            if (!cur.empty()) {
                size_t pos = 0;
                const long long v = std::stoll(cur, &pos);
                if (pos != cur.size() || v < 1)
                    throw std::invalid_argument("bad dofs-list entry '" + cur + "'");
                out.push_back(v);
                cur.clear();
            }
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    if (out.empty()) throw std::invalid_argument("dofs-list is empty");
    return out;
}

/// Layered lookup: flag if given, else config file, else fallback.
struct Resolver {
    const ecg::KeyValueConfig& cfg;

    std::string str(const CLI::Option* opt, const std::string& flag_val, const std::string& key,
                    const std::string& fallback) const {
        if (opt && opt->count() > 0) return flag_val;
        if (cfg.has(key)) return cfg.get(key);
        return fallback;
    }
    double num(const CLI::Option* opt, double flag_val, const std::string& key,
               double fallback) const {
        if (opt && opt->count() > 0) return flag_val;
        if (cfg.has(key)) return cfg.get_double(key, 0.0);
        return fallback;
    }
    long long integer(const CLI::Option* opt, long long flag_val, const std::string& key,
                      long long fallback) const {
        if (opt && opt->count() > 0) return flag_val;
        if (cfg.has(key)) return cfg.get_int(key, 0);
        return fallback;
    }
    bool given(const CLI::Option* opt, const std::string& key) const {
        return (opt && opt->count() > 0) || cfg.has(key);
    }
};

Settings resolve_settings(const Options& o, const OptionHandles& h, bool need_mesh) {
    ecg::KeyValueConfig cfg;
    if (!o.config_path.empty()) {
        cfg = ecg::read_config_file(o.config_path);
        for (const auto& [k, v] : cfg.values)
            if (!known_keys().count(k))
                throw std::invalid_argument("config: unknown key '" + k + "'");
    }
    Resolver r{cfg};
    Settings s;

    const std::string preset = r.str(h.preset, o.preset, "preset", "");
    if (preset.empty()) throw std::invalid_argument("a --preset is required");
    s.bench = ecg::benchmark(preset);

    s.scheme_name = r.str(h.scheme, o.scheme, "scheme", s.bench.default_scheme);
    s.scheme = ecg::parse_scheme(s.scheme_name);
    s.scheme.omega = r.num(h.omega, o.omega, "omega", s.bench.default_omega);
    if (s.scheme.omega <= 0.0) throw std::invalid_argument("omega must be positive");
    s.recovery_name = r.str(h.recovery, o.recovery, "recovery", "lumped");
    s.scheme.recovery = ecg::parse_recovery(s.recovery_name);

    s.basis_name = r.str(h.basis, o.basis, "basis", "bernstein");
    s.basis = ecg::parse_basis(s.basis_name);
    s.integrator_name = r.str(h.integrator, o.integrator, "integrator", "ssprk3");
    s.integrator = ecg::parse_integrator(s.integrator_name);

    s.degree = static_cast<int>(r.integer(h.degree, o.degree, "degree", 1));
    if (s.degree < 1) throw std::invalid_argument("degree must be >= 1");
    s.cfl = r.num(h.cfl, o.cfl, "cfl", 0.25);
    s.tfinal = r.num(h.tfinal, o.tfinal, "tfinal", s.bench.t_final);
    if (s.tfinal < 0.0) throw std::invalid_argument("tfinal must be nonnegative");
    s.output_every = static_cast<int>(r.integer(h.output_every, o.output_every, "output-every", 0));
    if (s.output_every < 0) throw std::invalid_argument("output-every must be >= 0");
    s.seed = static_cast<unsigned long long>(r.integer(h.seed, o.seed, "seed", 12345));
    s.outdir = r.str(h.outdir, o.outdir, "outdir", "out");
    s.threads = resolve_threads();

    if (need_mesh) {
        // Flags win as a group so a flag --cells overrides a config dofs.
        const bool flag_cells = h.cells && h.cells->count() > 0;
        const bool flag_dofs = h.dofs && h.dofs->count() > 0;
        if (flag_cells && flag_dofs)
            throw std::invalid_argument("--cells and --dofs are mutually exclusive");
        if (flag_cells) {
            s.cells = o.cells;
        } else if (flag_dofs) {
            s.cells = cells_from_dofs(o.dofs, s.bench.dim, s.degree);
        } else if (cfg.has("cells") && cfg.has("dofs")) {
            throw std::invalid_argument("config sets both cells and dofs");
        } else if (cfg.has("cells")) {
            s.cells = static_cast<int>(cfg.get_int("cells", 0));
        } else if (cfg.has("dofs")) {
            s.cells = cells_from_dofs(cfg.get_int("dofs", 0), s.bench.dim, s.degree);
        } else {
            throw std::invalid_argument("mesh size required: pass --cells or --dofs");
        }
        if (s.cells < 2) throw std::invalid_argument("need at least 2 cells per direction");
    } else {
        const std::string list = r.str(h.dofs_list, o.dofs_list, "dofs-list", "");
        if (list.empty())
            throw std::invalid_argument("a --dofs-list (comma-separated N_h values) is required");
        s.dofs_list = parse_dofs_list(list);
    }
    return s;
}

ecg::KeyValueConfig manifest_from(const Settings& s) {
    ecg::KeyValueConfig m;
    m.set("version", ecg::kVersion);
    m.set("preset", s.bench.name);
    m.set("scheme", s.scheme_name);
    m.set("basis", s.basis_name);
    m.set("recovery", s.recovery_name);
    m.set("integrator", s.integrator_name);
    m.set("outdir", s.outdir);
    m.set_int("degree", s.degree);
    if (s.cells > 0) m.set_int("cells", s.cells);
    m.set_double("omega", s.scheme.omega);
    m.set_double("cfl", s.cfl);
    m.set_double("tfinal", s.tfinal);
    m.set_int("output-every", s.output_every);
    m.set_int("seed", static_cast<long long>(s.seed));
    m.set_int("threads", s.threads);
    return m;
}

ecg::Mesh make_mesh(const Settings& s, int cells) {
    return ecg::build_mesh(s.bench.dim, s.bench.lower, s.bench.upper, {cells, cells}, s.degree);
}

void warn_rk76_limiter(const Settings& s) {
    if (s.integrator == ecg::IntegratorKind::rk76 && s.scheme.limiter != ecg::LimiterMode::none)
        std::fprintf(stderr,
                     "warning: rk76 is not SSP; limiter bounds assume SSP convex "
                     "combinations and may be violated\n");
}

void write_state(const Settings& s, const ecg::System& sys, const std::vector<double>& u,
                 const std::string& stem) {
    const std::string base = s.outdir + "/" + stem;
    if (s.bench.dim == 1)
        ecg::write_solution_1d(base + ".csv", sys.context(), u);
    else
        ecg::write_snapshot_2d(base + ".txt", sys.context(), u);
}

/// One diagnostics row: conservation, entropy, range, stabilization
/// and limiter activity for the state u.  Uses an out-of-band rhs
/// evaluation; running tallies are saved and restored around it.
void diagnostics_row(ecg::System& sys, ecg::CsvWriter& csv, long long step, double t, double dt,
                     const std::vector<double>& u, std::vector<double>& scratch) {
    const ecg::RhsDiagnostics saved = sys.run_diagnostics();
    sys.rhs(u, scratch);
    const ecg::RhsDiagnostics& d = sys.last_diagnostics();
    const ecg::ElementBudget budget = sys.entropy_budget(u, scratch);
    double mass = 0.0, umin = u[0], umax = u[0];
    const std::vector<double>& m = sys.lumped_mass();
    for (size_t i = 0; i < u.size(); ++i) {
        mass += m[i] * u[i];
        umin = std::min(umin, u[i]);
        umax = std::max(umax, u[i]);
    }
    const double pairs = static_cast<double>(std::max<long long>(d.limiter.pairs, 1));
    csv.row({static_cast<double>(step), t, dt, mass, sys.lumped_entropy(u), umin, umax, d.nu_max,
             d.production_max, budget.lhs, static_cast<double>(d.limiter.idp_clipped) / pairs,
             static_cast<double>(d.limiter.entropy_clipped) / pairs});
    sys.restore_run_diagnostics(saved);
}

int cmd_run(const Options& o, const OptionHandles& h) {
    const Settings s = resolve_settings(o, h, /*need_mesh=*/true);
    warn_rk76_limiter(s);

    const ecg::Mesh mesh = make_mesh(s, s.cells);
    ecg::System sys(mesh, s.basis, s.bench.flux, s.scheme);
    std::vector<double> u = sys.initial_state(s.bench);

    ecg::DirectoryLock lock(s.outdir);
    ecg::write_config_file(s.outdir + "/manifest.txt", manifest_from(s));
    ecg::CsvWriter diag(s.outdir + "/diagnostics.csv",
                        {"step", "t", "dt", "mass", "entropy", "umin", "umax", "nu_max",
                         "production_max", "entropy_residual", "idp_clip_frac",
                         "entropy_clip_frac"});
    std::vector<double> scratch;
    const double mass0 = [&] {
        double a = 0.0;
        for (size_t i = 0; i < u.size(); ++i) a += sys.lumped_mass()[i] * u[i];
        return a;
    }();
    const double entropy0 = sys.lumped_entropy(u);
    diagnostics_row(sys, diag, 0, 0.0, 0.0, u, scratch);
    write_state(s, sys, u, "initial");

    ecg::RunOptions opt;
    opt.t_final = s.tfinal;
    opt.cfl = s.cfl;
    opt.integrator = s.integrator;
    opt.on_step = [&](long long step, double t, double dt, const std::vector<double>& v) {
        if (s.output_every > 0 && step % s.output_every == 0) {
            diagnostics_row(sys, diag, step, t, dt, v, scratch);
            char stem[64];
            std::snprintf(stem, sizeof(stem), "state_%08lld", step);
            write_state(s, sys, v, stem);
        }
    };
    const ecg::RunResult res = sys.advance(u, opt);

    diagnostics_row(sys, diag, res.steps, res.t, 0.0, u, scratch);
    write_state(s, sys, u, "solution");

    double mass1 = 0.0, umin = u[0], umax = u[0];
    for (size_t i = 0; i < u.size(); ++i) {
        mass1 += sys.lumped_mass()[i] * u[i];
        umin = std::min(umin, u[i]);
        umax = std::max(umax, u[i]);
    }
    ecg::KeyValueConfig summary;
    summary.set_int("steps", res.steps);
    summary.set_double("t_final", res.t);
    summary.set_double("umin", umin);
    summary.set_double("umax", umax);
    summary.set_double("mass_initial", mass0);
    summary.set_double("mass_final", mass1);
    summary.set_double("mass_drift", mass1 - mass0);
    summary.set_double("entropy_initial", entropy0);
    summary.set_double("entropy_final", sys.lumped_entropy(u));
    summary.set_int("blow_up", res.blew_up ? 1 : 0);
    if (s.bench.exact && !res.blew_up) {
        const double tf = res.t;
        const double err =
            sys.l1_error(u, [&](const ecg::Vec2& x) { return s.bench.exact(x, tf); });
        summary.set_double("l1_error", err);
        std::printf("L1 error vs exact: %.6e\n", err);
    }
    ecg::write_config_file(s.outdir + "/summary.txt", summary);

    std::printf("preset=%s scheme=%s p=%d cells=%d dofs=%d\n", s.bench.name.c_str(),
                s.scheme_name.c_str(), s.degree, s.cells, sys.n_dofs());
    std::printf("steps=%lld t=%.12g range=[%.12g, %.12g] mass drift=%.3e\n", res.steps, res.t,
                umin, umax, mass1 - mass0);
    if (res.blew_up) {
        std::fprintf(stderr, "FAILURE: blow-up detected at t=%.6g after %lld steps\n", res.t,
                     res.steps);
        return kExitBlowUp;
    }
    return kExitOk;
}

int cmd_eoc(const Options& o, const OptionHandles& h) {
    const Settings s = resolve_settings(o, h, /*need_mesh=*/false);
    if (!s.bench.exact)
        throw std::invalid_argument("preset '" + s.bench.name + "' has no exact solution");
    warn_rk76_limiter(s);

    ecg::DirectoryLock lock(s.outdir);
    ecg::write_config_file(s.outdir + "/manifest.txt", [&] {
        ecg::KeyValueConfig m = manifest_from(s);
        std::string list;
        for (size_t i = 0; i < s.dofs_list.size(); ++i) {
            if (i) list += ",";
            list += std::to_string(s.dofs_list[i]);
        }
        m.set("dofs-list", list);
        return m;
    }());
    ecg::CsvWriter csv(s.outdir + "/eoc.csv", {"dofs", "h", "l1", "eoc"});

    std::printf("%10s %16s %8s\n", "N_h", "L1", "EOC");
    double prev_err = 0.0, prev_n1 = 0.0;
    bool blew = false;
    for (size_t k = 0; k < s.dofs_list.size(); ++k) {
        const int cells = cells_from_dofs(s.dofs_list[k], s.bench.dim, s.degree);
        const ecg::Mesh mesh = make_mesh(s, cells);
        ecg::System sys(mesh, s.basis, s.bench.flux, s.scheme);
        std::vector<double> u = sys.initial_state(s.bench);
        ecg::RunOptions opt;
        opt.t_final = s.tfinal;
        opt.cfl = s.cfl;
        opt.integrator = s.integrator;
        const ecg::RunResult res = sys.advance(u, opt);
        if (res.blew_up) {
            std::fprintf(stderr, "FAILURE: blow-up on N_h=%lld at t=%.6g\n", s.dofs_list[k],
                         res.t);
            blew = true;
            break;
        }
        const double tf = res.t;
        const double err =
            sys.l1_error(u, [&](const ecg::Vec2& x) { return s.bench.exact(x, tf); });
        const double n1 = static_cast<double>(cells) * s.degree;
        const double eoc = k ? std::log(prev_err / err) / std::log(n1 / prev_n1) : 0.0;
        if (k)
            std::printf("%10lld %16.8e %8.2f\n", s.dofs_list[k], err, eoc);
        else
            std::printf("%10lld %16.8e %8s\n", s.dofs_list[k], err, "");
        csv.row({static_cast<double>(s.dofs_list[k]), mesh.h()[0], err, eoc});
        prev_err = err;
        prev_n1 = n1;
    }
    return blew ? kExitBlowUp : kExitOk;
}

int cmd_verify(const std::string& suite, unsigned long long seed) {
    resolve_threads();
    std::vector<ecg::SuiteResult> results;
    if (suite == "all")
        results = ecg::run_all_suites(seed);
    else
        results.push_back(ecg::run_suite(suite, seed));
    bool ok = true;
    for (const ecg::SuiteResult& r : results) {
        std::printf("%-14s %8lld checks %6lld failed   worst defect %.3e  %s\n", r.name.c_str(),
                    r.checks, r.failures, r.worst, r.failures ? r.note.c_str() : "");
        ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropy-stable continuous Galerkin solver for scalar conservation laws"};
    app.require_subcommand(1);

    Options ro, eo;
    CLI::App* run = app.add_subcommand("run", "run one benchmark configuration");
    const OptionHandles rh = add_common_options(run, ro);
    CLI::App* eoc = app.add_subcommand("eoc", "mesh-convergence study against the exact solution");
    const OptionHandles ehh = add_common_options(eoc, eo);
    eo.dofs_list.clear();
    OptionHandles eh = ehh;
    eh.dofs_list = eoc->add_option("--dofs-list", eo.dofs_list,
                                   "comma-separated N_h sequence, e.g. 24,48,96");

    std::string suite = "all";
    unsigned long long vseed = 12345;
    CLI::App* verify = app.add_subcommand("verify", "run seeded property suites");
    verify->add_option("--suite", suite,
                       "operators, llf-entropy, idp, decomposition, entropy-laws, rk-order, or all");
    verify->add_option("--seed", vseed, "fuzz seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(ro, rh);
        if (eoc->parsed()) return cmd_eoc(eo, eh);
        return cmd_verify(suite, vseed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
