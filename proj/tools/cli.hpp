#pragma once

// Command-line front end: minimize | sets | shrinkrate | useq | catalog.
// Exit codes: 0 success, 2 usage error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <numbers>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <mdopt/mdopt.hpp>

namespace mdopt::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_numerical = 3;

using json = nlohmann::json;

struct RunConfig {
    std::string command;
    std::string function;
    std::string tau = "exp";
    double p = 1.0;
    std::optional<double> lower_shift;
    std::optional<std::size_t> grid;
    std::optional<std::size_t> mc;
    std::uint64_t seed = 0;
    std::size_t levels = 2;
    std::string out = ".";
    std::vector<double> lower, upper;
    std::vector<std::string> constraints;
    unsigned threads = 0;
    std::string config_file;

    // minimize
    double k0 = 1.0;
    double growth = std::numbers::e;
    std::size_t stages = 16;
    double var_tol = 1e-8;
    std::size_t stall_window = 3;
    // sets / shrinkrate
    std::vector<double> ks;
    double dk = 0.01;
    double min_grad = 0.1;
    // useq
    std::size_t max_iter = 100;
    double rel_tol = 1e-6;
};

class UsageError : public InputError {
public:
    using InputError::InputError;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key = value lines; '#' starts a comment. Keys are long option names.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open '" + path + "'");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config " + path + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw UsageError("config " + path + ":" + std::to_string(lineno) +
                             ": empty key or value");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : args)
        if (a == flag || a.starts_with(flag + "=")) return true;
    return false;
}

struct Problem {
    Objective objective;
    CompactRegion region;
};

inline Problem resolve_problem(const RunConfig& cfg) {
    auto entry = catalog_get(cfg.function);
    std::vector<double> lo = cfg.lower.empty() ? entry.region.lower() : cfg.lower;
    std::vector<double> hi = cfg.upper.empty() ? entry.region.upper() : cfg.upper;
    if (lo.size() != entry.objective.dim || hi.size() != entry.objective.dim)
        throw UsageError("--lower/--upper need " + std::to_string(entry.objective.dim) + " values");
    std::vector<Constraint> cons;
    for (const auto& name : cfg.constraints) cons.push_back(constraint_get(name, lo, hi));
    return {entry.objective, CompactRegion(lo, hi, std::move(cons))};
}

inline IntegratorConfig resolve_integrator(const RunConfig& cfg, std::size_t dim) {
    if (cfg.grid && cfg.mc) throw UsageError("--grid and --mc are mutually exclusive");
    if (cfg.mc) return IntegratorConfig::monte_carlo(*cfg.mc, cfg.seed);
    if (cfg.grid) return IntegratorConfig::grid(dim, *cfg.grid, cfg.levels);
    auto ic = IntegratorConfig::default_for(dim);
    if (ic.is_grid()) ic.refinement_levels = cfg.levels;
    else std::get<MonteCarloSpec>(ic.kind).seed = cfg.seed;
    return ic;
}

inline TauKind resolve_tau(const RunConfig& cfg) {
    if (cfg.tau == "exp") return ExponentialTau{};
    if (cfg.tau == "rational") return RationalTau{cfg.p, cfg.lower_shift};
    throw UsageError("--tau must be 'exp' or 'rational'");
}

inline json integrator_json(const IntegratorConfig& ic) {
    if (const auto* g = std::get_if<GridSpec>(&ic.kind))
        return {{"kind", "grid"}, {"resolution", g->resolution}, {"refinement_levels", ic.refinement_levels}};
    const auto& mc = std::get<MonteCarloSpec>(ic.kind);
    return {{"kind", "monte_carlo"}, {"n", mc.n}, {"seed", mc.seed}};
}

inline json base_config_json(const RunConfig& cfg, const Problem& pb) {
    json j;
    j["command"] = cfg.command;
    j["function"] = cfg.function;
    j["region"] = {{"lower", pb.region.lower()},
                   {"upper", pb.region.upper()},
                   {"constraints", cfg.constraints}};
    j["tau"] = {{"kind", cfg.tau}};
    if (cfg.tau == "rational") j["tau"]["p"] = cfg.p;
    j["seed"] = cfg.seed;
    return j;
}

inline std::filesystem::path prepare_out(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline void write_table(const std::filesystem::path& path, const CsvTable& t) {
    std::ostringstream os;
    write_csv(os, t);
    write_text(path, os.str());
}

inline json tau_resolution(const NascentMD& m) {
    json j = {{"kind", m.exponential() ? "exp" : "rational"}};
    if (!m.exponential()) {
        j["p"] = m.rational_p();
        j["L"] = m.lower_shift();
    }
    return j;
}

// ---------------------------------------------------------------- commands

inline int cmd_minimize(const RunConfig& cfg, std::ostream& out) {
    const auto pb = resolve_problem(cfg);
    ContinuationConfig cc;
    cc.k0 = cfg.k0;
    cc.growth = cfg.growth;
    cc.max_stages = cfg.stages;
    cc.var_tol = cfg.var_tol;
    cc.stall_window = cfg.stall_window;
    cc.tau = resolve_tau(cfg);
    cc.integrator = resolve_integrator(cfg, pb.region.dim());
    cc.validate();
    const auto result = run_continuation(pb.objective, pb.region, cc);

    const auto dir = prepare_out(cfg);
    json conf = base_config_json(cfg, pb);
    conf["integrator"] = integrator_json(*cc.integrator);
    conf["tau"] = tau_resolution(NascentMD(pb.objective, pb.region, cc.tau, cc.k0, *cc.integrator));
    conf["schedule"] = {{"k0", cc.k0},
                        {"growth", cc.growth},
                        {"max_stages", cc.max_stages},
                        {"var_tol", cc.var_tol},
                        {"stall_window", cc.stall_window}};
    write_json(dir / "config.json", conf);
    write_table(dir / "trace.csv", trace_to_rows(result));

    json res;
    res["fstar_estimate"] = result.fstar_estimate;
    res["xstar_estimate"] = result.xstar_estimate;
    res["stop_reason"] = to_string(result.stop_reason);
    json trace = json::array();
    for (const auto& r : result.trace) {
        json row = {{"k", r.k}, {"Ef", r.Ef}, {"Varf", r.Varf}, {"mean_x", r.mean_x}};
        row["D0_measure"] = r.D0_measure ? json(*r.D0_measure) : json(nullptr);
        row["Df_measure"] = r.Df_measure ? json(*r.Df_measure) : json(nullptr);
        trace.push_back(std::move(row));
    }
    res["trace"] = std::move(trace);
    write_json(dir / "result.json", res);
    out << "fstar_estimate " << format_double(result.fstar_estimate) << " after "
        << result.trace.size() << " stages (" << to_string(result.stop_reason) << ")\n";
    return exit_ok;
}

inline std::shared_ptr<const GridMesh> set_mesh(const NascentMD& m, const RunConfig& cfg) {
    if (!m.finest_rule().is_monte_carlo()) return m.finest_rule().mesh;
    auto ic = IntegratorConfig::default_for(m.region().dim());
    std::vector<std::size_t> res = ic.is_grid() ? std::get<GridSpec>(ic.kind).resolution
                                                : std::vector<std::size_t>(m.region().dim(), 16);
    if (cfg.grid) res.assign(m.region().dim(), *cfg.grid);
    return std::make_shared<const GridMesh>(m.region(), res);
}

inline int cmd_sets(const RunConfig& cfg, std::ostream& out) {
    if (cfg.ks.empty()) throw UsageError("sets: --k needs at least one value");
    const auto pb = resolve_problem(cfg);
    const auto ic = resolve_integrator(cfg, pb.region.dim());
    const NascentMD base(pb.objective, pb.region, resolve_tau(cfg), cfg.ks.front(), ic);
    const auto mesh = set_mesh(base, cfg);

    CsvTable measures;
    measures.header = {"k", "kind", "threshold", "threshold_error", "measure", "node_count"};
    json masks;
    masks["mesh"] = {{"resolution", mesh->resolution()},
                     {"lower", pb.region.lower()},
                     {"upper", pb.region.upper()},
                     {"node_count", mesh->size()},
                     {"order", "row-major, axis 0 slowest"}};
    masks["sets"] = json::array();

    CsvTable density;
    density.header = {"node"};
    for (std::size_t j = 0; j < mesh->dim(); ++j) density.header.push_back("x" + std::to_string(j));
    density.header.push_back("f");
    for (double k : cfg.ks) density.header.push_back("m_k=" + format_double(k));
    std::vector<std::vector<double>> dens_cols;

    for (double k : cfg.ks) {
        const auto m = base.with_k(k);
        for (SetKind kind : {SetKind::Df, SetKind::Dtau, SetKind::D0}) {
            const auto s = extract_set(m, kind, mesh);
            measures.rows.push_back({format_double(k), to_string(kind), format_double(s.threshold),
                                     format_double(s.threshold_error), format_double(s.measure),
                                     std::to_string(s.count())});
            const auto rle = rle_encode(s.mask);
            masks["sets"].push_back(
                {{"k", k}, {"kind", to_string(kind)}, {"first", rle.first}, {"runs", rle.runs}});
        }
        std::vector<double> col(mesh->size());
        parallel_for(mesh->size(), [&](std::size_t i) { col[i] = m.density(mesh->node(i)); });
        dens_cols.push_back(std::move(col));
    }
    const auto fvals = evaluate_flat(pb.objective, mesh->coordinates());
    for (std::size_t i = 0; i < mesh->size(); ++i) {
        CsvRow row{std::to_string(i)};
        for (double v : mesh->node(i)) row.push_back(format_double(v));
        row.push_back(format_double(fvals[i]));
        for (const auto& c : dens_cols) row.push_back(format_double(c[i]));
        density.rows.push_back(std::move(row));
    }

    const auto dir = prepare_out(cfg);
    json conf = base_config_json(cfg, pb);
    conf["integrator"] = integrator_json(ic);
    conf["tau"] = tau_resolution(base);
    conf["k"] = cfg.ks;
    write_json(dir / "config.json", conf);
    write_table(dir / "sets.csv", measures);
    write_json(dir / "masks.json", masks);
    write_table(dir / "density.csv", density);
    out << "wrote " << measures.rows.size() << " set rows for " << cfg.ks.size() << " k values\n";
    return exit_ok;
}

inline int cmd_shrinkrate(const RunConfig& cfg, std::ostream& out) {
    if (cfg.ks.size() != 1) throw UsageError("shrinkrate: --k needs exactly one value");
    const auto pb = resolve_problem(cfg);
    const auto ic = resolve_integrator(cfg, pb.region.dim());
    if (!ic.is_grid()) throw UsageError("shrinkrate: needs a grid integrator");
    const NascentMD m(pb.objective, pb.region, resolve_tau(cfg), cfg.ks.front(), ic);
    const auto samples = shrink_rate_samples(m, cfg.dk, cfg.min_grad);

    CsvTable t;
    for (std::size_t j = 0; j < pb.region.dim(); ++j) t.header.push_back("x" + std::to_string(j));
    for (const char* c : {"k", "delta_k", "grad_norm", "theoretical", "empirical", "ratio",
                          "descent_theoretical", "descent_empirical"})
        t.header.push_back(c);
    for (const auto& s : samples) {
        CsvRow row;
        for (double v : s.x) row.push_back(format_double(v));
        for (double v : {s.k, s.delta_k, s.grad_norm, s.theoretical, s.empirical,
                         s.empirical / s.theoretical, s.descent_theoretical, s.descent_empirical})
            row.push_back(format_double(v));
        t.rows.push_back(std::move(row));
    }
    const auto dir = prepare_out(cfg);
    json conf = base_config_json(cfg, pb);
    conf["integrator"] = integrator_json(ic);
    conf["tau"] = tau_resolution(m);
    conf["k"] = cfg.ks.front();
    conf["delta_k"] = cfg.dk;
    conf["min_grad"] = cfg.min_grad;
    write_json(dir / "config.json", conf);
    write_table(dir / "shrinkrate.csv", t);
    out << "wrote " << samples.size() << " boundary samples\n";
    return exit_ok;
}

inline int cmd_useq(const RunConfig& cfg, std::ostream& out) {
    const auto pb = resolve_problem(cfg);
    if (cfg.grid && cfg.mc) throw UsageError("--grid and --mc are mutually exclusive");
    const std::size_t d = pb.region.dim();
    json integ;
    UseqResult r;
    if (cfg.mc) {
        r = useq_run_mc(pb.objective, pb.region, *cfg.mc, cfg.seed, cfg.max_iter, cfg.rel_tol);
        integ = {{"kind", "monte_carlo"}, {"n", *cfg.mc}, {"seed", cfg.seed}};
    } else {
        const std::size_t per_axis =
            cfg.grid ? *cfg.grid : (d == 1 ? 65536 : d == 2 ? 1024 : d == 3 ? 128 : 16);
        std::vector<std::size_t> res(d, per_axis);
        r = useq_run(pb.objective, pb.region, res, cfg.max_iter, cfg.rel_tol);
        integ = {{"kind", "grid"}, {"resolution", res}};
    }
    CsvTable t;
    t.header = {"iteration", "threshold", "measure", "measure_error", "node_count", "best_value"};
    for (const auto& s : r.states)
        t.rows.push_back({std::to_string(s.iteration), format_double(s.threshold),
                          format_double(s.measure), format_double(s.measure_error),
                          std::to_string(s.node_count), format_double(s.best_value)});
    const auto dir = prepare_out(cfg);
    json conf = base_config_json(cfg, pb);
    conf["integrator"] = integ;
    conf["max_iter"] = cfg.max_iter;
    conf["rel_tol"] = cfg.rel_tol;
    conf.erase("tau");
    write_json(dir / "config.json", conf);
    write_table(dir / "useq.csv", t);
    write_json(dir / "result.json", {{"fstar_estimate", r.fstar_estimate},
                                     {"best_value", r.best_value},
                                     {"iterations", r.states.back().iteration},
                                     {"stop_reason", to_string(r.stop_reason)}});
    out << "fstar_estimate " << format_double(r.fstar_estimate) << " after "
        << r.states.back().iteration << " iterations (" << to_string(r.stop_reason) << ")\n";
    return exit_ok;
}

inline int cmd_catalog(std::ostream& out) {
    CsvTable t;
    t.header = {"name", "dim", "lower", "upper", "description"};
    auto join = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
        return s;
    };
    for (const auto& name : catalog_names()) {
        const auto e = catalog_get(name);
        t.rows.push_back({name, std::to_string(e.objective.dim), join(e.region.lower()),
                          join(e.region.upper()), "\"" + e.description + "\""});
    }
    write_csv(out, t);
    return exit_ok;
}

}  // namespace detail

// Runs one command. args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    RunConfig cfg;
    CLI::App app{"Minima-distribution global optimization toolkit", "mdopt"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    auto add_common = [&cfg](CLI::App* sub) {
        sub->add_option("--function", cfg.function, "Catalog function name")->required();
        sub->add_option("--tau", cfg.tau, "tau kind: exp | rational")->check(CLI::IsMember({"exp", "rational"}));
        sub->add_option("--p", cfg.p, "rational tau offset p > 0");
        sub->add_option("--L", cfg.lower_shift, "rational tau lower shift (default: from nodes)");
        sub->add_option("--grid", cfg.grid, "grid points per axis")->check(CLI::Range(2, 1 << 24));
        sub->add_option("--mc", cfg.mc, "Monte Carlo sample count")->check(CLI::Range(100, 1 << 30));
        sub->add_option("--seed", cfg.seed, "Monte Carlo seed");
        sub->add_option("--levels", cfg.levels, "grid refinement levels for error estimates")
            ->check(CLI::Range(1, 8));
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--lower", cfg.lower, "region lower bounds")->delimiter(',');
        sub->add_option("--upper", cfg.upper, "region upper bounds")->delimiter(',');
        sub->add_option("--constraint", cfg.constraints, "constraint catalog name(s)")->delimiter(',');
        sub->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
        sub->add_option("--config", cfg.config_file, "key = value config file; flags win");
    };

    auto* minimize = app.add_subcommand("minimize", "run the k-continuation");
    add_common(minimize);
    minimize->add_option("--k0", cfg.k0, "initial k");
    minimize->add_option("--growth", cfg.growth, "k ratio between stages");
    minimize->add_option("--stages", cfg.stages, "maximum number of stages");
    minimize->add_option("--var-tol", cfg.var_tol, "stop when Var(f) falls below this");
    minimize->add_option("--stall-window", cfg.stall_window, "stalled stages before stopping (0 = off)");

    const CLI::Validator non_empty(
        [](const std::string& v) { return v.empty() ? std::string("empty value") : std::string(); }, "", "non-empty");

    auto* sets = app.add_subcommand("sets", "extract significant sets for a list of k");
    add_common(sets);
    sets->add_option("--k", cfg.ks, "comma-separated k values")->delimiter(',')->check(non_empty)->required();

    auto* shrink = app.add_subcommand("shrinkrate", "measure the shrink rate of D0");
    add_common(shrink);
    shrink->add_option("--k", cfg.ks, "k")->check(non_empty)->required();
    shrink->add_option("--dk", cfg.dk, "k increment");
    shrink->add_option("--min-grad", cfg.min_grad, "skip boundary points with smaller ||grad f||");

    auto* useq = app.add_subcommand("useq", "run the uniform-distribution sequence");
    add_common(useq);
    useq->add_option("--max-iter", cfg.max_iter, "maximum iterations");
    useq->add_option("--rel-tol", cfg.rel_tol, "relative threshold improvement to stop at");

    auto* catalog = app.add_subcommand("catalog", "list catalog functions");

    try {
        // Config entries go in front of the user's flags, and only for keys
        // the user did not pass.
        for (std::size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] != "--config") continue;
            CLI::App* sub = app.get_subcommand_no_throw(args.front());
            if (!sub) break;
            std::vector<std::string> injected;
            for (const auto& [key, value] : detail::read_config_file(args[i + 1])) {
                if (key == "config" || !sub->get_option_no_throw("--" + key))
                    throw UsageError("config " + args[i + 1] + ": unknown key '" + key + "'");
                if (detail::given_on_command_line(args, key)) continue;
                injected.push_back("--" + key);
                injected.push_back(value);
            }
            args.insert(args.begin() + 1, injected.begin(), injected.end());
            break;
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        set_max_threads(cfg.threads);
        if (catalog->parsed()) return detail::cmd_catalog(out);
        if (minimize->parsed()) {
            cfg.command = "minimize";
            return detail::cmd_minimize(cfg, out);
        }
        if (sets->parsed()) {
            cfg.command = "sets";
            return detail::cmd_sets(cfg, out);
        }
        if (shrink->parsed()) {
            cfg.command = "shrinkrate";
            return detail::cmd_shrinkrate(cfg, out);
        }
        if (useq->parsed()) {
            cfg.command = "useq";
            return detail::cmd_useq(cfg, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.is_usage() ? exit_usage : exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_usage;
}

}  // namespace mdopt::cli
