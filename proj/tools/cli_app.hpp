#pragma once

// Command-line front end: bound, compare, verify, simulate.
//
// Exit codes: 0 success, 1 internal error, 2 usage/validation error,
// 3 verification failure.

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exch/exch.hpp"

namespace exch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitVerifyFailed = 3;

inline constexpr const char* kThreadsEnv = "EXCH_THREADS";

/// Usage error that names the offending flag.
class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& flag, const std::string& what)
        : std::runtime_error(flag + ": " + what) {}
};

/// %.17g, round-trip safe.
/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string hex_digest(std::span<const double> values) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << source_digest(values, {});
    return s.str();
}

/// One real per line; blank lines and '#' comments ignored.
inline std::vector<double> read_values_file(const std::string& path, const std::string& flag) {
    std::ifstream in(path);
    if (!in) throw UsageError(flag, "cannot open '" + path + "'");
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string token = line.substr(first, last - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) {
            throw UsageError(flag, "'" + path + "' line " + std::to_string(lineno) +
                                       ": not a real number: '" + token + "'");
        }
        values.push_back(v);
    }
    return values;
}

/// Inline comma-separated list, or a path to a values file.
inline std::vector<double> read_values(const std::string& arg, const std::string& flag) {
    if (std::filesystem::is_regular_file(arg)) return read_values_file(arg, flag);
    std::vector<double> values;
    std::stringstream ss(arg);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        token = token.substr(first, token.find_last_not_of(" \t") - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) throw UsageError(flag, "not a real number: '" + token + "'");
        values.push_back(v);
    }
    return values;
}

inline unsigned default_threads() {
    if (const char* env = std::getenv(kThreadsEnv)) {
        try {
            return static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Collects CSV rows and the run manifest, then writes them out.
class Report {
public:
    Report(std::string command, const std::vector<std::string>& argv) : command_(std::move(command)) {
        for (const auto& a : argv) params_ += (params_.empty() ? "" : " ") + a;
    }

    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void add_digest(const std::string& name, std::span<const double> values) {
        digests_.emplace_back(name, hex_digest(values));
    }
    void note(const std::string& line) { notes_.push_back(line); }
    void header(std::string h) { header_ = std::move(h); }
    void row(std::string r) { rows_.push_back(std::move(r)); }

    void write(std::ostream& out) const {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        out << "# command: " << command_ << '\n';
        out << "# params: " << params_ << '\n';
        out << "# version: " << kVersion << '\n';
        out << "# seed: " << (seed_ ? std::to_string(*seed_) : std::string("none")) << '\n';
        out << "# timestamp: " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
        for (const auto& [name, digest] : digests_) out << "# digest " << name << ": " << digest << '\n';
        for (const auto& n : notes_) out << "# " << n << '\n';
        out << header_ << '\n';
        for (const auto& r : rows_) out << r << '\n';
    }

private:
    std::string command_;
    std::string params_;
    std::optional<std::uint64_t> seed_;
    std::vector<std::pair<std::string, std::string>> digests_;
    std::vector<std::string> notes_;
    std::string header_;
    std::vector<std::string> rows_;
};

inline void emit(const Report& report, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        report.write(out);
        return;
    }
    std::ofstream file(out_path);
    if (!file) throw UsageError("--out", "cannot open '" + out_path + "' for writing");
    report.write(file);
}

inline void check_deltas(const std::vector<double>& deltas) {
    if (deltas.empty()) throw UsageError("--delta", "at least one value is required");
    for (double d : deltas) {
        if (!(d > 0.0 && d < 1.0)) throw UsageError("--delta", "must lie strictly inside (0, 1)");
    }
}

inline bool needs_big_n(BoundKind k) {
    return k == BoundKind::serfling || k == BoundKind::hoeffding_exch ||
           k == BoundKind::bernstein_exch;
}

inline bool needs_sigma2(BoundKind k) {
    return k == BoundKind::bernstein_iid || k == BoundKind::bernstein_exch;
}

/// Shared inputs of `bound` and `compare`.
struct BoundInputs {
    std::string weights;
    std::optional<std::size_t> big_n;
    std::vector<double> deltas;
    std::optional<double> sigma2;
    std::string population;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--weights", weights, "weights: file (one per line) or inline list 1,-1")
            ->required();
        cmd->add_option("--bigN", big_n, "total number of exchangeable variables N");
        cmd->add_option("--delta", deltas, "tail level in (0,1); repeatable")->required();
        cmd->add_option("--sigma2", sigma2, "population variance sigma^2 (Bernstein kinds)");
        cmd->add_option("--population", population, "population file (Polaczyk, Bernstein)");
        cmd->add_option("--out", out, "write CSV here instead of stdout");
    }

    BoundSpec spec(BoundKind kind, Report& report) const {
        BoundSpec s;
        s.kind = kind;
        s.weights = read_values(weights, "--weights");
        if (s.weights.empty()) throw UsageError("--weights", "empty weight list");
        report.add_digest("weights", s.weights);
        if (!population.empty()) {
            const auto values = read_values(population, "--population");
            try {
                s.population = population_stats(values);
            } catch (const std::exception& e) {
                throw UsageError("--population", e.what());
            }
            report.add_digest("population", values);
        }
        if (big_n) {
            if (*big_n < s.weights.size()) {
                throw UsageError("--bigN", "must be >= the number of weights");
            }
            if (s.population && s.population->size() != *big_n) {
                throw UsageError("--bigN", "disagrees with the population size");
            }
        }
        if (sigma2 && !(*sigma2 >= 0.0 && *sigma2 <= 1.0)) {
            throw UsageError("--sigma2", "must lie in [0, 1]");
        }
        s.big_n = big_n;
        s.sigma2 = sigma2;
        return s;
    }
};

/// Checks that a kind's required flags are present.
inline void require_flags(BoundKind kind, const BoundInputs& in) {
    if (needs_big_n(kind) && !in.big_n) {
        throw UsageError("--bigN", "required for kind " + std::string(to_string(kind)));
    }
    if (needs_sigma2(kind) && !in.sigma2 && in.population.empty()) {
        throw UsageError("--sigma2", "required for kind " + std::string(to_string(kind)));
    }
    if (kind == BoundKind::polaczyk && in.population.empty()) {
        throw UsageError("--population", "required for kind polaczyk");
    }
}

inline BoundKind parse_kind_flag(const std::string& name, const std::string& flag) {
    if (auto k = parse_bound_kind(name)) return *k;
    throw UsageError(flag, "unknown bound kind '" + name + "'");
}

// ---------------------------------------------------------------------------

inline int cmd_bound(const BoundInputs& in, const std::string& kind_name,
                     const std::vector<std::string>& argv, std::ostream& out) {
    const BoundKind kind = parse_kind_flag(kind_name, "--kind");
    check_deltas(in.deltas);
    require_flags(kind, in);
    Report report("bound", argv);
    const BoundSpec spec = in.spec(kind, report);
    report.header("kind,n,N,delta,sided,radius");
    for (double delta : in.deltas) {
        const TailRadius r = evaluate_tail(spec, delta);
        report.row(std::string(to_string(kind)) + "," + std::to_string(spec.weights.size()) + "," +
                   (spec.big_n ? std::to_string(*spec.big_n) : std::string()) + "," + fmt(delta) +
                   "," + std::string(to_string(r.sided)) + "," + fmt(r.radius));
    }
    emit(report, in.out, out);
    return kExitOk;
}

inline int cmd_compare(const BoundInputs& in, bool normalize_sided,
                       const std::vector<std::string>& argv, std::ostream& out) {
    check_deltas(in.deltas);
    if (!in.big_n) throw UsageError("--bigN", "required by compare");
    Report report("compare", argv);
    if (normalize_sided) {
        report.note("two-sided rows relabelled one-sided at the same delta");
    }
    const BoundSpec base = in.spec(BoundKind::hoeffding_exch, report);
    std::vector<BoundSpec> specs;
    for (BoundKind kind : kAllBoundKinds) {
        BoundSpec spec = base;
        spec.kind = kind;
        try {
            (void)evaluate_tail(spec, in.deltas.front());
            specs.push_back(std::move(spec));
        } catch (const std::exception& e) {
            report.note("skipped " + std::string(to_string(kind)) + ": " + e.what());
        }
    }
    report.header("kind,delta,sided,radius,ratio_to_hoeffding_exch");
    for (double delta : in.deltas) {
        const double reference = evaluate_tail(base, delta).radius;
        std::vector<TailRadius> radii;
        for (const auto& spec : specs) radii.push_back(evaluate_tail(spec, delta));
        std::stable_sort(radii.begin(), radii.end(),
                         [](const TailRadius& a, const TailRadius& b) { return a.radius < b.radius; });
        for (const auto& r : radii) {
            const Sidedness sided = normalize_sided ? Sidedness::one_sided : r.sided;
            report.row(std::string(to_string(r.kind)) + "," + fmt(delta) + "," +
                       std::string(to_string(sided)) + "," + fmt(r.radius) + "," +
                       fmt(r.radius / reference));
        }
    }
    emit(report, in.out, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct VerifyInputs {
    std::string family;
    std::string population;
    std::string weights;
    std::size_t lambda_grid = 101;
    std::uint64_t seed = 0;
    std::size_t instances = 100;
    std::size_t big_n = 5;
    std::optional<std::size_t> n;
    std::optional<double> lambda;
    double clip = kDefaultDomainClip;
    std::string plot_data;
    std::string out;
    unsigned threads = 1;
};

inline const std::vector<std::string>& verify_families() {
    static const std::vector<std::string> families = {
        "hoeffding-iid",  "bernstein-iid",        "serfling",
        "hoeffding-exch", "hoeffding-exch-nonneg", "bernstein-exch",
        "martingale-hoeffding", "martingale-bernstein", "suffix-variance"};
    return families;
}

struct VerifyRow {
    double margin = 0.0;
    std::optional<double> at_lambda;
    bool pass = true;
};

inline int cmd_verify(const VerifyInputs& in, const std::vector<std::string>& argv,
                      std::ostream& out) {
    const auto& families = verify_families();
    if (std::find(families.begin(), families.end(), in.family) == families.end()) {
        throw UsageError("--family", "unknown family '" + in.family + "'");
    }
    if (in.lambda_grid == 0) throw UsageError("--lambda-grid", "must be >= 1");
    if (!(in.clip > 0.0 && in.clip < 1.0)) throw UsageError("--clip", "must lie in (0, 1)");
    const bool fixed = !in.population.empty();
    const bool martingale = in.family.rfind("martingale-", 0) == 0;
    const bool suffix = in.family == "suffix-variance";
    if (!fixed && !in.weights.empty()) {
        throw UsageError("--weights", "a fixed instance needs --population as well");
    }
    if (fixed && in.weights.empty() && !suffix) {
        throw UsageError("--weights", "required with --population");
    }
    if (!fixed) {
        if (in.instances == 0) throw UsageError("--instances", "must be >= 1");
        if (in.big_n < 1) throw UsageError("--bigN", "must be >= 1");
        if (in.n && (*in.n < 1 || *in.n > in.big_n)) throw UsageError("--n", "need 1 <= n <= N");
        if (martingale && in.n && *in.n != in.big_n) {
            throw UsageError("--n", "martingale checks need n = N");
        }
    }

    Report report("verify", argv);
    report.set_seed(in.seed);
    report.header("instance,family,n,N,min_margin,at_lambda,pass");
    std::ofstream plot;
    if (!in.plot_data.empty()) {
        plot.open(in.plot_data);
        if (!plot) throw UsageError("--plot-data", "cannot open '" + in.plot_data + "'");
        plot << "instance,lambda,exact_log_mgf,bound_exponent\n";
    }

    const std::size_t count = fixed ? 1 : in.instances;
    bool all_pass = true;
    for (std::size_t inst = 0; inst < count; ++inst) {
        std::optional<Population> pop;
        std::optional<WeightVector> w;
        RandomStream rng(in.seed, inst);
        if (fixed) {
            const auto xs = read_values(in.population, "--population");
            try {
                pop = population_stats(xs);
            } catch (const std::exception& e) {
                throw UsageError("--population", e.what());
            }
            report.add_digest("population", xs);
            if (!in.weights.empty()) {
                auto ws = read_values(in.weights, "--weights");
                if (ws.empty()) throw UsageError("--weights", "empty weight list");
                report.add_digest("weights", ws);
                w.emplace(std::move(ws));
            } else {
                w.emplace(std::vector<double>(pop->size(), 1.0));
            }
        } else {
            const std::size_t n = in.n.value_or(in.big_n);
            Instance instance =
                random_instance(rng, in.big_n, n, in.family == "hoeffding-exch-nonneg");
            pop = std::move(instance.population);
            if (in.family == "serfling") {
                w.emplace(std::vector<double>(n, 1.0));
            } else {
                w = std::move(instance.weights);
            }
        }

        VerifyRow result;
        if (suffix) {
            const auto r = suffix_variance_domination_check(*pop);
            result = {-r.worst_gap, std::nullopt, r.pass};
        } else if (martingale) {
            const auto family = in.family == "martingale-hoeffding" ? MartingaleFamily::hoeffding
                                                                    : MartingaleFamily::bernstein;
            double lambda = 0.0;
            if (in.lambda) {
                lambda = *in.lambda;
            } else {
                const double limit = family == MartingaleFamily::bernstein
                                         ? 0.999 * conservative_bernstein_lambda(*w)
                                         : (w->norm2() > 0.0 ? 4.0 / w->norm2() : 1.0);
                lambda = rng.uniform(-limit, limit);
            }
            const auto r = martingale_check(*pop, *w, lambda, family);
            result = {1.0 - r.worst_ratio, lambda, r.pass};
            if (!r.asserted) report.note("instance " + std::to_string(inst) + ": lambda outside the asserted region");
        } else {
            BoundSpec spec;
            spec.kind = *parse_bound_kind(in.family);
            spec.weights.assign(w->entries().begin(), w->entries().end());
            spec.big_n = pop->size();
            spec.sigma2 = pop->variance();
            spec.population = *pop;
            const MgfCertificate cert = *certificate_for(spec);
            ScanOptions opts;
            opts.domain_clip = in.clip;
            const ScanReport r =
                mgf_dominance_scan(exact_law(*pop, *w, in.threads), *w, cert, in.lambda_grid, opts);
            result = {r.min_margin, r.argmin_lambda, r.pass};
            if (plot) {
                for (const auto& p : r.points) {
                    plot << inst << ',' << fmt(p.lambda) << ',' << fmt(p.exact_log_mgf) << ','
                         << fmt(p.bound_exponent) << '\n';
                }
            }
        }
        all_pass = all_pass && result.pass;
        report.row(std::to_string(inst) + "," + in.family + "," + std::to_string(w->size()) + "," +
                   std::to_string(pop->size()) + "," + fmt(result.margin) + "," +
                   (result.at_lambda ? fmt(*result.at_lambda) : std::string()) + "," +
                   (result.pass ? "PASS" : "FAIL"));
    }
    emit(report, in.out, out);
    return all_pass ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------

struct SimulateInputs {
    std::string population;
    std::string weights;
    std::optional<std::size_t> n;
    std::size_t replicates = 10000;
    std::uint64_t seed = 0;
    std::vector<double> deltas{0.05};
    std::string kinds = "hoeffding-exch,bernstein-exch";
    std::string out;
    unsigned threads = 1;
};

inline int cmd_simulate(const SimulateInputs& in, const std::vector<std::string>& argv,
                        std::ostream& out) {
    check_deltas(in.deltas);
    if (in.replicates < 1) throw UsageError("--replicates", "must be >= 1");
    Report report("simulate", argv);
    report.set_seed(in.seed);

    const auto xs = read_values(in.population, "--population");
    std::optional<Population> pop;
    try {
        pop = population_stats(xs);
    } catch (const std::exception& e) {
        throw UsageError("--population", e.what());
    }
    report.add_digest("population", xs);

    auto ws = read_values(in.weights, "--weights");
    if (ws.empty()) throw UsageError("--weights", "empty weight list");
    if (in.n) {
        if (ws.size() == 1) {
            ws.assign(*in.n, ws.front());
        } else if (ws.size() != *in.n) {
            throw UsageError("--n", "disagrees with the number of weights");
        }
    }
    if (ws.size() > pop->size()) throw UsageError("--n", "n exceeds the population size N");
    report.add_digest("weights", ws);

    std::vector<BoundKind> kinds;
    std::stringstream ss(in.kinds);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) kinds.push_back(parse_kind_flag(name, "--kinds"));
    }
    if (kinds.empty()) throw UsageError("--kinds", "at least one kind is required");

    SimConfig config{*pop, WeightVector(std::move(ws)), in.replicates, in.seed, in.threads, false};
    std::vector<CoverageRow> rows;
    try {
        rows = coverage_experiment(config, kinds, in.deltas);
    } catch (const PreconditionError& e) {
        throw UsageError("--kinds", e.what());
    } catch (const DomainError& e) {
        throw UsageError("--kinds", e.what());
    }

    report.header("kind,delta,radius,empirical_freq,ci_lo,ci_hi,pass");
    bool all_pass = true;
    for (const auto& r : rows) {
        all_pass = all_pass && r.pass;
        report.row(std::string(to_string(r.kind)) + "," + fmt(r.delta) + "," + fmt(r.radius) + "," +
                   fmt(r.frequency) + "," + fmt(r.ci.lo) + "," + fmt(r.ci.hi) + "," +
                   (r.pass ? "PASS" : "FAIL"));
    }
    emit(report, in.out, out);
    return all_pass ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concentration bounds for weighted sums of exchangeable variables", "exchbound"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    unsigned threads = default_threads();
    app.add_option("--threads", threads, "worker threads (0 = auto; default $EXCH_THREADS or 1)");

    BoundInputs bound_in;
    std::string kind;
    auto* bound = app.add_subcommand("bound", "evaluate one tail bound");
    bound->add_option("--kind", kind, "bound family")->required();
    bound_in.attach(bound);

    BoundInputs compare_in;
    bool normalize_sided = false;
    auto* compare = app.add_subcommand("compare", "evaluate every applicable bound");
    compare_in.attach(compare);
    compare->add_flag("--normalize-sided", normalize_sided,
                      "report two-sided radii as one-sided at the same delta");

    VerifyInputs verify_in;
    auto* verify = app.add_subcommand("verify", "exact verification by enumeration");
    verify->add_option("--family", verify_in.family, "certificate or check to verify")->required();
    verify->add_option("--population", verify_in.population, "population file");
    verify->add_option("--weights", verify_in.weights, "weights file or inline list");
    verify->add_option("--lambda-grid", verify_in.lambda_grid, "lambda grid size (default 101)");
    verify->add_option("--seed", verify_in.seed, "seed for randomized instances");
    verify->add_option("--instances", verify_in.instances, "number of randomized instances");
    verify->add_option("--bigN", verify_in.big_n, "population size for randomized instances");
    verify->add_option("--n", verify_in.n, "draws for randomized instances (default N)");
    verify->add_option("--lambda", verify_in.lambda, "lambda for martingale checks");
    verify->add_option("--clip", verify_in.clip, "fraction of a bounded lambda domain scanned");
    verify->add_option("--plot-data", verify_in.plot_data,
                       "write long-format lambda,exact_log_mgf,bound_exponent CSV here");
    verify->add_option("--out", verify_in.out, "write CSV here instead of stdout");

    SimulateInputs sim_in;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo coverage of tail bounds");
    simulate_cmd->add_option("--population", sim_in.population, "population file")->required();
    simulate_cmd->add_option("--weights", sim_in.weights, "weights file or inline list")->required();
    simulate_cmd->add_option("--n", sim_in.n, "draws per replicate");
    simulate_cmd->add_option("--replicates", sim_in.replicates, "replicates (default 10000)");
    simulate_cmd->add_option("--seed", sim_in.seed, "RNG seed");
    simulate_cmd->add_option("--delta", sim_in.deltas, "tail level; repeatable");
    simulate_cmd->add_option("--kinds", sim_in.kinds, "comma-separated bound kinds");
    simulate_cmd->add_option("--out", sim_in.out, "write CSV here instead of stdout");

    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    verify_in.threads = threads;
    sim_in.threads = threads;
    try {
        if (bound->parsed()) return cmd_bound(bound_in, kind, args, out);
        if (compare->parsed()) return cmd_compare(compare_in, normalize_sided, args, out);
        if (verify->parsed()) return cmd_verify(verify_in, args, out);
        if (simulate_cmd->parsed()) return cmd_simulate(sim_in, args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PreconditionError& e) {
        err << "error: precondition failed: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ResourceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace exch::cli
