#pragma once

// Exact small-instance ground truth. Draws are enumerated as ordered
// selections of distinct population indices, so repeated population values
// carry their multiplicity automatically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "exch/bounds.hpp"
#include "exch/core_numerics.hpp"
#include "exch/errors.hpp"
#include "exch/parallel.hpp"
#include "exch/rng.hpp"

namespace exch {

/// Maximum number of ordered selections any exhaustive routine will visit.
inline constexpr double kEnumerationBudget = 1e7;

/// Atoms closer than this are merged.
inline constexpr double kAtomMergeTolerance = 1e-12;

/// N! / (N - n)!, as a double so that overflow is not an issue.
inline double ordered_selection_count(std::size_t N, std::size_t n) {
    double count = 1.0;
    for (std::size_t k = 0; k < n; ++k) count *= static_cast<double>(N - k);
    return count;
}

namespace detail {

inline void check_budget(std::size_t N, std::size_t n, const char* who) {
    const double count = ordered_selection_count(N, n);
    if (count > kEnumerationBudget) {
        std::ostringstream msg;
        msg << who << ": enumeration of " << std::setprecision(0) << std::fixed << count
            << " orderings exceeds the budget of " << kEnumerationBudget;
        throw ResourceError(msg.str(), count);
    }
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

/// FNV-1a over the raw bytes of (x, w); used as a cache key.
inline std::uint64_t source_digest(std::span<const double> x, std::span<const double> w) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const std::uint64_t nx = x.size();
    const std::uint64_t nw = w.size();
    h = detail::fnv1a(h, &nx, sizeof nx);
    h = detail::fnv1a(h, x.data(), x.size_bytes());
    h = detail::fnv1a(h, &nw, sizeof nw);
    h = detail::fnv1a(h, w.data(), w.size_bytes());
    return h;
}

struct Atom {
    double value = 0.0;
    double probability = 0.0;
};

/// Exact law of S = sum_i w_i (X_i - xbar) when (X_1, ..., X_n) is drawn
/// uniformly without replacement from the population (xbar = full mean).
class ExactLaw {
public:
    ExactLaw() = default;
    ExactLaw(std::vector<Atom> atoms, std::size_t n, std::size_t N, std::uint64_t digest)
        : atoms_(std::move(atoms)), n_(n), N_(N), digest_(digest) {}

    std::span<const Atom> atoms() const noexcept { return atoms_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t N() const noexcept { return N_; }
    std::uint64_t source_digest() const noexcept { return digest_; }

    double total_probability() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.probability;
        return s;
    }
    double mean() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.probability * a.value;
        return s;
    }
    double variance() const {
        const double m = mean();
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.probability * (a.value - m) * (a.value - m);
        return s;
    }
    double min_value() const { return atoms_.front().value; }
    double max_value() const { return atoms_.back().value; }

private:
    std::vector<Atom> atoms_;  // sorted by value
    std::size_t n_ = 0;
    std::size_t N_ = 0;
    std::uint64_t digest_ = 0;
};

inline ExactLaw exact_law(const Population& x, const WeightVector& w, unsigned threads = 1) {
    const std::size_t N = x.size();
    const std::size_t n = w.size();
    if (n > N) throw DomainError("exact_law: need n <= N");
    detail::check_budget(N, n, "exact_law");

    std::vector<double> centered(N);
    for (std::size_t i = 0; i < N; ++i) centered[i] = x[i] - x.mean();

    struct Counted {
        double value;
        std::uint64_t count;
    };
    auto merge_sorted = [](std::vector<Counted>& items) {
        std::sort(items.begin(), items.end(),
                  [](const Counted& a, const Counted& b) { return a.value < b.value; });
        std::vector<Counted> out;
        for (const Counted& c : items) {
            if (!out.empty() && c.value - out.back().value <= kAtomMergeTolerance) {
                out.back().count += c.count;
            } else {
                out.push_back(c);
            }
        }
        items = std::move(out);
    };

    // One block per choice of the first draw.
    std::vector<std::vector<Counted>> blocks = parallel_map(N, threads, [&](std::size_t first) {
        std::vector<Counted> values;
        std::vector<char> used(N, 0);
        used[first] = 1;
        const double start = w[0] * centered[first];
        auto dfs = [&](auto&& self, std::size_t depth, double partial) -> void {
            if (depth == n) {
                values.push_back({partial, 1});
                return;
            }
            for (std::size_t j = 0; j < N; ++j) {
                if (used[j]) continue;
                used[j] = 1;
                self(self, depth + 1, partial + w[depth] * centered[j]);
                used[j] = 0;
            }
        };
        dfs(dfs, 1, start);
        merge_sorted(values);
        return values;
    });

    std::vector<Counted> all;
    for (auto& b : blocks) all.insert(all.end(), b.begin(), b.end());
    merge_sorted(all);

    const double total = ordered_selection_count(N, n);
    std::vector<Atom> atoms;
    atoms.reserve(all.size());
    for (const Counted& c : all) atoms.push_back({c.value, static_cast<double>(c.count) / total});
    return ExactLaw(std::move(atoms), n, N, source_digest(x.values(), w.entries()));
}

/// E[exp(lambda S)].
inline double exact_mgf(const ExactLaw& law, double lambda) {
    double s = 0.0;
    for (const Atom& a : law.atoms()) s += a.probability * std::exp(lambda * a.value);
    return s;
}

/// log E[exp(lambda S)], evaluated with a max shift.
inline double exact_log_mgf(const ExactLaw& law, double lambda) {
    double shift = -std::numeric_limits<double>::infinity();
    for (const Atom& a : law.atoms()) shift = std::max(shift, lambda * a.value);
    double s = 0.0;
    for (const Atom& a : law.atoms()) s += a.probability * std::exp(lambda * a.value - shift);
    return shift + std::log(s);
}

/// P(S >= t). Atoms within the merge tolerance below t count as hits.
inline double exact_tail(const ExactLaw& law, double t) {
    double p = 0.0;
    for (const Atom& a : law.atoms()) {
        if (a.value >= t - kAtomMergeTolerance) p += a.probability;
    }
    return std::min(p, 1.0);
}

// ---------------------------------------------------------------------------
// On-disk cache for exact laws

inline constexpr const char* kLawSchemaTag = "exch-exact-law v1";

inline void save_law(const ExactLaw& law, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_law: cannot open " + path.string());
    out << kLawSchemaTag << '\n'
        << law.n() << ' ' << law.N() << ' ' << law.source_digest() << ' ' << law.atoms().size()
        << '\n';
    out << std::setprecision(17);
    for (const Atom& a : law.atoms()) out << a.value << ' ' << a.probability << '\n';
    if (!out) throw std::runtime_error("save_law: write failed for " + path.string());
}

inline ExactLaw load_law(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_law: cannot open " + path.string());
    std::string tag;
    std::getline(in, tag);
    if (tag != kLawSchemaTag) {
        throw ValidationError("load_law: unexpected schema tag '" + tag + "' in " + path.string());
    }
    std::size_t n = 0, N = 0, count = 0;
    std::uint64_t digest = 0;
    if (!(in >> n >> N >> digest >> count)) {
        throw ValidationError("load_law: malformed header in " + path.string());
    }
    std::vector<Atom> atoms(count);
    for (Atom& a : atoms) {
        if (!(in >> a.value >> a.probability)) {
            throw ValidationError("load_law: truncated atom list in " + path.string());
        }
    }
    return ExactLaw(std::move(atoms), n, N, digest);
}

/// exact_law with a directory cache keyed by the source digest.
inline ExactLaw cached_exact_law(const std::filesystem::path& cache_dir, const Population& x,
                                 const WeightVector& w, unsigned threads = 1) {
    std::ostringstream name;
    name << std::hex << std::setw(16) << std::setfill('0') << source_digest(x.values(), w.entries())
         << ".law";
    const std::filesystem::path path = cache_dir / name.str();
    if (std::filesystem::exists(path)) {
        ExactLaw law = load_law(path);
        if (law.source_digest() == source_digest(x.values(), w.entries()) && law.n() == w.size() &&
            law.N() == x.size()) {
            return law;
        }
    }
    ExactLaw law = exact_law(x, w, threads);
    std::filesystem::create_directories(cache_dir);
    save_law(law, path);
    return law;
}

// ---------------------------------------------------------------------------
// MGF dominance scan

inline constexpr double kMarginTolerance = 1e-10;
inline constexpr double kDefaultDomainClip = 0.995;

struct ScanPoint {
    double lambda = 0.0;
    double exact_log_mgf = 0.0;
    double bound_exponent = 0.0;
    double margin = 0.0;  // bound_exponent - exact_log_mgf
};

struct ScanReport {
    BoundKind kind = BoundKind::hoeffding_exch;
    std::vector<ScanPoint> points;
    double min_margin = std::numeric_limits<double>::infinity();
    double argmin_lambda = 0.0;
    bool pass = true;
};

struct ScanOptions {
    /// Fraction of a bounded domain's half-width covered by the grid.
    double domain_clip = kDefaultDomainClip;
    /// Half-width for unbounded domains; defaults to 4 / ||w||_2.
    std::optional<double> unbounded_half_width;
};

/// Symmetric grid of `grid_size` points on [-h, h].
inline std::vector<double> lambda_grid(double half_width, std::size_t grid_size) {
    std::vector<double> grid;
    if (grid_size == 0) return grid;
    if (grid_size == 1) return {0.0};
    grid.reserve(grid_size);
    for (std::size_t j = 0; j < grid_size; ++j) {
        grid.push_back(-half_width +
                       2.0 * half_width * static_cast<double>(j) / static_cast<double>(grid_size - 1));
    }
    return grid;
}

inline double scan_half_width(const MgfCertificate& cert, const WeightVector& w,
                              const ScanOptions& opts) {
    if (cert.bounded_domain()) return opts.domain_clip * cert.domain_half_width();
    if (opts.unbounded_half_width) return *opts.unbounded_half_width;
    return w.norm2() > 0.0 ? 4.0 / w.norm2() : 1.0;
}

inline ScanReport mgf_dominance_scan(const ExactLaw& law, const WeightVector& w,
                                     const MgfCertificate& cert, std::size_t grid_size,
                                     const ScanOptions& opts = {}) {
    if (grid_size == 0) throw DomainError("mgf_dominance_scan: grid_size must be >= 1");
    ScanReport report;
    report.kind = cert.kind();
    for (double lambda : lambda_grid(scan_half_width(cert, w, opts), grid_size)) {
        ScanPoint p;
        p.lambda = lambda;
        p.exact_log_mgf = exact_log_mgf(law, lambda);
        p.bound_exponent = cert.exponent(lambda);
        p.margin = p.bound_exponent - p.exact_log_mgf;
        if (p.margin < report.min_margin) {
            report.min_margin = p.margin;
            report.argmin_lambda = lambda;
        }
        report.points.push_back(p);
    }
    report.pass = report.min_margin >= -kMarginTolerance;
    return report;
}

inline ScanReport mgf_dominance_scan(const Population& x, const WeightVector& w,
                                     const MgfCertificate& cert, std::size_t grid_size,
                                     const ScanOptions& opts = {}, unsigned threads = 1) {
    return mgf_dominance_scan(exact_law(x, w, threads), w, cert, grid_size, opts);
}

// ---------------------------------------------------------------------------
// Supermartingale checks

enum class MartingaleFamily { hoeffding, bernstein };

inline std::string_view to_string(MartingaleFamily f) {
    return f == MartingaleFamily::hoeffding ? "hoeffding" : "bernstein";
}

/// M_0, ..., M_n along one ordering of the population.
struct MartingalePath {
    MartingaleFamily family = MartingaleFamily::hoeffding;
    std::vector<double> values;
};

struct MartingaleReport {
    MartingaleFamily family = MartingaleFamily::hoeffding;
    double lambda = 0.0;
    double worst_ratio = 0.0;  // max over prefixes of E[M_k | prefix] / M_{k-1}
    std::size_t worst_step = 0;
    std::size_t prefixes_checked = 0;
    bool asserted = true;  // false in the region between the two stated lambda limits
    bool within_tolerance = true;
    bool pass = true;
};

namespace detail {

struct SuffixStats {
    double mean;
    double variance;  // 1/m normalization
};

inline SuffixStats remaining_stats(std::span<const double> x, const std::vector<char>& used) {
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!used[j]) {
            sum += x[j];
            ++m;
        }
    }
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!used[j]) ss += (x[j] - mean) * (x[j] - mean);
    }
    return {mean, ss / static_cast<double>(m)};
}

/// Log of the per-step multiplier's compensator: v_k^2 * c, with c the
/// family-specific coefficient (times the suffix variance for Bernstein).
inline double step_penalty(MartingaleFamily family, double lambda, double vk, double norm_inf,
                           double suffix_variance) {
    if (family == MartingaleFamily::hoeffding) return 0.5 * lambda * lambda * vk * vk;
    const double denom = 2.0 * (1.0 - (2.0 * std::abs(lambda) / 3.0) * norm_inf);
    return lambda * lambda / denom * vk * vk * suffix_variance;
}

inline void check_martingale_lambda(MartingaleFamily family, double lambda, const WeightVector& v) {
    if (family == MartingaleFamily::bernstein && v.norm_inf() > 0.0 &&
        !(std::abs(lambda) < 3.0 / (2.0 * v.norm_inf()))) {
        throw DomainError("martingale_check: |lambda| must be < 3 / (2 ||v||_inf)");
    }
}

}  // namespace detail

/// Largest |lambda| at which the Bernstein supermartingale property is asserted.
/// Between this and 3 / (2 ||v||_inf) results are reported but not asserted.
inline double conservative_bernstein_lambda(const WeightVector& v) {
    return v.norm_inf() > 0.0 ? 2.0 / (3.0 * v.norm_inf())
                              : std::numeric_limits<double>::infinity();
}

inline MartingalePath martingale_path(const Population& x, const WeightVector& v, double lambda,
                                      MartingaleFamily family,
                                      std::span<const std::size_t> ordering) {
    const std::size_t n = x.size();
    if (v.size() != n || ordering.size() != n) {
        throw DomainError("martingale_path: weights and ordering must match the population size");
    }
    detail::check_martingale_lambda(family, lambda, v);
    std::vector<char> used(n, 0);
    MartingalePath path{family, {1.0}};
    double log_m = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = ordering[k];
        if (j >= n || used[j]) throw DomainError("martingale_path: ordering is not a permutation");
        const auto stats = detail::remaining_stats(x.values(), used);
        log_m += lambda * v[k] * (x[j] - stats.mean) -
                 detail::step_penalty(family, lambda, v[k], v.norm_inf(), stats.variance);
        used[j] = 1;
        path.values.push_back(std::exp(log_m));
    }
    return path;
}

/// Exact conditional-expectation check of the supermartingale property over
/// every reachable prefix. With a fixed population the mean and variance of
/// the full vector are constants, so conditioning on them adds nothing to the
/// prefix filtration.
inline MartingaleReport martingale_check(const Population& x, const WeightVector& v, double lambda,
                                         MartingaleFamily family) {
    const std::size_t n = x.size();
    if (v.size() != n) throw DomainError("martingale_check: need n = N");
    detail::check_budget(n, n, "martingale_check");
    detail::check_martingale_lambda(family, lambda, v);

    MartingaleReport report;
    report.family = family;
    report.lambda = lambda;
    report.asserted =
        family == MartingaleFamily::hoeffding || std::abs(lambda) < conservative_bernstein_lambda(v);

    std::vector<char> used(n, 0);
    auto dfs = [&](auto&& self, std::size_t depth) -> void {
        if (depth == n) return;
        const auto stats = detail::remaining_stats(x.values(), used);
        const double penalty =
            detail::step_penalty(family, lambda, v[depth], v.norm_inf(), stats.variance);
        double sum = 0.0;
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            sum += std::exp(lambda * v[depth] * (x[j] - stats.mean) - penalty);
            ++m;
        }
        const double ratio = sum / static_cast<double>(m);
        ++report.prefixes_checked;
        if (ratio > report.worst_ratio) {
            report.worst_ratio = ratio;
            report.worst_step = depth + 1;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            self(self, depth + 1);
            used[j] = 0;
        }
    };
    dfs(dfs, 0);
    report.within_tolerance = report.worst_ratio <= 1.0 + kMarginTolerance;
    report.pass = !report.asserted || report.within_tolerance;
    return report;
}

// ---------------------------------------------------------------------------
// Suffix variance domination: var(x_{>=i}) <= mean_{j>=i} (x_j - xbar)^2

struct SuffixVarianceReport {
    double worst_gap = -std::numeric_limits<double>::infinity();  // max(lhs - rhs)
    std::size_t comparisons = 0;
    bool pass = true;
};

inline constexpr double kSuffixVarianceTolerance = 1e-12;

/// Every suffix of every ordering is the complement of some prefix, so the
/// walk over prefixes covers all (ordering, i) pairs.
inline SuffixVarianceReport suffix_variance_domination_check(const Population& x) {
    const std::size_t n = x.size();
    detail::check_budget(n, n, "suffix_variance_domination_check");
    SuffixVarianceReport report;
    std::vector<char> used(n, 0);
    auto dfs = [&](auto&& self, std::size_t depth) -> void {
        if (depth == n) return;
        const auto stats = detail::remaining_stats(x.values(), used);
        double rhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!used[j]) rhs += (x[j] - x.mean()) * (x[j] - x.mean());
        }
        rhs /= static_cast<double>(n - depth);
        report.worst_gap = std::max(report.worst_gap, stats.variance - rhs);
        ++report.comparisons;
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            self(self, depth + 1);
            used[j] = 0;
        }
    };
    dfs(dfs, 0);
    report.pass = report.worst_gap <= kSuffixVarianceTolerance;
    return report;
}

// ---------------------------------------------------------------------------
// Random instances

struct Instance {
    Population population;
    WeightVector weights;
};

/// Population uniform on [-1, 1]^N; weights standard normal rescaled to
/// ||w||_inf = 1 (absolute values when `nonnegative`).
inline Instance random_instance(RandomStream& rng, std::size_t N, std::size_t n,
                                bool nonnegative = false) {
    std::vector<double> x(N);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<double> w(n);
    double norm_inf = 0.0;
    for (double& v : w) {
        v = rng.normal();
        if (nonnegative) v = std::abs(v);
        norm_inf = std::max(norm_inf, std::abs(v));
    }
    if (norm_inf > 0.0) {
        for (double& v : w) v /= norm_inf;
    }
    return {population_stats(x), WeightVector(std::move(w))};
}

// ---------------------------------------------------------------------------
// Worst-case search for the inflation ratio

enum class TightnessTarget {
    /// sup_lambda log E[e^{lambda S}] / (lambda^2 ||w||^2 / 2)
    hoeffding,
    /// same, against the uninflated i.i.d. Bernstein exponent at sigma^2 = var(x)
    bernstein_uninflated,
};

struct TightnessOptions {
    bool nonnegative_weights = false;
    TightnessTarget target = TightnessTarget::hoeffding;
    std::size_t max_sweeps = 200;
    unsigned threads = 1;
};

struct TightnessWitness {
    double ratio = 0.0;
    double lambda = 0.0;  // 0 marks the small-lambda limit Var(S) / proxy
    std::vector<double> population;
    std::vector<double> weights;
};

struct TightnessReport {
    std::size_t trials = 0;
    std::size_t evaluations = 0;
    std::optional<TightnessWitness> best;
};

namespace detail {

struct RatioEval {
    double ratio = 0.0;
    double lambda = 0.0;
};

inline RatioEval inflation_ratio(const std::vector<double>& xs, const std::vector<double>& ws,
                                 TightnessTarget target, unsigned threads) {
    const Population pop = population_stats(xs);
    const WeightVector w(ws);
    if (w.norm2_squared() <= 0.0 || pop.variance() <= 0.0) return {};
    const ExactLaw law = exact_law(pop, w, threads);
    const double var_s = law.variance();

    std::optional<MgfCertificate> reference;
    double proxy = w.norm2_squared();
    if (target == TightnessTarget::bernstein_uninflated) {
        reference = bernstein_iid(w, IidModel::make(0.0, pop.variance()));
        proxy = reference->variance_proxy();
    }
    RatioEval best{var_s / proxy, 0.0};
    const double top = reference ? kDefaultDomainClip * reference->domain_half_width()
                                 : 10.0 / w.norm2();
    const double bottom = 0.02 * std::min(top, 1.0 / w.norm2());
    constexpr int kSteps = 32;
    for (int s = 0; s < kSteps; ++s) {
        const double mag = bottom * std::pow(top / bottom, static_cast<double>(s) / (kSteps - 1));
        for (double lambda : {mag, -mag}) {
            const double denom =
                reference ? reference->exponent(lambda) : 0.5 * lambda * lambda * proxy;
            const double r = exact_log_mgf(law, lambda) / denom;
            if (r > best.ratio) best = {r, lambda};
        }
    }
    return best;
}

}  // namespace detail

/// Random-restart coordinate hill climbing over populations and weights.
/// Gathers evidence only; nothing is asserted.
inline TightnessReport tightness_search(std::size_t N, std::size_t n, std::size_t trials,
                                        std::uint64_t seed, const TightnessOptions& opts = {}) {
    if (n < 1 || n > N) throw DomainError("tightness_search: need 1 <= n <= N");
    detail::check_budget(N, n, "tightness_search");
    TightnessReport report;
    report.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        RandomStream rng(seed, t);
        std::vector<double> xs(N), ws(n);
        for (double& v : xs) v = (rng.next_u32() & 1u) ? 1.0 : -1.0;
        for (double& v : ws) {
            v = rng.normal();
            if (opts.nonnegative_weights) v = std::abs(v);
        }
        auto eval = [&] {
            ++report.evaluations;
            return detail::inflation_ratio(xs, ws, opts.target, opts.threads);
        };
        detail::RatioEval current = eval();
        double step = 0.5;
        for (std::size_t sweep = 0; sweep < opts.max_sweeps && step >= 1e-3; ++sweep) {
            bool improved = false;
            auto try_coordinate = [&](double& slot, double lo, double hi) {
                for (double dir : {step, -step}) {
                    const double saved = slot;
                    slot = std::clamp(saved + dir, lo, hi);
                    if (slot == saved) continue;
                    const detail::RatioEval cand = eval();
                    if (cand.ratio > current.ratio + 1e-12) {
                        current = cand;
                        improved = true;
                        return;
                    }
                    slot = saved;
                }
            };
            for (double& v : xs) try_coordinate(v, -1.0, 1.0);
            const double wlo = opts.nonnegative_weights ? 0.0 : -1e6;
            for (double& v : ws) try_coordinate(v, wlo, 1e6);
            if (!improved) step *= 0.5;
        }
        if (!report.best || current.ratio > report.best->ratio) {
            report.best = TightnessWitness{current.ratio, current.lambda, xs, ws};
        }
    }
    return report;
}

}  // namespace exch
