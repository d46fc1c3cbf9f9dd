#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exch/core_numerics.hpp"
#include "exch/errors.hpp"

namespace exch {

enum class BoundKind {
    hoeffding_iid,
    bernstein_iid,
    serfling,
    hoeffding_exch,
    hoeffding_exch_nonneg,
    bernstein_exch,
    gan,
    polaczyk,
};

inline constexpr BoundKind kAllBoundKinds[] = {
    BoundKind::hoeffding_iid,  BoundKind::bernstein_iid,         BoundKind::serfling,
    BoundKind::hoeffding_exch, BoundKind::hoeffding_exch_nonneg, BoundKind::bernstein_exch,
    BoundKind::gan,            BoundKind::polaczyk,
};

inline std::string_view to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::hoeffding_iid: return "hoeffding-iid";
        case BoundKind::bernstein_iid: return "bernstein-iid";
        case BoundKind::serfling: return "serfling";
        case BoundKind::hoeffding_exch: return "hoeffding-exch";
        case BoundKind::hoeffding_exch_nonneg: return "hoeffding-exch-nonneg";
        case BoundKind::bernstein_exch: return "bernstein-exch";
        case BoundKind::gan: return "gan";
        case BoundKind::polaczyk: return "polaczyk";
    }
    return "unknown";
}

inline std::optional<BoundKind> parse_bound_kind(std::string_view name) {
    for (BoundKind k : kAllBoundKinds) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

enum class Sidedness { one_sided, two_sided };

inline std::string_view to_string(Sidedness s) {
    return s == Sidedness::one_sided ? "one" : "two";
}

/// Certifies E[exp(lambda S)] <= exp(exponent(lambda)) for |lambda| < 1/scale.
///
/// Every implemented family has the sub-gamma shape
///     exponent(lambda) = lambda^2 v / (2 (1 - scale |lambda|)),
/// with scale = 0 for the sub-Gaussian (Hoeffding-type) families, where the
/// domain is all of R. `v` is the variance proxy a^2.
class MgfCertificate {
public:
    MgfCertificate(BoundKind kind, double variance_proxy, double scale)
        : kind_(kind), variance_proxy_(variance_proxy), scale_(scale) {}

    BoundKind kind() const noexcept { return kind_; }
    double variance_proxy() const noexcept { return variance_proxy_; }
    double scale() const noexcept { return scale_; }

    /// Half-width of the open lambda interval; +inf when unrestricted.
    double domain_half_width() const noexcept {
        return scale_ > 0.0 ? 1.0 / scale_ : std::numeric_limits<double>::infinity();
    }
    bool bounded_domain() const noexcept { return scale_ > 0.0; }
    bool in_domain(double lambda) const noexcept {
        return std::abs(lambda) < domain_half_width();
    }

    double exponent(double lambda) const {
        if (!in_domain(lambda)) {
            throw DomainError("certificate " + std::string(to_string(kind_)) + ": lambda " +
                              std::to_string(lambda) + " outside (-" +
                              std::to_string(domain_half_width()) + ", " +
                              std::to_string(domain_half_width()) + ")");
        }
        return lambda * lambda * variance_proxy_ / (2.0 * (1.0 - scale_ * std::abs(lambda)));
    }

private:
    BoundKind kind_;
    double variance_proxy_;
    double scale_;
};

/// A threshold t with P(S >= t) <= delta (one-sided) or P(|S| >= t) <= delta.
struct TailRadius {
    double delta = 0.0;
    double radius = 0.0;
    BoundKind kind = BoundKind::hoeffding_exch;
    Sidedness sided = Sidedness::one_sided;
};

namespace detail {

inline void check_delta(double delta, const char* who) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw DomainError(std::string(who) + ": delta must lie strictly inside (0, 1)");
    }
}

inline void check_exchangeable(std::size_t n, std::size_t N, const char* who) {
    if (n < 2) throw DomainError(std::string(who) + ": need n >= 2");
    if (N < n) throw DomainError(std::string(who) + ": need N >= n");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MGF certificates

/// Classical Hoeffding for i.i.d. data: exponent lambda^2 ||w||^2 / 2.
inline MgfCertificate hoeffding_iid(const WeightVector& w) {
    return {BoundKind::hoeffding_iid, w.norm2_squared(), 0.0};
}

/// Classical Bernstein for i.i.d. data with variance sigma^2_P:
/// domain |lambda| < 3 / (2 ||w||_inf).
inline MgfCertificate bernstein_iid(const WeightVector& w, const IidModel& model) {
    return {BoundKind::bernstein_iid, model.variance * w.norm2_squared(),
            2.0 * w.norm_inf() / 3.0};
}

/// Serfling's without-replacement bound for the unweighted sum of n draws
/// out of N: exponent (n lambda^2 / 2)(1 - (n - 1)/N).
inline MgfCertificate serfling_unweighted(std::size_t n, std::size_t N) {
    if (n < 1) throw DomainError("serfling: need n >= 1");
    if (n > N) throw DomainError("serfling: need n <= N");
    const double nd = static_cast<double>(n);
    const double factor = 1.0 - (nd - 1.0) / static_cast<double>(N);
    return {BoundKind::serfling, nd * factor, 0.0};
}

/// Exchangeable Hoeffding: exponent (lambda^2 / 2) ||w||^2 (1 + eps_N), for
/// S = sum w_i (X_i - mean of all N variables).
inline MgfCertificate hoeffding_exch(const WeightVector& w, std::size_t N) {
    detail::check_exchangeable(w.size(), N, "hoeffding_exch");
    return {BoundKind::hoeffding_exch, w.norm2_squared() * (1.0 + epsilon(N)), 0.0};
}

/// Exchangeable Hoeffding for nonnegative weights, with no inflation.
inline MgfCertificate hoeffding_exch_nonneg(const WeightVector& w) {
    if (!w.all_nonnegative()) {
        throw PreconditionError("hoeffding_exch_nonneg: all weights must be nonnegative");
    }
    return {BoundKind::hoeffding_exch_nonneg, w.norm2_squared(), 0.0};
}

/// Exchangeable Bernstein. `pop_sigma2` is the 1/N variance of all N values.
///
/// exponent = lambda^2 (1+eps) (sigma^2 + 4 eps) ||w||^2 / (2 (1 - (2/3) ||w||_inf (1+eps) |lambda|)),
/// domain |lambda| < 3 / (2 ||w||_inf (1 + eps_N)).
inline MgfCertificate bernstein_exch(const WeightVector& w, double pop_sigma2, std::size_t N) {
    detail::check_exchangeable(w.size(), N, "bernstein_exch");
    if (!(pop_sigma2 >= 0.0)) throw DomainError("bernstein_exch: sigma^2 must be >= 0");
    const double inflation = 1.0 + epsilon(N);
    const double inflated_variance = pop_sigma2 + 4.0 * epsilon(N);
    return {BoundKind::bernstein_exch, inflation * inflated_variance * w.norm2_squared(),
            2.0 * w.norm_inf() * inflation / 3.0};
}

inline MgfCertificate bernstein_exch(const WeightVector& w, const Population& pop) {
    return bernstein_exch(w, pop.variance(), pop.size());
}

// ---------------------------------------------------------------------------
// MGF-to-tail conversions

/// exp(lambda^2 a^2 / 2) for all lambda implies P(Z >= a sqrt(2 log(1/delta))) <= delta.
inline TailRadius subgaussian_tail(double a, double delta) {
    detail::check_delta(delta, "subgaussian_tail");
    if (!(a >= 0.0)) throw DomainError("subgaussian_tail: a must be >= 0");
    return {delta, a * std::sqrt(2.0 * std::log(1.0 / delta)), BoundKind::hoeffding_iid,
            Sidedness::one_sided};
}

/// Sub-gamma version: radius a sqrt(2 log(1/delta)) + b log(1/delta).
inline TailRadius bernstein_tail(double a, double b, double delta) {
    detail::check_delta(delta, "bernstein_tail");
    if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("bernstein_tail: a, b must be >= 0");
    const double L = std::log(1.0 / delta);
    return {delta, a * std::sqrt(2.0 * L) + b * L, BoundKind::bernstein_iid,
            Sidedness::one_sided};
}

/// One-sided tail radius implied by a certificate.
inline TailRadius tail_radius(const MgfCertificate& cert, double delta) {
    TailRadius r = bernstein_tail(std::sqrt(cert.variance_proxy()), cert.scale(), delta);
    r.kind = cert.kind();
    return r;
}

// ---------------------------------------------------------------------------
// Comparison bounds from the literature

/// Two-sided exchangeable-pairs bound: ||w||_2 sqrt(4 log(2/delta)).
inline TailRadius gan_stein_tail(const WeightVector& w, double delta) {
    detail::check_delta(delta, "gan_stein_tail");
    return {delta, w.norm2() * std::sqrt(4.0 * std::log(2.0 / delta)), BoundKind::gan,
            Sidedness::two_sided};
}

/// Tolerance used to decide that a population is centered.
inline constexpr double kCenteredTolerance = 1e-12;

/// Simplified random-permutation-matrix bound for a centered population with
/// ||w||_inf <= 1: 36 sigma ||w|| sqrt(log(2/delta)) + 36 log(2/delta).
inline TailRadius polaczyk_tail(const WeightVector& w, const Population& pop, double delta) {
    detail::check_delta(delta, "polaczyk_tail");
    if (w.norm_inf() > 1.0) throw PreconditionError("polaczyk_tail: need ||w||_inf <= 1");
    if (std::abs(pop.mean()) > kCenteredTolerance) {
        throw PreconditionError("polaczyk_tail: population mean must be 0");
    }
    const double L = std::log(2.0 / delta);
    return {delta, 36.0 * pop.stddev() * w.norm2() * std::sqrt(L) + 36.0 * L,
            BoundKind::polaczyk, Sidedness::one_sided};
}

// ---------------------------------------------------------------------------
// Recovery of the i.i.d. exponents as N grows

struct IidLimitRow {
    std::size_t N = 0;
    double epsilon = 0.0;
    double hoeffding_gap = 0.0;       // exch exponent - iid exponent
    double hoeffding_expected = 0.0;  // (lambda^2 ||w||^2 / 2) eps_N
    std::optional<double> bernstein_gap;  // unset when lambda is outside the domain at this N
};

struct IidLimitReport {
    std::vector<IidLimitRow> rows;
    double max_identity_error = 0.0;  // max |hoeffding_gap - hoeffding_expected|
    bool hoeffding_monotone = true;   // gaps strictly decrease along increasing N
    bool bernstein_monotone = true;
};

/// Compares exchangeable exponents at each N to their i.i.d. counterparts.
/// The Bernstein pair uses the same sigma^2 for both sides.
inline IidLimitReport iid_limit_check(const WeightVector& w, double lambda,
                                      const std::vector<std::size_t>& big_ns,
                                      double sigma2 = 0.0) {
    IidLimitReport report;
    const double h_iid = hoeffding_iid(w).exponent(lambda);
    const MgfCertificate b_iid = bernstein_iid(w, IidModel::make(0.0, sigma2));
    std::optional<double> prev_h, prev_b;
    for (std::size_t N : big_ns) {
        IidLimitRow row;
        row.N = N;
        row.epsilon = epsilon(N);
        row.hoeffding_gap = hoeffding_exch(w, N).exponent(lambda) - h_iid;
        row.hoeffding_expected = 0.5 * lambda * lambda * w.norm2_squared() * row.epsilon;
        report.max_identity_error = std::max(report.max_identity_error,
                                             std::abs(row.hoeffding_gap - row.hoeffding_expected));
        const MgfCertificate b_exch = bernstein_exch(w, sigma2, N);
        if (b_exch.in_domain(lambda) && b_iid.in_domain(lambda)) {
            row.bernstein_gap = b_exch.exponent(lambda) - b_iid.exponent(lambda);
        }
        if (lambda != 0.0 && prev_h && !(row.hoeffding_gap < *prev_h)) {
            report.hoeffding_monotone = false;
        }
        if (lambda != 0.0 && row.bernstein_gap && prev_b && !(*row.bernstein_gap < *prev_b)) {
            report.bernstein_monotone = false;
        }
        prev_h = row.hoeffding_gap;
        if (row.bernstein_gap) prev_b = row.bernstein_gap;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Unified evaluation

/// One bound family plus whatever parameters it needs.
struct BoundSpec {
    BoundKind kind = BoundKind::hoeffding_exch;
    std::vector<double> weights;
    std::optional<std::size_t> big_n;
    std::optional<double> sigma2;
    std::optional<Population> population;
};

/// MGF certificate for a spec, or nullopt for the tail-only comparison bounds.
/// Throws DomainError/PreconditionError when a required parameter is missing
/// or a hypothesis fails.
inline std::optional<MgfCertificate> certificate_for(const BoundSpec& spec) {
    const WeightVector w(spec.weights);
    auto need_n = [&]() -> std::size_t {
        if (spec.big_n) return *spec.big_n;
        if (spec.population) return spec.population->size();
        throw DomainError(std::string(to_string(spec.kind)) + ": N is required");
    };
    auto need_sigma2 = [&]() -> double {
        if (spec.sigma2) return *spec.sigma2;
        if (spec.population) return spec.population->variance();
        throw DomainError(std::string(to_string(spec.kind)) + ": sigma^2 is required");
    };
    switch (spec.kind) {
        case BoundKind::hoeffding_iid: return hoeffding_iid(w);
        case BoundKind::bernstein_iid: {
            const double mean = spec.population ? spec.population->mean() : 0.0;
            return bernstein_iid(w, IidModel::make(mean, need_sigma2()));
        }
        case BoundKind::serfling:
            for (double v : spec.weights) {
                if (v != 1.0) throw PreconditionError("serfling: weights must all equal 1");
            }
            return serfling_unweighted(w.size(), need_n());
        case BoundKind::hoeffding_exch: return hoeffding_exch(w, need_n());
        case BoundKind::hoeffding_exch_nonneg: return hoeffding_exch_nonneg(w);
        case BoundKind::bernstein_exch: return bernstein_exch(w, need_sigma2(), need_n());
        case BoundKind::gan:
        case BoundKind::polaczyk: return std::nullopt;
    }
    return std::nullopt;
}

inline TailRadius evaluate_tail(const BoundSpec& spec, double delta) {
    switch (spec.kind) {
        case BoundKind::gan: return gan_stein_tail(WeightVector(spec.weights), delta);
        case BoundKind::polaczyk:
            if (!spec.population) throw DomainError("polaczyk: a population is required");
            return polaczyk_tail(WeightVector(spec.weights), *spec.population, delta);
        default: return tail_radius(*certificate_for(spec), delta);
    }
}

}  // namespace exch
