#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exch/bounds.hpp"
#include "exch/core_numerics.hpp"
#include "exch/errors.hpp"
#include "exch/parallel.hpp"
#include "exch/rng.hpp"

namespace exch {

/// Partial Fisher-Yates over a reusable index array. Each draw records its
/// swaps and undoes them afterwards, so the array is back to the identity in
/// O(n) rather than O(N).
class IndexSampler {
public:
    explicit IndexSampler(std::size_t N) : index_(N) {
        for (std::size_t i = 0; i < N; ++i) index_[i] = i;
        swaps_.reserve(N);
    }

    std::size_t population_size() const noexcept { return index_.size(); }

    /// First n entries of a uniform random ordering of [0, N).
    std::span<const std::size_t> draw(std::size_t n, RandomStream& rng) {
        restore();
        const std::size_t N = index_.size();
        if (n > N) throw DomainError("draw: n exceeds population size");
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.bounded(N - i));
            std::swap(index_[i], index_[j]);
            swaps_.push_back(j);
        }
        return {index_.data(), n};
    }

private:
    void restore() {
        for (std::size_t i = swaps_.size(); i-- > 0;) std::swap(index_[i], index_[swaps_[i]]);
        swaps_.clear();
    }

    std::vector<std::size_t> index_;
    std::vector<std::size_t> swaps_;
};

/// n values drawn uniformly without replacement, in draw order.
inline std::vector<double> draw_without_replacement(const Population& pop, std::size_t n,
                                                    RandomStream& rng) {
    if (n > pop.size()) throw DomainError("draw_without_replacement: need n <= N");
    IndexSampler sampler(pop.size());
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t idx : sampler.draw(n, rng)) out.push_back(pop[idx]);
    return out;
}

struct SimConfig {
    Population population;
    WeightVector weights;  // length n = draws per replicate
    std::size_t replicates = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool keep_sums = false;

    std::size_t n() const noexcept { return weights.size(); }

    void validate() const {
        if (weights.size() > population.size()) {
            throw DomainError("simulation: n = " + std::to_string(weights.size()) +
                              " exceeds N = " + std::to_string(population.size()));
        }
        if (replicates < 1) throw DomainError("simulation: need at least one replicate");
    }
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z = kZ95) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, std::min(centre - half, p)), std::min(1.0, std::max(centre + half, p))};
}

struct TailEstimate {
    double threshold = 0.0;
    std::uint64_t hits = 0;
    double frequency = 0.0;
    Interval ci;
};

struct MgfEstimate {
    double lambda = 0.0;
    double mean = 0.0;            // sample mean of exp(lambda S)
    double standard_error = 0.0;
    std::uint64_t capped = 0;     // replicates with |lambda S| > kExpCap
};

/// |lambda S| beyond this is capped in the exp() and counted.
inline constexpr double kExpCap = 700.0;

struct SimResult {
    std::size_t replicates = 0;
    std::vector<TailEstimate> tail;
    std::vector<MgfEstimate> mgf;
    std::optional<std::vector<double>> sums;  // in replicate order when requested
};

namespace detail {

inline constexpr std::size_t kReplicateBlock = 4096;

/// Per-block partial aggregates. Blocks are a fixed partition of the
/// replicate range, so the final reduction does not depend on thread count.
struct SimBlock {
    std::vector<std::uint64_t> hits;
    std::vector<double> exp_sum;
    std::vector<double> exp_sq_sum;
    std::vector<std::uint64_t> capped;
    std::vector<double> sums;
};

template <typename Visit>
std::vector<SimBlock> run_blocks(const SimConfig& config, std::size_t thresholds,
                                 std::size_t lambdas, Visit&& visit) {
    config.validate();
    const std::size_t blocks = (config.replicates + kReplicateBlock - 1) / kReplicateBlock;
    std::vector<double> centered(config.population.size());
    for (std::size_t i = 0; i < centered.size(); ++i) {
        centered[i] = config.population[i] - config.population.mean();
    }
    const std::span<const double> w = config.weights.entries();
    return parallel_map(blocks, config.threads, [&](std::size_t b) {
        SimBlock block;
        block.hits.assign(thresholds, 0);
        block.exp_sum.assign(lambdas, 0.0);
        block.exp_sq_sum.assign(lambdas, 0.0);
        block.capped.assign(lambdas, 0);
        IndexSampler sampler(centered.size());
        const std::size_t begin = b * kReplicateBlock;
        const std::size_t end = std::min(config.replicates, begin + kReplicateBlock);
        for (std::size_t r = begin; r < end; ++r) {
            RandomStream rng(config.seed, r);
            const auto idx = sampler.draw(w.size(), rng);
            double s = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * centered[idx[i]];
            visit(block, s);
            if (config.keep_sums) block.sums.push_back(s);
        }
        return block;
    });
}

}  // namespace detail

/// Tail frequencies P(S >= t) and MGF estimates E[exp(lambda S)] for
/// S = sum_i w_i (X_i - xbar), X drawn without replacement.
inline SimResult simulate(const SimConfig& config, std::span<const double> thresholds,
                          std::span<const double> lambdas) {
    auto blocks = detail::run_blocks(
        config, thresholds.size(), lambdas.size(), [&](detail::SimBlock& block, double s) {
            for (std::size_t t = 0; t < thresholds.size(); ++t) {
                if (s >= thresholds[t]) ++block.hits[t];
            }
            for (std::size_t l = 0; l < lambdas.size(); ++l) {
                double arg = lambdas[l] * s;
                if (std::abs(arg) > kExpCap) {
                    ++block.capped[l];
                    arg = std::copysign(kExpCap, arg);
                }
                const double e = std::exp(arg);
                block.exp_sum[l] += e;
                block.exp_sq_sum[l] += e * e;
            }
        });

    SimResult result;
    result.replicates = config.replicates;
    const double R = static_cast<double>(config.replicates);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        TailEstimate est;
        est.threshold = thresholds[t];
        for (const auto& b : blocks) est.hits += b.hits[t];
        est.frequency = static_cast<double>(est.hits) / R;
        est.ci = wilson_interval(est.hits, config.replicates);
        result.tail.push_back(est);
    }
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        double sum = 0.0, sq = 0.0;
        MgfEstimate est;
        est.lambda = lambdas[l];
        for (const auto& b : blocks) {
            sum += b.exp_sum[l];
            sq += b.exp_sq_sum[l];
            est.capped += b.capped[l];
        }
        est.mean = sum / R;
        const double var = config.replicates > 1
                               ? std::max(0.0, (sq - R * est.mean * est.mean) / (R - 1.0))
                               : 0.0;
        est.standard_error = std::sqrt(var / R);
        result.mgf.push_back(est);
    }
    if (config.keep_sums) {
        std::vector<double> all;
        all.reserve(config.replicates);
        for (const auto& b : blocks) all.insert(all.end(), b.sums.begin(), b.sums.end());
        result.sums = std::move(all);
    }
    return result;
}

struct CoverageRow {
    BoundKind kind = BoundKind::hoeffding_exch;
    double delta = 0.0;
    double radius = 0.0;
    Sidedness sided = Sidedness::one_sided;
    std::uint64_t hits = 0;
    double frequency = 0.0;
    Interval ci;
    bool pass = false;  // Wilson lower bound <= delta
};

/// Builds the bound for `kind` from the simulation's own population (N, sigma^2
/// and mean are known exactly in simulation).
inline BoundSpec coverage_spec(const SimConfig& config, BoundKind kind) {
    BoundSpec spec;
    spec.kind = kind;
    spec.weights.assign(config.weights.entries().begin(), config.weights.entries().end());
    spec.big_n = config.population.size();
    spec.sigma2 = config.population.variance();
    spec.population = config.population;
    return spec;
}

/// Empirical exceedance frequency of each bound's radius. Two-sided bounds
/// are checked against |S| >= radius.
inline std::vector<CoverageRow> coverage_experiment(const SimConfig& config,
                                                    std::span<const BoundKind> kinds,
                                                    std::span<const double> deltas) {
    std::vector<CoverageRow> rows;
    for (BoundKind kind : kinds) {
        const BoundSpec spec = coverage_spec(config, kind);
        for (double delta : deltas) {
            const TailRadius tr = evaluate_tail(spec, delta);
            CoverageRow row;
            row.kind = kind;
            row.delta = delta;
            row.radius = tr.radius;
            row.sided = tr.sided;
            rows.push_back(row);
        }
    }
    auto blocks = detail::run_blocks(config, rows.size(), 0, [&](detail::SimBlock& block, double s) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double stat = rows[i].sided == Sidedness::two_sided ? std::abs(s) : s;
            if (stat >= rows[i].radius) ++block.hits[i];
        }
    });
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& b : blocks) rows[i].hits += b.hits[i];
        rows[i].frequency =
            static_cast<double>(rows[i].hits) / static_cast<double>(config.replicates);
        rows[i].ci = wilson_interval(rows[i].hits, config.replicates);
        rows[i].pass = rows[i].ci.lo <= rows[i].delta;
    }
    return rows;
}

}  // namespace exch
