#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exch/errors.hpp"

namespace exch {

/// H_N = 1 + 1/2 + ... + 1/N, summed from the smallest term upward.
inline double harmonic(std::size_t N) {
    if (N == 0) throw DomainError("harmonic: N must be >= 1");
    double sum = 0.0;
    for (std::size_t k = N; k >= 1; --k) sum += 1.0 / static_cast<double>(k);
    return sum;
}

/// Exchangeability inflation factor eps_N = (H_N - 1) / (N - H_N), N >= 2.
///
/// eps_N lies in (0, 1], equals 1 at N = 2 and decays like log(N) / N.
inline double epsilon(std::size_t N) {
    if (N < 2) throw DomainError("epsilon: N must be >= 2");
    const double h = harmonic(N);
    return (h - 1.0) / (static_cast<double>(N) - h);
}

/// Fixed weights with cached norms.
class WeightVector {
public:
    explicit WeightVector(std::vector<double> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw ValidationError("weights: need at least one entry");
        double sq = 0.0;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const double w = entries_[i];
            if (!std::isfinite(w)) {
                throw ValidationError("weights: entry " + std::to_string(i) + " is not finite", i);
            }
            sq += w * w;
            norm_inf_ = std::max(norm_inf_, std::abs(w));
            if (w < 0.0) all_nonnegative_ = false;
        }
        norm2_sq_ = sq;
        norm2_ = std::sqrt(sq);
    }

    std::size_t size() const noexcept { return entries_.size(); }
    std::span<const double> entries() const noexcept { return entries_; }
    double operator[](std::size_t i) const { return entries_[i]; }

    double norm2() const noexcept { return norm2_; }
    double norm2_squared() const noexcept { return norm2_sq_; }
    double norm_inf() const noexcept { return norm_inf_; }
    bool all_nonnegative() const noexcept { return all_nonnegative_; }

private:
    std::vector<double> entries_;
    double norm2_ = 0.0;
    double norm2_sq_ = 0.0;
    double norm_inf_ = 0.0;
    bool all_nonnegative_ = true;
};

/// A finite population in [-1, 1]^N together with its summary statistics.
///
/// `variance` uses 1/N normalization. `inflated_variance` is variance + 4 eps_N
/// and is only defined for N >= 2.
class Population {
public:
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }
    double stddev() const noexcept { return std::sqrt(variance_); }

    std::optional<double> inflated_variance() const noexcept { return inflated_variance_; }

private:
    friend Population population_stats(std::span<const double> values);

    std::vector<double> values_;
    double mean_ = 0.0;
    double variance_ = 0.0;
    std::optional<double> inflated_variance_;
};

/// Builds a Population. Values must lie in [-1, 1] exactly; no clamping.
inline Population population_stats(std::span<const double> values) {
    if (values.empty()) throw DomainError("population: need at least one value");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v >= -1.0 && v <= 1.0)) {
            throw ValidationError("population: value at index " + std::to_string(i) +
                                      " is outside [-1, 1]",
                                  i);
        }
    }
    Population pop;
    pop.values_.assign(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    pop.mean_ = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - pop.mean_) * (v - pop.mean_);
    pop.variance_ = ss / n;
    if (values.size() >= 2) pop.inflated_variance_ = pop.variance_ + 4.0 * epsilon(values.size());
    return pop;
}

inline Population population_stats(std::initializer_list<double> values) {
    return population_stats(std::span<const double>(values.begin(), values.size()));
}

/// Mean and variance of an i.i.d. sampling distribution on [-1, 1].
struct IidModel {
    double mean = 0.0;
    double variance = 0.0;

    static IidModel make(double mean, double variance) {
        if (!(std::abs(mean) <= 1.0)) throw ValidationError("iid model: |mean| must be <= 1");
        if (!(variance >= 0.0 && variance <= 1.0)) {
            throw ValidationError("iid model: variance must lie in [0, 1]");
        }
        return IidModel{mean, variance};
    }
};

}  // namespace exch
