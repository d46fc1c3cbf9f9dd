#pragma once

// Linear-algebra machinery behind the exchangeable Hoeffding and Bernstein
// bounds: suffix means B_n, the suffix-contrast operator A_n, the centering
// projection, and permutation averages of (A_n^T A_n)^+ and B_n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exch/core_numerics.hpp"
#include "exch/errors.hpp"
#include "exch/parallel.hpp"

namespace exch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest n for which operators are materialized densely. Larger problems
/// go through the O(n) apply_* functions.
inline constexpr std::size_t kDenseLimit = 2048;

/// Largest n accepted by the exhaustive permutation-average routines.
inline constexpr std::size_t kPermutationEnumerationLimit = 8;

namespace detail {

inline void check_dense(std::size_t n, const char* what) {
    if (n > kDenseLimit) {
        throw DomainError(std::string(what) + ": n exceeds the dense limit of " +
                          std::to_string(kDenseLimit) + "; use the apply_* form");
    }
}

inline Vector to_eigen(std::span<const double> x) {
    Vector v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Implicit O(n) forms

/// (B_n x)_i = mean(x_i, ..., x_n).
inline std::vector<double> apply_suffix_mean(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    double tail = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        tail += x[k];
        out[k] = tail / static_cast<double>(n - k);
    }
    return out;
}

/// (A_n w)_i = w_i - mean(w_{i+1}, ..., w_n) for i < n, and 0 for the last row.
inline std::vector<double> apply_contrast(std::span<const double> w) {
    const std::size_t n = w.size();
    std::vector<double> out(n, 0.0);
    double tail = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        if (k + 1 < n) out[k] = w[k] - tail / static_cast<double>(n - 1 - k);
        tail += w[k];
    }
    return out;
}

/// x - mean(x) * 1.
inline std::vector<double> apply_centering(std::span<const double> x) {
    const double mean =
        std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) v -= mean;
    return out;
}

// ---------------------------------------------------------------------------
// Dense forms

/// Upper-triangular B_n; row i holds 1/(n-i) on columns i..n-1 (0-based).
struct SuffixMeanOperator {
    std::size_t n = 0;
    Matrix matrix;

    Vector apply(std::span<const double> x) const { return matrix * detail::to_eigen(x); }
};

/// A_n; row i (0-based, i < n-1) is (0, ..., 0, 1, -1/(n-1-i), ..., -1/(n-1-i)),
/// last row zero.
struct ContrastOperator {
    std::size_t n = 0;
    Matrix matrix;

    Vector apply(std::span<const double> w) const { return matrix * detail::to_eigen(w); }
};

/// I - (1/n) 11^T.
struct CenteringProjection {
    std::size_t n = 0;
    Matrix matrix;

    Vector apply(std::span<const double> x) const { return matrix * detail::to_eigen(x); }
};

inline SuffixMeanOperator build_suffix_mean(std::size_t n) {
    if (n == 0) throw DomainError("build_suffix_mean: n must be >= 1");
    detail::check_dense(n, "build_suffix_mean");
    const auto N = static_cast<Eigen::Index>(n);
    Matrix m = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double v = 1.0 / static_cast<double>(N - i);
        for (Eigen::Index j = i; j < N; ++j) m(i, j) = v;
    }
    return {n, std::move(m)};
}

inline ContrastOperator build_contrast(std::size_t n) {
    if (n < 2) throw DomainError("build_contrast: n must be >= 2");
    detail::check_dense(n, "build_contrast");
    const auto N = static_cast<Eigen::Index>(n);
    Matrix m = Matrix::Zero(N, N);
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
        m(i, i) = 1.0;
        const double v = -1.0 / static_cast<double>(N - 1 - i);
        for (Eigen::Index j = i + 1; j < N; ++j) m(i, j) = v;
    }
    return {n, std::move(m)};
}

inline CenteringProjection build_centering(std::size_t n) {
    if (n == 0) throw DomainError("build_centering: n must be >= 1");
    detail::check_dense(n, "build_centering");
    const auto N = static_cast<Eigen::Index>(n);
    Matrix m = Matrix::Identity(N, N);
    m.array() -= 1.0 / static_cast<double>(n);
    return {n, std::move(m)};
}

/// Relative eigenvalue cutoff for the Gram pseudoinverse.
inline constexpr double kPinvRelativeCutoff = 1e-10;

/// (A_n^T A_n)^+ via symmetric eigendecomposition.
///
/// The Gram matrix has exactly one null direction (the all-ones vector);
/// anything else indicates a numerical failure and throws.
inline Matrix pseudo_inverse_gram(std::size_t n) {
    if (n < 2) throw DomainError("pseudo_inverse_gram: n must be >= 2");
    const ContrastOperator a = build_contrast(n);
    const Matrix gram = a.matrix.transpose() * a.matrix;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("pseudo_inverse_gram: eigendecomposition failed");
    }
    const Vector& values = eig.eigenvalues();
    const double cutoff = kPinvRelativeCutoff * values.maxCoeff();
    Vector inv = Vector::Zero(values.size());
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) > cutoff) {
            inv(i) = 1.0 / values(i);
            ++rank;
        }
    }
    if (rank != n - 1) {
        throw std::runtime_error("pseudo_inverse_gram: expected rank " + std::to_string(n - 1) +
                                 ", found " + std::to_string(rank));
    }
    const Matrix& vecs = eig.eigenvectors();
    return vecs * inv.asDiagonal() * vecs.transpose();
}

/// Closed form of (1/n!) sum_P P^T (A_n^T A_n)^+ P = ((n - H_n)/(n - 1)) P_perp.
inline Matrix perm_average_gram_pinv(std::size_t n) {
    if (n < 2) throw DomainError("perm_average_gram_pinv: n must be >= 2");
    const double scale = 1.0 / (1.0 + epsilon(n));
    return scale * build_centering(n).matrix;
}

/// Closed form of (1/n!) sum_P P^T B_n P = (1/(1+eps_n)) P_1 + (eps_n/(1+eps_n)) I.
inline Matrix perm_average_suffix_mean(std::size_t n) {
    if (n < 2) throw DomainError("perm_average_suffix_mean: n must be >= 2");
    const double eps = epsilon(n);
    const auto N = static_cast<Eigen::Index>(n);
    Matrix m = Matrix::Constant(N, N, 1.0 / (static_cast<double>(n) * (1.0 + eps)));
    m.diagonal().array() += eps / (1.0 + eps);
    return m;
}

/// Averages P^T M P over all n! permutation matrices by enumeration.
///
/// (P^T M P)_{ij} = M_{p(i), p(j)} for P with P e_i = e_{p(i)}. The work is
/// split by the image of the first index; block sums are merged with a
/// pairwise tree so the result does not depend on `threads`.
inline Matrix enumerate_permutation_average(const Matrix& m, unsigned threads = 1) {
    const auto n = static_cast<std::size_t>(m.rows());
    if (n == 0 || m.cols() != m.rows()) {
        throw DomainError("enumerate_permutation_average: need a nonempty square matrix");
    }
    if (n > kPermutationEnumerationLimit) {
        throw ResourceError("enumerate_permutation_average: n = " + std::to_string(n) +
                                " exceeds the enumeration cap of " +
                                std::to_string(kPermutationEnumerationLimit),
                            std::tgamma(static_cast<double>(n) + 1.0));
    }
    const auto N = static_cast<Eigen::Index>(n);
    std::vector<Matrix> blocks = parallel_map(n, threads, [&](std::size_t first) {
        Matrix acc = Matrix::Zero(N, N);
        std::vector<Eigen::Index> perm(n);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::swap(perm[0], perm[first]);
        std::sort(perm.begin() + 1, perm.end());
        do {
            for (Eigen::Index i = 0; i < N; ++i) {
                for (Eigen::Index j = 0; j < N; ++j) acc(i, j) += m(perm[i], perm[j]);
            }
        } while (std::next_permutation(perm.begin() + 1, perm.end()));
        return acc;
    });
    Matrix total = tree_reduce(std::move(blocks), [](const Matrix& a, const Matrix& b) {
        return Matrix(a + b);
    });
    return total / std::tgamma(static_cast<double>(n) + 1.0);
}

inline Matrix perm_average_gram_pinv_enumerated(std::size_t n, unsigned threads = 1) {
    if (n < 2) throw DomainError("perm_average_gram_pinv_enumerated: n must be >= 2");
    if (n > kPermutationEnumerationLimit) {
        throw ResourceError("perm_average_gram_pinv_enumerated: n exceeds the enumeration cap",
                            std::tgamma(static_cast<double>(n) + 1.0));
    }
    return enumerate_permutation_average(pseudo_inverse_gram(n), threads);
}

inline Matrix perm_average_suffix_mean_enumerated(std::size_t n, unsigned threads = 1) {
    if (n < 2) throw DomainError("perm_average_suffix_mean_enumerated: n must be >= 2");
    if (n > kPermutationEnumerationLimit) {
        throw ResourceError("perm_average_suffix_mean_enumerated: n exceeds the enumeration cap",
                            std::tgamma(static_cast<double>(n) + 1.0));
    }
    return enumerate_permutation_average(build_suffix_mean(n).matrix, threads);
}

/// Per-coordinate comparison ((A_n w)_i)^2 <= w_i^2 for nonnegative weights,
/// evaluated after sorting w into non-increasing order.
struct ContrastDominanceReport {
    std::vector<double> sorted_weights;
    std::vector<double> contrast;  // A_n applied to sorted_weights
    double contrast_norm_sq = 0.0;
    double weight_norm_sq = 0.0;
    double worst_coordinate_gap = 0.0;  // max_i ((A_n w)_i^2 - w_i^2); <= 0 when dominated
    bool dominated = false;
};

inline ContrastDominanceReport nonnegative_contrast_dominance(const WeightVector& w) {
    if (!w.all_nonnegative()) {
        throw PreconditionError("nonnegative_contrast_dominance: weights must be nonnegative");
    }
    ContrastDominanceReport r;
    r.sorted_weights.assign(w.entries().begin(), w.entries().end());
    std::sort(r.sorted_weights.begin(), r.sorted_weights.end(), std::greater<>());
    r.contrast = apply_contrast(r.sorted_weights);
    r.worst_coordinate_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.contrast.size(); ++i) {
        const double c2 = r.contrast[i] * r.contrast[i];
        const double w2 = r.sorted_weights[i] * r.sorted_weights[i];
        r.contrast_norm_sq += c2;
        r.weight_norm_sq += w2;
        r.worst_coordinate_gap = std::max(r.worst_coordinate_gap, c2 - w2);
    }
    r.dominated = r.worst_coordinate_gap <= 0.0 && r.contrast_norm_sq <= r.weight_norm_sq;
    return r;
}

}  // namespace exch
