#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "exch/operators.hpp"
#include "exch/rng.hpp"
#include "test_support.hpp"

namespace exch {
namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

TEST(SuffixMean, DenseRowsForThree) {
    const Matrix b = build_suffix_mean(3).matrix;
    Matrix expected(3, 3);
    expected << 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0.5, 0.5, 0, 0, 1;
    EXPECT_LT(max_abs(b - expected), 1e-15);
    EXPECT_EQ(build_suffix_mean(1).matrix, Matrix::Identity(1, 1));
    EXPECT_THROW(build_suffix_mean(0), DomainError);
}

TEST(SuffixMean, ApplyMatchesHandComputation) {
    const std::vector<double> x{1.0, 0.0, -1.0};
    const Vector dense = build_suffix_mean(3).apply(x);
    const std::vector<double> implicit = apply_suffix_mean(x);
    const double expected[] = {0.0, -0.5, -1.0};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(dense(i), expected[i], 1e-15);
        EXPECT_NEAR(implicit[static_cast<std::size_t>(i)], expected[i], 1e-15);
    }
}

TEST(SuffixMean, UpperTriangularRowsSumToOne) {
    for (std::size_t n : {1u, 2u, 7u, 30u}) {
        const Matrix b = build_suffix_mean(n).matrix;
        EXPECT_LT((b.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-13);
        EXPECT_LT(max_abs(Matrix(b.triangularView<Eigen::StrictlyLower>())), 1e-300);
    }
}

TEST(Contrast, DenseRowsForThree) {
    const Matrix a = build_contrast(3).matrix;
    Matrix expected(3, 3);
    expected << 1, -0.5, -0.5, 0, 1, -1, 0, 0, 0;
    EXPECT_LT(max_abs(a - expected), 1e-15);
    EXPECT_THROW(build_contrast(1), DomainError);
}

TEST(Contrast, AnnihilatesOnesAndMatchesHandProduct) {
    const Vector ones = Vector::Ones(5);
    EXPECT_LT((build_contrast(5).matrix * ones).cwiseAbs().maxCoeff(), 1e-15);
    const std::vector<double> w{2.0, 1.0, 0.0};
    const std::vector<double> aw = apply_contrast(w);
    EXPECT_NEAR(aw[0], 1.5, 1e-15);
    EXPECT_NEAR(aw[1], 1.0, 1e-15);
    EXPECT_NEAR(aw[2], 0.0, 1e-15);
}

TEST(Contrast, ImplicitMatchesDense) {
    RandomStream rng(3, 0);
    for (std::size_t n : {2u, 3u, 10u, 64u}) {
        std::vector<double> w(n);
        for (double& v : w) v = rng.normal();
        const Vector dense = build_contrast(n).apply(w);
        const std::vector<double> implicit = apply_contrast(w);
        const Vector bdense = build_suffix_mean(n).apply(w);
        const std::vector<double> bimplicit = apply_suffix_mean(w);
        const Vector pdense = build_centering(n).apply(w);
        const std::vector<double> pimplicit = apply_centering(w);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            EXPECT_NEAR(dense(k), implicit[i], 1e-12);
            EXPECT_NEAR(bdense(k), bimplicit[i], 1e-12);
            EXPECT_NEAR(pdense(k), pimplicit[i], 1e-12);
        }
    }
}

TEST(Operators, DenseLimitEnforced) {
    EXPECT_THROW(build_suffix_mean(kDenseLimit + 1), DomainError);
    // The implicit forms have no limit.
    std::vector<double> x(kDenseLimit + 10, 1.0);
    const auto y = apply_suffix_mean(x);
    EXPECT_NEAR(y.front(), 1.0, 1e-12);
}

TEST(Centering, IdempotentAndAnnihilatesOnes) {
    for (std::size_t n : {1u, 4u, 17u}) {
        const Matrix p = build_centering(n).matrix;
        EXPECT_LT(max_abs(p * p - p), 1e-12);
        EXPECT_LT((p * Vector::Ones(static_cast<Eigen::Index>(n))).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Identity, ContrastTimesResidualIsCentering) {
    for (std::size_t n = 2; n <= 50; ++n) {
        const Matrix a = build_contrast(n).matrix;
        const Matrix b = build_suffix_mean(n).matrix;
        const Matrix id = Matrix::Identity(a.rows(), a.cols());
        EXPECT_LT(max_abs(a.transpose() * (id - b) - build_centering(n).matrix), 1e-12) << n;
    }
}

// The change of variables u -> v = A_n u turns sum u_i (x_i - xbar) into
// sum v_i (x_i - mean(x_{>=i})).
TEST(Identity, ChangeOfVariables) {
    RandomStream rng(5, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.bounded(12);
        std::vector<double> u(n), x(n);
        for (double& v : u) v = rng.normal();
        const double ubar = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
        for (double& v : u) v -= ubar;
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
        double lhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) lhs += u[i] * (x[i] - xbar);
        const auto v = apply_contrast(u);
        const auto suffix = apply_suffix_mean(x);
        double rhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) rhs += v[i] * (x[i] - suffix[i]);
        EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}

TEST(Identity, ProjectedNormBoundedByNorm) {
    RandomStream rng(6, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.bounded(30);
        std::vector<double> w(n);
        for (double& v : w) v = rng.normal();
        const auto pw = apply_centering(w);
        double quad = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            quad += w[i] * pw[i];
            norm += w[i] * w[i];
        }
        EXPECT_LE(quad, norm + 1e-12);
    }
}

TEST(PseudoInverse, TwoByTwoByHand) {
    Matrix expected(2, 2);
    expected << 0.25, -0.25, -0.25, 0.25;
    EXPECT_LT(max_abs(pseudo_inverse_gram(2) - expected), 1e-14);
}

TEST(PseudoInverse, Axioms) {
    for (std::size_t n : {3u, 4u, 5u, 9u}) {
        const Matrix a = build_contrast(n).matrix;
        const Matrix g = a.transpose() * a;
        const Matrix pinv = pseudo_inverse_gram(n);
        EXPECT_LT(max_abs(g * pinv * g - g), 1e-10) << n;
        EXPECT_LT(max_abs(pinv * g * pinv - pinv), 1e-10) << n;
        EXPECT_LT((pinv * Vector::Ones(static_cast<Eigen::Index>(n))).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(max_abs(pinv - pinv.transpose()), 1e-12);
    }
    EXPECT_THROW(pseudo_inverse_gram(1), DomainError);
}

TEST(PermutationAverage, GramPinvScalarForThree) {
    // (3 - 11/6) / 2 = 7/12 = 1 / (1 + 5/7)
    const Matrix closed = perm_average_gram_pinv(3);
    const Matrix p = build_centering(3).matrix;
    EXPECT_LT(max_abs(closed - (7.0 / 12.0) * p), 1e-15);
    const auto h3 = testing::harmonic_exact(3);
    EXPECT_NEAR((3.0 - h3.value()) / 2.0, 7.0 / 12.0, 1e-15);
}

TEST(PermutationAverage, ExplicitPermutationMatricesForThree) {
    // Independent of enumerate_permutation_average: build each P and form P^T M P.
    const Matrix pinv = pseudo_inverse_gram(3);
    Matrix acc = Matrix::Zero(3, 3);
    std::vector<int> perm{0, 1, 2};
    do {
        Matrix P = Matrix::Zero(3, 3);
        for (int i = 0; i < 3; ++i) P(perm[static_cast<std::size_t>(i)], i) = 1.0;
        acc += P.transpose() * pinv * P;
    } while (std::next_permutation(perm.begin(), perm.end()));
    acc /= 6.0;
    EXPECT_LT(max_abs(acc - perm_average_gram_pinv(3)), 1e-12);
    EXPECT_LT(max_abs(perm_average_gram_pinv_enumerated(3) - perm_average_gram_pinv(3)), 1e-12);
}

TEST(PermutationAverage, SuffixMeanForSmallN) {
    const Matrix avg3 = perm_average_suffix_mean_enumerated(3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(avg3(i, i), 11.0 / 18.0, 1e-14);
    EXPECT_LT(max_abs(avg3 - perm_average_suffix_mean(3)), 1e-12);

    const Matrix closed2 = perm_average_suffix_mean(2);
    const Matrix expected2 = 0.5 * Matrix::Constant(2, 2, 0.5) + 0.5 * Matrix::Identity(2, 2);
    EXPECT_LT(max_abs(closed2 - expected2), 1e-15);
}

TEST(PermutationAverage, ClosedFormsMatchEnumeration) {
    for (std::size_t n = 2; n <= 7; ++n) {
        EXPECT_LT(max_abs(perm_average_gram_pinv_enumerated(n) - perm_average_gram_pinv(n)), 1e-12) << n;
        const Matrix b = perm_average_suffix_mean_enumerated(n);
        EXPECT_LT(max_abs(b - perm_average_suffix_mean(n)), 1e-12) << n;
        EXPECT_LT((b.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << n;
        EXPECT_LT((perm_average_gram_pinv(n) * Vector::Ones(static_cast<Eigen::Index>(n)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-12);
    }
}

TEST(PermutationAverage, BitStableAcrossThreadCounts) {
    const Matrix one = perm_average_gram_pinv_enumerated(6, 1);
    const Matrix four = perm_average_gram_pinv_enumerated(6, 4);
    EXPECT_EQ(one, four);
}

TEST(PermutationAverage, EnumerationCap) {
    EXPECT_THROW(perm_average_gram_pinv_enumerated(9), ResourceError);
    EXPECT_THROW(perm_average_suffix_mean_enumerated(9), ResourceError);
    EXPECT_NO_THROW(perm_average_gram_pinv(200));
}

TEST(ContrastDominance, SortedNonnegativeWeights) {
    RandomStream rng(8, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.bounded(25);
        std::vector<double> w(n);
        for (double& v : w) v = std::abs(rng.normal());
        const auto r = nonnegative_contrast_dominance(WeightVector(w));
        EXPECT_TRUE(r.dominated);
        EXPECT_LE(r.contrast_norm_sq, r.weight_norm_sq + 1e-12);
        EXPECT_TRUE(std::is_sorted(r.sorted_weights.rbegin(), r.sorted_weights.rend()));
    }
    EXPECT_THROW(nonnegative_contrast_dominance(WeightVector({1.0, -1.0})), PreconditionError);
}

}  // namespace
}  // namespace exch
