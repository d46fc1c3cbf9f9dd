#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "exch/bounds.hpp"
#include "exch/rng.hpp"

namespace exch {
namespace {

const WeightVector kPair({1.0, -1.0});

TEST(HoeffdingIid, Exponent) {
    EXPECT_DOUBLE_EQ(hoeffding_iid(kPair).exponent(1.0), 1.0);
    EXPECT_EQ(hoeffding_iid(kPair).exponent(0.0), 0.0);
    EXPECT_DOUBLE_EQ(hoeffding_iid(WeightVector({0.5, 0.5, 0.5, 0.5})).exponent(2.0), 2.0);
    EXPECT_FALSE(hoeffding_iid(kPair).bounded_domain());
}

TEST(BernsteinIid, Exponent) {
    const WeightVector w({1.0, 1.0});
    const auto zero = bernstein_iid(w, IidModel::make(0.0, 0.0));
    EXPECT_EQ(zero.exponent(1.0), 0.0);
    EXPECT_NEAR(bernstein_iid(w, IidModel::make(0.0, 0.25)).exponent(0.5), 0.09375, 1e-15);
    EXPECT_NEAR(bernstein_iid(w, IidModel::make(0.0, 0.25)).domain_half_width(), 1.5, 1e-15);
    EXPECT_THROW(bernstein_iid(w, IidModel::make(0.0, 0.25)).exponent(1.5), DomainError);
    EXPECT_THROW(bernstein_iid(w, IidModel::make(0.0, 0.25)).exponent(-1.5), DomainError);
}

TEST(Serfling, Exponent) {
    EXPECT_DOUBLE_EQ(serfling_unweighted(2, 2).exponent(1.0), 0.5);
    EXPECT_DOUBLE_EQ(serfling_unweighted(1, 10).exponent(1.3), 1.3 * 1.3 / 2.0);
    EXPECT_NEAR(serfling_unweighted(5, 100000000).exponent(1.0), 2.5, 1e-6);
    EXPECT_THROW(serfling_unweighted(3, 2), DomainError);
}

TEST(HoeffdingExch, Exponent) {
    EXPECT_DOUBLE_EQ(hoeffding_exch(kPair, 2).exponent(1.0), 2.0);
    EXPECT_EQ(hoeffding_exch(kPair, 2).exponent(0.0), 0.0);
    EXPECT_NEAR(hoeffding_exch(WeightVector({1.0, 1.0}), 4).exponent(1.0), 36.0 / 23.0, 1e-15);
    // exact MGF cosh(2) sits below e^2 for Example-3.1-style data
    EXPECT_LT(std::cosh(2.0), std::exp(hoeffding_exch(kPair, 2).exponent(1.0)));
    EXPECT_THROW(hoeffding_exch(kPair, 1), DomainError);
    EXPECT_THROW(hoeffding_exch(WeightVector({1.0}), 5), DomainError);
}

TEST(HoeffdingExchNonneg, Exponent) {
    EXPECT_DOUBLE_EQ(hoeffding_exch_nonneg(WeightVector({1.0, 1.0, 1.0})).exponent(1.0), 1.5);
    EXPECT_DOUBLE_EQ(hoeffding_exch_nonneg(WeightVector({1.0, 0.0, 0.0})).exponent(2.0), 2.0);
    EXPECT_THROW(hoeffding_exch_nonneg(WeightVector({1.0, -0.1})), PreconditionError);
}

TEST(BernsteinExch, Exponent) {
    const auto c = bernstein_exch(WeightVector({1.0, 1.0}), 0.0, 4);
    EXPECT_GT(c.exponent(0.3), 0.0);
    EXPECT_NEAR(c.variance_proxy(), (36.0 / 23.0) * (52.0 / 23.0) * 2.0, 1e-13);
    EXPECT_EQ(c.exponent(0.0), 0.0);

    const auto pair = bernstein_exch(kPair, 1.0, 2);
    EXPECT_NEAR(pair.domain_half_width(), 0.75, 1e-15);
    EXPECT_NEAR(pair.exponent(0.3), 1.5, 1e-14);
    EXPECT_LT(std::cosh(0.6), std::exp(pair.exponent(0.3)));
    EXPECT_THROW(pair.exponent(0.75), DomainError);

    const Population pop = population_stats({1.0, -1.0});
    EXPECT_DOUBLE_EQ(bernstein_exch(kPair, pop).exponent(0.3), 1.5);
}

TEST(SubgaussianTail, Values) {
    EXPECT_NEAR(subgaussian_tail(1.0, std::exp(-2.0)).radius, 2.0, 1e-15);
    EXPECT_NEAR(subgaussian_tail(2.0, 0.05).radius, 4.8954936613616331, 1e-12);
    EXPECT_EQ(subgaussian_tail(0.0, 0.3).radius, 0.0);
    EXPECT_THROW(subgaussian_tail(1.0, 0.0), DomainError);
    EXPECT_THROW(subgaussian_tail(1.0, 1.0), DomainError);
}

TEST(BernsteinTail, Values) {
    EXPECT_DOUBLE_EQ(bernstein_tail(1.7, 0.0, 0.2).radius, subgaussian_tail(1.7, 0.2).radius);
    EXPECT_NEAR(bernstein_tail(1.0, 1.0, std::exp(-1.0)).radius, std::sqrt(2.0) + 1.0, 1e-15);
    EXPECT_THROW(bernstein_tail(1.0, 1.0, -0.5), DomainError);
}

TEST(BernsteinTail, ExchangeableWorkedExample) {
    // w = (1,1,0,0), N = 4, sigma^2 = 1/2, delta = 0.1, recomputed term by term.
    const double eps = 13.0 / 23.0;
    const double sigma_tilde = std::sqrt(0.5 + 4.0 * eps);
    const double a = sigma_tilde * std::sqrt(2.0) * std::sqrt(1.0 + eps);
    const double b = (2.0 / 3.0) * 1.0 * (1.0 + eps);
    const double L = std::log(10.0);
    const double by_hand = a * std::sqrt(2.0 * L) + b * L;
    EXPECT_NEAR(by_hand, 8.711517205207816, 1e-12);
    const auto r = tail_radius(bernstein_exch(WeightVector({1.0, 1.0, 0.0, 0.0}), 0.5, 4), 0.1);
    EXPECT_NEAR(r.radius, 8.711517205207816, 1e-12);
    EXPECT_EQ(r.kind, BoundKind::bernstein_exch);
    EXPECT_EQ(r.sided, Sidedness::one_sided);
}

TEST(TailRadius, HoeffdingExchWorkedExample) {
    const auto r = tail_radius(hoeffding_exch(kPair, 2), 0.05);
    EXPECT_NEAR(r.radius, 4.8954936613616331, 1e-12);
}

TEST(GanStein, Values) {
    const auto r = gan_stein_tail(kPair, 0.05);
    EXPECT_NEAR(r.radius, 5.432406062962478, 1e-12);
    EXPECT_EQ(r.sided, Sidedness::two_sided);
    EXPECT_THROW(gan_stein_tail(kPair, 2.0), DomainError);
}

TEST(GanStein, LooserThanExchangeableHoeffding) {
    for (std::size_t N = 2; N <= 200; ++N) {
        for (double delta : {0.5, 0.1, 0.05, 0.01}) {
            EXPECT_LT(tail_radius(hoeffding_exch(kPair, N), delta).radius,
                      gan_stein_tail(kPair, delta).radius);
        }
    }
}

TEST(Polaczyk, Values) {
    const Population pop = population_stats({1.0, -1.0});
    EXPECT_NEAR(polaczyk_tail(kPair, pop, 0.05).radius, 230.5829694814263, 1e-9);
    const Population zero = population_stats({0.0, 0.0, 0.0});
    EXPECT_NEAR(polaczyk_tail(WeightVector({1.0, 0.5}), zero, 0.05).radius,
                36.0 * std::log(40.0), 1e-12);
    EXPECT_THROW(polaczyk_tail(WeightVector({1.5, 0.0}), pop, 0.05), PreconditionError);
    EXPECT_THROW(polaczyk_tail(kPair, population_stats({1.0, 0.0}), 0.05), PreconditionError);
}

TEST(IidLimit, HoeffdingGapIsEpsilonTimesExponent) {
    const std::vector<std::size_t> Ns{100, 1000, 10000, 100000, 1000000};
    const auto report = iid_limit_check(kPair, 1.0, Ns, 0.5);
    EXPECT_LT(report.max_identity_error, 1e-14);
    EXPECT_TRUE(report.hoeffding_monotone);
    EXPECT_TRUE(report.bernstein_monotone);
    const auto& last = report.rows.back();
    EXPECT_NEAR(last.hoeffding_gap, 1.3392919483495871e-05, 1e-12);
    EXPECT_LT(last.hoeffding_gap, 2e-5);
    ASSERT_TRUE(last.bernstein_gap);
    EXPECT_LT(*last.bernstein_gap, 1e-3);
    EXPECT_GT(*last.bernstein_gap, 0.0);
}

TEST(IidLimit, BernsteinGapSkippedOutsideDomain) {
    // lambda = 0.8 lies outside 3 / (2 (1 + eps_N)) at N = 2 only.
    const auto report = iid_limit_check(kPair, 0.8, {2, 3, 1000}, 0.2);
    EXPECT_FALSE(report.rows[0].bernstein_gap);
    EXPECT_TRUE(report.rows[2].bernstein_gap);
}

// Properties shared by all certificate families.
TEST(CertificateProperties, EvenNonnegativeVanishingAtZero) {
    RandomStream rng(21, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.bounded(8);
        const std::size_t N = n + rng.bounded(20);
        std::vector<double> ws(n);
        for (double& v : ws) v = rng.normal();
        const WeightVector w(ws);
        std::vector<double> abs_ws(ws);
        for (double& v : abs_ws) v = std::abs(v);
        const double sigma2 = rng.uniform();
        const std::vector<MgfCertificate> certs{
            hoeffding_iid(w),          bernstein_iid(w, IidModel::make(0.0, sigma2)),
            serfling_unweighted(n, N), hoeffding_exch(w, N),
            hoeffding_exch_nonneg(WeightVector(abs_ws)), bernstein_exch(w, sigma2, N)};
        for (const auto& c : certs) {
            EXPECT_EQ(c.exponent(0.0), 0.0);
            const double h = std::isfinite(c.domain_half_width()) ? c.domain_half_width() : 5.0;
            for (double f : {0.01, 0.3, 0.9, 0.995}) {
                const double lambda = f * h;
                EXPECT_EQ(c.exponent(lambda), c.exponent(-lambda));
                EXPECT_GE(c.exponent(lambda), 0.0);
            }
        }
    }
}

TEST(CertificateProperties, DominanceLadder) {
    RandomStream rng(22, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.bounded(8);
        const std::size_t N = n + rng.bounded(20);
        std::vector<double> ws(n);
        for (double& v : ws) v = std::abs(rng.normal());
        const WeightVector w(ws);
        const double lambda = rng.uniform(-3.0, 3.0);
        const double iid = hoeffding_iid(w).exponent(lambda);
        EXPECT_NEAR(hoeffding_exch(w, N).exponent(lambda), (1.0 + epsilon(N)) * iid, 1e-12 * (1 + iid));
        EXPECT_DOUBLE_EQ(hoeffding_exch_nonneg(w).exponent(lambda), iid);
        const WeightVector ones(std::vector<double>(n, 1.0));
        EXPECT_LE(serfling_unweighted(n, N).exponent(lambda), hoeffding_iid(ones).exponent(lambda));
    }
}

TEST(TailProperties, StrictlyDecreasingInDelta) {
    double prev_sg = INFINITY, prev_b = INFINITY;
    for (double delta = 0.001; delta < 1.0; delta += 0.001) {
        const double sg = subgaussian_tail(1.3, delta).radius;
        const double b = bernstein_tail(1.3, 0.4, delta).radius;
        EXPECT_LT(sg, prev_sg);
        EXPECT_LT(b, prev_b);
        prev_sg = sg;
        prev_b = b;
    }
    EXPECT_GT(subgaussian_tail(1.0, 1e-300).radius, 30.0);
}

TEST(BoundSpec, Dispatch) {
    BoundSpec spec;
    spec.weights = {1.0, -1.0};
    spec.kind = BoundKind::hoeffding_exch;
    EXPECT_THROW(evaluate_tail(spec, 0.05), DomainError);  // N missing
    spec.big_n = 2;
    EXPECT_NEAR(evaluate_tail(spec, 0.05).radius, 4.8954936613616331, 1e-12);
    spec.kind = BoundKind::serfling;
    EXPECT_THROW(evaluate_tail(spec, 0.05), PreconditionError);
    spec.kind = BoundKind::bernstein_exch;
    EXPECT_THROW(evaluate_tail(spec, 0.05), DomainError);  // sigma^2 missing
    spec.sigma2 = 1.0;
    EXPECT_NO_THROW(evaluate_tail(spec, 0.05));
    spec.kind = BoundKind::gan;
    EXPECT_EQ(evaluate_tail(spec, 0.05).sided, Sidedness::two_sided);
    EXPECT_FALSE(certificate_for(spec));
    for (BoundKind k : kAllBoundKinds) EXPECT_EQ(parse_bound_kind(to_string(k)), k);
    EXPECT_FALSE(parse_bound_kind("nope"));
}

}  // namespace
}  // namespace exch
