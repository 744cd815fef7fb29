#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "causallab/dirichlet.hpp"
#include "causallab/lr_direction.hpp"
#include "lr_oracle.hpp"
#include "test_support.hpp"

using namespace causallab;
using causallab::testing::finite_difference_abs_det;
using causallab::testing::random_factors;
using causallab::testing::rel_diff;

namespace {

constexpr double kFiniteDiffRelTol = 1e-5;
constexpr double kClosedFormRelTol = 1e-6;

} // namespace

TEST(Jacobian, BinarySpecExample) {
    const SimplexVector a({0.5, 0.5});
    const ConditionalTable c(std::vector<SimplexVector>{SimplexVector({0.2, 0.8}), SimplexVector({0.4, 0.6})});
    EXPECT_NEAR(std::abs(forward_jacobian(a, c).determinant()), 0.25, 1e-12);
    EXPECT_NEAR(finite_difference_abs_det(a, c), 0.25, 1e-8);
    // paper's inverse-Jacobian form at (d, e, f) = (0.1, 0.4, 0.2)
    const double de = 0.1 + 0.4;
    EXPECT_NEAR(1.0 / (de - de * de), 1.0 / 0.25, 1e-12);
}

TEST(Jacobian, BinaryDeterminantIndependentOfMechanism) {
    RngStream rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto [m, c] = random_factors(2, 2, rng);
        const double det = std::abs(forward_jacobian(m, c).determinant());
        ASSERT_LT(rel_diff(det, m[0] * (1 - m[0])), kClosedFormRelTol);
    }
}

TEST(Jacobian, MatchesFiniteDifferencesAndClosedForm) {
    RngStream rng(2);
    for (std::size_t kx : {2u, 3u, 4u}) {
        for (std::size_t ky : {2u, 3u, 4u}) {
            for (int i = 0; i < 100; ++i) {
                const auto [m, c] = random_factors(kx, ky, rng);
                const double analytic = std::exp(log_abs_det(forward_jacobian(m, c)));
                const double closed = std::exp(log_det_forward(m, ky));
                ASSERT_LT(rel_diff(analytic, finite_difference_abs_det(m, c)), kFiniteDiffRelTol) << kx << "x" << ky;
                ASSERT_LT(rel_diff(analytic, closed), kClosedFormRelTol) << kx << "x" << ky;
            }
        }
    }
}

TEST(LogDetForward, SpecExamples) {
    EXPECT_NEAR(log_det_forward(SimplexVector({0.5, 0.5}), 2), std::log(0.25), 1e-14);
    EXPECT_NEAR(log_det_forward(SimplexVector::uniform(3), 3), 2 * 3 * std::log(1.0 / 3), 1e-12);
    EXPECT_EQ(log_det_forward(SimplexVector({0.3, 0.7}), 1), 0.0);
    EXPECT_THROW(log_det_forward(SimplexVector({0.0, 1.0}), 2), DegenerateError);

    RngStream rng(3);
    std::vector<SimplexVector> rows;
    for (int i = 0; i < 3; ++i) rows.push_back(sample_dirichlet(DirichletParams::flat(3), rng));
    EXPECT_NEAR(log_abs_det(forward_jacobian(SimplexVector::uniform(3), ConditionalTable(rows))),
                2 * 3 * std::log(1.0 / 3), 1e-10);
}

TEST(LrBinary, SpecExamples) {
    const auto r = lr_binary(JointTable::binary(0.1, 0.4, 0.2));
    EXPECT_NEAR(r.log_lr, std::log(0.84), 1e-12);
    EXPECT_EQ(r.decided, Direction::kYToX);
    EXPECT_EQ(lr_binary(JointTable::uniform(2, 2)).log_lr, 0.0);
    EXPECT_NEAR(lr_binary(JointTable::binary(0.3, 0.15, 0.15)).log_lr, 0.0, 1e-15);
    EXPECT_THROW(lr_binary(JointTable::uniform(3, 3)), InvariantError);
}

TEST(LrGeneral, AgreesWithBinaryForm) {
    RngStream rng(4);
    for (int i = 0; i < 10000; ++i) {
        const auto p = sample_dirichlet(DirichletParams::flat(4), rng);
        const JointTable j(2, 2, p.vector());
        ASSERT_NEAR(lr_general(j).log_lr, lr_binary(j).log_lr, 1e-8);
    }
}

TEST(LrGeneral, BinarySignMatchesBoundaryPlanes) {
    // log LR > 0 exactly when (e - f)(2d + e + f - 1) > 0
    RngStream rng(5);
    for (int i = 0; i < 10000; ++i) {
        const auto p = sample_dirichlet(DirichletParams::flat(4), rng);
        const double d = p[0], e = p[1], f = p[2];
        const double s = (e - f) * (2 * d + e + f - 1);
        if (std::abs(s) < 1e-9) continue;
        ASSERT_EQ(lr_general(JointTable::binary(d, e, f)).log_lr > 0, s > 0);
    }
}

TEST(LrGeneral, TransposeAntisymmetry) {
    RngStream rng(6);
    for (std::size_t k : {2u, 3u, 5u, 10u}) {
        for (int i = 0; i < 500; ++i) {
            const auto p = sample_dirichlet(DirichletParams::flat(k * k), rng);
            const JointTable j(k, k, p.vector());
            ASSERT_NEAR(lr_general(transpose(j)).log_lr, -lr_general(j).log_lr, 1e-10);
        }
    }
}

TEST(LrGeneral, RectangularTransposeAntisymmetry) {
    RngStream rng(7);
    for (int i = 0; i < 500; ++i) {
        const auto p = sample_dirichlet(DirichletParams::flat(6), rng);
        const JointTable j(2, 3, p.vector());
        ASSERT_NEAR(lr_general(transpose(j)).log_lr, -lr_general(j).log_lr, 1e-10);
    }
}

TEST(LrGeneral, UniformEffectSideIsTheEffect) {
    const auto j = outer(SimplexVector({0.6, 0.3, 0.1}), SimplexVector::uniform(3));
    EXPECT_EQ(lr_general(j).decided, Direction::kXToY);
    EXPECT_EQ(lr_general(transpose(j)).decided, Direction::kYToX);
}

TEST(LrGeneral, ZeroEntryPolicy) {
    const JointTable j(2, 2, {0.0, 0.0, 0.5, 0.5});
    EXPECT_THROW(lr_general(j), DegenerateError);
    EXPECT_TRUE(std::isfinite(lr_general(j, ZeroPolicy::kClamp).log_lr));
}

TEST(LrGeneral, NonSquareFlatPriorMatchesDensityRatio) {
    // With flat priors the LR is the ratio of pushforward densities:
    // prior density (product of Dir(1) normalizers) over |det J|.
    const JointTable j(2, 3, {0.1, 0.2, 0.05, 0.3, 0.15, 0.2});
    const auto r = lr_general(j);
    const double dens_xy = std::log(1.0) + 2 * std::log(2.0) - r.log_det_xy;   // Dir(1)_2 * Dir(1)_3^2
    const double dens_yx = std::log(2.0) + 3 * std::log(1.0) - r.log_det_yx;   // Dir(1)_3 * Dir(1)_2^3
    EXPECT_NEAR(r.log_lr, dens_xy - dens_yx, 1e-12);
}

TEST(LrWithHyperprior, FlatRecovery) {
    RngStream rng(8);
    for (std::size_t k : {2u, 3u, 4u}) {
        const auto xy = HyperpriorSpec::sample(0.0, k, k, 10, rng);
        const auto yx = HyperpriorSpec::sample(0.0, k, k, 10, rng);
        for (int i = 0; i < 3000; ++i) {
            const auto p = sample_dirichlet(DirichletParams::flat(k * k), rng);
            const JointTable j(k, k, p.vector());
            const auto h = lr_with_hyperprior(j, xy, yx);
            ASSERT_NEAR(h.log_prior_factor, 0.0, 1e-9);
            ASSERT_NEAR(h.log_lr, lr_general(j).log_lr, 1e-9);
        }
    }
}

TEST(LrWithHyperprior, FiniteForSharedDir22) {
    const DirichletMixture d22({DirichletParams({2.0, 2.0})}, {1.0});
    const HyperpriorSpec spec{d22, d22, std::nullopt};
    RngStream rng(9);
    for (int i = 0; i < 10000; ++i) {
        const auto p = sample_dirichlet(DirichletParams::flat(4), rng);
        ASSERT_TRUE(std::isfinite(lr_with_hyperprior(JointTable(2, 2, p.vector()), spec, spec).log_lr));
    }
}

TEST(LrWithHyperprior, RejectsMismatchedShapes) {
    const auto spec = HyperpriorSpec::flat(3, 2);
    EXPECT_THROW(lr_with_hyperprior(JointTable::uniform(2, 2), spec, spec), InvariantError);
}

TEST(ClassifyDirection, SpecExamples) {
    const auto j = JointTable::binary(0.1, 0.4, 0.2);
    EXPECT_EQ(classify_direction(j), Direction::kYToX);
    EXPECT_EQ(classify_direction(transpose(j)), Direction::kXToY);
    EXPECT_EQ(classify_direction(JointTable::uniform(2, 2)), Direction::kXToY);
}

TEST(BaselineError, SymmetricUnderSwappingCardinalities) {
    const auto a = estimate_baseline_error(2, 3, 20000, 1);
    const auto b = estimate_baseline_error(3, 2, 20000, 2);
    EXPECT_LT(std::abs(a.error_rate - b.error_rate), 3 * std::hypot(a.std_error, b.std_error));
}

TEST(BaselineError, NonIncreasingInCardinality) {
    double prev = 1.0, prev_se = 0.0;
    for (std::size_t k : {2u, 3u, 4u, 6u, 8u, 10u}) {
        const auto e = estimate_baseline_error(k, k, 20000, 10 + k);
        EXPECT_LE(e.error_rate, prev + 2 * std::hypot(e.std_error, prev_se)) << "k " << k;
        prev = e.error_rate;
        prev_se = e.std_error;
    }
}

TEST(BaselineError, ThreadCountInvariant) {
    const auto a = estimate_baseline_error(3, 3, 5000, 4, 1);
    const auto b = estimate_baseline_error(3, 3, 5000, 4, 3);
    EXPECT_EQ(a.error_rate, b.error_rate);
}
