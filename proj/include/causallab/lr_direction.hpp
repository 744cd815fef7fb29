#pragma once

// Likelihood-ratio classifier for the causal direction between X and Y.
//
// Under X->Y with independent priors on P_X and every row of P_{Y|X}, the
// density of the joint is the prior density of (P_X, P_{Y|X}) divided by
// |det J_XY|, the Jacobian determinant of the bilinear map
// (P_X, P_{Y|X}) -> P_XY. The log likelihood ratio of X->Y against Y->X is
//
//   log F(P_X, P_{Y|X}) - log F(P_Y, P_{X|Y}) + log|det J_YX| - log|det J_XY|
//
// and |det J_XY| = prod_x P_X(x)^(k_Y - 1).
//
// Free-parameter convention for Jacobians: a simplex vector contributes its
// first n-1 entries, a conditional table the first k_target-1 entries of
// each row (row by row), and a joint table every entry but the last
// (row-major).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causallab/dirichlet.hpp"
#include "causallab/parallel.hpp"
#include "causallab/rng.hpp"
#include "causallab/tables.hpp"

namespace causallab {

enum class Direction { kXToY, kYToX };

inline const char* to_string(Direction d) noexcept {
    return d == Direction::kXToY ? "X->Y" : "Y->X";
}

struct LikelihoodRatioResult {
    double log_lr = 0.0;           ///< log p(X->Y | P_XY) / p(Y->X | P_XY)
    double log_det_xy = 0.0;       ///< log|det J_XY|
    double log_det_yx = 0.0;       ///< log|det J_YX|
    double log_prior_factor = 0.0; ///< log F(P_X, P_{Y|X}) - log F(P_Y, P_{X|Y})
    Direction decided = Direction::kXToY;
};

/// Ties (log_lr == 0) go to X->Y.
inline Direction decide(double log_lr) noexcept {
    return log_lr >= 0.0 ? Direction::kXToY : Direction::kYToX;
}

/// Jacobian of (P_X, P_{Y|X}) -> P_XY under the free-parameter convention;
/// a square matrix of side k_X * k_Y - 1. Rows index joint entries, columns
/// index factor parameters.
inline Eigen::MatrixXd forward_jacobian(const SimplexVector& marginal, const ConditionalTable& cond) {
    const std::size_t kx = marginal.size();
    const std::size_t ky = cond.k_target();
    if (cond.k_given() != kx) throw InvariantError("forward_jacobian: shape mismatch");
    const auto n = static_cast<Eigen::Index>(kx * ky - 1);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    const auto cond_col = [&](std::size_t i, std::size_t l) {
        return static_cast<Eigen::Index>((kx - 1) + i * (ky - 1) + l);
    };
    for (std::size_t i = 0; i < kx; ++i) {
        for (std::size_t j = 0; j < ky; ++j) {
            const auto row = static_cast<Eigen::Index>(i * ky + j);
            if (row == n) continue; // last joint entry is not free
            // d P_ij / d a_m: a_{kx-1} = 1 - sum of the free a's.
            for (std::size_t m = 0; m + 1 < kx; ++m) {
                if (i + 1 < kx) {
                    jac(row, static_cast<Eigen::Index>(m)) = (i == m) ? cond(i, j) : 0.0;
                } else {
                    jac(row, static_cast<Eigen::Index>(m)) = -cond(i, j);
                }
            }
            // d P_ij / d c_il: c_{i,ky-1} = 1 - sum of the free c_i's.
            for (std::size_t l = 0; l + 1 < ky; ++l) {
                if (j + 1 < ky) {
                    jac(row, cond_col(i, l)) = (j == l) ? marginal[i] : 0.0;
                } else {
                    jac(row, cond_col(i, l)) = -marginal[i];
                }
            }
        }
    }
    return jac;
}

/// log|det M| from an LU factorization with partial pivoting; -inf if singular.
inline double log_abs_det(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const auto& packed = lu.matrixLU();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < packed.rows(); ++i) acc += std::log(std::abs(packed(i, i)));
    return acc;
}

/// Closed form log|det J| = (k_other - 1) * sum_i log marginal_i.
inline double log_det_forward(const SimplexVector& marginal, std::size_t k_other) {
    if (k_other == 1) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        if (!(marginal[i] > 0.0)) {
            throw DegenerateError("degenerate marginal: entry " + std::to_string(i) + " is zero");
        }
        acc += std::log(marginal[i]);
    }
    return static_cast<double>(k_other - 1) * acc;
}

/// log F(P_cause, P_effect|cause) for all-flat Dir(1) priors:
/// log((k_c - 1)!) + k_c * log((k_e - 1)!). Cancels when k_X == k_Y.
inline double log_flat_prior_density(std::size_t k_cause, std::size_t k_effect) {
    return std::lgamma(static_cast<double>(k_cause)) +
           static_cast<double>(k_cause) * std::lgamma(static_cast<double>(k_effect));
}

/// Uninformative-hyperprior likelihood ratio for any interior joint.
inline LikelihoodRatioResult lr_general(const JointTable& joint,
                                        ZeroPolicy policy = ZeroPolicy::kReject) {
    if (policy == ZeroPolicy::kClamp && !joint.strictly_positive()) {
        return lr_general(clamp_to_interior(joint), ZeroPolicy::kReject);
    }
    const auto px = marginal_x(joint);
    const auto py = marginal_y(joint);
    LikelihoodRatioResult r;
    r.log_det_xy = log_det_forward(px, joint.k_y());
    r.log_det_yx = log_det_forward(py, joint.k_x());
    r.log_prior_factor =
        log_flat_prior_density(joint.k_x(), joint.k_y()) - log_flat_prior_density(joint.k_y(), joint.k_x());
    r.log_lr = r.log_prior_factor + r.log_det_yx - r.log_det_xy;
    r.decided = decide(r.log_lr);
    return r;
}

/// Closed form for 2x2 tables: LR = v(d + f) / v(d + e), v(p) = p(1 - p).
inline LikelihoodRatioResult lr_binary(const JointTable& joint) {
    if (joint.k_x() != 2 || joint.k_y() != 2) throw InvariantError("lr_binary: need a 2x2 table");
    const double d = joint(0, 0);
    const double e = joint(0, 1);
    const double f = joint(1, 0);
    const double a = d + e; // P(X = 0)
    const double g = d + f; // P(Y = 0)
    const double va = a * (1.0 - a);
    const double vg = g * (1.0 - g);
    if (!(va > 0.0) || !(vg > 0.0)) throw DegenerateError("degenerate marginal: a marginal is 0 or 1");
    LikelihoodRatioResult r;
    r.log_det_xy = std::log(va);
    r.log_det_yx = std::log(vg);
    r.log_lr = r.log_det_yx - r.log_det_xy;
    r.decided = decide(r.log_lr);
    return r;
}

/// Likelihood ratio with explicit hyperpriors for both factorizations.
/// `spec_xy` governs (P_X, P_{Y|X}); `spec_yx` governs (P_Y, P_{X|Y}).
inline LikelihoodRatioResult lr_with_hyperprior(const JointTable& joint, const HyperpriorSpec& spec_xy,
                                                const HyperpriorSpec& spec_yx,
                                                ZeroPolicy policy = ZeroPolicy::kReject) {
    if (spec_xy.k_cause() != joint.k_x() || spec_xy.k_effect() != joint.k_y() ||
        spec_yx.k_cause() != joint.k_y() || spec_yx.k_effect() != joint.k_x()) {
        throw InvariantError("lr_with_hyperprior: hyperprior dimensions do not match the table");
    }
    const JointTable p = (policy == ZeroPolicy::kClamp && !joint.strictly_positive())
                             ? clamp_to_interior(joint)
                             : joint;
    const auto px = marginal_x(p);
    const auto py = marginal_y(p);
    const auto y_given_x = conditional(p, Axis::kX);
    const auto x_given_y = conditional(p, Axis::kY);

    double log_f_xy = log_mixture_density(spec_xy.cause_prior, px);
    for (std::size_t x = 0; x < p.k_x(); ++x) {
        log_f_xy += log_mixture_density(spec_xy.mechanism_prior, y_given_x.row(x));
    }
    double log_f_yx = log_mixture_density(spec_yx.cause_prior, py);
    for (std::size_t y = 0; y < p.k_y(); ++y) {
        log_f_yx += log_mixture_density(spec_yx.mechanism_prior, x_given_y.row(y));
    }

    LikelihoodRatioResult r;
    r.log_det_xy = log_det_forward(px, p.k_y());
    r.log_det_yx = log_det_forward(py, p.k_x());
    r.log_prior_factor = log_f_xy - log_f_yx;
    r.log_lr = r.log_prior_factor + r.log_det_yx - r.log_det_xy;
    r.decided = decide(r.log_lr);
    return r;
}

/// The LR classifier: flat-prior likelihood ratio, ties to X->Y.
inline Direction classify_direction(const JointTable& joint, ZeroPolicy policy = ZeroPolicy::kReject) {
    return lr_general(joint, policy).decided;
}

struct BaselineErrorEstimate {
    double error_rate = 0.0;
    std::size_t n_trials = 0;
    double std_error = 0.0;
    std::size_t k_x = 0;
    std::size_t k_y = 0;
};

/// One trial of the generative protocol: uniform label, flat cause and
/// mechanism, compose (transposed for Y->X). Returns the true direction and
/// the joint.
inline std::pair<Direction, JointTable> sample_direction_trial(std::size_t k_x, std::size_t k_y,
                                                               RngStream& rng) {
    const Direction truth = rng.uniform() < 0.5 ? Direction::kXToY : Direction::kYToX;
    std::vector<double> cause(k_x);
    std::vector<double> joint(k_x * k_y);
    sample_flat_into(k_x, rng, cause);
    std::vector<double> row(k_y);
    for (std::size_t i = 0; i < k_x; ++i) {
        sample_flat_into(k_y, rng, row);
        for (std::size_t j = 0; j < k_y; ++j) joint[i * k_y + j] = cause[i] * row[j];
    }
    JointTable table(k_x, k_y, std::move(joint));
    if (truth == Direction::kYToX) table = transpose(table);
    return {truth, std::move(table)};
}

/// Monte Carlo estimate of the LR classifier's irreducible error under its
/// own flat generative model. Trial t uses stream RngStream(seed).split(t).
inline BaselineErrorEstimate estimate_baseline_error(std::size_t k_x, std::size_t k_y,
                                                     std::size_t n_trials, std::uint64_t seed,
                                                     unsigned threads = 1) {
    if (n_trials < 1) throw InvariantError("estimate_baseline_error: n_trials must be >= 1");
    if (k_x < 2 || k_y < 2) throw InvariantError("estimate_baseline_error: cardinalities must be >= 2");
    const RngStream root(seed);
    std::vector<unsigned char> wrong(n_trials, 0);
    parallel_for(n_trials, threads, [&](std::size_t t) {
        RngStream rng = root.split(t);
        auto [truth, joint] = sample_direction_trial(k_x, k_y, rng);
        wrong[t] = classify_direction(joint, ZeroPolicy::kClamp) != truth ? 1 : 0;
    });
    std::size_t errors = 0;
    for (auto w : wrong) errors += w;
    BaselineErrorEstimate est;
    est.n_trials = n_trials;
    est.k_x = k_x;
    est.k_y = k_y;
    est.error_rate = static_cast<double>(errors) / static_cast<double>(n_trials);
    est.std_error = std::sqrt(est.error_rate * (1.0 - est.error_rate) / static_cast<double>(n_trials));
    return est;
}

} // namespace causallab
