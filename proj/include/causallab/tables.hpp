#pragma once

// Probability vectors and two-way tables.
//
// All three types validate on construction and are immutable afterwards.
// Tables are stored row-major; a JointTable's rows index X and its columns
// index Y.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "causallab/errors.hpp"

namespace causallab {

inline constexpr double kSumTolerance = 1e-9;
inline constexpr double kRoundTripTolerance = 1e-12;
inline constexpr double kClampEpsilon = 1e-12;

/// How operations that divide by marginal entries treat zeros.
enum class ZeroPolicy {
    kReject, ///< throw DegenerateError
    kClamp,  ///< raise entries below kClampEpsilon to it, renormalize
};

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// Checks finiteness, non-negativity and unit sum; throws naming `what`.
inline void validate_probabilities(std::span<const double> values, const char* what) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v)) {
            throw InvariantError(std::string(what) + ": entry " + std::to_string(i) +
                                 " is not finite");
        }
        if (v < 0.0) {
            throw InvariantError(std::string(what) + ": entry " + std::to_string(i) +
                                 " is negative (" + format_double(v) + ")");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvariantError(std::string(what) + ": entries sum to " + format_double(sum) +
                             ", expected 1 within 1e-9");
    }
}

/// Raises entries below `eps` to `eps` and renormalizes in place.
inline void clamp_in_place(std::span<double> values, double eps = kClampEpsilon) {
    double sum = 0.0;
    for (auto& v : values) {
        v = std::max(v, eps);
        sum += v;
    }
    for (auto& v : values) v /= sum;
}

} // namespace detail

/// A point on the probability simplex with n >= 2 coordinates.
class SimplexVector {
  public:
    explicit SimplexVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2) {
            throw InvariantError("SimplexVector: length must be >= 2, got " +
                                 std::to_string(values_.size()));
        }
        detail::validate_probabilities(values_, "SimplexVector");
    }

    static SimplexVector uniform(std::size_t n) {
        return SimplexVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    bool strictly_positive() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
    }

    friend bool operator==(const SimplexVector&, const SimplexVector&) = default;

  private:
    std::vector<double> values_;
};

/// Copy of `p` with entries below kClampEpsilon raised and renormalized.
inline SimplexVector clamp_to_interior(const SimplexVector& p) {
    std::vector<double> v(p.values().begin(), p.values().end());
    detail::clamp_in_place(v);
    return SimplexVector(std::move(v));
}

/// Exact joint distribution over k_x * k_y states.
class JointTable {
  public:
    JointTable(std::size_t k_x, std::size_t k_y, std::vector<double> entries)
        : k_x_(k_x), k_y_(k_y), entries_(std::move(entries)) {
        if (k_x_ < 2 || k_y_ < 2) throw InvariantError("JointTable: cardinalities must be >= 2");
        if (entries_.size() != k_x_ * k_y_) {
            throw InvariantError("JointTable: expected " + std::to_string(k_x_ * k_y_) +
                                 " entries for a " + std::to_string(k_x_) + "x" +
                                 std::to_string(k_y_) + " table, got " +
                                 std::to_string(entries_.size()));
        }
        detail::validate_probabilities(entries_, "JointTable");
    }

    /// Binary table from the (d, e, f) parameterization; the last entry is 1-d-e-f.
    static JointTable binary(double d, double e, double f) {
        return JointTable(2, 2, {d, e, f, 1.0 - d - e - f});
    }

    static JointTable uniform(std::size_t k_x, std::size_t k_y) {
        return JointTable(k_x, k_y,
                          std::vector<double>(k_x * k_y, 1.0 / static_cast<double>(k_x * k_y)));
    }

    std::size_t k_x() const noexcept { return k_x_; }
    std::size_t k_y() const noexcept { return k_y_; }
    double operator()(std::size_t x, std::size_t y) const { return entries_[x * k_y_ + y]; }
    std::span<const double> entries() const noexcept { return entries_; }
    std::span<const double> row(std::size_t x) const {
        return std::span<const double>(entries_).subspan(x * k_y_, k_y_);
    }

    bool strictly_positive() const noexcept {
        return std::all_of(entries_.begin(), entries_.end(), [](double v) { return v > 0.0; });
    }

    friend bool operator==(const JointTable&, const JointTable&) = default;

  private:
    std::size_t k_x_;
    std::size_t k_y_;
    std::vector<double> entries_;
};

/// Copy of `joint` with entries below kClampEpsilon raised and renormalized.
inline JointTable clamp_to_interior(const JointTable& joint) {
    std::vector<double> v(joint.entries().begin(), joint.entries().end());
    detail::clamp_in_place(v);
    return JointTable(joint.k_x(), joint.k_y(), std::move(v));
}

/// A row-stochastic table: row i is P(target | given = i).
class ConditionalTable {
  public:
    ConditionalTable(std::size_t k_given, std::size_t k_target, std::vector<double> entries)
        : k_given_(k_given), k_target_(k_target), entries_(std::move(entries)) {
        if (k_target_ < 2) throw InvariantError("ConditionalTable: target cardinality must be >= 2");
        if (k_given_ < 1) throw InvariantError("ConditionalTable: need at least one row");
        if (entries_.size() != k_given_ * k_target_) {
            throw InvariantError("ConditionalTable: entry count does not match shape");
        }
        for (std::size_t i = 0; i < k_given_; ++i) {
            const std::string what = "ConditionalTable row " + std::to_string(i);
            detail::validate_probabilities(row(i), what.c_str());
        }
    }

    explicit ConditionalTable(const std::vector<SimplexVector>& rows)
        : ConditionalTable(rows.size(), rows.empty() ? 0 : rows.front().size(), flatten(rows)) {}

    std::size_t k_given() const noexcept { return k_given_; }
    std::size_t k_target() const noexcept { return k_target_; }
    double operator()(std::size_t given, std::size_t target) const {
        return entries_[given * k_target_ + target];
    }
    std::span<const double> row(std::size_t given) const {
        return std::span<const double>(entries_).subspan(given * k_target_, k_target_);
    }
    SimplexVector row_vector(std::size_t given) const {
        auto r = row(given);
        return SimplexVector(std::vector<double>(r.begin(), r.end()));
    }
    std::span<const double> entries() const noexcept { return entries_; }

    friend bool operator==(const ConditionalTable&, const ConditionalTable&) = default;

  private:
    static std::vector<double> flatten(const std::vector<SimplexVector>& rows) {
        std::vector<double> out;
        for (const auto& r : rows) {
            if (r.size() != rows.front().size()) {
                throw InvariantError("ConditionalTable: rows have different lengths");
            }
            out.insert(out.end(), r.values().begin(), r.values().end());
        }
        return out;
    }

    std::size_t k_given_;
    std::size_t k_target_;
    std::vector<double> entries_;
};

enum class Axis { kX, kY };

/// Row sums: P_X.
inline SimplexVector marginal_x(const JointTable& joint) {
    std::vector<double> m(joint.k_x(), 0.0);
    for (std::size_t x = 0; x < joint.k_x(); ++x) {
        for (double v : joint.row(x)) m[x] += v;
    }
    return SimplexVector(std::move(m));
}

/// Column sums: P_Y.
inline SimplexVector marginal_y(const JointTable& joint) {
    std::vector<double> m(joint.k_y(), 0.0);
    for (std::size_t x = 0; x < joint.k_x(); ++x) {
        for (std::size_t y = 0; y < joint.k_y(); ++y) m[y] += joint(x, y);
    }
    return SimplexVector(std::move(m));
}

/// Entries swapped across the diagonal; k_x and k_y trade places.
inline JointTable transpose(const JointTable& joint) {
    std::vector<double> t(joint.entries().size());
    for (std::size_t x = 0; x < joint.k_x(); ++x) {
        for (std::size_t y = 0; y < joint.k_y(); ++y) t[y * joint.k_x() + x] = joint(x, y);
    }
    return JointTable(joint.k_y(), joint.k_x(), std::move(t));
}

/// P(target | given). `given_axis == Axis::kX` yields P(Y|X) with one row
/// per x; `Axis::kY` yields P(X|Y) with one row per y.
inline ConditionalTable conditional(const JointTable& joint, Axis given_axis,
                                    ZeroPolicy policy = ZeroPolicy::kReject) {
    if (policy == ZeroPolicy::kClamp) {
        return conditional(clamp_to_interior(joint), given_axis, ZeroPolicy::kReject);
    }
    const JointTable& oriented = joint;
    const bool by_x = given_axis == Axis::kX;
    const std::size_t k_given = by_x ? oriented.k_x() : oriented.k_y();
    const std::size_t k_target = by_x ? oriented.k_y() : oriented.k_x();
    const SimplexVector m = by_x ? marginal_x(oriented) : marginal_y(oriented);
    std::vector<double> rows(k_given * k_target);
    for (std::size_t g = 0; g < k_given; ++g) {
        if (!(m[g] > 0.0)) {
            throw DegenerateError("undefined conditional: marginal entry " + std::to_string(g) +
                                  " is zero");
        }
        for (std::size_t t = 0; t < k_target; ++t) {
            const double v = by_x ? oriented(g, t) : oriented(t, g);
            rows[g * k_target + t] = v / m[g];
        }
    }
    return ConditionalTable(k_given, k_target, std::move(rows));
}

/// P(cause, effect)(i, j) = marginal_i * conditional(i, j).
inline JointTable compose(const SimplexVector& marginal, const ConditionalTable& cond) {
    if (marginal.size() != cond.k_given()) {
        throw InvariantError("compose: marginal length " + std::to_string(marginal.size()) +
                             " does not match conditional rows " + std::to_string(cond.k_given()));
    }
    std::vector<double> j(cond.k_given() * cond.k_target());
    for (std::size_t i = 0; i < cond.k_given(); ++i) {
        for (std::size_t t = 0; t < cond.k_target(); ++t) {
            j[i * cond.k_target() + t] = marginal[i] * cond(i, t);
        }
    }
    return JointTable(cond.k_given(), cond.k_target(), std::move(j));
}

inline JointTable outer(const SimplexVector& p, const SimplexVector& q) {
    std::vector<double> j(p.size() * q.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t t = 0; t < q.size(); ++t) j[i * q.size() + t] = p[i] * q[t];
    }
    return JointTable(p.size(), q.size(), std::move(j));
}

/// Mutual information in nats; 0 exactly for product tables up to rounding.
inline double mutual_information(const JointTable& joint) {
    const auto px = marginal_x(joint);
    const auto py = marginal_y(joint);
    double mi = 0.0;
    for (std::size_t x = 0; x < joint.k_x(); ++x) {
        for (std::size_t y = 0; y < joint.k_y(); ++y) {
            const double p = joint(x, y);
            if (p > 0.0) mi += p * std::log(p / (px[x] * py[y]));
        }
    }
    return mi;
}

} // namespace causallab
