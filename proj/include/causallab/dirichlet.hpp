#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causallab/errors.hpp"
#include "causallab/rng.hpp"
#include "causallab/tables.hpp"

namespace causallab {

/// Concentration parameters of a Dirichlet distribution; every entry > 0.
class DirichletParams {
  public:
    explicit DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
        if (alpha_.size() < 2) throw InvariantError("DirichletParams: need at least 2 entries");
        for (std::size_t i = 0; i < alpha_.size(); ++i) {
            if (!(alpha_[i] > 0.0) || !std::isfinite(alpha_[i])) {
                throw InvariantError("DirichletParams: alpha_" + std::to_string(i) +
                                     " must be positive and finite");
            }
        }
    }

    /// Dir(1, ..., 1): the flat prior on the (n-1)-simplex.
    static DirichletParams flat(std::size_t n) { return DirichletParams(std::vector<double>(n, 1.0)); }

    std::size_t size() const noexcept { return alpha_.size(); }
    double operator[](std::size_t i) const { return alpha_[i]; }
    std::span<const double> alpha() const noexcept { return alpha_; }

    friend bool operator==(const DirichletParams&, const DirichletParams&) = default;

  private:
    std::vector<double> alpha_;
};

/// Draws Dirichlet(alpha) into `out` by normalizing independent Gamma(alpha_i)
/// variates. Normalization runs in log space, so the result sums to one even
/// when every Gamma draw would underflow.
inline void sample_dirichlet_into(std::span<const double> alpha, RngStream& rng,
                                  std::span<double> out) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = rng.log_gamma(alpha[i]);
        top = std::max(top, out[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = std::exp(out[i] - top);
        sum += out[i];
    }
    for (std::size_t i = 0; i < alpha.size(); ++i) out[i] /= sum;
}

/// Flat Dir(1) draw of length n into `out`; n may be 1.
inline void sample_flat_into(std::size_t n, RngStream& rng, std::span<double> out) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = -std::log(rng.uniform());
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

inline SimplexVector sample_dirichlet(const DirichletParams& params, RngStream& rng) {
    std::vector<double> out(params.size());
    sample_dirichlet_into(params.alpha(), rng, out);
    return SimplexVector(std::move(out));
}

/// log pdf with respect to Lebesgue measure on the first n-1 coordinates.
inline double log_dirichlet_density(const DirichletParams& params, std::span<const double> point) {
    if (point.size() != params.size()) {
        throw InvariantError("dirichlet_density: point has " + std::to_string(point.size()) +
                             " entries, params have " + std::to_string(params.size()));
    }
    double alpha_sum = 0.0;
    double log_norm = 0.0;
    double kernel = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double a = params[i];
        alpha_sum += a;
        log_norm -= std::lgamma(a);
        if (point[i] > 0.0) {
            kernel += (a - 1.0) * std::log(point[i]);
        } else if (a < 1.0) {
            throw DegenerateError("boundary evaluation: coordinate " + std::to_string(i) +
                                  " is zero and alpha < 1");
        } else if (a > 1.0) {
            kernel = -std::numeric_limits<double>::infinity();
        }
    }
    return std::lgamma(alpha_sum) + log_norm + kernel;
}

inline double log_dirichlet_density(const DirichletParams& params, const SimplexVector& point) {
    return log_dirichlet_density(params, point.values());
}

inline double dirichlet_density(const DirichletParams& params, const SimplexVector& point) {
    return std::exp(log_dirichlet_density(params, point));
}

/// Finite mixture of same-dimension Dirichlet components.
///
/// `alpha_max` is the exponent bound: every concentration parameter lies in
/// [2^-alpha_max, 2^alpha_max]. When not given, the tightest such bound is
/// computed from the components.
class DirichletMixture {
  public:
    DirichletMixture(std::vector<DirichletParams> components, std::vector<double> weights,
                     std::optional<double> alpha_max = std::nullopt)
        : components_(std::move(components)), weights_(std::move(weights)) {
        if (components_.empty()) throw InvariantError("DirichletMixture: no components");
        if (weights_.size() != components_.size()) {
            throw InvariantError("DirichletMixture: one weight per component required");
        }
        detail::validate_probabilities(weights_, "DirichletMixture weights");
        double tightest = 0.0;
        for (const auto& c : components_) {
            if (c.size() != components_.front().size()) {
                throw InvariantError("DirichletMixture: components differ in dimension");
            }
            for (double a : c.alpha()) tightest = std::max(tightest, std::abs(std::log2(a)));
        }
        alpha_max_ = alpha_max.value_or(tightest);
        if (alpha_max_ < 0.0) throw InvariantError("DirichletMixture: alpha_max must be >= 0");
        // exp2(log2(a)) can land an ulp away from a
        const double slack = 1.0 + 1e-12;
        const double lo = std::exp2(-alpha_max_) / slack;
        const double hi = std::exp2(alpha_max_) * slack;
        for (const auto& c : components_) {
            for (double a : c.alpha()) {
                if (a < lo || a > hi) {
                    throw InvariantError("DirichletMixture: alpha entry outside [2^-alpha_max, "
                                         "2^alpha_max]");
                }
            }
        }
    }

    static DirichletMixture flat(std::size_t dim) {
        return DirichletMixture({DirichletParams::flat(dim)}, {1.0}, 0.0);
    }

    std::size_t dim() const noexcept { return components_.front().size(); }
    std::size_t n_components() const noexcept { return components_.size(); }
    double alpha_max() const noexcept { return alpha_max_; }
    const std::vector<DirichletParams>& components() const noexcept { return components_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Component index for a uniform variate u in (0, 1).
    std::size_t pick(double u) const noexcept {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < weights_.size(); ++k) {
            acc += weights_[k];
            if (u < acc) return k;
        }
        return weights_.size() - 1;
    }

  private:
    std::vector<DirichletParams> components_;
    std::vector<double> weights_;
    double alpha_max_ = 0.0;
};

/// Random K-component mixture: every alpha uniform (linear scale) on
/// [2^-alpha_max, 2^alpha_max], uniform weights 1/K.
inline DirichletMixture sample_mixture_params(double alpha_max, std::size_t dim,
                                              std::size_t n_components, RngStream& rng) {
    if (alpha_max < 0.0) throw InvariantError("sample_mixture_params: alpha_max must be >= 0");
    if (dim < 2) throw InvariantError("sample_mixture_params: dim must be >= 2");
    if (n_components < 1) throw InvariantError("sample_mixture_params: need >= 1 component");
    const double lo = std::exp2(-alpha_max);
    const double hi = std::exp2(alpha_max);
    std::vector<DirichletParams> comps;
    comps.reserve(n_components);
    for (std::size_t k = 0; k < n_components; ++k) {
        std::vector<double> alpha(dim);
        for (auto& a : alpha) a = std::clamp(rng.uniform(lo, hi), lo, hi);
        comps.emplace_back(std::move(alpha));
    }
    return DirichletMixture(std::move(comps),
                            std::vector<double>(n_components, 1.0 / static_cast<double>(n_components)),
                            alpha_max);
}

/// Picks a component by weight (always consuming exactly one uniform), then
/// draws from it.
inline void sample_from_mixture_into(const DirichletMixture& mix, RngStream& rng,
                                     std::span<double> out) {
    const auto& comp = mix.components()[mix.pick(rng.uniform())];
    sample_dirichlet_into(comp.alpha(), rng, out);
}

inline SimplexVector sample_from_mixture(const DirichletMixture& mix, RngStream& rng) {
    std::vector<double> out(mix.dim());
    sample_from_mixture_into(mix, rng, out);
    return SimplexVector(std::move(out));
}

inline double log_mixture_density(const DirichletMixture& mix, std::span<const double> point) {
    std::vector<double> terms;
    terms.reserve(mix.n_components());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mix.n_components(); ++k) {
        if (mix.weights()[k] <= 0.0) continue;
        const double t = std::log(mix.weights()[k]) + log_dirichlet_density(mix.components()[k], point);
        terms.push_back(t);
        top = std::max(top, t);
    }
    if (!std::isfinite(top)) return top;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - top);
    return top + std::log(sum);
}

inline double log_mixture_density(const DirichletMixture& mix, const SimplexVector& point) {
    return log_mixture_density(mix, point.values());
}

inline double mixture_density(const DirichletMixture& mix, const SimplexVector& point) {
    return std::exp(log_mixture_density(mix, point));
}

/// Hyperprior for one causal factorization: a prior on the cause marginal,
/// one shared prior for every row of the mechanism, and optionally a prior
/// on the confounder marginal.
struct HyperpriorSpec {
    DirichletMixture cause_prior;
    DirichletMixture mechanism_prior;
    std::optional<DirichletMixture> confounder_prior;

    std::size_t k_cause() const noexcept { return cause_prior.dim(); }
    std::size_t k_effect() const noexcept { return mechanism_prior.dim(); }

    static HyperpriorSpec flat(std::size_t k_cause, std::size_t k_effect) {
        return {DirichletMixture::flat(k_cause), DirichletMixture::flat(k_effect), std::nullopt};
    }

    /// Independent random mixtures for the cause and the mechanism.
    static HyperpriorSpec sample(double alpha_max, std::size_t k_cause, std::size_t k_effect,
                                 std::size_t n_components, RngStream& rng) {
        auto cause = sample_mixture_params(alpha_max, k_cause, n_components, rng);
        auto mechanism = sample_mixture_params(alpha_max, k_effect, n_components, rng);
        return {std::move(cause), std::move(mechanism), std::nullopt};
    }
};

} // namespace causallab
