#pragma once

// Generative models for the six bivariate causal structures and labeled
// datasets of exact joint tables.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causallab/dirichlet.hpp"
#include "causallab/errors.hpp"
#include "causallab/parallel.hpp"
#include "causallab/rng.hpp"
#include "causallab/tables.hpp"

namespace causallab {

/// The six acyclic hypotheses over observed X, Y and an optional latent H.
/// Integer codes are stable and used in every file format.
enum class CausalStructure : int {
    kIndependent = 0,
    kXToY = 1,
    kYToX = 2,
    kConfounded = 3,
    kXToYConfounded = 4,
    kYToXConfounded = 5,
};

inline constexpr std::size_t kNumStructures = 6;

inline constexpr std::array<CausalStructure, kNumStructures> kAllStructures{
    CausalStructure::kIndependent,     CausalStructure::kXToY,
    CausalStructure::kYToX,            CausalStructure::kConfounded,
    CausalStructure::kXToYConfounded,  CausalStructure::kYToXConfounded,
};

inline constexpr int code(CausalStructure s) noexcept { return static_cast<int>(s); }

inline CausalStructure structure_from_code(int c) {
    if (c < 0 || c >= static_cast<int>(kNumStructures)) {
        throw InvariantError("CausalStructure: code " + std::to_string(c) + " outside 0..5");
    }
    return static_cast<CausalStructure>(c);
}

inline constexpr std::string_view name(CausalStructure s) noexcept {
    switch (s) {
    case CausalStructure::kIndependent: return "independent";
    case CausalStructure::kXToY: return "x->y";
    case CausalStructure::kYToX: return "y->x";
    case CausalStructure::kConfounded: return "confounded";
    case CausalStructure::kXToYConfounded: return "x->y+conf";
    case CausalStructure::kYToXConfounded: return "y->x+conf";
    }
    return "?";
}

/// Accepts the names above, their integer codes, or underscore spellings
/// such as "x_to_y_conf".
inline CausalStructure parse_structure(std::string_view text) {
    for (auto s : kAllStructures) {
        if (text == name(s) || text == std::to_string(code(s))) return s;
    }
    static constexpr std::array<std::string_view, kNumStructures> alt{
        "independent", "x_to_y", "y_to_x", "confounded", "x_to_y_conf", "y_to_x_conf"};
    for (std::size_t i = 0; i < alt.size(); ++i) {
        if (text == alt[i]) return kAllStructures[i];
    }
    throw InvariantError("unknown causal structure '" + std::string(text) + "'");
}

inline constexpr bool is_confounded(CausalStructure s) noexcept {
    return s == CausalStructure::kConfounded || s == CausalStructure::kXToYConfounded ||
           s == CausalStructure::kYToXConfounded;
}

/// How the direct and confounding mechanisms combine in X->Y+conf.
enum class ConfoundingVariant {
    /// P(h) P(x|h) P(y|x,h): the Bayes-net factorization of the drawn graph.
    kCanonical,
    /// P(x) P(y|x) * sum_h P(h) P(x|h) P(y|h), renormalized.
    kFactorProduct,
};

inline constexpr std::string_view name(ConfoundingVariant v) noexcept {
    return v == ConfoundingVariant::kCanonical ? "canonical" : "factor-product";
}

inline ConfoundingVariant parse_variant(std::string_view text) {
    if (text == "canonical") return ConfoundingVariant::kCanonical;
    if (text == "factor-product") return ConfoundingVariant::kFactorProduct;
    throw InvariantError("unknown confounding variant '" + std::string(text) + "'");
}

/// A hyperprior draw, recorded by its recipe. Concrete mixtures for each
/// (role, dimension) are deterministic functions of the recipe, so one
/// descriptor serves every cardinality a sampler needs, including the
/// random confounder cardinality.
struct HyperpriorDescriptor {
    double alpha_max = 0.0;
    std::size_t n_components = 10;
    std::uint64_t seed = 0;

    bool flat() const noexcept { return alpha_max == 0.0; }

    /// Prior for root marginals: P(X), P(Y), P(H).
    DirichletMixture root_prior(std::size_t dim) const { return mixture(kRootTag, dim); }
    /// Prior shared by every conditional row.
    DirichletMixture mechanism_prior(std::size_t dim) const { return mixture(kMechanismTag, dim); }

    friend bool operator==(const HyperpriorDescriptor&, const HyperpriorDescriptor&) = default;

  private:
    static constexpr std::uint64_t kRootTag = 0x726F6F74;
    static constexpr std::uint64_t kMechanismTag = 0x6D656368;

    DirichletMixture mixture(std::uint64_t role, std::size_t dim) const {
        if (flat()) return DirichletMixture::flat(dim);
        RngStream rng = RngStream(seed).split({role, dim});
        return sample_mixture_params(alpha_max, dim, n_components, rng);
    }
};

struct SamplerOptions {
    ConfoundingVariant variant = ConfoundingVariant::kCanonical;
    std::size_t h_min = 2;
    std::size_t h_max = 100;
    /// Test hook: use this P(H) (its length fixes |H|) instead of sampling.
    std::optional<std::vector<double>> forced_confounder_marginal;
};

struct LabeledDistribution {
    JointTable joint;
    CausalStructure label;
    std::optional<int> h_cardinality;
    HyperpriorDescriptor hyperprior;
};

namespace detail {

/// Draws marginals and conditional rows for one instance from a descriptor.
class FactorSampler {
  public:
    FactorSampler(const HyperpriorDescriptor& hp, RngStream& rng) : hp_(hp), rng_(rng) {}

    std::vector<double> root(std::size_t dim) {
        std::vector<double> out(dim);
        if (dim == 1) {
            out[0] = 1.0;
            return out;
        }
        draw(hp_.root_prior(dim), out);
        return out;
    }

    /// `n_rows` independent rows of length `dim`, concatenated.
    std::vector<double> rows(std::size_t n_rows, std::size_t dim) {
        std::vector<double> out(n_rows * dim);
        const auto prior = hp_.mechanism_prior(dim);
        for (std::size_t r = 0; r < n_rows; ++r) {
            draw(prior, std::span<double>(out).subspan(r * dim, dim));
        }
        return out;
    }

  private:
    void draw(const DirichletMixture& mix, std::span<double> out) {
        sample_from_mixture_into(mix, rng_, out);
    }

    const HyperpriorDescriptor& hp_;
    RngStream& rng_;
};

inline std::vector<double> transpose_flat(std::span<const double> m, std::size_t rows, std::size_t cols) {
    std::vector<double> t(m.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = m[r * cols + c];
    }
    return t;
}

inline void normalize(std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    for (double& x : v) x /= sum;
}

/// cause -> effect joint (k_cause x k_effect, row-major).
inline std::vector<double> direct_joint(FactorSampler& fs, std::size_t k_cause, std::size_t k_effect) {
    const auto cause = fs.root(k_cause);
    const auto mech = fs.rows(k_cause, k_effect);
    std::vector<double> j(k_cause * k_effect);
    for (std::size_t i = 0; i < k_cause; ++i) {
        for (std::size_t t = 0; t < k_effect; ++t) j[i * k_effect + t] = cause[i] * mech[i * k_effect + t];
    }
    return j;
}

inline std::vector<double> confounder_marginal(FactorSampler& fs, RngStream& rng,
                                               const SamplerOptions& opt) {
    if (opt.forced_confounder_marginal) {
        const auto& forced = *opt.forced_confounder_marginal;
        if (forced.empty()) throw InvariantError("forced confounder marginal is empty");
        return forced;
    }
    const auto h = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(opt.h_min), static_cast<std::int64_t>(opt.h_max)));
    return fs.root(h);
}

/// sum_h P(h) P(a|h) P(b|h), k_a x k_b.
inline std::vector<double> pure_confounded_joint(FactorSampler& fs, std::span<const double> p_h,
                                                 std::size_t k_a, std::size_t k_b) {
    const std::size_t h = p_h.size();
    const auto a_given_h = fs.rows(h, k_a);
    const auto b_given_h = fs.rows(h, k_b);
    std::vector<double> j(k_a * k_b, 0.0);
    for (std::size_t s = 0; s < h; ++s) {
        for (std::size_t a = 0; a < k_a; ++a) {
            const double w = p_h[s] * a_given_h[s * k_a + a];
            for (std::size_t b = 0; b < k_b; ++b) j[a * k_b + b] += w * b_given_h[s * k_b + b];
        }
    }
    return j;
}

/// Cause -> effect with confounding, oriented cause-major (k_cause x k_effect).
/// Returns the joint and |H|.
inline std::pair<std::vector<double>, int> causal_confounded_joint(FactorSampler& fs, RngStream& rng,
                                                                   const SamplerOptions& opt,
                                                                   std::size_t k_cause,
                                                                   std::size_t k_effect) {
    if (opt.variant == ConfoundingVariant::kFactorProduct) {
        // Draw order follows the factor listing: P(cause), P(effect|cause), P(H), ...
        auto j = direct_joint(fs, k_cause, k_effect);
        const auto p_h = confounder_marginal(fs, rng, opt);
        const auto conf = pure_confounded_joint(fs, p_h, k_cause, k_effect);
        for (std::size_t i = 0; i < j.size(); ++i) j[i] *= conf[i];
        normalize(j);
        return {std::move(j), static_cast<int>(p_h.size())};
    }
    const auto p_h = confounder_marginal(fs, rng, opt);
    const std::size_t h = p_h.size();
    const auto cause_given_h = fs.rows(h, k_cause);
    const auto effect_given_cause_h = fs.rows(h * k_cause, k_effect);
    std::vector<double> j(k_cause * k_effect, 0.0);
    for (std::size_t s = 0; s < h; ++s) {
        for (std::size_t c = 0; c < k_cause; ++c) {
            const double w = p_h[s] * cause_given_h[s * k_cause + c];
            const double* row = &effect_given_cause_h[(s * k_cause + c) * k_effect];
            for (std::size_t e = 0; e < k_effect; ++e) j[c * k_effect + e] += w * row[e];
        }
    }
    return {std::move(j), static_cast<int>(h)};
}

} // namespace detail

/// Draws one exact joint table from the generative model of `structure`.
inline LabeledDistribution sample_instance(CausalStructure structure, std::size_t k_x, std::size_t k_y,
                                           const HyperpriorDescriptor& hyperprior, RngStream& rng,
                                           const SamplerOptions& options = {}) {
    if (k_x < 2 || k_y < 2) throw InvariantError("sample_instance: cardinalities must be >= 2");
    detail::FactorSampler fs(hyperprior, rng);
    std::vector<double> joint;
    std::optional<int> h_card;
    switch (structure) {
    case CausalStructure::kIndependent: {
        const auto px = fs.root(k_x);
        const auto py = fs.root(k_y);
        joint.resize(k_x * k_y);
        for (std::size_t x = 0; x < k_x; ++x) {
            for (std::size_t y = 0; y < k_y; ++y) joint[x * k_y + y] = px[x] * py[y];
        }
        break;
    }
    case CausalStructure::kXToY:
        joint = detail::direct_joint(fs, k_x, k_y);
        break;
    case CausalStructure::kYToX:
        joint = detail::transpose_flat(detail::direct_joint(fs, k_y, k_x), k_y, k_x);
        break;
    case CausalStructure::kConfounded: {
        const auto p_h = detail::confounder_marginal(fs, rng, options);
        h_card = static_cast<int>(p_h.size());
        joint = detail::pure_confounded_joint(fs, p_h, k_x, k_y);
        break;
    }
    case CausalStructure::kXToYConfounded: {
        auto [j, h] = detail::causal_confounded_joint(fs, rng, options, k_x, k_y);
        joint = std::move(j);
        h_card = h;
        break;
    }
    case CausalStructure::kYToXConfounded: {
        auto [j, h] = detail::causal_confounded_joint(fs, rng, options, k_y, k_x);
        joint = detail::transpose_flat(j, k_y, k_x);
        h_card = h;
        break;
    }
    }
    detail::normalize(joint);
    return {JointTable(k_x, k_y, std::move(joint)), structure, h_card, hyperprior};
}

/// Items of one cardinality pair with per-class bookkeeping.
class LabeledDataset {
  public:
    LabeledDataset(std::size_t k_x, std::size_t k_y, std::vector<LabeledDistribution> items,
                   std::uint64_t seed = 0, HyperpriorDescriptor hyperprior = {},
                   ConfoundingVariant variant = ConfoundingVariant::kCanonical)
        : k_x_(k_x), k_y_(k_y), seed_(seed), hyperprior_(hyperprior), variant_(variant),
          items_(std::move(items)) {
        for (std::size_t i = 0; i < items_.size(); ++i) {
            const auto& it = items_[i];
            if (it.joint.k_x() != k_x_ || it.joint.k_y() != k_y_) {
                throw InvariantError("LabeledDataset: item " + std::to_string(i) +
                                     " has the wrong cardinalities");
            }
            if (it.h_cardinality.has_value() != is_confounded(it.label)) {
                throw InvariantError("LabeledDataset: item " + std::to_string(i) +
                                     " h_cardinality must be present iff the label is confounded");
            }
            ++counts_[static_cast<std::size_t>(code(it.label))];
        }
    }

    std::size_t k_x() const noexcept { return k_x_; }
    std::size_t k_y() const noexcept { return k_y_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const HyperpriorDescriptor& hyperprior() const noexcept { return hyperprior_; }
    ConfoundingVariant variant() const noexcept { return variant_; }
    const std::vector<LabeledDistribution>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    const std::array<std::size_t, kNumStructures>& class_counts() const noexcept { return counts_; }

    /// Labels present, in code order.
    std::vector<CausalStructure> classes() const {
        std::vector<CausalStructure> out;
        for (auto s : kAllStructures) {
            if (counts_[static_cast<std::size_t>(code(s))] > 0) out.push_back(s);
        }
        return out;
    }

    friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
        if (a.k_x_ != b.k_x_ || a.k_y_ != b.k_y_ || a.seed_ != b.seed_ ||
            !(a.hyperprior_ == b.hyperprior_) || a.variant_ != b.variant_ ||
            a.items_.size() != b.items_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.items_.size(); ++i) {
            const auto& x = a.items_[i];
            const auto& y = b.items_[i];
            if (!(x.joint == y.joint) || x.label != y.label || x.h_cardinality != y.h_cardinality) {
                return false;
            }
        }
        return true;
    }

  private:
    std::size_t k_x_;
    std::size_t k_y_;
    std::uint64_t seed_;
    HyperpriorDescriptor hyperprior_;
    ConfoundingVariant variant_;
    std::vector<LabeledDistribution> items_;
    std::array<std::size_t, kNumStructures> counts_{};
};

/// Stream for item `index` of class `structure` in a dataset seeded `seed`.
inline RngStream item_stream(std::uint64_t seed, CausalStructure structure, std::size_t index) {
    return RngStream(seed).split({static_cast<std::uint64_t>(code(structure)), index});
}

/// Exactly `n_per_class` items per requested class, class-major in the
/// order given. Item (c, i) is drawn from item_stream(seed, c, i), so the
/// result does not depend on `threads`.
inline LabeledDataset build_dataset(std::size_t k_x, std::size_t k_y, std::size_t n_per_class,
                                    std::span<const CausalStructure> classes,
                                    const HyperpriorDescriptor& hyperprior, std::uint64_t seed,
                                    const SamplerOptions& options = {}, unsigned threads = 1) {
    if (n_per_class < 1) throw InvariantError("build_dataset: n_per_class must be >= 1");
    if (classes.empty()) throw InvariantError("build_dataset: no classes requested");
    const std::size_t total = n_per_class * classes.size();
    std::vector<std::optional<LabeledDistribution>> slots(total);
    parallel_for(total, threads, [&](std::size_t i) {
        const auto s = classes[i / n_per_class];
        RngStream rng = item_stream(seed, s, i % n_per_class);
        slots[i] = sample_instance(s, k_x, k_y, hyperprior, rng, options);
    });
    std::vector<LabeledDistribution> items;
    items.reserve(total);
    for (auto& s : slots) items.push_back(std::move(*s));
    return LabeledDataset(k_x, k_y, std::move(items), seed, hyperprior, options.variant);
}

} // namespace causallab
