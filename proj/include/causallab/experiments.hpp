#pragma once

// Experiment drivers: direction-robustness and mixture-component
// sweeps for the LR classifier, confounding-detector and six-class
// evaluations for trained classifiers, and LR heatmaps over the binary
// simplex.
//
// Random streams are keyed by content, not by position in a sweep:
// a direction cell is keyed by (k_x, k_y, alpha_max), hyperprior h of that
// cell by (cell, 0, h) and trial t by (cell, 1, h, t). Two sweeps that
// contain the same cell therefore produce the same numbers for it.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causallab/causal_sampler.hpp"
#include "causallab/classifier.hpp"
#include "causallab/dirichlet.hpp"
#include "causallab/errors.hpp"
#include "causallab/lr_direction.hpp"
#include "causallab/parallel.hpp"
#include "causallab/rng.hpp"
#include "causallab/tables.hpp"

namespace causallab {

using Cardinality = std::pair<std::size_t, std::size_t>;

struct SweepConfig {
    std::vector<Cardinality> cardinalities{{2, 2}, {3, 3}, {5, 5}, {10, 10}};
    std::vector<double> alpha_max_values{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::size_t n_hyperpriors = 100;
    std::size_t n_priors_per_hyperprior = 100;
    std::size_t n_components = 10;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool log_trials = false;

    void validate() const {
        if (cardinalities.empty() || alpha_max_values.empty()) {
            throw InvariantError("SweepConfig: need at least one cardinality and one alpha_max");
        }
        if (n_hyperpriors < 1 || n_priors_per_hyperprior < 1 || n_components < 1) {
            throw InvariantError("SweepConfig: all counts must be >= 1");
        }
        for (auto [kx, ky] : cardinalities) {
            if (kx < 2 || ky < 2) throw InvariantError("SweepConfig: cardinalities must be >= 2");
        }
        for (double a : alpha_max_values) {
            if (!(a >= 0.0)) throw InvariantError("SweepConfig: alpha_max must be >= 0");
        }
    }
};

struct SweepCell {
    std::size_t k_x = 0;
    std::size_t k_y = 0;
    double alpha_max = 0.0;
    std::size_t n_components = 0;
    double error_rate = 0.0; ///< mean of per-trial 0/1 outcomes
    double std_dev = 0.0;    ///< sample std of per-hyperprior error rates
    std::size_t n_trials = 0;
    std::size_t n_hyperpriors = 0;
    std::vector<double> hyperprior_errors; // not persisted in CSV

    /// Standard error of the mean across hyperpriors.
    double std_error() const noexcept {
        return std_dev / std::sqrt(static_cast<double>(std::max<std::size_t>(n_hyperpriors, 1)));
    }
};

struct TrialRecord {
    std::size_t cell = 0;
    std::size_t hyperprior = 0;
    std::size_t trial = 0;
    int truth = 0;
    int predicted = 0;
};

struct SweepResult {
    std::string kind; ///< "direction", "components" or "confounding"
    std::vector<SweepCell> cells;
    std::vector<TrialRecord> trials; ///< filled when SweepConfig::log_trials
};

/// sqrt(se_a^2 + se_b^2)
inline double pooled_std_error(const SweepCell& a, const SweepCell& b) noexcept {
    return std::hypot(a.std_error(), b.std_error());
}

namespace detail {

inline constexpr std::uint64_t kDirectionTag = 0x646972;
inline constexpr std::uint64_t kConfoundingTag = 0x636F6E66;
inline constexpr std::uint64_t kSixClassTag = 0x736978;

inline RngStream cell_stream(std::uint64_t seed, std::uint64_t tag, std::size_t k_x, std::size_t k_y,
                             double alpha_max) {
    return RngStream(seed).split({tag, k_x, k_y, std::bit_cast<std::uint64_t>(alpha_max)});
}

/// Fills mean and std from 0/1 outcomes laid out hyperprior-major.
inline void summarize(SweepCell& cell, std::span<const unsigned char> wrong, std::size_t n_hyperpriors,
                      std::size_t per_hyperprior) {
    cell.n_trials = wrong.size();
    cell.n_hyperpriors = n_hyperpriors;
    cell.hyperprior_errors.assign(n_hyperpriors, 0.0);
    std::size_t total = 0;
    for (std::size_t h = 0; h < n_hyperpriors; ++h) {
        std::size_t e = 0;
        for (std::size_t t = 0; t < per_hyperprior; ++t) e += wrong[h * per_hyperprior + t];
        total += e;
        cell.hyperprior_errors[h] = static_cast<double>(e) / static_cast<double>(per_hyperprior);
    }
    cell.error_rate = static_cast<double>(total) / static_cast<double>(wrong.size());
    double ss = 0.0;
    double mean = 0.0;
    for (double v : cell.hyperprior_errors) mean += v;
    mean /= static_cast<double>(n_hyperpriors);
    for (double v : cell.hyperprior_errors) ss += (v - mean) * (v - mean);
    cell.std_dev = n_hyperpriors > 1 ? std::sqrt(ss / static_cast<double>(n_hyperpriors - 1)) : 0.0;
}

inline void log_trials(SweepResult& result, std::size_t cell_index, std::span<const int> truth,
                       std::span<const int> predicted, std::size_t per_hyperprior) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
        result.trials.push_back({cell_index, i / per_hyperprior, i % per_hyperprior, truth[i], predicted[i]});
    }
}

} // namespace detail

/// One trial of the direction protocol under `spec`: uniform label, cause
/// and mechanism rows drawn from the spec's mixtures, composed and
/// transposed for Y->X.
inline std::pair<Direction, JointTable> sample_direction_trial(const HyperpriorSpec& spec, RngStream& rng) {
    const Direction truth = rng.uniform() < 0.5 ? Direction::kXToY : Direction::kYToX;
    const std::size_t kc = spec.k_cause();
    const std::size_t ke = spec.k_effect();
    std::vector<double> cause(kc);
    sample_from_mixture_into(spec.cause_prior, rng, cause);
    std::vector<double> joint(kc * ke);
    for (std::size_t i = 0; i < kc; ++i) {
        std::span<double> row(joint.data() + i * ke, ke);
        sample_from_mixture_into(spec.mechanism_prior, rng, row);
        for (double& v : row) v *= cause[i];
    }
    JointTable table(kc, ke, std::move(joint));
    if (truth == Direction::kYToX) table = transpose(table);
    return {truth, std::move(table)};
}

/// Runs the direction protocol for one (k_x, k_y, alpha_max, K) cell.
inline SweepCell run_direction_cell(std::size_t k_x, std::size_t k_y, double alpha_max, std::size_t n_components,
                                    const SweepConfig& cfg, SweepResult* log = nullptr,
                                    std::size_t cell_index = 0) {
    const RngStream root = detail::cell_stream(cfg.seed, detail::kDirectionTag, k_x, k_y, alpha_max);
    const std::size_t nh = cfg.n_hyperpriors;
    const std::size_t np = cfg.n_priors_per_hyperprior;
    std::vector<HyperpriorSpec> specs;
    specs.reserve(nh);
    for (std::size_t h = 0; h < nh; ++h) {
        RngStream hp_rng = root.split({0, h});
        specs.push_back(HyperpriorSpec::sample(alpha_max, k_x, k_y, n_components, hp_rng));
    }
    std::vector<unsigned char> wrong(nh * np, 0);
    std::vector<int> truth(nh * np, 0);
    std::vector<int> predicted(nh * np, 0);
    parallel_for(nh * np, cfg.threads, [&](std::size_t i) {
        const std::size_t h = i / np;
        RngStream rng = root.split({1, h, i % np});
        auto [label, joint] = sample_direction_trial(specs[h], rng);
        const Direction d = classify_direction(joint, ZeroPolicy::kClamp);
        truth[i] = label == Direction::kXToY ? 0 : 1;
        predicted[i] = d == Direction::kXToY ? 0 : 1;
        wrong[i] = d != label ? 1 : 0;
    });
    SweepCell cell;
    cell.k_x = k_x;
    cell.k_y = k_y;
    cell.alpha_max = alpha_max;
    cell.n_components = n_components;
    detail::summarize(cell, wrong, nh, np);
    if (log != nullptr) detail::log_trials(*log, cell_index, truth, predicted, np);
    return cell;
}

/// Direction-robustness sweep over cardinalities x alpha_max with
/// cfg.n_components mixture components.
inline SweepResult run_direction_sweep(const SweepConfig& cfg) {
    cfg.validate();
    SweepResult result{"direction", {}, {}};
    for (auto [kx, ky] : cfg.cardinalities) {
        for (double a : cfg.alpha_max_values) {
            result.cells.push_back(run_direction_cell(kx, ky, a, cfg.n_components, cfg,
                                                      cfg.log_trials ? &result : nullptr, result.cells.size()));
        }
    }
    return result;
}

inline const std::vector<std::size_t> kDefaultComponentCounts{1, 2, 4, 8, 16, 32, 64, 128};

/// Same protocol with the number of components varying at a fixed
/// alpha_max (the first entry of cfg.alpha_max_values).
inline SweepResult run_component_sweep(const SweepConfig& cfg,
                                       const std::vector<std::size_t>& component_counts = kDefaultComponentCounts) {
    cfg.validate();
    if (component_counts.empty()) throw InvariantError("run_component_sweep: no component counts");
    const double alpha_max = cfg.alpha_max_values.front();
    SweepResult result{"components", {}, {}};
    for (auto [kx, ky] : cfg.cardinalities) {
        for (std::size_t k : component_counts) {
            if (k < 1) throw InvariantError("run_component_sweep: component counts must be >= 1");
            result.cells.push_back(run_direction_cell(kx, ky, alpha_max, k, cfg,
                                                      cfg.log_trials ? &result : nullptr, result.cells.size()));
        }
    }
    return result;
}

/// Trains a classifier for `classes` at (k_x, k_y) on flat-hyperprior data.
inline std::pair<StructureClassifier, TrainReport> train_on_flat_data(
    std::size_t k_x, std::size_t k_y, std::vector<CausalStructure> classes, std::size_t n_per_class,
    const TrainConfig& cfg, std::uint64_t data_seed, const SamplerOptions& options = {}, unsigned threads = 1,
    const std::vector<std::size_t>& hidden = kDefaultHiddenLayers) {
    const auto ds = build_dataset(k_x, k_y, n_per_class, classes, HyperpriorDescriptor{}, data_seed, options, threads);
    auto clf = make_classifier(k_x, k_y, std::move(classes), cfg.seed, hidden);
    return train(std::move(clf), ds, cfg);
}

inline const StructureClassifier& find_model(std::span<const StructureClassifier> models, std::size_t k_x,
                                             std::size_t k_y) {
    for (const auto& m : models) {
        if (m.k_x == k_x && m.k_y == k_y) return m;
    }
    throw InvariantError("missing model for cardinality " + std::to_string(k_x) + "x" + std::to_string(k_y));
}

/// Confounding-detector sweep: per (cardinality, alpha_max) cell,
/// n_hyperpriors hyperprior draws with n_priors_per_hyperprior test items
/// each; item i of the cell is X->Y when i is even and confounded when odd.
/// Each cell is scored with the model of matching cardinality.
inline SweepResult run_confounding_sweep(std::span<const StructureClassifier> models, const SweepConfig& cfg,
                                         const SamplerOptions& options = {}) {
    cfg.validate();
    const std::array<CausalStructure, 2> labels{CausalStructure::kXToY, CausalStructure::kConfounded};
    SweepResult result{"confounding", {}, {}};
    for (auto [kx, ky] : cfg.cardinalities) {
        const auto& model = find_model(models, kx, ky);
        for (auto s : labels) {
            if (model.index_of(s) >= model.classes.size()) {
                throw InvariantError("confounding sweep needs a model with classes x->y and confounded");
            }
        }
        for (double a : cfg.alpha_max_values) {
            const RngStream root = detail::cell_stream(cfg.seed, detail::kConfoundingTag, kx, ky, a);
            const std::size_t nh = cfg.n_hyperpriors;
            const std::size_t np = cfg.n_priors_per_hyperprior;
            std::vector<unsigned char> wrong(nh * np, 0);
            std::vector<int> truth(nh * np, 0);
            std::vector<int> predicted(nh * np, 0);
            parallel_for(nh * np, cfg.threads, [&](std::size_t i) {
                const std::size_t h = i / np;
                const HyperpriorDescriptor hp{a, cfg.n_components, root.split({0, h}).key()};
                RngStream rng = root.split({1, h, i % np});
                const auto label = labels[i % 2];
                const auto item = sample_instance(label, kx, ky, hp, rng, options);
                const auto pred = model.predict(item.joint);
                truth[i] = code(label);
                predicted[i] = code(pred);
                wrong[i] = pred != label ? 1 : 0;
            });
            SweepCell cell;
            cell.k_x = kx;
            cell.k_y = ky;
            cell.alpha_max = a;
            cell.n_components = cfg.n_components;
            detail::summarize(cell, wrong, nh, np);
            if (cfg.log_trials) detail::log_trials(result, result.cells.size(), truth, predicted, np);
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

struct SixClassConfig {
    double alpha_max = 0.0; ///< 0 = flat test distributions
    std::size_t n_components = 10;
    std::size_t n_test = 10000;
    std::size_t n_repeats = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Evaluates `clf` on n_repeats fresh test sets. Each repeat draws its own
/// hyperprior (flat when alpha_max is 0); item i has class
/// clf.classes[i % n_classes], so classes are balanced to within one item.
inline std::vector<ConfusionMatrix> run_six_class_experiment(const StructureClassifier& clf,
                                                             const SixClassConfig& cfg,
                                                             const SamplerOptions& options = {}) {
    if (cfg.n_test < 1 || cfg.n_repeats < 1) throw InvariantError("six-class experiment: counts must be >= 1");
    const RngStream root = detail::cell_stream(cfg.seed, detail::kSixClassTag, clf.k_x, clf.k_y, cfg.alpha_max);
    const std::size_t nc = clf.classes.size();
    std::vector<ConfusionMatrix> out;
    out.reserve(cfg.n_repeats);
    for (std::size_t r = 0; r < cfg.n_repeats; ++r) {
        const HyperpriorDescriptor hp{cfg.alpha_max, cfg.n_components, root.split({0, r}).key()};
        std::vector<std::size_t> predicted(cfg.n_test);
        parallel_for(cfg.n_test, cfg.threads, [&](std::size_t i) {
            RngStream rng = root.split({1, r, i});
            const auto item = sample_instance(clf.classes[i % nc], clf.k_x, clf.k_y, hp, rng, options);
            predicted[i] = clf.index_of(clf.predict(item.joint));
        });
        ConfusionMatrix cm = empty_confusion(clf);
        for (std::size_t i = 0; i < cfg.n_test; ++i) cm.add(i % nc, predicted[i]);
        out.push_back(std::move(cm));
    }
    return out;
}

struct HeatmapSpec {
    std::vector<double> d_slices{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t resolution = 201;
};

/// log LR over (e, f) cell centers for each d slice of the binary simplex.
/// Cell (s, row, col) sits at e = (col + 0.5) / res, f = (row + 0.5) / res.
struct HeatmapGrid {
    std::vector<double> d_slices;
    std::size_t resolution = 0;
    std::vector<double> log_lr;       ///< slice-major, then row (f), then column (e)
    std::vector<unsigned char> masked; ///< 1 where d + e + f >= 1 or the LR is undefined

    double coordinate(std::size_t index) const noexcept {
        return (static_cast<double>(index) + 0.5) / static_cast<double>(resolution);
    }
    std::size_t offset(std::size_t slice, std::size_t row, std::size_t col) const noexcept {
        return (slice * resolution + row) * resolution + col;
    }
    double value(std::size_t slice, std::size_t row, std::size_t col) const { return log_lr[offset(slice, row, col)]; }
    bool is_masked(std::size_t slice, std::size_t row, std::size_t col) const {
        return masked[offset(slice, row, col)] != 0;
    }
    double masked_fraction(std::size_t slice) const {
        std::size_t m = 0;
        for (std::size_t i = 0; i < resolution * resolution; ++i) m += masked[slice * resolution * resolution + i];
        return static_cast<double>(m) / static_cast<double>(resolution * resolution);
    }
};

/// Flat-prior log LR when `hyperprior` is null; otherwise the same mixture
/// hyperprior is used for both causal factorizations.
inline HeatmapGrid render_lr_heatmaps(const HeatmapSpec& spec, const HyperpriorSpec* hyperprior = nullptr) {
    if (spec.resolution < 2) throw InvariantError("heatmap: resolution must be >= 2");
    for (double d : spec.d_slices) {
        if (!(d > 0.0 && d < 1.0)) throw InvariantError("heatmap: d slices must lie in (0, 1)");
    }
    if (hyperprior != nullptr && (hyperprior->k_cause() != 2 || hyperprior->k_effect() != 2)) {
        throw InvariantError("heatmap: hyperprior must be over binary variables");
    }
    HeatmapGrid g;
    g.d_slices = spec.d_slices;
    g.resolution = spec.resolution;
    const std::size_t n = spec.resolution;
    g.log_lr.assign(spec.d_slices.size() * n * n, 0.0);
    g.masked.assign(g.log_lr.size(), 1);
    for (std::size_t s = 0; s < spec.d_slices.size(); ++s) {
        const double d = spec.d_slices[s];
        for (std::size_t row = 0; row < n; ++row) {
            const double f = g.coordinate(row);
            for (std::size_t col = 0; col < n; ++col) {
                const double e = g.coordinate(col);
                if (d + e + f >= 1.0) continue;
                try {
                    const auto joint = JointTable::binary(d, e, f);
                    const double v = hyperprior == nullptr ? lr_general(joint).log_lr
                                                           : lr_with_hyperprior(joint, *hyperprior, *hyperprior).log_lr;
                    if (!std::isfinite(v)) continue;
                    g.log_lr[g.offset(s, row, col)] = v;
                    g.masked[g.offset(s, row, col)] = 0;
                } catch (const DegenerateError&) {
                    // stays masked
                }
            }
        }
    }
    return g;
}

/// Number of 4-connected regions of strictly positive and strictly
/// negative cells in one slice. Zero and masked cells separate regions.
inline std::size_t count_sign_regions(const HeatmapGrid& g, std::size_t slice) {
    const std::size_t n = g.resolution;
    std::vector<int> sign(n * n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (g.is_masked(slice, r, c)) continue;
            const double v = g.value(slice, r, c);
            sign[r * n + c] = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        }
    }
    std::vector<unsigned char> seen(n * n, 0);
    std::vector<std::size_t> stack;
    std::size_t regions = 0;
    for (std::size_t start = 0; start < n * n; ++start) {
        if (sign[start] == 0 || seen[start]) continue;
        ++regions;
        const int s = sign[start];
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const std::size_t r = cur / n;
            const std::size_t c = cur % n;
            const auto visit = [&](std::size_t idx) {
                if (!seen[idx] && sign[idx] == s) {
                    seen[idx] = 1;
                    stack.push_back(idx);
                }
            };
            if (r > 0) visit(cur - n);
            if (r + 1 < n) visit(cur + n);
            if (c > 0) visit(cur - 1);
            if (c + 1 < n) visit(cur + 1);
        }
    }
    return regions;
}

} // namespace causallab
