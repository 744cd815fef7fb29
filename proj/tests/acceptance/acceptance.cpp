// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Test binaries for the property-suite criterion are
// passed with --suite.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "causallab/causallab.hpp"
#include "../lr_oracle.hpp"

using namespace causallab;

namespace {

// Tolerances and budgets, pinned here.
constexpr double kFiniteDiffRelTol = 1e-5;
constexpr double kClosedFormRelTol = 1e-6;
constexpr std::size_t kFiniteDiffPoints = 100;
constexpr std::size_t kClosedFormPoints = 1000;
constexpr double kBaselineK2 = 0.40;
constexpr double kBaselineK2Tol = 0.02;
constexpr double kBaselineK10Max = 0.005;
constexpr std::size_t kBaselineTrials = 100000;
constexpr double kPooledSigmas = 2.0;
constexpr double kConfoundingMaxError = 0.05;
constexpr double kSixClassK2Target = 0.2477;
constexpr double kSixClassK2Tol = 0.04;
constexpr double kSixClassK10MaxError = 0.03;
constexpr double kSixClassShiftFactor = 3.0;
constexpr std::size_t kSixClassShiftRepeats = 10;
constexpr double kIndependenceRecall = 0.95;

constexpr double kBudgetJacobian = 60;
constexpr double kBudgetBoundary = 60;
constexpr double kBudgetBaseline = 300;
constexpr double kBudgetSweep = 900;
constexpr double kBudgetConfounding = 1800;
constexpr double kBudgetTrainingPerK = 3600;
constexpr double kBudgetSuites = 600;

constexpr std::uint64_t kSeed = 20240601;

// Training setup for the classifier criteria; see README. The binary
// tasks and the k=2 six-class task train at lr 1e-2 on 20000 items per
// class; the k=10 six-class model needs the default lr and 160000 per class
// to get under 3% flat error.
struct TrainingSetup {
    double learning_rate;
    std::size_t per_class;
};
constexpr TrainingSetup kBinaryTaskTraining{1e-2, 20000};
constexpr TrainingSetup kSixClassK2Training{1e-2, 20000};
constexpr TrainingSetup kSixClassK10Training{1e-3, 160000};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

Outcome jacobians() {
    RngStream root(kSeed);
    double worst_fd = 0.0, worst_closed = 0.0;
    for (std::size_t kx = 2; kx <= 4; ++kx) {
        for (std::size_t ky = 2; ky <= 4; ++ky) {
            RngStream rng = root.split({kx, ky});
            for (std::size_t i = 0; i < kClosedFormPoints; ++i) {
                const auto [m, c] = testing::random_factors(kx, ky, rng);
                const double analytic = std::abs(forward_jacobian(m, c).determinant());
                worst_closed = std::max(worst_closed, rel_diff(analytic, std::exp(log_det_forward(m, ky))));
                if (i < kFiniteDiffPoints) {
                    worst_fd = std::max(worst_fd, rel_diff(analytic, testing::finite_difference_abs_det(m, c)));
                }
            }
        }
    }
    return {worst_fd < kFiniteDiffRelTol && worst_closed < kClosedFormRelTol,
            "worst rel diff vs finite differences " + fmt(worst_fd, 3) + ", vs closed form " +
                fmt(worst_closed, 3) + " over k_x, k_y in {2,3,4}"};
}

Outcome binary_boundary() {
    const auto g = render_lr_heatmaps({});
    const double cell = 1.0 / static_cast<double>(g.resolution - 1);
    std::size_t checked = 0, mismatched_far = 0, near_plane = 0;
    for (std::size_t s = 0; s < g.d_slices.size(); ++s) {
        const double d = g.d_slices[s];
        for (std::size_t r = 0; r < g.resolution; ++r) {
            for (std::size_t c = 0; c < g.resolution; ++c) {
                if (g.is_masked(s, r, c)) continue;
                const double e = g.coordinate(c), f = g.coordinate(r);
                const double a = e - f, b = 2 * d + e + f - 1;
                const double dist = std::min(std::abs(a), std::abs(b)) / std::sqrt(2.0);
                ++checked;
                if (dist <= cell) {
                    ++near_plane;
                    continue;
                }
                const bool predicted_positive = a * b > 0;
                if ((g.value(s, r, c) > 0) != predicted_positive) ++mismatched_far;
            }
        }
    }
    return {mismatched_far == 0 && checked > 0,
            std::to_string(checked) + " unmasked cells on " + std::to_string(g.resolution) + "x" +
                std::to_string(g.resolution) + "x" + std::to_string(g.d_slices.size()) + ", " +
                std::to_string(mismatched_far) + " sign mismatches farther than one cell from the planes (" +
                std::to_string(near_plane) + " cells within one cell)"};
}

Outcome baseline_error() {
    const auto e2 = estimate_baseline_error(2, 2, kBaselineTrials, kSeed);
    const auto e10 = estimate_baseline_error(10, 10, kBaselineTrials, kSeed);
    const bool ok = std::abs(e2.error_rate - kBaselineK2) <= kBaselineK2Tol && e10.error_rate < kBaselineK10Max;
    return {ok, "k=2: " + fmt(e2.error_rate) + " (target 0.40 +- 0.02), k=10: " + fmt(e10.error_rate, 3) +
                    " (target < 0.005), " + std::to_string(kBaselineTrials) + " trials each"};
}

Outcome direction_trends() {
    SweepConfig cfg;
    cfg.cardinalities = {{2, 2}, {10, 10}};
    cfg.alpha_max_values = {0, 2, 4, 6, 8};
    cfg.seed = kSeed;
    cfg.threads = default_thread_count();
    const auto r = run_direction_sweep(cfg);
    const std::size_t na = cfg.alpha_max_values.size();
    bool ok = true;
    std::string detail;
    for (std::size_t a = 0; a < na; ++a) {
        const auto& c2 = r.cells[a];
        const auto& c10 = r.cells[na + a];
        const double bound = c2.error_rate - kPooledSigmas * pooled_std_error(c2, c10);
        ok = ok && c10.error_rate <= bound;
        detail += "a=" + fmt(c2.alpha_max, 2) + ": k2 " + fmt(c2.error_rate, 3) + " k10 " + fmt(c10.error_rate, 3) +
                  "; ";
    }
    const double std0 = r.cells.front().std_dev, std8 = r.cells[na - 1].std_dev;
    ok = ok && std8 > std0;
    detail += "k2 across-hyperprior std " + fmt(std0, 3) + " -> " + fmt(std8, 3);
    return {ok, detail};
}

Outcome component_flatness() {
    SweepConfig cfg;
    cfg.cardinalities = {{10, 10}};
    cfg.alpha_max_values = {7};
    cfg.seed = kSeed;
    cfg.threads = default_thread_count();
    const auto r = run_component_sweep(cfg, {1, 128});
    const auto& one = r.cells[0];
    const auto& many = r.cells[1];
    const double margin = kPooledSigmas * pooled_std_error(one, many);
    return {many.error_rate - one.error_rate <= margin,
            "k=10 a=7: K=1 " + fmt(one.error_rate, 4) + ", K=128 " + fmt(many.error_rate, 4) + ", allowed rise " +
                fmt(margin, 3)};
}

StructureClassifier train_flat(std::size_t k, std::vector<CausalStructure> classes, const TrainingSetup& setup,
                               std::uint64_t seed, std::string& log) {
    const auto t0 = Clock::now();
    TrainConfig tc;
    tc.learning_rate = setup.learning_rate;
    tc.seed = seed;
    auto [clf, report] =
        train_on_flat_data(k, k, std::move(classes), setup.per_class, tc, seed, {}, default_thread_count());
    const double took = seconds_since(t0);
    log += "k=" + std::to_string(k) + " trained in " + fmt(took, 3) + " s (best epoch " +
           std::to_string(report.best_epoch) + ", val loss " + fmt(report.best_validation_loss) + ")";
    if (took > kBudgetTrainingPerK) log += " OVER BUDGET";
    log += "; ";
    return clf;
}

Outcome confounding_detector() {
    const std::vector<CausalStructure> classes{CausalStructure::kXToY, CausalStructure::kConfounded};
    std::string log;
    const std::vector<StructureClassifier> models{train_flat(2, classes, kBinaryTaskTraining, kSeed + 2, log),
                                                  train_flat(10, classes, kBinaryTaskTraining, kSeed + 10, log)};
    SweepConfig cfg;
    cfg.cardinalities = {{2, 2}, {10, 10}};
    cfg.alpha_max_values = {0};
    cfg.n_hyperpriors = 10;
    cfg.n_priors_per_hyperprior = 100;
    cfg.seed = kSeed;
    cfg.threads = default_thread_count();
    const auto r = run_confounding_sweep(models, cfg);
    const double e2 = r.cells[0].error_rate, e10 = r.cells[1].error_rate;
    return {e10 < kConfoundingMaxError && e10 < e2 && log.find("OVER BUDGET") == std::string::npos,
            log + "error k=2 " + fmt(e2, 3) + ", k=10 " + fmt(e10, 3) + " on " +
                std::to_string(r.cells[1].n_trials) + " balanced items"};
}

std::string describe(const ConfusionMatrix& cm) {
    std::ostringstream s;
    s << "      true \\ predicted";
    for (const auto& n : cm.class_names()) s << ' ' << n;
    s << '\n';
    for (std::size_t i = 0; i < cm.n_classes(); ++i) {
        s << "      " << cm.class_names()[i];
        for (std::size_t j = 0; j < cm.n_classes(); ++j) s << ' ' << cm(i, j);
        s << '\n';
    }
    return s.str();
}

struct SixClassRuns {
    ConfusionMatrix k2_flat{{}};
    ConfusionMatrix k10_flat{{}};
    std::vector<ConfusionMatrix> k10_shifted;
    std::string log;
};

SixClassRuns run_six_class() {
    SixClassRuns out;
    const std::vector<CausalStructure> all(kAllStructures.begin(), kAllStructures.end());
    const auto clf2 = train_flat(2, all, kSixClassK2Training, kSeed + 20, out.log);
    const auto clf10 = train_flat(10, all, kSixClassK10Training, kSeed + 100, out.log);
    SixClassConfig cfg;
    cfg.seed = kSeed;
    cfg.threads = default_thread_count();
    out.k2_flat = run_six_class_experiment(clf2, cfg).front();
    out.k10_flat = run_six_class_experiment(clf10, cfg).front();
    cfg.alpha_max = 7;
    cfg.n_repeats = kSixClassShiftRepeats;
    out.k10_shifted = run_six_class_experiment(clf10, cfg);
    return out;
}

Outcome six_class(const SixClassRuns& runs) {
    const double e2 = runs.k2_flat.error_rate();
    const double e10 = runs.k10_flat.error_rate();
    double shifted = 0.0;
    for (const auto& cm : runs.k10_shifted) shifted += cm.error_rate();
    shifted /= static_cast<double>(runs.k10_shifted.size());
    ConfusionMatrix shifted_total(runs.k10_flat.class_names());
    for (const auto& cm : runs.k10_shifted) shifted_total += cm;
    const bool ok2 = std::abs(e2 - kSixClassK2Target) <= kSixClassK2Tol;
    const bool ok10 = e10 <= kSixClassK10MaxError;
    const bool ok_shift = shifted <= kSixClassShiftFactor * e10;
    std::string detail = runs.log + "k=2 flat error " + fmt(e2, 4) + (ok2 ? "" : " [outside 0.2477 +- 0.04]") +
                         ", k=10 flat error " + fmt(e10, 3) + (ok10 ? "" : " [above 0.03]") + ", k=10 a=7 mean error " +
                         fmt(shifted, 3) + " over " + std::to_string(runs.k10_shifted.size()) + " repeats" +
                         (ok_shift ? "" : " [above 3x flat]") + "\n    k=2 flat confusion:\n" + describe(runs.k2_flat) +
                         "    k=10 flat confusion:\n" + describe(runs.k10_flat) +
                         "    k=10 a=7 confusion, summed over repeats:\n" + describe(shifted_total);
    return {ok2 && ok10 && ok_shift && runs.log.find("OVER BUDGET") == std::string::npos, detail};
}

Outcome confusion_structure(const SixClassRuns& runs) {
    const auto& cm = runs.k2_flat;
    const auto idx = [&](CausalStructure s) {
        const auto& names = cm.class_names();
        return static_cast<std::size_t>(std::find(names.begin(), names.end(), name(s)) - names.begin());
    };
    const double recall = cm.recall(idx(CausalStructure::kIndependent));
    struct Pair {
        std::size_t i, j;
        std::uint64_t mass;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < cm.n_classes(); ++i) {
        for (std::size_t j = i + 1; j < cm.n_classes(); ++j) pairs.push_back({i, j, cm(i, j) + cm(j, i)});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.mass > b.mass; });
    const auto is = [&](const Pair& p, CausalStructure a, CausalStructure b) {
        return (p.i == idx(a) && p.j == idx(b)) || (p.i == idx(b) && p.j == idx(a));
    };
    const auto expected = [&](const Pair& p) {
        return is(p, CausalStructure::kXToY, CausalStructure::kYToX) ||
               is(p, CausalStructure::kXToYConfounded, CausalStructure::kYToXConfounded);
    };
    const bool ordering = expected(pairs[0]) && expected(pairs[1]);
    std::string detail = "independence recall " + fmt(recall, 4) + "; largest off-diagonal pairs:";
    for (std::size_t p = 0; p < 4; ++p) {
        detail += " {" + cm.class_names()[pairs[p].i] + " <-> " + cm.class_names()[pairs[p].j] +
                  "}=" + std::to_string(pairs[p].mass);
    }
    return {recall > kIndependenceRecall && ordering, detail};
}

Outcome property_suites(const std::vector<std::string>& suites) {
    if (suites.empty()) return {false, "no test binaries given (use --suite)"};
    const auto t0 = Clock::now();
    std::vector<std::string> failed;
    for (const auto& s : suites) {
        const std::string cmd = "\"" + s + "\" --gtest_brief=1 > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) failed.push_back(s);
    }
    const double took = seconds_since(t0);
    std::string detail = std::to_string(suites.size() - failed.size()) + "/" + std::to_string(suites.size()) +
                         " suites passed in " + fmt(took, 3) + " s";
    for (const auto& f : failed) detail += "; failed: " + f;
    return {failed.empty() && took < kBudgetSuites, detail};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"causallab acceptance suite"};
    std::vector<std::string> suites;
    std::vector<int> only;
    app.add_option("--suite", suites, "Unit-test binary to run for the property-suite criterion");
    app.add_option("--only", only, "Run only these criteria (1-9)");
    CLI11_PARSE(app, argc, argv);

    const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    int failures = 0;
    const auto report = [&](int n, const std::string& title, double budget, const std::function<Outcome()>& body) {
        if (!wanted(n)) return;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double took = seconds_since(t0);
        if (took > budget) {
            o.pass = false;
            o.detail += "; over the " + fmt(budget, 4) + " s budget";
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << n << "] " << title << " (" << fmt(took, 3) << " s)\n"
                  << "    " << o.detail << '\n'
                  << std::flush;
    };

    report(1, "Jacobian determinants vs finite differences and closed form", kBudgetJacobian, jacobians);
    report(2, "binary flat-LR zero set is the two planes", kBudgetBoundary, binary_boundary);
    report(3, "baseline LR error", kBudgetBaseline, baseline_error);
    report(4, "direction-robustness trends", kBudgetSweep, direction_trends);
    report(5, "component-sweep flatness", kBudgetSweep, component_flatness);
    report(6, "confounding detector", kBudgetConfounding, confounding_detector);

    if (wanted(7) || wanted(8)) {
        SixClassRuns runs;
        std::string error;
        const auto t0 = Clock::now();
        try {
            runs = run_six_class();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double train_time = seconds_since(t0);
        const auto from_runs = [&](Outcome (*f)(const SixClassRuns&)) {
            return [&, f]() -> Outcome {
                if (!error.empty()) return {false, "exception: " + error};
                return f(runs);
            };
        };
        std::cout << "      six-class training and evaluation took " << fmt(train_time, 4) << " s\n";
        report(7, "six-class confusion", 2 * kBudgetTrainingPerK, from_runs(six_class));
        report(8, "six-class confusion structure at k=2", kBudgetTrainingPerK, from_runs(confusion_structure));
    }

    report(9, "property suites", kBudgetSuites, [&] { return property_suites(suites); });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
