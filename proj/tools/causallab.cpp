// causallab: command-line front end for the causal-structure library.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causallab/causallab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace causallab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// JSON config: top-level keys are global flags, nested objects are
/// sections named after subcommands, e.g. {"seed": 7, "gen": {"k": 10}}.
class JsonConfig : public CLI::Config {
  public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
        std::vector<CLI::ConfigItem> out;
        collect(j, {}, out);
        return out;
    }

  private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config values must be scalars or arrays of scalars");
    }

    static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it->is_object()) {
                auto p = parents;
                p.push_back(it.key());
                collect(*it, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it->is_array()) {
                for (const auto& v : *it) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(*it));
            }
            out.push_back(std::move(item));
        }
    }
};

std::size_t parse_count(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty() || s[0] == '-') throw UsageError("not a count: '" + s + "'");
    return static_cast<std::size_t>(v);
}

/// "k" or "KXxKY"
Cardinality parse_cardinality(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) {
        const auto k = parse_count(s);
        return {k, k};
    }
    return {parse_count(s.substr(0, x)), parse_count(s.substr(x + 1))};
}

std::vector<Cardinality> parse_cardinalities(const std::vector<std::string>& v) {
    std::vector<Cardinality> out;
    for (const auto& s : v) out.push_back(parse_cardinality(s));
    return out;
}

std::vector<CausalStructure> parse_classes(const std::vector<std::string>& v) {
    if (v.size() == 1 && v[0] == "all") return {kAllStructures.begin(), kAllStructures.end()};
    std::vector<CausalStructure> out;
    for (const auto& s : v) {
        try {
            out.push_back(parse_structure(s));
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    return out;
}

JointTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("table file is not valid JSON: ") + e.what(), 0);
    }
    for (const char* key : {"k_x", "k_y", "entries"}) {
        if (!j.contains(key)) throw ParseError(std::string("table file is missing '") + key + "'", 0);
    }
    return JointTable(j.at("k_x").get<std::size_t>(), j.at("k_y").get<std::size_t>(),
                      j.at("entries").get<std::vector<double>>());
}

json options_json(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        const auto& name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        const auto& res = opt->results();
        if (!res.empty()) {
            j[name] = res.size() == 1 ? json(res[0]) : json(res);
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

struct Globals {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    unsigned threads = 0;
};

struct TrainFlags {
    double lr = 1e-3;
    double momentum = 0.9;
    std::size_t batch = 128;
    std::size_t epochs = 200;
    double validation = 0.1;
    std::size_t patience = 10;
    std::vector<std::size_t> hidden = kDefaultHiddenLayers;

    void add_to(CLI::App* sub) {
        sub->add_option("--lr", lr, "Learning rate")->capture_default_str();
        sub->add_option("--momentum", momentum, "Momentum coefficient")->capture_default_str();
        sub->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
        sub->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
        sub->add_option("--validation", validation, "Validation fraction")->capture_default_str();
        sub->add_option("--patience", patience, "Early-stopping patience (epochs)")->capture_default_str();
        sub->add_option("--hidden", hidden, "Hidden layer widths")->delimiter(',')->capture_default_str();
    }

    TrainConfig config(std::uint64_t seed) const {
        TrainConfig c;
        c.learning_rate = lr;
        c.momentum = momentum;
        c.batch_size = batch;
        c.max_epochs = epochs;
        c.validation_fraction = validation;
        c.patience = patience;
        c.seed = seed;
        return c;
    }
};

std::string out_path(const Globals& g, const std::string& file) { return (fs::path(g.out_dir) / file).string(); }

void print_report(const TrainReport& r) {
    std::fprintf(stderr, "trained %zu epochs, best validation loss %.6g at epoch %zu%s\n", r.train_losses.size(),
                 r.best_validation_loss, r.best_epoch, r.stopped_early ? " (early stop)" : "");
}

void print_confusion(const ConfusionMatrix& cm) {
    std::printf("%-12s", "true\\pred");
    for (const auto& n : cm.class_names()) std::printf("%12s", n.c_str());
    std::printf("\n");
    for (std::size_t i = 0; i < cm.n_classes(); ++i) {
        std::printf("%-12s", cm.class_names()[i].c_str());
        for (std::size_t j = 0; j < cm.n_classes(); ++j) std::printf("%12llu", static_cast<unsigned long long>(cm(i, j)));
        std::printf("\n");
    }
    std::printf("errors %llu / %llu (%.4f)\n", static_cast<unsigned long long>(cm.errors()),
                static_cast<unsigned long long>(cm.total()), cm.error_rate());
}

void print_sweep(const SweepResult& r) {
    std::printf("%-6s %-6s %10s %6s %10s %10s %8s\n", "k_x", "k_y", "alpha_max", "K", "error", "std", "trials");
    for (const auto& c : r.cells) {
        std::printf("%-6zu %-6zu %10.4g %6zu %10.5f %10.5f %8zu\n", c.k_x, c.k_y, c.alpha_max, c.n_components,
                    c.error_rate, c.std_dev, c.n_trials);
    }
}

void print_lr(const LikelihoodRatioResult& r) {
    std::printf("log_lr %.17g\nlog_det_xy %.17g\nlog_det_yx %.17g\nlog_prior_factor %.17g\ndecision %s\n", r.log_lr,
                r.log_det_xy, r.log_det_yx, r.log_prior_factor, to_string(r.decided));
}

void write_sweep_outputs(const Globals& g, const std::string& stem, const SweepResult& r, const std::string& command,
                         const json& config, bool log_trials) {
    std::vector<std::string> outputs{out_path(g, stem + ".csv"), out_path(g, stem + ".svg")};
    emit_csv(r, outputs[0]);
    emit_svg_plot(r, outputs[1]);
    if (log_trials) {
        outputs.push_back(out_path(g, stem + "_trials.csv"));
        emit_trials_csv(r, outputs.back());
    }
    write_manifest(g.out_dir, command, config, g.seed, outputs);
    print_sweep(r);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bivariate causal-structure classification on exact joint probability tables", "causallab"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file (unknown keys are rejected)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Globals g;
    g.threads = default_thread_count();
    app.add_option("--seed", g.seed, "Master seed")->envname("CAUSALLAB_SEED")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for outputs and manifests")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (1 = canonical bit-exact run)")->check(CLI::PositiveNumber);

    // lr
    auto* lr = app.add_subcommand("lr", "Likelihood ratio X->Y vs Y->X for a joint table");
    std::string lr_table;
    double lr_alpha = 0.0;
    std::size_t lr_components = 10;
    std::string lr_policy = "reject";
    lr->add_option("--table", lr_table, "Joint table JSON {k_x, k_y, entries}")->required()->check(CLI::ExistingFile);
    lr->add_option("--alpha-max", lr_alpha, "Mixture hyperprior bound (0 = flat prior)")->capture_default_str();
    lr->add_option("--components", lr_components, "Mixture components when alpha-max > 0")->capture_default_str();
    lr->add_option("--zero-policy", lr_policy, "reject or clamp")
        ->check(CLI::IsMember({"reject", "clamp"}))
        ->capture_default_str();

    // classify
    auto* classify = app.add_subcommand("classify", "Six-class posterior from a trained model, with LR diagnostics");
    std::string cl_table, cl_model;
    classify->add_option("--table", cl_table, "Joint table JSON")->required()->check(CLI::ExistingFile);
    classify->add_option("--model", cl_model, "Model JSON from `train`")->required()->check(CLI::ExistingFile);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a labeled dataset");
    std::string gen_k = "2";
    std::size_t gen_per_class = 1000;
    std::vector<std::string> gen_classes{"all"};
    double gen_alpha = 0.0;
    std::size_t gen_components = 10;
    std::string gen_variant = "canonical";
    std::string gen_out = "dataset.jsonl";
    gen->add_option("--k", gen_k, "Cardinality: k or KXxKY")->capture_default_str();
    gen->add_option("--per-class", gen_per_class, "Items per class")->capture_default_str();
    gen->add_option("--classes", gen_classes, "Class names or codes, or 'all'")->delimiter(',')->capture_default_str();
    gen->add_option("--alpha-max", gen_alpha, "Hyperprior bound (0 = flat)")->capture_default_str();
    gen->add_option("--components", gen_components, "Mixture components")->capture_default_str();
    gen->add_option("--confounding-variant", gen_variant, "canonical or factor-product")
        ->check(CLI::IsMember({"canonical", "factor-product"}))
        ->capture_default_str();
    gen->add_option("--output", gen_out, "Dataset file name inside --out-dir")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a structure classifier on a dataset");
    std::string tr_data, tr_out = "model.json";
    TrainFlags tr_flags;
    train_cmd->add_option("--data", tr_data, "Dataset file from `gen`")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--output", tr_out, "Model file name inside --out-dir")->capture_default_str();
    tr_flags.add_to(train_cmd);

    // eval
    auto* eval = app.add_subcommand("eval", "Confusion matrix of a model on a dataset");
    std::string ev_data, ev_model;
    eval->add_option("--data", ev_data, "Dataset file")->required()->check(CLI::ExistingFile);
    eval->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);

    // sweeps
    SweepConfig sweep_defaults;
    auto add_sweep_flags = [&](CLI::App* sub, std::vector<std::string>& ks, SweepConfig& cfg, bool& log_trials) {
        sub->add_option("--k", ks, "Cardinalities: k or KXxKY, comma separated")->delimiter(',')->capture_default_str();
        sub->add_option("--hyperpriors", cfg.n_hyperpriors, "Hyperpriors per cell")->capture_default_str();
        sub->add_option("--priors", cfg.n_priors_per_hyperprior, "Priors per hyperprior")->capture_default_str();
        sub->add_flag("--log-trials", log_trials, "Also write per-trial outcomes");
    };

    auto* sdir = app.add_subcommand("sweep-direction", "Direction-robustness sweep of the LR classifier");
    std::vector<std::string> sd_k{"2", "3", "5", "10"};
    SweepConfig sd_cfg = sweep_defaults;
    bool sd_log = false;
    add_sweep_flags(sdir, sd_k, sd_cfg, sd_log);
    sdir->add_option("--alpha-max", sd_cfg.alpha_max_values, "alpha_max grid")->delimiter(',')->capture_default_str();
    sdir->add_option("--components", sd_cfg.n_components, "Mixture components")->capture_default_str();

    auto* scomp = app.add_subcommand("sweep-components", "Mixture-component sweep of the LR classifier");
    std::vector<std::string> sc_k{"2", "3", "5", "10"};
    SweepConfig sc_cfg = sweep_defaults;
    double sc_alpha = 7.0;
    std::vector<std::size_t> sc_components = kDefaultComponentCounts;
    bool sc_log = false;
    add_sweep_flags(scomp, sc_k, sc_cfg, sc_log);
    scomp->add_option("--alpha-max", sc_alpha, "Fixed alpha_max")->capture_default_str();
    scomp->add_option("--components", sc_components, "Component counts")->delimiter(',')->capture_default_str();

    auto* sconf = app.add_subcommand("sweep-confounding", "Confounding-detector sweep (x->y vs confounded)");
    std::vector<std::string> sf_k{"2", "3", "5", "10"};
    SweepConfig sf_cfg = sweep_defaults;
    sf_cfg.n_hyperpriors = 10;
    bool sf_log = false;
    std::vector<std::string> sf_models;
    std::size_t sf_per_class = 0;
    std::string sf_variant = "canonical";
    TrainFlags sf_flags;
    add_sweep_flags(sconf, sf_k, sf_cfg, sf_log);
    sconf->add_option("--alpha-max", sf_cfg.alpha_max_values, "alpha_max grid")->delimiter(',')->capture_default_str();
    sconf->add_option("--components", sf_cfg.n_components, "Mixture components")->capture_default_str();
    sconf->add_option("--model", sf_models, "Trained 2-class models, one per cardinality (else trained in-line)")
        ->check(CLI::ExistingFile);
    sconf->add_option("--train-per-class", sf_per_class, "In-line training items per class (0 = 20000 up to k=4, else 10000)")->capture_default_str();
    sconf->add_option("--confounding-variant", sf_variant, "canonical or factor-product")
        ->check(CLI::IsMember({"canonical", "factor-product"}))
        ->capture_default_str();
    sf_flags.add_to(sconf);

    // six-class
    auto* six = app.add_subcommand("six-class", "Six-class confusion matrices on fresh test sets");
    std::string sx_k = "2";
    std::string sx_model;
    SixClassConfig sx_cfg;
    std::size_t sx_per_class = 0;
    std::string sx_variant = "canonical";
    TrainFlags sx_flags;
    six->add_option("--k", sx_k, "Cardinality (ignored with --model)")->capture_default_str();
    six->add_option("--model", sx_model, "Trained six-class model (else trained in-line)")->check(CLI::ExistingFile);
    six->add_option("--alpha-max", sx_cfg.alpha_max, "Test hyperprior bound (0 = flat test)")->capture_default_str();
    six->add_option("--components", sx_cfg.n_components, "Mixture components")->capture_default_str();
    six->add_option("--n-test", sx_cfg.n_test, "Items per test set")->capture_default_str();
    six->add_option("--repeats", sx_cfg.n_repeats, "Test sets (one hyperprior each)")->capture_default_str();
    six->add_option("--train-per-class", sx_per_class, "In-line training items per class (0 = 20000 up to k=4, else 10000)")->capture_default_str();
    six->add_option("--confounding-variant", sx_variant, "canonical or factor-product")
        ->check(CLI::IsMember({"canonical", "factor-product"}))
        ->capture_default_str();
    sx_flags.add_to(six);

    // heatmap
    auto* heat = app.add_subcommand("heatmap", "Log-LR heatmaps over the binary simplex");
    HeatmapSpec hm_spec;
    double hm_alpha = 0.0;
    std::size_t hm_components = 10;
    heat->add_option("--resolution", hm_spec.resolution, "Cells per axis")->capture_default_str();
    heat->add_option("--d", hm_spec.d_slices, "d slices")->delimiter(',')->capture_default_str();
    heat->add_option("--alpha-max", hm_alpha, "Hyperprior bound (0 = flat prior)")->capture_default_str();
    heat->add_option("--components", hm_components, "Mixture components")->capture_default_str();

    // baseline-error
    auto* base = app.add_subcommand("baseline-error", "Monte Carlo error of the flat LR classifier");
    std::string be_k = "2";
    std::size_t be_trials = 100000;
    base->add_option("--k", be_k, "Cardinality: k or KXxKY")->capture_default_str();
    base->add_option("--trials", be_trials, "Trials")->capture_default_str();

    // sample-mixture
    auto* smix = app.add_subcommand("sample-mixture", "Draw a Dirichlet mixture and dump samples from it");
    double sm_alpha = 2.0;
    std::size_t sm_components = 10, sm_dim = 3, sm_samples = 1000;
    smix->add_option("--alpha-max", sm_alpha, "Concentration bound")->capture_default_str();
    smix->add_option("--components", sm_components, "Mixture components")->capture_default_str();
    smix->add_option("--dim", sm_dim, "Simplex dimension")->capture_default_str();
    smix->add_option("--samples", sm_samples, "Samples")->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->allow_config_extras(CLI::config_extras_mode::error);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ConfigError& e) {
        std::string msg = e.what();
        const std::string cli11 = "INI was not able to parse ";
        if (msg.rfind(cli11, 0) == 0) msg = "unknown config key '" + msg.substr(cli11.size()) + "'";
        std::fprintf(stderr, "causallab: %s\n", msg.c_str());
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    try {
        std::error_code ec;
        fs::create_directories(g.out_dir, ec);
        if (!fs::is_directory(g.out_dir)) throw UsageError("output directory '" + g.out_dir + "' is not usable");
        json config = options_json(sub);
        config["global"] = options_json(&app);
        config["global"].erase("version");
        config["global"]["threads"] = g.threads;
        const auto manifest = [&](const std::vector<std::string>& outputs = {}) {
            write_manifest(g.out_dir, cmd, config, g.seed, outputs);
        };

        if (cmd == "lr") {
            const auto policy = lr_policy == "clamp" ? ZeroPolicy::kClamp : ZeroPolicy::kReject;
            const auto joint = read_table(lr_table);
            LikelihoodRatioResult r;
            if (lr_alpha == 0.0) {
                r = lr_general(joint, policy);
            } else {
                RngStream root(g.seed);
                RngStream a = root.split(0), b = root.split(1);
                const auto xy = HyperpriorSpec::sample(lr_alpha, joint.k_x(), joint.k_y(), lr_components, a);
                const auto yx = HyperpriorSpec::sample(lr_alpha, joint.k_y(), joint.k_x(), lr_components, b);
                r = lr_with_hyperprior(joint, xy, yx, policy);
            }
            print_lr(r);
            manifest();
        } else if (cmd == "classify") {
            const auto joint = read_table(cl_table);
            const auto clf = load_model(cl_model);
            const auto post = clf.posterior(joint);
            for (std::size_t i = 0; i < clf.classes.size(); ++i) {
                std::printf("P(%s) %.6f\n", std::string(name(clf.classes[i])).c_str(), post[i]);
            }
            std::printf("predicted %s\n", std::string(name(clf.predict(joint))).c_str());
            try {
                print_lr(lr_general(joint, ZeroPolicy::kClamp));
            } catch (const DegenerateError& e) {
                std::printf("lr unavailable: %s\n", e.what());
            }
            manifest();
        } else if (cmd == "gen") {
            const auto [kx, ky] = parse_cardinality(gen_k);
            const auto classes = parse_classes(gen_classes);
            SamplerOptions so;
            so.variant = parse_variant(gen_variant);
            const HyperpriorDescriptor hp{gen_alpha, gen_components, RngStream(g.seed).split(0x6870).key()};
            const auto ds = build_dataset(kx, ky, gen_per_class, classes, hp, g.seed, so, g.threads);
            const auto path = out_path(g, gen_out);
            save_dataset(ds, path);
            std::printf("wrote %zu items to %s\n", ds.size(), path.c_str());
            manifest({path});
        } else if (cmd == "train") {
            const auto ds = load_dataset(tr_data);
            auto clf = make_classifier(ds.k_x(), ds.k_y(), ds.classes(), g.seed, tr_flags.hidden);
            auto [trained, report] = train(std::move(clf), ds, tr_flags.config(g.seed));
            print_report(report);
            const auto path = out_path(g, tr_out);
            save_model(trained, path);
            std::printf("wrote %s\n", path.c_str());
            manifest({path});
        } else if (cmd == "eval") {
            const auto ds = load_dataset(ev_data);
            const auto clf = load_model(ev_model);
            const auto cm = evaluate(clf, ds);
            print_confusion(cm);
            const std::vector<std::string> outputs{out_path(g, "eval_confusion.csv"), out_path(g, "eval_confusion.svg")};
            emit_csv(std::vector<ConfusionMatrix>{cm}, outputs[0]);
            emit_svg_plot(cm, outputs[1]);
            manifest(outputs);
        } else if (cmd == "sweep-direction") {
            sd_cfg.cardinalities = parse_cardinalities(sd_k);
            sd_cfg.seed = g.seed;
            sd_cfg.threads = g.threads;
            sd_cfg.log_trials = sd_log;
            write_sweep_outputs(g, "direction", run_direction_sweep(sd_cfg), cmd, config, sd_log);
        } else if (cmd == "sweep-components") {
            sc_cfg.cardinalities = parse_cardinalities(sc_k);
            sc_cfg.alpha_max_values = {sc_alpha};
            sc_cfg.seed = g.seed;
            sc_cfg.threads = g.threads;
            sc_cfg.log_trials = sc_log;
            write_sweep_outputs(g, "components", run_component_sweep(sc_cfg, sc_components), cmd, config, sc_log);
        } else if (cmd == "sweep-confounding") {
            sf_cfg.cardinalities = parse_cardinalities(sf_k);
            sf_cfg.seed = g.seed;
            sf_cfg.threads = g.threads;
            sf_cfg.log_trials = sf_log;
            SamplerOptions so;
            so.variant = parse_variant(sf_variant);
            std::vector<StructureClassifier> models;
            for (const auto& p : sf_models) models.push_back(load_model(p));
            for (auto [kx, ky] : sf_cfg.cardinalities) {
                const bool have = std::any_of(models.begin(), models.end(),
                                              [&](const auto& m) { return m.k_x == kx && m.k_y == ky; });
                if (have) continue;
                std::fprintf(stderr, "training 2-class model for %zux%zu\n", kx, ky);
                auto [clf, report] = train_on_flat_data(kx, ky, {CausalStructure::kXToY, CausalStructure::kConfounded},
                                                        sf_per_class ? sf_per_class : default_training_size(kx, ky),
                                                        sf_flags.config(g.seed), g.seed, so, g.threads,
                                                        sf_flags.hidden);
                print_report(report);
                models.push_back(std::move(clf));
            }
            write_sweep_outputs(g, "confounding", run_confounding_sweep(models, sf_cfg, so), cmd, config, sf_log);
        } else if (cmd == "six-class") {
            SamplerOptions so;
            so.variant = parse_variant(sx_variant);
            StructureClassifier clf;
            std::string sx_saved;
            if (!sx_model.empty()) {
                clf = load_model(sx_model);
            } else {
                const auto [kx, ky] = parse_cardinality(sx_k);
                std::fprintf(stderr, "training six-class model for %zux%zu\n", kx, ky);
                auto [trained, report] = train_on_flat_data(kx, ky, {kAllStructures.begin(), kAllStructures.end()},
                                                            sx_per_class ? sx_per_class : default_training_size(kx, ky),
                                                            sx_flags.config(g.seed), g.seed, so,
                                                            g.threads, sx_flags.hidden);
                print_report(report);
                clf = std::move(trained);
                sx_saved = out_path(g, "six_class_model.json");
                save_model(clf, sx_saved);
            }
            sx_cfg.seed = g.seed;
            sx_cfg.threads = g.threads;
            const auto cms = run_six_class_experiment(clf, sx_cfg, so);
            ConfusionMatrix total = empty_confusion(clf);
            for (const auto& cm : cms) total += cm;
            print_confusion(total);
            std::printf("mean errors per test set %.2f\n",
                        static_cast<double>(total.errors()) / static_cast<double>(cms.size()));
            std::vector<std::string> outputs{out_path(g, "six_class_confusion.csv"),
                                             out_path(g, "six_class_confusion.svg")};
            if (!sx_saved.empty()) outputs.push_back(sx_saved);
            emit_csv(cms, outputs[0]);
            emit_svg_plot(total, outputs[1]);
            manifest(outputs);
        } else if (cmd == "heatmap") {
            std::optional<HyperpriorSpec> hp;
            if (hm_alpha > 0.0) {
                RngStream rng = RngStream(g.seed).split(0x686d);
                hp = HyperpriorSpec::sample(hm_alpha, 2, 2, hm_components, rng);
            }
            const auto grid = render_lr_heatmaps(hm_spec, hp ? &*hp : nullptr);
            const std::vector<std::string> outputs{out_path(g, "heatmap.csv"), out_path(g, "heatmap.svg")};
            emit_csv(grid, outputs[0]);
            emit_svg_plot(grid, outputs[1]);
            for (std::size_t s = 0; s < grid.d_slices.size(); ++s) {
                std::printf("d %.3g: sign regions %zu, masked fraction %.4f\n", grid.d_slices[s],
                            count_sign_regions(grid, s), grid.masked_fraction(s));
            }
            manifest(outputs);
        } else if (cmd == "baseline-error") {
            const auto [kx, ky] = parse_cardinality(be_k);
            const auto est = estimate_baseline_error(kx, ky, be_trials, g.seed, g.threads);
            std::printf("k %zux%zu trials %zu error %.5f +- %.5f\n", kx, ky, est.n_trials, est.error_rate,
                        est.std_error);
            manifest();
        } else if (cmd == "sample-mixture") {
            RngStream rng(g.seed);
            RngStream prm = rng.split(0), smp = rng.split(1);
            const auto mix = sample_mixture_params(sm_alpha, sm_dim, sm_components, prm);
            const std::vector<std::string> outputs{out_path(g, "mixture.json"), out_path(g, "mixture_samples.csv")};
            json mj = {{"alpha_max", mix.alpha_max()}, {"weights", mix.weights()}, {"components", json::array()}};
            for (const auto& c : mix.components()) {
                mj["components"].push_back(std::vector<double>(c.alpha().begin(), c.alpha().end()));
            }
            {
                std::ofstream out(outputs[0]);
                out << mj.dump(2) << '\n';
                if (!out) throw std::runtime_error("write to '" + outputs[0] + "' failed");
            }
            std::ofstream out(outputs[1]);
            for (std::size_t i = 0; i < sm_dim; ++i) out << (i ? "," : "") << 'p' << i;
            out << '\n';
            std::vector<double> p(sm_dim);
            char buf[32];
            for (std::size_t s = 0; s < sm_samples; ++s) {
                sample_from_mixture_into(mix, smp, p);
                for (std::size_t i = 0; i < sm_dim; ++i) {
                    std::snprintf(buf, sizeof buf, "%.17g", p[i]);
                    out << (i ? "," : "") << buf;
                }
                out << '\n';
            }
            if (!out) throw std::runtime_error("write to '" + outputs[1] + "' failed");
            std::printf("wrote %zu samples to %s\n", sm_samples, outputs[1].c_str());
            manifest(outputs);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "causallab %s: %s\n", cmd.c_str(), e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "causallab %s: %s\n", cmd.c_str(), e.what());
        return kExitRuntime;
    }
    return 0;
}
