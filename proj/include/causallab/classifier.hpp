#pragma once

// Structure classifier: an MlpModel over flattened joint tables, bound to a
// cardinality pair and an ordered list of causal-structure classes.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causallab/causal_sampler.hpp"
#include "causallab/errors.hpp"
#include "causallab/mlp.hpp"
#include "causallab/tables.hpp"

namespace causallab {

inline constexpr int kModelSchemaVersion = 1;

/// Counts of (true class, predicted class); rows are true classes.
class ConfusionMatrix {
  public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names)
        : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}

    std::size_t n_classes() const noexcept { return names_.size(); }
    const std::vector<std::string>& class_names() const noexcept { return names_; }

    void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1) {
        if (truth >= n_classes() || predicted >= n_classes()) {
            throw InvariantError("ConfusionMatrix: class index out of range");
        }
        counts_[truth * n_classes() + predicted] += n;
    }

    std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
        return counts_[truth * n_classes() + predicted];
    }

    std::uint64_t total() const noexcept {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }
    std::uint64_t trace() const noexcept {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < n_classes(); ++i) t += (*this)(i, i);
        return t;
    }
    std::uint64_t errors() const noexcept { return total() - trace(); }
    double error_rate() const noexcept {
        const auto t = total();
        return t == 0 ? 0.0 : static_cast<double>(errors()) / static_cast<double>(t);
    }
    std::uint64_t row_total(std::size_t truth) const {
        std::uint64_t t = 0;
        for (std::size_t j = 0; j < n_classes(); ++j) t += (*this)(truth, j);
        return t;
    }
    double recall(std::size_t truth) const {
        const auto t = row_total(truth);
        return t == 0 ? 0.0 : static_cast<double>((*this)(truth, truth)) / static_cast<double>(t);
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
        if (other.names_ != names_) throw InvariantError("ConfusionMatrix: class lists differ");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

  private:
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;
};

/// Row-major flattening of the joint, length k_x * k_y.
inline std::vector<double> featurize(const JointTable& joint) {
    return {joint.entries().begin(), joint.entries().end()};
}

inline std::vector<double> featurize(const LabeledDistribution& item) { return featurize(item.joint); }

using ClassifierNet = MlpModel<float>;

/// Default hidden layers for the structure classifier.
inline const std::vector<std::size_t> kDefaultHiddenLayers{256, 256};

/// Items per class when nobody says otherwise: 20000 up to k = 4, 10000
/// beyond.
inline std::size_t default_training_size(std::size_t k_x, std::size_t k_y) noexcept {
    return std::max(k_x, k_y) <= 4 ? 20000 : 10000;
}

struct StructureClassifier {
    std::size_t k_x = 0;
    std::size_t k_y = 0;
    std::vector<CausalStructure> classes;
    ClassifierNet net;

    /// Output index of `s`, or n_classes if the classifier does not know it.
    std::size_t index_of(CausalStructure s) const {
        return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), s) - classes.begin());
    }

    std::vector<double> posterior(const JointTable& joint) const {
        check_shape(joint);
        ClassifierNet::Matrix x(static_cast<Eigen::Index>(joint.entries().size()), 1);
        for (std::size_t i = 0; i < joint.entries().size(); ++i) {
            x(static_cast<Eigen::Index>(i), 0) = static_cast<float>(joint.entries()[i]);
        }
        const auto p = net.forward(x);
        std::vector<double> out(classes.size());
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<double>(p(static_cast<Eigen::Index>(c), 0));
        return out;
    }

    CausalStructure predict(const JointTable& joint) const {
        const auto p = posterior(joint);
        return classes[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
    }

    void check_shape(const JointTable& joint) const {
        if (joint.k_x() != k_x || joint.k_y() != k_y) {
            throw InvariantError("classifier expects " + std::to_string(k_x) + "x" + std::to_string(k_y) +
                                 " tables, got " + std::to_string(joint.k_x()) + "x" +
                                 std::to_string(joint.k_y()));
        }
    }
};

/// Columns are featurized items.
inline ClassifierNet::Matrix feature_matrix(const LabeledDataset& ds) {
    const auto width = static_cast<Eigen::Index>(ds.k_x() * ds.k_y());
    ClassifierNet::Matrix m(width, static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto p = ds.items()[i].joint.entries();
        for (Eigen::Index f = 0; f < width; ++f) m(f, static_cast<Eigen::Index>(i)) = static_cast<float>(p[static_cast<std::size_t>(f)]);
    }
    return m;
}

/// Freshly initialized classifier for `classes` (in the order given).
inline StructureClassifier make_classifier(std::size_t k_x, std::size_t k_y, std::vector<CausalStructure> classes,
                                           std::uint64_t seed,
                                           const std::vector<std::size_t>& hidden = kDefaultHiddenLayers) {
    if (classes.size() < 2) throw InvariantError("classifier needs at least two classes");
    std::vector<std::size_t> sizes{k_x * k_y};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(classes.size());
    RngStream rng = RngStream(seed).split(0x696E6974);
    return {k_x, k_y, std::move(classes), ClassifierNet::initialize(std::move(sizes), rng)};
}

inline std::vector<int> class_indices(const StructureClassifier& clf, const LabeledDataset& ds) {
    std::vector<int> y(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto idx = clf.index_of(ds.items()[i].label);
        if (idx >= clf.classes.size()) {
            throw InvariantError("dataset label '" + std::string(name(ds.items()[i].label)) +
                                 "' is not a class of the model");
        }
        y[i] = static_cast<int>(idx);
    }
    return y;
}

/// Fits input standardization on the whole dataset, then runs `train`.
inline std::pair<StructureClassifier, TrainReport> train(StructureClassifier clf, const LabeledDataset& ds,
                                                         const TrainConfig& cfg) {
    if (ds.size() == 0) throw InvariantError("train: empty dataset");
    if (ds.k_x() != clf.k_x || ds.k_y() != clf.k_y) throw InvariantError("train: cardinality mismatch");
    const auto x = feature_matrix(ds);
    const auto y = class_indices(clf, ds);
    clf.net.fit_standardization(x);
    auto [net, report] = train(std::move(clf.net), x, std::span<const int>(y), cfg);
    clf.net = std::move(net);
    return {std::move(clf), std::move(report)};
}

inline ConfusionMatrix empty_confusion(const StructureClassifier& clf) {
    std::vector<std::string> names;
    for (auto s : clf.classes) names.emplace_back(name(s));
    return ConfusionMatrix(std::move(names));
}

/// Argmax predictions over the dataset, accumulated into a confusion matrix.
inline ConfusionMatrix evaluate(const StructureClassifier& clf, const LabeledDataset& ds) {
    if (ds.k_x() != clf.k_x || ds.k_y() != clf.k_y) throw InvariantError("evaluate: cardinality mismatch");
    const auto y = class_indices(clf, ds);
    ConfusionMatrix cm = empty_confusion(clf);
    const auto x = feature_matrix(ds);
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.cols() - start);
        const auto z = clf.net.logits(x.middleCols(start, len));
        for (Eigen::Index c = 0; c < len; ++c) {
            Eigen::Index best = 0;
            z.col(c).maxCoeff(&best);
            cm.add(static_cast<std::size_t>(y[static_cast<std::size_t>(start + c)]), static_cast<std::size_t>(best));
        }
    }
    return cm;
}

namespace detail {

template <class M>
nlohmann::json matrix_to_json(const M& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(static_cast<double>(m(r, c)));
    }
    return a;
}

template <class M>
void matrix_from_json(const nlohmann::json& a, M& m, const char* what) {
    if (!a.is_array() || a.size() != static_cast<std::size_t>(m.size())) {
        throw ParseError(std::string("model file: ") + what + " has the wrong number of entries", 0);
    }
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = static_cast<typename M::Scalar>(a[i++].get<double>());
        }
    }
}

} // namespace detail

inline nlohmann::json to_json(const StructureClassifier& clf) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["k_x"] = clf.k_x;
    j["k_y"] = clf.k_y;
    std::vector<int> codes;
    for (auto s : clf.classes) codes.push_back(code(s));
    j["classes"] = codes;
    j["layer_sizes"] = clf.net.layer_sizes();
    j["activation"] = "relu";
    j["input_shift"] = detail::matrix_to_json(clf.net.input_shift());
    j["input_scale"] = detail::matrix_to_json(clf.net.input_scale());
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : clf.net.layers()) {
        layers.push_back({{"weights", detail::matrix_to_json(l.weights)}, {"bias", detail::matrix_to_json(l.bias)}});
    }
    j["layers"] = std::move(layers);
    return j;
}

inline StructureClassifier classifier_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema_version")) throw ParseError("model file: no schema_version", 0);
    if (j["schema_version"] != kModelSchemaVersion) {
        throw ParseError("model file: unsupported schema version " + j["schema_version"].dump(), 0);
    }
    try {
        StructureClassifier clf;
        clf.k_x = j.at("k_x").get<std::size_t>();
        clf.k_y = j.at("k_y").get<std::size_t>();
        for (int c : j.at("classes").get<std::vector<int>>()) clf.classes.push_back(structure_from_code(c));
        auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        if (sizes.size() < 2 || sizes.front() != clf.k_x * clf.k_y || sizes.back() != clf.classes.size()) {
            throw ParseError("model file: layer sizes do not match k_x * k_y inputs and class count", 0);
        }
        clf.net = ClassifierNet(std::move(sizes));
        ClassifierNet::Vector shift(static_cast<Eigen::Index>(clf.k_x * clf.k_y));
        ClassifierNet::Vector scale(shift.size());
        detail::matrix_from_json(j.at("input_shift"), shift, "input_shift");
        detail::matrix_from_json(j.at("input_scale"), scale, "input_scale");
        clf.net.set_standardization(std::move(shift), std::move(scale));
        const auto& layers = j.at("layers");
        if (!layers.is_array() || layers.size() != clf.net.layers().size()) {
            throw ParseError("model file: layer count does not match layer_sizes", 0);
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& dst = clf.net.layers()[l];
            detail::matrix_from_json(layers[l].at("weights"), dst.weights, "weights");
            detail::matrix_from_json(layers[l].at("bias"), dst.bias, "bias");
        }
        if (!clf.net.all_finite()) throw ParseError("model file: non-finite parameter", 0);
        return clf;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0);
    }
}

inline void save_model(const StructureClassifier& clf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << to_json(clf).dump() << '\n';
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline StructureClassifier load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what(), 0);
    }
    return classifier_from_json(j);
}

} // namespace causallab
