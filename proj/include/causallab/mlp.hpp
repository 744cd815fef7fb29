#pragma once

// Feed-forward classifier: affine input standardization, rectifier hidden
// layers, softmax output, mean cross-entropy loss and mini-batch gradient
// descent with momentum and early stopping.
//
// Batches are column-major: one sample per column.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causallab/errors.hpp"
#include "causallab/rng.hpp"

namespace causallab {

template <std::floating_point Scalar>
struct DenseLayer {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix weights; ///< out x in
    Vector bias;    ///< out
};

template <std::floating_point Scalar>
class MlpModel {
  public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Layer = DenseLayer<Scalar>;

    MlpModel() = default;

    /// All-zero parameters and identity standardization.
    explicit MlpModel(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2) throw InvariantError("MlpModel: need input and output sizes");
        for (auto s : sizes_) {
            if (s == 0) throw InvariantError("MlpModel: layer sizes must be positive");
        }
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            const auto out = static_cast<Eigen::Index>(sizes_[l]);
            const auto in = static_cast<Eigen::Index>(sizes_[l - 1]);
            layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
        }
        shift_ = Vector::Zero(static_cast<Eigen::Index>(sizes_.front()));
        scale_ = Vector::Ones(static_cast<Eigen::Index>(sizes_.front()));
    }

    /// Weights uniform on +-sqrt(6 / fan_in) (variance 2 / fan_in), zero biases.
    static MlpModel initialize(std::vector<std::size_t> layer_sizes, RngStream& rng) {
        MlpModel m(std::move(layer_sizes));
        for (auto& layer : m.layers_) {
            const double bound = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                    layer.weights(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
                }
            }
        }
        return m;
    }

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t input_width() const noexcept { return sizes_.front(); }
    std::size_t n_classes() const noexcept { return sizes_.back(); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    /// Inputs are mapped to (x - shift) * scale before the first layer.
    const Vector& input_shift() const noexcept { return shift_; }
    const Vector& input_scale() const noexcept { return scale_; }
    void set_standardization(Vector shift, Vector scale) {
        if (shift.size() != shift_.size() || scale.size() != scale_.size()) {
            throw InvariantError("MlpModel: standardization width mismatch");
        }
        shift_ = std::move(shift);
        scale_ = std::move(scale);
    }

    /// Sets shift/scale to the per-feature mean and inverse standard
    /// deviation of the columns of `inputs`. Constant features keep scale 1.
    void fit_standardization(const Matrix& inputs) {
        check_width(inputs);
        const auto n = static_cast<double>(inputs.cols());
        for (Eigen::Index f = 0; f < inputs.rows(); ++f) {
            double mean = 0.0;
            for (Eigen::Index c = 0; c < inputs.cols(); ++c) mean += static_cast<double>(inputs(f, c));
            mean /= n;
            double var = 0.0;
            for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
                const double d = static_cast<double>(inputs(f, c)) - mean;
                var += d * d;
            }
            var /= n;
            shift_(f) = static_cast<Scalar>(mean);
            scale_(f) = static_cast<Scalar>(var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0);
        }
    }

    std::size_t n_parameters() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    bool all_finite() const noexcept {
        for (const auto& l : layers_) {
            if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
        }
        return true;
    }

    /// Pre-softmax outputs, n_classes x batch.
    Matrix logits(const Matrix& inputs) const {
        check_width(inputs);
        if (!inputs.allFinite()) throw InvariantError("MlpModel: non-finite input");
        Matrix a = (inputs.colwise() - shift_).array().colwise() * scale_.array();
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].weights * a;
            z.colwise() += layers_[l].bias;
            if (l + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
            a = std::move(z);
        }
        return a;
    }

    /// Class probabilities, n_classes x batch; every column sums to 1.
    Matrix forward(const Matrix& inputs) const { return softmax_columns(logits(inputs)); }

    static Matrix softmax_columns(Matrix z) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const Scalar top = z.col(c).maxCoeff();
            z.col(c) = (z.col(c).array() - top).exp();
            z.col(c) /= z.col(c).sum();
        }
        return z;
    }

    void check_width(const Matrix& inputs) const {
        if (static_cast<std::size_t>(inputs.rows()) != input_width()) {
            throw InvariantError("MlpModel: input width " + std::to_string(inputs.rows()) +
                                 " does not match model input width " + std::to_string(input_width()));
        }
    }

  private:
    std::vector<std::size_t> sizes_;
    std::vector<Layer> layers_;
    Vector shift_;
    Vector scale_;
};

template <std::floating_point Scalar>
struct LossAndGradient {
    double loss = 0.0;
    std::vector<DenseLayer<Scalar>> gradient;
};

/// Mean cross-entropy over the batch and its gradient with respect to every
/// weight and bias. Standardization parameters are fixed, not trained.
template <std::floating_point Scalar>
LossAndGradient<Scalar> loss_and_gradient(const MlpModel<Scalar>& model,
                                          const typename MlpModel<Scalar>::Matrix& inputs,
                                          std::span<const int> labels) {
    using Matrix = typename MlpModel<Scalar>::Matrix;
    model.check_width(inputs);
    const auto n = inputs.cols();
    if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
        throw InvariantError("loss_and_gradient: need one label per column");
    }
    const auto n_classes = static_cast<int>(model.n_classes());
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw InvariantError("loss_and_gradient: label out of range");
    }
    const auto& layers = model.layers();
    std::vector<Matrix> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back((inputs.colwise() - model.input_shift()).array().colwise() * model.input_scale().array());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z = layers[l].weights * acts.back();
        z.colwise() += layers[l].bias;
        if (l + 1 < layers.size()) z = z.cwiseMax(Scalar(0));
        acts.push_back(std::move(z));
    }
    Matrix delta = std::move(acts.back());
    acts.pop_back();
    double loss = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        const Scalar top = delta.col(c).maxCoeff();
        const double lse =
            static_cast<double>(top) + std::log(static_cast<double>((delta.col(c).array() - top).exp().sum()));
        loss += lse - static_cast<double>(delta(labels[static_cast<std::size_t>(c)], c));
    }
    loss /= static_cast<double>(n);
    delta = MlpModel<Scalar>::softmax_columns(std::move(delta));
    for (Eigen::Index c = 0; c < n; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= Scalar(1);
    delta /= static_cast<Scalar>(n);

    LossAndGradient<Scalar> out;
    out.loss = loss;
    out.gradient.resize(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix& a_prev = acts[l];
        out.gradient[l].weights = delta * a_prev.transpose();
        out.gradient[l].bias = delta.rowwise().sum();
        if (l > 0) {
            Matrix back = layers[l].weights.transpose() * delta;
            // a_prev holds rectified activations; zero where the unit was off.
            delta = back.cwiseProduct((a_prev.array() > Scalar(0)).template cast<Scalar>().matrix());
        }
    }
    return out;
}

struct TrainConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    double validation_fraction = 0.1;
    std::size_t patience = 10;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw InvariantError("TrainConfig: learning_rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw InvariantError("TrainConfig: momentum must be in [0, 1)");
        if (batch_size == 0) throw InvariantError("TrainConfig: batch_size must be > 0");
        if (max_epochs == 0) throw InvariantError("TrainConfig: max_epochs must be > 0");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw InvariantError("TrainConfig: validation_fraction must be in (0, 1)");
        }
        if (patience == 0) throw InvariantError("TrainConfig: patience must be > 0");
    }
};

struct TrainReport {
    std::vector<double> train_losses;      ///< mean mini-batch loss per epoch
    std::vector<double> validation_losses; ///< after each epoch
    double initial_validation_loss = 0.0;
    double best_validation_loss = 0.0;
    std::size_t best_epoch = 0; ///< 0 = initial parameters
    bool stopped_early = false;
    bool diverged = false;
};

class TrainingDiverged : public std::runtime_error {
  public:
    TrainingDiverged(const std::string& what, TrainReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const TrainReport& report() const noexcept { return report_; }

  private:
    TrainReport report_;
};

namespace detail {

template <class Matrix>
Matrix gather_columns(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

inline void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(v[i - 1], v[j]);
    }
}

template <std::floating_point Scalar>
double mean_loss(const MlpModel<Scalar>& model, const typename MlpModel<Scalar>::Matrix& inputs,
                 std::span<const int> labels) {
    constexpr Eigen::Index kChunk = 4096;
    double total = 0.0;
    for (Eigen::Index start = 0; start < inputs.cols(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, inputs.cols() - start);
        const auto z = model.logits(inputs.middleCols(start, len));
        for (Eigen::Index c = 0; c < len; ++c) {
            const Scalar top = z.col(c).maxCoeff();
            const double lse = static_cast<double>(top) +
                               std::log(static_cast<double>((z.col(c).array() - top).exp().sum()));
            total += lse - static_cast<double>(z(labels[static_cast<std::size_t>(start + c)], c));
        }
    }
    return total / static_cast<double>(inputs.cols());
}

} // namespace detail

/// Mini-batch gradient descent with momentum on (inputs, labels). A seeded
/// shuffle holds out `validation_fraction` of the columns; the parameters
/// with the lowest validation loss (the initial ones included) are
/// returned. Stops after `patience` epochs without improvement. Throws
/// TrainingDiverged if a training loss becomes non-finite.
template <std::floating_point Scalar>
std::pair<MlpModel<Scalar>, TrainReport> train(MlpModel<Scalar> model,
                                               const typename MlpModel<Scalar>::Matrix& inputs,
                                               std::span<const int> labels, const TrainConfig& cfg) {
    using Matrix = typename MlpModel<Scalar>::Matrix;
    cfg.validate();
    const auto n = static_cast<std::size_t>(inputs.cols());
    if (n != labels.size()) throw InvariantError("train: need one label per column");
    if (n < 2) throw InvariantError("train: need at least two samples");
    model.check_width(inputs);

    const RngStream root(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream split_rng = root.split(0);
    detail::shuffle(order, split_rng);
    const std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n))), 1, n - 1);
    const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    const Matrix val_x = detail::gather_columns(inputs, val_idx);
    std::vector<int> val_y(n_val);
    for (std::size_t i = 0; i < n_val; ++i) val_y[i] = labels[val_idx[i]];

    TrainReport report;
    report.initial_validation_loss = detail::mean_loss(model, val_x, val_y);
    report.best_validation_loss = report.initial_validation_loss;
    MlpModel<Scalar> best = model;

    std::vector<DenseLayer<Scalar>> velocity;
    for (const auto& l : model.layers()) {
        velocity.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()),
                            DenseLayer<Scalar>::Vector::Zero(l.bias.size())});
    }
    const auto lr = static_cast<Scalar>(cfg.learning_rate);
    const auto mu = static_cast<Scalar>(cfg.momentum);
    std::size_t since_best = 0;
    std::vector<int> batch_y;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        RngStream epoch_rng = root.split({1, epoch});
        detail::shuffle(train_idx, epoch_rng);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, train_idx.size() - start);
            const std::span<const std::size_t> idx(train_idx.data() + start, len);
            const Matrix bx = detail::gather_columns(inputs, idx);
            batch_y.resize(len);
            for (std::size_t i = 0; i < len; ++i) batch_y[i] = labels[idx[i]];
            auto lg = loss_and_gradient(model, bx, batch_y);
            if (!std::isfinite(lg.loss)) {
                report.diverged = true;
                throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch), report);
            }
            loss_sum += lg.loss;
            ++n_batches;
            auto& layers = model.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                velocity[l].weights = mu * velocity[l].weights - lr * lg.gradient[l].weights;
                velocity[l].bias = mu * velocity[l].bias - lr * lg.gradient[l].bias;
                layers[l].weights += velocity[l].weights;
                layers[l].bias += velocity[l].bias;
            }
        }
        report.train_losses.push_back(loss_sum / static_cast<double>(n_batches));
        const double val_loss = detail::mean_loss(model, val_x, val_y);
        report.validation_losses.push_back(val_loss);
        if (!std::isfinite(val_loss)) {
            report.diverged = true;
            throw TrainingDiverged("validation loss diverged at epoch " + std::to_string(epoch), report);
        }
        if (val_loss < report.best_validation_loss) {
            report.best_validation_loss = val_loss;
            report.best_epoch = epoch;
            best = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.stopped_early = true;
            break;
        }
    }
    return {std::move(best), std::move(report)};
}

} // namespace causallab
