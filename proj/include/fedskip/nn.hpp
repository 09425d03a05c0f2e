#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedskip/datasets.hpp"

// Minimal training core: explicit forward/backward for small MLP/CNN stacks,
// plain SGD, and a flat parameter store so update deltas and their norms are
// well-defined. 64-bit floats throughout.

namespace fedskip::nn {

enum class LayerKind { Dense, Conv2D, MaxPool2D, Flatten, ReLU, Softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;
    int in_features = 0, out_features = 0;                        // Dense
    int in_channels = 0, filters = 0, kernel_h = 0, kernel_w = 0; // Conv2D
    int pool_h = 0, pool_w = 0;                                   // MaxPool2D

    static LayerSpec dense(int in, int out);
    static LayerSpec conv2d(int filters, int kernel_h, int kernel_w, int in_channels);
    static LayerSpec maxpool2d(int h, int w);
    static LayerSpec flatten();
    static LayerSpec relu();
    static LayerSpec softmax();

    size_t param_count() const;
    bool operator==(const LayerSpec&) const = default;
};

// Activation shape flowing between layers. Dense layers consume flat().
struct TensorShape {
    int channels = 1, height = 1, width = 1;
    int flat() const { return channels * height * width; }
    bool operator==(const TensorShape&) const = default;
};

struct LayoutEntry {
    LayerSpec spec;
    size_t offset = 0;
    size_t length = 0;
    bool operator==(const LayoutEntry&) const = default;
};

// Flat parameter store plus the layer layout that gives the values meaning.
// The layout also fixes the architecture, so a ParameterVector is a complete
// model description; gradients and deltas share the same layout.
class ParameterVector {
  public:
    ParameterVector() = default;
    ParameterVector(std::vector<LayoutEntry> layout, TensorShape input_shape,
                    std::vector<double> values);

    size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<LayoutEntry>& layout() const { return layout_; }
    TensorShape input_shape() const { return input_shape_; }

    std::span<double> layer_values(size_t layer_index);
    std::span<const double> layer_values(size_t layer_index) const;

    bool same_layout(const ParameterVector& other) const;
    static ParameterVector zeros_like(const ParameterVector& p);

  private:
    std::vector<double> values_;
    std::vector<LayoutEntry> layout_;
    TensorShape input_shape_;
};

struct Batch {
    std::vector<double> inputs;  // batch_size x features, row-major
    std::vector<int32_t> labels;
    int batch_size = 0;
    int features() const {
        return batch_size == 0 ? 0 : static_cast<int>(inputs.size()) / batch_size;
    }
};

Batch make_batch(const data::LabeledDataset& dataset, std::span<const int32_t> indices);

struct TrainConfig {
    double learning_rate = 0.01;
    int local_epochs = 3;
    int batch_size = 32;
    uint64_t rng_seed = 42;
};

enum class Arch { HarMlp, MnistCnn };

// Validates shape compatibility, then initializes weights uniform in
// +-sqrt(6/(fan_in+fan_out)) and biases to zero, deterministically from seed.
ParameterVector build_network(const std::vector<LayerSpec>& layers, TensorShape input_shape,
                              uint64_t rng_seed);
ParameterVector build_model(Arch arch, uint64_t rng_seed);

// Class probabilities, batch_size x num_classes row-major. Rows sum to 1.
std::vector<double> forward(const ParameterVector& params, const Batch& batch);

struct LossGrad {
    double loss = 0.0;
    ParameterVector grad;
};

// Mean cross-entropy over the batch and its gradient (same layout as params).
LossGrad loss_and_grad(const ParameterVector& params, const Batch& batch);

// Loss only; shares the forward path of loss_and_grad and skips the backward
// sweep. Used by finite-difference checks and evaluation.
double loss_only(const ParameterVector& params, const Batch& batch);

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad, double lr);

double l2_norm(const ParameterVector& delta);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

// Argmax accuracy (ties go to the lowest class index) plus mean cross-entropy.
// `indices` selects a subset of `dataset`; empty means the full set is used.
EvalResult evaluate(const ParameterVector& params, const data::LabeledDataset& dataset,
                    std::span<const int32_t> indices = {});

}  // namespace fedskip::nn
