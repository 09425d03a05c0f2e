#include "fedskip/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "fedskip/errors.hpp"
#include "fedskip/kernels.hpp"
#include "fedskip/rng.hpp"

namespace fedskip::nn {

namespace {

std::string kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Softmax: return "Softmax";
    }
    return "?";
}

}  // namespace

LayerSpec LayerSpec::dense(int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in;
    s.out_features = out;
    return s;
}

LayerSpec LayerSpec::conv2d(int filters, int kernel_h, int kernel_w, int in_channels) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.filters = filters;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.in_channels = in_channels;
    return s;
}

LayerSpec LayerSpec::maxpool2d(int h, int w) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.pool_h = h;
    s.pool_w = w;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
}

size_t LayerSpec::param_count() const {
    switch (kind) {
        case LayerKind::Dense:
            return static_cast<size_t>(in_features) * out_features + out_features;
        case LayerKind::Conv2D:
            return static_cast<size_t>(filters) * in_channels * kernel_h * kernel_w + filters;
        default:
            return 0;
    }
}

ParameterVector::ParameterVector(std::vector<LayoutEntry> layout, TensorShape input_shape,
                                 std::vector<double> values)
    : values_(std::move(values)), layout_(std::move(layout)), input_shape_(input_shape) {
    size_t expected = 0;
    for (const auto& e : layout_) {
        if (e.offset != expected)
            throw ShapeError("parameter layout offsets must be contiguous");
        expected += e.length;
    }
    if (expected != values_.size())
        throw ShapeError("parameter layout does not cover the value vector");
}

std::span<double> ParameterVector::layer_values(size_t layer_index) {
    const auto& e = layout_.at(layer_index);
    return {values_.data() + e.offset, e.length};
}

std::span<const double> ParameterVector::layer_values(size_t layer_index) const {
    const auto& e = layout_.at(layer_index);
    return {values_.data() + e.offset, e.length};
}

bool ParameterVector::same_layout(const ParameterVector& other) const {
    return input_shape_ == other.input_shape_ && layout_ == other.layout_;
}

ParameterVector ParameterVector::zeros_like(const ParameterVector& p) {
    return ParameterVector(p.layout_, p.input_shape_, std::vector<double>(p.size(), 0.0));
}

namespace {

// Shape of the activation entering each layer; result[i] feeds layout[i],
// result.back() is the network output shape.
std::vector<TensorShape> activation_shapes(const std::vector<LayerSpec>& layers,
                                           TensorShape input) {
    std::vector<TensorShape> shapes;
    shapes.reserve(layers.size() + 1);
    shapes.push_back(input);
    TensorShape cur = input;
    for (size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerKind::Dense:
                if (l.in_features < 1 || l.out_features < 1)
                    throw ShapeError("Dense dims must be >= 1");
                if (cur.flat() != l.in_features)
                    throw ShapeError("Dense layer " + std::to_string(i) + " expects " +
                                     std::to_string(l.in_features) + " inputs, got " +
                                     std::to_string(cur.flat()));
                cur = TensorShape{l.out_features, 1, 1};
                break;
            case LayerKind::Conv2D: {
                if (l.filters < 1 || l.in_channels < 1 || l.kernel_h < 1 || l.kernel_w < 1)
                    throw ShapeError("Conv2D dims must be >= 1");
                if (cur.channels != l.in_channels)
                    throw ShapeError("Conv2D layer " + std::to_string(i) + " expects " +
                                     std::to_string(l.in_channels) + " channels, got " +
                                     std::to_string(cur.channels));
                int oh = cur.height - l.kernel_h + 1;
                int ow = cur.width - l.kernel_w + 1;
                if (oh < 1 || ow < 1)
                    throw ShapeError("Conv2D kernel larger than input");
                cur = TensorShape{l.filters, oh, ow};
                break;
            }
            case LayerKind::MaxPool2D: {
                if (l.pool_h < 1 || l.pool_w < 1)
                    throw ShapeError("MaxPool2D window must be >= 1");
                int oh = cur.height / l.pool_h;
                int ow = cur.width / l.pool_w;
                if (oh < 1 || ow < 1)
                    throw ShapeError("MaxPool2D window larger than input");
                cur = TensorShape{cur.channels, oh, ow};
                break;
            }
            case LayerKind::Flatten:
                cur = TensorShape{cur.flat(), 1, 1};
                break;
            case LayerKind::ReLU:
            case LayerKind::Softmax:
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::vector<LayerSpec> layout_specs(const ParameterVector& params) {
    std::vector<LayerSpec> specs;
    specs.reserve(params.layout().size());
    for (const auto& e : params.layout()) specs.push_back(e.spec);
    return specs;
}

void check_batch(const ParameterVector& params, const Batch& batch) {
    if (batch.batch_size < 1) throw ShapeError("batch must hold at least one sample");
    if (static_cast<size_t>(batch.batch_size) != batch.labels.size())
        throw ShapeError("batch inputs and labels disagree on sample count");
    if (batch.features() != params.input_shape().flat())
        throw ShapeError("batch has " + std::to_string(batch.features()) +
                         " features per sample, model expects " +
                         std::to_string(params.input_shape().flat()));
}

struct SampleTrace {
    std::vector<std::vector<double>> acts;       // acts[l] feeds layer l
    std::vector<std::vector<int>> pool_argmax;   // indexed like layers; empty unless MaxPool2D
    std::vector<std::vector<double>> conv_cols;  // im2col patches; empty unless Conv2D
};

void im2col(const double* x, TensorShape in, int kh, int kw, double* col, int oh, int ow) {
    const int patch = kh * kw;
    const int plane = in.height * in.width;
    for (int py = 0; py < oh; ++py) {
        for (int px = 0; px < ow; ++px) {
            double* row = col + (static_cast<size_t>(py) * ow + px) * in.channels * patch;
            for (int c = 0; c < in.channels; ++c) {
                const double* src = x + c * plane + py * in.width + px;
                double* dst = row + c * patch;
                for (int r = 0; r < kh; ++r)
                    std::memcpy(dst + r * kw, src + r * in.width, sizeof(double) * kw);
            }
        }
    }
}

void col2im_add(const double* col, TensorShape in, int kh, int kw, double* dx, int oh, int ow) {
    const int patch = kh * kw;
    const int plane = in.height * in.width;
    for (int py = 0; py < oh; ++py) {
        for (int px = 0; px < ow; ++px) {
            const double* row = col + (static_cast<size_t>(py) * ow + px) * in.channels * patch;
            for (int c = 0; c < in.channels; ++c) {
                double* dst = dx + c * plane + py * in.width + px;
                const double* src = row + c * patch;
                for (int r = 0; r < kh; ++r)
                    for (int k = 0; k < kw; ++k) dst[r * in.width + k] += src[r * kw + k];
            }
        }
    }
}

// Forward for one sample. Fills `trace` when given (needed for backward).
void forward_sample(const ParameterVector& params, const std::vector<TensorShape>& shapes,
                    std::span<const double> input, std::vector<double>& out,
                    SampleTrace* trace) {
    const auto& layout = params.layout();
    std::vector<double> cur(input.begin(), input.end());
    if (trace) {
        trace->acts.assign(layout.size() + 1, {});
        trace->pool_argmax.assign(layout.size(), {});
        trace->conv_cols.assign(layout.size(), {});
        trace->acts[0] = cur;
    }
    for (size_t li = 0; li < layout.size(); ++li) {
        const LayerSpec& l = layout[li].spec;
        const TensorShape in = shapes[li];
        const TensorShape outs = shapes[li + 1];
        std::vector<double> next;
        switch (l.kind) {
            case LayerKind::Dense: {
                auto w = params.layer_values(li);
                const double* weights = w.data();
                const double* bias = w.data() + static_cast<size_t>(l.in_features) * l.out_features;
                next.resize(l.out_features);
                for (int o = 0; o < l.out_features; ++o)
                    next[o] = kernels::dot(weights + static_cast<size_t>(o) * l.in_features,
                                           cur.data(), l.in_features) +
                              bias[o];
                break;
            }
            case LayerKind::Conv2D: {
                auto w = params.layer_values(li);
                const int k = l.in_channels * l.kernel_h * l.kernel_w;
                const int positions = outs.height * outs.width;
                const double* weights = w.data();
                const double* bias = w.data() + static_cast<size_t>(l.filters) * k;
                std::vector<double> col(static_cast<size_t>(positions) * k);
                im2col(cur.data(), in, l.kernel_h, l.kernel_w, col.data(), outs.height,
                       outs.width);
                next.resize(static_cast<size_t>(l.filters) * positions);
                for (int p = 0; p < positions; ++p) {
                    const double* patch = col.data() + static_cast<size_t>(p) * k;
                    for (int f = 0; f < l.filters; ++f)
                        next[static_cast<size_t>(f) * positions + p] =
                            kernels::dot(weights + static_cast<size_t>(f) * k, patch, k) + bias[f];
                }
                if (trace) trace->conv_cols[li] = std::move(col);
                break;
            }
            case LayerKind::MaxPool2D: {
                const int plane_in = in.height * in.width;
                const int plane_out = outs.height * outs.width;
                next.resize(static_cast<size_t>(outs.channels) * plane_out);
                std::vector<int> argmax;
                if (trace) argmax.resize(next.size());
                for (int c = 0; c < in.channels; ++c) {
                    for (int py = 0; py < outs.height; ++py) {
                        for (int px = 0; px < outs.width; ++px) {
                            int base = c * plane_in + py * l.pool_h * in.width + px * l.pool_w;
                            double best = -std::numeric_limits<double>::infinity();
                            int best_idx = base;
                            for (int r = 0; r < l.pool_h; ++r) {
                                for (int k = 0; k < l.pool_w; ++k) {
                                    int idx = base + r * in.width + k;
                                    if (cur[idx] > best) {
                                        best = cur[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            int out_idx = c * plane_out + py * outs.width + px;
                            next[out_idx] = best;
                            if (trace) argmax[out_idx] = best_idx;
                        }
                    }
                }
                if (trace) trace->pool_argmax[li] = std::move(argmax);
                break;
            }
            case LayerKind::Flatten:
                next = cur;
                break;
            case LayerKind::ReLU:
                next.resize(cur.size());
                for (size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] > 0.0 ? cur[i] : 0.0;
                break;
            case LayerKind::Softmax: {
                next.resize(cur.size());
                double m = *std::max_element(cur.begin(), cur.end());
                double sum = 0.0;
                for (size_t i = 0; i < cur.size(); ++i) {
                    next[i] = std::exp(cur[i] - m);
                    sum += next[i];
                }
                for (auto& v : next) v /= sum;
                break;
            }
        }
        cur = std::move(next);
        if (trace) trace->acts[li + 1] = cur;
    }
    out = std::move(cur);
}

// Cross-entropy of one sample from the logits (log-sum-exp form).
double sample_loss_from_logits(std::span<const double> logits, int label) {
    double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    return m + std::log(sum) - logits[label];
}

void validate_network(const std::vector<LayerSpec>& layers, TensorShape input) {
    if (layers.empty()) throw ShapeError("network needs at least one layer");
    if (input.flat() < 1) throw ShapeError("input shape must be non-empty");
    if (layers.back().kind != LayerKind::Softmax)
        throw ShapeError("final layer must be Softmax, got " + kind_name(layers.back().kind));
    activation_shapes(layers, input);  // throws on any incompatibility
}

}  // namespace

ParameterVector build_network(const std::vector<LayerSpec>& layers, TensorShape input_shape,
                              uint64_t rng_seed) {
    validate_network(layers, input_shape);
    std::vector<LayoutEntry> layout;
    layout.reserve(layers.size());
    size_t offset = 0;
    for (const auto& l : layers) {
        layout.push_back({l, offset, l.param_count()});
        offset += l.param_count();
    }
    std::vector<double> values(offset, 0.0);
    Rng rng(mix_seed({rng_seed, 0x6e6574ULL}));
    for (const auto& e : layout) {
        if (e.length == 0) continue;
        size_t fan_in = 0, fan_out = 0, weight_count = 0;
        if (e.spec.kind == LayerKind::Dense) {
            fan_in = e.spec.in_features;
            fan_out = e.spec.out_features;
            weight_count = fan_in * fan_out;
        } else {  // Conv2D
            fan_in = static_cast<size_t>(e.spec.in_channels) * e.spec.kernel_h * e.spec.kernel_w;
            fan_out = static_cast<size_t>(e.spec.filters) * e.spec.kernel_h * e.spec.kernel_w;
            weight_count = static_cast<size_t>(e.spec.filters) * fan_in;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (size_t i = 0; i < weight_count; ++i)
            values[e.offset + i] = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return ParameterVector(std::move(layout), input_shape, std::move(values));
}

ParameterVector build_model(Arch arch, uint64_t rng_seed) {
    switch (arch) {
        case Arch::HarMlp:
            return build_network(
                {LayerSpec::dense(561, 128), LayerSpec::relu(), LayerSpec::dense(128, 64),
                 LayerSpec::relu(), LayerSpec::dense(64, 6), LayerSpec::softmax()},
                TensorShape{1, 1, 561}, rng_seed);
        case Arch::MnistCnn:
            return build_network(
                {LayerSpec::conv2d(16, 5, 5, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                 LayerSpec::conv2d(32, 5, 5, 16), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                 LayerSpec::flatten(), LayerSpec::dense(512, 10), LayerSpec::softmax()},
                TensorShape{1, 28, 28}, rng_seed);
    }
    throw ValidationError("unknown architecture");
}

Batch make_batch(const data::LabeledDataset& dataset, std::span<const int32_t> indices) {
    Batch b;
    b.batch_size = static_cast<int>(indices.size());
    const int64_t f = dataset.feature_count();
    b.inputs.resize(indices.size() * f);
    b.labels.resize(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        auto s = dataset.sample(indices[i]);
        std::copy(s.begin(), s.end(), b.inputs.begin() + i * f);
        b.labels[i] = dataset.labels[indices[i]];
    }
    return b;
}

std::vector<double> forward(const ParameterVector& params, const Batch& batch) {
    check_batch(params, batch);
    const auto specs = layout_specs(params);
    const auto shapes = activation_shapes(specs, params.input_shape());
    const int features = params.input_shape().flat();
    const int classes = shapes.back().flat();
    std::vector<double> out(static_cast<size_t>(batch.batch_size) * classes);
    std::vector<double> row;
    for (int b = 0; b < batch.batch_size; ++b) {
        forward_sample(params, shapes,
                       {batch.inputs.data() + static_cast<size_t>(b) * features,
                        static_cast<size_t>(features)},
                       row, nullptr);
        std::copy(row.begin(), row.end(), out.begin() + static_cast<size_t>(b) * classes);
    }
    return out;
}

namespace {

LossGrad loss_impl(const ParameterVector& params, const Batch& batch, bool want_grad) {
    check_batch(params, batch);
    const auto& layout = params.layout();
    const auto specs = layout_specs(params);
    const auto shapes = activation_shapes(specs, params.input_shape());
    if (specs.back().kind != LayerKind::Softmax)
        throw ShapeError("loss requires a Softmax output layer");
    const int features = params.input_shape().flat();
    const int classes = shapes.back().flat();
    for (int32_t label : batch.labels)
        if (label < 0 || label >= classes)
            throw ShapeError("label out of range for " + std::to_string(classes) + " classes");

    LossGrad result;
    if (want_grad) result.grad = ParameterVector::zeros_like(params);
    double total_loss = 0.0;
    const double inv_b = 1.0 / batch.batch_size;

    SampleTrace trace;
    std::vector<double> probs;
    for (int b = 0; b < batch.batch_size; ++b) {
        std::span<const double> x{batch.inputs.data() + static_cast<size_t>(b) * features,
                                  static_cast<size_t>(features)};
        forward_sample(params, shapes, x, probs, &trace);
        const auto& logits = trace.acts[layout.size() - 1];
        total_loss += sample_loss_from_logits(logits, batch.labels[b]);
        if (!want_grad) continue;

        // dL/dlogits for mean CE through softmax: (p - onehot)/B
        std::vector<double> d(probs);
        for (auto& v : d) v *= inv_b;
        d[batch.labels[b]] -= inv_b;

        // backward through layers, skipping the Softmax head (folded above)
        for (size_t li = layout.size() - 1; li-- > 0;) {
            const LayerSpec& l = layout[li].spec;
            const TensorShape in = shapes[li];
            const TensorShape outs = shapes[li + 1];
            const auto& x_in = trace.acts[li];
            std::vector<double> dx;
            switch (l.kind) {
                case LayerKind::Dense: {
                    auto w = params.layer_values(li);
                    auto g = result.grad.layer_values(li);
                    const double* weights = w.data();
                    double* gw = g.data();
                    double* gb = g.data() + static_cast<size_t>(l.in_features) * l.out_features;
                    dx.assign(l.in_features, 0.0);
                    for (int o = 0; o < l.out_features; ++o) {
                        const double dyo = d[o];
                        if (dyo != 0.0) {
                            kernels::axpy(dyo, x_in.data(),
                                          gw + static_cast<size_t>(o) * l.in_features,
                                          l.in_features);
                            kernels::axpy(dyo, weights + static_cast<size_t>(o) * l.in_features,
                                          dx.data(), l.in_features);
                        }
                        gb[o] += dyo;
                    }
                    break;
                }
                case LayerKind::Conv2D: {
                    auto w = params.layer_values(li);
                    auto g = result.grad.layer_values(li);
                    const int k = l.in_channels * l.kernel_h * l.kernel_w;
                    const int positions = outs.height * outs.width;
                    const double* weights = w.data();
                    double* gw = g.data();
                    double* gb = g.data() + static_cast<size_t>(l.filters) * k;
                    const auto& col = trace.conv_cols[li];
                    std::vector<double> dcol(col.size(), 0.0);
                    for (int f = 0; f < l.filters; ++f) {
                        const double* drow = d.data() + static_cast<size_t>(f) * positions;
                        double acc = 0.0;
                        for (int p = 0; p < positions; ++p) {
                            const double dyo = drow[p];
                            acc += dyo;
                            if (dyo != 0.0) {
                                kernels::axpy(dyo, col.data() + static_cast<size_t>(p) * k,
                                              gw + static_cast<size_t>(f) * k, k);
                                kernels::axpy(dyo, weights + static_cast<size_t>(f) * k,
                                              dcol.data() + static_cast<size_t>(p) * k, k);
                            }
                        }
                        gb[f] += acc;
                    }
                    dx.assign(x_in.size(), 0.0);
                    col2im_add(dcol.data(), in, l.kernel_h, l.kernel_w, dx.data(), outs.height,
                               outs.width);
                    break;
                }
                case LayerKind::MaxPool2D: {
                    dx.assign(x_in.size(), 0.0);
                    const auto& argmax = trace.pool_argmax[li];
                    for (size_t i = 0; i < d.size(); ++i) dx[argmax[i]] += d[i];
                    break;
                }
                case LayerKind::Flatten:
                    dx = std::move(d);
                    break;
                case LayerKind::ReLU:
                    dx.resize(d.size());
                    for (size_t i = 0; i < d.size(); ++i) dx[i] = x_in[i] > 0.0 ? d[i] : 0.0;
                    break;
                case LayerKind::Softmax:
                    throw ShapeError("Softmax must be the final layer");
            }
            d = std::move(dx);
        }
    }
    result.loss = total_loss * inv_b;
    return result;
}

}  // namespace

LossGrad loss_and_grad(const ParameterVector& params, const Batch& batch) {
    return loss_impl(params, batch, true);
}

double loss_only(const ParameterVector& params, const Batch& batch) {
    return loss_impl(params, batch, false).loss;
}

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad, double lr) {
    if (!params.same_layout(grad)) throw ShapeError("sgd_step: parameter/gradient layout mismatch");
    ParameterVector out = params;
    kernels::axpy(-lr, grad.values().data(), out.values().data(), out.size());
    return out;
}

double l2_norm(const ParameterVector& delta) {
    return std::sqrt(kernels::sumsq(delta.values().data(), delta.size()));
}

EvalResult evaluate(const ParameterVector& params, const data::LabeledDataset& dataset,
                    std::span<const int32_t> indices) {
    std::vector<int32_t> all;
    if (indices.empty()) {
        all.resize(dataset.size());
        for (int64_t i = 0; i < dataset.size(); ++i) all[i] = static_cast<int32_t>(i);
        indices = all;
    }
    if (indices.empty()) throw ValidationError("evaluate: empty dataset");

    const auto specs = layout_specs(params);
    const auto shapes = activation_shapes(specs, params.input_shape());
    const int features = params.input_shape().flat();
    const int classes = shapes.back().flat();

    int64_t correct = 0;
    double total_loss = 0.0;
    std::vector<double> row;
    SampleTrace trace;
    for (int32_t idx : indices) {
        auto s = dataset.sample(idx);
        if (static_cast<int>(s.size()) != features)
            throw ShapeError("evaluate: sample width does not match model input");
        forward_sample(params, shapes, s, row, &trace);
        const auto& logits = trace.acts[params.layout().size() - 1];
        const int32_t label = dataset.labels[idx];
        if (label < 0 || label >= classes) throw ShapeError("evaluate: label out of range");
        total_loss += sample_loss_from_logits(logits, label);
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (row[c] > row[best]) best = c;  // strict >: ties keep the lowest index
        if (best == label) ++correct;
    }
    const double n = static_cast<double>(indices.size());
    return {static_cast<double>(correct) / n, total_loss / n};
}

}  // namespace fedskip::nn
