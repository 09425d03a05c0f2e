#include "fedskip/twin.hpp"

#include <algorithm>
#include <cmath>

#include "fedskip/errors.hpp"
#include "fedskip/kernels.hpp"
#include "fedskip/rng.hpp"

namespace fedskip::twin {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_config(const TwinConfig& cfg) {
    if (cfg.hidden_size < 1) throw ValidationError("twin: hidden_size must be >= 1");
    if (cfg.window < 2) throw ValidationError("twin: window must be >= 2");
    if (cfg.mc_passes < 1) throw ValidationError("twin: mc_passes must be >= 1");
    if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
        throw ValidationError("twin: dropout_rate must be in [0,1)");
    if (cfg.retrain_epochs < 0) throw ValidationError("twin: retrain_epochs must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("twin: learning_rate must be > 0");
}

// One LSTM step's saved activations, for backprop.
struct StepTrace {
    std::vector<double> i, f, g, o, c, tanh_c, h_prev;
};

}  // namespace

TwinModel::TwinModel(TwinConfig cfg, uint64_t rng_seed) : cfg_(cfg), rng_seed_(rng_seed) {
    check_config(cfg_);
    const int H = cfg_.hidden_size;
    wx_.resize(4 * H);
    wh_.resize(static_cast<size_t>(4 * H) * H);
    b_.assign(4 * H, 0.0);
    head_w_.resize(H);
    Rng rng(mix_seed({rng_seed_, 0x7477696eULL}));
    const double bx = std::sqrt(6.0 / (1.0 + H));
    for (auto& w : wx_) w = rng.uniform(-bx, bx);
    const double bh = std::sqrt(6.0 / (H + H));
    for (auto& w : wh_) w = rng.uniform(-bh, bh);
    const double bo = std::sqrt(6.0 / (H + 1.0));
    for (auto& w : head_w_) w = rng.uniform(-bo, bo);
}

TwinModel TwinModel::from_state(TwinConfig cfg, uint64_t rng_seed, std::vector<double> wx,
                                std::vector<double> wh, std::vector<double> b,
                                std::vector<double> head_w, double head_b,
                                std::vector<double> history, double norm_scale,
                                uint64_t observe_count) {
    TwinModel t(cfg, rng_seed);
    const size_t H = static_cast<size_t>(cfg.hidden_size);
    if (wx.size() != 4 * H || wh.size() != 4 * H * H || b.size() != 4 * H || head_w.size() != H)
        throw ShapeError("twin state dimensions do not match hidden_size");
    if (history.size() > static_cast<size_t>(cfg.window))
        throw ShapeError("twin history exceeds window capacity");
    t.wx_ = std::move(wx);
    t.wh_ = std::move(wh);
    t.b_ = std::move(b);
    t.head_w_ = std::move(head_w);
    t.head_b_ = head_b;
    t.history_ = std::move(history);
    t.norm_scale_ = std::max(norm_scale, 1e-12);
    t.observe_count_ = observe_count;
    return t;
}

double TwinModel::lstm_forward(std::span<const double> sequence,
                               std::span<const double> dropout_mask) const {
    if (sequence.empty()) throw ValidationError("lstm_forward: empty sequence");
    const int H = cfg_.hidden_size;
    if (!dropout_mask.empty() && dropout_mask.size() != static_cast<size_t>(H))
        throw ShapeError("lstm_forward: dropout mask size must equal hidden_size");

    std::vector<double> h(H, 0.0), c(H, 0.0), pre(4 * H);
    for (double x : sequence) {
        for (int r = 0; r < 4 * H; ++r)
            pre[r] = wx_[r] * x + kernels::dot(wh_.data() + static_cast<size_t>(r) * H, h.data(), H) +
                     b_[r];
        for (int j = 0; j < H; ++j) {
            const double ig = sigmoid(pre[j]);
            const double fg = sigmoid(pre[H + j]);
            const double gg = std::tanh(pre[2 * H + j]);
            const double og = sigmoid(pre[3 * H + j]);
            c[j] = fg * c[j] + ig * gg;
            h[j] = og * std::tanh(c[j]);
        }
    }
    double y = head_b_;
    for (int j = 0; j < H; ++j) {
        const double hj = dropout_mask.empty() ? h[j] : h[j] * dropout_mask[j];
        y += head_w_[j] * hj;
    }
    return y;
}

TwinForecast TwinModel::predict(int mc_passes, uint64_t nonce) const {
    if (mc_passes < 1) throw ValidationError("predict: mc_passes must be >= 1");
    if (history_.size() < 2) return {0.0, 0.0, true};

    std::vector<double> seq(history_.size());
    for (size_t i = 0; i < history_.size(); ++i) seq[i] = history_[i] / norm_scale_;

    if (cfg_.dropout_rate == 0.0) {
        const double y = lstm_forward(seq);
        return {std::max(0.0, y * norm_scale_), 0.0, false};
    }

    const int H = cfg_.hidden_size;
    const double keep = 1.0 - cfg_.dropout_rate;
    Rng rng(mix_seed({rng_seed_, observe_count_, nonce, 0x707264ULL}));
    std::vector<double> mask(H), ys(mc_passes);
    for (int k = 0; k < mc_passes; ++k) {
        for (int j = 0; j < H; ++j) mask[j] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        ys[k] = lstm_forward(seq, mask);
    }
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= mc_passes;
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= mc_passes;
    return {std::max(0.0, mean * norm_scale_), std::sqrt(var) * norm_scale_, false};
}

struct TwinModel::Gradients {
    std::vector<double> wx, wh, b, head_w;
    double head_b = 0.0;
    void resize_zero(int H) {
        wx.assign(4 * H, 0.0);
        wh.assign(static_cast<size_t>(4 * H) * H, 0.0);
        b.assign(4 * H, 0.0);
        head_w.assign(H, 0.0);
        head_b = 0.0;
    }
};

// Forward + backprop-through-time for one (prefix -> next value) pair.
// Adds `weight * dL/dw` for L = (y - target)^2 into g; returns the pair's loss.
double TwinModel::pair_loss_and_grad(std::span<const double> seq, double target,
                                     std::span<const double> mask, double weight,
                                     Gradients& g) const {
    const int H = cfg_.hidden_size;
    const size_t L = seq.size();
    std::vector<StepTrace> steps(L);
    std::vector<double> h(H, 0.0), c(H, 0.0), pre(4 * H);
    for (size_t t = 0; t < L; ++t) {
        StepTrace& s = steps[t];
        s.h_prev = h;
        s.i.resize(H);
        s.f.resize(H);
        s.g.resize(H);
        s.o.resize(H);
        s.c = c;  // c_{t-1} for the moment; overwritten below
        s.tanh_c.resize(H);
        for (int r = 0; r < 4 * H; ++r)
            pre[r] = wx_[r] * seq[t] +
                     kernels::dot(wh_.data() + static_cast<size_t>(r) * H, h.data(), H) + b_[r];
        for (int j = 0; j < H; ++j) {
            s.i[j] = sigmoid(pre[j]);
            s.f[j] = sigmoid(pre[H + j]);
            s.g[j] = std::tanh(pre[2 * H + j]);
            s.o[j] = sigmoid(pre[3 * H + j]);
            const double c_prev = c[j];
            c[j] = s.f[j] * c_prev + s.i[j] * s.g[j];
            s.tanh_c[j] = std::tanh(c[j]);
            h[j] = s.o[j] * s.tanh_c[j];
        }
    }

    double y = head_b_;
    for (int j = 0; j < H; ++j) {
        const double hj = mask.empty() ? h[j] : h[j] * mask[j];
        y += head_w_[j] * hj;
    }
    const double err = y - target;
    const double dy = weight * 2.0 * err;

    std::vector<double> dh(H), dc(H, 0.0);
    for (int j = 0; j < H; ++j) {
        const double m = mask.empty() ? 1.0 : mask[j];
        g.head_w[j] += dy * h[j] * m;
        dh[j] = dy * head_w_[j] * m;
    }
    g.head_b += dy;

    std::vector<double> dpre(4 * H), dh_prev(H);
    for (size_t t = L; t-- > 0;) {
        const StepTrace& s = steps[t];
        for (int j = 0; j < H; ++j) {
            const double do_ = dh[j] * s.tanh_c[j];
            dc[j] += dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            const double di = dc[j] * s.g[j];
            const double dg = dc[j] * s.i[j];
            const double df = dc[j] * s.c[j];  // s.c holds c_{t-1}
            dc[j] = dc[j] * s.f[j];
            dpre[j] = di * s.i[j] * (1.0 - s.i[j]);
            dpre[H + j] = df * s.f[j] * (1.0 - s.f[j]);
            dpre[2 * H + j] = dg * (1.0 - s.g[j] * s.g[j]);
            dpre[3 * H + j] = do_ * s.o[j] * (1.0 - s.o[j]);
        }
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        for (int r = 0; r < 4 * H; ++r) {
            const double d = dpre[r];
            if (d == 0.0) continue;
            g.wx[r] += d * seq[t];
            g.b[r] += d;
            kernels::axpy(d, s.h_prev.data(), g.wh.data() + static_cast<size_t>(r) * H, H);
            kernels::axpy(d, wh_.data() + static_cast<size_t>(r) * H, dh_prev.data(), H);
        }
        dh = dh_prev;
    }
    return err * err;
}

void TwinModel::observe_and_retrain(double observed_norm, int epochs, double lr) {
    if (!(observed_norm >= 0.0) || !std::isfinite(observed_norm))
        throw ValidationError("observe_and_retrain: norm must be finite and >= 0");
    if (epochs < 0) throw ValidationError("observe_and_retrain: epochs must be >= 0");

    history_.push_back(observed_norm);
    if (history_.size() > static_cast<size_t>(cfg_.window))
        history_.erase(history_.begin());
    norm_scale_ = std::max(norm_scale_, observed_norm);
    ++observe_count_;

    const size_t pairs = history_.size() >= 2 ? history_.size() - 1 : 0;
    if (epochs == 0 || pairs == 0) return;

    std::vector<double> seq(history_.size());
    for (size_t i = 0; i < history_.size(); ++i) seq[i] = history_[i] / norm_scale_;

    const int H = cfg_.hidden_size;
    const double keep = 1.0 - cfg_.dropout_rate;
    Rng rng(mix_seed({rng_seed_, observe_count_, 0x74726eULL}));
    Gradients g;
    std::vector<double> mask(H);
    for (int e = 0; e < epochs; ++e) {
        g.resize_zero(H);
        const double weight = 1.0 / static_cast<double>(pairs);
        for (size_t j = 1; j < history_.size(); ++j) {
            std::span<const double> prefix(seq.data(), j);
            std::span<const double> m;
            if (cfg_.dropout_rate > 0.0) {
                for (int k = 0; k < H; ++k) mask[k] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
                m = mask;
            }
            pair_loss_and_grad(prefix, seq[j], m, weight, g);
        }
        kernels::axpy(-lr, g.wx.data(), wx_.data(), wx_.size());
        kernels::axpy(-lr, g.wh.data(), wh_.data(), wh_.size());
        kernels::axpy(-lr, g.b.data(), b_.data(), b_.size());
        kernels::axpy(-lr, g.head_w.data(), head_w_.data(), head_w_.size());
        head_b_ -= lr * g.head_b;
    }
}

double TwinModel::next_step_mse() const {
    if (history_.size() < 2) return 0.0;
    std::vector<double> seq(history_.size());
    for (size_t i = 0; i < history_.size(); ++i) seq[i] = history_[i] / norm_scale_;
    double total = 0.0;
    for (size_t j = 1; j < history_.size(); ++j) {
        const double y = lstm_forward({seq.data(), j});
        total += (y - seq[j]) * (y - seq[j]);
    }
    return total / static_cast<double>(history_.size() - 1);
}

}  // namespace fedskip::twin
