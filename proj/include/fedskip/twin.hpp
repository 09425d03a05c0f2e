#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedskip::twin {

struct TwinConfig {
    int hidden_size = 16;
    int window = 8;          // history capacity
    int mc_passes = 20;
    double dropout_rate = 0.2;  // in [0,1)
    int retrain_epochs = 5;
    double learning_rate = 0.01;
};

struct TwinForecast {
    double predicted_magnitude = 0.0;  // raw norm units, >= 0
    double uncertainty = 0.0;          // std across MC passes, raw norm units
    bool cold_start = false;           // too little history; forces communication
};

// Per-client forecaster: a single LSTM cell (input size 1) over the client's
// recent update norms, a Dense(H -> 1) readout, and MC dropout on the hidden
// state ahead of the readout. Inputs are normalized by the running max norm
// and predictions rescaled back.
class TwinModel {
public:
    TwinModel(TwinConfig cfg, uint64_t rng_seed);

    // One deterministic pass over a normalized sequence. `dropout_mask` is
    // either empty (no dropout) or `hidden_size` pre-scaled factors.
    double lstm_forward(std::span<const double> sequence,
                        std::span<const double> dropout_mask = {}) const;

    // K stochastic passes over the history window. Never mutates the twin.
    // The nonce feeds the dropout mask stream: callers pass the round index
    // so a twin left untouched between rounds still redraws its masks, as
    // live MC-dropout inference would.
    TwinForecast predict(int mc_passes, uint64_t nonce = 0) const;
    TwinForecast predict() const { return predict(cfg_.mc_passes); }

    // Record one observed norm, then take `epochs` gradient steps on the
    // mean squared next-step error over all history prefixes.
    void observe_and_retrain(double observed_norm, int epochs, double lr);
    void observe_and_retrain(double observed_norm) {
        observe_and_retrain(observed_norm, cfg_.retrain_epochs, cfg_.learning_rate);
    }

    // Mean squared next-step error over the history prefixes, dropout off.
    double next_step_mse() const;

    const TwinConfig& config() const { return cfg_; }
    const std::vector<double>& history() const { return history_; }
    double norm_scale() const { return norm_scale_; }
    uint64_t observe_count() const { return observe_count_; }

    const std::vector<double>& wx() const { return wx_; }
    const std::vector<double>& wh() const { return wh_; }
    const std::vector<double>& bias() const { return b_; }
    const std::vector<double>& head_w() const { return head_w_; }
    double head_b() const { return head_b_; }

    // Rebuild a twin from explicit state (tests, checkpoint inspection).
    static TwinModel from_state(TwinConfig cfg, uint64_t rng_seed, std::vector<double> wx,
                                std::vector<double> wh, std::vector<double> b,
                                std::vector<double> head_w, double head_b,
                                std::vector<double> history, double norm_scale,
                                uint64_t observe_count);

private:
    TwinConfig cfg_;
    uint64_t rng_seed_ = 0;
    uint64_t observe_count_ = 0;

    // gate rows packed [input, forget, cell, output], each hidden_size wide
    std::vector<double> wx_;      // 4H
    std::vector<double> wh_;      // 4H x H
    std::vector<double> b_;       // 4H
    std::vector<double> head_w_;  // H
    double head_b_ = 0.0;

    std::vector<double> history_;  // most recent last, size <= window
    double norm_scale_ = 1e-12;    // running max of observed norms

    struct Gradients;
    double pair_loss_and_grad(std::span<const double> seq, double target,
                              std::span<const double> mask, double weight, Gradients& g) const;
};

}  // namespace fedskip::twin
