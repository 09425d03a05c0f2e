#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedskip/datasets.hpp"
#include "fedskip/nn.hpp"
#include "fedskip/twin.hpp"

namespace fedskip::fed {

struct SkipThresholds {
    double tau_mag = 0.001;  // raw L2-norm units
    double tau_unc = 0.001;
};

enum class Decision { Communicate, Skip };

struct Strategy {
    enum class Kind { FedAvg, FedSkipTwin };
    Kind kind = Kind::FedAvg;
    SkipThresholds thresholds;

    static Strategy fedavg() { return {Kind::FedAvg, {}}; }
    static Strategy fedskiptwin(SkipThresholds t) { return {Kind::FedSkipTwin, t}; }
};

struct ClientRoundRecord {
    int32_t client_id = 0;
    Decision decision = Decision::Communicate;
    std::optional<double> predicted_magnitude;  // absent for the baseline
    std::optional<double> uncertainty;
    std::optional<double> actual_norm;  // present iff the client communicated
    int64_t bytes_up = 0;
    int64_t bytes_down = 0;
};

struct RoundLog {
    int round_index = 0;  // 1-based
    std::vector<ClientRoundRecord> per_client;
    std::vector<int32_t> participants;  // ascending client ids
    double global_accuracy = 0.0;
    double global_loss = 0.0;
    int64_t cumulative_bytes = 0;  // across all rounds so far
};

struct ServerState {
    nn::ParameterVector theta;
    std::vector<twin::TwinModel> twins;
    int64_t cumulative_bytes = 0;
};

struct ExperimentResult {
    std::vector<RoundLog> logs;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    int64_t total_bytes = 0;
    int64_t payload = 0;  // bytes for one model transfer
    double total_mb = 0.0;
    double mean_skip_rate = 0.0;
    std::vector<double> per_round_skip_rates;
};

// Skip only when the twin is confident the update is negligible; anything
// else, including a cold start, communicates.
Decision skip_decision(const twin::TwinForecast& forecast, const SkipThresholds& thresholds);

// Wire size of one model transfer: 4 bytes per parameter.
int64_t payload_bytes(const nn::ParameterVector& params);

// E local epochs of minibatch SGD from the broadcast parameters. Batch order
// reshuffles each epoch from (cfg.rng_seed, client_id, round, epoch).
nn::ParameterVector client_update(const nn::ParameterVector& global_params,
                                  const data::LabeledDataset& train,
                                  const data::ClientDataset& client, const nn::TrainConfig& cfg,
                                  int round);

// theta_prev + sum over deltas of (|D_i| / total participating size) * delta_i.
// An empty delta list returns theta_prev unchanged.
nn::ParameterVector aggregate(const nn::ParameterVector& theta_prev,
                              const std::vector<std::pair<int32_t, nn::ParameterVector>>& deltas,
                              const std::vector<std::pair<int32_t, int64_t>>& sizes);

RoundLog run_round(ServerState& state, int round, const Strategy& strategy,
                   const data::LabeledDataset& train, const data::Partition& partition,
                   const data::LabeledDataset& test, std::span<const int32_t> eval_indices,
                   const nn::TrainConfig& cfg, int threads = 1);

// T rounds from the given initial parameters with freshly built twins.
ExperimentResult run_experiment(const Strategy& strategy, const nn::ParameterVector& initial,
                                const data::LabeledDataset& train,
                                const data::Partition& partition,
                                const data::LabeledDataset& test,
                                std::span<const int32_t> eval_indices,
                                const nn::TrainConfig& cfg, const twin::TwinConfig& twin_cfg,
                                int rounds, int threads = 1,
                                ServerState* final_state = nullptr);

}  // namespace fedskip::fed
