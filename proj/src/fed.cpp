#include "fedskip/fed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "fedskip/errors.hpp"
#include "fedskip/kernels.hpp"
#include "fedskip/rng.hpp"

namespace fedskip::fed {

namespace {

// Run fn(0..n-1) on up to `threads` workers; rethrows the first failure.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

Decision skip_decision(const twin::TwinForecast& forecast, const SkipThresholds& thresholds) {
    if (forecast.cold_start) return Decision::Communicate;
    if (forecast.predicted_magnitude < thresholds.tau_mag &&
        forecast.uncertainty < thresholds.tau_unc)
        return Decision::Skip;
    return Decision::Communicate;
}

int64_t payload_bytes(const nn::ParameterVector& params) {
    return 4 * static_cast<int64_t>(params.size());
}

nn::ParameterVector client_update(const nn::ParameterVector& global_params,
                                  const data::LabeledDataset& train,
                                  const data::ClientDataset& client, const nn::TrainConfig& cfg,
                                  int round) {
    if (client.indices.empty())
        throw ValidationError("client_update: client " + std::to_string(client.client_id) +
                              " has no data");
    nn::ParameterVector params = global_params;
    std::vector<int32_t> order = client.indices;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        Rng rng(mix_seed({cfg.rng_seed, static_cast<uint64_t>(client.client_id),
                          static_cast<uint64_t>(round), static_cast<uint64_t>(epoch),
                          0x636c69ULL}));
        rng.shuffle(order);
        for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const size_t len = std::min(static_cast<size_t>(cfg.batch_size), order.size() - pos);
            nn::Batch batch = nn::make_batch(train, {order.data() + pos, len});
            nn::LossGrad lg = nn::loss_and_grad(params, batch);
            params = nn::sgd_step(params, lg.grad, cfg.learning_rate);
        }
    }
    return params;
}

nn::ParameterVector aggregate(const nn::ParameterVector& theta_prev,
                              const std::vector<std::pair<int32_t, nn::ParameterVector>>& deltas,
                              const std::vector<std::pair<int32_t, int64_t>>& sizes) {
    if (deltas.empty()) return theta_prev;

    auto size_of = [&](int32_t id) -> int64_t {
        for (const auto& [cid, n] : sizes)
            if (cid == id) return n;
        throw ValidationError("aggregate: no dataset size for client " + std::to_string(id));
    };
    int64_t total = 0;
    for (const auto& [id, delta] : deltas) {
        if (!delta.same_layout(theta_prev))
            throw ShapeError("aggregate: delta layout mismatch for client " + std::to_string(id));
        const int64_t n = size_of(id);
        if (n <= 0)
            throw ValidationError("aggregate: non-positive size for client " + std::to_string(id));
        total += n;
    }

    nn::ParameterVector theta = theta_prev;
    for (const auto& [id, delta] : deltas) {
        const double w = static_cast<double>(size_of(id)) / static_cast<double>(total);
        kernels::axpy(w, delta.values().data(), theta.values().data(), theta.size());
    }
    return theta;
}

RoundLog run_round(ServerState& state, int round, const Strategy& strategy,
                   const data::LabeledDataset& train, const data::Partition& partition,
                   const data::LabeledDataset& test, std::span<const int32_t> eval_indices,
                   const nn::TrainConfig& cfg, int threads) {
    if (round < 1) throw ValidationError("run_round: round must be >= 1");
    const int n_clients = static_cast<int>(partition.clients.size());
    const bool uses_twins = strategy.kind == Strategy::Kind::FedSkipTwin;
    if (uses_twins && state.twins.size() != static_cast<size_t>(n_clients))
        throw ShapeError("run_round: one twin per client required");
    for (int i = 0; i < n_clients; ++i)
        if (partition.clients[i].client_id != i)
            throw ShapeError("run_round: client ids must equal their partition positions");

    RoundLog log;
    log.round_index = round;
    log.per_client.resize(n_clients);

    // decide first; the broadcast is withheld from skipped clients
    for (int i = 0; i < n_clients; ++i) {
        ClientRoundRecord& rec = log.per_client[i];
        rec.client_id = partition.clients[i].client_id;
        if (uses_twins) {
            const twin::TwinForecast fc =
                state.twins[i].predict(state.twins[i].config().mc_passes,
                                       static_cast<uint64_t>(round));
            rec.predicted_magnitude = fc.predicted_magnitude;
            rec.uncertainty = fc.uncertainty;
            rec.decision = skip_decision(fc, strategy.thresholds);
        } else {
            rec.decision = Decision::Communicate;
        }
        if (rec.decision == Decision::Communicate) log.participants.push_back(rec.client_id);
    }

    const int64_t payload = payload_bytes(state.theta);
    std::vector<std::pair<int32_t, nn::ParameterVector>> deltas(
        log.participants.size(), {0, nn::ParameterVector::zeros_like(state.theta)});
    parallel_for(static_cast<int>(log.participants.size()), threads, [&](int k) {
        const int32_t id = log.participants[k];
        nn::ParameterVector local =
            client_update(state.theta, train, partition.clients[id], cfg, round);
        kernels::axpy(-1.0, state.theta.values().data(), local.values().data(), local.size());
        deltas[k] = {id, std::move(local)};  // local now holds theta_i - theta_prev
    });

    std::vector<std::pair<int32_t, int64_t>> sizes;
    sizes.reserve(deltas.size());
    for (const auto& [id, delta] : deltas)
        sizes.emplace_back(id, static_cast<int64_t>(partition.clients[id].size()));

    const nn::ParameterVector theta_next = aggregate(state.theta, deltas, sizes);

    // participants are already in ascending id order, so twin retraining is
    // deterministic regardless of how updates were scheduled
    for (const auto& [id, delta] : deltas) {
        const double norm = nn::l2_norm(delta);
        ClientRoundRecord& rec = log.per_client[id];
        rec.actual_norm = norm;
        rec.bytes_down = payload;
        rec.bytes_up = payload;
        if (uses_twins) state.twins[id].observe_and_retrain(norm);
    }

    state.theta = theta_next;
    for (const auto& rec : log.per_client)
        state.cumulative_bytes += rec.bytes_up + rec.bytes_down;
    log.cumulative_bytes = state.cumulative_bytes;

    const nn::EvalResult eval = nn::evaluate(state.theta, test, eval_indices);
    log.global_accuracy = eval.accuracy;
    log.global_loss = eval.mean_loss;
    return log;
}

ExperimentResult run_experiment(const Strategy& strategy, const nn::ParameterVector& initial,
                                const data::LabeledDataset& train,
                                const data::Partition& partition,
                                const data::LabeledDataset& test,
                                std::span<const int32_t> eval_indices,
                                const nn::TrainConfig& cfg, const twin::TwinConfig& twin_cfg,
                                int rounds, int threads, ServerState* final_state) {
    if (rounds < 1) throw ValidationError("run_experiment: rounds must be >= 1");
    const int n_clients = static_cast<int>(partition.clients.size());

    ServerState state{initial, {}, 0};
    state.twins.reserve(n_clients);
    for (int i = 0; i < n_clients; ++i)
        state.twins.emplace_back(
            twin_cfg, mix_seed({cfg.rng_seed, static_cast<uint64_t>(i), 0x7477ULL}));

    ExperimentResult result;
    result.payload = payload_bytes(initial);
    result.logs.reserve(rounds);
    int64_t skips = 0;
    for (int t = 1; t <= rounds; ++t) {
        RoundLog log = run_round(state, t, strategy, train, partition, test, eval_indices, cfg,
                                 threads);
        int round_skips = 0;
        for (const auto& rec : log.per_client)
            if (rec.decision == Decision::Skip) ++round_skips;
        skips += round_skips;
        result.per_round_skip_rates.push_back(static_cast<double>(round_skips) / n_clients);
        result.logs.push_back(std::move(log));
    }

    result.final_accuracy = result.logs.back().global_accuracy;
    result.final_loss = result.logs.back().global_loss;
    result.total_bytes = state.cumulative_bytes;
    result.total_mb = static_cast<double>(result.total_bytes) / (1024.0 * 1024.0);
    result.mean_skip_rate =
        static_cast<double>(skips) / (static_cast<double>(n_clients) * rounds);
    if (final_state) *final_state = std::move(state);
    return result;
}

}  // namespace fedskip::fed
