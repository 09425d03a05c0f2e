#include "fedskip/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedskip/errors.hpp"
#include "fedskip/rng.hpp"
#include "json.hpp"

namespace fedskip::exp {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw ValidationError("cannot format number");
    return std::string(buf, p);
}

PreparedData prepare_data(const cfg::ExperimentConfig& c) {
    PreparedData d;
    switch (c.dataset) {
        case cfg::DatasetKind::Mnist: {
            auto [train, test] = data::load_mnist(
                c.data_paths.at("train_images"), c.data_paths.at("train_labels"),
                c.data_paths.at("test_images"), c.data_paths.at("test_labels"));
            d.train = std::move(train);
            d.test = std::move(test);
            break;
        }
        case cfg::DatasetKind::Ucihar: {
            auto [train, test] = data::load_ucihar(c.data_paths.at("root"));
            d.train = std::move(train);
            d.test = std::move(test);
            break;
        }
        case cfg::DatasetKind::Synthetic: {
            const auto& s = c.synthetic;
            d.train = data::make_synthetic(s.n, s.num_classes, s.dim,
                                           mix_seed({c.seed, 0x7472ULL}));
            const int64_t test_n = std::max<int64_t>(s.n / 5, s.num_classes);
            d.test = data::make_synthetic(test_n, s.num_classes, s.dim,
                                          mix_seed({c.seed, 0x7465ULL}));
            break;
        }
    }
    if (c.train_subsample && *c.train_subsample < d.train.size())
        d.train = data::subsample(d.train, *c.train_subsample, mix_seed({c.seed, 0x747353ULL}));
    d.partition = data::dirichlet_partition(d.train, c.n_clients, c.alpha, c.seed);
    if (c.eval_subsample && *c.eval_subsample < d.test.size())
        d.eval_indices = data::subsample_indices(d.test.size(), *c.eval_subsample,
                                                 mix_seed({c.seed, 0x657653ULL}));
    return d;
}

nn::ParameterVector initial_params(const cfg::ExperimentConfig& c,
                                   const data::LabeledDataset& train) {
    switch (c.dataset) {
        case cfg::DatasetKind::Mnist:
            return nn::build_model(nn::Arch::MnistCnn, c.seed);
        case cfg::DatasetKind::Ucihar:
            return nn::build_model(nn::Arch::HarMlp, c.seed);
        case cfg::DatasetKind::Synthetic: {
            const int dim = static_cast<int>(train.feature_count());
            return nn::build_network(
                {nn::LayerSpec::dense(dim, 32), nn::LayerSpec::relu(),
                 nn::LayerSpec::dense(32, train.num_classes), nn::LayerSpec::softmax()},
                nn::TensorShape{1, 1, dim}, c.seed);
        }
    }
    throw ValidationError("unknown dataset");
}

RunOutput run_single(const cfg::ExperimentConfig& c, int threads, const PreparedData* shared,
                     fed::ServerState* final_state) {
    const auto start = std::chrono::steady_clock::now();
    PreparedData local;
    if (!shared) {
        local = prepare_data(c);
        shared = &local;
    }
    const nn::ParameterVector initial = initial_params(c, shared->train);
    const nn::TrainConfig train_cfg{c.learning_rate, c.local_epochs, c.batch_size, c.seed};
    RunOutput out;
    out.result = fed::run_experiment(cfg::make_strategy(c), initial, shared->train,
                                     shared->partition, shared->test, shared->eval_indices,
                                     train_cfg, c.twin, c.rounds, threads, final_state);
    out.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!f) throw IoError("cannot write " + path.string());
    return f;
}

const char* decision_name(fed::Decision d) {
    return d == fed::Decision::Skip ? "skip" : "communicate";
}

std::string opt_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

void write_rounds_csv(const std::filesystem::path& path, const fed::ExperimentResult& r) {
    auto f = open_out(path);
    f << "t,client_id,decision,pred_mag,uncertainty,actual_norm,bytes_up,bytes_down,accuracy,"
         "loss\n";
    for (const auto& log : r.logs) {
        const std::string acc = format_double(log.global_accuracy);
        const std::string loss = format_double(log.global_loss);
        for (const auto& rec : log.per_client) {
            f << log.round_index << ',' << rec.client_id << ',' << decision_name(rec.decision)
              << ',' << opt_field(rec.predicted_magnitude) << ',' << opt_field(rec.uncertainty)
              << ',' << opt_field(rec.actual_norm) << ',' << rec.bytes_up << ',' << rec.bytes_down
              << ',' << acc << ',' << loss << '\n';
        }
    }
}

void write_curves_csv(const std::filesystem::path& path, const fed::ExperimentResult& r) {
    auto f = open_out(path);
    f << "t,accuracy,cumulative_mb,skip_rate\n";
    for (size_t i = 0; i < r.logs.size(); ++i) {
        const auto& log = r.logs[i];
        const double mb = static_cast<double>(log.cumulative_bytes) / (1024.0 * 1024.0);
        f << log.round_index << ',' << format_double(log.global_accuracy) << ','
          << format_double(mb) << ',' << format_double(r.per_round_skip_rates[i]) << '\n';
    }
}

json summary_json(const cfg::ExperimentConfig& c, const RunOutput& run) {
    json j;
    j["final_accuracy"] = run.result.final_accuracy;
    j["final_loss"] = run.result.final_loss;
    j["total_bytes"] = run.result.total_bytes;
    j["payload_bytes"] = run.result.payload;
    j["total_mb"] = run.result.total_mb;
    j["mean_skip_rate"] = run.result.mean_skip_rate;
    j["per_round_skip_rates"] = run.result.per_round_skip_rates;
    j["wall_time_seconds"] = run.wall_time_seconds;
    j["config"] = cfg::config_to_json(c);
    j["config_hash"] = cfg::config_hash(c);
    return j;
}

void write_checkpoint(const std::filesystem::path& path, const fed::ServerState& state) {
    json j;
    j["theta"] = state.theta.values();
    json twins = json::array();
    for (const auto& t : state.twins) {
        twins.push_back({{"wx", t.wx()},
                         {"wh", t.wh()},
                         {"b", t.bias()},
                         {"head_w", t.head_w()},
                         {"head_b", t.head_b()},
                         {"history", t.history()},
                         {"norm_scale", t.norm_scale()},
                         {"observe_count", t.observe_count()}});
    }
    j["twins"] = std::move(twins);
    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

}  // namespace

void write_outputs(const cfg::ExperimentConfig& c, const std::string& out_dir,
                   const RunOutput& run, const fed::ServerState* state) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_rounds_csv(dir / "rounds.csv", run.result);
    write_curves_csv(dir / "curves.csv", run.result);
    auto f = open_out(dir / "summary.json");
    f << summary_json(c, run).dump(2) << '\n';
    if (c.write_checkpoint && state) write_checkpoint(dir / "checkpoint.json", *state);
}

void run_and_write(const cfg::ExperimentConfig& c, int threads) {
    fed::ServerState state{nn::ParameterVector({}, {1, 1, 1}, {}), {}, 0};
    RunOutput run = run_single(c, threads, nullptr, c.write_checkpoint ? &state : nullptr);
    write_outputs(c, c.output_dir, run, c.write_checkpoint ? &state : nullptr);
    std::printf("%s: accuracy %.4f, %.3f MB, skip rate %.3f (%.1fs)\n",
                cfg::strategy_name(c.strategy), run.result.final_accuracy, run.result.total_mb,
                run.result.mean_skip_rate, run.wall_time_seconds);
}

void compare_strategies(const cfg::ExperimentConfig& base, int threads) {
    PreparedData shared = prepare_data(base);

    cfg::ExperimentConfig avg_cfg = base;
    avg_cfg.strategy = fed::Strategy::Kind::FedAvg;
    avg_cfg.output_dir = base.output_dir + "/fedavg";
    cfg::ExperimentConfig skip_cfg = base;
    skip_cfg.strategy = fed::Strategy::Kind::FedSkipTwin;
    skip_cfg.output_dir = base.output_dir + "/fedskiptwin";

    RunOutput avg = run_single(avg_cfg, threads, &shared);
    write_outputs(avg_cfg, avg_cfg.output_dir, avg);
    RunOutput skip = run_single(skip_cfg, threads, &shared);
    write_outputs(skip_cfg, skip_cfg.output_dir, skip);

    const std::string avg_hash = cfg::config_hash(avg_cfg);
    const std::string skip_hash = cfg::config_hash(skip_cfg);
    if (avg_hash != skip_hash)
        throw ValidationError("compare: paired configs hash differently");

    const double reduction =
        100.0 * (1.0 - skip.result.total_mb / avg.result.total_mb);

    json j;
    j["fedavg"] = {{"final_accuracy", avg.result.final_accuracy},
                   {"total_mb", avg.result.total_mb},
                   {"total_bytes", avg.result.total_bytes},
                   {"mean_skip_rate", avg.result.mean_skip_rate}};
    j["fedskiptwin"] = {{"final_accuracy", skip.result.final_accuracy},
                        {"total_mb", skip.result.total_mb},
                        {"total_bytes", skip.result.total_bytes},
                        {"mean_skip_rate", skip.result.mean_skip_rate}};
    j["reduction_percent"] = reduction;
    j["config_hash"] = avg_hash;
    std::filesystem::create_directories(base.output_dir);
    auto f = open_out(std::filesystem::path(base.output_dir) / "compare.json");
    f << j.dump(2) << '\n';

    std::printf("%-12s %-16s %-12s %s\n", "strategy", "final_accuracy", "total_mb",
                "mean_skip_rate");
    std::printf("%-12s %-16.4f %-12.4f %.3f\n", "fedavg", avg.result.final_accuracy,
                avg.result.total_mb, avg.result.mean_skip_rate);
    std::printf("%-12s %-16.4f %-12.4f %.3f\n", "fedskiptwin", skip.result.final_accuracy,
                skip.result.total_mb, skip.result.mean_skip_rate);
    std::printf("communication reduction: %.1f%%\n", reduction);
}

}  // namespace fedskip::exp
