#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "fedskip/fed.hpp"
#include "fedskip/twin.hpp"
#include "json.hpp"

namespace fedskip::cfg {

enum class DatasetKind { Mnist, Ucihar, Synthetic };

struct SyntheticSpec {
    int64_t n = 2000;
    int32_t num_classes = 4;
    int32_t dim = 16;
};

struct ExperimentConfig {
    DatasetKind dataset = DatasetKind::Synthetic;
    std::map<std::string, std::string> data_paths;  // mnist: four IDX files; ucihar: root
    int n_clients = 10;
    double alpha = 0.5;
    int rounds = 20;
    int local_epochs = 3;
    int batch_size = 32;
    double learning_rate = 0.01;
    fed::Strategy::Kind strategy = fed::Strategy::Kind::FedSkipTwin;
    double tau_mag = 0.001;
    double tau_unc = 0.001;
    twin::TwinConfig twin;
    uint64_t seed = 42;
    std::string output_dir = "out";
    std::optional<int64_t> eval_subsample;
    std::optional<int64_t> train_subsample;
    SyntheticSpec synthetic;
    bool write_checkpoint = false;
};

// Strict single-object JSON: unknown keys are rejected, missing keys take the
// documented defaults, and invariant violations name the offending field.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

const char* dataset_name(DatasetKind kind);
const char* strategy_name(fed::Strategy::Kind kind);

// Full resolved config as JSON, suitable for echoing into summaries.
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical dump, excluding strategy and output_dir so the
// two runs of a paired comparison hash identically.
std::string config_hash(const ExperimentConfig& config);

fed::Strategy make_strategy(const ExperimentConfig& config);

}  // namespace fedskip::cfg
