#pragma once

#include <string>
#include <vector>

#include "fedskip/config.hpp"
#include "fedskip/datasets.hpp"
#include "fedskip/fed.hpp"
#include "fedskip/nn.hpp"

namespace fedskip::exp {

struct PreparedData {
    data::LabeledDataset train;
    data::LabeledDataset test;
    data::Partition partition;
    std::vector<int32_t> eval_indices;  // empty means the full test set
};

PreparedData prepare_data(const cfg::ExperimentConfig& config);

// The model an experiment trains, chosen by dataset.
nn::ParameterVector initial_params(const cfg::ExperimentConfig& config,
                                   const data::LabeledDataset& train);

struct RunOutput {
    fed::ExperimentResult result;
    double wall_time_seconds = 0.0;
};

// One experiment end to end. `shared` reuses already prepared data (the
// paired comparison does this); `final_state` receives the end-of-run server
// state when checkpointing.
RunOutput run_single(const cfg::ExperimentConfig& config, int threads,
                     const PreparedData* shared = nullptr,
                     fed::ServerState* final_state = nullptr);

// rounds.csv, curves.csv, summary.json, and optionally checkpoint.json.
void write_outputs(const cfg::ExperimentConfig& config, const std::string& out_dir,
                   const RunOutput& run, const fed::ServerState* state = nullptr);

void run_and_write(const cfg::ExperimentConfig& config, int threads);

// Both strategies under identical seeds; per-strategy outputs land in
// output_dir/fedavg and output_dir/fedskiptwin next to compare.json.
void compare_strategies(const cfg::ExperimentConfig& config, int threads);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace fedskip::exp
