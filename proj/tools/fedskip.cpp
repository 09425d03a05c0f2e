#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "fedskip/config.hpp"
#include "fedskip/errors.hpp"
#include "fedskip/experiment.hpp"

namespace {

// Paths referenced by a non-synthetic config must exist before a run starts.
void check_data_paths(const fedskip::cfg::ExperimentConfig& c) {
    using fedskip::cfg::DatasetKind;
    if (c.dataset == DatasetKind::Synthetic) return;
    for (const auto& [key, path] : c.data_paths) {
        std::filesystem::path p(path);
        if (c.dataset == DatasetKind::Ucihar && key == "root") {
            if (!std::filesystem::is_directory(p))
                throw fedskip::ValidationError("config: data_paths." + key + " (" + path +
                                               ") is not a directory");
        } else if (!std::filesystem::is_regular_file(p)) {
            throw fedskip::ValidationError("config: data_paths." + key + " (" + path +
                                           ") does not exist");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated learning simulator with twin-forecast client skipping"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    std::string out_dir;
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "run one experiment and write its outputs");
    CLI::App* compare =
        app.add_subcommand("compare", "run both strategies under identical seeds");
    CLI::App* validate =
        app.add_subcommand("validate-config", "parse and check a config, then echo it");

    for (CLI::App* cmd : {run, compare, validate}) {
        cmd->add_option("--config", config_path, "JSON config path")->required();
        if (cmd != validate) {
            cmd->add_option("--seed", seed, "override the config seed");
            cmd->add_option("--out", out_dir, "override the output directory");
            cmd->add_option("--threads", threads, "worker threads for client updates")
                ->check(CLI::PositiveNumber);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    fedskip::cfg::ExperimentConfig config;
    try {
        config = fedskip::cfg::parse_config(config_path);
        if (sub != validate) {
            if (sub->count("--seed") > 0) config.seed = seed;
            if (sub->count("--out") > 0) config.output_dir = out_dir;
        }
        if (app.got_subcommand(validate)) {
            check_data_paths(config);
            std::printf("%s\n", fedskip::cfg::config_to_json(config).dump(2).c_str());
            return 0;
        }
        check_data_paths(config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    try {
        if (app.got_subcommand(run))
            fedskip::exp::run_and_write(config, threads);
        else
            fedskip::exp::compare_strategies(config, threads);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
