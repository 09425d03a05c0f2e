#include "fedskip/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedskip/errors.hpp"

namespace fedskip::cfg {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw ValidationError("config: " + field + " " + why);
}

void check_keys(const json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok)
            throw ValidationError("config: unknown key " +
                                  (scope.empty() ? key : scope + "." + key));
    }
}

int get_int(const json& obj, const char* key, int fallback, int min_value) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) bad_field(key, "must be an integer");
    const int64_t n = v.get<int64_t>();
    if (n < min_value) bad_field(key, "must be >= " + std::to_string(min_value));
    if (n > INT32_MAX) bad_field(key, "is out of range");
    return static_cast<int>(n);
}

double get_real(const json& obj, const char* key, double fallback, bool positive,
                bool allow_zero) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) bad_field(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) bad_field(key, "must be finite");
    if (positive && !(allow_zero ? x >= 0.0 : x > 0.0))
        bad_field(key, allow_zero ? "must be >= 0" : "must be > 0");
    return x;
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) bad_field(key, "must be a string");
    return v.get<std::string>();
}

void resolve_data_paths(ExperimentConfig& c) {
    const char* env = std::getenv("FEDSKIP_DATA_DIR");
    const std::string root = env ? env : "";
    if (c.dataset == DatasetKind::Mnist) {
        const std::pair<const char*, const char*> files[] = {
            {"train_images", "train-images-idx3-ubyte"},
            {"train_labels", "train-labels-idx1-ubyte"},
            {"test_images", "t10k-images-idx3-ubyte"},
            {"test_labels", "t10k-labels-idx1-ubyte"},
        };
        for (const auto& [key, name] : files) {
            if (c.data_paths.count(key)) continue;
            if (root.empty())
                bad_field(std::string("data_paths.") + key,
                          "is required for mnist (or set FEDSKIP_DATA_DIR)");
            c.data_paths[key] = root + "/mnist/" + name;
        }
    } else if (c.dataset == DatasetKind::Ucihar) {
        if (!c.data_paths.count("root")) {
            if (root.empty())
                bad_field("data_paths.root", "is required for ucihar (or set FEDSKIP_DATA_DIR)");
            c.data_paths["root"] = root + "/ucihar";
        }
    }
}

ExperimentConfig from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
    check_keys(j, "",
               {"dataset", "data_paths", "n_clients", "alpha", "rounds", "local_epochs",
                "batch_size", "learning_rate", "strategy", "tau_mag", "tau_unc", "twin", "seed",
                "output_dir", "eval_subsample", "train_subsample", "synthetic",
                "write_checkpoint"});

    ExperimentConfig c;

    const std::string ds = get_string(j, "dataset", "synthetic");
    if (ds == "mnist")
        c.dataset = DatasetKind::Mnist;
    else if (ds == "ucihar")
        c.dataset = DatasetKind::Ucihar;
    else if (ds == "synthetic")
        c.dataset = DatasetKind::Synthetic;
    else
        bad_field("dataset", "must be one of mnist, ucihar, synthetic");

    if (j.contains("data_paths")) {
        const json& p = j.at("data_paths");
        if (!p.is_object()) bad_field("data_paths", "must be an object of strings");
        if (c.dataset == DatasetKind::Mnist)
            check_keys(p, "data_paths",
                       {"train_images", "train_labels", "test_images", "test_labels"});
        else if (c.dataset == DatasetKind::Ucihar)
            check_keys(p, "data_paths", {"root"});
        else
            check_keys(p, "data_paths", {});
        for (const auto& [key, value] : p.items()) {
            if (!value.is_string()) bad_field("data_paths." + key, "must be a string");
            c.data_paths[key] = value.get<std::string>();
        }
    }

    c.n_clients = get_int(j, "n_clients", 10, 1);
    c.alpha = get_real(j, "alpha", 0.5, true, false);
    c.rounds = get_int(j, "rounds", 20, 1);
    c.local_epochs = get_int(j, "local_epochs", 3, 1);
    c.batch_size = get_int(j, "batch_size", 32, 1);
    c.learning_rate = get_real(j, "learning_rate", 0.01, true, false);

    const std::string st = get_string(j, "strategy", "fedskiptwin");
    if (st == "fedavg")
        c.strategy = fed::Strategy::Kind::FedAvg;
    else if (st == "fedskiptwin")
        c.strategy = fed::Strategy::Kind::FedSkipTwin;
    else
        bad_field("strategy", "must be fedavg or fedskiptwin");

    c.tau_mag = get_real(j, "tau_mag", 0.001, true, true);
    c.tau_unc = get_real(j, "tau_unc", 0.001, true, true);

    if (j.contains("twin")) {
        const json& t = j.at("twin");
        if (!t.is_object()) bad_field("twin", "must be an object");
        check_keys(t, "twin",
                   {"hidden_size", "window", "mc_passes", "dropout_rate", "retrain_epochs",
                    "twin_lr"});
        c.twin.hidden_size = get_int(t, "hidden_size", c.twin.hidden_size, 1);
        c.twin.window = get_int(t, "window", c.twin.window, 2);
        c.twin.mc_passes = get_int(t, "mc_passes", c.twin.mc_passes, 1);
        c.twin.dropout_rate = get_real(t, "dropout_rate", c.twin.dropout_rate, true, true);
        if (c.twin.dropout_rate >= 1.0) bad_field("twin.dropout_rate", "must be < 1");
        c.twin.retrain_epochs = get_int(t, "retrain_epochs", c.twin.retrain_epochs, 0);
        c.twin.learning_rate = get_real(t, "twin_lr", c.twin.learning_rate, true, false);
    }

    if (j.contains("seed")) {
        const json& v = j.at("seed");
        if (!v.is_number_integer()) bad_field("seed", "must be a non-negative integer");
        if (!v.is_number_unsigned() && v.get<int64_t>() < 0)
            bad_field("seed", "must be a non-negative integer");
        c.seed = v.get<uint64_t>();
    }
    c.output_dir = get_string(j, "output_dir", "out");

    if (j.contains("eval_subsample"))
        c.eval_subsample = get_int(j, "eval_subsample", 0, 1);
    if (j.contains("train_subsample"))
        c.train_subsample = get_int(j, "train_subsample", 0, 1);

    if (j.contains("synthetic")) {
        const json& s = j.at("synthetic");
        if (!s.is_object()) bad_field("synthetic", "must be an object");
        check_keys(s, "synthetic", {"n", "num_classes", "dim"});
        c.synthetic.n = get_int(s, "n", static_cast<int>(c.synthetic.n), 1);
        c.synthetic.num_classes = get_int(s, "num_classes", c.synthetic.num_classes, 1);
        c.synthetic.dim = get_int(s, "dim", c.synthetic.dim, 1);
    }

    if (j.contains("write_checkpoint")) {
        const json& v = j.at("write_checkpoint");
        if (!v.is_boolean()) bad_field("write_checkpoint", "must be a boolean");
        c.write_checkpoint = v.get<bool>();
    }

    resolve_data_paths(c);
    return c;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return from_json(j);
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

const char* dataset_name(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Mnist: return "mnist";
        case DatasetKind::Ucihar: return "ucihar";
        case DatasetKind::Synthetic: return "synthetic";
    }
    return "?";
}

const char* strategy_name(fed::Strategy::Kind kind) {
    return kind == fed::Strategy::Kind::FedAvg ? "fedavg" : "fedskiptwin";
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset"] = dataset_name(c.dataset);
    j["data_paths"] = json::object();
    for (const auto& [k, v] : c.data_paths) j["data_paths"][k] = v;
    j["n_clients"] = c.n_clients;
    j["alpha"] = c.alpha;
    j["rounds"] = c.rounds;
    j["local_epochs"] = c.local_epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["strategy"] = strategy_name(c.strategy);
    j["tau_mag"] = c.tau_mag;
    j["tau_unc"] = c.tau_unc;
    j["twin"] = {{"hidden_size", c.twin.hidden_size},
                 {"window", c.twin.window},
                 {"mc_passes", c.twin.mc_passes},
                 {"dropout_rate", c.twin.dropout_rate},
                 {"retrain_epochs", c.twin.retrain_epochs},
                 {"twin_lr", c.twin.learning_rate}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    if (c.eval_subsample) j["eval_subsample"] = *c.eval_subsample;
    if (c.train_subsample) j["train_subsample"] = *c.train_subsample;
    j["synthetic"] = {{"n", c.synthetic.n},
                      {"num_classes", c.synthetic.num_classes},
                      {"dim", c.synthetic.dim}};
    j["write_checkpoint"] = c.write_checkpoint;
    return j;
}

std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("strategy");
    j.erase("output_dir");
    const std::string dump = j.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fed::Strategy make_strategy(const ExperimentConfig& c) {
    return {c.strategy, {c.tau_mag, c.tau_unc}};
}

}  // namespace fedskip::cfg
