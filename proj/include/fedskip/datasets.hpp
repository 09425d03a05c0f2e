#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedskip::data {

struct LabeledDataset {
    std::vector<double> inputs;        // n x feature_count, row-major
    std::vector<int32_t> labels;       // values in [0, num_classes)
    int32_t num_classes = 0;
    std::vector<int32_t> feature_shape;  // e.g. {561} or {1, 28, 28}

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    int64_t feature_count() const;
    std::span<const double> sample(int64_t i) const {
        const int64_t f = feature_count();
        return {inputs.data() + i * f, static_cast<size_t>(f)};
    }
};

// One client's slice of a parent dataset, by index.
struct ClientDataset {
    int32_t client_id = 0;
    std::vector<int32_t> indices;
    size_t size() const { return indices.size(); }
};

struct Partition {
    std::vector<ClientDataset> clients;
    double alpha = 0.0;
    uint64_t seed = 0;
};

// MNIST IDX files (big-endian). Pixels are scaled to [0,1].
std::pair<LabeledDataset, LabeledDataset> load_mnist(const std::string& train_images_path,
                                                     const std::string& train_labels_path,
                                                     const std::string& test_images_path,
                                                     const std::string& test_labels_path);

// Published UCI-HAR layout under dataset_root: train/X_train.txt, train/y_train.txt,
// test/X_test.txt, test/y_test.txt. Labels 1-6 are remapped to 0-5 and features are
// standardized with training-set statistics.
std::pair<LabeledDataset, LabeledDataset> load_ucihar(const std::string& dataset_root);

// Gaussian class-conditional clusters, separable by construction (noise radius
// is capped below half the minimum center distance).
LabeledDataset make_synthetic(int64_t n, int32_t num_classes, int32_t dim, uint64_t seed);

// Label-skew split: per class, client proportions drawn from Dirichlet(alpha * 1_N),
// rounded by largest remainder. Every index lands in exactly one client.
Partition dirichlet_partition(const LabeledDataset& train, int32_t n_clients, double alpha,
                              uint64_t seed);

// Deterministic subset of k samples (seeded shuffle, ascending index order).
LabeledDataset subsample(const LabeledDataset& full, int64_t k, uint64_t seed);
std::vector<int32_t> subsample_indices(int64_t n, int64_t k, uint64_t seed);

}  // namespace fedskip::data
