#include "fedskip/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedskip/errors.hpp"
#include "fedskip/rng.hpp"

namespace fedskip::data {

int64_t LabeledDataset::feature_count() const {
    int64_t f = 1;
    for (int32_t d : feature_shape) f *= d;
    return f;
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated IDX header");
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

struct IdxImages {
    std::vector<uint8_t> pixels;
    uint32_t count = 0, rows = 0, cols = 0;
};

IdxImages read_idx_images(const std::string& path) {
    auto in = open_binary(path);
    IdxImages r;
    uint32_t magic = read_be32(in, path);
    if (magic != 0x00000803)
        throw FormatError(path + ": bad IDX image magic");
    r.count = read_be32(in, path);
    r.rows = read_be32(in, path);
    r.cols = read_be32(in, path);
    size_t total = static_cast<size_t>(r.count) * r.rows * r.cols;
    r.pixels.resize(total);
    if (!in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(total)))
        throw FormatError(path + ": truncated IDX image data");
    return r;
}

std::vector<uint8_t> read_idx_labels(const std::string& path, uint32_t& count) {
    auto in = open_binary(path);
    uint32_t magic = read_be32(in, path);
    if (magic != 0x00000801)
        throw FormatError(path + ": bad IDX label magic");
    count = read_be32(in, path);
    std::vector<uint8_t> labels(count);
    if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count)))
        throw FormatError(path + ": truncated IDX label data");
    return labels;
}

LabeledDataset mnist_split(const std::string& images_path, const std::string& labels_path) {
    IdxImages img = read_idx_images(images_path);
    uint32_t label_count = 0;
    std::vector<uint8_t> labels = read_idx_labels(labels_path, label_count);
    if (label_count != img.count)
        throw FormatError(images_path + " and " + labels_path +
                          ": image/label counts differ (" + std::to_string(img.count) + " vs " +
                          std::to_string(label_count) + ")");
    LabeledDataset d;
    d.num_classes = 10;
    d.feature_shape = {1, static_cast<int32_t>(img.rows), static_cast<int32_t>(img.cols)};
    d.inputs.resize(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i) d.inputs[i] = img.pixels[i] / 255.0;
    d.labels.resize(label_count);
    for (uint32_t i = 0; i < label_count; ++i) {
        if (labels[i] > 9) throw FormatError(labels_path + ": label out of range 0-9");
        d.labels[i] = labels[i];
    }
    return d;
}

constexpr int kHarFeatures = 561;

std::vector<double> read_har_features(const std::string& path, int64_t& rows) {
    auto in = open_binary(path);
    std::vector<double> out;
    std::string line;
    rows = 0;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        int cols = 0;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p >= end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{})
                throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric token");
            out.push_back(v);
            ++cols;
            p = next;
        }
        if (cols != kHarFeatures)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(kHarFeatures) + " columns, got " +
                              std::to_string(cols));
        ++rows;
    }
    if (rows == 0) throw FormatError(path + ": no data rows");
    return out;
}

std::vector<int32_t> read_har_labels(const std::string& path) {
    auto in = open_binary(path);
    std::vector<int32_t> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        int v = 0;
        const char* p = line.data();
        auto [next, ec] = std::from_chars(p, p + line.size(), v);
        (void)next;
        if (ec != std::errc{})
            throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric label");
        if (v < 1 || v > 6)
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": label must be 1-6, got " + std::to_string(v));
        out.push_back(v - 1);
    }
    if (out.empty()) throw FormatError(path + ": no labels");
    return out;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> load_mnist(const std::string& train_images_path,
                                                     const std::string& train_labels_path,
                                                     const std::string& test_images_path,
                                                     const std::string& test_labels_path) {
    LabeledDataset train = mnist_split(train_images_path, train_labels_path);
    LabeledDataset test = mnist_split(test_images_path, test_labels_path);
    if (train.feature_shape != test.feature_shape)
        throw FormatError("train/test image dimensions differ");
    return {std::move(train), std::move(test)};
}

std::pair<LabeledDataset, LabeledDataset> load_ucihar(const std::string& dataset_root) {
    int64_t train_n = 0, test_n = 0;
    std::vector<double> xtrain = read_har_features(dataset_root + "/train/X_train.txt", train_n);
    std::vector<int32_t> ytrain = read_har_labels(dataset_root + "/train/y_train.txt");
    std::vector<double> xtest = read_har_features(dataset_root + "/test/X_test.txt", test_n);
    std::vector<int32_t> ytest = read_har_labels(dataset_root + "/test/y_test.txt");
    if (static_cast<int64_t>(ytrain.size()) != train_n)
        throw FormatError(dataset_root + "/train: feature/label row counts differ");
    if (static_cast<int64_t>(ytest.size()) != test_n)
        throw FormatError(dataset_root + "/test: feature/label row counts differ");

    // standardize both splits with training statistics
    std::vector<double> mean(kHarFeatures, 0.0), sd(kHarFeatures, 0.0);
    for (int64_t r = 0; r < train_n; ++r)
        for (int f = 0; f < kHarFeatures; ++f) mean[f] += xtrain[r * kHarFeatures + f];
    for (auto& m : mean) m /= static_cast<double>(train_n);
    for (int64_t r = 0; r < train_n; ++r)
        for (int f = 0; f < kHarFeatures; ++f) {
            double d = xtrain[r * kHarFeatures + f] - mean[f];
            sd[f] += d * d;
        }
    for (auto& s : sd) {
        s = std::sqrt(s / static_cast<double>(train_n));
        if (s < 1e-12) s = 1.0;  // constant feature maps to 0
    }
    auto standardize = [&](std::vector<double>& x, int64_t n) {
        for (int64_t r = 0; r < n; ++r)
            for (int f = 0; f < kHarFeatures; ++f) {
                double& v = x[r * kHarFeatures + f];
                v = (v - mean[f]) / sd[f];
                if (!std::isfinite(v)) throw FormatError("non-finite feature after standardization");
            }
    };
    standardize(xtrain, train_n);
    standardize(xtest, test_n);

    LabeledDataset train, test;
    train.num_classes = test.num_classes = 6;
    train.feature_shape = test.feature_shape = {kHarFeatures};
    train.inputs = std::move(xtrain);
    train.labels = std::move(ytrain);
    test.inputs = std::move(xtest);
    test.labels = std::move(ytest);
    return {std::move(train), std::move(test)};
}

LabeledDataset make_synthetic(int64_t n, int32_t num_classes, int32_t dim, uint64_t seed) {
    if (n < 1 || num_classes < 1 || dim < 1)
        throw ValidationError("make_synthetic: n, num_classes, dim must be >= 1");

    // Class centers at least 4 apart; noise is capped at radius 1.5, so clusters
    // stay disjoint balls that a linear softmax model separates with margin.
    const double kSigma = 0.6;
    const double kNoiseCap = 1.5;
    std::vector<double> centers(static_cast<size_t>(num_classes) * dim, 0.0);
    if (num_classes > 1) {
        if (dim == 1) {
            for (int32_t c = 0; c < num_classes; ++c) centers[c] = 4.0 * c;
        } else {
            const double radius = 2.0 / std::sin(M_PI / num_classes);
            for (int32_t c = 0; c < num_classes; ++c) {
                const double ang = 2.0 * M_PI * c / num_classes;
                centers[static_cast<size_t>(c) * dim + 0] = radius * std::cos(ang);
                centers[static_cast<size_t>(c) * dim + 1] = radius * std::sin(ang);
            }
        }
    }

    Rng rng(mix_seed({seed, 0x73796eULL}));
    LabeledDataset d;
    d.num_classes = num_classes;
    d.feature_shape = {dim};
    d.inputs.resize(static_cast<size_t>(n) * dim);
    d.labels.resize(n);
    std::vector<double> noise(dim);
    for (int64_t i = 0; i < n; ++i) {
        const int32_t label = static_cast<int32_t>(i % num_classes);
        d.labels[i] = label;
        double norm_sq = 0.0;
        for (int32_t f = 0; f < dim; ++f) {
            noise[f] = kSigma * rng.normal();
            norm_sq += noise[f] * noise[f];
        }
        const double norm = std::sqrt(norm_sq);
        const double scale = norm > kNoiseCap ? kNoiseCap / norm : 1.0;
        for (int32_t f = 0; f < dim; ++f)
            d.inputs[static_cast<size_t>(i) * dim + f] =
                centers[static_cast<size_t>(label) * dim + f] + scale * noise[f];
    }
    return d;
}

namespace {

// Split `count` items into shares following `props` with largest-remainder rounding.
std::vector<int64_t> largest_remainder(const std::vector<double>& props, int64_t count) {
    const size_t n = props.size();
    std::vector<int64_t> out(n, 0);
    std::vector<double> frac(n, 0.0);
    int64_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        double quota = props[i] * static_cast<double>(count);
        out[i] = static_cast<int64_t>(std::floor(quota));
        frac[i] = quota - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return frac[a] > frac[b]; });
    for (int64_t r = 0; assigned < count; ++r) {
        out[order[r % n]] += 1;
        ++assigned;
    }
    // floating error can overshoot; trim from the smallest remainders
    for (size_t r = n; assigned > count; --r) {
        size_t i = order[(r - 1) % n];
        if (out[i] > 0) {
            out[i] -= 1;
            --assigned;
        }
    }
    return out;
}

std::vector<ClientDataset> draw_partition(const LabeledDataset& train, int32_t n_clients,
                                          double alpha, Rng& rng) {
    std::vector<std::vector<int32_t>> by_class(train.num_classes);
    for (int64_t i = 0; i < train.size(); ++i)
        by_class[train.labels[i]].push_back(static_cast<int32_t>(i));

    std::vector<ClientDataset> clients(n_clients);
    for (int32_t i = 0; i < n_clients; ++i) clients[i].client_id = i;

    for (int32_t c = 0; c < train.num_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        std::vector<double> props = rng.dirichlet(alpha, static_cast<size_t>(n_clients));
        rng.shuffle(idx);
        std::vector<int64_t> counts = largest_remainder(props, static_cast<int64_t>(idx.size()));
        size_t pos = 0;
        for (int32_t i = 0; i < n_clients; ++i) {
            clients[i].indices.insert(clients[i].indices.end(), idx.begin() + pos,
                                      idx.begin() + pos + counts[i]);
            pos += counts[i];
        }
    }
    return clients;
}

}  // namespace

Partition dirichlet_partition(const LabeledDataset& train, int32_t n_clients, double alpha,
                              uint64_t seed) {
    if (n_clients < 1) throw ValidationError("dirichlet_partition: n_clients must be >= 1");
    if (!(alpha > 0.0)) throw ValidationError("dirichlet_partition: alpha must be > 0");
    if (train.size() < 1) throw ValidationError("dirichlet_partition: empty training set");

    Rng rng(mix_seed({seed, 0x70617274ULL}));
    std::vector<ClientDataset> clients;
    for (int attempt = 0; attempt < 100; ++attempt) {
        clients = draw_partition(train, n_clients, alpha, rng);
        bool any_empty = std::any_of(clients.begin(), clients.end(),
                                     [](const ClientDataset& c) { return c.indices.empty(); });
        if (!any_empty) break;
        clients.clear();
    }
    if (clients.empty()) {
        // retry budget exhausted; rebalance by moving single samples off the largest client
        clients = draw_partition(train, n_clients, alpha, rng);
        for (auto& c : clients) {
            if (!c.indices.empty()) continue;
            auto largest = std::max_element(
                clients.begin(), clients.end(),
                [](const ClientDataset& a, const ClientDataset& b) { return a.size() < b.size(); });
            if (largest->size() < 2)
                throw ValidationError("dirichlet_partition: fewer samples than clients");
            c.indices.push_back(largest->indices.back());
            largest->indices.pop_back();
        }
    }

    // exactness: every index in exactly one client
    std::vector<uint8_t> seen(train.size(), 0);
    int64_t total = 0;
    for (const auto& c : clients) {
        for (int32_t i : c.indices) {
            if (i < 0 || i >= train.size() || seen[i])
                throw ShapeError("dirichlet_partition: index assigned twice or out of range");
            seen[i] = 1;
        }
        total += static_cast<int64_t>(c.size());
    }
    if (total != train.size())
        throw ShapeError("dirichlet_partition: not all indices assigned");

    Partition p;
    p.clients = std::move(clients);
    p.alpha = alpha;
    p.seed = seed;
    return p;
}

std::vector<int32_t> subsample_indices(int64_t n, int64_t k, uint64_t seed) {
    if (k < 1) throw ValidationError("subsample: k must be >= 1");
    std::vector<int32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    Rng rng(mix_seed({seed, 0x737562ULL}));
    rng.shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

LabeledDataset subsample(const LabeledDataset& full, int64_t k, uint64_t seed) {
    std::vector<int32_t> idx = subsample_indices(full.size(), k, seed);
    LabeledDataset out;
    out.num_classes = full.num_classes;
    out.feature_shape = full.feature_shape;
    const int64_t f = full.feature_count();
    out.inputs.resize(idx.size() * f);
    out.labels.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        auto s = full.sample(idx[i]);
        std::copy(s.begin(), s.end(), out.inputs.begin() + static_cast<int64_t>(i) * f);
        out.labels[i] = full.labels[idx[i]];
    }
    return out;
}

}  // namespace fedskip::data
