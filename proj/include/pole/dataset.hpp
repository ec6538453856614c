#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pole::ds {

struct LabeledData {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    int classes = 0;

    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
};

// CSV with a header row; feature columns then an integer class column.
LabeledData load_iris_csv(const std::string& path);

// Standard IDX pair (magic 0x803 images / 0x801 labels, big-endian dims).
// Pixels are scaled to [0, 1].
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

// Seeded Gaussian clusters, one per class, for fast protocol-level tests.
LabeledData make_blobs(int classes, int dim, int per_class, double spread, std::uint64_t seed);

// Seeded stratified split preserving per-class proportions.
std::pair<LabeledData, LabeledData> stratified_split(const LabeledData& data, double train_fraction,
                                                     std::uint64_t seed);

LabeledData stratified_subset(const LabeledData& data, std::size_t per_class, std::uint64_t seed);

// Per-feature affine normalization fitted on training data and applied to
// both splits; constant features pass through unscaled.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static Standardizer fit(const std::vector<std::vector<double>>& xs);
    std::vector<double> apply(const std::vector<double>& x) const;
    std::vector<std::vector<double>> apply_all(const std::vector<std::vector<double>>& xs) const;
};

}  // namespace pole::ds
