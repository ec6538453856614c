#include "pole/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pole/rng.hpp"

namespace pole::ds {

namespace {

int max_label(const std::vector<int>& y) {
    int mx = 0;
    for (int v : y) mx = std::max(mx, v);
    return mx;
}

std::uint32_t read_u32_be(std::ifstream& f, const std::string& what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("idx: truncated " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

LabeledData load_iris_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty dataset file: " + path);
    LabeledData data;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw std::runtime_error("malformed csv row in " + path);
        data.y.push_back(static_cast<int>(row.back()));
        row.pop_back();
        data.x.push_back(std::move(row));
    }
    if (data.x.empty()) throw std::runtime_error("no rows in " + path);
    data.classes = max_label(data.y) + 1;
    return data;
}

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("cannot open dataset file: " + images_path);
    if (read_u32_be(fi, "image magic") != 0x803) throw std::runtime_error("idx: bad image magic");
    std::uint32_t n = read_u32_be(fi, "image count");
    std::uint32_t rows = read_u32_be(fi, "rows");
    std::uint32_t cols = read_u32_be(fi, "cols");
    std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    LabeledData data;
    data.x.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw std::runtime_error("idx: truncated image data");
        std::vector<double> row(pixels);
        for (std::size_t j = 0; j < pixels; ++j) row[j] = buf[j] / 255.0;
        data.x.push_back(std::move(row));
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("cannot open dataset file: " + labels_path);
    if (read_u32_be(fl, "label magic") != 0x801) throw std::runtime_error("idx: bad label magic");
    std::uint32_t m = read_u32_be(fl, "label count");
    if (m != n) throw std::runtime_error("idx: image/label count mismatch");
    data.y.resize(m);
    for (std::uint32_t i = 0; i < m; ++i) {
        char c;
        if (!fl.get(c)) throw std::runtime_error("idx: truncated label data");
        data.y[i] = static_cast<unsigned char>(c);
    }
    data.classes = max_label(data.y) + 1;
    return data;
}

LabeledData make_blobs(int classes, int dim, int per_class, double spread, std::uint64_t seed) {
    Rng rng(seed);
    LabeledData data;
    data.classes = classes;
    std::vector<std::vector<double>> centers;
    for (int c = 0; c < classes; ++c) {
        std::vector<double> center(static_cast<std::size_t>(dim));
        for (auto& v : center) v = rng.real() * 4.0 - 2.0;
        centers.push_back(std::move(center));
    }
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> row(static_cast<std::size_t>(dim));
            for (int j = 0; j < dim; ++j) row[static_cast<std::size_t>(j)] = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] + rng.normal() * spread;
            data.x.push_back(std::move(row));
            data.y.push_back(c);
        }
    }
    return data;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledData& data) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.classes));
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.y[i])].push_back(i);
    return by_class;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

}  // namespace

std::pair<LabeledData, LabeledData> stratified_split(const LabeledData& data, double train_fraction,
                                                     std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::invalid_argument("stratified_split: fraction in (0,1) required");
    Rng rng(seed);
    LabeledData train, test;
    train.classes = test.classes = data.classes;
    for (auto& idx : indices_by_class(data)) {
        shuffle_indices(idx, rng);
        std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto& dst = i < n_train ? train : test;
            dst.x.push_back(data.x[idx[i]]);
            dst.y.push_back(data.y[idx[i]]);
        }
    }
    return {std::move(train), std::move(test)};
}

LabeledData stratified_subset(const LabeledData& data, std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    LabeledData out;
    out.classes = data.classes;
    for (auto& idx : indices_by_class(data)) {
        shuffle_indices(idx, rng);
        std::size_t take = std::min(per_class, idx.size());
        for (std::size_t i = 0; i < take; ++i) {
            out.x.push_back(data.x[idx[i]]);
            out.y.push_back(data.y[idx[i]]);
        }
    }
    return out;
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& xs) {
    if (xs.empty()) throw std::invalid_argument("Standardizer: empty data");
    std::size_t dim = xs.front().size();
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.inv_std.assign(dim, 1.0);
    for (const auto& row : xs)
        for (std::size_t j = 0; j < dim; ++j) s.mean[j] += row[j];
    for (auto& m : s.mean) m /= static_cast<double>(xs.size());
    std::vector<double> var(dim, 0.0);
    for (const auto& row : xs)
        for (std::size_t j = 0; j < dim; ++j) {
            double d = row[j] - s.mean[j];
            var[j] += d * d;
        }
    for (std::size_t j = 0; j < dim; ++j) {
        double sd = std::sqrt(var[j] / static_cast<double>(xs.size()));
        s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) * inv_std[j];
    return out;
}

std::vector<std::vector<double>> Standardizer::apply_all(const std::vector<std::vector<double>>& xs) const {
    std::vector<std::vector<double>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(apply(x));
    return out;
}

}  // namespace pole::ds
