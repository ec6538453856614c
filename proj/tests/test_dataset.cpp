#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "pole/dataset.hpp"

using namespace pole::ds;

namespace {
const std::string kRoot = POLE_SOURCE_DIR;
}

TEST_CASE("iris csv loads 150 rows, 4 features, 3 classes") {
    LabeledData iris = load_iris_csv(kRoot + "/data/iris.csv");
    CHECK(iris.size() == 150);
    CHECK(iris.dim() == 4);
    CHECK(iris.classes == 3);
    int counts[3] = {0, 0, 0};
    for (int y : iris.y) counts[y]++;
    CHECK(counts[0] == 50);
    CHECK(counts[1] == 50);
    CHECK(counts[2] == 50);
    for (const auto& row : iris.x)
        for (double v : row) {
            CHECK(v > 0.0);
            CHECK(v < 10.0);
        }
}

TEST_CASE("idx loader parses the bundled digit subset") {
    LabeledData train = load_idx(kRoot + "/data/mnist-subset/train-images-idx3-ubyte",
                                 kRoot + "/data/mnist-subset/train-labels-idx1-ubyte");
    CHECK(train.size() == 2000);
    CHECK(train.dim() == 784);
    CHECK(train.classes == 10);
    LabeledData test = load_idx(kRoot + "/data/mnist-subset/t10k-images-idx3-ubyte",
                                kRoot + "/data/mnist-subset/t10k-labels-idx1-ubyte");
    CHECK(test.size() == 500);
    int counts[10] = {0};
    for (int y : test.y) counts[y]++;
    for (int c = 0; c < 10; ++c) CHECK(counts[c] == 50);
    for (double v : train.x[0]) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("idx loader parses a hand-built golden file and rejects bad magic") {
    // two 2x2 images with known bytes
    std::string img = "/tmp/pole_test_images_idx";
    std::string lab = "/tmp/pole_test_labels_idx";
    {
        std::ofstream f(img, std::ios::binary);
        const unsigned char bytes[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                                       0, 255, 128, 64, 10, 20, 30, 40};
        f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    }
    {
        std::ofstream f(lab, std::ios::binary);
        const unsigned char bytes[] = {0, 0, 8, 1, 0, 0, 0, 2, 1, 0};
        f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    }
    LabeledData d = load_idx(img, lab);
    CHECK(d.size() == 2);
    CHECK(d.dim() == 4);
    CHECK(d.x[0][0] == 0.0);
    CHECK(d.x[0][1] == 1.0);
    CHECK(d.x[0][2] == doctest::Approx(128.0 / 255.0));
    CHECK(d.y[0] == 1);
    CHECK(d.y[1] == 0);

    {
        std::ofstream f(img, std::ios::binary);
        const unsigned char bytes[] = {0, 0, 9, 9, 0, 0, 0, 0};
        f.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    }
    CHECK_THROWS(load_idx(img, lab));
    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("stratified split preserves class shares and is seeded") {
    LabeledData iris = load_iris_csv(kRoot + "/data/iris.csv");
    auto [train, test] = stratified_split(iris, 0.9, 3);
    CHECK(train.size() == 135);
    CHECK(test.size() == 15);
    int counts[3] = {0, 0, 0};
    for (int y : test.y) counts[y]++;
    for (int c = 0; c < 3; ++c) CHECK(counts[c] == 5);

    auto [train2, test2] = stratified_split(iris, 0.9, 3);
    CHECK(train.x == train2.x);
    auto [train3, test3] = stratified_split(iris, 0.9, 4);
    CHECK(train.x != train3.x);
}

TEST_CASE("blobs are separable and deterministic") {
    LabeledData a = make_blobs(3, 4, 40, 0.25, 11);
    LabeledData b = make_blobs(3, 4, 40, 0.25, 11);
    CHECK(a.x == b.x);
    CHECK(a.size() == 120);
    CHECK(a.classes == 3);
}

TEST_CASE("standardizer centers and scales the training features") {
    LabeledData d = make_blobs(2, 3, 50, 0.5, 21);
    Standardizer s = Standardizer::fit(d.x);
    auto normed = s.apply_all(d.x);
    for (std::size_t j = 0; j < d.dim(); ++j) {
        double mean = 0.0;
        for (const auto& row : normed) mean += row[j];
        mean /= static_cast<double>(normed.size());
        CHECK(std::abs(mean) < 1e-9);
        double var = 0.0;
        for (const auto& row : normed) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(normed.size());
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}
