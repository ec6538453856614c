#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/bytes.hpp"

namespace pole::nn {

struct NumericalDivergence : std::runtime_error {
    explicit NumericalDivergence(const std::string& what) : std::runtime_error(what) {}
};

// MLP with ReLU hidden units, softmax cross-entropy loss and accuracy as the
// metric. layer_sizes runs input, hidden..., class count.
struct ModelSpec {
    std::vector<int> layer_sizes;
    double required_accuracy = 0.8;
    double time_limit = 0.0;  // simulated seconds
    double lr = 0.1;
    int batch_size = 16;
};

bool valid(const ModelSpec& spec);

// Per-layer weight matrices (row-major, out x in) and bias vectors.
struct Params {
    std::vector<int> sizes;
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;

    std::size_t layers() const { return w.size(); }
};

using Gradients = Params;

// Glorot-uniform weights, zero biases, deterministic per seed.
Params init_model(const ModelSpec& spec, std::uint64_t seed);
Params zero_model(const ModelSpec& spec);

// Class probabilities for one sample.
std::vector<double> forward_probs(const Params& params, std::span<const double> x);

// argmax prediction; equal logits break toward the lowest class index.
int predict(const Params& params, std::span<const double> x);

double batch_loss(const Params& params, const std::vector<std::vector<double>>& xs,
                  const std::vector<int>& ys);

// Mean loss and mean gradients over the batch, accumulated sample by sample
// in a fixed order.
std::pair<double, Gradients> loss_and_gradients(const Params& params,
                                                const std::vector<std::vector<double>>& xs,
                                                const std::vector<int>& ys);

// One SGD step on the batch; returns the pre-update batch loss. Throws
// NumericalDivergence on a non-finite loss before touching the parameters.
double train_step(Params& params, const std::vector<std::vector<double>>& xs,
                  const std::vector<int>& ys, double lr);

// Fraction of argmax-correct predictions.
double evaluate(const Params& params, const std::vector<std::vector<double>>& xs,
                const std::vector<int>& ys);

void write_model_spec(ByteWriter& w, const ModelSpec& spec);
ModelSpec parse_model_spec(ByteReader& r);

// Little-endian IEEE-754 doubles per layer in declared order.
void write_params(ByteWriter& w, const Params& params);
Params parse_params(ByteReader& r);

}  // namespace pole::nn
