#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/dataset.hpp"
#include "pole/ledger.hpp"
#include "pole/rng.hpp"

namespace pole::consensus {

struct NoValidBlock : std::runtime_error {
    explicit NoValidBlock(const std::string& what) : std::runtime_error(what) {}
};

// Mining phases of one consensus node at one height.
enum class Phase { Idle, Training, AwaitTest, Verifying };

// Accuracy of a broadcast model on raw SML features: applies the model's own
// input normalization, then the network.
double model_accuracy(const ledger::ModelSolution& model,
                      const std::vector<std::vector<double>>& raw_features,
                      const std::vector<int>& labels);

// One miner's training run for one task at one height. Owns its parameters;
// steps are deterministic per seed. Tracks the best-so-far snapshot for the
// timeout broadcast.
class TrainingSession {
  public:
    TrainingSession(const ledger::Task& task, sml::SmlWeights weights,
                    const std::vector<std::vector<double>>& raw_features, std::vector<int> labels,
                    std::uint64_t seed);

    // One SGD minibatch step followed by a full-train accuracy pass; returns
    // the accuracy after the step.
    double step();

    double train_accuracy() const { return last_accuracy_; }
    double best_accuracy() const { return best_accuracy_; }
    std::uint64_t steps() const { return steps_; }

    // Best-so-far model, packaged for broadcast.
    ledger::ModelSolution solution() const;

  private:
    ledger::TaskId task_id_;
    sml::SmlWeights weights_;
    ds::Standardizer norm_;
    std::vector<std::vector<double>> features_;  // normalized
    std::vector<int> labels_;
    std::vector<std::size_t> order_;
    nn::Params params_;
    nn::Params best_params_;
    double lr_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
    std::uint64_t steps_ = 0;
    double last_accuracy_ = 0.0;
    double best_accuracy_ = -1.0;
};

// Everything a node needs to verify candidates at one height.
struct VerifyContext {
    Hash256 phs{};
    ledger::Task task;
    std::size_t data_dim = 0;
    const std::vector<std::vector<double>>* train_features = nullptr;  // decrypted under phs
    const std::vector<int>* train_labels = nullptr;
    double test_release_timestamp = std::numeric_limits<double>::infinity();
};

// Algorithm: regenerate the SML from phs and require bit-exact equality with
// the block's embedded weights, recompute training accuracy with the
// regenerated layer, and require the block to predate the test release.
// False covers all rejections; *reason says which check failed.
bool verify_block(const ledger::Block& candidate, const VerifyContext& ctx, std::string* reason = nullptr);

struct SelectionResult {
    std::size_t winner = 0;
    std::vector<std::size_t> ommers;  // verified losers, best first
};

// Sorts candidates by test accuracy (descending), then timestamp, then block
// hash; the winner is the first that verifies, remaining verified candidates
// become ommers. Throws NoValidBlock when nothing verifies.
SelectionResult select_winner(const std::vector<ledger::Block>& candidates,
                              const std::vector<double>& test_accuracies, const VerifyContext& ctx);

// Fills in what only selection can know: test accuracy, ommer references,
// released test data, and the final Merkle root.
ledger::Block finalize_winner(ledger::Block candidate, double test_accuracy,
                              std::vector<ledger::OmmerReceipt> receipts, ledger::TestData test_data);
ledger::Block finalize_ommer(ledger::Block candidate, double test_accuracy);

// ---- proof-of-work baseline --------------------------------------------

struct PowParams {
    Hash256 difficulty_target{};
    double expected_block_time = 300.0;
    double trials_per_second = 1000.0;
};

// target / 2^256 as the per-trial success probability.
long double target_probability(const Hash256& target);
Hash256 target_for_probability(long double theta);

// Target giving the network of n_miners the expected block time.
PowParams pow_params_for(double expected_block_time, double trials_per_second, int n_miners);

struct PowBlock {
    Hash256 prev_hash{};
    std::uint64_t nonce = 0;
    double timestamp = 0.0;
};

// Simulated hash trials at a fixed rate: the number of trials to success is
// geometric with p = target/2^256, so the block lands at trials/rate seconds.
PowBlock pow_mine(const PowParams& params, const Hash256& phs, Rng& rng);

// Inter-block times for a chain mined by n_miners competing miners.
std::vector<double> pow_chain_times(const PowParams& params, int n_miners, int blocks,
                                    std::uint64_t seed);

}  // namespace pole::consensus
