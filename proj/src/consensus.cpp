#include "pole/consensus.hpp"

#include <algorithm>
#include <cmath>

#include "pole/hash.hpp"

namespace pole::consensus {

double model_accuracy(const ledger::ModelSolution& model,
                      const std::vector<std::vector<double>>& raw_features,
                      const std::vector<int>& labels) {
    return nn::evaluate(model.params, model.norm.apply_all(raw_features), labels);
}

TrainingSession::TrainingSession(const ledger::Task& task, sml::SmlWeights weights,
                                 const std::vector<std::vector<double>>& raw_features,
                                 std::vector<int> labels, std::uint64_t seed)
    : task_id_(task.task_id),
      weights_(std::move(weights)),
      norm_(ds::Standardizer::fit(raw_features)),
      features_(norm_.apply_all(raw_features)),
      labels_(std::move(labels)),
      lr_(task.model_spec.lr),
      batch_size_(static_cast<std::size_t>(task.model_spec.batch_size)) {
    if (features_.empty() || features_.size() != labels_.size())
        throw std::invalid_argument("TrainingSession: bad training data");
    if (task.model_spec.layer_sizes.front() != static_cast<int>(weights_.queries()))
        throw std::invalid_argument("TrainingSession: model input does not match SML output");
    order_.resize(features_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    Rng rng(seed);
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    params_ = nn::init_model(task.model_spec, derive_seed(seed, "model-init"));
    best_params_ = params_;
    last_accuracy_ = nn::evaluate(params_, features_, labels_);
    best_accuracy_ = last_accuracy_;
}

double TrainingSession::step() {
    std::vector<std::vector<double>> xb;
    std::vector<int> yb;
    xb.reserve(batch_size_);
    yb.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) {
        std::size_t idx = order_[cursor_];
        xb.push_back(features_[idx]);
        yb.push_back(labels_[idx]);
        cursor_ = (cursor_ + 1) % order_.size();
    }
    nn::train_step(params_, xb, yb, lr_);
    ++steps_;
    last_accuracy_ = nn::evaluate(params_, features_, labels_);
    if (last_accuracy_ > best_accuracy_) {
        best_accuracy_ = last_accuracy_;
        best_params_ = params_;
    }
    return last_accuracy_;
}

ledger::ModelSolution TrainingSession::solution() const {
    ledger::ModelSolution m;
    m.spec_id = task_id_;
    m.sml = weights_;
    m.norm = norm_;
    m.params = best_params_;
    m.train_accuracy = best_accuracy_;
    return m;
}

bool verify_block(const ledger::Block& candidate, const VerifyContext& ctx, std::string* reason) {
    auto fail = [&](const std::string& why) {
        if (reason) *reason = why;
        return false;
    };
    const auto& h = candidate.header;
    if (h.task_id != ctx.task.task_id) return fail("solves a different task than this height mines");
    if (h.model.spec_id != h.task_id) return fail("model solves a different task");

    // binding check: embedded weights must equal the regeneration bit for bit
    sml::SmlWeights regen = sml::generate_sml(ctx.phs, ctx.data_dim,
                                         static_cast<std::size_t>(ctx.task.model_spec.layer_sizes.front()),
                                         ctx.task.sml_k);
    if (sml::serialize(h.model.sml) != sml::serialize(regen)) return fail("secure mapping does not derive from phs");

    double train_acc = model_accuracy(h.model, *ctx.train_features, *ctx.train_labels);
    if (train_acc < ctx.task.model_spec.required_accuracy)
        return fail("recomputed training accuracy " + std::to_string(train_acc) + " below required " +
                    std::to_string(ctx.task.model_spec.required_accuracy));

    if (!(h.timestamp < ctx.test_release_timestamp)) return fail("timestamped at or after the test release");
    if (reason) reason->clear();
    return true;
}

SelectionResult select_winner(const std::vector<ledger::Block>& candidates,
                              const std::vector<double>& test_accuracies, const VerifyContext& ctx) {
    if (candidates.empty()) throw NoValidBlock("no candidates received");
    if (test_accuracies.size() != candidates.size())
        throw std::invalid_argument("select_winner: one test accuracy per candidate required");

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Hash256> hashes(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) hashes[i] = ledger::hash_block(candidates[i].header);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (test_accuracies[a] != test_accuracies[b]) return test_accuracies[a] > test_accuracies[b];
        if (candidates[a].header.timestamp != candidates[b].header.timestamp)
            return candidates[a].header.timestamp < candidates[b].header.timestamp;  // receipt order
        return hashes[a] < hashes[b];
    });

    SelectionResult result;
    bool have_winner = false;
    for (std::size_t idx : order) {
        if (!verify_block(candidates[idx], ctx)) continue;
        if (!have_winner) {
            result.winner = idx;
            have_winner = true;
        } else {
            result.ommers.push_back(idx);
        }
    }
    if (!have_winner) throw NoValidBlock("all candidates failed verification");
    return result;
}

ledger::Block finalize_winner(ledger::Block candidate, double test_accuracy,
                              std::vector<ledger::OmmerReceipt> receipts, ledger::TestData test_data) {
    candidate.header.test_accuracy = test_accuracy;
    candidate.header.ommer_hashes.clear();
    for (const auto& rc : receipts) candidate.header.ommer_hashes.push_back(rc.hash);
    candidate.body.ommer_receipts = std::move(receipts);
    candidate.body.test_data = std::move(test_data);
    candidate.header.merkle_root = ledger::body_merkle_root(candidate.body);
    return candidate;
}

ledger::Block finalize_ommer(ledger::Block candidate, double test_accuracy) {
    candidate.header.test_accuracy = test_accuracy;
    return candidate;
}

// ---- proof-of-work baseline ----------------------------------------------

long double target_probability(const Hash256& target) {
    long double theta = 0.0L;
    long double scale = 1.0L;
    for (std::size_t i = 0; i < 32; ++i) {
        scale /= 256.0L;
        theta += static_cast<long double>(target[i]) * scale;
    }
    return theta;
}

Hash256 target_for_probability(long double theta) {
    Hash256 t{};
    if (theta >= 1.0L) {
        t.fill(0xff);
        return t;
    }
    if (theta <= 0.0L) return t;
    long double rest = theta;
    for (std::size_t i = 0; i < 32; ++i) {
        rest *= 256.0L;
        auto digit = static_cast<unsigned>(rest);
        if (digit > 255) digit = 255;
        t[i] = static_cast<std::uint8_t>(digit);
        rest -= digit;
    }
    return t;
}

PowParams pow_params_for(double expected_block_time, double trials_per_second, int n_miners) {
    PowParams p;
    p.expected_block_time = expected_block_time;
    p.trials_per_second = trials_per_second;
    long double theta = 1.0L / (static_cast<long double>(expected_block_time) * trials_per_second * n_miners);
    p.difficulty_target = target_for_probability(theta);
    return p;
}

PowBlock pow_mine(const PowParams& params, const Hash256& phs, Rng& rng) {
    long double theta = target_probability(params.difficulty_target);
    if (theta <= 0.0L) throw std::invalid_argument("pow_mine: zero target never succeeds");
    std::uint64_t trials;
    if (theta >= 1.0L) {
        trials = 1;
    } else {
        double u = rng.real();
        double n = std::floor(std::log1p(-u) / std::log1p(-static_cast<double>(theta)));
        trials = static_cast<std::uint64_t>(n) + 1;
    }
    PowBlock blk;
    blk.prev_hash = phs;
    blk.nonce = trials;
    blk.timestamp = static_cast<double>(trials) / params.trials_per_second;
    return blk;
}

std::vector<double> pow_chain_times(const PowParams& params, int n_miners, int blocks,
                                    std::uint64_t seed) {
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(n_miners));
    for (int m = 0; m < n_miners; ++m) rngs.emplace_back(derive_seed(seed, "pow-miner", static_cast<std::uint64_t>(m)));
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(blocks));
    Hash256 phs{};
    for (int b = 0; b < blocks; ++b) {
        double best = std::numeric_limits<double>::infinity();
        std::uint64_t best_nonce = 0;
        int best_miner = 0;
        for (int m = 0; m < n_miners; ++m) {
            PowBlock blk = pow_mine(params, phs, rngs[static_cast<std::size_t>(m)]);
            if (blk.timestamp < best) {
                best = blk.timestamp;
                best_nonce = blk.nonce;
                best_miner = m;
            }
        }
        times.push_back(best);
        ByteWriter w;
        w.put_hash(phs);
        w.put_uint(best_nonce);
        w.put_uint(static_cast<std::uint64_t>(best_miner));
        phs = sha256(w.bytes());
    }
    return times;
}

}  // namespace pole::consensus
