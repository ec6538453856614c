#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/bytes.hpp"
#include "pole/dataset.hpp"
#include "pole/fe.hpp"
#include "pole/nn.hpp"
#include "pole/sml.hpp"

namespace pole::ledger {

using AccountId = std::string;
using TaskId = std::string;

inline const AccountId kReservoir = "reservoir";
inline const AccountId kMint = "__mint__";

struct InsufficientBalance : std::runtime_error {
    explicit InsufficientBalance(const std::string& what) : std::runtime_error(what) {}
};

struct ChainError : std::runtime_error {
    explicit ChainError(const std::string& what) : std::runtime_error(what) {}
};

struct Transaction {
    AccountId from;
    AccountId to;
    double amount = 0.0;
};

// Where a task's encrypted training data lives on the chain.
struct DataPointer {
    std::uint64_t block_id = 0;
    std::uint32_t batch_index = 0;
};

struct Task {
    TaskId task_id;
    AccountId poster;
    double reward = 0.0;
    nn::ModelSpec model_spec;  // layer_sizes.front() is the SML output I
    fe::Discretization disc;
    int sml_k = 3;
    std::vector<DataPointer> data_pointers;

    // Task priority: average reward in a unit of time; ties by task_id.
    double value() const { return model_spec.time_limit > 0 ? reward / model_spec.time_limit : reward; }
};

// Returns true when a has priority over b.
bool task_less(const Task& a, const Task& b);

struct CiphertextBatch {
    TaskId task_id;
    fe::GroupParams params;
    std::vector<fe::Ciphertext> cts;
    std::vector<std::uint8_t> labels;
};

struct TestData {
    TaskId task_id;
    std::vector<std::vector<double>> x;
    std::vector<std::uint8_t> y;
    double timestamp = 0.0;
    AccountId signer;  // timestamp signature modeled as a trusted field
};

struct ModelSolution {
    TaskId spec_id;
    sml::SmlWeights sml;
    ds::Standardizer norm;  // fixed input normalization, fitted by the miner
    nn::Params params;
    double train_accuracy = 0.0;
};

// Carried in the referencing winner's body so Eq.-style ommer payouts need
// no out-of-band chain state.
struct OmmerReceipt {
    Hash256 hash{};
    std::uint64_t height = 0;
    AccountId producer;
    std::uint32_t onum = 1;  // number of ommer blocks at that height
};

struct BlockHeader {
    std::uint64_t block_id = 0;
    AccountId winner_id;
    TaskId task_id;
    Hash256 prev_hash{};
    ModelSolution model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<Hash256> ommer_hashes;
    Hash256 merkle_root{};
    double timestamp = 0.0;
};

struct BlockBody {
    std::vector<Task> pending_tasks;       // full list after this block
    std::vector<TaskId> new_task_ids;      // tasks first posted here (listed or bootstrap)
    std::vector<TaskId> failed_task_ids;   // dropped after an unresolvable height; refunded
    // Full record of a task posted and solved by this very block, which
    // happens when the pending list ran dry and mining fell back to the
    // post buffer. Solved tasks leave pending_tasks, so the record must
    // travel here for escrow accounting.
    std::optional<Task> bootstrap_task;
    std::vector<CiphertextBatch> new_ciphertext_data;
    std::vector<Transaction> transactions;
    std::vector<OmmerReceipt> ommer_receipts;
    std::optional<TestData> test_data;
};

struct Block {
    BlockHeader header;
    BlockBody body;
};

// Pairwise SHA-256 reduction; an odd level duplicates its last node.
Hash256 merkle_root(const std::vector<Bytes>& leaves);

std::vector<Bytes> body_leaves(const BlockBody& body);
Hash256 body_merkle_root(const BlockBody& body);

Hash256 hash_block(const BlockHeader& header);

// Rw / ((Hw - Ho) * Onum).
double ommer_reward(double rw, std::uint64_t hw, std::uint64_t ho, std::uint32_t onum);

// Winner bonus for referencing one ommer.
double referral_bonus(double rw);

// Reward escrowed in the reservoir for one pending task.
struct Escrow {
    double reward = 0.0;
    AccountId poster;
};

struct AccountState {
    std::map<AccountId, double> balances;
    std::map<TaskId, Escrow> pending_rewards;
    std::uint64_t height = 0;

    double balance(const AccountId& id) const {
        auto it = balances.find(id);
        return it == balances.end() ? 0.0 : it->second;
    }
    double reservoir() const { return balance(kReservoir); }
    double pending_total() const {
        double t = 0.0;
        for (auto& [_, v] : pending_rewards) t += v.reward;
        return t;
    }
};

// Applies rewards, task postings/refunds and body transactions. Throws on
// replay (non-consecutive height), unknown solved task, or any transfer that
// would drive a balance negative. The genesis block seeds balances through
// mint transactions.
AccountState apply_block(const AccountState& state, const Block& block, double block_reward);

// Serialization (canonical, feeds hashing and the chain file).
void write_task(ByteWriter& w, const Task& t);
Task parse_task(ByteReader& r);
void write_model_solution(ByteWriter& w, const ModelSolution& m);
ModelSolution parse_model_solution(ByteReader& r);
Bytes serialize(const BlockHeader& h);
BlockHeader parse_header(ByteReader& r);
Bytes serialize(const Block& b);
Block parse_block(ByteReader& r);
Block deserialize_block(std::span<const std::uint8_t> bytes);

// Structured text dump of one block.
std::string to_text(const Block& b);

// Main chain with balance tracking and an index of referenced ommers.
class Chain {
  public:
    Chain(Block genesis, double block_reward);

    const Block& head() const { return blocks_.back(); }
    const Block& at(std::uint64_t height) const { return blocks_.at(height); }
    std::uint64_t height() const { return blocks_.size() - 1; }
    std::size_t size() const { return blocks_.size(); }
    Hash256 head_hash() const { return hash_block(head().header); }
    const AccountState& state() const { return state_; }
    double block_reward() const { return block_reward_; }

    // Structural validation (links, Merkle root, task conservation, ommer
    // receipts) plus account application. Model verification is the
    // consensus layer's job and happens before a block gets here.
    void append(Block block);

    // Re-checks every stored link and Merkle root; returns the first broken
    // height or 0 when intact.
    std::uint64_t find_broken_link() const;

    const CiphertextBatch& resolve(const DataPointer& ptr) const;

    void save(const std::string& path) const;
    static Chain load(const std::string& path, double block_reward);

  private:
    void validate_structure(const Block& block) const;

    std::vector<Block> blocks_;
    AccountState state_;
    std::set<std::string> referenced_ommers_;
    double block_reward_;
};

// Genesis carries the configured initial tasks, their ciphertext batches and
// mint transactions seeding account balances.
Block make_genesis(std::vector<Task> initial_tasks, std::vector<CiphertextBatch> batches,
                   const std::map<AccountId, double>& initial_balances);

}  // namespace pole::ledger
