#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pole/consensus.hpp"
#include "pole/dataset.hpp"
#include "pole/ledger.hpp"

namespace pole::sim {

// No events remain (or the clock ran away) before the target height: a
// protocol or configuration bug.
struct DeadlockError : std::runtime_error {
    explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetConfig {
    std::string kind;  // "iris", "idx", "blobs"
    std::string csv_path;
    std::string images_path;
    std::string labels_path;
    int classes = 3;
    int dim = 4;
    int per_class = 40;
    double spread = 0.3;
    std::uint64_t seed = 1;
    double train_fraction = 0.9;
};

// One logical task, reposted `count` times with fresh ids and keys.
struct TaskTemplate {
    std::string name;
    std::string dataset;
    double reward = 5.0;
    double required_accuracy = 0.8;
    double time_limit = 8.0;
    std::vector<int> hidden = {16};
    double lr = 0.05;
    int batch = 16;
    int queries = 32;  // SML output I
    int k = 3;
    fe::Discretization disc{10.0, 0, 255};
    int count = 1;
};

struct DataNodeConfig {
    std::string id;
    std::vector<TaskTemplate> tasks;
};

struct SimConfig {
    std::uint64_t seed = 42;
    int miners = 3;
    std::uint64_t target_blocks = 10;
    double latency = 0.05;         // bus delay for every message
    double release_delay = 0.05;   // data-node pause before the test release
    double step_seconds = 0.01;    // simulated duration of one training step
    int wait_count = 1;            // candidate solutions awaited before release
    double block_reward = 2.0;
    double initial_balance = 1000.0;
    int lambda = 32;
    double max_sim_time = 1e7;
    bool wallclock = false;  // take step durations from a wall clock instead
    std::map<std::string, DatasetConfig> datasets;
    std::vector<DataNodeConfig> data_nodes;
};

// JSON file loader; missing keys keep their defaults.
SimConfig load_config(const std::string& path);
SimConfig parse_config(const std::string& json_text);

// A small complete default: three miners, two data nodes posting blob tasks.
SimConfig default_config();

struct HeightStats {
    std::uint64_t height = 0;
    ledger::TaskId task_id;
    int attempt = 0;
    ledger::AccountId winner;
    double block_timestamp = 0.0;
    double resolve_time = 0.0;
    std::size_t candidates = 0;
    std::size_t ommers = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double reservoir = 0.0;
    double pending_rewards = 0.0;
};

struct VerificationRecord {
    std::uint64_t height = 0;
    ledger::AccountId node;
    Hash256 candidate_hash{};
    bool verdict = false;
    bool timestamp_late = false;
    std::string reason;
};

struct SimResult {
    std::vector<ledger::Block> blocks;  // node 0's chain
    std::vector<HeightStats> heights;
    std::vector<VerificationRecord> verdicts;  // every node's view of every candidate
    std::string event_log;
    std::vector<Hash256> final_heads;  // per node
    bool heads_consistent = true;
    ledger::AccountState final_state;

    // inter-block deltas of consecutive block timestamps
    std::vector<double> block_times() const;
};

SimResult run_simulation(const SimConfig& config);

// ---- data-node state (unit-testable protocol surface) -------------------

struct TaskRecord {
    ledger::Task task;
    fe::GroupParams params;
    fe::MasterKeys keys;  // master secret, held off-chain
    ds::LabeledData train;
    ds::LabeledData test;  // held off-chain until release
    bool released = false;
    int candidates_seen = 0;
};

struct DataNodeState {
    ledger::AccountId id;
    int wait_count = 1;
    std::map<ledger::TaskId, TaskRecord> tasks;

    // Derives the query vectors for phs and returns eta_i = <s, z_i> for
    // each; identical responses for identical phs. Throws on unknown tasks.
    std::vector<fe::FunctionalKey> serve_functional_keys(const ledger::TaskId& task_id,
                                                         const Hash256& phs);

    // Test release record, timestamped now. Throws on double release or
    // unknown tasks.
    ledger::TestData release_test_set(const ledger::TaskId& task_id, double now);
};

// Discretizes and encrypts a dataset under the record's keys (one ciphertext
// per sample, fresh randomness per sample from the seed).
ledger::CiphertextBatch encrypt_batch(const TaskRecord& record, std::uint64_t seed);

}  // namespace pole::sim
