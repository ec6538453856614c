#include "pole/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <queue>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "pole/hash.hpp"

namespace pole::sim {

// ---- data-node protocol surface ------------------------------------------

std::vector<fe::FunctionalKey> DataNodeState::serve_functional_keys(const ledger::TaskId& task_id,
                                                                    const Hash256& phs) {
    auto it = tasks.find(task_id);
    if (it == tasks.end()) throw std::invalid_argument("serve_functional_keys: unknown task " + task_id);
    const TaskRecord& rec = it->second;
    sml::SmlWeights weights =
        sml::generate_sml(phs, rec.train.dim(),
                          static_cast<std::size_t>(rec.task.model_spec.layer_sizes.front()), rec.task.sml_k);
    std::vector<fe::FunctionalKey> fkeys;
    fkeys.reserve(weights.queries());
    for (const auto& z : weights.z) fkeys.push_back(fe::derive_functional_key(rec.params, rec.keys, z));
    return fkeys;
}

ledger::TestData DataNodeState::release_test_set(const ledger::TaskId& task_id, double now) {
    auto it = tasks.find(task_id);
    if (it == tasks.end()) throw std::invalid_argument("release_test_set: unknown task " + task_id);
    TaskRecord& rec = it->second;
    if (rec.released) throw std::logic_error("release_test_set: test set for " + task_id + " already released");
    rec.released = true;
    ledger::TestData test;
    test.task_id = task_id;
    test.x = rec.test.x;
    test.y.reserve(rec.test.y.size());
    for (int y : rec.test.y) test.y.push_back(static_cast<std::uint8_t>(y));
    test.timestamp = now;
    test.signer = id;
    return test;
}

ledger::CiphertextBatch encrypt_batch(const TaskRecord& record, std::uint64_t seed) {
    ledger::CiphertextBatch batch;
    batch.task_id = record.task.task_id;
    batch.params = record.params;
    batch.cts.reserve(record.train.size());
    for (std::size_t i = 0; i < record.train.size(); ++i) {
        auto xt = fe::discretize(record.train.x[i], record.task.disc);
        batch.cts.push_back(fe::encrypt(record.keys, record.params, xt, derive_seed(seed, "sample-r", i)));
    }
    batch.labels.reserve(record.train.y.size());
    for (int y : record.train.y) batch.labels.push_back(static_cast<std::uint8_t>(y));
    return batch;
}

// ---- config ----------------------------------------------------------------

namespace {

using nlohmann::json;

fe::Discretization disc_from_json(const json& j, fe::Discretization base) {
    if (j.contains("scale")) base.scale = j["scale"].get<double>();
    if (j.contains("offset")) base.offset = j["offset"].get<std::uint32_t>();
    if (j.contains("xmax")) base.xmax = j["xmax"].get<std::uint32_t>();
    return base;
}

}  // namespace

SimConfig parse_config(const std::string& json_text) {
    json j = json::parse(json_text);
    SimConfig cfg;
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("miners")) cfg.miners = j["miners"].get<int>();
    if (j.contains("target_blocks")) cfg.target_blocks = j["target_blocks"].get<std::uint64_t>();
    if (j.contains("latency")) cfg.latency = j["latency"].get<double>();
    if (j.contains("release_delay")) cfg.release_delay = j["release_delay"].get<double>();
    if (j.contains("step_seconds")) cfg.step_seconds = j["step_seconds"].get<double>();
    if (j.contains("wait_count")) cfg.wait_count = j["wait_count"].get<int>();
    if (j.contains("block_reward")) cfg.block_reward = j["block_reward"].get<double>();
    if (j.contains("initial_balance")) cfg.initial_balance = j["initial_balance"].get<double>();
    if (j.contains("lambda")) cfg.lambda = j["lambda"].get<int>();
    if (j.contains("max_sim_time")) cfg.max_sim_time = j["max_sim_time"].get<double>();
    if (j.contains("wallclock")) cfg.wallclock = j["wallclock"].get<bool>();
    if (j.contains("datasets")) {
        for (auto& [name, dj] : j["datasets"].items()) {
            DatasetConfig d;
            d.kind = dj.value("kind", "blobs");
            d.csv_path = dj.value("csv_path", "");
            d.images_path = dj.value("images_path", "");
            d.labels_path = dj.value("labels_path", "");
            d.classes = dj.value("classes", 3);
            d.dim = dj.value("dim", 4);
            d.per_class = dj.value("per_class", 40);
            d.spread = dj.value("spread", 0.3);
            d.seed = dj.value("seed", std::uint64_t{1});
            d.train_fraction = dj.value("train_fraction", 0.9);
            cfg.datasets[name] = d;
        }
    }
    if (j.contains("data_nodes")) {
        for (auto& dn : j["data_nodes"]) {
            DataNodeConfig d;
            d.id = dn.value("id", "dn" + std::to_string(cfg.data_nodes.size()));
            for (auto& tj : dn["tasks"]) {
                TaskTemplate t;
                t.name = tj.value("name", "task");
                t.dataset = tj.value("dataset", "");
                t.reward = tj.value("reward", 5.0);
                t.required_accuracy = tj.value("required_accuracy", 0.8);
                t.time_limit = tj.value("time_limit", 8.0);
                if (tj.contains("hidden")) t.hidden = tj["hidden"].get<std::vector<int>>();
                t.lr = tj.value("lr", 0.05);
                t.batch = tj.value("batch", 16);
                t.queries = tj.value("queries", 32);
                t.k = tj.value("k", 3);
                t.disc = disc_from_json(tj, t.disc);
                t.count = tj.value("count", 1);
                d.tasks.push_back(std::move(t));
            }
            cfg.data_nodes.push_back(std::move(d));
        }
    }
    return cfg;
}

SimConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

SimConfig default_config() {
    SimConfig cfg;
    DatasetConfig blobs;
    blobs.kind = "blobs";
    blobs.classes = 3;
    blobs.dim = 4;
    blobs.per_class = 40;
    blobs.spread = 0.3;
    blobs.seed = 5;
    blobs.train_fraction = 0.8;
    cfg.datasets["blobs3"] = blobs;
    for (int d = 0; d < 2; ++d) {
        DataNodeConfig dn;
        dn.id = "dn" + std::to_string(d);
        TaskTemplate t;
        t.name = "cls";
        t.dataset = "blobs3";
        t.reward = 5.0;
        t.required_accuracy = 0.9;
        t.time_limit = 6.0;
        t.hidden = {16};
        t.lr = 0.1;
        t.batch = 16;
        t.queries = 16;
        t.k = 3;
        t.disc = fe::Discretization{10.0, 64, 255};
        t.count = 10;
        dn.tasks.push_back(t);
        cfg.data_nodes.push_back(std::move(dn));
    }
    return cfg;
}

// ---- messages ---------------------------------------------------------------

namespace {

struct MsgTaskPost {
    ledger::Task task;
    ledger::CiphertextBatch batch;
};
struct MsgCandidate {
    ledger::Block block;
};
struct MsgTestRelease {
    ledger::TestData test;
};
struct MsgKeyRequest {
    ledger::TaskId task_id;
    Hash256 phs{};
    ledger::AccountId requester;
};
struct MsgKeyResponse {
    ledger::TaskId task_id;
    Hash256 phs{};
    std::vector<fe::FunctionalKey> fkeys;
};
struct TickTrainStep {
    std::uint64_t session = 0;
};
struct TickTimeout {
    std::uint64_t session = 0;
};
struct TickForceRelease {
    ledger::TaskId task_id;
};
struct TickPost {
    std::size_t template_index = 0;
    int instance = 0;
};

using Payload = std::variant<MsgTaskPost, MsgCandidate, MsgTestRelease, MsgKeyRequest, MsgKeyResponse,
                             TickTrainStep, TickTimeout, TickForceRelease, TickPost>;

bool is_network_message(const Payload& p) {
    return std::holds_alternative<MsgTaskPost>(p) || std::holds_alternative<MsgCandidate>(p) ||
           std::holds_alternative<MsgTestRelease>(p) || std::holds_alternative<MsgKeyRequest>(p) ||
           std::holds_alternative<MsgKeyResponse>(p);
}

const char* payload_type(const Payload& p) {
    if (std::holds_alternative<MsgTaskPost>(p)) return "TaskPost";
    if (std::holds_alternative<MsgCandidate>(p)) return "CandidateBlock";
    if (std::holds_alternative<MsgTestRelease>(p)) return "TestRelease";
    if (std::holds_alternative<MsgKeyRequest>(p)) return "KeyRequest";
    if (std::holds_alternative<MsgKeyResponse>(p)) return "KeyResponse";
    return "Tick";
}

std::uint64_t first8(const Hash256& h) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[static_cast<std::size_t>(i)];
    return v;
}

std::uint64_t payload_digest(const Payload& p) {
    ByteWriter w;
    if (const auto* tp = std::get_if<MsgTaskPost>(&p)) {
        ledger::write_task(w, tp->task);
        w.put_str(tp->batch.task_id);
        w.put_u32(static_cast<std::uint32_t>(tp->batch.cts.size()));
        if (!tp->batch.cts.empty()) fe::write_ciphertext(w, tp->batch.cts.front());
    } else if (const auto* c = std::get_if<MsgCandidate>(&p)) {
        return first8(ledger::hash_block(c->block.header));
    } else if (const auto* tr = std::get_if<MsgTestRelease>(&p)) {
        w.put_str(tr->test.task_id);
        w.put_double(tr->test.timestamp);
        w.put_bytes(tr->test.y);
    } else if (const auto* kq = std::get_if<MsgKeyRequest>(&p)) {
        w.put_str(kq->task_id);
        w.put_hash(kq->phs);
        w.put_str(kq->requester);
    } else if (const auto* kr = std::get_if<MsgKeyResponse>(&p)) {
        w.put_str(kr->task_id);
        w.put_hash(kr->phs);
        for (const auto& fk : kr->fkeys) w.put_uint(fk.eta);
    }
    return first8(sha256(w.bytes()));
}

// unreferenced ommer bookkeeping, kept identically by every node
struct OmmerRegistryEntry {
    Hash256 hash{};
    std::uint64_t height = 0;
    ledger::AccountId producer;
    double test_accuracy = 0.0;
    std::uint32_t onum = 1;
};

struct PostRecord {
    ledger::Task task;
    ledger::CiphertextBatch batch;
};

class Simulation;

// Shared replica logic: chain tracking, per-height candidate buffering and
// the deterministic resolution every node performs on a test release.
class Node {
  public:
    Node(Simulation* sim, int index, ledger::AccountId id, ledger::Block genesis, double block_reward)
        : sim_(sim), index_(index), id_(std::move(id)), chain_(std::move(genesis), block_reward) {}
    virtual ~Node() = default;

    const ledger::AccountId& id() const { return id_; }
    int index() const { return index_; }
    const ledger::Chain& chain() const { return chain_; }

    void handle(double now, int sender, const Payload& p);
    void begin(double now) { start_height(now); }

  protected:
    virtual void on_height_started(double now) = 0;
    virtual void on_idle(double /*now*/) {}
    virtual void on_candidate_buffered(double now, const ledger::Block& blk) = 0;
    virtual void on_keys(double /*now*/) {}
    virtual void on_block_appended(double now, const ledger::Block& blk) = 0;
    virtual void on_tick(double now, const Payload& p) = 0;
    virtual void on_key_request(double /*now*/, const MsgKeyRequest& /*m*/) {}

    void start_height(double now);
    void resolve(double now);

    Simulation* sim_;
    int index_;
    ledger::AccountId id_;
    ledger::Chain chain_;

    std::vector<PostRecord> post_buffer_;
    std::vector<ledger::TaskId> failed_buffer_;
    int attempt_ = 0;

    // current height context
    std::optional<ledger::Task> current_task_;
    bool bootstrap_ = false;
    std::size_t bootstrap_post_ = 0;  // index into post_buffer_
    Hash256 phs_{};
    std::vector<ledger::Block> candidates_;
    std::vector<std::string> candidate_keys_;
    std::optional<ledger::TestData> release_;
    std::vector<fe::FunctionalKey> fkeys_;
    bool have_fkeys_ = false;
    std::vector<OmmerRegistryEntry> ommer_registry_;

    const ledger::CiphertextBatch& current_batch() const;
    ledger::Block build_candidate(double now, ledger::ModelSolution model) const;
};

struct EventRecord {
    double time = 0.0;
    int recipient = 0;
    std::uint64_t seq = 0;
    int sender = 0;
    Payload payload;
};

struct EventOrder {
    bool operator()(const EventRecord& a, const EventRecord& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.recipient != b.recipient) return a.recipient > b.recipient;
        return a.seq > b.seq;
    }
};

class Simulation {
  public:
    explicit Simulation(const SimConfig& cfg);

    SimResult run();

    void broadcast(double now, int sender, Payload payload);
    void schedule_self(double when, int node, Payload payload);

    const SimConfig& config() const { return cfg_; }
    double now() const { return now_; }

    // decrypted training features under (task, phs); memoized because every
    // node computes the same pure function
    const std::vector<std::vector<double>>& features_for(const ledger::Task& task, const Hash256& phs,
                                                         const ledger::CiphertextBatch& batch,
                                                         const std::vector<fe::FunctionalKey>& fkeys);
    const std::vector<int>& labels_for(const ledger::CiphertextBatch& batch);
    // test accuracy of a candidate's model (its own embedded SML) on the
    // released test set; memoized per candidate hash
    double test_accuracy_for(const ledger::Block& candidate, const ledger::Task& task,
                             const ledger::TestData& test);

    void note_append(int node, const ledger::Block& blk);
    void note_stats(HeightStats stats) { stats_.push_back(std::move(stats)); }
    void note_verdict(VerificationRecord rec) { verdicts_.push_back(std::move(rec)); }

    const ds::LabeledData& dataset(const std::string& name);
    std::pair<ds::LabeledData, ds::LabeledData> split_for(int dn_index, std::size_t tmpl_index,
                                                          const TaskTemplate& tmpl);

  private:
    void log_delivery(const EventRecord& ev);

    SimConfig cfg_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
    std::priority_queue<EventRecord, std::vector<EventRecord>, EventOrder> queue_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::ostringstream log_;
    std::vector<HeightStats> stats_;
    std::vector<VerificationRecord> verdicts_;
    std::map<std::uint64_t, std::vector<Hash256>> heads_per_height_;
    std::map<std::string, std::vector<std::vector<double>>> feature_memo_;
    std::map<std::string, std::vector<int>> label_memo_;
    std::map<std::string, double> test_acc_memo_;
    std::map<std::string, ds::LabeledData> dataset_memo_;

    friend SimResult run_simulation(const SimConfig&);
};

// ---- node shared logic ----------------------------------------------------

const ledger::CiphertextBatch& Node::current_batch() const {
    if (bootstrap_) return post_buffer_[bootstrap_post_].batch;
    const auto& dps = current_task_->data_pointers;
    if (dps.empty()) throw std::logic_error("task without data pointers");
    return chain_.resolve(dps.front());
}

void Node::start_height(double now) {
    candidates_.clear();
    candidate_keys_.clear();
    release_.reset();
    fkeys_.clear();
    have_fkeys_ = false;
    bootstrap_ = false;
    current_task_.reset();
    phs_ = chain_.head_hash();

    // Algorithm: pop the most valuable task from the previous block's list;
    // fall back to fresh posts when the on-chain list ran dry.
    const ledger::Task* best = nullptr;
    for (const auto& t : chain_.head().body.pending_tasks) {
        if (std::find(failed_buffer_.begin(), failed_buffer_.end(), t.task_id) != failed_buffer_.end()) continue;
        if (best == nullptr || ledger::task_less(t, *best)) best = &t;
    }
    if (best != nullptr) {
        current_task_ = *best;
    } else {
        std::size_t pick = post_buffer_.size();
        for (std::size_t i = 0; i < post_buffer_.size(); ++i) {
            if (pick == post_buffer_.size() || ledger::task_less(post_buffer_[i].task, post_buffer_[pick].task))
                pick = i;
        }
        if (pick < post_buffer_.size()) {
            bootstrap_ = true;
            bootstrap_post_ = pick;
            current_task_ = post_buffer_[pick].task;
        }
    }
    if (current_task_) {
        on_height_started(now);
    } else {
        on_idle(now);
    }
}

void Node::handle(double now, int sender, const Payload& p) {
    if (const auto* tp = std::get_if<MsgTaskPost>(&p)) {
        for (const auto& rec : post_buffer_)
            if (rec.task.task_id == tp->task.task_id) return;
        post_buffer_.push_back(PostRecord{tp->task, tp->batch});
        if (!current_task_) start_height(now);
        return;
    }
    if (const auto* c = std::get_if<MsgCandidate>(&p)) {
        const ledger::Block& blk = c->block;
        if (!current_task_) return;
        if (blk.header.block_id != chain_.height() + 1 || blk.header.prev_hash != phs_) return;  // stale
        std::string key = to_hex(ledger::hash_block(blk.header));
        if (std::find(candidate_keys_.begin(), candidate_keys_.end(), key) != candidate_keys_.end()) return;
        candidate_keys_.push_back(key);
        candidates_.push_back(blk);
        on_candidate_buffered(now, blk);
        return;
    }
    if (const auto* kr = std::get_if<MsgKeyResponse>(&p)) {
        if (current_task_ && kr->task_id == current_task_->task_id && kr->phs == phs_ && !have_fkeys_) {
            fkeys_ = kr->fkeys;
            have_fkeys_ = true;
            on_keys(now);
        }
        return;
    }
    if (const auto* kq = std::get_if<MsgKeyRequest>(&p)) {
        on_key_request(now, *kq);
        return;
    }
    if (const auto* tr = std::get_if<MsgTestRelease>(&p)) {
        if (!current_task_ || tr->test.task_id != current_task_->task_id || release_) return;
        release_ = tr->test;
        resolve(now);
        return;
    }
    (void)sender;
    on_tick(now, p);
}

void Node::resolve(double now) {
    const ledger::Task task = *current_task_;
    const ledger::CiphertextBatch& batch = current_batch();
    if (!have_fkeys_) throw std::logic_error("resolve without functional keys");

    consensus::VerifyContext ctx;
    ctx.phs = phs_;
    ctx.task = task;
    ctx.data_dim = batch.cts.empty() ? 0 : batch.cts.front().dim();
    ctx.train_features = &sim_->features_for(task, phs_, batch, fkeys_);
    ctx.train_labels = &sim_->labels_for(batch);
    ctx.test_release_timestamp = release_->timestamp;

    std::vector<double> test_accs;
    test_accs.reserve(candidates_.size());
    for (const auto& cand : candidates_) test_accs.push_back(sim_->test_accuracy_for(cand, task, *release_));

    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        VerificationRecord rec;
        rec.height = chain_.height() + 1;
        rec.node = id_;
        rec.candidate_hash = ledger::hash_block(candidates_[i].header);
        std::string reason;
        rec.verdict = consensus::verify_block(candidates_[i], ctx, &reason);
        rec.timestamp_late = candidates_[i].header.timestamp >= release_->timestamp;
        rec.reason = reason;
        sim_->note_verdict(std::move(rec));
    }

    consensus::SelectionResult sel;
    try {
        sel = consensus::select_winner(candidates_, test_accs, ctx);
    } catch (const consensus::NoValidBlock&) {
        failed_buffer_.push_back(task.task_id);
        ++attempt_;
        start_height(now);
        return;
    }

    // receipts for prior heights' best unreferenced ommers, oldest first
    std::vector<ledger::OmmerReceipt> receipts;
    {
        std::map<std::uint64_t, const OmmerRegistryEntry*> best;
        for (const auto& e : ommer_registry_) {
            auto it = best.find(e.height);
            if (it == best.end() || e.test_accuracy > it->second->test_accuracy ||
                (e.test_accuracy == it->second->test_accuracy && e.hash < it->second->hash))
                best[e.height] = &e;
        }
        for (const auto& [height, entry] : best)
            receipts.push_back(ledger::OmmerReceipt{entry->hash, height, entry->producer, entry->onum});
    }

    ledger::Block final_block = consensus::finalize_winner(candidates_[sel.winner], test_accs[sel.winner],
                                                           receipts, *release_);
    // register this height's finalized ommers for future referencing
    std::vector<OmmerRegistryEntry> fresh;
    for (std::size_t idx : sel.ommers) {
        ledger::Block ommer = consensus::finalize_ommer(candidates_[idx], test_accs[idx]);
        OmmerRegistryEntry e;
        e.hash = ledger::hash_block(ommer.header);
        e.height = final_block.header.block_id;
        e.producer = ommer.header.winner_id;
        e.test_accuracy = test_accs[idx];
        e.onum = static_cast<std::uint32_t>(sel.ommers.size());
        fresh.push_back(std::move(e));
    }
    for (const auto& rc : receipts) {
        ommer_registry_.erase(std::remove_if(ommer_registry_.begin(), ommer_registry_.end(),
                                             [&](const OmmerRegistryEntry& e) { return e.height == rc.height; }),
                              ommer_registry_.end());
    }
    ommer_registry_.insert(ommer_registry_.end(), fresh.begin(), fresh.end());

    chain_.append(final_block);
    sim_->note_append(index_, final_block);

    // drop posts committed by the winner and the recorded failures
    post_buffer_.erase(std::remove_if(post_buffer_.begin(), post_buffer_.end(),
                                      [&](const PostRecord& rec) {
                                          const auto& ids = final_block.body.new_task_ids;
                                          return std::find(ids.begin(), ids.end(), rec.task.task_id) != ids.end();
                                      }),
                       post_buffer_.end());
    for (const auto& id : final_block.body.failed_task_ids)
        failed_buffer_.erase(std::remove(failed_buffer_.begin(), failed_buffer_.end(), id), failed_buffer_.end());
    attempt_ = 0;

    if (index_ == 0) {
        HeightStats stats;
        stats.height = final_block.header.block_id;
        stats.task_id = final_block.header.task_id;
        stats.attempt = attempt_;
        stats.winner = final_block.header.winner_id;
        stats.block_timestamp = final_block.header.timestamp;
        stats.resolve_time = now;
        stats.candidates = candidates_.size();
        stats.ommers = sel.ommers.size();
        stats.train_accuracy = final_block.header.train_accuracy;
        stats.test_accuracy = final_block.header.test_accuracy;
        stats.reservoir = chain_.state().reservoir();
        stats.pending_rewards = chain_.state().pending_total();
        sim_->note_stats(std::move(stats));
    }

    on_block_appended(now, final_block);
    start_height(now);
}

ledger::Block Node::build_candidate(double now, ledger::ModelSolution model) const {
    ledger::Block blk;
    blk.header.block_id = chain_.height() + 1;
    blk.header.winner_id = id_;
    blk.header.task_id = current_task_->task_id;
    blk.header.prev_hash = phs_;
    blk.header.train_accuracy = model.train_accuracy;
    blk.header.test_accuracy = 0.0;
    blk.header.timestamp = now;
    blk.header.model = std::move(model);

    // next pending list: parent minus solved/failed, plus buffered posts
    for (const auto& t : chain_.head().body.pending_tasks) {
        if (t.task_id == current_task_->task_id) continue;
        if (std::find(failed_buffer_.begin(), failed_buffer_.end(), t.task_id) != failed_buffer_.end()) continue;
        blk.body.pending_tasks.push_back(t);
    }
    blk.body.failed_task_ids = failed_buffer_;
    for (const auto& rec : post_buffer_) {
        ledger::Task committed = rec.task;
        committed.data_pointers = {ledger::DataPointer{
            blk.header.block_id, static_cast<std::uint32_t>(blk.body.new_ciphertext_data.size())}};
        blk.body.new_ciphertext_data.push_back(rec.batch);
        blk.body.new_task_ids.push_back(committed.task_id);
        if (bootstrap_ && committed.task_id == current_task_->task_id)
            blk.body.bootstrap_task = committed;
        else
            blk.body.pending_tasks.push_back(committed);
    }
    blk.header.merkle_root = ledger::body_merkle_root(blk.body);
    return blk;
}

// ---- miner ------------------------------------------------------------------

class MinerNode : public Node {
  public:
    using Node::Node;

  protected:
    void on_height_started(double now) override {
        phase_ = consensus::Phase::Training;
        session_.reset();
        ++session_id_;
        MsgKeyRequest req;
        req.task_id = current_task_->task_id;
        req.phs = phs_;
        req.requester = id_;
        sim_->broadcast(now, index_, req);
    }

    void on_idle(double /*now*/) override { phase_ = consensus::Phase::Idle; }

    void on_keys(double now) override {
        if (phase_ != consensus::Phase::Training || session_) return;
        const ledger::CiphertextBatch& batch = current_batch();
        std::size_t dim = batch.cts.empty() ? 0 : batch.cts.front().dim();
        sml::SmlWeights weights = sml::generate_sml(
            phs_, dim, static_cast<std::size_t>(current_task_->model_spec.layer_sizes.front()),
            current_task_->sml_k);
        const auto& features = sim_->features_for(*current_task_, phs_, batch, fkeys_);
        const auto& labels = sim_->labels_for(batch);
        std::uint64_t seed = derive_seed(sim_->config().seed, "miner-init", static_cast<std::uint64_t>(index_),
                                         chain_.height() + 1, static_cast<std::uint64_t>(attempt_));
        session_.emplace(*current_task_, std::move(weights), features, labels, seed);
        sim_->schedule_self(now + sim_->config().step_seconds, index_, TickTrainStep{session_id_});
        sim_->schedule_self(now + current_task_->model_spec.time_limit, index_, TickTimeout{session_id_});
    }

    void on_candidate_buffered(double /*now*/, const ledger::Block& /*blk*/) override {
        // a competitor's solution stops the local session; the buffered block
        // rides to selection
        if (phase_ == consensus::Phase::Training) {
            phase_ = consensus::Phase::AwaitTest;
            session_.reset();
        }
    }

    void on_tick(double now, const Payload& p) override {
        if (const auto* ts = std::get_if<TickTrainStep>(&p)) {
            if (ts->session != session_id_ || phase_ != consensus::Phase::Training || !session_) return;
            double duration = sim_->config().step_seconds;
            if (sim_->config().wallclock) {
                auto t0 = std::chrono::steady_clock::now();
                session_->step();
                duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            } else {
                session_->step();
            }
            if (session_->train_accuracy() >= current_task_->model_spec.required_accuracy) {
                emit(now);
            } else {
                sim_->schedule_self(now + duration, index_, TickTrainStep{session_id_});
            }
            return;
        }
        if (const auto* to = std::get_if<TickTimeout>(&p)) {
            if (to->session != session_id_ || phase_ != consensus::Phase::Training || !session_) return;
            emit(now);  // best-so-far model at the training deadline
            return;
        }
    }

    void on_block_appended(double /*now*/, const ledger::Block& /*blk*/) override {}

  private:
    void emit(double now) {
        ledger::Block blk = build_candidate(now, session_->solution());
        phase_ = consensus::Phase::AwaitTest;
        session_.reset();
        sim_->broadcast(now, index_, MsgCandidate{std::move(blk)});
    }

    consensus::Phase phase_ = consensus::Phase::Idle;
    std::optional<consensus::TrainingSession> session_;
    std::uint64_t session_id_ = 0;
};

// ---- data node ----------------------------------------------------------------

TaskRecord make_task_record(Simulation* sim, const DataNodeConfig& dn_cfg, int dn_index,
                            std::size_t tmpl_index, int instance);

class DataNode : public Node {
  public:
    DataNode(Simulation* sim, int index, ledger::AccountId id, ledger::Block genesis, double block_reward,
             int dn_index, const DataNodeConfig& cfg)
        : Node(sim, index, std::move(id), std::move(genesis), block_reward), dn_index_(dn_index), cfg_(cfg) {
        state_.id = id_;
        state_.wait_count = sim_->config().wait_count;
        instances_posted_.assign(cfg_.tasks.size(), 0);
    }

    DataNodeState& state() { return state_; }
    void adopt_record(std::size_t template_index, ledger::TaskId task_id, TaskRecord record) {
        state_.tasks.emplace(std::move(task_id), std::move(record));
        instances_posted_[template_index] = 1;
    }

  protected:
    void on_height_started(double now) override {
        // the training window opens after the key exchange; force the test
        // release once timeout broadcasts must have landed
        auto it = state_.tasks.find(current_task_->task_id);
        if (it != state_.tasks.end() && !it->second.released) {
            double margin = 3.0 * sim_->config().latency + sim_->config().release_delay;
            sim_->schedule_self(now + current_task_->model_spec.time_limit + margin, index_,
                                TickForceRelease{current_task_->task_id});
        }
    }

    void on_key_request(double now, const MsgKeyRequest& m) override {
        auto it = state_.tasks.find(m.task_id);
        if (it == state_.tasks.end()) return;  // another node's task
        std::string key = m.task_id + "|" + to_hex(m.phs);
        if (answered_.count(key)) return;
        answered_.insert(key);
        MsgKeyResponse resp;
        resp.task_id = m.task_id;
        resp.phs = m.phs;
        resp.fkeys = state_.serve_functional_keys(m.task_id, m.phs);
        sim_->broadcast(now, index_, std::move(resp));
    }

    void on_candidate_buffered(double now, const ledger::Block& blk) override {
        auto it = state_.tasks.find(blk.header.task_id);
        if (it == state_.tasks.end()) return;
        TaskRecord& rec = it->second;
        rec.candidates_seen = static_cast<int>(candidates_.size());
        if (!rec.released && !release_scheduled_.count(blk.header.task_id) &&
            rec.candidates_seen >= state_.wait_count) {
            release_scheduled_.insert(blk.header.task_id);
            sim_->schedule_self(now + sim_->config().release_delay, index_, TickForceRelease{blk.header.task_id});
        }
    }

    void on_tick(double now, const Payload& p) override {
        if (const auto* fr = std::get_if<TickForceRelease>(&p)) {
            auto it = state_.tasks.find(fr->task_id);
            if (it == state_.tasks.end() || it->second.released) return;
            if (!current_task_ || current_task_->task_id != fr->task_id) return;
            ledger::TestData test = state_.release_test_set(fr->task_id, now);
            sim_->broadcast(now, index_, MsgTestRelease{std::move(test)});
            return;
        }
        if (const auto* tp = std::get_if<TickPost>(&p)) {
            TaskRecord rec = make_task_record(sim_, cfg_, dn_index_, tp->template_index, tp->instance);
            ledger::CiphertextBatch batch =
                encrypt_batch(rec, derive_seed(sim_->config().seed, "encrypt",
                                               static_cast<std::uint64_t>(dn_index_), tp->template_index,
                                               static_cast<std::uint64_t>(tp->instance)));
            MsgTaskPost post;
            post.task = rec.task;
            post.batch = std::move(batch);
            state_.tasks.emplace(rec.task.task_id, std::move(rec));
            sim_->broadcast(now, index_, std::move(post));
            return;
        }
    }

    void on_block_appended(double now, const ledger::Block& blk) override {
        // repost the template once its current instance concluded
        auto consider = [&](const ledger::TaskId& id) {
            for (std::size_t t = 0; t < cfg_.tasks.size(); ++t) {
                std::string prefix = id_ + "-" + cfg_.tasks[t].name + "-";
                if (id.rfind(prefix, 0) != 0) continue;
                if (instances_posted_[t] < cfg_.tasks[t].count) {
                    int next = instances_posted_[t]++;
                    sim_->schedule_self(now + sim_->config().latency, index_, TickPost{t, next});
                }
            }
        };
        consider(blk.header.task_id);
        for (const auto& id : blk.body.failed_task_ids) consider(id);
    }

  private:
    int dn_index_;
    DataNodeConfig cfg_;
    DataNodeState state_;
    std::vector<int> instances_posted_;
    std::set<std::string> answered_;
    std::set<ledger::TaskId> release_scheduled_;
};

TaskRecord make_task_record(Simulation* sim, const DataNodeConfig& dn_cfg, int dn_index,
                            std::size_t tmpl_index, int instance) {
    const TaskTemplate& tmpl = dn_cfg.tasks[tmpl_index];
    auto [train, test] = sim->split_for(dn_index, tmpl_index, tmpl);
    TaskRecord rec;
    rec.train = std::move(train);
    rec.test = std::move(test);
    rec.params = fe::group_gen(sim->config().lambda,
                               derive_seed(sim->config().seed, "group", static_cast<std::uint64_t>(dn_index),
                                           tmpl_index, static_cast<std::uint64_t>(instance)));
    rec.keys = fe::keygen(rec.params, rec.train.dim(),
                          derive_seed(sim->config().seed, "keys", static_cast<std::uint64_t>(dn_index),
                                      tmpl_index, static_cast<std::uint64_t>(instance)));
    ledger::Task task;
    task.task_id = dn_cfg.id + "-" + tmpl.name + "-" + std::to_string(instance);
    task.poster = dn_cfg.id;
    task.reward = tmpl.reward;
    task.model_spec.layer_sizes.push_back(tmpl.queries);
    for (int hs : tmpl.hidden) task.model_spec.layer_sizes.push_back(hs);
    task.model_spec.layer_sizes.push_back(rec.train.classes);
    task.model_spec.required_accuracy = tmpl.required_accuracy;
    task.model_spec.time_limit = tmpl.time_limit;
    task.model_spec.lr = tmpl.lr;
    task.model_spec.batch_size = tmpl.batch;
    task.disc = tmpl.disc;
    task.sml_k = tmpl.k;
    rec.task = std::move(task);
    return rec;
}

}  // namespace

// ---- simulation core ---------------------------------------------------------

void Simulation::broadcast(double now, int sender, Payload payload) {
    for (std::size_t r = 0; r < nodes_.size(); ++r) {
        EventRecord ev;
        ev.time = now + cfg_.latency;
        ev.recipient = static_cast<int>(r);
        ev.seq = seq_++;
        ev.sender = sender;
        ev.payload = payload;
        queue_.push(std::move(ev));
    }
}

void Simulation::schedule_self(double when, int node, Payload payload) {
    EventRecord ev;
    ev.time = when;
    ev.recipient = node;
    ev.seq = seq_++;
    ev.sender = node;
    ev.payload = std::move(payload);
    queue_.push(std::move(ev));
}

void Simulation::log_delivery(const EventRecord& ev) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "t=%014.6f from=%s to=%s type=%s digest=%016llx\n", ev.time,
                  nodes_[static_cast<std::size_t>(ev.sender)]->id().c_str(),
                  nodes_[static_cast<std::size_t>(ev.recipient)]->id().c_str(), payload_type(ev.payload),
                  static_cast<unsigned long long>(payload_digest(ev.payload)));
    log_ << buf;
}

const ds::LabeledData& Simulation::dataset(const std::string& name) {
    auto it = dataset_memo_.find(name);
    if (it != dataset_memo_.end()) return it->second;
    auto cfg_it = cfg_.datasets.find(name);
    if (cfg_it == cfg_.datasets.end()) throw std::invalid_argument("unknown dataset: " + name);
    const DatasetConfig& d = cfg_it->second;
    ds::LabeledData data;
    if (d.kind == "iris") {
        data = ds::load_iris_csv(d.csv_path);
    } else if (d.kind == "idx") {
        data = ds::load_idx(d.images_path, d.labels_path);
    } else if (d.kind == "blobs") {
        data = ds::make_blobs(d.classes, d.dim, d.per_class, d.spread, d.seed);
    } else {
        throw std::invalid_argument("unknown dataset kind: " + d.kind);
    }
    return dataset_memo_.emplace(name, std::move(data)).first->second;
}

std::pair<ds::LabeledData, ds::LabeledData> Simulation::split_for(int dn_index, std::size_t tmpl_index,
                                                                  const TaskTemplate& tmpl) {
    const ds::LabeledData& full = dataset(tmpl.dataset);
    double fraction = cfg_.datasets.at(tmpl.dataset).train_fraction;
    return ds::stratified_split(full, fraction,
                                derive_seed(cfg_.seed, "split", static_cast<std::uint64_t>(dn_index), tmpl_index));
}

const std::vector<std::vector<double>>& Simulation::features_for(const ledger::Task& task, const Hash256& phs,
                                                                 const ledger::CiphertextBatch& batch,
                                                                 const std::vector<fe::FunctionalKey>& fkeys) {
    std::string key = task.task_id + "|" + to_hex(phs);
    auto it = feature_memo_.find(key);
    if (it != feature_memo_.end()) return it->second;
    std::size_t dim = batch.cts.empty() ? 0 : batch.cts.front().dim();
    sml::SmlWeights weights = sml::generate_sml(
        phs, dim, static_cast<std::size_t>(task.model_spec.layer_sizes.front()), task.sml_k);
    auto features = sml::apply_sml_batch(weights, batch.params, batch.cts, fkeys, task.disc);
    return feature_memo_.emplace(std::move(key), std::move(features)).first->second;
}

const std::vector<int>& Simulation::labels_for(const ledger::CiphertextBatch& batch) {
    std::string key = batch.task_id;
    auto it = label_memo_.find(key);
    if (it != label_memo_.end()) return it->second;
    std::vector<int> labels(batch.labels.begin(), batch.labels.end());
    return label_memo_.emplace(std::move(key), std::move(labels)).first->second;
}

double Simulation::test_accuracy_for(const ledger::Block& candidate, const ledger::Task& task,
                                     const ledger::TestData& test) {
    std::string key = to_hex(ledger::hash_block(candidate.header));
    auto it = test_acc_memo_.find(key);
    if (it != test_acc_memo_.end()) return it->second;
    auto features = sml::apply_sml_plaintext_batch(candidate.header.model.sml, test.x, task.disc);
    std::vector<int> labels(test.y.begin(), test.y.end());
    double acc = consensus::model_accuracy(candidate.header.model, features, labels);
    test_acc_memo_.emplace(std::move(key), acc);
    return acc;
}

void Simulation::note_append(int node, const ledger::Block& blk) {
    auto& heads = heads_per_height_[blk.header.block_id];
    heads.resize(nodes_.size());
    heads[static_cast<std::size_t>(node)] = ledger::hash_block(blk.header);
}

Simulation::Simulation(const SimConfig& cfg) : cfg_(cfg) {
    if (cfg_.miners < 1) throw std::invalid_argument("at least one miner required");
    if (cfg_.wait_count < 1) throw std::invalid_argument("wait_count must be >= 1");

    // genesis: initial task instances (one per template) plus mint balances
    std::map<ledger::AccountId, double> balances;
    for (int m = 0; m < cfg_.miners; ++m) balances["miner" + std::to_string(m)] = cfg_.initial_balance;
    for (const auto& dn : cfg_.data_nodes) balances[dn.id] = cfg_.initial_balance;

    // genesis task records are minted before any node exists
    std::vector<ledger::Task> genesis_tasks;
    std::vector<ledger::CiphertextBatch> genesis_batches;
    struct Adoption {
        std::size_t dn;
        std::size_t tmpl;
        ledger::TaskId id;
        TaskRecord rec;
    };
    std::vector<Adoption> adoptions;
    for (std::size_t d = 0; d < cfg_.data_nodes.size(); ++d) {
        for (std::size_t t = 0; t < cfg_.data_nodes[d].tasks.size(); ++t) {
            TaskRecord rec = make_task_record(this, cfg_.data_nodes[d], static_cast<int>(d), t, 0);
            ledger::CiphertextBatch batch = encrypt_batch(
                rec, derive_seed(cfg_.seed, "encrypt", static_cast<std::uint64_t>(d), t, 0));
            rec.task.data_pointers = {
                ledger::DataPointer{0, static_cast<std::uint32_t>(genesis_batches.size())}};
            genesis_tasks.push_back(rec.task);
            genesis_batches.push_back(std::move(batch));
            adoptions.push_back(Adoption{d, t, rec.task.task_id, std::move(rec)});
        }
    }
    ledger::Block genesis = ledger::make_genesis(genesis_tasks, genesis_batches, balances);

    for (int m = 0; m < cfg_.miners; ++m)
        nodes_.push_back(std::make_unique<MinerNode>(this, m, "miner" + std::to_string(m), genesis,
                                                     cfg_.block_reward));
    for (std::size_t d = 0; d < cfg_.data_nodes.size(); ++d) {
        auto node = std::make_unique<DataNode>(this, cfg_.miners + static_cast<int>(d), cfg_.data_nodes[d].id,
                                               genesis, cfg_.block_reward, static_cast<int>(d),
                                               cfg_.data_nodes[d]);
        nodes_.push_back(std::move(node));
    }
    for (auto& a : adoptions) {
        auto* dn = static_cast<DataNode*>(nodes_[static_cast<std::size_t>(cfg_.miners) + a.dn].get());
        dn->adopt_record(a.tmpl, a.id, std::move(a.rec));
    }
    note_append(0, genesis);
}

SimResult Simulation::run() {
    for (auto& node : nodes_) node->begin(0.0);

    auto min_height = [&]() {
        std::uint64_t h = ~std::uint64_t{0};
        for (const auto& node : nodes_) h = std::min(h, node->chain().height());
        return h;
    };

    while (!queue_.empty()) {
        if (min_height() >= cfg_.target_blocks) break;
        EventRecord ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        if (now_ > cfg_.max_sim_time)
            throw DeadlockError("simulated time exceeded max_sim_time before reaching the target height");
        if (is_network_message(ev.payload)) log_delivery(ev);
        nodes_[static_cast<std::size_t>(ev.recipient)]->handle(ev.time, ev.sender, ev.payload);
    }
    if (min_height() < cfg_.target_blocks)
        throw DeadlockError("event queue drained at height " + std::to_string(min_height()) +
                            " before the target " + std::to_string(cfg_.target_blocks));

    SimResult result;
    const ledger::Chain& chain0 = nodes_.front()->chain();
    for (std::uint64_t h = 0; h <= chain0.height(); ++h) result.blocks.push_back(chain0.at(h));
    result.heights = std::move(stats_);
    result.verdicts = std::move(verdicts_);
    result.event_log = log_.str();
    result.final_state = chain0.state();
    result.heads_consistent = true;
    for (const auto& node : nodes_) result.final_heads.push_back(node->chain().head_hash());
    for (const auto& [height, heads] : heads_per_height_) {
        if (height > cfg_.target_blocks) continue;
        for (const auto& h : heads)
            if (h != heads.front() && !is_zero(h)) result.heads_consistent = false;
    }
    for (const auto& h : result.final_heads)
        if (h != result.final_heads.front()) result.heads_consistent = false;
    return result;
}

std::vector<double> SimResult::block_times() const {
    std::vector<double> deltas;
    for (std::size_t i = 1; i < blocks.size(); ++i)
        deltas.push_back(blocks[i].header.timestamp - blocks[i - 1].header.timestamp);
    return deltas;
}

SimResult run_simulation(const SimConfig& config) {
    Simulation sim(config);
    return sim.run();
}

}  // namespace pole::sim
