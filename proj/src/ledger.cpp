#include "pole/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pole/hash.hpp"

namespace pole::ledger {

bool task_less(const Task& a, const Task& b) {
    if (a.value() != b.value()) return a.value() > b.value();
    return a.task_id < b.task_id;
}

Hash256 merkle_root(const std::vector<Bytes>& leaves) {
    if (leaves.empty()) throw std::invalid_argument("merkle_root: empty leaf list");
    std::vector<Hash256> level;
    level.reserve(leaves.size());
    for (const auto& leaf : leaves) level.push_back(sha256(leaf));
    while (level.size() > 1) {
        if (level.size() % 2 == 1) level.push_back(level.back());
        std::vector<Hash256> next;
        next.reserve(level.size() / 2);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            ByteWriter w;
            w.put_hash(level[i]);
            w.put_hash(level[i + 1]);
            next.push_back(sha256(w.bytes()));
        }
        level = std::move(next);
    }
    return level.front();
}

double ommer_reward(double rw, std::uint64_t hw, std::uint64_t ho, std::uint32_t onum) {
    if (hw <= ho) throw std::invalid_argument("ommer_reward: winner height must exceed ommer height");
    if (onum == 0) throw std::invalid_argument("ommer_reward: ommer count must be >= 1");
    return rw / (static_cast<double>(hw - ho) * static_cast<double>(onum));
}

double referral_bonus(double rw) { return rw / 32.0; }

// ---- serialization ----------------------------------------------------

namespace {

void write_disc(ByteWriter& w, const fe::Discretization& d) {
    w.put_double(d.scale);
    w.put_uint(d.offset);
    w.put_uint(d.xmax);
}

fe::Discretization parse_disc(ByteReader& r) {
    fe::Discretization d;
    d.scale = r.get_double();
    d.offset = static_cast<std::uint32_t>(r.get_uint());
    d.xmax = static_cast<std::uint32_t>(r.get_uint());
    return d;
}

void write_tx(ByteWriter& w, const Transaction& tx) {
    w.put_str(tx.from);
    w.put_str(tx.to);
    w.put_double(tx.amount);
}

Transaction parse_tx(ByteReader& r) {
    Transaction tx;
    tx.from = r.get_str();
    tx.to = r.get_str();
    tx.amount = r.get_double();
    return tx;
}

void write_receipt(ByteWriter& w, const OmmerReceipt& rc) {
    w.put_hash(rc.hash);
    w.put_uint(rc.height);
    w.put_str(rc.producer);
    w.put_uint(rc.onum);
}

OmmerReceipt parse_receipt(ByteReader& r) {
    OmmerReceipt rc;
    rc.hash = r.get_hash();
    rc.height = r.get_uint();
    rc.producer = r.get_str();
    rc.onum = static_cast<std::uint32_t>(r.get_uint());
    return rc;
}

void write_batch(ByteWriter& w, const CiphertextBatch& b) {
    w.put_str(b.task_id);
    w.put_raw(fe::serialize(b.params));
    w.put_u32(static_cast<std::uint32_t>(b.cts.size()));
    for (const auto& ct : b.cts) fe::write_ciphertext(w, ct);
    w.put_bytes(b.labels);
}

CiphertextBatch parse_batch(ByteReader& r) {
    CiphertextBatch b;
    b.task_id = r.get_str();
    b.params = fe::parse_group_params(r);
    std::uint32_t n = r.get_u32();
    b.cts.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) b.cts.push_back(fe::parse_ciphertext(r));
    b.labels = r.get_bytes();
    return b;
}

void write_test_data(ByteWriter& w, const TestData& t) {
    w.put_str(t.task_id);
    w.put_u32(static_cast<std::uint32_t>(t.x.size()));
    w.put_u32(t.x.empty() ? 0 : static_cast<std::uint32_t>(t.x.front().size()));
    for (const auto& row : t.x)
        for (double v : row) w.put_double(v);
    w.put_bytes(t.y);
    w.put_double(t.timestamp);
    w.put_str(t.signer);
}

TestData parse_test_data(ByteReader& r) {
    TestData t;
    t.task_id = r.get_str();
    std::uint32_t n = r.get_u32();
    std::uint32_t dim = r.get_u32();
    t.x.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::vector<double> row(dim);
        for (auto& v : row) v = r.get_double();
        t.x.push_back(std::move(row));
    }
    t.y = r.get_bytes();
    t.timestamp = r.get_double();
    t.signer = r.get_str();
    return t;
}

}  // namespace

void write_task(ByteWriter& w, const Task& t) {
    w.put_str(t.task_id);
    w.put_str(t.poster);
    w.put_double(t.reward);
    nn::write_model_spec(w, t.model_spec);
    write_disc(w, t.disc);
    w.put_uint(static_cast<std::uint64_t>(t.sml_k));
    w.put_u32(static_cast<std::uint32_t>(t.data_pointers.size()));
    for (const auto& dp : t.data_pointers) {
        w.put_uint(dp.block_id);
        w.put_uint(dp.batch_index);
    }
}

Task parse_task(ByteReader& r) {
    Task t;
    t.task_id = r.get_str();
    t.poster = r.get_str();
    t.reward = r.get_double();
    t.model_spec = nn::parse_model_spec(r);
    t.disc = parse_disc(r);
    t.sml_k = static_cast<int>(r.get_uint());
    std::uint32_t n = r.get_u32();
    t.data_pointers.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        DataPointer dp;
        dp.block_id = r.get_uint();
        dp.batch_index = static_cast<std::uint32_t>(r.get_uint());
        t.data_pointers.push_back(dp);
    }
    return t;
}

void write_model_solution(ByteWriter& w, const ModelSolution& m) {
    w.put_str(m.spec_id);
    if (m.sml.queries() == 0) {
        w.put_bytes({});
    } else {
        w.put_bytes(sml::serialize(m.sml));
    }
    w.put_u32(static_cast<std::uint32_t>(m.norm.mean.size()));
    for (double v : m.norm.mean) w.put_double(v);
    for (double v : m.norm.inv_std) w.put_double(v);
    nn::write_params(w, m.params);
    w.put_double(m.train_accuracy);
}

ModelSolution parse_model_solution(ByteReader& r) {
    ModelSolution m;
    m.spec_id = r.get_str();
    Bytes sml_bytes = r.get_bytes();
    if (!sml_bytes.empty()) m.sml = sml::deserialize_weights(sml_bytes);
    std::uint32_t n = r.get_u32();
    m.norm.mean.resize(n);
    m.norm.inv_std.resize(n);
    for (auto& v : m.norm.mean) v = r.get_double();
    for (auto& v : m.norm.inv_std) v = r.get_double();
    m.params = nn::parse_params(r);
    m.train_accuracy = r.get_double();
    return m;
}

Bytes serialize(const BlockHeader& h) {
    ByteWriter w;
    w.put_uint(h.block_id);
    w.put_str(h.winner_id);
    w.put_str(h.task_id);
    w.put_hash(h.prev_hash);
    write_model_solution(w, h.model);
    w.put_double(h.train_accuracy);
    w.put_double(h.test_accuracy);
    w.put_u32(static_cast<std::uint32_t>(h.ommer_hashes.size()));
    for (const auto& oh : h.ommer_hashes) w.put_hash(oh);
    w.put_hash(h.merkle_root);
    w.put_double(h.timestamp);
    return w.take();
}

BlockHeader parse_header(ByteReader& r) {
    BlockHeader h;
    h.block_id = r.get_uint();
    h.winner_id = r.get_str();
    h.task_id = r.get_str();
    h.prev_hash = r.get_hash();
    h.model = parse_model_solution(r);
    h.train_accuracy = r.get_double();
    h.test_accuracy = r.get_double();
    std::uint32_t n = r.get_u32();
    h.ommer_hashes.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) h.ommer_hashes.push_back(r.get_hash());
    h.merkle_root = r.get_hash();
    h.timestamp = r.get_double();
    return h;
}

Hash256 hash_block(const BlockHeader& header) { return sha256(serialize(header)); }

std::vector<Bytes> body_leaves(const BlockBody& body) {
    std::vector<Bytes> leaves;
    // leaf 0 pins the counts and the id lists so every body byte is covered
    {
        ByteWriter w;
        w.put_u8(0x00);
        w.put_u32(static_cast<std::uint32_t>(body.pending_tasks.size()));
        w.put_u32(static_cast<std::uint32_t>(body.new_ciphertext_data.size()));
        w.put_u32(static_cast<std::uint32_t>(body.transactions.size()));
        w.put_u32(static_cast<std::uint32_t>(body.ommer_receipts.size()));
        w.put_u32(static_cast<std::uint32_t>(body.new_task_ids.size()));
        for (const auto& id : body.new_task_ids) w.put_str(id);
        w.put_u32(static_cast<std::uint32_t>(body.failed_task_ids.size()));
        for (const auto& id : body.failed_task_ids) w.put_str(id);
        w.put_u8(body.bootstrap_task.has_value() ? 1 : 0);
        if (body.bootstrap_task) write_task(w, *body.bootstrap_task);
        w.put_u8(body.test_data.has_value() ? 1 : 0);
        leaves.push_back(w.take());
    }
    for (const auto& t : body.pending_tasks) {
        ByteWriter w;
        w.put_u8(0x01);
        write_task(w, t);
        leaves.push_back(w.take());
    }
    for (const auto& b : body.new_ciphertext_data) {
        ByteWriter w;
        w.put_u8(0x02);
        write_batch(w, b);
        leaves.push_back(w.take());
    }
    for (const auto& tx : body.transactions) {
        ByteWriter w;
        w.put_u8(0x03);
        write_tx(w, tx);
        leaves.push_back(w.take());
    }
    for (const auto& rc : body.ommer_receipts) {
        ByteWriter w;
        w.put_u8(0x04);
        write_receipt(w, rc);
        leaves.push_back(w.take());
    }
    if (body.test_data) {
        ByteWriter w;
        w.put_u8(0x05);
        write_test_data(w, *body.test_data);
        leaves.push_back(w.take());
    }
    return leaves;
}

Hash256 body_merkle_root(const BlockBody& body) { return merkle_root(body_leaves(body)); }

Bytes serialize(const Block& b) {
    ByteWriter w;
    w.put_raw(serialize(b.header));
    w.put_u32(static_cast<std::uint32_t>(b.body.pending_tasks.size()));
    for (const auto& t : b.body.pending_tasks) write_task(w, t);
    w.put_u32(static_cast<std::uint32_t>(b.body.new_task_ids.size()));
    for (const auto& id : b.body.new_task_ids) w.put_str(id);
    w.put_u32(static_cast<std::uint32_t>(b.body.failed_task_ids.size()));
    for (const auto& id : b.body.failed_task_ids) w.put_str(id);
    w.put_u8(b.body.bootstrap_task.has_value() ? 1 : 0);
    if (b.body.bootstrap_task) write_task(w, *b.body.bootstrap_task);
    w.put_u32(static_cast<std::uint32_t>(b.body.new_ciphertext_data.size()));
    for (const auto& batch : b.body.new_ciphertext_data) write_batch(w, batch);
    w.put_u32(static_cast<std::uint32_t>(b.body.transactions.size()));
    for (const auto& tx : b.body.transactions) write_tx(w, tx);
    w.put_u32(static_cast<std::uint32_t>(b.body.ommer_receipts.size()));
    for (const auto& rc : b.body.ommer_receipts) write_receipt(w, rc);
    w.put_u8(b.body.test_data.has_value() ? 1 : 0);
    if (b.body.test_data) write_test_data(w, *b.body.test_data);
    return w.take();
}

Block parse_block(ByteReader& r) {
    Block b;
    b.header = parse_header(r);
    std::uint32_t n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.pending_tasks.push_back(parse_task(r));
    n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.new_task_ids.push_back(r.get_str());
    n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.failed_task_ids.push_back(r.get_str());
    if (r.get_u8()) b.body.bootstrap_task = parse_task(r);
    n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.new_ciphertext_data.push_back(parse_batch(r));
    n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.transactions.push_back(parse_tx(r));
    n = r.get_u32();
    for (std::uint32_t i = 0; i < n; ++i) b.body.ommer_receipts.push_back(parse_receipt(r));
    if (r.get_u8()) b.body.test_data = parse_test_data(r);
    return b;
}

Block deserialize_block(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    Block b = parse_block(r);
    if (!r.done()) throw DecodeError("block: trailing bytes");
    return b;
}

// ---- accounts ----------------------------------------------------------

namespace {

void transfer(AccountState& st, const AccountId& from, const AccountId& to, double amount,
              const char* what) {
    if (amount < 0.0) throw std::invalid_argument("negative transfer");
    // the mint account funds genesis balances and block rewards
    if (from != kMint) {
        double bal = st.balance(from);
        if (bal + 1e-9 < amount)
            throw InsufficientBalance(std::string(what) + ": " + from + " holds " + std::to_string(bal) +
                                      ", needs " + std::to_string(amount));
        st.balances[from] = bal - amount;
    }
    st.balances[to] += amount;
}

}  // namespace

AccountState apply_block(const AccountState& state, const Block& block, double block_reward) {
    const BlockHeader& h = block.header;
    if (h.block_id != state.height + 1 && !(h.block_id == 0 && state.height == 0 && state.balances.empty()))
        throw ChainError("apply_block: height " + std::to_string(h.block_id) + " does not follow " +
                         std::to_string(state.height));
    AccountState st = state;
    st.height = h.block_id;

    // new task postings escrow their reward first; a bootstrap block may
    // post and solve the same task
    for (const auto& id : block.body.new_task_ids) {
        const Task* task = nullptr;
        for (const auto& t : block.body.pending_tasks)
            if (t.task_id == id) task = &t;
        if (task == nullptr && block.body.bootstrap_task && block.body.bootstrap_task->task_id == id)
            task = &*block.body.bootstrap_task;
        if (task == nullptr) throw ChainError("apply_block: new task not listed: " + id);
        if (task->reward <= 0.0) throw ChainError("apply_block: task reward must be positive");
        transfer(st, task->poster, kReservoir, task->reward, "task escrow");
        st.pending_rewards[id] = Escrow{task->reward, task->poster};
    }

    if (h.block_id > 0) {
        // winner payout: escrowed task reward plus the fixed block reward
        auto it = st.pending_rewards.find(h.task_id);
        if (it == st.pending_rewards.end()) throw ChainError("apply_block: solved task not pending: " + h.task_id);
        transfer(st, kReservoir, h.winner_id, it->second.reward, "task reward");
        st.pending_rewards.erase(it);
        transfer(st, kMint, h.winner_id, block_reward, "block reward");

        // referral bonus and ommer payouts
        for (const auto& rc : block.body.ommer_receipts) {
            transfer(st, kMint, h.winner_id, referral_bonus(block_reward), "referral bonus");
            transfer(st, kMint, rc.producer, ommer_reward(block_reward, h.block_id, rc.height, rc.onum),
                     "ommer reward");
        }

        // refunds for tasks dropped after an unresolvable height
        for (const auto& id : block.body.failed_task_ids) {
            auto fit = st.pending_rewards.find(id);
            if (fit == st.pending_rewards.end()) throw ChainError("apply_block: failed task not pending: " + id);
            transfer(st, kReservoir, fit->second.poster, fit->second.reward, "task refund");
            st.pending_rewards.erase(fit);
        }
    }

    for (const auto& tx : block.body.transactions) transfer(st, tx.from, tx.to, tx.amount, "transaction");
    return st;
}

// ---- chain --------------------------------------------------------------

Chain::Chain(Block genesis, double block_reward) : block_reward_(block_reward) {
    if (genesis.header.block_id != 0) throw ChainError("genesis must have height 0");
    if (genesis.header.merkle_root != body_merkle_root(genesis.body))
        throw ChainError("genesis merkle root mismatch");
    state_ = apply_block(AccountState{}, genesis, block_reward_);
    blocks_.push_back(std::move(genesis));
}

void Chain::validate_structure(const Block& block) const {
    const BlockHeader& h = block.header;
    if (h.block_id != height() + 1) throw ChainError("block height must increase by one");
    if (h.prev_hash != hash_block(head().header)) throw ChainError("prev_hash does not match parent");
    if (h.merkle_root != body_merkle_root(block.body)) throw ChainError("merkle root does not match body");
    if (h.model.spec_id != h.task_id) throw ChainError("model solves a different task");

    // task-list conservation: child = parent - solved - failed + new
    const bool bootstrap = block.body.bootstrap_task.has_value();
    if (bootstrap && block.body.bootstrap_task->task_id != h.task_id)
        throw ChainError("bootstrap task record does not match the solved task");
    std::set<TaskId> expect;
    for (const auto& t : head().body.pending_tasks) expect.insert(t.task_id);
    if (bootstrap) {
        if (expect.count(h.task_id)) throw ChainError("bootstrap task was already pending");
    } else if (expect.erase(h.task_id) == 0) {
        throw ChainError("solved task was not pending");
    }
    for (const auto& id : block.body.failed_task_ids)
        if (expect.erase(id) == 0) throw ChainError("failed task was not pending");
    for (const auto& id : block.body.new_task_ids) {
        if (id == h.task_id && bootstrap) continue;  // posted and solved here
        if (!expect.insert(id).second) throw ChainError("new task id already pending");
    }
    std::set<TaskId> got;
    for (const auto& t : block.body.pending_tasks)
        if (!got.insert(t.task_id).second) throw ChainError("duplicate pending task id");
    if (got != expect) throw ChainError("task list conservation violated");

    if (block.body.ommer_receipts.size() != h.ommer_hashes.size())
        throw ChainError("ommer receipts do not match header references");
    for (std::size_t i = 0; i < h.ommer_hashes.size(); ++i) {
        const auto& rc = block.body.ommer_receipts[i];
        if (rc.hash != h.ommer_hashes[i]) throw ChainError("ommer receipt hash mismatch");
        if (rc.height >= h.block_id) throw ChainError("ommer height must precede winner height");
        if (rc.onum == 0) throw ChainError("ommer count must be >= 1");
        if (referenced_ommers_.count(to_hex(rc.hash))) throw ChainError("ommer referenced twice");
    }

    // data pointers of newly posted tasks resolve within the chain,
    // possibly into this very block (bootstrap when the pending list ran dry)
    auto check_pointers = [&](const Task& t) {
        for (const auto& dp : t.data_pointers) {
            const std::vector<CiphertextBatch>* batches = nullptr;
            if (dp.block_id == h.block_id)
                batches = &block.body.new_ciphertext_data;
            else if (dp.block_id <= height())
                batches = &blocks_[dp.block_id].body.new_ciphertext_data;
            else
                throw ChainError("data pointer into the future");
            if (dp.batch_index >= batches->size()) throw ChainError("data pointer batch out of range");
            if ((*batches)[dp.batch_index].task_id != t.task_id)
                throw ChainError("data pointer batch belongs to another task");
        }
    };
    for (const auto& id : block.body.new_task_ids) {
        for (const auto& t : block.body.pending_tasks)
            if (t.task_id == id) check_pointers(t);
        if (bootstrap && block.body.bootstrap_task->task_id == id) check_pointers(*block.body.bootstrap_task);
    }
}

void Chain::append(Block block) {
    validate_structure(block);
    state_ = apply_block(state_, block, block_reward_);
    for (const auto& rc : block.body.ommer_receipts) referenced_ommers_.insert(to_hex(rc.hash));
    blocks_.push_back(std::move(block));
}

std::uint64_t Chain::find_broken_link() const {
    for (std::uint64_t i = 1; i < blocks_.size(); ++i) {
        if (blocks_[i].header.prev_hash != hash_block(blocks_[i - 1].header)) return i;
        if (blocks_[i].header.merkle_root != body_merkle_root(blocks_[i].body)) return i;
    }
    if (!blocks_.empty() && blocks_[0].header.merkle_root != body_merkle_root(blocks_[0].body)) return 0;
    return 0;
}

const CiphertextBatch& Chain::resolve(const DataPointer& ptr) const {
    if (ptr.block_id >= blocks_.size()) throw ChainError("data pointer beyond head");
    const auto& batches = blocks_[ptr.block_id].body.new_ciphertext_data;
    if (ptr.batch_index >= batches.size()) throw ChainError("data pointer batch out of range");
    return batches[ptr.batch_index];
}

void Chain::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open chain file for writing: " + path);
    for (const auto& b : blocks_) {
        Bytes bytes = serialize(b);
        std::uint8_t len[4];
        for (int i = 0; i < 4; ++i) len[i] = static_cast<std::uint8_t>(bytes.size() >> (8 * (3 - i)));
        f.write(reinterpret_cast<const char*>(len), 4);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

Chain Chain::load(const std::string& path, double block_reward) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open chain file: " + path);
    std::vector<Block> blocks;
    for (;;) {
        std::uint8_t len[4];
        if (!f.read(reinterpret_cast<char*>(len), 4)) break;
        std::uint32_t n = (std::uint32_t(len[0]) << 24) | (std::uint32_t(len[1]) << 16) |
                          (std::uint32_t(len[2]) << 8) | std::uint32_t(len[3]);
        Bytes bytes(n);
        if (!f.read(reinterpret_cast<char*>(bytes.data()), n)) throw DecodeError("chain file truncated");
        blocks.push_back(deserialize_block(bytes));
    }
    if (blocks.empty()) throw DecodeError("chain file holds no blocks");
    Chain chain(std::move(blocks.front()), block_reward);
    for (std::size_t i = 1; i < blocks.size(); ++i) chain.append(std::move(blocks[i]));
    return chain;
}

Block make_genesis(std::vector<Task> initial_tasks, std::vector<CiphertextBatch> batches,
                   const std::map<AccountId, double>& initial_balances) {
    Block b;
    b.header.block_id = 0;
    b.header.winner_id = "genesis";
    b.header.task_id = "";
    b.header.timestamp = 0.0;
    for (auto& t : initial_tasks) b.body.new_task_ids.push_back(t.task_id);
    b.body.pending_tasks = std::move(initial_tasks);
    b.body.new_ciphertext_data = std::move(batches);
    for (const auto& [account, amount] : initial_balances)
        b.body.transactions.push_back(Transaction{kMint, account, amount});
    b.header.merkle_root = body_merkle_root(b.body);
    return b;
}

std::string to_text(const Block& b) {
    std::ostringstream os;
    const auto& h = b.header;
    os << "block " << h.block_id << "\n";
    os << "  hash:           " << to_hex(hash_block(h)) << "\n";
    os << "  prev_hash:      " << to_hex(h.prev_hash) << "\n";
    os << "  winner:         " << h.winner_id << "\n";
    os << "  task:           " << h.task_id << "\n";
    os << "  timestamp:      " << h.timestamp << "\n";
    os << "  train_accuracy: " << h.train_accuracy << "\n";
    os << "  test_accuracy:  " << h.test_accuracy << "\n";
    os << "  merkle_root:    " << to_hex(h.merkle_root) << "\n";
    os << "  ommers:         " << h.ommer_hashes.size() << "\n";
    for (const auto& rc : b.body.ommer_receipts)
        os << "    " << to_hex(rc.hash).substr(0, 16) << " height=" << rc.height << " producer=" << rc.producer
           << " onum=" << rc.onum << "\n";
    os << "  pending_tasks:  " << b.body.pending_tasks.size() << "\n";
    for (const auto& t : b.body.pending_tasks)
        os << "    " << t.task_id << " poster=" << t.poster << " reward=" << t.reward
           << " required=" << t.model_spec.required_accuracy << " limit=" << t.model_spec.time_limit << "\n";
    os << "  new_tasks:      ";
    for (const auto& id : b.body.new_task_ids) os << id << " ";
    os << "\n";
    if (!b.body.failed_task_ids.empty()) {
        os << "  failed_tasks:   ";
        for (const auto& id : b.body.failed_task_ids) os << id << " ";
        os << "\n";
    }
    os << "  batches:        " << b.body.new_ciphertext_data.size() << "\n";
    for (const auto& batch : b.body.new_ciphertext_data)
        os << "    task=" << batch.task_id << " samples=" << batch.cts.size()
           << " dim=" << (batch.cts.empty() ? 0 : batch.cts.front().dim()) << "\n";
    os << "  transactions:   " << b.body.transactions.size() << "\n";
    for (const auto& tx : b.body.transactions)
        os << "    " << tx.from << " -> " << tx.to << " : " << tx.amount << "\n";
    if (b.body.test_data)
        os << "  test_data:      task=" << b.body.test_data->task_id << " samples=" << b.body.test_data->x.size()
           << " released=" << b.body.test_data->timestamp << "\n";
    if (h.model.params.sizes.size() >= 2) {
        os << "  model:          layers=[";
        for (std::size_t i = 0; i < h.model.params.sizes.size(); ++i)
            os << (i ? "," : "") << h.model.params.sizes[i];
        os << "] sml(I=" << h.model.sml.queries() << ", D=" << h.model.sml.dim() << ", k=" << h.model.sml.k
           << ")\n";
    }
    return os.str();
}

}  // namespace pole::ledger
