#include "bclab/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace bclab {

namespace mp = boost::multiprecision;

U256 to_u256(const Hash256& h) {
    U256 v;
    mp::import_bits(v, h.bytes.begin(), h.bytes.end());
    return v;
}

Hash256 from_u256(const U256& v) {
    std::vector<std::uint8_t> raw;
    mp::export_bits(v, std::back_inserter(raw), 8);
    Hash256 h;
    std::copy(raw.begin(), raw.end(), h.bytes.begin() + (32 - raw.size()));
    return h;
}

U256 max_target() { return ~U256(0); }

U256 target_from_bits(unsigned bits) {
    if (bits >= 256) return max_target();
    return U256(1) << bits;
}

Work block_work(const U256& target) { return (Work(1) << 256) / (Work(target) + 1); }

// check_pow accepts hash < target, so one attempt succeeds with probability target / 2^256.
double expected_attempts(const U256& target) {
    return std::ldexp(1.0, 256) / Work(target).convert_to<double>();
}

void ChainParams::validate() const {
    if (target_block_interval <= 0) throw std::invalid_argument("target_block_interval must be positive");
    if (retarget_window <= 0) throw std::invalid_argument("retarget_window must be positive");
    if (max_block_txs == 0) throw std::invalid_argument("max_block_txs must be positive");
    if (initial_subsidy <= 0) throw std::invalid_argument("initial_subsidy must be positive");
    if (halving_interval <= 0) throw std::invalid_argument("halving_interval must be positive");
    if (confirmation_depth <= 0) throw std::invalid_argument("confirmation_depth must be positive");
    if (initial_target == 0) throw std::invalid_argument("initial_target must be positive");
    if (retarget_clamp <= 1) throw std::invalid_argument("retarget_clamp must exceed 1");
}

std::array<std::uint8_t, kHeaderBytes> serialize_header(const BlockHeader& header) {
    std::array<std::uint8_t, kHeaderBytes> out{};
    auto it = std::copy(header.prev_hash.bytes.begin(), header.prev_hash.bytes.end(), out.begin());
    it = std::copy(header.tx_commitment.bytes.begin(), header.tx_commitment.bytes.end(), it);
    auto ts = static_cast<std::uint64_t>(header.timestamp);
    for (int shift = 56; shift >= 0; shift -= 8) *it++ = static_cast<std::uint8_t>(ts >> shift);
    auto target = from_u256(header.target);
    it = std::copy(target.bytes.begin(), target.bytes.end(), it);
    for (int shift = 24; shift >= 0; shift -= 8) *it++ = static_cast<std::uint8_t>(header.nonce >> shift);
    return out;
}

Hash256 block_hash(const BlockHeader& header) {
    auto bytes = serialize_header(header);
    return sha256(bytes);
}

bool check_pow(const BlockHeader& header) {
    // Big-endian byte order makes lexicographic comparison numeric.
    return block_hash(header).bytes < from_u256(header.target).bytes;
}

Hash256 tx_commitment(const Transaction& coinbase, std::span<const Transaction> txs) {
    std::vector<std::uint8_t> buf;
    buf.reserve(32 * (txs.size() + 1));
    buf.insert(buf.end(), coinbase.txid.bytes.begin(), coinbase.txid.bytes.end());
    for (const auto& tx : txs) buf.insert(buf.end(), tx.txid.bytes.begin(), tx.txid.bytes.end());
    return sha256(buf);
}

MineResult mine_block(const BlockHeader& tmpl, std::uint32_t first, std::uint32_t last) {
    MineResult result;
    if (first > last) return result;
    auto buf = serialize_header(tmpl);
    const auto target = from_u256(tmpl.target).bytes;
    for (std::uint64_t n = first; n <= last; ++n) {
        for (int i = 0; i < 4; ++i) buf[kHeaderBytes - 4 + i] = static_cast<std::uint8_t>(n >> (24 - 8 * i));
        ++result.attempts;
        if (sha256(buf).bytes < target) {
            result.nonce = static_cast<std::uint32_t>(n);
            return result;
        }
    }
    return result;
}

Amount subsidy(std::int64_t height, const ChainParams& params) {
    if (height < 0) throw std::invalid_argument("negative block height");
    auto halvings = height / params.halving_interval;
    if (halvings >= 63) return 0;
    return params.initial_subsidy >> halvings;
}

Amount total_issuance(const ChainParams& params) {
    Amount total = 0;
    for (int era = 0; era < 63 && (params.initial_subsidy >> era) > 0; ++era)
        total += (params.initial_subsidy >> era) * params.halving_interval;
    return total;
}

Transaction make_coinbase(std::int64_t height, Amount fees, AddressId miner, SimTime timestamp,
                          const ChainParams& params) {
    Transaction tx;
    tx.coinbase_height = height;
    tx.timestamp = timestamp;
    Amount total = subsidy(height, params) + fees;
    if (total > 0) tx.outputs.push_back({miner, total});
    tx.txid = compute_txid(tx);
    return tx;
}

std::vector<Transaction> select_txs(std::span<const Transaction> mempool, const UtxoSet& utxo,
                                    const ChainParams& params) {
    struct Candidate {
        Amount fee;
        const Transaction* tx;
    };
    std::vector<Candidate> candidates;
    for (const auto& tx : mempool) {
        auto v = validate_transaction(tx, utxo);
        if (v) candidates.push_back({v.fee, &tx});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fee != b.fee) return a.fee > b.fee;
        return a.tx->txid < b.tx->txid;
    });

    const std::size_t capacity = params.max_block_txs - 1;
    std::set<Outpoint> used;
    std::vector<Transaction> picked;
    for (const auto& c : candidates) {
        if (picked.size() >= capacity) break;
        bool conflict = std::any_of(c.tx->inputs.begin(), c.tx->inputs.end(),
                                    [&](const TxInput& in) { return used.count(in.outpoint) != 0; });
        if (conflict) continue;
        for (const auto& in : c.tx->inputs) used.insert(in.outpoint);
        picked.push_back(*c.tx);
    }
    return picked;
}

U256 retarget_target(const U256& old_target, SimTime actual_duration, const ChainParams& params) {
    const Work expected = Work(params.retarget_window) * params.target_block_interval;
    const Work actual = actual_duration;
    const Work clamp = params.retarget_clamp;
    Work next;
    if (actual * clamp <= expected)
        next = Work(old_target) / clamp;
    else if (actual >= expected * clamp)
        next = Work(old_target) * clamp;
    else
        next = Work(old_target) * actual / expected;
    if (next > Work(params.initial_target)) next = Work(params.initial_target);
    if (next < 1) next = 1;
    return next.convert_to<U256>();
}

const char* to_string(ConnectStatus s) {
    switch (s) {
        case ConnectStatus::Accepted: return "accepted";
        case ConnectStatus::Orphaned: return "orphaned";
        case ConnectStatus::Rejected: return "rejected";
        case ConnectStatus::Duplicate: return "duplicate";
    }
    return "unknown";
}

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::BadPow: return "BadPow";
        case RejectReason::BadTarget: return "BadTarget";
        case RejectReason::BadTx: return "BadTx";
        case RejectReason::BadCoinbase: return "BadCoinbase";
        case RejectReason::BadCommitment: return "BadCommitment";
        case RejectReason::TooManyTxs: return "TooManyTxs";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// BlockTree
// ---------------------------------------------------------------------------

Block BlockTree::make_genesis(const ChainParams& params, std::vector<TxOutput> allocation, SimTime timestamp) {
    Block genesis;
    genesis.coinbase.coinbase_height = 0;
    genesis.coinbase.timestamp = timestamp;
    genesis.coinbase.outputs = allocation.empty() ? std::vector<TxOutput>{{0, subsidy(0, params)}}
                                                  : std::move(allocation);
    genesis.coinbase.txid = compute_txid(genesis.coinbase);
    genesis.header.timestamp = timestamp;
    genesis.header.target = params.initial_target;
    genesis.header.tx_commitment = tx_commitment(genesis.coinbase, {});
    return genesis;
}

BlockTree::BlockTree(ChainParams params, Block genesis) : params_(std::move(params)) {
    params_.validate();
    BlockNode n;
    n.hash = genesis.hash();
    n.height = 0;
    n.chain_work = block_work(genesis.header.target);
    n.seq = next_seq_++;
    n.block = std::move(genesis);
    for (const auto& tx : n.block.txs) utxo_.apply(tx);
    utxo_.apply(n.block.coinbase);
    n.undo.resize(n.block.txs.size());
    genesis_ = tip_ = n.hash;
    tx_index_[n.block.coinbase.txid].push_back(n.hash);
    best_chain_.push_back(n.hash);
    nodes_.emplace(n.hash, std::move(n));
}

const BlockNode* BlockTree::find(const Hash256& hash) const {
    auto it = nodes_.find(hash);
    return it == nodes_.end() ? nullptr : &it->second;
}

const BlockNode& BlockTree::node(const Hash256& hash) const {
    auto it = nodes_.find(hash);
    if (it == nodes_.end()) throw std::out_of_range("unknown block " + hash.hex());
    return it->second;
}

bool BlockTree::is_orphan(const Hash256& hash) const {
    for (const auto& [parent, blocks] : orphans_)
        for (const auto& b : blocks)
            if (b.hash() == hash) return true;
    return false;
}

std::size_t BlockTree::orphan_count() const {
    std::size_t n = 0;
    for (const auto& [parent, blocks] : orphans_) n += blocks.size();
    return n;
}

std::vector<const Block*> BlockTree::best_chain_blocks() const {
    std::vector<const Block*> out;
    out.reserve(best_chain_.size());
    for (const auto& h : best_chain_) out.push_back(&node(h).block);
    return out;
}

bool BlockTree::on_best_chain(const Hash256& hash) const {
    const BlockNode* n = find(hash);
    if (!n || n->height >= static_cast<std::int64_t>(best_chain_.size())) return false;
    return best_chain_[n->height] == hash;
}

std::vector<Hash256> BlockTree::leaves() const {
    std::vector<Hash256> out;
    for (const auto& [hash, n] : nodes_)
        if (n.children.empty()) out.push_back(hash);
    std::sort(out.begin(), out.end(), [&](const Hash256& a, const Hash256& b) { return node(a).seq < node(b).seq; });
    return out;
}

Hash256 BlockTree::ancestor(const Hash256& hash, std::int64_t height) const {
    const BlockNode* n = &node(hash);
    if (height < 0 || height > n->height) throw std::out_of_range("ancestor height out of range");
    if (on_best_chain(hash)) return best_chain_[height];
    while (n->height > height) {
        if (on_best_chain(n->hash)) return best_chain_[height];
        n = &node(n->block.header.prev_hash);
    }
    return n->hash;
}

void BlockTree::apply_block(UtxoSet& utxo, const BlockNode& n) {
    for (const auto& tx : n.block.txs) utxo.apply(tx);
    utxo.apply(n.block.coinbase);
}

void BlockTree::undo_block(UtxoSet& utxo, const BlockNode& n) {
    utxo.undo(n.block.coinbase, {});
    for (std::size_t i = n.block.txs.size(); i-- > 0;) utxo.undo(n.block.txs[i], n.undo[i]);
}

UtxoSet BlockTree::utxo_at(const Hash256& hash) const {
    if (hash == tip_) return utxo_;
    const BlockNode* target = &node(hash);
    UtxoSet utxo = utxo_;

    // Rewind the best chain down to the fork point, then replay the side branch.
    Hash256 fork = ancestor(hash, std::min(target->height, height()));
    while (!on_best_chain(fork)) fork = node(fork).block.header.prev_hash;
    const std::int64_t fork_height = node(fork).height;
    for (std::int64_t h = height(); h > fork_height; --h) undo_block(utxo, node(best_chain_[h]));

    std::vector<const BlockNode*> path;
    for (const BlockNode* n = target; n->height > fork_height; n = &node(n->block.header.prev_hash)) path.push_back(n);
    for (auto it = path.rbegin(); it != path.rend(); ++it) apply_block(utxo, **it);
    return utxo;
}

std::optional<SimTime> BlockTree::window_duration(const Hash256& parent) const {
    const BlockNode& p = node(parent);
    const std::int64_t h = p.height + 1;
    if (!params_.retarget_enabled || h % params_.retarget_window != 0) return std::nullopt;
    // The closing window is heights [h - window, h - 1]; measure from the block
    // just before it so the span covers `window` intervals.
    const std::int64_t ref_height = std::max<std::int64_t>(0, h - params_.retarget_window - 1);
    return p.block.header.timestamp - node(ancestor(parent, ref_height)).block.header.timestamp;
}

U256 BlockTree::next_target(const Hash256& parent) const {
    const BlockNode& p = node(parent);
    auto duration = window_duration(parent);
    if (!duration) return p.block.header.target;
    return retarget_target(p.block.header.target, *duration, params_);
}

Block BlockTree::assemble_block(const Hash256& parent, AddressId miner, std::vector<Transaction> txs,
                                SimTime timestamp) const {
    const BlockNode& p = node(parent);
    UtxoSet utxo = utxo_at(parent);
    Amount fees = 0;
    for (const auto& tx : txs) {
        fees += fee(tx, utxo);
        utxo.apply(tx);
    }
    Block b;
    b.coinbase = make_coinbase(p.height + 1, fees, miner, timestamp, params_);
    b.txs = std::move(txs);
    b.header.prev_hash = parent;
    b.header.tx_commitment = tx_commitment(b.coinbase, b.txs);
    b.header.timestamp = timestamp;
    b.header.target = next_target(parent);
    return b;
}

std::optional<RejectReason> BlockTree::check_block(const Block& block, const BlockNode& parent, UtxoSet& utxo,
                                                   std::vector<std::vector<TxOutput>>& undo) const {
    const std::int64_t height = parent.height + 1;
    if (block.txs.size() + 1 > params_.max_block_txs) return RejectReason::TooManyTxs;
    if (block.header.tx_commitment != tx_commitment(block.coinbase, block.txs)) return RejectReason::BadCommitment;
    if (params_.verify_pow && !check_pow(block.header)) return RejectReason::BadPow;
    if (block.header.target != next_target(parent.hash)) return RejectReason::BadTarget;

    const auto& cb = block.coinbase;
    if (!cb.is_coinbase() || cb.coinbase_height != height) return RejectReason::BadCoinbase;
    for (const auto& out : cb.outputs)
        if (out.amount <= 0) return RejectReason::BadCoinbase;

    utxo = utxo_at(parent.hash);
    Amount fees = 0;
    undo.clear();
    undo.reserve(block.txs.size());
    for (const auto& tx : block.txs) {
        if (tx.coinbase_height || compute_txid(tx) != tx.txid) return RejectReason::BadTx;
        auto v = validate_transaction(tx, utxo);
        if (!v) return RejectReason::BadTx;
        std::vector<TxOutput> spent;
        spent.reserve(tx.inputs.size());
        for (const auto& in : tx.inputs) spent.push_back(*utxo.find(in.outpoint));
        utxo.apply(tx);
        undo.push_back(std::move(spent));
        fees += v.fee;
    }
    if (compute_txid(cb) != cb.txid) return RejectReason::BadCoinbase;
    if (cb.output_total() != subsidy(height, params_) + fees) return RejectReason::BadCoinbase;
    utxo.apply(cb);
    return std::nullopt;
}

void BlockTree::set_tip(const Hash256& hash, UtxoSet utxo, ConnectResult& result) {
    const BlockNode& n = node(hash);
    Hash256 fork = n.block.header.prev_hash;
    while (!on_best_chain(fork)) fork = node(fork).block.header.prev_hash;
    const std::int64_t fork_height = node(fork).height;

    result.reorg_depth = std::max<std::size_t>(result.reorg_depth, static_cast<std::size_t>(height() - fork_height));
    result.tip_changed = true;

    best_chain_.resize(fork_height + 1);
    std::vector<Hash256> path;
    for (const BlockNode* p = &n; p->height > fork_height; p = &node(p->block.header.prev_hash)) path.push_back(p->hash);
    best_chain_.insert(best_chain_.end(), path.rbegin(), path.rend());
    tip_ = hash;
    utxo_ = std::move(utxo);
}

ConnectResult BlockTree::connect_one(const Block& block, const Hash256& hash) {
    ConnectResult result;
    const BlockNode& parent = node(block.header.prev_hash);
    UtxoSet utxo;
    std::vector<std::vector<TxOutput>> undo;
    if (auto reason = check_block(block, parent, utxo, undo)) {
        result.status = ConnectStatus::Rejected;
        result.reason = reason;
        return result;
    }

    BlockNode n;
    n.block = block;
    n.hash = hash;
    n.height = parent.height + 1;
    n.chain_work = parent.chain_work + block_work(block.header.target);
    n.seq = next_seq_++;
    n.undo = std::move(undo);
    nodes_.at(block.header.prev_hash).children.push_back(hash);
    tx_index_[block.coinbase.txid].push_back(hash);
    for (const auto& tx : block.txs) tx_index_[tx.txid].push_back(hash);
    const bool better = n.chain_work > tip_work();
    nodes_.emplace(hash, std::move(n));

    result.connected.push_back(hash);
    if (better) set_tip(hash, std::move(utxo), result);
    return result;
}

ConnectResult BlockTree::connect_block(const Block& block) {
    const Hash256 hash = block.hash();
    if (contains(hash) || is_orphan(hash)) return ConnectResult{ConnectStatus::Duplicate, {}, false, 0, {}};
    if (!contains(block.header.prev_hash)) {
        orphans_[block.header.prev_hash].push_back(block);
        return ConnectResult{ConnectStatus::Orphaned, {}, false, 0, {}};
    }

    ConnectResult result = connect_one(block, hash);
    if (result.status != ConnectStatus::Accepted) return result;

    std::deque<Hash256> ready{hash};
    while (!ready.empty()) {
        Hash256 parent = ready.front();
        ready.pop_front();
        auto it = orphans_.find(parent);
        if (it == orphans_.end()) continue;
        std::vector<Block> waiting = std::move(it->second);
        orphans_.erase(it);
        for (const auto& child : waiting) {
            ConnectResult r = connect_one(child, child.hash());
            if (r.status != ConnectStatus::Accepted) continue;
            result.tip_changed |= r.tip_changed;
            result.reorg_depth = std::max(result.reorg_depth, r.reorg_depth);
            result.connected.insert(result.connected.end(), r.connected.begin(), r.connected.end());
            ready.push_back(r.connected.front());
        }
    }
    return result;
}

std::int64_t BlockTree::confirmations(const TxId& txid) const {
    auto it = tx_index_.find(txid);
    if (it == tx_index_.end()) return 0;
    for (const auto& hash : it->second)
        if (on_best_chain(hash)) return height() - node(hash).height + 1;
    return 0;
}

bool BlockTree::is_confirmed(const TxId& txid) const { return confirmations(txid) >= params_.confirmation_depth; }

}  // namespace bclab
