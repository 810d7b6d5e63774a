#pragma once

#include "bclab/hash.hpp"
#include "bclab/ledger.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace bclab {

using U256 = boost::multiprecision::uint256_t;
/// Unbounded integer for cumulative work, which exceeds 256 bits at the top end.
using Work = boost::multiprecision::cpp_int;

U256 to_u256(const Hash256& h);
Hash256 from_u256(const U256& v);
U256 max_target();
/// 2^bits, or the maximal target for bits >= 256.
U256 target_from_bits(unsigned bits);
/// Expected hash attempts to satisfy `target`: 2^256 / (target + 1).
Work block_work(const U256& target);
double expected_attempts(const U256& target);

struct ChainParams {
    SimTime target_block_interval = 600;
    std::int64_t retarget_window = 2016;
    /// Cap on transactions per block, coinbase included.
    std::size_t max_block_txs = 2000;
    Amount initial_subsidy = 50 * kCoin;
    std::int64_t halving_interval = 210'000;
    std::int64_t confirmation_depth = 6;
    U256 initial_target = target_from_bits(240);
    std::uint32_t retarget_clamp = 4;
    bool retarget_enabled = true;
    /// Off for abstract-time runs, where block discovery is sampled rather than hashed.
    bool verify_pow = true;

    /// Throws std::invalid_argument on non-positive fields or clamp <= 1.
    void validate() const;
};

struct BlockHeader {
    Hash256 prev_hash;
    Hash256 tx_commitment;
    SimTime timestamp = 0;
    U256 target;
    std::uint32_t nonce = 0;
};

inline constexpr std::size_t kHeaderBytes = 32 + 32 + 8 + 32 + 4;

/// prev_hash | tx_commitment | timestamp | target | nonce, fixed-width big-endian.
std::array<std::uint8_t, kHeaderBytes> serialize_header(const BlockHeader& header);
Hash256 block_hash(const BlockHeader& header);
bool check_pow(const BlockHeader& header);

struct Block {
    BlockHeader header;
    Transaction coinbase;
    std::vector<Transaction> txs;

    [[nodiscard]] Hash256 hash() const { return block_hash(header); }
};

/// Hash of the concatenated txids, coinbase first.
Hash256 tx_commitment(const Transaction& coinbase, std::span<const Transaction> txs);

struct MineResult {
    std::optional<std::uint32_t> nonce;
    std::uint64_t attempts = 0;
};

/// Scans nonces first..last (inclusive) and returns the first that passes
/// check_pow. An empty `nonce` means the range was exhausted.
MineResult mine_block(const BlockHeader& tmpl, std::uint32_t first, std::uint32_t last);

Amount subsidy(std::int64_t height, const ChainParams& params);
/// Closed-form sum of subsidy over every height.
Amount total_issuance(const ChainParams& params);

Transaction make_coinbase(std::int64_t height, Amount fees, AddressId miner, SimTime timestamp,
                          const ChainParams& params);

/// Greedy fee-ordered pick of at most max_block_txs - 1 non-conflicting transactions.
std::vector<Transaction> select_txs(std::span<const Transaction> mempool, const UtxoSet& utxo,
                                    const ChainParams& params);

/// Applies the clamped ratio rule to `old_target` given the measured window duration.
U256 retarget_target(const U256& old_target, SimTime actual_duration, const ChainParams& params);

enum class ConnectStatus { Accepted, Orphaned, Rejected, Duplicate };
enum class RejectReason { BadPow, BadTarget, BadTx, BadCoinbase, BadCommitment, TooManyTxs };

const char* to_string(ConnectStatus s);
const char* to_string(RejectReason r);

struct ConnectResult {
    ConnectStatus status = ConnectStatus::Accepted;
    std::optional<RejectReason> reason;
    bool tip_changed = false;
    /// Blocks removed from the best chain by the largest reorg this call caused.
    std::size_t reorg_depth = 0;
    /// Blocks inserted into the tree: the block itself plus any adopted orphans.
    std::vector<Hash256> connected;
};

struct BlockNode {
    Block block;
    Hash256 hash;
    std::int64_t height = 0;
    Work chain_work;
    /// Arrival order, used to break cumulative-work ties.
    std::uint64_t seq = 0;
    std::vector<Hash256> children;
    /// Outputs spent by each entry of block.txs, in input order.
    std::vector<std::vector<TxOutput>> undo;
};

class BlockTree {
public:
    BlockTree(ChainParams params, Block genesis);

    /// Genesis with an arbitrary allocation in its coinbase; not subsidy-checked.
    static Block make_genesis(const ChainParams& params, std::vector<TxOutput> allocation, SimTime timestamp = 0);

    ConnectResult connect_block(const Block& block);

    [[nodiscard]] const ChainParams& params() const { return params_; }
    [[nodiscard]] const Hash256& genesis() const { return genesis_; }
    [[nodiscard]] const Hash256& tip() const { return tip_; }
    [[nodiscard]] const BlockNode& tip_node() const { return node(tip_); }
    [[nodiscard]] std::int64_t height() const { return tip_node().height; }
    [[nodiscard]] const Work& tip_work() const { return tip_node().chain_work; }

    [[nodiscard]] bool contains(const Hash256& hash) const { return nodes_.count(hash) != 0; }
    [[nodiscard]] bool is_orphan(const Hash256& hash) const;
    [[nodiscard]] const BlockNode* find(const Hash256& hash) const;
    /// Throws std::out_of_range for unknown hashes.
    [[nodiscard]] const BlockNode& node(const Hash256& hash) const;

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] std::size_t orphan_count() const;
    /// Blocks in the tree that are not on the best chain.
    [[nodiscard]] std::size_t stale_count() const { return size() - best_chain_.size(); }

    /// Best chain hashes from genesis to tip.
    [[nodiscard]] const std::vector<Hash256>& best_chain() const { return best_chain_; }
    [[nodiscard]] std::vector<const Block*> best_chain_blocks() const;
    [[nodiscard]] bool on_best_chain(const Hash256& hash) const;
    [[nodiscard]] std::vector<Hash256> leaves() const;
    /// Ancestor of `hash` at `height` (which must not exceed the block's height).
    [[nodiscard]] Hash256 ancestor(const Hash256& hash, std::int64_t height) const;

    [[nodiscard]] const UtxoSet& utxo() const { return utxo_; }
    /// UTXO state after the block `hash`, reconstructed from the tip via undo data.
    [[nodiscard]] UtxoSet utxo_at(const Hash256& hash) const;

    /// Target required of a child of `parent`.
    [[nodiscard]] U256 next_target(const Hash256& parent) const;
    /// Measured duration of the window closing at `parent`, when its child is a retarget height.
    [[nodiscard]] std::optional<SimTime> window_duration(const Hash256& parent) const;

    /// Child template for `parent`: coinbase paying subsidy plus fees of
    /// `txs` to `miner`, prescribed target, nonce 0. `txs` must be valid in order.
    [[nodiscard]] Block assemble_block(const Hash256& parent, AddressId miner, std::vector<Transaction> txs,
                                       SimTime timestamp) const;

    /// 0 when the transaction is not on the best chain, else depth from the tip (tip = 1).
    [[nodiscard]] std::int64_t confirmations(const TxId& txid) const;
    [[nodiscard]] bool is_confirmed(const TxId& txid) const;

private:
    std::optional<RejectReason> check_block(const Block& block, const BlockNode& parent,
                                            UtxoSet& utxo, std::vector<std::vector<TxOutput>>& undo) const;
    ConnectResult connect_one(const Block& block, const Hash256& hash);
    void set_tip(const Hash256& hash, UtxoSet utxo, ConnectResult& result);
    static void apply_block(UtxoSet& utxo, const BlockNode& n);
    static void undo_block(UtxoSet& utxo, const BlockNode& n);

    ChainParams params_;
    Hash256 genesis_;
    Hash256 tip_;
    std::unordered_map<Hash256, BlockNode> nodes_;
    std::unordered_map<Hash256, std::vector<Block>> orphans_;  // keyed by missing parent
    std::unordered_map<TxId, std::vector<Hash256>> tx_index_;
    std::vector<Hash256> best_chain_;
    UtxoSet utxo_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace bclab
