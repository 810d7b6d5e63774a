#pragma once

#include "bclab/hash.hpp"
#include "bclab/ledger.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace bclab {

/// Coin-age wealth; amount x age overflows 64 bits for old, large holdings.
using Wealth = boost::multiprecision::int128_t;

struct CoinAgeRecord {
    Outpoint outpoint;
    Amount amount = 0;
    std::int64_t birth_height = 0;
};

/// amount x (current_height - birth_height)
Wealth coin_age(const CoinAgeRecord& record, std::int64_t current_height);

struct StakeCandidate {
    Hash256 block_hash;
    Hash256 parent;
    AddressId miner = 0;
    std::vector<CoinAgeRecord> records;
};

enum class StakeReject {
    UnknownParent,
    /// The record's coins were already sacrificed on this branch and it claims a stale birth height.
    ResetRecord,
    DuplicateRecord,
    FutureBirth,
};

const char* to_string(StakeReject r);

struct StakeSelection {
    std::optional<std::size_t> winner;
    /// Per candidate: rejection reason, or nullopt when eligible.
    std::vector<std::optional<StakeReject>> verdicts;
    std::vector<Wealth> wealth;
};

/// Tracks which coins each Proof-of-Stake branch has already sacrificed.
///
/// Age is measured against the parent's height, so a record born at height
/// h offered on a parent at height h + 2 is two blocks old. The winning
/// block resets every record it offered to its own height on its branch
/// only; sibling branches keep the old ages, which is what lets a miner
/// back every fork with the same coins.
class StakeLedger {
public:
    explicit StakeLedger(const Hash256& genesis);

    [[nodiscard]] bool contains(const Hash256& block) const { return nodes_.count(block) != 0; }
    [[nodiscard]] std::int64_t height(const Hash256& block) const;
    /// Height at which `op` was last sacrificed on the branch ending at `tip`.
    [[nodiscard]] std::optional<std::int64_t> reset_height(const Hash256& tip, const Outpoint& op) const;

    /// Validates the candidates, picks the highest wealth (ties to the lower
    /// block hash) and appends the winner to its parent's branch.
    StakeSelection select(std::span<const StakeCandidate> candidates);

private:
    struct Node {
        Hash256 parent;
        std::int64_t height = 0;
        std::map<Outpoint, std::int64_t> resets;
    };

    [[nodiscard]] std::optional<StakeReject> check(const StakeCandidate& c) const;

    std::unordered_map<Hash256, Node> nodes_;
};

}  // namespace bclab
