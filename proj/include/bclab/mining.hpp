#pragma once

#include "bclab/consensus.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bclab {

/// Drives a single honest miner over a fresh chain.
///
/// Real-PoW mode hashes every attempt and advances the simulated clock by
/// attempts / hashrate. Abstract-time mode skips hashing and samples each
/// inter-block time from an exponential with mean work(target) / hashrate,
/// which is what the retarget experiments need at thousands of blocks.
struct MiningConfig {
    std::size_t blocks = 10;
    bool abstract_time = false;
    /// Hashes per simulated second; 0 derives it from initial target and interval.
    double hashrate = 0;
    /// Multiplies the hashrate by `hashrate_factor` from this height on.
    std::optional<std::int64_t> hashrate_change_height;
    double hashrate_factor = 2.0;
    AddressId miner = 1;
    std::uint64_t seed = 1;
};

struct MinedBlockStats {
    std::int64_t height = 0;
    std::uint64_t attempts = 0;
    SimTime timestamp = 0;
    /// Simulated seconds spent finding this block.
    double duration = 0;
};

struct RetargetEvent {
    std::int64_t height = 0;
    SimTime actual_duration = 0;
    SimTime expected_duration = 0;
    /// actual / expected before clamping.
    double raw_ratio = 0;
    /// new_target / old_target after clamping and the initial-target cap.
    double applied_ratio = 0;
    U256 old_target;
    U256 new_target;
};

struct MiningRun {
    BlockTree tree;
    std::vector<MinedBlockStats> blocks;
    std::vector<RetargetEvent> retargets;
};

MiningRun mine_chain(const ChainParams& params, const MiningConfig& config);

/// Abstract-time private-mining race against an honest majority.
///
/// The adversary forks `start_deficit` blocks below the honest tip and mines
/// in private. It publishes once its branch has strictly more work than the
/// honest chain and the honest side has at least `min_reorg_depth` blocks
/// past the fork. It gives up when it falls `give_up_deficit` blocks behind
/// or after `max_blocks` blocks have been found in total.
struct AttackConfig {
    double adversary_share = 0.3;
    std::int64_t start_deficit = 2;
    std::int64_t min_reorg_depth = 0;
    std::size_t max_blocks = 100;
    std::int64_t give_up_deficit = 20;
    SimTime block_interval = 600;
};

struct AttackOutcome {
    bool overtook = false;
    std::size_t reorg_depth = 0;
    std::size_t blocks_mined = 0;
    double elapsed = 0;
};

AttackOutcome simulate_private_attack(const AttackConfig& config, std::uint64_t seed);

}  // namespace bclab
