#include "bclab/mining.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace bclab {

namespace {

double ratio(const U256& num, const U256& den) { return num.convert_to<double>() / den.convert_to<double>(); }

}  // namespace

MiningRun mine_chain(const ChainParams& params, const MiningConfig& config) {
    ChainParams p = params;
    if (config.abstract_time) p.verify_pow = false;

    MiningRun run{BlockTree(p, BlockTree::make_genesis(p, {}, 0)), {}, {}};
    std::mt19937_64 rng(config.seed);

    const double base_rate =
        config.hashrate > 0 ? config.hashrate : expected_attempts(p.initial_target) / static_cast<double>(p.target_block_interval);
    double clock = 0;

    for (std::size_t i = 0; i < config.blocks; ++i) {
        const Hash256 parent = run.tree.tip();
        const std::int64_t height = run.tree.height() + 1;
        const double rate = (config.hashrate_change_height && height >= *config.hashrate_change_height)
                                ? base_rate * config.hashrate_factor
                                : base_rate;

        if (auto duration = run.tree.window_duration(parent)) {
            RetargetEvent ev;
            ev.height = height;
            ev.actual_duration = *duration;
            ev.expected_duration = p.retarget_window * p.target_block_interval;
            ev.raw_ratio = static_cast<double>(ev.actual_duration) / static_cast<double>(ev.expected_duration);
            ev.old_target = run.tree.node(parent).block.header.target;
            ev.new_target = run.tree.next_target(parent);
            ev.applied_ratio = ratio(ev.new_target, ev.old_target);
            run.retargets.push_back(ev);
        }

        MinedBlockStats stats;
        stats.height = height;
        Block block;
        if (config.abstract_time) {
            std::exponential_distribution<double> wait(rate / expected_attempts(run.tree.next_target(parent)));
            stats.duration = wait(rng);
            clock += stats.duration;
            block = run.tree.assemble_block(parent, config.miner, {}, static_cast<SimTime>(std::floor(clock)));
            stats.attempts = static_cast<std::uint64_t>(stats.duration * rate);
        } else {
            // The header carries the time mining started; an exhausted nonce
            // space bumps it by one second and starts over from zero. The
            // seeded first nonce makes runs with different seeds independent.
            SimTime ts = static_cast<SimTime>(std::floor(clock));
            auto first = static_cast<std::uint32_t>(rng());
            for (;;) {
                block = run.tree.assemble_block(parent, config.miner, {}, ts);
                MineResult r = mine_block(block.header, first, std::numeric_limits<std::uint32_t>::max());
                first = 0;
                stats.attempts += r.attempts;
                if (r.nonce) {
                    block.header.nonce = *r.nonce;
                    break;
                }
                ++ts;
            }
            stats.duration = static_cast<double>(stats.attempts) / rate;
            clock += stats.duration;
        }
        stats.timestamp = block.header.timestamp;
        auto result = run.tree.connect_block(block);
        if (result.status != ConnectStatus::Accepted)
            throw std::logic_error(std::string("mined block rejected: ") + (result.reason ? to_string(*result.reason) : ""));
        run.blocks.push_back(stats);
    }
    return run;
}

AttackOutcome simulate_private_attack(const AttackConfig& config, std::uint64_t seed) {
    constexpr AddressId kHonest = 1;
    constexpr AddressId kAdversary = 2;

    ChainParams p;
    p.verify_pow = false;
    p.retarget_enabled = false;
    p.target_block_interval = config.block_interval;

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> wait(1.0 / static_cast<double>(config.block_interval));
    std::bernoulli_distribution adversary_finds(config.adversary_share);

    BlockTree honest(p, BlockTree::make_genesis(p, {}, 0));
    double clock = 0;
    auto next_ts = [&] {
        clock += wait(rng);
        return static_cast<SimTime>(std::floor(clock));
    };
    for (std::int64_t i = 0; i <= config.start_deficit; ++i) {
        auto r = honest.connect_block(honest.assemble_block(honest.tip(), kHonest, {}, next_ts()));
        (void)r;
    }

    BlockTree adversary = honest;
    Hash256 private_tip = honest.ancestor(honest.tip(), honest.height() - config.start_deficit);
    const std::int64_t fork_height = adversary.node(private_tip).height;
    std::vector<Block> withheld;

    AttackOutcome outcome;
    while (outcome.blocks_mined < config.max_blocks) {
        const SimTime ts = next_ts();
        ++outcome.blocks_mined;
        if (adversary_finds(rng)) {
            Block b = adversary.assemble_block(private_tip, kAdversary, {}, ts);
            adversary.connect_block(b);
            private_tip = b.hash();
            withheld.push_back(std::move(b));
        } else {
            Block b = honest.assemble_block(honest.tip(), kHonest, {}, ts);
            honest.connect_block(b);
            adversary.connect_block(b);
        }

        const std::int64_t honest_lead = honest.height() - fork_height;
        const std::int64_t private_len = adversary.node(private_tip).height - fork_height;
        if (adversary.node(private_tip).chain_work > honest.tip_work() && honest_lead >= config.min_reorg_depth) {
            for (const auto& b : withheld) {
                auto r = honest.connect_block(b);
                outcome.reorg_depth = std::max(outcome.reorg_depth, r.reorg_depth);
            }
            outcome.overtook = honest.tip() == private_tip;
            break;
        }
        if (honest_lead - private_len > config.give_up_deficit) break;
    }
    outcome.elapsed = clock;
    return outcome;
}

}  // namespace bclab
