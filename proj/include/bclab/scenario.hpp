#pragma once

#include "bclab/consensus.hpp"
#include "bclab/random.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace bclab {

/// Behavioural knobs of one simulated user or organisation.
struct EntityProfile {
    EntityId id = 0;
    /// Chance a payment to this entity lands on one of its existing addresses.
    double reuse = 0;
    /// Chance the entity sends change to a fresh address rather than back to an input address.
    double fresh_change = 1;
    /// Chance an activation starts a peeling chain from the entity's largest coin.
    double peeling = 0;
    /// Chance an activation starts a coinjoin instead of a payment.
    double coinjoin = 0;
    /// Payments sent per simulated hour.
    double activity = 1;
    /// Chance an activation sends two near-equal payments from two of its addresses at once.
    double paired_sends = 0;
    std::uint32_t home_peer = 0;

    /// Throws std::invalid_argument when a probability leaves [0, 1] or activity is negative.
    void validate() const;
};

struct PeelPlan {
    std::size_t length = 5;
    double fraction = 0.1;
    Amount fund = 10 * kCoin;
};

enum class FundingMode { Faucet, Mining };

struct ScenarioConfig {
    std::size_t entities = 50;
    std::size_t transactions = 1000;
    /// Entities are spread round-robin over this many network peers.
    std::uint32_t peers = 1;
    /// Applied to every regular entity unless `profiles` overrides it.
    EntityProfile defaults;
    /// Per-entity overrides, matched by id (1-based).
    std::vector<EntityProfile> profiles;
    std::size_t coinjoin_min = 3;
    std::size_t coinjoin_max = 5;
    /// Chains planted on dedicated entities that do nothing else.
    std::vector<PeelPlan> peel_chains;
    /// Shape of chains started through EntityProfile::peeling.
    PeelPlan peel_defaults;
    FundingMode funding = FundingMode::Faucet;
    std::size_t funding_outputs = 4;
    Amount funding_min = 1 * kCoin;
    Amount funding_max = 20 * kCoin;
    Amount fee = 1000;
    /// Fraction of regular entities with one publicly labelled address.
    double marked_fraction = 0;
    /// Pick payees in proportion to the payments they already received (rich get richer).
    bool preferential = false;
    /// Ordinary payments never look like peel links at or below this fraction.
    double peel_guard = 0.2;
    ChainParams chain = default_chain();
    std::uint64_t seed = 1;

    static ChainParams default_chain();
    void validate() const;
};

struct PeelChainTruth {
    EntityId entity = 0;
    std::vector<TxId> txids;
};

struct GroundTruth {
    std::map<AddressId, EntityId> owner;
    std::map<TxId, std::uint32_t> origin_peer;
    /// Addresses with a publicly known owner ("green" addresses).
    std::map<AddressId, EntityId> marked;
    std::set<TxId> coinjoins;
    std::vector<PeelChainTruth> peel_chains;
};

/// Entity id of the block producer; it only ever receives coinbases.
inline constexpr EntityId kMinerEntity = 0;

struct Scenario {
    ScenarioConfig config;
    std::vector<EntityProfile> profiles;
    /// Genesis first; every block validated by a BlockTree during generation.
    std::vector<Block> chain;
    GroundTruth truth;

    /// Non-coinbase transactions in chain order.
    [[nodiscard]] std::vector<const Transaction*> transactions() const;
};

/// Builds a valid chain of user activity with full ground truth. Throws
/// std::invalid_argument when the entities cannot fund the requested volume.
Scenario generate(const ScenarioConfig& config);

/// A coin the participant brings to a coinjoin.
struct OwnedCoin {
    Outpoint outpoint;
    AddressId address = 0;
    Amount amount = 0;
};

struct CoinjoinParticipant {
    EntityId entity = 0;
    std::vector<OwnedCoin> coins;
    AddressId mixed_output = 0;
    AddressId change_output = 0;
};

/// One transaction with every participant's coins as inputs, one output of
/// `denomination` per participant and change where left over. Needs at least
/// two distinct entities; throws std::invalid_argument otherwise or when a
/// participant cannot cover denomination plus `fee_each`.
Transaction make_coinjoin(std::span<const CoinjoinParticipant> participants, Amount denomination, Amount fee_each,
                          SimTime timestamp, Rng& rng);

/// Length-`plan.length` chain of 1-in/2-out transactions starting at `start`.
/// Each step peels at most `plan.fraction` of its input to a recipient from
/// `peel_to` and sends the rest, fee-free, to a fresh address from
/// `next_change`. Throws std::invalid_argument when the coin is too small to
/// peel at every step.
std::vector<Transaction> plant_peeling_chain(const OwnedCoin& start, const PeelPlan& plan,
                                             const std::function<AddressId()>& next_change,
                                             const std::function<AddressId()>& peel_to, SimTime timestamp,
                                             SimTime spacing, Rng& rng);

}  // namespace bclab
