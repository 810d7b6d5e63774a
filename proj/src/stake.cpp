#include "bclab/stake.hpp"

#include <set>
#include <stdexcept>

namespace bclab {

Wealth coin_age(const CoinAgeRecord& record, std::int64_t current_height) {
    return Wealth(record.amount) * (current_height - record.birth_height);
}

const char* to_string(StakeReject r) {
    switch (r) {
        case StakeReject::UnknownParent: return "UnknownParent";
        case StakeReject::ResetRecord: return "ResetRecord";
        case StakeReject::DuplicateRecord: return "DuplicateRecord";
        case StakeReject::FutureBirth: return "FutureBirth";
    }
    return "Unknown";
}

StakeLedger::StakeLedger(const Hash256& genesis) { nodes_[genesis] = Node{}; }

std::int64_t StakeLedger::height(const Hash256& block) const {
    auto it = nodes_.find(block);
    if (it == nodes_.end()) throw std::out_of_range("unknown stake block");
    return it->second.height;
}

std::optional<std::int64_t> StakeLedger::reset_height(const Hash256& tip, const Outpoint& op) const {
    for (auto it = nodes_.find(tip); it != nodes_.end();) {
        const Node& n = it->second;
        if (auto r = n.resets.find(op); r != n.resets.end()) return r->second;
        if (n.height == 0) break;
        it = nodes_.find(n.parent);
    }
    return std::nullopt;
}

std::optional<StakeReject> StakeLedger::check(const StakeCandidate& c) const {
    if (!contains(c.parent)) return StakeReject::UnknownParent;
    const std::int64_t now = height(c.parent);
    std::set<Outpoint> seen;
    for (const auto& r : c.records) {
        if (!seen.insert(r.outpoint).second) return StakeReject::DuplicateRecord;
        if (r.birth_height > now) return StakeReject::FutureBirth;
        if (auto reset = reset_height(c.parent, r.outpoint); reset && r.birth_height != *reset)
            return StakeReject::ResetRecord;
    }
    return std::nullopt;
}

StakeSelection StakeLedger::select(std::span<const StakeCandidate> candidates) {
    StakeSelection sel;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        sel.verdicts.push_back(check(c));
        Wealth w = 0;
        if (!sel.verdicts.back()) {
            const std::int64_t now = height(c.parent);
            for (const auto& r : c.records) w += coin_age(r, now);
        }
        sel.wealth.push_back(w);
        if (sel.verdicts.back()) continue;
        if (!sel.winner || w > sel.wealth[*sel.winner] ||
            (w == sel.wealth[*sel.winner] && c.block_hash < candidates[*sel.winner].block_hash))
            sel.winner = i;
    }
    if (sel.winner) {
        const auto& c = candidates[*sel.winner];
        Node n;
        n.parent = c.parent;
        n.height = height(c.parent) + 1;
        for (const auto& r : c.records) n.resets[r.outpoint] = n.height;
        nodes_[c.block_hash] = std::move(n);
    }
    return sel;
}

}  // namespace bclab
