#pragma once

#include "bclab/consensus.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bclab {

using Rational = boost::multiprecision::cpp_rational;

enum class TaintPolicy { Poison, Haircut };

const char* to_string(TaintPolicy p);
/// "poison" or "haircut"; throws std::invalid_argument otherwise.
TaintPolicy parse_taint_policy(std::string_view name);

struct TaintSource {
    std::set<Outpoint> outpoints;
};

struct TaintOptions {
    /// Tainted fee value enters the coinbase of the including block. When
    /// false it leaves circulation and is only counted in fee_sink.
    bool fees_to_coinbase = true;
};

struct MassPoint {
    std::int64_t height = 0;
    /// Sum of fraction x value over unspent outputs.
    Rational live;
    /// Tainted fee value removed from circulation (fees_to_coinbase off).
    Rational fee_sink;
    /// Tainted value introduced by sources up to this height.
    Rational sourced;

    [[nodiscard]] bool balanced() const { return live + fee_sink == sourced; }
    bool operator==(const MassPoint&) const = default;
};

struct TaintMap {
    TaintPolicy policy = TaintPolicy::Haircut;
    /// Outputs with a positive fraction; everything else is clean.
    std::map<Outpoint, Rational> fraction;
    /// Tainted fee value per block hash, assigned to that block's coinbase.
    std::map<Hash256, Rational> fee_taint;
    /// One entry per block, genesis first (haircut mass bookkeeping).
    std::vector<MassPoint> mass;

    [[nodiscard]] Rational fraction_of(const Outpoint& op) const;
    bool operator==(const TaintMap&) const = default;
};

/// Walks the chain in order. Throws std::invalid_argument when a source is
/// not an output of the chain.
TaintMap propagate(std::span<const Block> chain, const TaintSource& sources, TaintPolicy policy,
                   const TaintOptions& options = {});

struct PurityScore {
    /// Coinbase txid to its share of the outpoint's value; shares sum to 1.
    std::map<TxId, Rational> shares;
    Rational purity;
    TxId dominant;
};

/// Haircut attribution of every coinbase origin onto one output.
/// Throws std::invalid_argument when the outpoint is not in the chain.
PurityScore purity(std::span<const Block> chain, const Outpoint& outpoint);

/// txid,index,numerator,denominator
std::string taint_csv(const TaintMap& map);
std::string taint_summary_json(const TaintMap& map, std::span<const Block> chain);
std::string purity_json(const Outpoint& outpoint, const PurityScore& score);

/// "txid:index" -> Outpoint. Throws std::invalid_argument on bad syntax.
Outpoint parse_outpoint(std::string_view text);

}  // namespace bclab
