#pragma once

#include "bclab/hash.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bclab {

/// Satoshi count. Always non-negative inside valid ledger state.
using Amount = std::int64_t;
inline constexpr Amount kCoin = 100'000'000;

using AddressId = std::uint64_t;
using EntityId = std::uint32_t;
using TxId = Hash256;
/// Simulation clock in whole seconds.
using SimTime = std::int64_t;

/// Renders satoshi as a decimal coin string, e.g. 150000000 -> "1.50000000".
std::string format_coins(Amount sat);

/// An address and its ground-truth owner. Only the scenario and evaluation
/// layers look at `owner`; the ledger itself sees bare ids.
struct Address {
    AddressId id = 0;
    EntityId owner = 0;
};

struct Outpoint {
    TxId txid;
    std::uint32_t index = 0;

    auto operator<=>(const Outpoint&) const = default;
};

struct TxOutput {
    AddressId address = 0;
    Amount amount = 0;

    bool operator==(const TxOutput&) const = default;
};

struct TxInput {
    Outpoint outpoint;
    /// Simulated signature: must equal the address of the spent output.
    AddressId signer = 0;

    bool operator==(const TxInput&) const = default;
};

struct Transaction {
    TxId txid;
    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;
    SimTime timestamp = 0;
    /// Present only on coinbase transactions; keeps their txids distinct.
    std::optional<std::int64_t> coinbase_height;

    [[nodiscard]] bool is_coinbase() const { return inputs.empty(); }
    [[nodiscard]] Amount output_total() const;
    [[nodiscard]] Outpoint outpoint(std::uint32_t index) const { return {txid, index}; }

    bool operator==(const Transaction&) const = default;
};

/// Compact JSON with sorted keys; the exact bytes hashed into the txid.
std::string canonical_serialization(const Transaction& tx);
TxId compute_txid(const Transaction& tx);

/// Builds a transaction and fills in its txid.
Transaction make_transaction(std::vector<TxInput> inputs, std::vector<TxOutput> outputs, SimTime timestamp);

enum class TxError {
    MissingInput,
    WrongSigner,
    NegativeFee,
    DuplicateInput,
    NoOutputs,
    NonPositiveOutput,
    UnexpectedCoinbase,
};

const char* to_string(TxError e);

class LedgerError : public std::runtime_error {
public:
    explicit LedgerError(TxError code);
    [[nodiscard]] TxError code() const { return code_; }

private:
    TxError code_;
};

class UtxoSet;

struct TxValidation {
    std::optional<TxError> error;
    Amount fee = 0;

    [[nodiscard]] bool ok() const { return !error.has_value(); }
    explicit operator bool() const { return ok(); }
};

/// Checks a non-coinbase transaction against the spendable outputs.
TxValidation validate_transaction(const Transaction& tx, const UtxoSet& utxo);

/// Sum of inputs minus sum of outputs. Throws LedgerError if `tx` is invalid.
Amount fee(const Transaction& tx, const UtxoSet& utxo);

class UtxoSet {
public:
    using Map = std::map<Outpoint, TxOutput>;
    using const_iterator = Map::const_iterator;

    [[nodiscard]] const TxOutput* find(const Outpoint& op) const;
    [[nodiscard]] bool contains(const Outpoint& op) const { return entries_.count(op) != 0; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] Amount total_value() const;

    /// Removes every input outpoint and adds every output. Coinbase
    /// transactions only add. Throws LedgerError(MissingInput) when an input
    /// is absent; the set is left untouched in that case.
    void apply(const Transaction& tx);

    /// Inverse of apply; `spent` lists the outputs consumed by `tx` in input order.
    void undo(const Transaction& tx, const std::vector<TxOutput>& spent);

    void insert(const Outpoint& op, const TxOutput& out) { entries_[op] = out; }
    bool erase(const Outpoint& op) { return entries_.erase(op) != 0; }

    [[nodiscard]] const_iterator begin() const { return entries_.begin(); }
    [[nodiscard]] const_iterator end() const { return entries_.end(); }

    bool operator==(const UtxoSet&) const = default;

private:
    Map entries_;
};

/// Value-semantics form of UtxoSet::apply.
UtxoSet apply_transaction(UtxoSet utxo, const Transaction& tx);

}  // namespace bclab
