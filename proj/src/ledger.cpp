#include "bclab/ledger.hpp"

#include <set>

namespace bclab {

std::string format_coins(Amount sat) {
    std::string sign = sat < 0 ? "-" : "";
    auto mag = static_cast<std::uint64_t>(sat < 0 ? -sat : sat);
    std::string frac = std::to_string(mag % kCoin);
    frac.insert(0, 8 - frac.size(), '0');
    return sign + std::to_string(mag / kCoin) + "." + frac;
}

Amount Transaction::output_total() const {
    Amount total = 0;
    for (const auto& out : outputs) total += out.amount;
    return total;
}

std::string canonical_serialization(const Transaction& tx) {
    std::string s;
    s.reserve(64 + tx.inputs.size() * 110 + tx.outputs.size() * 40);
    s += '{';
    if (tx.coinbase_height) {
        s += "\"coinbase_height\":";
        s += std::to_string(*tx.coinbase_height);
        s += ',';
    }
    s += "\"inputs\":[";
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
        const auto& in = tx.inputs[i];
        if (i) s += ',';
        s += "{\"index\":";
        s += std::to_string(in.outpoint.index);
        s += ",\"signer\":";
        s += std::to_string(in.signer);
        s += ",\"txid\":\"";
        s += in.outpoint.txid.hex();
        s += "\"}";
    }
    s += "],\"outputs\":[";
    for (std::size_t i = 0; i < tx.outputs.size(); ++i) {
        const auto& out = tx.outputs[i];
        if (i) s += ',';
        s += "{\"address\":";
        s += std::to_string(out.address);
        s += ",\"amount\":";
        s += std::to_string(out.amount);
        s += '}';
    }
    s += "],\"timestamp\":";
    s += std::to_string(tx.timestamp);
    s += '}';
    return s;
}

TxId compute_txid(const Transaction& tx) { return sha256(canonical_serialization(tx)); }

Transaction make_transaction(std::vector<TxInput> inputs, std::vector<TxOutput> outputs, SimTime timestamp) {
    Transaction tx;
    tx.inputs = std::move(inputs);
    tx.outputs = std::move(outputs);
    tx.timestamp = timestamp;
    tx.txid = compute_txid(tx);
    return tx;
}

const char* to_string(TxError e) {
    switch (e) {
        case TxError::MissingInput: return "MissingInput";
        case TxError::WrongSigner: return "WrongSigner";
        case TxError::NegativeFee: return "NegativeFee";
        case TxError::DuplicateInput: return "DuplicateInput";
        case TxError::NoOutputs: return "NoOutputs";
        case TxError::NonPositiveOutput: return "NonPositiveOutput";
        case TxError::UnexpectedCoinbase: return "UnexpectedCoinbase";
    }
    return "Unknown";
}

LedgerError::LedgerError(TxError code) : std::runtime_error(to_string(code)), code_(code) {}

TxValidation validate_transaction(const Transaction& tx, const UtxoSet& utxo) {
    if (tx.is_coinbase()) return {TxError::UnexpectedCoinbase};
    if (tx.outputs.empty()) return {TxError::NoOutputs};

    std::set<Outpoint> seen;
    Amount in_total = 0;
    for (const auto& in : tx.inputs) {
        if (!seen.insert(in.outpoint).second) return {TxError::DuplicateInput};
        const TxOutput* spent = utxo.find(in.outpoint);
        if (!spent) return {TxError::MissingInput};
        if (spent->address != in.signer) return {TxError::WrongSigner};
        in_total += spent->amount;
    }
    Amount out_total = 0;
    for (const auto& out : tx.outputs) {
        if (out.amount <= 0) return {TxError::NonPositiveOutput};
        out_total += out.amount;
    }
    if (out_total > in_total) return {TxError::NegativeFee};
    return {std::nullopt, in_total - out_total};
}

Amount fee(const Transaction& tx, const UtxoSet& utxo) {
    auto v = validate_transaction(tx, utxo);
    if (!v) throw LedgerError(*v.error);
    return v.fee;
}

const TxOutput* UtxoSet::find(const Outpoint& op) const {
    auto it = entries_.find(op);
    return it == entries_.end() ? nullptr : &it->second;
}

Amount UtxoSet::total_value() const {
    Amount total = 0;
    for (const auto& [op, out] : entries_) total += out.amount;
    return total;
}

void UtxoSet::apply(const Transaction& tx) {
    for (const auto& in : tx.inputs)
        if (!contains(in.outpoint)) throw LedgerError(TxError::MissingInput);
    for (const auto& in : tx.inputs) entries_.erase(in.outpoint);
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) entries_[{tx.txid, i}] = tx.outputs[i];
}

void UtxoSet::undo(const Transaction& tx, const std::vector<TxOutput>& spent) {
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) entries_.erase({tx.txid, i});
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) entries_[tx.inputs[i].outpoint] = spent.at(i);
}

UtxoSet apply_transaction(UtxoSet utxo, const Transaction& tx) {
    utxo.apply(tx);
    return utxo;
}

}  // namespace bclab
