#include "bclab/taint.hpp"

#include <json.hpp>

#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace bclab {

namespace {

struct TxRef {
    const Transaction* tx = nullptr;
    std::size_t block = 0;
};

std::unordered_map<TxId, TxRef> index_chain(std::span<const Block> chain) {
    std::unordered_map<TxId, TxRef> idx;
    for (std::size_t b = 0; b < chain.size(); ++b) {
        idx.emplace(chain[b].coinbase.txid, TxRef{&chain[b].coinbase, b});
        for (const Transaction& tx : chain[b].txs) idx.emplace(tx.txid, TxRef{&tx, b});
    }
    return idx;
}

Amount output_value(const std::unordered_map<TxId, TxRef>& idx, const Outpoint& op) {
    auto it = idx.find(op.txid);
    if (it == idx.end() || op.index >= it->second.tx->outputs.size())
        throw std::invalid_argument("outpoint " + op.txid.hex() + ":" + std::to_string(op.index) + " is not in the chain");
    return it->second.tx->outputs[op.index].amount;
}

std::string rational_str(const Rational& r) {
    return boost::multiprecision::numerator(r).str() + "/" + boost::multiprecision::denominator(r).str();
}

}  // namespace

const char* to_string(TaintPolicy p) { return p == TaintPolicy::Poison ? "poison" : "haircut"; }

TaintPolicy parse_taint_policy(std::string_view name) {
    if (name == "poison") return TaintPolicy::Poison;
    if (name == "haircut") return TaintPolicy::Haircut;
    throw std::invalid_argument("unknown taint policy '" + std::string(name) + "'");
}

Rational TaintMap::fraction_of(const Outpoint& op) const {
    auto it = fraction.find(op);
    return it == fraction.end() ? Rational(0) : it->second;
}

TaintMap propagate(std::span<const Block> chain, const TaintSource& sources, TaintPolicy policy, const TaintOptions& options) {
    auto idx = index_chain(chain);
    for (const Outpoint& op : sources.outpoints) output_value(idx, op);

    TaintMap m;
    m.policy = policy;
    Rational live, sink, sourced;
    auto set = [&](const Outpoint& op, const Rational& f) {
        if (f > 0) m.fraction[op] = f;
    };
    auto apply_sources = [&](const Transaction& tx) {
        for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
            Outpoint op = tx.outpoint(i);
            if (!sources.outpoints.count(op)) continue;
            Rational added = (Rational(1) - m.fraction_of(op)) * tx.outputs[i].amount;
            sourced += added;
            live += added;
            m.fraction[op] = 1;
        }
    };

    for (std::size_t h = 0; h < chain.size(); ++h) {
        const Block& block = chain[h];
        Rational fee_taint;
        bool poisoned_fee = false;
        for (const Transaction& tx : block.txs) {
            Rational tainted_in;
            Amount value_in = 0;
            bool any = false;
            for (const TxInput& in : tx.inputs) {
                const Amount v = output_value(idx, in.outpoint);
                const Rational f = m.fraction_of(in.outpoint);
                tainted_in += f * v;
                value_in += v;
                any = any || f > 0;
            }
            live -= tainted_in;
            Rational f;
            if (policy == TaintPolicy::Poison) f = any ? 1 : 0;
            else if (value_in > 0) f = tainted_in / value_in;
            const Amount fee = value_in - tx.output_total();
            for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
                set(tx.outpoint(i), f);
                live += f * tx.outputs[i].amount;
            }
            fee_taint += f * fee;
            poisoned_fee = poisoned_fee || (any && fee > 0);
            apply_sources(tx);
        }

        const Transaction& cb = block.coinbase;
        const Amount total = cb.output_total();
        if (fee_taint > 0) {
            if (options.fees_to_coinbase && total > 0) {
                Rational cf = policy == TaintPolicy::Poison ? Rational(1) : fee_taint / total;
                if (cf > 1) cf = 1;
                for (std::uint32_t i = 0; i < cb.outputs.size(); ++i) {
                    set(cb.outpoint(i), cf);
                    live += cf * cb.outputs[i].amount;
                }
                m.fee_taint[block.hash()] = fee_taint;
            } else {
                sink += fee_taint;
            }
        } else if (policy == TaintPolicy::Poison && poisoned_fee && options.fees_to_coinbase) {
            for (std::uint32_t i = 0; i < cb.outputs.size(); ++i) set(cb.outpoint(i), 1);
        }
        apply_sources(cb);
        m.mass.push_back({static_cast<std::int64_t>(h), live, sink, sourced});
    }
    return m;
}

PurityScore purity(std::span<const Block> chain, const Outpoint& outpoint) {
    auto idx = index_chain(chain);
    output_value(idx, outpoint);

    // Ancestor cone of the target; a coinbase pulls in its block's fee payers.
    std::unordered_set<TxId> cone;
    std::vector<TxId> stack{outpoint.txid};
    while (!stack.empty()) {
        TxId id = stack.back();
        stack.pop_back();
        if (!cone.insert(id).second) continue;
        const TxRef& ref = idx.at(id);
        if (ref.tx->is_coinbase()) {
            for (const Transaction& tx : chain[ref.block].txs) stack.push_back(tx.txid);
        } else {
            for (const TxInput& in : ref.tx->inputs) stack.push_back(in.outpoint.txid);
        }
    }

    using Dist = std::map<TxId, Rational>;
    std::unordered_map<TxId, Dist> dist;
    auto add_scaled = [](Dist& into, const Dist& from, const Rational& w) {
        for (const auto& [o, s] : from) into[o] += s * w;
    };
    for (const Block& block : chain) {
        Rational fees;
        Dist fee_dist;
        for (const Transaction& tx : block.txs) {
            if (!cone.count(tx.txid)) continue;
            Amount value_in = 0;
            for (const TxInput& in : tx.inputs) value_in += output_value(idx, in.outpoint);
            Dist d;
            for (const TxInput& in : tx.inputs)
                add_scaled(d, dist.at(in.outpoint.txid), Rational(output_value(idx, in.outpoint), value_in));
            const Amount fee = value_in - tx.output_total();
            if (fee > 0) {
                fees += fee;
                add_scaled(fee_dist, d, Rational(fee));
            }
            dist.emplace(tx.txid, std::move(d));
        }
        const Transaction& cb = block.coinbase;
        if (cone.count(cb.txid)) {
            const Amount total = cb.output_total();
            Dist d;
            if (total > 0 && fees > 0) {
                Rational own = (Rational(total) - fees) / total;
                if (own > 0) d[cb.txid] = own;
                add_scaled(d, fee_dist, Rational(1) / total);
            } else {
                d[cb.txid] = 1;
            }
            dist.emplace(cb.txid, std::move(d));
        }
        if (dist.count(outpoint.txid)) break;
    }

    PurityScore score;
    for (auto& [o, s] : dist.at(outpoint.txid))
        if (s > 0) score.shares.emplace(o, s);
    for (const auto& [o, s] : score.shares)
        if (s > score.purity) {
            score.purity = s;
            score.dominant = o;
        }
    return score;
}

std::string taint_csv(const TaintMap& map) {
    std::ostringstream out;
    out << "txid,index,numerator,denominator\n";
    for (const auto& [op, f] : map.fraction)
        out << op.txid.hex() << ',' << op.index << ',' << boost::multiprecision::numerator(f) << ','
            << boost::multiprecision::denominator(f) << '\n';
    return out.str();
}

std::string taint_summary_json(const TaintMap& map, std::span<const Block> chain) {
    nlohmann::ordered_json j;
    j["policy"] = to_string(map.policy);
    j["tainted_outputs"] = map.fraction.size();
    std::set<Outpoint> spent;
    for (const Block& b : chain)
        for (const Transaction& tx : b.txs)
            for (const TxInput& in : tx.inputs) spent.insert(in.outpoint);
    std::size_t live = 0;
    for (const auto& [op, _] : map.fraction) live += spent.count(op) ? 0 : 1;
    j["tainted_unspent_outputs"] = live;
    if (!map.mass.empty()) {
        const MassPoint& last = map.mass.back();
        j["mass_balance"] = {{"live", rational_str(last.live)},
                             {"fee_sink", rational_str(last.fee_sink)},
                             {"sourced", rational_str(last.sourced)},
                             {"balanced", last.balanced()}};
        bool all = true;
        for (const MassPoint& p : map.mass) all = all && p.balanced();
        j["balanced_at_every_height"] = all;
    }
    Rational fees;
    for (const auto& [_, v] : map.fee_taint) fees += v;
    j["fee_taint_to_coinbases"] = rational_str(fees);
    j["fee_taint_blocks"] = map.fee_taint.size();
    return j.dump(2) + "\n";
}

std::string purity_json(const Outpoint& outpoint, const PurityScore& score) {
    nlohmann::ordered_json j;
    j["outpoint"] = outpoint.txid.hex() + ":" + std::to_string(outpoint.index);
    j["purity"] = rational_str(score.purity);
    j["purity_value"] = score.purity.convert_to<double>();
    j["dominant_origin"] = score.dominant.hex();
    j["origins"] = nlohmann::ordered_json::array();
    for (const auto& [o, s] : score.shares)
        j["origins"].push_back({{"coinbase", o.hex()}, {"share", rational_str(s)}, {"share_value", s.convert_to<double>()}});
    return j.dump(2) + "\n";
}

Outpoint parse_outpoint(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("outpoint must look like txid:index");
    Outpoint op;
    op.txid = Hash256::from_hex(text.substr(0, colon));
    std::string idx(text.substr(colon + 1));
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("outpoint index must be a non-negative integer");
    op.index = static_cast<std::uint32_t>(std::stoul(idx));
    return op;
}

}  // namespace bclab
