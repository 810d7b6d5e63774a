#include "bclab/clustering.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace bclab {

namespace {

using OutputIndex = std::unordered_map<TxId, const Transaction*>;

OutputIndex index_chain(std::span<const Block> chain) {
    OutputIndex idx;
    for (const Block& b : chain) {
        idx.emplace(b.coinbase.txid, &b.coinbase);
        for (const Transaction& tx : b.txs) idx.emplace(tx.txid, &tx);
    }
    return idx;
}

Amount spent_amount(const OutputIndex& idx, const Outpoint& op) {
    auto it = idx.find(op.txid);
    if (it == idx.end() || op.index >= it->second->outputs.size())
        throw std::invalid_argument("input spends an output outside the chain");
    return it->second->outputs[op.index].amount;
}

template <class F>
void for_each_tx(std::span<const Block> chain, F f) {
    for (const Block& b : chain)
        for (const Transaction& tx : b.txs) f(tx);
}

bool skip_coinjoin(const Transaction& tx, const HeuristicConfig& c) {
    return c.exclude_coinjoins && detect_coinjoin(tx, c.coinjoin_min_inputs, c.coinjoin_min_equal);
}

void unite_inputs(EntityPartition& p, const Transaction& tx, Heuristic h) {
    for (std::size_t i = 1; i < tx.inputs.size(); ++i) p.unite(tx.inputs[0].signer, tx.inputs[i].signer, h);
}

std::uint64_t pairs(std::uint64_t n) { return n * (n - 1) / 2; }

}  // namespace

const char* to_string(Heuristic h) {
    switch (h) {
        case Heuristic::Idioms: return "idioms";
        case Heuristic::Transitive: return "transitive";
        case Heuristic::Change: return "change";
        case Heuristic::Peeling: return "peeling";
        case Heuristic::Ip: return "ip";
        case Heuristic::Temporal: return "temporal";
    }
    return "?";
}

Heuristic parse_heuristic(std::string_view name) {
    for (Heuristic h : kAllHeuristics)
        if (name == to_string(h)) return h;
    throw std::invalid_argument("unknown heuristic '" + std::string(name) + "'");
}

std::set<Heuristic> parse_heuristics(std::string_view list) {
    std::set<Heuristic> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto comma = list.find(',', start);
        auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!item.empty()) out.insert(parse_heuristic(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("no heuristics given");
    return out;
}

// ---------------------------------------------------------------- partition

EntityPartition::EntityPartition(std::span<const AddressId> addresses) {
    for (AddressId a : addresses) add(a);
}

void EntityPartition::add(AddressId a) {
    if (parent_.emplace(a, a).second) ++classes_;
}

AddressId EntityPartition::find(AddressId a) const {
    auto it = parent_.find(a);
    if (it == parent_.end()) throw std::out_of_range("address " + std::to_string(a) + " is not in the partition");
    AddressId root = a;
    while (parent_.at(root) != root) root = parent_.at(root);
    while (parent_.at(a) != root) {
        AddressId next = parent_.at(a);
        parent_[a] = root;
        a = next;
    }
    return root;
}

bool EntityPartition::unite(AddressId a, AddressId b, Heuristic h) {
    add(a);
    add(b);
    AddressId ra = find(a), rb = find(b);
    bool effective = ra != rb;
    if (effective) {
        if (rb < ra) std::swap(ra, rb);
        parent_[rb] = ra;
        --classes_;
    }
    merges_.push_back({a, b, h, effective});
    return effective;
}

std::vector<AddressId> EntityPartition::addresses() const {
    std::vector<AddressId> out;
    out.reserve(parent_.size());
    for (const auto& [a, _] : parent_) out.push_back(a);
    return out;
}

std::map<AddressId, std::vector<AddressId>> EntityPartition::classes() const {
    std::map<AddressId, std::vector<AddressId>> out;
    for (const auto& [a, _] : parent_) out[find(a)].push_back(a);
    return out;
}

std::set<Heuristic> EntityPartition::provenance(AddressId a) const {
    std::set<Heuristic> out;
    AddressId root = find(a);
    for (const MergeRecord& m : merges_)
        if (m.effective && find(m.a) == root) out.insert(m.heuristic);
    return out;
}

std::map<Heuristic, std::size_t> EntityPartition::merge_counts() const {
    std::map<Heuristic, std::size_t> out;
    for (const MergeRecord& m : merges_)
        if (m.effective) ++out[m.heuristic];
    return out;
}

void HeuristicConfig::validate() const {
    if (coinjoin_min_inputs < 2 || coinjoin_min_equal < 2) throw std::invalid_argument("coinjoin thresholds must be at least 2");
    if (peel_min_length < 2) throw std::invalid_argument("peel_min_length must be at least 2");
    if (!(peel_fraction > 0 && peel_fraction < 0.5)) throw std::invalid_argument("peel_fraction must lie in (0, 0.5)");
    if (temporal_window <= 0) throw std::invalid_argument("temporal_window must be positive");
    if (!(temporal_tolerance >= 0 && temporal_tolerance < 1)) throw std::invalid_argument("temporal_tolerance must lie in [0, 1)");
    if (temporal_min_occurrences == 0) throw std::invalid_argument("temporal_min_occurrences must be positive");
}

// ---------------------------------------------------------------- heuristics

bool detect_coinjoin(const Transaction& tx, std::size_t k_min, std::size_t j_min) {
    if (tx.inputs.size() < k_min) return false;
    std::map<Amount, std::size_t> count;
    for (const TxOutput& o : tx.outputs)
        if (++count[o.amount] >= j_min) return true;
    return false;
}

EntityPartition address_universe(std::span<const Block> chain) {
    EntityPartition p;
    for (const Block& b : chain) {
        for (const TxOutput& o : b.coinbase.outputs) p.add(o.address);
        for (const Transaction& tx : b.txs) {
            for (const TxInput& in : tx.inputs) p.add(in.signer);
            for (const TxOutput& o : tx.outputs) p.add(o.address);
        }
    }
    return p;
}

EntityPartition idioms_of_use(std::span<const Block> chain, const HeuristicConfig& config) {
    EntityPartition p = address_universe(chain);
    for_each_tx(chain, [&](const Transaction& tx) {
        if (!skip_coinjoin(tx, config)) unite_inputs(p, tx, Heuristic::Idioms);
    });
    return p;
}

EntityPartition transitive_closure(const EntityPartition& partition) {
    EntityPartition out = partition;
    // Brute force: BFS over the merge-pair graph.
    std::map<AddressId, std::vector<AddressId>> adj;
    for (const MergeRecord& m : out.merges()) {
        adj[m.a].push_back(m.b);
        adj[m.b].push_back(m.a);
    }
    std::map<AddressId, AddressId> component;
    for (AddressId start : out.addresses()) {
        if (component.count(start)) continue;
        std::vector<AddressId> queue{start};
        component[start] = start;
        for (std::size_t i = 0; i < queue.size(); ++i)
            for (AddressId n : adj[queue[i]])
                if (component.emplace(n, start).second) queue.push_back(n);
    }
    // Components are discovered from their smallest address, which is also the class representative.
    for (AddressId a : out.addresses())
        if (out.find(a) != component.at(a)) throw std::logic_error("partition differs from the merge-pair components");
    return out;
}

EntityPartition change_closure(std::span<const Block> chain, const EntityPartition& partition,
                               const HeuristicConfig& config, ChangeClosureStats* stats) {
    EntityPartition p = partition;
    ChangeClosureStats local;
    // Position of the first appearance and total number of receipts per address.
    std::unordered_map<AddressId, std::size_t> first_seen, receipts;
    std::size_t position = 0;
    auto see = [&](AddressId a) { first_seen.emplace(a, position); };
    for (const Block& b : chain) {
        for (const TxOutput& o : b.coinbase.outputs) {
            see(o.address);
            ++receipts[o.address];
        }
        ++position;
        for (const Transaction& tx : b.txs) {
            for (const TxInput& in : tx.inputs) see(in.signer);
            for (const TxOutput& o : tx.outputs) {
                see(o.address);
                ++receipts[o.address];
            }
            ++position;
        }
    }
    position = 0;
    for (const Block& b : chain) {
        ++position;
        for (const Transaction& tx : b.txs) {
            const std::size_t here = position++;
            if (tx.outputs.size() < 2 || skip_coinjoin(tx, config)) continue;
            bool self = false;
            for (const TxOutput& o : tx.outputs)
                for (const TxInput& in : tx.inputs) self = self || o.address == in.signer;
            if (self) ++local.self_change;
            std::vector<AddressId> candidates;
            for (const TxOutput& o : tx.outputs)
                if (first_seen.at(o.address) == here && receipts.at(o.address) == 1) candidates.push_back(o.address);
            if (candidates.size() > 1) ++local.ambiguous;
            if (candidates.size() != 1) continue;
            if (p.unite(tx.inputs[0].signer, candidates[0], Heuristic::Change)) ++local.merges;
        }
    }
    if (stats) *stats = local;
    return p;
}

std::vector<PeelChain> detect_peeling_chains(std::span<const Block> chain, std::size_t min_length, double fraction) {
    if (min_length < 2) throw std::invalid_argument("peeling chains need min_length >= 2");
    if (!(fraction > 0 && fraction < 0.5)) throw std::invalid_argument("peel fraction must lie in (0, 0.5)");
    OutputIndex idx = index_chain(chain);

    // For each peel-shaped transaction, the index of its change output.
    std::unordered_map<TxId, std::uint32_t> change_of;
    std::vector<const Transaction*> order;
    for_each_tx(chain, [&](const Transaction& tx) {
        if (tx.inputs.size() != 1 || tx.outputs.size() != 2) return;
        const double in = static_cast<double>(spent_amount(idx, tx.inputs[0].outpoint));
        const std::uint32_t small = tx.outputs[0].amount <= tx.outputs[1].amount ? 0 : 1;
        if (static_cast<double>(tx.outputs[small].amount) > fraction * in) return;
        change_of.emplace(tx.txid, 1 - small);
        order.push_back(&tx);
    });
    std::map<Outpoint, const Transaction*> spender;
    for (const Transaction* tx : order) spender.emplace(tx->inputs[0].outpoint, tx);

    auto continues = [&](const Transaction* tx) {
        // True when tx spends the change output of another peel link.
        const Outpoint& op = tx->inputs[0].outpoint;
        auto it = change_of.find(op.txid);
        return it != change_of.end() && it->second == op.index;
    };

    std::vector<PeelChain> out;
    for (const Transaction* start : order) {
        if (continues(start)) continue;
        PeelChain pc;
        for (const Transaction* tx = start; tx;) {
            pc.txids.push_back(tx->txid);
            pc.addresses.push_back(tx->inputs[0].signer);
            Outpoint change{tx->txid, change_of.at(tx->txid)};
            pc.addresses.push_back(tx->outputs[change.index].address);
            auto next = spender.find(change);
            tx = next == spender.end() ? nullptr : next->second;
        }
        if (pc.txids.size() >= min_length) out.push_back(std::move(pc));
    }
    return out;
}

EntityPartition peeling_closure(std::span<const Block> chain, const EntityPartition& partition,
                                const HeuristicConfig& config) {
    EntityPartition p = partition;
    for (const PeelChain& pc : detect_peeling_chains(chain, config.peel_min_length, config.peel_fraction))
        for (std::size_t i = 1; i < pc.addresses.size(); ++i) p.unite(pc.addresses[0], pc.addresses[i], Heuristic::Peeling);
    return p;
}

EntityPartition ip_clustering(std::span<const Block> chain, const std::map<TxId, std::uint32_t>& origin,
                              const EntityPartition& partition, const HeuristicConfig& config) {
    EntityPartition p = partition;
    std::map<std::uint32_t, AddressId> anchor;
    for_each_tx(chain, [&](const Transaction& tx) {
        auto it = origin.find(tx.txid);
        if (it == origin.end() || skip_coinjoin(tx, config)) return;
        auto [a, fresh] = anchor.emplace(it->second, tx.inputs[0].signer);
        for (const TxInput& in : tx.inputs) p.unite(a->second, in.signer, Heuristic::Ip);
    });
    return p;
}

EntityPartition ip_clustering(std::span<const Block> chain, const std::map<TxId, std::uint32_t>& origin) {
    return ip_clustering(chain, origin, address_universe(chain));
}

EntityPartition temporal_clustering(std::span<const Block> chain, SimTime window, double tolerance,
                                    std::size_t min_occurrences, const EntityPartition& partition) {
    if (window <= 0) throw std::invalid_argument("temporal window must be positive");
    EntityPartition p = partition;
    std::map<SimTime, std::vector<const Transaction*>> buckets;
    for_each_tx(chain, [&](const Transaction& tx) { buckets[tx.timestamp / window].push_back(&tx); });

    auto similar = [&](const Transaction& x, const Transaction& y) {
        for (const TxOutput& a : x.outputs)
            for (const TxOutput& b : y.outputs) {
                const double hi = static_cast<double>(std::max(a.amount, b.amount));
                if (hi > 0 && std::abs(static_cast<double>(a.amount - b.amount)) <= tolerance * hi) return true;
            }
        return false;
    };

    std::map<std::pair<AddressId, AddressId>, std::size_t> occasions;
    for (const auto& [_, txs] : buckets) {
        std::set<std::pair<AddressId, AddressId>> here;
        for (std::size_t i = 0; i < txs.size(); ++i)
            for (std::size_t j = i + 1; j < txs.size(); ++j) {
                if (!similar(*txs[i], *txs[j])) continue;
                for (const TxInput& a : txs[i]->inputs)
                    for (const TxInput& b : txs[j]->inputs)
                        if (a.signer != b.signer) here.insert(std::minmax(a.signer, b.signer));
            }
        for (const auto& pr : here) ++occasions[pr];
    }
    for (const auto& [pr, n] : occasions)
        if (n >= min_occurrences) p.unite(pr.first, pr.second, Heuristic::Temporal);
    return p;
}

EntityPartition temporal_clustering(std::span<const Block> chain, SimTime window, double tolerance,
                                    std::size_t min_occurrences) {
    return temporal_clustering(chain, window, tolerance, min_occurrences, address_universe(chain));
}

EntityPartition run_heuristics(std::span<const Block> chain, const HeuristicConfig& config,
                               const std::map<TxId, std::uint32_t>* origin) {
    config.validate();
    EntityPartition p = config.enabled.count(Heuristic::Idioms) ? idioms_of_use(chain, config) : address_universe(chain);
    if (config.enabled.count(Heuristic::Transitive)) p = transitive_closure(p);
    if (config.enabled.count(Heuristic::Change)) p = change_closure(chain, p, config);
    if (config.enabled.count(Heuristic::Peeling)) p = peeling_closure(chain, p, config);
    if (config.enabled.count(Heuristic::Ip) && origin) p = ip_clustering(chain, *origin, p, config);
    if (config.enabled.count(Heuristic::Temporal))
        p = temporal_clustering(chain, config.temporal_window, config.temporal_tolerance, config.temporal_min_occurrences, p);
    return p;
}

// ---------------------------------------------------------------- evaluation

EvalReport evaluate(const EntityPartition& partition, const GroundTruth& truth, std::size_t max_examples) {
    EvalReport r;
    std::map<AddressId, std::map<EntityId, std::uint64_t>> table;  // class -> entity -> count
    std::map<EntityId, std::uint64_t> entity_size;
    for (const auto& [a, e] : truth.owner) {
        if (!partition.contains(a)) throw std::invalid_argument("address " + std::to_string(a) + " is missing from the partition");
        ++table[partition.find(a)][e];
        ++entity_size[e];
    }
    r.addresses = truth.owner.size();
    r.classes = table.size();
    r.entities = entity_size.size();
    for (const auto& [_, row] : table) {
        std::uint64_t n = 0;
        for (const auto& [e, c] : row) {
            r.true_positive_pairs += pairs(c);
            n += c;
        }
        r.predicted_pairs += pairs(n);
    }
    for (const auto& [_, n] : entity_size) r.actual_pairs += pairs(n);
    if (r.predicted_pairs) r.precision = static_cast<double>(r.true_positive_pairs) / static_cast<double>(r.predicted_pairs);
    if (r.actual_pairs) r.recall = static_cast<double>(r.true_positive_pairs) / static_cast<double>(r.actual_pairs);
    const double total = static_cast<double>(pairs(r.addresses));
    const double expected = total > 0 ? static_cast<double>(r.predicted_pairs) * static_cast<double>(r.actual_pairs) / total : 0;
    const double max_index = 0.5 * static_cast<double>(r.predicted_pairs + r.actual_pairs);
    r.ari = max_index == expected ? 1.0 : (static_cast<double>(r.true_positive_pairs) - expected) / (max_index - expected);

    // Replay the unions, counting the cross-entity pairs each one creates.
    std::unordered_map<AddressId, AddressId> parent;
    std::unordered_map<AddressId, std::map<EntityId, std::uint64_t>> members;
    auto entity_of = [&](AddressId a) {
        auto it = truth.owner.find(a);
        return it == truth.owner.end() ? std::optional<EntityId>() : std::optional<EntityId>(it->second);
    };
    auto root = [&](AddressId a) {
        if (!parent.count(a)) {
            parent[a] = a;
            if (auto e = entity_of(a)) members[a][*e] = 1;
        }
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const MergeRecord& m : partition.merges()) {
        if (!m.effective) continue;
        ++r.merge_counts[m.heuristic];
        AddressId ra = root(m.a), rb = root(m.b);
        if (ra == rb) continue;
        auto& ma = members[ra];
        auto& mb = members[rb];
        std::uint64_t na = 0, nb = 0, same = 0;
        for (const auto& [e, c] : ma) na += c;
        for (const auto& [e, c] : mb) {
            nb += c;
            auto it = ma.find(e);
            if (it != ma.end()) same += it->second * c;
        }
        const std::uint64_t wrong = na * nb - same;
        if (wrong > 0) {
            r.false_pairs[m.heuristic] += wrong;
            if (r.false_merge_examples.size() < max_examples)
                r.false_merge_examples.push_back(
                    {m.a, m.b, m.heuristic, entity_of(m.a).value_or(0), entity_of(m.b).value_or(0), wrong});
        }
        if (ma.size() < mb.size()) std::swap(ra, rb);
        for (const auto& [e, c] : members[rb]) members[ra][e] += c;
        members.erase(rb);
        parent[rb] = ra;
    }

    std::map<AddressId, std::set<EntityId>> marks;
    for (const auto& [a, e] : truth.marked)
        if (partition.contains(a)) marks[partition.find(a)].insert(e);
    for (const auto& [_, es] : marks) {
        if (es.size() == 1) ++r.labelled_classes;
        else ++r.label_conflicts;
    }
    return r;
}

std::map<AddressId, EntityId> label_classes(const EntityPartition& partition, const std::map<AddressId, EntityId>& marked) {
    std::map<AddressId, std::set<EntityId>> marks;
    for (const auto& [a, e] : marked)
        if (partition.contains(a)) marks[partition.find(a)].insert(e);
    std::map<AddressId, EntityId> out;
    for (const auto& [root, es] : marks)
        if (es.size() == 1) out[root] = *es.begin();
    return out;
}

std::string partition_csv(const EntityPartition& partition) {
    // Provenance per class, computed once.
    std::map<AddressId, std::set<Heuristic>> prov;
    for (const MergeRecord& m : partition.merges())
        if (m.effective) prov[partition.find(m.a)].insert(m.heuristic);
    std::ostringstream out;
    out << "address,class_id,heuristic_provenance\n";
    for (AddressId a : partition.addresses()) {
        AddressId c = partition.find(a);
        out << a << ',' << c << ',';
        auto it = prov.find(c);
        if (it == prov.end()) {
            out << "none";
        } else {
            bool first = true;
            for (Heuristic h : it->second) {
                out << (first ? "" : "|") << to_string(h);
                first = false;
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string eval_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["addresses"] = r.addresses;
    j["classes"] = r.classes;
    j["entities"] = r.entities;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["adjusted_rand_index"] = r.ari;
    j["true_positive_pairs"] = r.true_positive_pairs;
    j["predicted_pairs"] = r.predicted_pairs;
    j["actual_pairs"] = r.actual_pairs;
    j["merge_counts"] = nlohmann::ordered_json::object();
    for (auto [h, n] : r.merge_counts) j["merge_counts"][to_string(h)] = n;
    j["false_pairs"] = nlohmann::ordered_json::object();
    for (auto [h, n] : r.false_pairs) j["false_pairs"][to_string(h)] = n;
    j["false_merge_examples"] = nlohmann::ordered_json::array();
    for (const FalseMerge& f : r.false_merge_examples)
        j["false_merge_examples"].push_back({{"a", f.a},
                                             {"b", f.b},
                                             {"heuristic", to_string(f.heuristic)},
                                             {"entity_a", f.entity_a},
                                             {"entity_b", f.entity_b},
                                             {"false_pairs", f.false_pairs}});
    j["labelled_classes"] = r.labelled_classes;
    j["label_conflicts"] = r.label_conflicts;
    return j.dump(2) + "\n";
}

}  // namespace bclab
