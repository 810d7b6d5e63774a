#include "bclab/graphs.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bclab {

namespace {

std::string rational_num(const Rational& r) { return boost::multiprecision::numerator(r).str(); }
std::string rational_den(const Rational& r) { return boost::multiprecision::denominator(r).str(); }

Rational make_rational(const std::string& num, const std::string& den) {
    using boost::multiprecision::cpp_int;
    cpp_int n(num), d(den);
    if (d == 0) throw std::invalid_argument("zero denominator");
    return Rational(n, d);
}

/// Output lookup over every transaction of the chain.
std::unordered_map<TxId, const Transaction*> index_transactions(std::span<const Block> chain) {
    std::unordered_map<TxId, const Transaction*> out;
    for (const Block& b : chain) {
        out.emplace(b.coinbase.txid, &b.coinbase);
        for (const Transaction& tx : b.txs) out.emplace(tx.txid, &tx);
    }
    return out;
}

const TxOutput& spent_output(const std::unordered_map<TxId, const Transaction*>& txs, const Outpoint& op) {
    auto it = txs.find(op.txid);
    if (it == txs.end() || op.index >= it->second->outputs.size())
        throw std::invalid_argument("input spends an output outside the chain: " + op.txid.hex());
    return it->second->outputs[op.index];
}

}  // namespace

// ---------------------------------------------------------------- transaction graph

std::optional<std::size_t> TransactionGraph::index(const TxId& txid) const {
    auto it = by_txid.find(txid);
    if (it == by_txid.end()) return std::nullopt;
    return it->second;
}

std::optional<std::vector<std::size_t>> TransactionGraph::topological_order() const {
    std::vector<std::size_t> indeg(nodes.size(), 0);
    std::vector<std::vector<std::size_t>> out(nodes.size());
    for (const TxEdge& e : edges) {
        ++indeg[e.to];
        out[e.from].push_back(e.to);
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (indeg[i] == 0) order.push_back(i);
    for (std::size_t k = 0; k < order.size(); ++k)
        for (std::size_t v : out[order[k]])
            if (--indeg[v] == 0) order.push_back(v);
    if (order.size() != nodes.size()) return std::nullopt;
    return order;
}

TransactionGraph build_transaction_graph(std::span<const Block> chain) {
    TransactionGraph g;
    auto add = [&](const Transaction& tx, std::size_t block) {
        g.by_txid.emplace(tx.txid, g.nodes.size());
        g.nodes.push_back({tx.txid, block, tx.timestamp, tx.is_coinbase()});
    };
    for (std::size_t b = 0; b < chain.size(); ++b) {
        add(chain[b].coinbase, b);
        for (const Transaction& tx : chain[b].txs) add(tx, b);
    }
    auto txs = index_transactions(chain);
    for (const Block& b : chain)
        for (const Transaction& tx : b.txs) {
            std::size_t to = g.by_txid.at(tx.txid);
            for (const TxInput& in : tx.inputs) {
                const TxOutput& out = spent_output(txs, in.outpoint);
                g.edges.push_back({g.by_txid.at(in.outpoint.txid), to, out.amount, in.outpoint});
            }
        }
    return g;
}

// ---------------------------------------------------------------- address graph

AddressGraph build_address_graph(std::span<const Block> chain, ShareMode mode) {
    AddressGraph g;
    std::set<AddressId> nodes;
    auto txs = index_transactions(chain);
    for (const Block& b : chain) {
        for (const TxOutput& o : b.coinbase.outputs) nodes.insert(o.address);
        for (const Transaction& tx : b.txs) {
            std::vector<const TxOutput*> spent;
            Amount total_in = 0;
            for (const TxInput& in : tx.inputs) {
                spent.push_back(&spent_output(txs, in.outpoint));
                total_in += spent.back()->amount;
            }
            for (const TxOutput* s : spent) nodes.insert(s->address);
            for (const TxOutput& o : tx.outputs) nodes.insert(o.address);
            for (const TxOutput* s : spent)
                for (const TxOutput& o : tx.outputs) {
                    Rational share = mode == ShareMode::FullAmount || total_in == 0
                                         ? Rational(o.amount)
                                         : Rational(o.amount) * Rational(s->amount) / Rational(total_in);
                    g.edges.push_back({s->address, o.address, share, tx.txid, tx.timestamp});
                }
        }
    }
    g.nodes.assign(nodes.begin(), nodes.end());
    return g;
}

// ---------------------------------------------------------------- entity graph

EntityGraph build_entity_graph(const AddressGraph& graph,
                               const std::function<std::optional<std::uint64_t>(AddressId)>& class_of) {
    auto cls = [&](AddressId a) {
        auto c = class_of(a);
        if (!c) throw std::invalid_argument("address " + std::to_string(a) + " is missing from the partition");
        return *c;
    };
    std::set<std::uint64_t> nodes;
    for (AddressId a : graph.nodes) nodes.insert(cls(a));
    std::map<std::pair<std::uint64_t, std::uint64_t>, EntityEdge> merged;
    for (const AddressEdge& e : graph.edges) {
        auto key = std::pair{cls(e.src), cls(e.dst)};
        EntityEdge& m = merged[key];
        m.src = key.first;
        m.dst = key.second;
        m.weight += e.amount;
        ++m.merged;
    }
    EntityGraph g;
    g.nodes.assign(nodes.begin(), nodes.end());
    for (auto& [_, e] : merged) g.edges.push_back(std::move(e));
    return g;
}

// ---------------------------------------------------------------- tables

EdgeTable to_table(const TransactionGraph& g) {
    EdgeTable t;
    t.kind = "transaction";
    for (const TxNode& n : g.nodes) t.nodes.push_back(n.txid.hex());
    for (const TxEdge& e : g.edges) {
        const TxNode& to = g.nodes[e.to];
        t.edges.push_back({g.nodes[e.from].txid.hex(), to.txid.hex(), Rational(e.amount), to.txid.hex(), to.timestamp});
    }
    return t;
}

EdgeTable to_table(const AddressGraph& g) {
    EdgeTable t;
    t.kind = "address";
    for (AddressId a : g.nodes) t.nodes.push_back(std::to_string(a));
    for (const AddressEdge& e : g.edges)
        t.edges.push_back({std::to_string(e.src), std::to_string(e.dst), e.amount, e.txid.hex(), e.timestamp});
    return t;
}

EdgeTable to_table(const EntityGraph& g) {
    EdgeTable t;
    t.kind = "entity";
    for (std::uint64_t c : g.nodes) t.nodes.push_back(std::to_string(c));
    for (const EntityEdge& e : g.edges)
        t.edges.push_back({std::to_string(e.src), std::to_string(e.dst), e.weight, {}, std::nullopt});
    return t;
}

ExportFormat parse_export_format(std::string_view name) {
    if (name == "csv") return ExportFormat::Csv;
    if (name == "json") return ExportFormat::Json;
    if (name == "dot") return ExportFormat::Dot;
    throw std::invalid_argument("unknown export format '" + std::string(name) + "' (expected csv, json or dot)");
}

static constexpr const char* kCsvHeader = "src,dst,amount_num,amount_den,txid,timestamp";

std::string export_csv(const EdgeTable& t) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const EdgeRow& e : t.edges) {
        out << e.src << ',' << e.dst << ',' << rational_num(e.amount) << ',' << rational_den(e.amount) << ','
            << e.txid << ',';
        if (e.timestamp) out << *e.timestamp;
        out << '\n';
    }
    return out.str();
}

std::string export_json(const EdgeTable& t) {
    nlohmann::ordered_json j;
    j["kind"] = t.kind;
    j["nodes"] = t.nodes;
    auto& edges = j["edges"] = nlohmann::ordered_json::array();
    for (const EdgeRow& e : t.edges) {
        nlohmann::ordered_json r;
        r["src"] = e.src;
        r["dst"] = e.dst;
        r["amount_num"] = rational_num(e.amount);
        r["amount_den"] = rational_den(e.amount);
        r["txid"] = e.txid;
        r["timestamp"] = e.timestamp ? nlohmann::ordered_json(*e.timestamp) : nlohmann::ordered_json(nullptr);
        edges.push_back(std::move(r));
    }
    return j.dump(2) + "\n";
}

std::string export_dot(const EdgeTable& t, const std::map<std::string, std::string>& cluster_of) {
    auto quote = [](const std::string& s) { return "\"" + s + "\""; };
    auto amount_label = [](const Rational& r) {
        return boost::multiprecision::denominator(r) == 1 ? rational_num(r) : rational_num(r) + "/" + rational_den(r);
    };
    std::ostringstream out;
    out << "digraph " << (t.kind.empty() ? "G" : t.kind) << " {\n";
    out << "  rankdir=LR;\n";
    std::map<std::string, std::vector<std::string>> clusters;
    std::vector<std::string> loose;
    for (const std::string& n : t.nodes) {
        auto it = cluster_of.find(n);
        if (it == cluster_of.end())
            loose.push_back(n);
        else
            clusters[it->second].push_back(n);
    }
    for (const auto& [label, members] : clusters) {
        out << "  subgraph " << quote("cluster_" + label) << " {\n";
        out << "    label=" << quote(label) << ";\n";
        for (const auto& m : members) out << "    " << quote(m) << ";\n";
        out << "  }\n";
    }
    for (const auto& n : loose) out << "  " << quote(n) << ";\n";
    for (const EdgeRow& e : t.edges)
        out << "  " << quote(e.src) << " -> " << quote(e.dst) << " [label=" << quote(amount_label(e.amount)) << "];\n";
    out << "}\n";
    return out.str();
}

std::string export_table(const EdgeTable& t, ExportFormat f, const std::map<std::string, std::string>& cluster_of) {
    switch (f) {
        case ExportFormat::Csv: return export_csv(t);
        case ExportFormat::Json: return export_json(t);
        case ExportFormat::Dot: return export_dot(t, cluster_of);
    }
    throw std::invalid_argument("unknown export format");
}

EdgeTable parse_csv(std::string_view text, std::string kind) {
    EdgeTable t;
    t.kind = std::move(kind);
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("edge CSV: missing or wrong header");
    std::set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            auto comma = line.find(',', start);
            f.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (f.size() != 6) throw std::invalid_argument("edge CSV line " + std::to_string(lineno) + ": expected 6 fields");
        EdgeRow r;
        r.src = f[0];
        r.dst = f[1];
        try {
            r.amount = make_rational(f[2], f[3]);
            if (!f[5].empty()) r.timestamp = std::stoll(f[5]);
        } catch (const std::exception&) {
            throw std::invalid_argument("edge CSV line " + std::to_string(lineno) + ": bad number");
        }
        r.txid = f[4];
        for (const auto& n : {r.src, r.dst})
            if (seen.insert(n).second) t.nodes.push_back(n);
        t.edges.push_back(std::move(r));
    }
    return t;
}

EdgeTable parse_json(std::string_view text) {
    auto j = nlohmann::json::parse(text);
    EdgeTable t;
    t.kind = j.at("kind").get<std::string>();
    t.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
        EdgeRow r;
        r.src = e.at("src").get<std::string>();
        r.dst = e.at("dst").get<std::string>();
        r.amount = make_rational(e.at("amount_num").get<std::string>(), e.at("amount_den").get<std::string>());
        r.txid = e.at("txid").get<std::string>();
        if (!e.at("timestamp").is_null()) r.timestamp = e.at("timestamp").get<SimTime>();
        t.edges.push_back(std::move(r));
    }
    return t;
}

// ---------------------------------------------------------------- metrics

GraphMetrics compute_metrics(const EdgeTable& t, const MetricsOptions& options) {
    std::map<std::string, std::size_t> id;
    std::vector<std::string> names;
    auto intern = [&](const std::string& n) {
        auto [it, fresh] = id.emplace(n, names.size());
        if (fresh) names.push_back(n);
        return it->second;
    };
    for (const auto& n : t.nodes) intern(n);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : t.edges) edges.emplace_back(intern(e.src), intern(e.dst));

    const std::size_t n = names.size();
    GraphMetrics m;
    m.nodes = n;
    m.edges = edges.size();
    std::vector<std::size_t> in(n, 0), out(n, 0);
    std::vector<std::set<std::size_t>> und(n);
    for (auto [a, b] : edges) {
        ++out[a];
        ++in[b];
        if (a != b) {
            und[a].insert(b);
            und[b].insert(a);
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        ++m.in_degree[in[v]];
        ++m.out_degree[out[v]];
    }

    // Transitivity: closed triplets over connected triplets.
    double closed = 0, triplets = 0;
    for (std::size_t v = 0; v < n; ++v) {
        double d = static_cast<double>(und[v].size());
        triplets += d * (d - 1) / 2;
        std::vector<std::size_t> nb(und[v].begin(), und[v].end());
        for (std::size_t i = 0; i < nb.size(); ++i)
            for (std::size_t k = i + 1; k < nb.size(); ++k)
                if (und[nb[i]].count(nb[k])) closed += 1;
    }
    m.clustering_coefficient = triplets == 0 ? 0 : closed / triplets;

    // Weakly connected components.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [a, b] : edges) parent[find(a)] = find(b);
    for (std::size_t v = 0; v < n; ++v) m.components += find(v) == v ? 1 : 0;

    // Discrete power-law MLE (continuous approximation with the half-step correction).
    const double kmin = static_cast<double>(std::max<std::size_t>(options.tail_cutoff, 1));
    double log_sum = 0;
    for (std::size_t v = 0; v < n; ++v) {
        double k = static_cast<double>(in[v] + out[v]);
        if (k < kmin) continue;
        ++m.tail_samples;
        log_sum += std::log(k / (kmin - 0.5));
    }
    if (m.tail_samples >= 2 && log_sum > 0) m.tail_exponent = 1 + static_cast<double>(m.tail_samples) / log_sum;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        std::size_t da = in[a] + out[a], db = in[b] + out[b];
        return da != db ? da > db : names[a] < names[b];
    });
    for (std::size_t i = 0; i < std::min(options.top_k, n); ++i)
        m.top_degree.emplace_back(names[order[i]], in[order[i]] + out[order[i]]);
    return m;
}

std::string metrics_json(const GraphMetrics& m) {
    nlohmann::ordered_json j;
    j["nodes"] = m.nodes;
    j["edges"] = m.edges;
    auto hist = [](const std::map<std::size_t, std::size_t>& h) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (auto [deg, count] : h) a.push_back({{"degree", deg}, {"count", count}});
        return a;
    };
    j["in_degree"] = hist(m.in_degree);
    j["out_degree"] = hist(m.out_degree);
    j["clustering_coefficient"] = m.clustering_coefficient;
    j["components"] = m.components;
    j["tail_exponent"] = m.tail_exponent ? nlohmann::ordered_json(*m.tail_exponent) : nlohmann::ordered_json(nullptr);
    j["tail_samples"] = m.tail_samples;
    auto& top = j["top_degree"] = nlohmann::ordered_json::array();
    for (const auto& [name, deg] : m.top_degree) top.push_back({{"node", name}, {"degree", deg}});
    return j.dump(2) + "\n";
}

}  // namespace bclab
