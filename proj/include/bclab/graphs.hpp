#pragma once

#include "bclab/consensus.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bclab {

using Rational = boost::multiprecision::cpp_rational;

struct TxNode {
    TxId txid;
    std::size_t block = 0;
    SimTime timestamp = 0;
    bool coinbase = false;
};

/// Edge from the transaction that created an output to the one that spent it.
struct TxEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    Amount amount = 0;
    Outpoint outpoint;
};

class TransactionGraph {
public:
    std::vector<TxNode> nodes;  // chain order, coinbase first within each block
    std::vector<TxEdge> edges;

    [[nodiscard]] std::optional<std::size_t> index(const TxId& txid) const;
    /// Kahn's algorithm; nullopt when the graph has a cycle.
    [[nodiscard]] std::optional<std::vector<std::size_t>> topological_order() const;
    [[nodiscard]] bool acyclic() const { return topological_order().has_value(); }

    std::unordered_map<TxId, std::size_t> by_txid;
};

/// `chain` is a best chain, genesis first. Spends of outputs created outside it throw std::invalid_argument.
TransactionGraph build_transaction_graph(std::span<const Block> chain);

struct AddressEdge {
    AddressId src = 0;
    AddressId dst = 0;
    Rational amount;
    TxId txid;
    SimTime timestamp = 0;
};

enum class ShareMode {
    /// Output amount times the input's share of the transaction's inputs.
    Proportional,
    /// Every input/output pair carries the full output amount.
    FullAmount,
};

struct AddressGraph {
    std::vector<AddressId> nodes;  // ascending
    std::vector<AddressEdge> edges;
};

/// One edge per (input, output) pair of every non-coinbase transaction.
AddressGraph build_address_graph(std::span<const Block> chain, ShareMode mode = ShareMode::Proportional);

struct EntityEdge {
    std::uint64_t src = 0;
    std::uint64_t dst = 0;
    Rational weight;
    /// Address-graph edges merged into this one.
    std::size_t merged = 0;
};

struct EntityGraph {
    std::vector<std::uint64_t> nodes;  // ascending class ids
    std::vector<EntityEdge> edges;     // ascending (src, dst)
};

/// Contracts every class to one node. Throws std::invalid_argument when an
/// address of the graph has no class.
EntityGraph build_entity_graph(const AddressGraph& graph, const std::function<std::optional<std::uint64_t>(AddressId)>& class_of);

// ---------------------------------------------------------------- uniform edge tables

/// Format-neutral view shared by export, parsing and metrics.
struct EdgeRow {
    std::string src;
    std::string dst;
    Rational amount;
    std::string txid;
    std::optional<SimTime> timestamp;

    bool operator==(const EdgeRow&) const = default;
};

struct EdgeTable {
    std::string kind;
    std::vector<std::string> nodes;
    std::vector<EdgeRow> edges;

    bool operator==(const EdgeTable&) const = default;
};

EdgeTable to_table(const TransactionGraph& g);
EdgeTable to_table(const AddressGraph& g);
EdgeTable to_table(const EntityGraph& g);

enum class ExportFormat { Csv, Json, Dot };

/// Throws std::invalid_argument for anything but csv, json or dot.
ExportFormat parse_export_format(std::string_view name);

std::string export_csv(const EdgeTable& t);
std::string export_json(const EdgeTable& t);
/// `cluster_of` groups nodes into labelled subgraphs (entity supernodes).
std::string export_dot(const EdgeTable& t, const std::map<std::string, std::string>& cluster_of = {});
std::string export_table(const EdgeTable& t, ExportFormat f, const std::map<std::string, std::string>& cluster_of = {});

/// Node list is rebuilt from edge endpoints (CSV carries no isolated nodes).
EdgeTable parse_csv(std::string_view text, std::string kind = {});
EdgeTable parse_json(std::string_view text);

// ---------------------------------------------------------------- metrics

struct MetricsOptions {
    /// Smallest total degree included in the tail fit.
    std::size_t tail_cutoff = 2;
    std::size_t top_k = 10;
};

struct GraphMetrics {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::map<std::size_t, std::size_t> in_degree;
    std::map<std::size_t, std::size_t> out_degree;
    /// Global transitivity of the undirected simple projection (loops dropped).
    double clustering_coefficient = 0;
    std::size_t components = 0;
    /// Discrete power-law MLE over total degrees >= cutoff.
    std::optional<double> tail_exponent;
    std::size_t tail_samples = 0;
    std::vector<std::pair<std::string, std::size_t>> top_degree;
};

GraphMetrics compute_metrics(const EdgeTable& t, const MetricsOptions& options = {});
std::string metrics_json(const GraphMetrics& m);

}  // namespace bclab
