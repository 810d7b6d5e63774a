#pragma once

#include "bclab/consensus.hpp"
#include "bclab/scenario.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bclab {

enum class Heuristic : std::uint8_t { Idioms, Transitive, Change, Peeling, Ip, Temporal };
inline constexpr std::array kAllHeuristics{Heuristic::Idioms, Heuristic::Transitive, Heuristic::Change,
                                           Heuristic::Peeling, Heuristic::Ip, Heuristic::Temporal};

const char* to_string(Heuristic h);
/// Throws std::invalid_argument on an unknown name.
Heuristic parse_heuristic(std::string_view name);
/// Comma-separated list, e.g. "idioms,transitive".
std::set<Heuristic> parse_heuristics(std::string_view list);

struct MergeRecord {
    AddressId a = 0;
    AddressId b = 0;
    Heuristic heuristic = Heuristic::Idioms;
    /// False when a and b were already in one class.
    bool effective = false;
};

/// Union-find over address ids. Every class is represented by its smallest
/// address, so find() does not depend on the order of unions.
class EntityPartition {
public:
    EntityPartition() = default;
    explicit EntityPartition(std::span<const AddressId> addresses);

    void add(AddressId a);
    /// Adds missing addresses first. Returns true when two classes were joined.
    bool unite(AddressId a, AddressId b, Heuristic h);

    [[nodiscard]] AddressId find(AddressId a) const;
    [[nodiscard]] bool contains(AddressId a) const { return parent_.count(a) != 0; }
    [[nodiscard]] bool same(AddressId a, AddressId b) const { return find(a) == find(b); }
    [[nodiscard]] std::size_t size() const { return parent_.size(); }
    [[nodiscard]] std::size_t class_count() const { return classes_; }
    [[nodiscard]] std::vector<AddressId> addresses() const;
    /// Class representative to sorted members.
    [[nodiscard]] std::map<AddressId, std::vector<AddressId>> classes() const;
    /// Every unite() call in order, redundant ones included.
    [[nodiscard]] const std::vector<MergeRecord>& merges() const { return merges_; }
    /// Heuristics that joined anything into the class of `a`.
    [[nodiscard]] std::set<Heuristic> provenance(AddressId a) const;
    [[nodiscard]] std::map<Heuristic, std::size_t> merge_counts() const;

private:
    mutable std::map<AddressId, AddressId> parent_;
    std::size_t classes_ = 0;
    std::vector<MergeRecord> merges_;
};

struct HeuristicConfig {
    std::set<Heuristic> enabled{Heuristic::Idioms, Heuristic::Transitive};
    bool exclude_coinjoins = true;
    std::size_t coinjoin_min_inputs = 3;
    std::size_t coinjoin_min_equal = 3;
    std::size_t peel_min_length = 3;
    double peel_fraction = 0.2;
    SimTime temporal_window = 600;
    double temporal_tolerance = 0.05;
    std::size_t temporal_min_occurrences = 3;

    void validate() const;
};

/// At least k_min inputs and at least j_min outputs sharing one value.
bool detect_coinjoin(const Transaction& tx, std::size_t k_min = 3, std::size_t j_min = 3);

/// A partition holding every address that appears in the chain, all apart.
EntityPartition address_universe(std::span<const Block> chain);

/// Unions the input signers of every non-coinbase transaction, skipping
/// detected coinjoins when the config asks for it.
EntityPartition idioms_of_use(std::span<const Block> chain, const HeuristicConfig& config = {});

/// Union-find is already closed; this checks that every class equals a
/// connected component of the recorded merge pairs and compresses all paths.
/// Throws std::logic_error if the check fails.
EntityPartition transitive_closure(const EntityPartition& partition);

struct ChangeClosureStats {
    std::size_t merges = 0;
    /// Transactions with two or more fresh, never-reused outputs.
    std::size_t ambiguous = 0;
    /// Transactions paying an output back to one of their input addresses.
    std::size_t self_change = 0;
};

/// Binds the single output that is new here and never receives again to the
/// transaction's inputs. Uses the whole chain as look-ahead.
EntityPartition change_closure(std::span<const Block> chain, const EntityPartition& partition,
                               const HeuristicConfig& config = {}, ChangeClosureStats* stats = nullptr);

struct PeelChain {
    std::vector<TxId> txids;
    /// Input signers and change addresses along the chain; peel recipients excluded.
    std::vector<AddressId> addresses;
};

/// Maximal runs of at least `min_length` one-in/two-out transactions in which
/// one output is at most `fraction` of the input and the other funds the next link.
std::vector<PeelChain> detect_peeling_chains(std::span<const Block> chain, std::size_t min_length, double fraction);

EntityPartition peeling_closure(std::span<const Block> chain, const EntityPartition& partition,
                                const HeuristicConfig& config = {});

/// Unions input signers of all transactions attributed to the same peer.
/// Transactions absent from `origin` are skipped.
EntityPartition ip_clustering(std::span<const Block> chain, const std::map<TxId, std::uint32_t>& origin,
                              const EntityPartition& partition, const HeuristicConfig& config = {});
EntityPartition ip_clustering(std::span<const Block> chain, const std::map<TxId, std::uint32_t>& origin);

/// Two sender addresses merge once they have sent similar amounts (any output
/// pair within the relative tolerance) inside the same time window on at
/// least `min_occurrences` distinct windows.
EntityPartition temporal_clustering(std::span<const Block> chain, SimTime window, double tolerance,
                                    std::size_t min_occurrences, const EntityPartition& partition);
EntityPartition temporal_clustering(std::span<const Block> chain, SimTime window = 600, double tolerance = 0.05,
                                    std::size_t min_occurrences = 3);

/// Applies every enabled heuristic in the order of kAllHeuristics.
/// `origin` feeds Ip; Ip is skipped when it is absent.
EntityPartition run_heuristics(std::span<const Block> chain, const HeuristicConfig& config,
                               const std::map<TxId, std::uint32_t>* origin = nullptr);

struct FalseMerge {
    AddressId a = 0;
    AddressId b = 0;
    Heuristic heuristic = Heuristic::Idioms;
    EntityId entity_a = 0;
    EntityId entity_b = 0;
    /// Cross-entity address pairs this union created.
    std::uint64_t false_pairs = 0;
};

struct EvalReport {
    std::size_t addresses = 0;
    std::size_t classes = 0;
    std::size_t entities = 0;
    double precision = 1;
    double recall = 1;
    double ari = 1;
    std::uint64_t true_positive_pairs = 0;
    std::uint64_t predicted_pairs = 0;
    std::uint64_t actual_pairs = 0;
    std::map<Heuristic, std::size_t> merge_counts;
    std::map<Heuristic, std::uint64_t> false_pairs;
    std::vector<FalseMerge> false_merge_examples;
    /// Classes pinned to an entity by a marked address, and classes holding
    /// marked addresses of two or more entities.
    std::size_t labelled_classes = 0;
    std::size_t label_conflicts = 0;
};

/// Scores the partition on the ground-truth addresses. Throws
/// std::invalid_argument if one of them is missing from the partition.
EvalReport evaluate(const EntityPartition& partition, const GroundTruth& truth, std::size_t max_examples = 10);

/// Class representative to the entity named by its marked addresses, when they agree.
std::map<AddressId, EntityId> label_classes(const EntityPartition& partition, const std::map<AddressId, EntityId>& marked);

/// address,class_id,heuristic_provenance with provenance joined by '|' ("none" for singletons).
std::string partition_csv(const EntityPartition& partition);
std::string eval_json(const EvalReport& report);

}  // namespace bclab
