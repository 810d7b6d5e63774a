#pragma once

#include "bclab/consensus.hpp"
#include "bclab/random.hpp"

#include <cstdint>
#include <map>
#include <iosfwd>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace bclab::netsim {

using PeerId = std::uint32_t;
/// Simulation time in seconds.
using Seconds = double;

struct LatencyRange {
    Seconds min = 0.010;
    Seconds max = 0.100;
};

/// Static undirected peer graph with a fixed latency per link.
class Topology {
public:
    explicit Topology(std::size_t peers = 0) : adj_(peers) {}

    [[nodiscard]] std::size_t size() const { return adj_.size(); }
    PeerId add_peer();
    void add_edge(PeerId a, PeerId b, Seconds latency);
    void remove_edge(PeerId a, PeerId b);
    [[nodiscard]] bool has_edge(PeerId a, PeerId b) const;
    [[nodiscard]] Seconds latency(PeerId a, PeerId b) const;
    [[nodiscard]] const std::set<PeerId>& neighbors(PeerId p) const { return adj_.at(p); }
    [[nodiscard]] std::size_t degree(PeerId p) const { return adj_.at(p).size(); }
    /// Edges as (low, high) pairs in ascending order.
    [[nodiscard]] std::vector<std::pair<PeerId, PeerId>> edges() const;
    [[nodiscard]] bool connected() const;
    /// Hop distance from `source` to every peer (SIZE_MAX when unreachable).
    [[nodiscard]] std::vector<std::size_t> hops_from(PeerId source) const;

private:
    static std::pair<PeerId, PeerId> key(PeerId a, PeerId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

    std::vector<std::set<PeerId>> adj_;
    std::map<std::pair<PeerId, PeerId>, Seconds> latency_;
};

/// Random connected graph whose degrees all fall in [min_peers, max_peers].
/// Every peer dials random peers with spare capacity until it has min_peers
/// links; leftover components are then bridged. Throws std::invalid_argument
/// when the bounds cannot be met.
Topology build_topology(std::size_t peers, std::size_t min_peers, std::size_t max_peers, std::uint64_t seed,
                        LatencyRange latency = {});

enum class EventKind { TxCreate, InvAnnounce, GetData, TxDeliver, BlockFound, BlockDeliver, TrickleTick, LinkUp };

const char* to_string(EventKind k);

struct TraceRecord {
    Seconds time = 0;
    EventKind kind = EventKind::TxCreate;
    PeerId peer = 0;
    std::optional<PeerId> from;
    Hash256 id;
};

/// What an observing peer sees: which neighbor announced which transaction when.
struct Observation {
    PeerId adversary = 0;
    TxId txid;
    PeerId from = 0;
    Seconds time = 0;
};

/// Trickle selection for one tick: own transactions always, each foreign
/// one independently with probability `probability`. Keeps pool order.
std::vector<TxId> choose_trickle(std::span<const TxId> pool, const std::unordered_set<TxId>& own, double probability,
                                 Rng& rng);

struct MinerSpec {
    PeerId peer = 0;
    double hash_share = 0;
    AddressId reward_address = 0;
};

struct NetConfig {
    ChainParams chain;
    Seconds trickle_interval = 0.1;
    double trickle_probability = 0.25;
    /// Abstract-time miners; block discovery is exponential in each miner's share.
    std::vector<MinerSpec> miners;
    /// Random mining stops here so the network can settle; scripted blocks still fire.
    Seconds mining_until = 0;
    /// Peers that log announcements and never relay transactions.
    std::vector<PeerId> observers;
    /// Latency for links opened during the run (eclipse, rejoin).
    LatencyRange link_latency;
    /// Random miners fill blocks from the transactions they have heard of.
    bool mine_transactions = true;
    bool record_trace = true;
    std::uint64_t seed = 1;
};

struct PeerState {
    PeerState(PeerId peer, BlockTree view) : id(peer), tree(std::move(view)) {}

    PeerId id = 0;
    std::set<PeerId> neighbors;
    /// Transactions waiting to be trickled, in arrival order.
    std::vector<TxId> pool;
    std::unordered_set<TxId> own;
    std::unordered_map<TxId, Transaction> known;
    std::unordered_set<TxId> requested;
    /// Inventory each neighbor is known to have, so nothing is announced twice.
    std::map<PeerId, std::unordered_set<Hash256>> neighbor_has;
    BlockTree tree;
    bool is_miner = false;
    double hash_share = 0;
    AddressId reward_address = 0;
    bool observer = false;
    /// Peers this one never forwards honest blocks to (eclipse).
    std::set<PeerId> censor;
    bool tick_scheduled = false;
    Seconds tick_phase = 0;
    std::uint64_t mining_generation = 0;
};

struct CreatedBlock {
    Hash256 hash;
    PeerId miner = 0;
    Seconds time = 0;
    std::int64_t height = 0;
};

struct TrickleStats {
    std::uint64_t ticks = 0;
    std::uint64_t foreign_considered = 0;
    std::uint64_t foreign_announced = 0;
    std::uint64_t own_announced = 0;
};

struct PropagationStats {
    Hash256 block;
    /// Seconds from discovery until the given fraction of peers had the block.
    Seconds to_half = 0;
    Seconds to_90 = 0;
    Seconds to_all = 0;
    std::size_t reached = 0;
};

struct RunReport {
    Seconds end_time = 0;
    bool horizon_exhausted = false;
    std::size_t events = 0;
    std::size_t blocks_created = 0;
    std::size_t stale_blocks = 0;
    bool tips_agree = false;
    Hash256 reference_tip;
    std::int64_t reference_height = 0;
    TrickleStats trickle;
    std::vector<PropagationStats> propagation;
    /// Share of first transaction deliveries made by the 20 busiest relays.
    double top20_relay_share = 0;
};

class Simulation {
public:
    Simulation(Topology topology, NetConfig config, Block genesis);

    /// A transaction appears at `origin` at time `t`.
    void submit_tx(Seconds t, PeerId origin, Transaction tx);
    /// Scripted discovery: `miner` finds a block at `t` on `parent` (its own tip when empty).
    void schedule_block(Seconds t, PeerId miner, std::vector<Transaction> txs = {},
                        std::optional<Hash256> parent = std::nullopt);

    /// Processes events up to and including `until`. Returns true when the
    /// queue still holds later events.
    bool run_until(Seconds until);
    RunReport report() const;

    /// Rewires every link of `target` to the given adversary peers, which
    /// then withhold honest blocks from it. Returns the dropped neighbors.
    std::vector<PeerId> eclipse(PeerId target, std::span<const PeerId> adversaries);
    /// Drops the adversary links and reconnects `target` to `peers`; both
    /// sides push their best chains on link-up.
    void rejoin(PeerId target, std::span<const PeerId> peers, std::span<const PeerId> adversaries);
    /// `adversary` builds `length` blocks on `base` in private and delivers them to `target` only.
    std::vector<Hash256> feed_private_fork(PeerId adversary, PeerId target, const Hash256& base, std::size_t length);
    /// Opens a link at the current time and syncs best chains across it.
    void connect(PeerId a, PeerId b, Seconds latency);

    [[nodiscard]] Seconds now() const { return now_; }
    [[nodiscard]] const PeerState& peer(PeerId id) const { return peers_.at(id); }
    [[nodiscard]] std::size_t peer_count() const { return peers_.size(); }
    [[nodiscard]] const Topology& topology() const { return topology_; }
    [[nodiscard]] const std::vector<TraceRecord>& trace() const { return trace_; }
    [[nodiscard]] const std::vector<Observation>& observations() const { return observations_; }
    [[nodiscard]] const std::map<TxId, PeerId>& origins() const { return origins_; }
    [[nodiscard]] const std::vector<CreatedBlock>& created_blocks() const { return created_; }
    /// Time each peer first held each block.
    [[nodiscard]] const std::unordered_map<Hash256, std::vector<Seconds>>& block_arrivals() const { return arrivals_; }
    [[nodiscard]] const TrickleStats& trickle_stats() const { return trickle_; }

private:
    struct Event {
        Seconds time = 0;
        std::uint64_t seq = 0;
        EventKind kind = EventKind::TxCreate;
        PeerId peer = 0;
        PeerId from = 0;
        bool has_from = false;
        Hash256 id;
        std::size_t payload = 0;
        std::uint64_t generation = 0;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    struct ScriptedBlock {
        std::vector<Transaction> txs;
        std::optional<Hash256> parent;
    };

    void push(Event ev);
    void handle(const Event& ev);
    void on_tx_create(const Event& ev);
    void on_inv(const Event& ev);
    void on_getdata(const Event& ev);
    void on_tx_deliver(const Event& ev);
    void on_trickle(const Event& ev);
    void on_block_found(const Event& ev);
    void on_block_deliver(const Event& ev);
    void on_link_up(const Event& ev);

    void accept_tx(PeerState& p, const Transaction& tx, bool own);
    void ensure_tick(PeerState& p);
    void receive_block(PeerState& p, std::optional<PeerId> from, const Block& block);
    void relay_block(PeerState& p, const Block& block, std::optional<PeerId> skip);
    void send_block(PeerState& p, PeerId to, const Block& block);
    void schedule_mining(PeerState& p);
    std::size_t store_block(const Block& b);
    void record(const Event& ev);

    Topology topology_;
    NetConfig config_;
    std::vector<PeerState> peers_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    Seconds now_ = 0;
    std::size_t processed_ = 0;

    Rng trickle_rng_;
    Rng mining_rng_;
    Rng link_rng_;

    std::vector<Block> blocks_;
    std::unordered_map<Hash256, std::size_t> block_index_;
    std::vector<Transaction> tx_payloads_;
    std::unordered_map<TxId, std::size_t> tx_slot_;
    std::vector<ScriptedBlock> scripted_;

    std::vector<TraceRecord> trace_;
    std::vector<Observation> observations_;
    std::map<TxId, PeerId> origins_;
    std::vector<CreatedBlock> created_;
    std::unordered_map<Hash256, std::vector<Seconds>> arrivals_;
    std::unordered_map<Hash256, Seconds> discovered_;
    std::vector<std::uint64_t> first_deliveries_;
    TrickleStats trickle_;
};

/// Neighbor that first announced `txid` to `adversary`; nullopt if never observed.
std::optional<PeerId> infer_origin_first_relay(std::span<const Observation> observations, const TxId& txid,
                                               std::optional<PeerId> adversary = std::nullopt);

/// Peers that could have originated `txid` given what `adversary` saw: the
/// first announcer, plus any of its neighbors the adversary cannot observe.
/// Collapses to a single peer when the adversary is linked to the first
/// announcer's whole neighborhood.
std::set<PeerId> infer_origin_candidates(std::span<const Observation> observations, const Topology& topology,
                                         PeerId adversary, const TxId& txid);

struct AccuracyEstimate {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0;
    /// 95% Wilson score interval.
    double lower = 0;
    double upper = 0;
};

AccuracyEstimate wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

/// First-relay guesses scored against the true origins of every observed transaction.
AccuracyEstimate origin_inference_accuracy(std::span<const Observation> observations,
                                           const std::map<TxId, PeerId>& truth, PeerId adversary);

/// One JSON object per line: time, kind, peer, from (or null), id.
void write_trace_jsonl(std::ostream& out, std::span<const TraceRecord> trace);
/// txid,peer_id with a header row, sorted by txid.
void write_origins_csv(std::ostream& out, const std::map<TxId, PeerId>& origins);
std::string report_json(const RunReport& report);

}  // namespace bclab::netsim
