#include "bclab/netsim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace bclab::netsim {

// ---------------------------------------------------------------- topology

PeerId Topology::add_peer() {
    adj_.emplace_back();
    return static_cast<PeerId>(adj_.size() - 1);
}

void Topology::add_edge(PeerId a, PeerId b, Seconds latency) {
    if (a == b) throw std::invalid_argument("self link");
    if (a >= size() || b >= size()) throw std::out_of_range("unknown peer");
    if (latency < 0) throw std::invalid_argument("negative latency");
    adj_[a].insert(b);
    adj_[b].insert(a);
    latency_[key(a, b)] = latency;
}

void Topology::remove_edge(PeerId a, PeerId b) {
    adj_.at(a).erase(b);
    adj_.at(b).erase(a);
    latency_.erase(key(a, b));
}

bool Topology::has_edge(PeerId a, PeerId b) const { return latency_.count(key(a, b)) != 0; }

Seconds Topology::latency(PeerId a, PeerId b) const { return latency_.at(key(a, b)); }

std::vector<std::pair<PeerId, PeerId>> Topology::edges() const {
    std::vector<std::pair<PeerId, PeerId>> out;
    out.reserve(latency_.size());
    for (const auto& [k, _] : latency_) out.push_back(k);
    return out;
}

std::vector<std::size_t> Topology::hops_from(PeerId source) const {
    std::vector<std::size_t> dist(size(), std::numeric_limits<std::size_t>::max());
    std::vector<PeerId> frontier{source};
    dist.at(source) = 0;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
        PeerId p = frontier[i];
        for (PeerId q : adj_[p]) {
            if (dist[q] != std::numeric_limits<std::size_t>::max()) continue;
            dist[q] = dist[p] + 1;
            frontier.push_back(q);
        }
    }
    return dist;
}

bool Topology::connected() const {
    if (size() == 0) return true;
    auto d = hops_from(0);
    return std::none_of(d.begin(), d.end(), [](std::size_t v) { return v == std::numeric_limits<std::size_t>::max(); });
}

namespace {

// One randomized attempt; returns false if some peer is left below min_peers.
bool try_build(Topology& g, std::size_t min_peers, std::size_t max_peers, Rng& rng) {
    const std::size_t n = g.size();
    std::vector<PeerId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (PeerId p : order) {
        while (g.degree(p) < min_peers) {
            std::vector<PeerId> hungry, spare;
            for (PeerId q = 0; q < n; ++q) {
                if (q == p || g.has_edge(p, q) || g.degree(q) >= max_peers) continue;
                (g.degree(q) < min_peers ? hungry : spare).push_back(q);
            }
            auto& pool = hungry.empty() ? spare : hungry;
            if (!pool.empty()) {
                g.add_edge(p, pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)], 0);
                continue;
            }
            // Everyone reachable is full: split an edge u-v into u-p-v.
            if (g.degree(p) + 2 > max_peers) return false;
            std::vector<std::pair<PeerId, PeerId>> splittable;
            for (auto [u, v] : g.edges())
                if (u != p && v != p && !g.has_edge(p, u) && !g.has_edge(p, v)) splittable.emplace_back(u, v);
            if (splittable.empty()) return false;
            auto [u, v] = splittable[std::uniform_int_distribution<std::size_t>(0, splittable.size() - 1)(rng)];
            g.remove_edge(u, v);
            g.add_edge(p, u, 0);
            g.add_edge(p, v, 0);
        }
    }

    // Bridge leftover components through peers with spare capacity.
    while (!g.connected()) {
        auto d = g.hops_from(0);
        std::optional<PeerId> inside, outside;
        for (PeerId q = 0; q < n; ++q) {
            if (g.degree(q) >= max_peers) continue;
            bool reached = d[q] != std::numeric_limits<std::size_t>::max();
            if (reached && !inside) inside = q;
            if (!reached && !outside) outside = q;
        }
        if (!inside || !outside) return false;
        g.add_edge(*inside, *outside, 0);
    }
    return true;
}

}  // namespace

Topology build_topology(std::size_t peers, std::size_t min_peers, std::size_t max_peers, std::uint64_t seed,
                        LatencyRange latency) {
    if (peers < 2) throw std::invalid_argument("topology needs at least two peers");
    if (min_peers == 0 || min_peers > max_peers)
        throw std::invalid_argument("peer bounds must satisfy 0 < min_peers <= max_peers");
    if (min_peers > peers - 1) throw std::invalid_argument("min_peers exceeds the number of other peers");
    if (latency.min < 0 || latency.min > latency.max) throw std::invalid_argument("bad latency range");
    const std::size_t cap = std::min(max_peers, peers - 1);
    if (cap == min_peers && (peers * min_peers) % 2 == 1)
        throw std::invalid_argument("no graph has every degree equal to min_peers with an odd peer count");
    if (cap == 1 && peers > 2) throw std::invalid_argument("degree bound of one cannot connect more than two peers");

    Rng rng = make_rng(seed, "topology");
    for (int attempt = 0; attempt < 200; ++attempt) {
        Topology g(peers);
        if (!try_build(g, min_peers, cap, rng)) continue;
        Rng lat = make_rng(seed, "latency");
        std::uniform_real_distribution<Seconds> draw(latency.min, latency.max);
        Topology out(peers);
        for (auto [a, b] : g.edges()) out.add_edge(a, b, latency.min == latency.max ? latency.min : draw(lat));
        return out;
    }
    throw std::invalid_argument("could not satisfy the peer bounds");
}

// ---------------------------------------------------------------- trickling

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::TxCreate: return "TxCreate";
        case EventKind::InvAnnounce: return "InvAnnounce";
        case EventKind::GetData: return "GetData";
        case EventKind::TxDeliver: return "TxDeliver";
        case EventKind::BlockFound: return "BlockFound";
        case EventKind::BlockDeliver: return "BlockDeliver";
        case EventKind::TrickleTick: return "TrickleTick";
        case EventKind::LinkUp: return "LinkUp";
    }
    return "?";
}

std::vector<TxId> choose_trickle(std::span<const TxId> pool, const std::unordered_set<TxId>& own, double probability,
                                 Rng& rng) {
    std::bernoulli_distribution coin(probability);
    std::vector<TxId> out;
    for (const TxId& id : pool)
        if (own.count(id) || coin(rng)) out.push_back(id);
    return out;
}

// ---------------------------------------------------------------- simulation

Simulation::Simulation(Topology topology, NetConfig config, Block genesis)
    : topology_(std::move(topology)),
      config_(std::move(config)),
      trickle_rng_(make_rng(config_.seed, "trickle")),
      mining_rng_(make_rng(config_.seed, "mining")),
      link_rng_(make_rng(config_.seed, "links")) {
    config_.chain.verify_pow = false;
    config_.chain.validate();
    if (config_.trickle_interval <= 0) throw std::invalid_argument("trickle interval must be positive");
    if (config_.trickle_probability < 0 || config_.trickle_probability > 1)
        throw std::invalid_argument("trickle probability must lie in [0, 1]");

    BlockTree base(config_.chain, genesis);
    Rng phase_rng = make_rng(config_.seed, "phase");
    std::uniform_real_distribution<Seconds> phase(0, config_.trickle_interval);
    peers_.reserve(topology_.size());
    for (PeerId p = 0; p < topology_.size(); ++p) {
        PeerState& s = peers_.emplace_back(p, base);
        s.neighbors = topology_.neighbors(p);
        s.tick_phase = phase(phase_rng);
    }
    first_deliveries_.assign(peers_.size(), 0);
    arrivals_[base.genesis()].assign(peers_.size(), 0);
    discovered_[base.genesis()] = 0;

    for (PeerId o : config_.observers) peers_.at(o).observer = true;
    for (const MinerSpec& m : config_.miners) {
        PeerState& s = peers_.at(m.peer);
        if (m.hash_share < 0) throw std::invalid_argument("negative hash share");
        s.is_miner = true;
        s.hash_share = m.hash_share;
        s.reward_address = m.reward_address;
    }
    for (const MinerSpec& m : config_.miners) schedule_mining(peers_[m.peer]);
}

void Simulation::push(Event ev) {
    ev.seq = next_seq_++;
    queue_.push(ev);
}

void Simulation::submit_tx(Seconds t, PeerId origin, Transaction tx) {
    if (origin >= peers_.size()) throw std::out_of_range("unknown origin peer");
    if (t < now_) throw std::invalid_argument("transaction scheduled in the past");
    std::size_t slot = tx_payloads_.size();
    tx_slot_.emplace(tx.txid, slot);
    Event ev;
    ev.time = t;
    ev.kind = EventKind::TxCreate;
    ev.peer = origin;
    ev.id = tx.txid;
    ev.payload = slot;
    tx_payloads_.push_back(std::move(tx));
    push(ev);
}

void Simulation::schedule_block(Seconds t, PeerId miner, std::vector<Transaction> txs, std::optional<Hash256> parent) {
    if (miner >= peers_.size()) throw std::out_of_range("unknown miner peer");
    if (t < now_) throw std::invalid_argument("block scheduled in the past");
    scripted_.push_back({std::move(txs), parent});
    Event ev;
    ev.time = t;
    ev.kind = EventKind::BlockFound;
    ev.peer = miner;
    ev.payload = scripted_.size();  // 0 is reserved for random discoveries
    push(ev);
}

bool Simulation::run_until(Seconds until) {
    while (!queue_.empty() && queue_.top().time <= until) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        ++processed_;
        handle(ev);
    }
    now_ = std::max(now_, until);
    return !queue_.empty();
}

void Simulation::record(const Event& ev) {
    if (!config_.record_trace) return;
    TraceRecord r;
    r.time = ev.time;
    r.kind = ev.kind;
    r.peer = ev.peer;
    if (ev.has_from) r.from = ev.from;
    r.id = ev.id;
    trace_.push_back(r);
}

void Simulation::handle(const Event& ev) {
    switch (ev.kind) {
        case EventKind::TxCreate: on_tx_create(ev); break;
        case EventKind::InvAnnounce: on_inv(ev); break;
        case EventKind::GetData: on_getdata(ev); break;
        case EventKind::TxDeliver: on_tx_deliver(ev); break;
        case EventKind::TrickleTick: on_trickle(ev); break;
        case EventKind::BlockFound: on_block_found(ev); break;
        case EventKind::BlockDeliver: on_block_deliver(ev); break;
        case EventKind::LinkUp: on_link_up(ev); break;
    }
}

void Simulation::accept_tx(PeerState& p, const Transaction& tx, bool own) {
    p.known.emplace(tx.txid, tx);
    p.requested.erase(tx.txid);
    if (p.observer) return;
    p.pool.push_back(tx.txid);
    if (own) p.own.insert(tx.txid);
    ensure_tick(p);
}

void Simulation::ensure_tick(PeerState& p) {
    if (p.tick_scheduled || p.pool.empty()) return;
    const Seconds iv = config_.trickle_interval;
    double k = std::floor((now_ - p.tick_phase) / iv) + 1;
    Seconds next = p.tick_phase + std::max(k, 0.0) * iv;
    if (next <= now_) next += iv;
    Event ev;
    ev.time = next;
    ev.kind = EventKind::TrickleTick;
    ev.peer = p.id;
    push(ev);
    p.tick_scheduled = true;
}

void Simulation::on_tx_create(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    const Transaction& tx = tx_payloads_[ev.payload];
    origins_.emplace(tx.txid, p.id);
    if (p.known.count(tx.txid)) return;
    accept_tx(p, tx, true);
}

void Simulation::on_trickle(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    p.tick_scheduled = false;
    ++trickle_.ticks;
    auto chosen = choose_trickle(p.pool, p.own, config_.trickle_probability, trickle_rng_);
    for (const TxId& id : p.pool) trickle_.foreign_considered += p.own.count(id) ? 0 : 1;

    std::unordered_set<TxId> sent(chosen.begin(), chosen.end());
    for (const TxId& id : chosen) {
        (p.own.count(id) ? trickle_.own_announced : trickle_.foreign_announced) += 1;
        for (PeerId n : p.neighbors) {
            auto& has = p.neighbor_has[n];
            if (!has.insert(id).second) continue;
            Event inv;
            inv.time = now_ + topology_.latency(p.id, n);
            inv.kind = EventKind::InvAnnounce;
            inv.peer = n;
            inv.from = p.id;
            inv.has_from = true;
            inv.id = id;
            push(inv);
        }
    }
    std::erase_if(p.pool, [&](const TxId& id) { return sent.count(id) != 0; });
    ensure_tick(p);
}

void Simulation::on_inv(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    if (!topology_.has_edge(p.id, ev.from)) return;  // link dropped in flight
    p.neighbor_has[ev.from].insert(ev.id);
    if (p.observer) {
        observations_.push_back({p.id, ev.id, ev.from, now_});
        return;
    }
    if (p.known.count(ev.id) || !p.requested.insert(ev.id).second) return;
    Event req;
    req.time = now_ + topology_.latency(p.id, ev.from);
    req.kind = EventKind::GetData;
    req.peer = ev.from;
    req.from = p.id;
    req.has_from = true;
    req.id = ev.id;
    push(req);
}

void Simulation::on_getdata(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    if (!p.known.count(ev.id) || !topology_.has_edge(p.id, ev.from)) return;
    Event deliver;
    deliver.time = now_ + topology_.latency(p.id, ev.from);
    deliver.kind = EventKind::TxDeliver;
    deliver.peer = ev.from;
    deliver.from = p.id;
    deliver.has_from = true;
    deliver.id = ev.id;
    deliver.payload = tx_slot_.at(ev.id);
    push(deliver);
}

void Simulation::on_tx_deliver(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    p.neighbor_has[ev.from].insert(ev.id);
    if (p.known.count(ev.id)) return;
    ++first_deliveries_[ev.from];
    accept_tx(p, tx_payloads_[ev.payload], false);
}

void Simulation::schedule_mining(PeerState& p) {
    ++p.mining_generation;
    if (!p.is_miner || p.hash_share <= 0 || now_ >= config_.mining_until) return;
    const ChainParams& cp = config_.chain;
    U256 next = p.tree.next_target(p.tree.tip());
    double difficulty = static_cast<double>(block_work(cp.initial_target)) / static_cast<double>(block_work(next));
    double rate = p.hash_share / static_cast<double>(cp.target_block_interval) / difficulty;
    Seconds wait = std::exponential_distribution<double>(rate)(mining_rng_);
    if (now_ + wait > config_.mining_until) return;
    Event ev;
    ev.time = now_ + wait;
    ev.kind = EventKind::BlockFound;
    ev.peer = p.id;
    ev.generation = p.mining_generation;
    push(ev);
}

std::size_t Simulation::store_block(const Block& b) {
    Hash256 h = b.hash();
    auto it = block_index_.find(h);
    if (it != block_index_.end()) return it->second;
    blocks_.push_back(b);
    block_index_.emplace(h, blocks_.size() - 1);
    return blocks_.size() - 1;
}

void Simulation::on_block_found(const Event& ev) {
    PeerState& p = peers_[ev.peer];
    std::vector<Transaction> txs;
    Hash256 parent = p.tree.tip();
    if (ev.payload == 0) {
        if (ev.generation != p.mining_generation) return;  // tip moved since this was drawn
        if (config_.mine_transactions) {
            std::vector<Transaction> mempool;
            for (const auto& [id, tx] : p.known)
                if (p.tree.confirmations(id) == 0) mempool.push_back(tx);
            std::sort(mempool.begin(), mempool.end(),
                      [](const Transaction& a, const Transaction& b) { return a.txid < b.txid; });
            txs = select_txs(mempool, p.tree.utxo(), config_.chain);
        }
    } else {
        ScriptedBlock& s = scripted_[ev.payload - 1];
        txs = s.txs;
        if (s.parent) parent = *s.parent;
        if (!p.tree.contains(parent)) return;  // the miner never saw the requested parent
    }

    Block b = p.tree.assemble_block(parent, p.reward_address, std::move(txs), static_cast<SimTime>(std::floor(now_)));
    b.header.nonce = static_cast<std::uint32_t>(created_.size());
    Hash256 h = b.hash();
    Event found = ev;
    found.id = h;
    record(found);
    created_.push_back({h, p.id, now_, p.tree.node(parent).height + 1});
    discovered_.emplace(h, now_);
    receive_block(p, std::nullopt, b);
    if (ev.payload == 0) schedule_mining(p);
}

void Simulation::on_block_deliver(const Event& ev) {
    record(ev);
    if (!topology_.has_edge(ev.peer, ev.from)) return;
    receive_block(peers_[ev.peer], ev.from, blocks_[ev.payload]);
}

void Simulation::receive_block(PeerState& p, std::optional<PeerId> from, const Block& block) {
    Hash256 h = block.hash();
    if (from) {
        p.neighbor_has[*from].insert(h);
        if (p.censor.count(*from)) return;  // an eclipsing peer ignores its victim
    }
    ConnectResult r = p.tree.connect_block(block);
    if (r.status == ConnectStatus::Rejected || r.status == ConnectStatus::Duplicate) return;

    auto& times = arrivals_[h];
    if (times.empty()) times.assign(peers_.size(), -1);
    if (times[p.id] < 0) times[p.id] = now_;

    relay_block(p, block, from);
    if (r.tip_changed && p.is_miner) schedule_mining(p);
}

void Simulation::relay_block(PeerState& p, const Block& block, std::optional<PeerId> skip) {
    for (PeerId n : p.neighbors) {
        if (skip && n == *skip) continue;
        if (p.censor.count(n)) continue;
        send_block(p, n, block);
    }
}

void Simulation::send_block(PeerState& p, PeerId to, const Block& block) {
    Hash256 h = block.hash();
    if (!p.neighbor_has[to].insert(h).second) return;
    Event ev;
    ev.time = now_ + topology_.latency(p.id, to);
    ev.kind = EventKind::BlockDeliver;
    ev.peer = to;
    ev.from = p.id;
    ev.has_from = true;
    ev.id = h;
    ev.payload = store_block(block);
    push(ev);
}

void Simulation::on_link_up(const Event& ev) {
    record(ev);
    PeerState& p = peers_[ev.peer];
    if (!topology_.has_edge(p.id, ev.from) || p.censor.count(ev.from)) return;
    const auto& chain = p.tree.best_chain();
    for (std::size_t i = 1; i < chain.size(); ++i) send_block(p, ev.from, p.tree.node(chain[i]).block);
}

void Simulation::connect(PeerId a, PeerId b, Seconds latency) {
    topology_.add_edge(a, b, latency);
    peers_.at(a).neighbors.insert(b);
    peers_.at(b).neighbors.insert(a);
    for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        Event ev;
        ev.time = now_;
        ev.kind = EventKind::LinkUp;
        ev.peer = x;
        ev.from = y;
        ev.has_from = true;
        push(ev);
    }
}

std::vector<PeerId> Simulation::eclipse(PeerId target, std::span<const PeerId> adversaries) {
    PeerState& t = peers_.at(target);
    std::vector<PeerId> dropped(t.neighbors.begin(), t.neighbors.end());
    for (PeerId n : dropped) {
        topology_.remove_edge(target, n);
        peers_[n].neighbors.erase(target);
        peers_[n].neighbor_has.erase(target);
    }
    t.neighbors.clear();
    t.neighbor_has.clear();
    std::uniform_real_distribution<Seconds> lat(config_.link_latency.min, config_.link_latency.max);
    for (PeerId a : adversaries) {
        if (a == target) throw std::invalid_argument("target cannot be its own adversary");
        peers_.at(a).censor.insert(target);
        connect(target, a, lat(link_rng_));
    }
    return dropped;
}

void Simulation::rejoin(PeerId target, std::span<const PeerId> peers, std::span<const PeerId> adversaries) {
    PeerState& t = peers_.at(target);
    for (PeerId a : adversaries) {
        peers_.at(a).censor.erase(target);
        if (!topology_.has_edge(target, a)) continue;
        topology_.remove_edge(target, a);
        peers_[a].neighbors.erase(target);
        peers_[a].neighbor_has.erase(target);
        t.neighbors.erase(a);
        t.neighbor_has.erase(a);
    }
    std::uniform_real_distribution<Seconds> lat(config_.link_latency.min, config_.link_latency.max);
    for (PeerId p : peers)
        if (!topology_.has_edge(target, p)) connect(target, p, lat(link_rng_));
}

std::vector<Hash256> Simulation::feed_private_fork(PeerId adversary, PeerId target, const Hash256& base,
                                                   std::size_t length) {
    PeerState& a = peers_.at(adversary);
    if (!topology_.has_edge(adversary, target)) throw std::invalid_argument("adversary is not linked to the target");
    // Built on a scratch copy so the adversary's public view stays honest.
    BlockTree scratch = a.tree;
    std::vector<Hash256> out;
    Hash256 parent = base;
    for (std::size_t i = 0; i < length; ++i) {
        Block b = scratch.assemble_block(parent, a.reward_address, {}, static_cast<SimTime>(std::floor(now_)));
        // Private blocks draw nonces from the top of the range to stay clear of honest ones.
        b.header.nonce = std::numeric_limits<std::uint32_t>::max() - static_cast<std::uint32_t>(out.size()) -
                         static_cast<std::uint32_t>(blocks_.size());
        ConnectResult r = scratch.connect_block(b);
        if (r.status != ConnectStatus::Accepted) throw std::logic_error("private fork block rejected");
        parent = b.hash();
        out.push_back(parent);
        send_block(a, target, b);
    }
    return out;
}

// ---------------------------------------------------------------- reporting

RunReport Simulation::report() const {
    RunReport r;
    r.end_time = now_;
    r.horizon_exhausted = !queue_.empty();
    r.events = processed_;
    r.blocks_created = created_.size();
    r.trickle = trickle_;

    // Reference view: the tip held by most peers, heavier work then lower hash on ties.
    std::map<Hash256, std::size_t> votes;
    for (const PeerState& p : peers_) ++votes[p.tree.tip()];
    const PeerState* ref = &peers_.front();
    std::size_t best_votes = 0;
    for (const PeerState& p : peers_) {
        std::size_t v = votes[p.tree.tip()];
        if (v > best_votes || (v == best_votes && p.tree.tip_work() > ref->tree.tip_work())) {
            ref = &p;
            best_votes = v;
        }
    }
    r.reference_tip = ref->tree.tip();
    r.reference_height = ref->tree.height();
    r.tips_agree = votes.size() == 1;
    for (const CreatedBlock& c : created_)
        if (!ref->tree.on_best_chain(c.hash)) ++r.stale_blocks;

    const std::size_t n = peers_.size();
    for (const CreatedBlock& c : created_) {
        PropagationStats s;
        s.block = c.hash;
        std::vector<Seconds> delays;
        auto it = arrivals_.find(c.hash);
        if (it != arrivals_.end())
            for (Seconds t : it->second)
                if (t >= 0) delays.push_back(t - c.time);
        std::sort(delays.begin(), delays.end());
        s.reached = delays.size();
        auto at_fraction = [&](double f) -> Seconds {
            auto need = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n)));
            return need == 0 ? 0 : need <= delays.size() ? delays[need - 1] : -1;
        };
        s.to_half = at_fraction(0.5);
        s.to_90 = at_fraction(0.9);
        s.to_all = at_fraction(1.0);
        r.propagation.push_back(s);
    }

    std::vector<std::uint64_t> relays = first_deliveries_;
    std::sort(relays.rbegin(), relays.rend());
    auto total = std::accumulate(relays.begin(), relays.end(), std::uint64_t{0});
    auto top = std::accumulate(relays.begin(), relays.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(20, relays.size())),
                               std::uint64_t{0});
    r.top20_relay_share = total == 0 ? 0 : static_cast<double>(top) / static_cast<double>(total);
    return r;
}

// ---------------------------------------------------------------- inference

std::optional<PeerId> infer_origin_first_relay(std::span<const Observation> observations, const TxId& txid,
                                               std::optional<PeerId> adversary) {
    const Observation* first = nullptr;
    for (const Observation& o : observations) {
        if (o.txid != txid || (adversary && o.adversary != *adversary)) continue;
        if (!first || o.time < first->time) first = &o;
    }
    if (!first) return std::nullopt;
    return first->from;
}

std::set<PeerId> infer_origin_candidates(std::span<const Observation> observations, const Topology& topology,
                                         PeerId adversary, const TxId& txid) {
    auto first = infer_origin_first_relay(observations, txid, adversary);
    if (!first) return {};
    std::set<PeerId> out{*first};
    // A neighbor the adversary cannot hear could have handed the tx to the first relayer.
    for (PeerId n : topology.neighbors(*first))
        if (n != adversary && !topology.has_edge(adversary, n)) out.insert(n);
    return out;
}

AccuracyEstimate wilson_interval(std::size_t successes, std::size_t trials, double z) {
    AccuracyEstimate e;
    e.correct = successes;
    e.total = trials;
    if (trials == 0) return e;
    double n = static_cast<double>(trials);
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    e.accuracy = p;
    e.lower = std::max(0.0, centre - half);
    e.upper = std::min(1.0, centre + half);
    return e;
}

AccuracyEstimate origin_inference_accuracy(std::span<const Observation> observations,
                                           const std::map<TxId, PeerId>& truth, PeerId adversary) {
    std::size_t correct = 0, total = 0;
    for (const auto& [txid, origin] : truth) {
        if (origin == adversary) continue;
        auto guess = infer_origin_first_relay(observations, txid, adversary);
        if (!guess) continue;
        ++total;
        correct += *guess == origin ? 1 : 0;
    }
    return wilson_interval(correct, total);
}

// ---------------------------------------------------------------- export

void write_trace_jsonl(std::ostream& out, std::span<const TraceRecord> trace) {
    for (const TraceRecord& r : trace) {
        nlohmann::ordered_json j;
        j["time"] = r.time;
        j["kind"] = to_string(r.kind);
        j["peer"] = r.peer;
        j["from"] = r.from ? nlohmann::ordered_json(*r.from) : nlohmann::ordered_json(nullptr);
        j["id"] = r.id.hex();
        out << j.dump() << '\n';
    }
}

void write_origins_csv(std::ostream& out, const std::map<TxId, PeerId>& origins) {
    out << "txid,peer_id\n";
    for (const auto& [txid, peer] : origins) out << txid.hex() << ',' << peer << '\n';
}

std::string report_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["end_time"] = r.end_time;
    j["horizon_exhausted"] = r.horizon_exhausted;
    j["events"] = r.events;
    j["blocks_created"] = r.blocks_created;
    j["stale_blocks"] = r.stale_blocks;
    j["tips_agree"] = r.tips_agree;
    j["reference_tip"] = r.reference_tip.hex();
    j["reference_height"] = r.reference_height;
    j["trickle"] = {{"ticks", r.trickle.ticks},
                    {"foreign_considered", r.trickle.foreign_considered},
                    {"foreign_announced", r.trickle.foreign_announced},
                    {"own_announced", r.trickle.own_announced},
                    {"foreign_rate", r.trickle.foreign_considered == 0
                                         ? 0.0
                                         : static_cast<double>(r.trickle.foreign_announced) /
                                               static_cast<double>(r.trickle.foreign_considered)}};
    auto& prop = j["propagation"] = nlohmann::ordered_json::array();
    for (const PropagationStats& s : r.propagation)
        prop.push_back({{"block", s.block.hex()},
                        {"reached", s.reached},
                        {"to_half", s.to_half},
                        {"to_90", s.to_90},
                        {"to_all", s.to_all}});
    j["top20_relay_share"] = r.top20_relay_share;
    return j.dump(2);
}

}  // namespace bclab::netsim
