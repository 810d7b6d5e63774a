#include "bclab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace bclab {

void EntityProfile::validate() const {
    auto prob = [](double v, const char* name) {
        if (!(v >= 0 && v <= 1)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    };
    prob(reuse, "reuse");
    prob(fresh_change, "fresh_change");
    prob(peeling, "peeling");
    prob(coinjoin, "coinjoin");
    prob(paired_sends, "paired_sends");
    if (!(activity >= 0)) throw std::invalid_argument("activity must be non-negative");
}

ChainParams ScenarioConfig::default_chain() {
    ChainParams p;
    p.verify_pow = false;
    p.retarget_enabled = false;
    return p;
}

void ScenarioConfig::validate() const {
    if (entities < 2) throw std::invalid_argument("scenario needs at least two entities");
    if (peers == 0) throw std::invalid_argument("peers must be positive");
    defaults.validate();
    for (const auto& p : profiles) {
        p.validate();
        if (p.id == 0 || p.id > entities) throw std::invalid_argument("profile id out of range");
    }
    if (coinjoin_min < 2 || coinjoin_min > coinjoin_max)
        throw std::invalid_argument("coinjoin sizes must satisfy 2 <= min <= max");
    for (const PeelPlan& p : peel_chains) {
        if (p.length < 2) throw std::invalid_argument("peeling chains need at least two links");
        if (!(p.fraction > 0 && p.fraction < 0.5)) throw std::invalid_argument("peel fraction must lie in (0, 0.5)");
        if (p.fund <= 0) throw std::invalid_argument("peel fund must be positive");
    }
    if (funding_outputs == 0 || funding_min <= 0 || funding_min > funding_max)
        throw std::invalid_argument("funding amounts must satisfy 0 < min <= max");
    if (fee < 0) throw std::invalid_argument("fee must be non-negative");
    if (!(marked_fraction >= 0 && marked_fraction <= 1)) throw std::invalid_argument("marked_fraction must lie in [0, 1]");
    if (!(peel_guard >= 0 && peel_guard < 0.5)) throw std::invalid_argument("peel_guard must lie in [0, 0.5)");
    chain.validate();
}

std::vector<const Transaction*> Scenario::transactions() const {
    std::vector<const Transaction*> out;
    for (const Block& b : chain)
        for (const Transaction& tx : b.txs) out.push_back(&tx);
    return out;
}

Transaction make_coinjoin(std::span<const CoinjoinParticipant> participants, Amount denomination, Amount fee_each,
                          SimTime timestamp, Rng& rng) {
    std::set<EntityId> entities;
    for (const auto& p : participants) entities.insert(p.entity);
    if (entities.size() < 2) throw std::invalid_argument("a coinjoin needs at least two distinct entities");
    if (denomination <= 0) throw std::invalid_argument("coinjoin denomination must be positive");

    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;
    for (const auto& p : participants) {
        if (p.coins.empty()) throw std::invalid_argument("every coinjoin participant must bring a coin");
        Amount in = 0;
        for (const OwnedCoin& c : p.coins) {
            inputs.push_back({c.outpoint, c.address});
            in += c.amount;
        }
        Amount change = in - denomination - fee_each;
        if (change < 0) throw std::invalid_argument("coinjoin participant cannot cover the denomination");
        outputs.push_back({p.mixed_output, denomination});
        if (change > 0) outputs.push_back({p.change_output, change});
    }
    std::shuffle(inputs.begin(), inputs.end(), rng);
    std::shuffle(outputs.begin(), outputs.end(), rng);
    return make_transaction(std::move(inputs), std::move(outputs), timestamp);
}

std::vector<Transaction> plant_peeling_chain(const OwnedCoin& start, const PeelPlan& plan,
                                             const std::function<AddressId()>& next_change,
                                             const std::function<AddressId()>& peel_to, SimTime timestamp,
                                             SimTime spacing, Rng& rng) {
    if (plan.length < 2) throw std::invalid_argument("peeling chains need at least two links");
    if (!(plan.fraction > 0 && plan.fraction < 0.5)) throw std::invalid_argument("peel fraction must lie in (0, 0.5)");
    // Worst case every step peels the full fraction; the last input must still allow a 1-sat peel.
    if (static_cast<double>(start.amount) * std::pow(1 - plan.fraction, static_cast<double>(plan.length - 1)) *
            plan.fraction < 1)
        throw std::invalid_argument("coin too small to peel at every step");

    std::uniform_real_distribution<double> share(0.5, 1.0);
    std::vector<Transaction> chain;
    OwnedCoin coin = start;
    for (std::size_t i = 0; i < plan.length; ++i) {
        auto cap = static_cast<Amount>(std::floor(static_cast<double>(coin.amount) * plan.fraction));
        Amount peel = std::clamp<Amount>(static_cast<Amount>(static_cast<double>(cap) * share(rng)), 1, cap);
        AddressId change_addr = next_change();
        std::vector<TxOutput> outs{{peel_to(), peel}, {change_addr, coin.amount - peel}};
        if (std::bernoulli_distribution(0.5)(rng)) std::swap(outs[0], outs[1]);
        Transaction tx = make_transaction({{coin.outpoint, coin.address}}, outs,
                                          timestamp + static_cast<SimTime>(i) * spacing);
        std::uint32_t idx = outs[0].address == change_addr ? 0 : 1;
        coin = {tx.outpoint(idx), change_addr, coin.amount - peel};
        chain.push_back(std::move(tx));
    }
    return chain;
}

namespace {

struct Wallet {
    std::vector<OwnedCoin> coins;
    std::vector<AddressId> addresses;

    [[nodiscard]] Amount balance() const {
        Amount b = 0;
        for (const auto& c : coins) b += c.amount;
        return b;
    }
    void remove(const Outpoint& op) {
        std::erase_if(coins, [&](const OwnedCoin& c) { return c.outpoint == op; });
    }
};

class Generator {
public:
    explicit Generator(const ScenarioConfig& cfg)
        : cfg_(cfg), rng_(make_rng(cfg.seed, "scenario")), timing_(make_rng(cfg.seed, "scenario-timing")) {}

    Scenario run();

private:
    enum class Kind { Activate, PeelStep };
    struct Event {
        double time = 0;
        std::uint64_t seq = 0;
        Kind kind = Kind::Activate;
        EntityId entity = 0;
        std::size_t chain = 0;
        std::size_t step = 0;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    struct PendingChain {
        std::vector<Transaction> txs;
        /// Entity credited with each step's peel output.
        std::vector<EntityId> recipients;
    };

    AddressId fresh(EntityId e) {
        AddressId id = next_address_++;
        truth_.owner[id] = e;
        wallets_[e].addresses.push_back(id);
        return id;
    }
    void credit(const Transaction& tx, std::uint32_t index, EntityId e) {
        const TxOutput& out = tx.outputs[index];
        wallets_[e].coins.push_back({tx.outpoint(index), out.address, out.amount});
    }
    void emit(Transaction tx, EntityId sender) {
        truth_.origin_peer[tx.txid] = profiles_[sender].home_peer;
        stream_.push_back(std::move(tx));
    }
    void push(Event ev) {
        ev.seq = seq_++;
        queue_.push(ev);
    }
    void schedule_activation(EntityId e, double now) {
        double rate = profiles_[e].activity / 3600.0;
        if (rate <= 0) return;
        push({now + std::exponential_distribution<double>(rate)(timing_), 0, Kind::Activate, e, 0, 0});
    }
    EntityId other_entity(EntityId not_this) {
        std::uniform_int_distribution<EntityId> pick(1, static_cast<EntityId>(cfg_.entities - 1));
        EntityId e = pick(rng_);
        return e >= not_this ? e + 1 : e;
    }
    EntityId payee(EntityId sender) {
        if (!cfg_.preferential) return other_entity(sender);
        for (;;) {
            EntityId e = urn_[std::uniform_int_distribution<std::size_t>(0, urn_.size() - 1)(rng_)];
            if (e == sender) continue;
            urn_.push_back(e);
            return e;
        }
    }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool chance(double p) { return p > 0 && std::bernoulli_distribution(p)(rng_); }
    SimTime stamp(double t) const { return static_cast<SimTime>(std::floor(t)); }

    void setup_entities();
    void fund(Block& genesis_out);
    bool activate(EntityId e, double now);
    bool pay(EntityId e, double now);
    bool paired_payments(EntityId e, double now);
    bool coinjoin(EntityId e, double now);
    bool start_peel(EntityId e, const OwnedCoin& coin, const PeelPlan& plan, double now);
    void pack_blocks();

    const ScenarioConfig& cfg_;
    Rng rng_;
    Rng timing_;
    std::vector<EntityProfile> profiles_;
    std::vector<Wallet> wallets_;
    GroundTruth truth_;
    AddressId next_address_ = 1;
    std::vector<Transaction> stream_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t seq_ = 0;
    std::vector<PendingChain> chains_;
    /// Dedicated entities of planted chains, in plan order.
    std::vector<EntityId> planted_;
    std::vector<OwnedCoin> planted_coins_;
    std::optional<BlockTree> tree_;
    std::vector<EntityId> urn_;
    SimTime start_time_ = 0;
};

void Generator::setup_entities() {
    const std::size_t total = 1 + cfg_.entities + cfg_.peel_chains.size();
    profiles_.resize(total);
    wallets_.resize(total);
    profiles_[kMinerEntity] = EntityProfile{};
    profiles_[kMinerEntity].activity = 0;
    for (EntityId e = 1; e <= cfg_.entities; ++e) {
        profiles_[e] = cfg_.defaults;
        profiles_[e].id = e;
        profiles_[e].home_peer = (e - 1) % cfg_.peers;
    }
    for (const EntityProfile& p : cfg_.profiles) profiles_[p.id] = p;
    for (std::size_t i = 0; i < cfg_.peel_chains.size(); ++i) {
        auto e = static_cast<EntityId>(cfg_.entities + 1 + i);
        profiles_[e] = EntityProfile{};
        profiles_[e].id = e;
        profiles_[e].activity = 0;
        profiles_[e].home_peer = (e - 1) % cfg_.peers;
        planted_.push_back(e);
    }
}

void Generator::fund(Block& genesis) {
    std::uniform_int_distribution<Amount> amount(cfg_.funding_min, cfg_.funding_max);
    ChainParams params = cfg_.chain;

    if (cfg_.funding == FundingMode::Faucet) {
        std::vector<TxOutput> alloc;
        std::vector<EntityId> owners;
        for (EntityId e = 1; e <= cfg_.entities; ++e)
            for (std::size_t k = 0; k < cfg_.funding_outputs; ++k) {
                alloc.push_back({fresh(e), amount(rng_)});
                owners.push_back(e);
            }
        for (std::size_t i = 0; i < planted_.size(); ++i) {
            alloc.push_back({fresh(planted_[i]), cfg_.peel_chains[i].fund});
            owners.push_back(planted_[i]);
        }
        genesis = BlockTree::make_genesis(params, alloc, 0);
        tree_.emplace(params, genesis);
        for (std::uint32_t i = 0; i < alloc.size(); ++i) {
            const EntityId owner = owners[i];
            OwnedCoin c{genesis.coinbase.outpoint(i), alloc[i].address, alloc[i].amount};
            if (owner > cfg_.entities)
                planted_coins_.push_back(c);
            else
                wallets_[owner].coins.push_back(c);
        }
        start_time_ = 1;
        return;
    }

    // Mining: every funding coin is a block reward.
    genesis = BlockTree::make_genesis(params, {{fresh(kMinerEntity), subsidy(0, params)}}, 0);
    tree_.emplace(params, genesis);
    SimTime t = 0;
    auto mine_to = [&](EntityId e) {
        t += params.target_block_interval;
        Block b = tree_->assemble_block(tree_->tip(), fresh(e), {}, t);
        if (tree_->connect_block(b).status != ConnectStatus::Accepted) throw std::logic_error("funding block rejected");
        return OwnedCoin{b.coinbase.outpoint(0), b.coinbase.outputs[0].address, b.coinbase.outputs[0].amount};
    };
    for (EntityId e = 1; e <= cfg_.entities; ++e)
        for (std::size_t k = 0; k < cfg_.funding_outputs; ++k) wallets_[e].coins.push_back(mine_to(e));
    for (EntityId e : planted_) planted_coins_.push_back(mine_to(e));
    start_time_ = t + 1;
}

bool Generator::pay(EntityId e, double now) {
    Wallet& w = wallets_[e];
    const Amount fee = cfg_.fee;
    Amount balance = w.balance();
    if (balance <= 2 * fee + 2) return false;
    Amount amount = std::max<Amount>(1, static_cast<Amount>(static_cast<double>(balance) * uniform(0.2, 0.6)));

    std::vector<std::size_t> order(w.coins.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::size_t> used;
    Amount total = 0;
    std::size_t next = 0;
    while (total < amount + fee && next < order.size()) {
        used.push_back(order[next]);
        total += w.coins[order[next++]].amount;
    }
    if (total < amount + fee) return false;
    Amount change = total - amount - fee;
    auto peel_like = [&] {
        double guard = cfg_.peel_guard * static_cast<double>(total);
        return used.size() == 1 && change > 0 &&
               static_cast<double>(std::min(amount, change)) <= guard;
    };
    if (peel_like()) {
        if (next < order.size()) {
            used.push_back(order[next]);
            total += w.coins[order[next++]].amount;
            change = total - amount - fee;
        } else {
            amount = total - fee;
            change = 0;
        }
    }
    if (amount <= 0) return false;

    EntityId to = payee(e);
    const EntityProfile& rp = profiles_[to];
    AddressId pay_addr = !wallets_[to].addresses.empty() && chance(rp.reuse)
                             ? wallets_[to].addresses[std::uniform_int_distribution<std::size_t>(
                                   0, wallets_[to].addresses.size() - 1)(rng_)]
                             : fresh(to);

    std::vector<TxInput> inputs;
    for (std::size_t i : used) inputs.push_back({w.coins[i].outpoint, w.coins[i].address});
    std::vector<TxOutput> outputs{{pay_addr, amount}};
    EntityId change_owner = e;
    if (change > 0) {
        AddressId change_addr = chance(profiles_[e].fresh_change) ? fresh(e) : inputs.front().signer;
        outputs.push_back({change_addr, change});
        if (chance(0.5)) std::swap(outputs[0], outputs[1]);
    }
    Transaction tx = make_transaction(inputs, outputs, stamp(now));
    for (const auto& in : inputs) w.remove(in.outpoint);
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i)
        credit(tx, i, tx.outputs[i].address == pay_addr ? to : change_owner);
    emit(std::move(tx), e);
    return true;
}

bool Generator::paired_payments(EntityId e, double now) {
    Wallet& w = wallets_[e];
    // Two coins on two distinct addresses, spent side by side.
    std::vector<std::size_t> idx(w.coins.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng_);
    std::optional<std::size_t> a, b;
    for (std::size_t i : idx) {
        if (!a) a = i;
        else if (w.coins[i].address != w.coins[*a].address) {
            b = i;
            break;
        }
    }
    if (!a || !b) return false;
    OwnedCoin ca = w.coins[*a], cb = w.coins[*b];
    Amount base = static_cast<Amount>(static_cast<double>(std::min(ca.amount, cb.amount)) * uniform(0.3, 0.45));
    Amount amounts[2] = {base, static_cast<Amount>(static_cast<double>(base) * uniform(0.99, 1.01))};
    const OwnedCoin* coins[2] = {&ca, &cb};
    for (int k = 0; k < 2; ++k) {
        double in = static_cast<double>(coins[k]->amount);
        Amount change = coins[k]->amount - amounts[k] - cfg_.fee;
        if (amounts[k] <= 0 || change <= 0) return false;
        if (static_cast<double>(std::min(amounts[k], change)) <= cfg_.peel_guard * in) return false;
    }
    for (int k = 0; k < 2; ++k) {
        EntityId to = payee(e);
        AddressId pay_addr = fresh(to);
        AddressId change_addr = chance(profiles_[e].fresh_change) ? fresh(e) : coins[k]->address;
        std::vector<TxOutput> outs{{pay_addr, amounts[k]}, {change_addr, coins[k]->amount - amounts[k] - cfg_.fee}};
        if (chance(0.5)) std::swap(outs[0], outs[1]);
        Transaction tx = make_transaction({{coins[k]->outpoint, coins[k]->address}}, outs, stamp(now));
        w.remove(coins[k]->outpoint);
        for (std::uint32_t i = 0; i < 2; ++i) credit(tx, i, tx.outputs[i].address == pay_addr ? to : e);
        emit(std::move(tx), e);
    }
    return true;
}

bool Generator::coinjoin(EntityId e, double now) {
    std::vector<EntityId> pool;
    for (EntityId o = 1; o <= cfg_.entities; ++o)
        if (o != e && profiles_[o].coinjoin > 0 && !wallets_[o].coins.empty()) pool.push_back(o);
    std::size_t k = std::uniform_int_distribution<std::size_t>(cfg_.coinjoin_min, cfg_.coinjoin_max)(rng_);
    if (pool.size() + 1 < k || wallets_[e].coins.empty()) return false;
    std::shuffle(pool.begin(), pool.end(), rng_);
    pool.resize(k - 1);
    pool.insert(pool.begin(), e);

    // Each participant brings its largest coin.
    std::vector<OwnedCoin> coins;
    for (EntityId p : pool) {
        const auto& cs = wallets_[p].coins;
        coins.push_back(*std::max_element(cs.begin(), cs.end(),
                                          [](const OwnedCoin& x, const OwnedCoin& y) { return x.amount < y.amount; }));
    }
    Amount smallest = std::min_element(coins.begin(), coins.end(), [](const OwnedCoin& x, const OwnedCoin& y) {
                          return x.amount < y.amount;
                      })->amount;
    Amount denom = static_cast<Amount>(static_cast<double>(smallest - cfg_.fee) * uniform(0.3, 0.5));
    if (denom <= 0) return false;

    std::vector<CoinjoinParticipant> parts;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        bool has_change = coins[i].amount - denom - cfg_.fee > 0;
        AddressId mixed = fresh(pool[i]);
        parts.push_back({pool[i], {coins[i]}, mixed, has_change ? fresh(pool[i]) : 0});
    }
    Transaction tx = make_coinjoin(parts, denom, cfg_.fee, stamp(now), rng_);
    for (std::size_t i = 0; i < pool.size(); ++i) wallets_[pool[i]].remove(coins[i].outpoint);
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) credit(tx, i, truth_.owner.at(tx.outputs[i].address));
    truth_.coinjoins.insert(tx.txid);
    emit(std::move(tx), e);
    return true;
}

bool Generator::start_peel(EntityId e, const OwnedCoin& coin, const PeelPlan& plan, double now) {
    PendingChain pc;
    auto change = [&] { return fresh(e); };
    auto recipient = [&] {
        EntityId to = other_entity(std::min<EntityId>(e, static_cast<EntityId>(cfg_.entities)));
        pc.recipients.push_back(to);
        return fresh(to);
    };
    const SimTime spacing = 600;
    pc.txs = plant_peeling_chain(coin, plan, change, recipient, stamp(now), spacing, rng_);
    PeelChainTruth t{e, {}};
    for (const auto& tx : pc.txs) t.txids.push_back(tx.txid);
    truth_.peel_chains.push_back(std::move(t));
    chains_.push_back(std::move(pc));
    const std::size_t id = chains_.size() - 1;
    for (std::size_t i = 0; i < chains_[id].txs.size(); ++i)
        push({std::floor(now) + static_cast<double>(i * spacing), 0, Kind::PeelStep, e, id, i});
    return true;
}

bool Generator::activate(EntityId e, double now) {
    const EntityProfile& p = profiles_[e];
    Wallet& w = wallets_[e];
    if (w.coins.empty()) return false;
    if (chance(p.coinjoin) && coinjoin(e, now)) return true;
    if (chance(p.peeling)) {
        auto it = std::max_element(w.coins.begin(), w.coins.end(),
                                   [](const OwnedCoin& x, const OwnedCoin& y) { return x.amount < y.amount; });
        OwnedCoin coin = *it;
        const PeelPlan& plan = cfg_.peel_defaults;
        double last = static_cast<double>(coin.amount) * std::pow(1 - plan.fraction, static_cast<double>(plan.length));
        if (last * plan.fraction >= 1) {
            w.remove(coin.outpoint);
            return start_peel(e, coin, plan, now);
        }
    }
    if (chance(p.paired_sends) && paired_payments(e, now)) return true;
    return pay(e, now);
}

void Generator::pack_blocks() {
    const ChainParams& params = cfg_.chain;
    const std::size_t cap = params.max_block_txs - 1;
    std::size_t i = 0;
    SimTime last_ts = tree_->tip_node().block.header.timestamp;
    while (i < stream_.size()) {
        const SimTime window = stream_[i].timestamp / params.target_block_interval;
        std::vector<Transaction> txs;
        while (i < stream_.size() && txs.size() < cap && stream_[i].timestamp / params.target_block_interval == window)
            txs.push_back(stream_[i++]);
        last_ts = std::max(last_ts, txs.back().timestamp);
        Block b = tree_->assemble_block(tree_->tip(), fresh(kMinerEntity), std::move(txs), last_ts);
        ConnectResult r = tree_->connect_block(b);
        if (r.status != ConnectStatus::Accepted)
            throw std::logic_error(std::string("generated block rejected: ") +
                                   (r.reason ? to_string(*r.reason) : to_string(r.status)));
    }
}

Scenario Generator::run() {
    cfg_.validate();
    setup_entities();
    Block genesis;
    fund(genesis);

    double total_rate = 0;
    for (EntityId e = 1; e <= cfg_.entities; ++e) total_rate += profiles_[e].activity / 3600.0;
    if (cfg_.transactions > 0 && total_rate <= 0) throw std::invalid_argument("no entity is active");
    const double t0 = static_cast<double>(start_time_);
    for (EntityId e = 1; e <= cfg_.entities; ++e) {
        urn_.push_back(e);
        schedule_activation(e, t0);
    }

    // Planted chains start somewhere in the first half of the expected run.
    const double horizon = total_rate > 0 ? static_cast<double>(cfg_.transactions) / total_rate : 3600;
    for (std::size_t i = 0; i < planted_.size(); ++i) {
        double when = t0 + std::uniform_real_distribution<double>(0, horizon / 2)(timing_);
        start_peel(planted_[i], planted_coins_[i], cfg_.peel_chains[i], when);
    }

    std::size_t idle = 0;
    const std::size_t idle_limit = 200 * cfg_.entities + 1000;
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        if (ev.kind == Kind::PeelStep) {
            const PendingChain& pc = chains_[ev.chain];
            const Transaction& tx = pc.txs[ev.step];
            // The peel output goes to its recipient; the change stays inside the chain.
            for (std::uint32_t k = 0; k < tx.outputs.size(); ++k)
                if (truth_.owner.at(tx.outputs[k].address) == pc.recipients[ev.step]) credit(tx, k, pc.recipients[ev.step]);
            emit(tx, ev.entity);
            continue;
        }
        if (stream_.size() >= cfg_.transactions) continue;
        if (activate(ev.entity, ev.time))
            idle = 0;
        else if (++idle > idle_limit)
            throw std::invalid_argument("scenario cannot fund the requested number of transactions");
        schedule_activation(ev.entity, ev.time);
    }

    pack_blocks();

    std::vector<EntityId> regular;
    for (EntityId e = 1; e <= cfg_.entities; ++e) regular.push_back(e);
    std::shuffle(regular.begin(), regular.end(), rng_);
    auto marked = static_cast<std::size_t>(std::round(cfg_.marked_fraction * static_cast<double>(cfg_.entities)));
    for (std::size_t i = 0; i < marked; ++i) {
        EntityId e = regular[i];
        if (!wallets_[e].addresses.empty()) truth_.marked[wallets_[e].addresses.front()] = e;
    }

    Scenario s;
    s.config = cfg_;
    s.profiles = profiles_;
    for (const Block* b : tree_->best_chain_blocks()) s.chain.push_back(*b);
    s.truth = std::move(truth_);
    return s;
}

}  // namespace

Scenario generate(const ScenarioConfig& config) { return Generator(config).run(); }

}  // namespace bclab
