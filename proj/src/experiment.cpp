#include "bclab/experiment.hpp"

#include "bclab/chainio.hpp"
#include "bclab/hash.hpp"
#include "bclab/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bclab {

using nlohmann::json;
using netsim::PeerId;
using netsim::Seconds;

// ---------------------------------------------------------------- config nodes

ConfigNode::ConfigNode(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
}

bool ConfigNode::has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

ConfigNode ConfigNode::child(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + "." + key + ": required field missing");
    return ConfigNode(j_.at(key), path_ + "." + key);
}

std::vector<ConfigNode> ConfigNode::items(const std::string& key) const {
    std::vector<ConfigNode> out;
    if (!has(key)) return out;
    const json& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError(path_ + "." + key + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) out.emplace_back(arr[i], path_ + "." + key + "[" + std::to_string(i) + "]");
    return out;
}

void ConfigNode::only(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, _] : j_.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(path_ + "." + key + ": unknown field");
}

void ConfigNode::fail(const std::string& key, const std::string& message) const {
    throw ConfigError(path_ + (key.empty() ? "" : "." + key) + ": " + message);
}

namespace {

/// Runs `f`, turning std::invalid_argument into a ConfigError at `path`.
template <class F>
auto checked(const std::string& path, F f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace

ChainParams parse_chain_params(const ConfigNode& n, ChainParams p) {
    n.only({"target_block_interval", "retarget_window", "max_block_txs", "initial_subsidy", "halving_interval",
            "confirmation_depth", "target_bits", "retarget_clamp", "retarget_enabled", "verify_pow"});
    p.target_block_interval = n.get("target_block_interval", p.target_block_interval);
    p.retarget_window = n.get("retarget_window", p.retarget_window);
    p.max_block_txs = n.get("max_block_txs", p.max_block_txs);
    p.initial_subsidy = n.get("initial_subsidy", p.initial_subsidy);
    p.halving_interval = n.get("halving_interval", p.halving_interval);
    p.confirmation_depth = n.get("confirmation_depth", p.confirmation_depth);
    if (n.has("target_bits")) {
        auto bits = n.get<unsigned>("target_bits");
        if (bits == 0 || bits > 256) n.fail("target_bits", "must lie in 1..256");
        p.initial_target = target_from_bits(bits);
    }
    p.retarget_clamp = n.get("retarget_clamp", p.retarget_clamp);
    p.retarget_enabled = n.get("retarget_enabled", p.retarget_enabled);
    p.verify_pow = n.get("verify_pow", p.verify_pow);
    checked(n.path(), [&] {
        p.validate();
        return 0;
    });
    return p;
}

EntityProfile parse_profile(const ConfigNode& n, EntityProfile p) {
    n.only({"id", "reuse", "fresh_change", "peeling", "coinjoin", "activity", "paired_sends", "home_peer"});
    p.id = n.get("id", p.id);
    p.reuse = n.get("reuse", p.reuse);
    p.fresh_change = n.get("fresh_change", p.fresh_change);
    p.peeling = n.get("peeling", p.peeling);
    p.coinjoin = n.get("coinjoin", p.coinjoin);
    p.activity = n.get("activity", p.activity);
    p.paired_sends = n.get("paired_sends", p.paired_sends);
    p.home_peer = n.get("home_peer", p.home_peer);
    checked(n.path(), [&] {
        p.validate();
        return 0;
    });
    return p;
}

namespace {

PeelPlan parse_peel_plan(const ConfigNode& n, PeelPlan p) {
    n.only({"length", "fraction", "fund"});
    p.length = n.get("length", p.length);
    p.fraction = n.get("fraction", p.fraction);
    p.fund = n.get("fund", p.fund);
    return p;
}

}  // namespace

ScenarioConfig parse_scenario_config(const ConfigNode& n) {
    n.only({"seed", "entities", "transactions", "peers", "defaults", "profiles", "coinjoin_min", "coinjoin_max",
            "peel_chains", "peel_defaults", "funding", "funding_outputs", "funding_min", "funding_max", "fee",
            "marked_fraction", "preferential", "peel_guard", "chain"});
    ScenarioConfig c;
    c.seed = n.get("seed", c.seed);
    c.entities = n.get<std::size_t>("entities");
    c.transactions = n.get<std::size_t>("transactions");
    c.peers = n.get("peers", c.peers);
    if (n.has("defaults")) c.defaults = parse_profile(n.child("defaults"), c.defaults);
    for (const ConfigNode& p : n.items("profiles")) {
        if (!p.has("id")) p.fail("id", "required field missing");
        c.profiles.push_back(parse_profile(p, c.defaults));
    }
    c.coinjoin_min = n.get("coinjoin_min", c.coinjoin_min);
    c.coinjoin_max = n.get("coinjoin_max", c.coinjoin_max);
    for (const ConfigNode& p : n.items("peel_chains")) c.peel_chains.push_back(parse_peel_plan(p, PeelPlan{}));
    if (n.has("peel_defaults")) c.peel_defaults = parse_peel_plan(n.child("peel_defaults"), c.peel_defaults);
    if (n.has("funding")) {
        auto f = n.get<std::string>("funding");
        if (f == "faucet") c.funding = FundingMode::Faucet;
        else if (f == "mining") c.funding = FundingMode::Mining;
        else n.fail("funding", "expected \"faucet\" or \"mining\"");
    }
    c.funding_outputs = n.get("funding_outputs", c.funding_outputs);
    c.funding_min = n.get("funding_min", c.funding_min);
    c.funding_max = n.get("funding_max", c.funding_max);
    c.fee = n.get("fee", c.fee);
    c.marked_fraction = n.get("marked_fraction", c.marked_fraction);
    c.preferential = n.get("preferential", c.preferential);
    c.peel_guard = n.get("peel_guard", c.peel_guard);
    if (n.has("chain")) c.chain = parse_chain_params(n.child("chain"), c.chain);
    checked(n.path(), [&] {
        c.validate();
        return 0;
    });
    return c;
}

// ---------------------------------------------------------------- network scripts

NetScript parse_net_script(const ConfigNode& n, std::uint64_t seed) {
    n.only({"peers", "links", "topology", "chain", "trickle_interval", "trickle_probability", "miners", "mining_until",
            "mine_transactions", "adversary", "adversary_links_all", "blocks", "transactions", "random_transactions",
            "horizon", "expect", "record_trace"});
    NetScript s;
    s.config.seed = seed;
    s.config.chain.verify_pow = false;
    s.config.chain.retarget_enabled = false;
    if (n.has("chain")) s.config.chain = parse_chain_params(n.child("chain"), s.config.chain);

    if (n.has("topology")) {
        ConfigNode t = n.child("topology");
        t.only({"peers", "min_peers", "max_peers", "latency"});
        RandomTopologySpec r;
        r.peers = t.get<std::size_t>("peers");
        r.min_peers = t.get("min_peers", r.min_peers);
        r.max_peers = t.get("max_peers", r.max_peers);
        if (t.has("latency")) {
            auto lat = t.get<std::vector<double>>("latency");
            if (lat.size() != 2 || lat[0] < 0 || lat[1] < lat[0]) t.fail("latency", "expected [min, max] with 0 <= min <= max");
            r.latency = {lat[0], lat[1]};
        }
        s.random_topology = r;
        for (std::size_t i = 0; i < r.peers; ++i) s.peers.push_back("p" + std::to_string(i));
        if (n.has("peers") || n.has("links")) n.fail("topology", "give either topology or peers/links, not both");
    } else {
        s.peers = n.get<std::vector<std::string>>("peers");
        if (s.peers.size() < 2) n.fail("peers", "need at least two peers");
        std::set<std::string> uniq(s.peers.begin(), s.peers.end());
        if (uniq.size() != s.peers.size()) n.fail("peers", "names must be unique");
        const json& links = n.raw().contains("links") ? n.raw().at("links") : json::array();
        if (!links.is_array()) n.fail("links", "expected an array");
        for (std::size_t i = 0; i < links.size(); ++i) {
            const json& l = links[i];
            std::string path = n.path() + ".links[" + std::to_string(i) + "]";
            if (!l.is_array() || l.size() != 3 || !l[0].is_string() || !l[1].is_string() || !l[2].is_number())
                throw ConfigError(path + ": expected [peer, peer, latency]");
            s.links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>(), l[2].get<double>());
        }
    }

    if (n.has("adversary")) {
        s.adversary = n.get<std::string>("adversary");
        s.adversary_links_all = n.get("adversary_links_all", false);
        if (s.adversary_links_all) {
            if (std::find(s.peers.begin(), s.peers.end(), *s.adversary) != s.peers.end())
                n.fail("adversary", "a supernode linked to all peers must use a new name");
            s.peers.push_back(*s.adversary);
        }
    }

    auto id_of = [&](const std::string& name, const std::string& path) -> PeerId {
        auto it = std::find(s.peers.begin(), s.peers.end(), name);
        if (it == s.peers.end()) throw ConfigError(path + ": unknown peer '" + name + "'");
        return static_cast<PeerId>(it - s.peers.begin());
    };
    for (std::size_t i = 0; i < s.links.size(); ++i) {
        const auto& [a, b, lat] = s.links[i];
        std::string path = n.path() + ".links[" + std::to_string(i) + "]";
        if (id_of(a, path) == id_of(b, path)) throw ConfigError(path + ": self link");
        if (lat < 0) throw ConfigError(path + ": negative latency");
    }
    if (s.adversary) id_of(*s.adversary, n.path() + ".adversary");

    s.config.trickle_interval = n.get("trickle_interval", s.config.trickle_interval);
    s.config.trickle_probability = n.get("trickle_probability", s.config.trickle_probability);
    if (!(s.config.trickle_interval > 0)) n.fail("trickle_interval", "must be positive");
    if (!(s.config.trickle_probability >= 0 && s.config.trickle_probability <= 1))
        n.fail("trickle_probability", "must lie in [0, 1]");
    for (const ConfigNode& m : n.items("miners")) {
        m.only({"peer", "share"});
        auto name = m.get<std::string>("peer");
        id_of(name, m.path() + ".peer");
        double share = m.get<double>("share");
        if (!(share > 0)) m.fail("share", "must be positive");
        s.miners.emplace_back(name, share);
    }
    s.config.mining_until = n.get("mining_until", s.config.mining_until);
    s.config.mine_transactions = n.get("mine_transactions", s.config.mine_transactions);
    s.config.record_trace = n.get("record_trace", s.config.record_trace);

    for (const ConfigNode& b : n.items("blocks")) {
        b.only({"label", "miner", "time", "parent"});
        ScriptedBlockSpec spec{b.get<std::string>("label"), b.get<std::string>("miner"), b.get<double>("time"), std::nullopt};
        id_of(spec.miner, b.path() + ".miner");
        if (b.has("parent")) {
            spec.parent = b.get<std::string>("parent");
            bool known = std::any_of(s.blocks.begin(), s.blocks.end(), [&](const auto& x) {
                return x.label == *spec.parent && x.time < spec.time;
            });
            if (!known) b.fail("parent", "must name an earlier block");
        }
        if (spec.time < 0) b.fail("time", "must be non-negative");
        for (const auto& x : s.blocks)
            if (x.label == spec.label) b.fail("label", "duplicate label");
        s.blocks.push_back(spec);
    }
    for (const ConfigNode& t : n.items("transactions")) {
        t.only({"label", "origin", "time"});
        ScriptedTxSpec spec{t.get<std::string>("label"), t.get<std::string>("origin"), t.get<double>("time")};
        id_of(spec.origin, t.path() + ".origin");
        if (spec.time < 0) t.fail("time", "must be non-negative");
        s.txs.push_back(spec);
    }
    if (n.has("random_transactions")) {
        ConfigNode r = n.child("random_transactions");
        r.only({"count", "spacing"});
        s.random_transactions = r.get<std::size_t>("count");
        s.random_spacing = r.get("spacing", s.random_spacing);
        if (!(s.random_spacing > 0)) r.fail("spacing", "must be positive");
    }
    s.horizon = n.get("horizon", s.horizon);
    if (!(s.horizon > 0)) n.fail("horizon", "must be positive");

    if (n.has("expect")) {
        ConfigNode e = n.child("expect");
        e.only({"stale_blocks", "tip", "tips_agree", "origin_of", "accuracy_above_baseline"});
        if (e.has("stale_blocks")) s.expect.stale_blocks = e.get<std::size_t>("stale_blocks");
        if (e.has("tip")) {
            s.expect.tip = e.get<std::string>("tip");
            if (std::none_of(s.blocks.begin(), s.blocks.end(), [&](const auto& b) { return b.label == *s.expect.tip; }))
                e.fail("tip", "unknown block label");
        }
        s.expect.tips_agree = e.get("tips_agree", false);
        s.expect.origin_of = e.get("origin_of", std::map<std::string, std::string>{});
        for (const auto& [tx, peer] : s.expect.origin_of) {
            if (std::none_of(s.txs.begin(), s.txs.end(), [&](const auto& t) { return t.label == tx; }))
                e.fail("origin_of." + tx, "unknown transaction label");
            id_of(peer, e.path() + ".origin_of." + tx);
        }
        s.expect.accuracy_above_baseline = e.get("accuracy_above_baseline", false);
        if ((!s.expect.origin_of.empty() || s.expect.accuracy_above_baseline) && !s.adversary)
            e.fail("", "origin expectations need an adversary");
    }
    return s;
}

namespace {

constexpr AddressId kScriptFunding = 1'000'000;
constexpr AddressId kScriptPayee = 2'000'000;

Transaction script_tx(const Block& genesis, std::size_t i, SimTime ts) {
    const TxOutput& o = genesis.coinbase.outputs.at(i);
    return make_transaction({{genesis.coinbase.outpoint(static_cast<std::uint32_t>(i)), o.address}},
                            {{kScriptPayee + i, o.amount}}, ts);
}

}  // namespace

Block net_script_genesis(const NetScript& script) {
    std::vector<TxOutput> alloc;
    for (std::size_t i = 0; i < script.txs.size() + script.random_transactions; ++i) alloc.push_back({kScriptFunding + i, kCoin});
    return BlockTree::make_genesis(script.config.chain, alloc, 0);
}

NetRun run_net_script(const NetScript& script, const Block& genesis,
                      const std::vector<std::pair<PeerId, Transaction>>& extra) {
    const PeerId n = static_cast<PeerId>(script.peers.size());
    auto id_of = [&](const std::string& name) {
        return static_cast<PeerId>(std::find(script.peers.begin(), script.peers.end(), name) - script.peers.begin());
    };
    std::optional<PeerId> spy;
    if (script.adversary) spy = id_of(*script.adversary);

    netsim::Topology topo;
    if (script.random_topology) {
        const auto& r = *script.random_topology;
        topo = checked("$.network.topology", [&] {
            return netsim::build_topology(r.peers, r.min_peers, r.max_peers, script.config.seed, r.latency);
        });
        if (script.adversary_links_all) topo.add_peer();
    } else {
        topo = netsim::Topology(n);
        for (const auto& [a, b, lat] : script.links) topo.add_edge(id_of(a), id_of(b), lat);
    }
    if (spy && script.adversary_links_all) {
        Rng lat_rng = make_rng(script.config.seed, "adversary-links");
        std::uniform_real_distribution<double> lat(script.config.link_latency.min, script.config.link_latency.max);
        for (PeerId p = 0; p < n; ++p)
            if (p != *spy && !topo.has_edge(p, *spy)) topo.add_edge(*spy, p, lat(lat_rng));
    }

    netsim::NetConfig cfg = script.config;
    for (const auto& [name, share] : script.miners) cfg.miners.push_back({id_of(name), share, 500'000 + id_of(name)});
    if (spy) cfg.observers = {*spy};

    NetRun run;
    run.honest_peers = spy ? n - 1 : n;
    run.sim.emplace(topo, cfg, genesis);
    netsim::Simulation& sim = *run.sim;

    std::vector<std::pair<std::string, TxId>> submitted;
    for (std::size_t i = 0; i < script.txs.size(); ++i) {
        const auto& t = script.txs[i];
        Transaction tx = script_tx(genesis, i, static_cast<SimTime>(t.time));
        sim.submit_tx(t.time, id_of(t.origin), tx);
        run.tx_labels[t.label] = tx.txid;
        submitted.emplace_back(t.label, tx.txid);
    }
    if (script.random_transactions) {
        Rng rng = make_rng(script.config.seed, "origins");
        std::vector<PeerId> honest;
        for (PeerId p = 0; p < n; ++p)
            if (!spy || p != *spy) honest.push_back(p);
        std::uniform_int_distribution<std::size_t> pick(0, honest.size() - 1);
        for (std::size_t k = 0; k < script.random_transactions; ++k) {
            const Seconds t = script.random_spacing * static_cast<double>(k + 1);
            Transaction tx = script_tx(genesis, script.txs.size() + k, static_cast<SimTime>(t));
            sim.submit_tx(t, honest[pick(rng)], tx);
            submitted.emplace_back(tx.txid.hex(), tx.txid);
        }
    }
    Seconds last_extra = 0;
    for (const auto& [origin, tx] : extra) {
        const Seconds t = static_cast<Seconds>(tx.timestamp);
        sim.submit_tx(t, origin, tx);
        submitted.emplace_back(tx.txid.hex(), tx.txid);
        last_extra = std::max(last_extra, t);
    }

    // Scripted blocks in time order; a parent must already exist when its child is scheduled.
    std::vector<ScriptedBlockSpec> blocks = script.blocks;
    std::stable_sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    std::set<std::size_t> claimed;
    auto resolve = [&](const ScriptedBlockSpec& b) -> std::optional<Hash256> {
        const auto& created = sim.created_blocks();
        for (std::size_t i = 0; i < created.size(); ++i)
            if (!claimed.count(i) && created[i].time == b.time && created[i].miner == id_of(b.miner)) {
                claimed.insert(i);
                return created[i].hash;
            }
        return std::nullopt;
    };
    std::vector<const ScriptedBlockSpec*> unresolved;
    auto settle = [&] {
        for (auto it = unresolved.begin(); it != unresolved.end();) {
            if (auto h = resolve(**it)) {
                run.block_labels[(*it)->label] = *h;
                it = unresolved.erase(it);
            } else {
                ++it;
            }
        }
    };
    for (const auto& b : blocks) {
        std::optional<Hash256> parent;
        if (b.parent) {
            sim.run_until(std::nextafter(b.time, -std::numeric_limits<double>::infinity()));
            settle();
            auto it = run.block_labels.find(*b.parent);
            if (it == run.block_labels.end()) throw std::runtime_error("block '" + b.label + "': parent was never created");
            parent = it->second;
        }
        sim.schedule_block(b.time, id_of(b.miner), {}, parent);
        unresolved.push_back(&b);
    }
    sim.run_until(std::max(script.horizon, last_extra + 60));
    settle();

    if (spy) {
        for (const auto& [label, txid] : submitted) {
            InferenceRow row;
            row.tx = label;
            row.txid = txid;
            row.truth = sim.origins().at(txid);
            row.first_relay = netsim::infer_origin_first_relay(sim.observations(), txid, *spy);
            row.candidates = netsim::infer_origin_candidates(sim.observations(), sim.topology(), *spy, txid);
            run.inference.push_back(std::move(row));
        }
        run.accuracy = netsim::origin_inference_accuracy(sim.observations(), sim.origins(), *spy);
    }

    const netsim::RunReport rep = sim.report();
    const auto& ex = script.expect;
    if (ex.stale_blocks) run.checks["stale_blocks == " + std::to_string(*ex.stale_blocks)] = rep.stale_blocks == *ex.stale_blocks;
    if (ex.tip) {
        auto it = run.block_labels.find(*ex.tip);
        run.checks["tip is " + *ex.tip] = it != run.block_labels.end() && rep.tips_agree && rep.reference_tip == it->second;
    }
    if (ex.tips_agree) run.checks["tips agree"] = rep.tips_agree;
    for (const auto& [tx, peer] : ex.origin_of) {
        const TxId id = run.tx_labels.at(tx);
        auto row = std::find_if(run.inference.begin(), run.inference.end(), [&](const auto& r) { return r.txid == id; });
        run.checks["origin of " + tx + " is " + peer] =
            row != run.inference.end() && row->candidates == std::set<PeerId>{id_of(peer)};
    }
    if (ex.accuracy_above_baseline)
        run.checks["accuracy above 1/n"] =
            run.accuracy && run.accuracy->lower > 1.0 / static_cast<double>(run.honest_peers);
    return run;
}

// ---------------------------------------------------------------- bundles

FileDigest digest_file(const std::filesystem::path& file, const std::filesystem::path& relative_to) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error(file.string() + ": cannot read");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    std::string name = relative_to.empty() ? file.generic_string() : file.lexically_relative(relative_to).generic_string();
    return {name, sha256(bytes).hex(), bytes.size()};
}

std::vector<FileDigest> inventory(const std::filesystem::path& dir) {
    std::vector<FileDigest> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") out.push_back(digest_file(e.path(), dir));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return out;
}

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = m.tool;
    j["version"] = m.version;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["config_digest"] = m.config_digest;
    j["arguments"] = m.arguments;
    auto files = [](const std::vector<FileDigest>& v) {
        auto a = nlohmann::ordered_json::array();
        for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return a;
    };
    j["inputs"] = files(m.inputs);
    j["outputs"] = files(m.outputs);
    return j.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& dir, RunManifest m) {
    m.outputs = inventory(dir);
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error((dir / "manifest.json").string() + ": cannot write");
    out << manifest_json(m);
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error(p.string() + ": cannot write");
    out << s;
}

std::string peer_name(const NetScript& s, PeerId p) { return p < s.peers.size() ? s.peers[p] : std::to_string(p); }

}  // namespace

SimulateResult run_simulation_document(const json& doc, std::uint64_t seed, const std::filesystem::path& out) {
    ConfigNode root(doc, "$");
    root.only({"description", "seed", "economy", "network"});
    if (!root.has("economy") && !root.has("network")) root.fail("", "needs an economy or a network section");

    std::optional<ScenarioConfig> econ_cfg;
    if (root.has("economy")) {
        econ_cfg = parse_scenario_config(root.child("economy"));
        if (!root.child("economy").has("seed")) econ_cfg->seed = substream_seed(seed, "scenario");
    }
    std::optional<NetScript> script;
    if (root.has("network")) {
        script = parse_net_script(root.child("network"), substream_seed(seed, "network"));
        if (econ_cfg) {
            const std::size_t honest = script->peers.size() - (script->adversary_links_all ? 1 : 0);
            if (econ_cfg->peers > honest)
                throw ConfigError("$.economy.peers: exceeds the " + std::to_string(honest) + " honest network peers");
            script->config.mine_transactions = false;
        }
    }

    std::filesystem::create_directories(out);
    SimulateResult res;
    std::optional<Scenario> scenario;
    if (econ_cfg) {
        scenario = checked("$.economy", [&] { return generate(*econ_cfg); });
        write_chain_jsonl(out / "chain.jsonl", scenario->chain);
        write_ground_truth(out / "ground_truth", scenario->truth, scenario->chain);
        std::ostringstream line;
        line << "economy: " << scenario->transactions().size() << " transactions in " << scenario->chain.size()
             << " blocks, " << scenario->truth.owner.size() << " addresses, " << scenario->truth.coinjoins.size()
             << " coinjoins, " << scenario->truth.peel_chains.size() << " planted peeling chains";
        res.lines.push_back(line.str());
    }
    if (script) {
        std::vector<std::pair<PeerId, Transaction>> extra;
        if (scenario)
            for (const Transaction* tx : scenario->transactions()) extra.emplace_back(scenario->truth.origin_peer.at(tx->txid), *tx);
        Block genesis = net_script_genesis(*script);
        NetRun run = run_net_script(*script, genesis, extra);
        const netsim::Simulation& sim = *run.sim;
        const netsim::RunReport rep = sim.report();
        {
            std::ofstream f(out / "trace.jsonl", std::ios::binary);
            netsim::write_trace_jsonl(f, sim.trace());
        }
        write_text(out / "netsim_report.json", netsim::report_json(rep));
        {
            std::ofstream f(out / "origins.csv", std::ios::binary);
            netsim::write_origins_csv(f, sim.origins());
        }
        if (!scenario) {
            std::vector<Block> best;
            for (const Block* b : sim.peer(0).tree.best_chain_blocks()) best.push_back(*b);
            write_chain_jsonl(out / "chain.jsonl", best);
        }

        nlohmann::ordered_json labels;
        labels["peers"] = script->peers;
        labels["blocks"] = nlohmann::ordered_json::object();
        for (const auto& [l, h] : run.block_labels)
            labels["blocks"][l] = {{"hash", h.hex()}, {"on_best_chain", sim.peer(0).tree.on_best_chain(h)}};
        labels["transactions"] = nlohmann::ordered_json::object();
        for (const auto& [l, t] : run.tx_labels) labels["transactions"][l] = t.hex();
        write_text(out / "labels.json", labels.dump(2) + "\n");

        std::ostringstream line;
        line << "network: " << rep.events << " events, " << rep.blocks_created << " blocks, " << rep.stale_blocks
             << " stale, tips " << (rep.tips_agree ? "agree" : "disagree") << ", reference height " << rep.reference_height;
        res.lines.push_back(line.str());

        if (run.accuracy) {
            nlohmann::ordered_json inf;
            inf["adversary"] = *script->adversary;
            inf["honest_peers"] = run.honest_peers;
            inf["accuracy"] = {{"correct", run.accuracy->correct},
                               {"total", run.accuracy->total},
                               {"accuracy", run.accuracy->accuracy},
                               {"wilson95_lower", run.accuracy->lower},
                               {"wilson95_upper", run.accuracy->upper},
                               {"uniform_baseline", 1.0 / static_cast<double>(run.honest_peers)}};
            inf["transactions"] = nlohmann::ordered_json::array();
            std::ostringstream observed;
            observed << "txid,peer_id\n";
            std::vector<std::pair<TxId, PeerId>> guesses;
            for (const auto& r : run.inference) {
                nlohmann::ordered_json row;
                row["tx"] = r.tx;
                row["true_origin"] = peer_name(*script, r.truth);
                row["first_relay"] = r.first_relay ? json(peer_name(*script, *r.first_relay)) : json(nullptr);
                auto cands = nlohmann::ordered_json::array();
                for (PeerId c : r.candidates) cands.push_back(peer_name(*script, c));
                row["candidates"] = cands;
                inf["transactions"].push_back(row);
                if (r.first_relay) guesses.emplace_back(r.txid, *r.first_relay);
            }
            std::sort(guesses.begin(), guesses.end());
            for (const auto& [t, p] : guesses) observed << t.hex() << ',' << p << '\n';
            write_text(out / "inference.json", inf.dump(2) + "\n");
            write_text(out / "observed_origins.csv", observed.str());
            std::ostringstream l2;
            l2 << "origin inference: " << run.accuracy->correct << "/" << run.accuracy->total << " correct, 95% CI ["
               << run.accuracy->lower << ", " << run.accuracy->upper << "], baseline "
               << 1.0 / static_cast<double>(run.honest_peers);
            res.lines.push_back(l2.str());
        }
        for (const auto& [name, ok] : run.checks) {
            res.lines.push_back(std::string("expect ") + name + ": " + (ok ? "pass" : "FAIL"));
            res.expectations_met = res.expectations_met && ok;
        }
    }
    return res;
}

}  // namespace bclab
