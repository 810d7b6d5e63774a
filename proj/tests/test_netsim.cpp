#include <doctest.h>

#include "bclab/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace bclab;
using namespace bclab::netsim;

namespace {

Block genesis_for(const ChainParams& p) { return BlockTree::make_genesis(p, {{1, 100 * kCoin}}, 0); }

/// Distinct placeholder transactions; relay never checks them against a ledger.
Transaction dummy_tx(std::uint64_t i) {
    return make_transaction({}, {{1000 + i, static_cast<Amount>(i + 1)}}, static_cast<SimTime>(i));
}

NetConfig quiet_config(std::uint64_t seed = 1) {
    NetConfig c;
    c.seed = seed;
    c.mine_transactions = false;
    return c;
}

Topology uniform_latency(const Topology& shape, Seconds latency) {
    Topology out(shape.size());
    for (auto [a, b] : shape.edges()) out.add_edge(a, b, latency);
    return out;
}

std::size_t count_kind(const Simulation& sim, EventKind k) {
    return static_cast<std::size_t>(
        std::count_if(sim.trace().begin(), sim.trace().end(), [&](const TraceRecord& r) { return r.kind == k; }));
}

}  // namespace

TEST_CASE("topology respects degree bounds and is connected") {
    Topology g = build_topology(50, 8, 125, 7);
    CHECK(g.connected());
    for (PeerId p = 0; p < 50; ++p) {
        CHECK(g.degree(p) >= 8);
        CHECK(g.degree(p) <= 49);
    }
    for (auto [a, b] : g.edges()) {
        CHECK(g.latency(a, b) >= 0.010);
        CHECK(g.latency(a, b) <= 0.100);
    }
}

TEST_CASE("topology is deterministic per seed") {
    auto a = build_topology(40, 4, 10, 99);
    auto b = build_topology(40, 4, 10, 99);
    auto c = build_topology(40, 4, 10, 100);
    CHECK(a.edges() == b.edges());
    CHECK(a.edges() != c.edges());
    for (auto [x, y] : a.edges()) CHECK(a.latency(x, y) == b.latency(x, y));
}

TEST_CASE("tight bounds force a complete graph") {
    Topology g = build_topology(9, 8, 8, 3);
    CHECK(g.edges().size() == 36);
    for (PeerId p = 0; p < 9; ++p) CHECK(g.degree(p) == 8);
}

TEST_CASE("regular and sparse bounds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Topology g = build_topology(30, 3, 3, seed);
        CHECK(g.connected());
        for (PeerId p = 0; p < 30; ++p) CHECK(g.degree(p) == 3);
    }
    Topology sparse = build_topology(25, 1, 3, 5);
    CHECK(sparse.connected());
}

TEST_CASE("infeasible bounds are rejected") {
    CHECK_THROWS_AS(build_topology(5, 3, 3, 1), std::invalid_argument);   // odd degree sum
    CHECK_THROWS_AS(build_topology(5, 5, 8, 1), std::invalid_argument);   // too few other peers
    CHECK_THROWS_AS(build_topology(10, 4, 3, 1), std::invalid_argument);  // min above max
    CHECK_THROWS_AS(build_topology(10, 1, 1, 1), std::invalid_argument);  // cannot connect
    CHECK_THROWS_AS(build_topology(1, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("trickle announces a quarter of foreign transactions") {
    std::vector<TxId> pool;
    for (std::uint64_t i = 0; i < 8; ++i) pool.push_back(dummy_tx(i).txid);
    std::unordered_set<TxId> own;
    Rng rng(42);
    double total = 0;
    const int ticks = 10'000;
    for (int t = 0; t < ticks; ++t) total += static_cast<double>(choose_trickle(pool, own, 0.25, rng).size());
    CHECK(std::abs(total / ticks - 2.0) < 0.05);
}

TEST_CASE("own transactions are always trickled; empty pool announces nothing") {
    std::vector<TxId> pool{dummy_tx(1).txid, dummy_tx(2).txid, dummy_tx(3).txid};
    std::unordered_set<TxId> own{pool[1]};
    Rng rng(1);
    for (int t = 0; t < 500; ++t) {
        auto out = choose_trickle(pool, own, 0.25, rng);
        CHECK(std::find(out.begin(), out.end(), pool[1]) != out.end());
    }
    CHECK(choose_trickle({}, own, 0.25, rng).empty());
    CHECK(choose_trickle(pool, {}, 0.0, rng).empty());
    CHECK(choose_trickle(pool, {}, 1.0, rng).size() == 3);
}

TEST_CASE("in-simulation trickle rate stays within three sigma of one quarter") {
    Topology g = build_topology(30, 4, 8, 11);
    Simulation sim(g, quiet_config(11), genesis_for(ChainParams{}));
    for (std::uint64_t i = 0; i < 200; ++i) sim.submit_tx(0.05 * static_cast<double>(i), static_cast<PeerId>(i % 30), dummy_tx(i));
    sim.run_until(1e4);
    const auto& s = sim.trickle_stats();
    REQUIRE(s.foreign_considered > 1000);
    double n = static_cast<double>(s.foreign_considered);
    double rate = static_cast<double>(s.foreign_announced) / n;
    CHECK(std::abs(rate - 0.25) < 3 * std::sqrt(0.25 * 0.75 / n));
    CHECK(s.own_announced == 200);
    // Every peer eventually hears of every transaction.
    for (PeerId p = 0; p < 30; ++p) CHECK(sim.peer(p).known.size() == 200);
}

TEST_CASE("blocks go to uninformed neighbors once each") {
    // Star: the centre informs every leaf in one hop.
    Topology star(5);
    for (PeerId leaf = 1; leaf < 5; ++leaf) star.add_edge(0, leaf, 0.05);
    Simulation s1(star, quiet_config(), genesis_for(ChainParams{}));
    s1.schedule_block(1.0, 0);
    s1.run_until(1.0);
    CHECK(count_kind(s1, EventKind::BlockDeliver) == 0);
    s1.run_until(2.0);
    CHECK(count_kind(s1, EventKind::BlockDeliver) == 4);

    // Triangle: b and c cross-forward once, then the duplicate stops.
    Topology tri(3);
    tri.add_edge(0, 1, 0.05);
    tri.add_edge(0, 2, 0.05);
    tri.add_edge(1, 2, 0.05);
    Simulation s2(tri, quiet_config(), genesis_for(ChainParams{}));
    s2.schedule_block(1.0, 0);
    s2.run_until(5.0);
    CHECK(count_kind(s2, EventKind::BlockDeliver) == 4);
    CHECK(s2.report().tips_agree);
}

TEST_CASE("flooded block arrival matches the hop-count oracle") {
    Topology g = uniform_latency(build_topology(100, 8, 125, 21), 0.05);
    Simulation sim(g, quiet_config(21), genesis_for(ChainParams{}));
    sim.schedule_block(1.0, 0);
    sim.run_until(100);
    auto hops = g.hops_from(0);
    const Hash256 block = sim.created_blocks().at(0).hash;
    const auto& arrivals = sim.block_arrivals().at(block);
    std::size_t depth = 0;
    for (PeerId p = 0; p < 100; ++p) {
        CHECK(arrivals[p] - 1.0 == doctest::Approx(0.05 * static_cast<double>(hops[p])));
        depth = std::max(depth, hops[p]);
    }
    auto rep = sim.report();
    REQUIRE(rep.propagation.size() == 1);
    CHECK(rep.propagation[0].reached == 100);
    CHECK(rep.propagation[0].to_90 < 10 * 0.05);
    CHECK(rep.propagation[0].to_all == doctest::Approx(0.05 * static_cast<double>(depth)));
}

TEST_CASE("fork race: simultaneous blocks at opposite ends resolve to the extended branch") {
    Topology g = uniform_latency(build_topology(30, 3, 6, 4), 0.05);
    auto hops = g.hops_from(0);
    PeerId far = static_cast<PeerId>(std::max_element(hops.begin(), hops.end()) - hops.begin());
    REQUIRE(hops[far] >= 2);

    Simulation sim(g, quiet_config(4), genesis_for(ChainParams{}));
    sim.schedule_block(10.0, 0);
    sim.schedule_block(10.001, far);
    sim.run_until(20);
    auto mid = sim.report();
    CHECK_FALSE(mid.tips_agree);
    CHECK(sim.peer(0).tree.height() == 1);
    CHECK(sim.peer(far).tree.height() == 1);
    CHECK(sim.peer(0).tree.tip() != sim.peer(far).tree.tip());

    sim.schedule_block(30.0, far);
    sim.run_until(60);
    auto end = sim.report();
    CHECK(end.tips_agree);
    CHECK(end.reference_height == 2);
    CHECK(end.stale_blocks == 1);
    CHECK(sim.peer(0).tree.on_best_chain(sim.created_blocks()[1].hash));
    CHECK_FALSE(sim.peer(0).tree.on_best_chain(sim.created_blocks()[0].hash));
}

TEST_CASE("a single miner never produces stale blocks") {
    Topology g = build_topology(20, 3, 6, 8);
    NetConfig c = quiet_config(8);
    c.chain.target_block_interval = 10;
    c.miners = {{5, 1.0, 77}};
    c.mining_until = 2000;
    Simulation sim(g, c, genesis_for(c.chain));
    sim.run_until(3000);
    auto rep = sim.report();
    CHECK(rep.blocks_created > 100);
    CHECK(rep.stale_blocks == 0);
    CHECK(rep.tips_agree);
    CHECK(sim.peer(0).tree.height() == static_cast<std::int64_t>(rep.blocks_created));
}

TEST_CASE("stale rate grows as the block interval shrinks") {
    auto stale_rate = [](SimTime interval) {
        Topology g = build_topology(30, 3, 6, 12, {0.2, 1.0});
        NetConfig c = quiet_config(12);
        c.chain.target_block_interval = interval;
        c.miners = {{0, 0.25, 1}, {9, 0.25, 2}, {18, 0.25, 3}, {27, 0.25, 4}};
        c.mining_until = static_cast<Seconds>(interval) * 400;
        Simulation sim(g, c, genesis_for(c.chain));
        sim.run_until(c.mining_until + 100);
        auto rep = sim.report();
        CHECK(rep.tips_agree);
        return static_cast<double>(rep.stale_blocks) / static_cast<double>(rep.blocks_created);
    };
    double slow = stale_rate(600);
    double fast = stale_rate(10);
    CHECK(fast > slow);
    CHECK(fast > 0.0);
}

TEST_CASE("identical seed gives a byte-identical trace") {
    auto run = [](std::uint64_t seed) {
        Topology g = build_topology(25, 3, 8, seed);
        NetConfig c;
        c.seed = seed;
        c.chain.target_block_interval = 5;
        c.miners = {{0, 0.5, 1}, {12, 0.5, 2}};
        c.mining_until = 60;
        Simulation sim(g, c, genesis_for(c.chain));
        for (std::uint64_t i = 0; i < 40; ++i) sim.submit_tx(static_cast<double>(i), static_cast<PeerId>((i * 7) % 25), dummy_tx(i));
        sim.run_until(200);
        std::ostringstream out;
        write_trace_jsonl(out, sim.trace());
        out << report_json(sim.report());
        return out.str();
    };
    std::string a = run(5);
    CHECK(a == run(5));
    CHECK(a != run(6));
    CHECK(a.find("\"kind\":\"TrickleTick\"") != std::string::npos);
}

TEST_CASE("network converges once block production stops") {
    Topology g = build_topology(40, 4, 10, 31, {0.5, 2.0});
    NetConfig c = quiet_config(31);
    c.chain.target_block_interval = 3;
    for (PeerId p = 0; p < 40; p += 8) c.miners.push_back({p, 0.2, p + 1u});
    c.mining_until = 300;
    Simulation sim(g, c, genesis_for(c.chain));
    sim.run_until(400);
    auto rep = sim.report();
    CHECK_FALSE(rep.horizon_exhausted);
    CHECK(rep.tips_agree);
    CHECK(rep.stale_blocks > 0);  // fast blocks over slow links fork
}

TEST_CASE("miners include relayed transactions that spend real outputs") {
    ChainParams p;
    p.target_block_interval = 5;
    Block genesis = BlockTree::make_genesis(p, {{1, 10 * kCoin}, {2, 10 * kCoin}}, 0);
    Topology g = build_topology(10, 3, 5, 2);
    NetConfig c;
    c.seed = 2;
    c.chain = p;
    c.miners = {{3, 1.0, 50}};
    c.mining_until = 100;
    Simulation sim(g, c, genesis);
    Transaction spend = make_transaction({{{genesis.coinbase.txid, 0}, 1}}, {{9, 9 * kCoin}}, 1);
    sim.submit_tx(1.0, 7, spend);
    sim.run_until(200);
    CHECK(sim.peer(0).tree.confirmations(spend.txid) > 0);
    CHECK(sim.peer(0).tree.utxo().total_value() == 20 * kCoin + static_cast<Amount>(sim.peer(0).tree.height()) * 50 * kCoin);
}

TEST_CASE("first-relay inference with a direct zero-latency link") {
    Topology g(4);
    g.add_edge(0, 1, 0.05);
    g.add_edge(1, 2, 0.05);
    g.add_edge(2, 3, 0.05);
    g.add_edge(3, 0, 0.0);  // observer 3 sits right next to origin 0
    NetConfig c = quiet_config();
    c.observers = {3};
    Simulation sim(g, c, genesis_for(ChainParams{}));
    Transaction tx = dummy_tx(1);
    sim.submit_tx(0.5, 0, tx);
    sim.run_until(10);
    CHECK(infer_origin_first_relay(sim.observations(), tx.txid) == PeerId{0});
    CHECK(infer_origin_first_relay(sim.observations(), dummy_tx(2).txid) == std::nullopt);
    // The observer stays passive: it never relays.
    for (const auto& r : sim.trace()) CHECK_FALSE((r.kind == EventKind::InvAnnounce && r.from == PeerId{3}));
}

TEST_CASE("a supernode covering the origin's neighborhood pins the origin") {
    // u1..u5 map to 0..4; u4 (3) is the adversary.
    Topology g(5);
    g.add_edge(1, 0, 0.05);
    g.add_edge(1, 2, 0.05);
    g.add_edge(1, 4, 0.05);
    g.add_edge(0, 2, 0.05);
    for (PeerId n : {0u, 1u, 2u, 4u}) g.add_edge(3, n, 0.05);
    NetConfig c = quiet_config();
    c.observers = {3};
    Simulation sim(g, c, genesis_for(ChainParams{}));
    Transaction t3 = dummy_tx(3);
    sim.submit_tx(1.0, 1, t3);
    sim.run_until(10);
    CHECK(infer_origin_candidates(sim.observations(), sim.topology(), 3, t3.txid) == std::set<PeerId>{1});

    // Without the link to u5 the adversary cannot rule it out.
    Topology partial = g;
    partial.remove_edge(3, 4);
    Simulation blind(partial, c, genesis_for(ChainParams{}));
    blind.submit_tx(1.0, 1, t3);
    blind.run_until(10);
    CHECK(infer_origin_candidates(blind.observations(), blind.topology(), 3, t3.txid) == std::set<PeerId>{1, 4});
}

TEST_CASE("Monte Carlo origin accuracy beats the uniform baseline") {
    const std::size_t n = 30;
    Topology g = build_topology(n, 4, 8, 17);
    PeerId spy = g.add_peer();
    for (PeerId p = 0; p < n; ++p) g.add_edge(spy, p, 0.05);
    NetConfig c = quiet_config(17);
    c.observers = {spy};
    Simulation sim(g, c, genesis_for(ChainParams{}));
    Rng rng(17);
    std::uniform_int_distribution<PeerId> pick(0, n - 1);
    for (std::uint64_t i = 0; i < 200; ++i) sim.submit_tx(0.3 * static_cast<double>(i), pick(rng), dummy_tx(i));
    sim.run_until(1000);
    auto acc = origin_inference_accuracy(sim.observations(), sim.origins(), spy);
    CHECK(acc.total == 200);
    CHECK(acc.lower > 1.0 / static_cast<double>(n));
    CHECK(acc.lower <= acc.accuracy);
    CHECK(acc.accuracy <= acc.upper);
}

TEST_CASE("Wilson interval") {
    auto e = wilson_interval(50, 100);
    CHECK(e.accuracy == 0.5);
    CHECK(e.lower == doctest::Approx(0.4038).epsilon(1e-3));
    CHECK(e.upper == doctest::Approx(0.5962).epsilon(1e-3));
    auto none = wilson_interval(0, 0);
    CHECK(none.total == 0);
    CHECK(wilson_interval(10, 10).upper == doctest::Approx(1.0));
}

TEST_CASE("eclipse feeds a private fork; rejoin reorgs only to heavier honest work") {
    Topology g = uniform_latency(build_topology(12, 3, 5, 6), 0.05);
    const PeerId target = 11, control = 10;
    const std::vector<PeerId> adversaries{0, 1};
    NetConfig c = quiet_config(6);
    Simulation sim(g, c, genesis_for(ChainParams{}));
    sim.schedule_block(1.0, 5);
    sim.schedule_block(2.0, 5);
    sim.run_until(3.0);
    REQUIRE(sim.report().tips_agree);
    std::vector<PeerId> honest_links(sim.peer(target).neighbors.begin(), sim.peer(target).neighbors.end());
    std::erase_if(honest_links, [&](PeerId p) { return p == 0 || p == 1; });

    sim.eclipse(target, adversaries);
    sim.run_until(4.0);
    Hash256 base = sim.peer(0).tree.best_chain()[1];
    auto fork = sim.feed_private_fork(0, target, base, 2);
    sim.schedule_block(5.0, 5);  // honest height 3, withheld from the target
    sim.run_until(10.0);

    CHECK(sim.peer(target).tree.tip() == fork.back());
    CHECK(sim.peer(control).tree.tip() != sim.peer(target).tree.tip());
    CHECK(sim.peer(control).tree.height() == 3);
    CHECK(sim.peer(2).tree.tip() == sim.peer(control).tree.tip());

    // Equal work: the target keeps the fork it saw first.
    if (honest_links.empty()) honest_links = {control};
    sim.rejoin(target, honest_links, adversaries);
    sim.run_until(20.0);
    CHECK(sim.peer(target).tree.tip() == fork.back());

    // One more honest block tips the balance.
    sim.schedule_block(21.0, 5);
    sim.run_until(30.0);
    CHECK(sim.peer(target).tree.tip() == sim.peer(control).tree.tip());
    CHECK(sim.peer(target).tree.height() == 4);
}

TEST_CASE("report and origin exports") {
    Topology g = build_topology(6, 2, 3, 1);
    Simulation sim(g, quiet_config(), genesis_for(ChainParams{}));
    Transaction tx = dummy_tx(9);
    sim.submit_tx(0, 2, tx);
    sim.run_until(5);
    std::ostringstream csv;
    write_origins_csv(csv, sim.origins());
    CHECK(csv.str() == "txid,peer_id\n" + tx.txid.hex() + ",2\n");
    std::ostringstream trace;
    write_trace_jsonl(trace, sim.trace());
    CHECK(trace.str().rfind("{\"time\":0.0,\"kind\":\"TxCreate\",\"peer\":2,\"from\":null,\"id\":\"" + tx.txid.hex(), 0) == 0);
    CHECK(report_json(sim.report()).find("\"tips_agree\": true") != std::string::npos);
}
