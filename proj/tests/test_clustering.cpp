#include <doctest.h>

#include "bclab/clustering.hpp"
#include "bclab/example_chain.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace bclab;

namespace {

/// Builds tiny faucet-funded chains one block at a time.
class ChainBuilder {
public:
    explicit ChainBuilder(std::vector<TxOutput> allocation) {
        params_.verify_pow = false;
        params_.retarget_enabled = false;
        Block g = BlockTree::make_genesis(params_, allocation, 0);
        genesis_ = g.coinbase;
        tree_.emplace(params_, g);
    }
    const Transaction& genesis() const { return genesis_; }

    Transaction tx(std::vector<std::pair<const Transaction*, std::uint32_t>> ins, std::vector<TxOutput> outs) {
        std::vector<TxInput> inputs;
        for (auto [t, i] : ins) inputs.push_back({t->outpoint(i), t->outputs[i].address});
        Transaction t = make_transaction(std::move(inputs), std::move(outs), ts_ += 10);
        pending_.push_back(t);
        return t;
    }
    void seal() {
        Block b = tree_->assemble_block(tree_->tip(), 999, pending_, ts_ += 600);
        REQUIRE(tree_->connect_block(b).status == ConnectStatus::Accepted);
        pending_.clear();
    }
    std::vector<Block> chain() {
        if (!pending_.empty()) seal();
        std::vector<Block> out;
        for (const Block* b : tree_->best_chain_blocks()) out.push_back(*b);
        return out;
    }

private:
    ChainParams params_;
    Transaction genesis_;
    std::optional<BlockTree> tree_;
    std::vector<Transaction> pending_;
    SimTime ts_ = 0;
};

ScenarioConfig base_config(std::uint64_t seed, std::size_t txs = 1500) {
    ScenarioConfig c;
    c.entities = 40;
    c.transactions = txs;
    c.peers = 8;
    c.seed = seed;
    return c;
}

HeuristicConfig only(std::set<Heuristic> hs) {
    HeuristicConfig c;
    c.enabled = std::move(hs);
    return c;
}

}  // namespace

TEST_CASE("idioms of use on the running example") {
    LabelledChain ex = running_example();
    EntityPartition p = idioms_of_use(ex.chain);
    CHECK(p.same(2, 3));
    CHECK(p.same(7, 9));
    CHECK(!p.same(2, 7));
    CHECK(!p.same(5, 8));
    CHECK(p.find(3) == 2);  // smallest address represents the class
}

TEST_CASE("one-input transactions leave the identity partition") {
    ChainBuilder cb({{1, 100}, {2, 100}, {3, 100}});
    const Transaction& g = cb.genesis();
    cb.tx({{&g, 0}}, {{4, 50}, {5, 50}});
    cb.tx({{&g, 1}}, {{6, 100}});
    auto chain = cb.chain();
    EntityPartition p = idioms_of_use(chain);
    CHECK(p.class_count() == p.size());
}

TEST_CASE("coinjoin-free scenario gives idioms precision 1") {
    Scenario s = generate(base_config(31));
    EvalReport r = evaluate(idioms_of_use(s.chain), s.truth);
    CHECK(r.precision == 1.0);
    CHECK(r.recall > 0);
    CHECK(r.recall < 1);
}

TEST_CASE("transitive closure") {
    EntityPartition p;
    p.unite(10, 11, Heuristic::Idioms);  // {ax, ay}
    p.unite(10, 12, Heuristic::Idioms);  // {ax, az}
    p.add(20);
    EntityPartition t = transitive_closure(p);
    CHECK(t.same(11, 12));
    CHECK(t.class_count() == 2);

    EntityPartition disjoint;
    disjoint.unite(1, 2, Heuristic::Idioms);
    disjoint.unite(3, 4, Heuristic::Idioms);
    CHECK(transitive_closure(disjoint).classes() == disjoint.classes());
}

TEST_CASE("closure equals connected components of the input co-occurrence graph") {
    ScenarioConfig c = base_config(32);
    c.defaults.reuse = 0.3;
    c.defaults.fresh_change = 0.5;
    Scenario s = generate(c);
    EntityPartition p = transitive_closure(idioms_of_use(s.chain));

    // Independent BFS oracle.
    std::map<AddressId, std::set<AddressId>> adj;
    std::set<AddressId> all;
    for (const Block& b : s.chain) {
        for (const auto& o : b.coinbase.outputs) all.insert(o.address);
        for (const auto& tx : b.txs) {
            for (const auto& o : tx.outputs) all.insert(o.address);
            for (const auto& x : tx.inputs) {
                all.insert(x.signer);
                for (const auto& y : tx.inputs) adj[x.signer].insert(y.signer);
            }
        }
    }
    std::map<AddressId, std::size_t> comp;
    std::size_t ncomp = 0;
    for (AddressId a : all) {
        if (comp.count(a)) continue;
        std::vector<AddressId> stack{a};
        comp[a] = ncomp;
        while (!stack.empty()) {
            AddressId x = stack.back();
            stack.pop_back();
            for (AddressId y : adj[x])
                if (comp.emplace(y, ncomp).second) stack.push_back(y);
        }
        ++ncomp;
    }
    CHECK(p.class_count() == ncomp);
    CHECK(p.size() == all.size());
    for (const auto& [_, members] : p.classes())
        for (AddressId m : members) CHECK(comp.at(m) == comp.at(members.front()));
}

TEST_CASE("find does not depend on union order") {
    std::vector<std::pair<AddressId, AddressId>> pairs{{5, 9}, {9, 2}, {7, 8}, {8, 5}, {11, 12}, {3, 3}};
    EntityPartition a, b;
    for (auto [x, y] : pairs) a.unite(x, y, Heuristic::Idioms);
    std::reverse(pairs.begin(), pairs.end());
    for (auto [x, y] : pairs) b.unite(y, x, Heuristic::Idioms);
    for (AddressId x : a.addresses()) CHECK(a.find(x) == b.find(x));
    CHECK(a.find(9) == 2);
    CHECK(a.class_count() == 3);
}

TEST_CASE("change closure binds a5 and a8") {
    LabelledChain ex = running_example();
    ChangeClosureStats stats;
    EntityPartition p = change_closure(ex.chain, idioms_of_use(ex.chain), {}, &stats);
    CHECK(p.same(5, 8));
    CHECK(!p.same(5, 10));
    CHECK(stats.merges == 1);
    CHECK(stats.ambiguous == 2);  // tx2 and tx4 have two fresh outputs each
    CHECK(p.provenance(8) == std::set<Heuristic>{Heuristic::Change});
}

TEST_CASE("change closure skips ambiguous and self-change transactions") {
    ChainBuilder cb({{1, 100}, {2, 100}});
    const Transaction& g = cb.genesis();
    cb.tx({{&g, 0}}, {{3, 40}, {4, 60}});   // both fresh
    cb.tx({{&g, 1}}, {{2, 40}, {5, 60}});   // change back to the input address, 5 fresh
    auto chain = cb.chain();
    ChangeClosureStats stats;
    EntityPartition p = change_closure(chain, address_universe(chain), {}, &stats);
    CHECK(!p.same(1, 3));
    CHECK(!p.same(1, 4));
    CHECK(stats.ambiguous == 1);
    CHECK(stats.self_change == 1);
    CHECK(p.same(2, 5));
}

TEST_CASE("change closure merges only outputs meeting both conditions") {
    ScenarioConfig c = base_config(33);
    c.defaults.reuse = 0.6;
    Scenario s = generate(c);
    EntityPartition before = address_universe(s.chain);
    EntityPartition p = change_closure(s.chain, before);

    std::map<AddressId, std::size_t> receipts;
    for (const Block& b : s.chain)
        for (const auto& o : b.coinbase.outputs) ++receipts[o.address];
    for (const auto* tx : s.transactions())
        for (const auto& o : tx->outputs) ++receipts[o.address];
    std::size_t false_merges = 0, merges = 0;
    for (const MergeRecord& m : p.merges()) {
        CHECK(m.heuristic == Heuristic::Change);
        CHECK(receipts.at(m.b) == 1);
        ++merges;
        false_merges += s.truth.owner.at(m.a) != s.truth.owner.at(m.b) ? 1 : 0;
    }
    CHECK(merges > 0);
    MESSAGE("change closure: " << merges << " merges, " << false_merges << " cross-entity");
}

TEST_CASE("planted peeling chains are recovered exactly") {
    ScenarioConfig c = base_config(34, 1200);
    c.peel_chains = {{5, 0.1, 10 * kCoin}, {5, 0.1, 8 * kCoin}, {6, 0.1, 12 * kCoin}};
    Scenario s = generate(c);
    auto found = detect_peeling_chains(s.chain, 5, 0.1);
    std::set<std::vector<TxId>> got;
    for (const auto& pc : found) got.insert(pc.txids);
    for (const auto& truth : s.truth.peel_chains) CHECK(got.count(truth.txids) == 1);
    CHECK(found.size() == s.truth.peel_chains.size());

    // Addresses of a recovered chain all belong to the planted entity.
    for (const auto& pc : found)
        for (AddressId a : pc.addresses) CHECK(s.truth.owner.at(a) == s.truth.owner.at(pc.addresses.front()));

    // Shorter threshold than the chain: still whole chains, never fragments.
    for (const auto& pc : detect_peeling_chains(s.chain, 2, 0.1)) CHECK(pc.txids.size() >= 5);
}

TEST_CASE("peeling thresholds") {
    ChainBuilder cb({{1, 1000}, {2, 1000}});
    const Transaction& g = cb.genesis();
    Transaction t1 = cb.tx({{&g, 0}}, {{10, 50}, {11, 950}});
    Transaction t2 = cb.tx({{&t1, 1}}, {{12, 900}, {13, 50}});
    Transaction t3 = cb.tx({{&t2, 0}}, {{14, 40}, {15, 860}});
    cb.tx({{&g, 1}}, {{20, 500}, {21, 500}});  // 50/50 split
    auto chain = cb.chain();
    CHECK(detect_peeling_chains(chain, 3, 0.1).size() == 1);
    CHECK(detect_peeling_chains(chain, 4, 0.1).empty());  // length L-1
    for (double p : {0.1, 0.3, 0.49})
        for (const auto& pc : detect_peeling_chains(chain, 2, p))
            CHECK(std::find(pc.addresses.begin(), pc.addresses.end(), AddressId{2}) == pc.addresses.end());
    auto pc = detect_peeling_chains(chain, 3, 0.1).at(0);
    CHECK(pc.addresses == std::vector<AddressId>{1, 11, 11, 12, 12, 15});
    CHECK_THROWS_AS(detect_peeling_chains(chain, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(detect_peeling_chains(chain, 3, 0.5), std::invalid_argument);
}

TEST_CASE("ip clustering") {
    ChainBuilder cb({{1, 100}, {2, 100}, {3, 100}});
    const Transaction& g = cb.genesis();
    Transaction a = cb.tx({{&g, 0}}, {{4, 100}});
    Transaction b = cb.tx({{&g, 1}}, {{5, 100}});
    Transaction c = cb.tx({{&g, 2}}, {{6, 100}});
    auto chain = cb.chain();
    EntityPartition p = ip_clustering(chain, {{a.txid, 7}, {b.txid, 7}, {c.txid, 8}});
    CHECK(p.same(1, 2));
    CHECK(!p.same(1, 3));
    EntityPartition none = ip_clustering(chain, {});
    CHECK(none.class_count() == none.size());
}

TEST_CASE("temporal clustering") {
    SUBCASE("shared schedule merges an entity's two addresses") {
        ScenarioConfig c = base_config(35, 2000);
        c.entities = 12;
        EntityProfile twin;
        twin.id = 1;
        twin.paired_sends = 1;
        twin.fresh_change = 0;
        twin.activity = 4;
        c.profiles = {twin};
        Scenario s = generate(c);
        EntityPartition p = temporal_clustering(s.chain, 600, 0.05, 3);
        std::size_t twin_merges = 0, cross = 0;
        for (const MergeRecord& m : p.merges()) {
            bool a1 = s.truth.owner.at(m.a) == 1, b1 = s.truth.owner.at(m.b) == 1;
            twin_merges += a1 && b1 ? 1 : 0;
            cross += s.truth.owner.at(m.a) != s.truth.owner.at(m.b) ? 1 : 0;
        }
        CHECK(twin_merges >= 1);
        MESSAGE("temporal: " << twin_merges << " same-entity merges, " << cross << " cross-entity");
    }
    SUBCASE("unreachable occurrence count gives identity") {
        Scenario s = generate(base_config(36, 300));
        EntityPartition p = temporal_clustering(s.chain, 600, 0.05, 1000);
        CHECK(p.class_count() == p.size());
    }
}

TEST_CASE("coinjoin detection") {
    Scenario s = [] {
        ScenarioConfig c = base_config(37, 800);
        c.defaults.coinjoin = 0.1;
        return generate(c);
    }();
    REQUIRE(!s.truth.coinjoins.empty());
    for (const auto* tx : s.transactions()) {
        if (s.truth.coinjoins.count(tx->txid)) CHECK(detect_coinjoin(*tx));
    }
    Transaction one = make_transaction({{{sha256(std::string_view("x")), 0}, 1}}, {{2, 5}, {3, 5}, {4, 5}}, 0);
    CHECK(!detect_coinjoin(one));
    Transaction pay = make_transaction({{{sha256(std::string_view("x")), 0}, 1}, {{sha256(std::string_view("y")), 0}, 2},
                                        {{sha256(std::string_view("z")), 0}, 3}},
                                       {{2, 5}, {3, 7}}, 0);
    CHECK(!detect_coinjoin(pay));
    Transaction two = make_transaction({{{sha256(std::string_view("x")), 0}, 1}, {{sha256(std::string_view("y")), 0}, 2}},
                                       {{5, 9}, {6, 9}}, 0);
    CHECK(!detect_coinjoin(two));
    CHECK(detect_coinjoin(two, 2, 2));
}

TEST_CASE("evaluation reference points") {
    Scenario s = generate(base_config(38, 600));
    EntityPartition truth_part;
    std::map<EntityId, AddressId> first;
    for (auto [a, e] : s.truth.owner) {
        truth_part.add(a);
        auto [it, fresh] = first.emplace(e, a);
        if (!fresh) truth_part.unite(it->second, a, Heuristic::Idioms);
    }
    EvalReport perfect = evaluate(truth_part, s.truth);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.ari == doctest::Approx(1.0));

    EvalReport id = evaluate(address_universe(s.chain), s.truth);
    CHECK(id.precision == 1.0);
    CHECK(id.recall == 0.0);

    EntityPartition missing;
    missing.add(1);
    CHECK_THROWS_AS(evaluate(missing, s.truth), std::invalid_argument);
}

TEST_CASE("coinjoin exclusion protects idioms precision") {
    ScenarioConfig c = base_config(39);
    c.defaults.coinjoin = 0.1;
    Scenario s = generate(c);
    HeuristicConfig with = only({Heuristic::Idioms, Heuristic::Transitive});
    HeuristicConfig without = with;
    without.exclude_coinjoins = false;
    EvalReport good = evaluate(run_heuristics(s.chain, with), s.truth);
    EvalReport bad = evaluate(run_heuristics(s.chain, without), s.truth);
    CHECK(good.precision == 1.0);
    CHECK(bad.precision < good.precision);
    CHECK(bad.false_pairs.at(Heuristic::Idioms) > 0);
    REQUIRE(!bad.false_merge_examples.empty());
    CHECK(bad.false_merge_examples[0].entity_a != bad.false_merge_examples[0].entity_b);
}

TEST_CASE("adding heuristics never lowers recall nor raises the class count") {
    ScenarioConfig c = base_config(40);
    c.defaults.reuse = 0.3;
    c.defaults.paired_sends = 0.2;
    c.peel_chains = {{5, 0.1, 10 * kCoin}};
    Scenario s = generate(c);
    std::set<Heuristic> enabled;
    double recall = 0;
    std::size_t classes = SIZE_MAX;
    for (Heuristic h : kAllHeuristics) {
        enabled.insert(h);
        EntityPartition p = run_heuristics(s.chain, only(enabled), &s.truth.origin_peer);
        EvalReport r = evaluate(p, s.truth);
        CHECK(r.recall >= recall);
        CHECK(p.class_count() <= classes);
        recall = r.recall;
        classes = p.class_count();
    }
}

TEST_CASE("partition and report exports") {
    LabelledChain ex = running_example();
    HeuristicConfig cfg = only({Heuristic::Idioms, Heuristic::Change});
    EntityPartition p = run_heuristics(ex.chain, cfg);
    std::string csv = partition_csv(p);
    CHECK(csv.rfind("address,class_id,heuristic_provenance\n", 0) == 0);
    CHECK(csv.find("\n3,2,idioms\n") != std::string::npos);
    CHECK(csv.find("\n8,5,change\n") != std::string::npos);
    CHECK(csv.find("\n100,100,none\n") != std::string::npos);

    GroundTruth truth;
    for (AddressId a : p.addresses()) truth.owner[a] = static_cast<EntityId>(a);
    truth.marked = {{2, 2}, {3, 3}, {4, 4}};
    EvalReport r = evaluate(p, truth);
    CHECK(r.label_conflicts == 1);  // 2 and 3 sit in one class
    CHECK(r.labelled_classes == 1);
    CHECK(label_classes(p, {{3, 77}}).at(2) == 77);
    std::string js = eval_json(r);
    CHECK(js.find("\"precision\"") != std::string::npos);
    CHECK(js.find("\"adjusted_rand_index\"") != std::string::npos);

    CHECK(parse_heuristics("idioms,transitive") == std::set<Heuristic>{Heuristic::Idioms, Heuristic::Transitive});
    CHECK_THROWS_AS(parse_heuristics("idioms,magic"), std::invalid_argument);
    HeuristicConfig bad;
    bad.peel_fraction = 0.7;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
