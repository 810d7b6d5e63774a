#include <doctest.h>

#include "bclab/clustering.hpp"
#include "bclab/scenario.hpp"
#include "bclab/taint.hpp"

using namespace bclab;

namespace {

ChainParams flat_params() {
    ChainParams p;
    p.verify_pow = false;
    p.retarget_enabled = false;
    return p;
}

std::vector<Block> best(const BlockTree& t) {
    std::vector<Block> out;
    for (const Block* b : t.best_chain_blocks()) out.push_back(*b);
    return out;
}

TxInput spend(const Transaction& tx, std::uint32_t i) { return {tx.outpoint(i), tx.outputs[i].address}; }

Scenario mixed_scenario(std::uint64_t seed, std::size_t txs, Amount fee) {
    ScenarioConfig c;
    c.entities = 30;
    c.transactions = txs;
    c.defaults.coinjoin = 0.05;
    c.defaults.reuse = 0.2;
    c.peel_chains = {{4, 0.1, 5 * kCoin}};
    c.fee = fee;
    c.seed = seed;
    return generate(c);
}

}  // namespace

TEST_CASE("a linear spend chain stays fully tainted") {
    ChainParams p = flat_params();
    Block g = BlockTree::make_genesis(p, {{1, 1000}, {2, 1000}}, 0);
    BlockTree tree(p, g);
    Transaction t1 = make_transaction({spend(g.coinbase, 0)}, {{3, 1000}}, 1);
    Transaction t2 = make_transaction({spend(t1, 0)}, {{4, 990}}, 2);  // fee 10
    Transaction t3 = make_transaction({spend(t2, 0)}, {{5, 990}}, 3);
    tree.connect_block(tree.assemble_block(tree.tip(), 9, {t1, t2, t3}, 600));
    auto chain = best(tree);
    for (TaintPolicy pol : {TaintPolicy::Poison, TaintPolicy::Haircut}) {
        TaintMap m = propagate(chain, {{g.coinbase.outpoint(0)}}, pol);
        CHECK(m.fraction_of(t1.outpoint(0)) == 1);
        CHECK(m.fraction_of(t2.outpoint(0)) == 1);
        CHECK(m.fraction_of(t3.outpoint(0)) == 1);
        CHECK(m.fraction_of(g.coinbase.outpoint(1)) == 0);
    }
    TaintMap h = propagate(chain, {{g.coinbase.outpoint(0)}}, TaintPolicy::Haircut);
    // Fee of 10 lands in the block's coinbase.
    const Block& b1 = chain.back();
    CHECK(h.fee_taint.at(b1.hash()) == 10);
    CHECK(h.fraction_of(b1.coinbase.outpoint(0)) == Rational(10, b1.coinbase.output_total()));
    CHECK(h.mass.back().balanced());
    CHECK(h.mass.back().sourced == 1000);
}

TEST_CASE("mixing one tainted and one clean satoshi") {
    ChainParams p = flat_params();
    Block g = BlockTree::make_genesis(p, {{1, 1}, {2, 1}}, 0);
    BlockTree tree(p, g);
    Transaction mix = make_transaction({spend(g.coinbase, 0), spend(g.coinbase, 1)}, {{3, 1}, {4, 1}}, 1);
    tree.connect_block(tree.assemble_block(tree.tip(), 9, {mix}, 600));
    auto chain = best(tree);
    TaintSource src{{g.coinbase.outpoint(0)}};
    TaintMap h = propagate(chain, src, TaintPolicy::Haircut);
    TaintMap q = propagate(chain, src, TaintPolicy::Poison);
    for (std::uint32_t i = 0; i < 2; ++i) {
        CHECK(h.fraction_of(mix.outpoint(i)) == Rational(1, 2));
        CHECK(q.fraction_of(mix.outpoint(i)) == 1);
    }
}

TEST_CASE("haircut mass balance closes exactly at every height") {
    Scenario s = mixed_scenario(41, 500, 1000);
    REQUIRE(!s.truth.coinjoins.empty());
    // Taint the first three funding outputs of the genesis allocation.
    const Transaction& g = s.chain.front().coinbase;
    TaintSource src;
    Rational initial;
    for (std::uint32_t i = 0; i < 3; ++i) {
        src.outpoints.insert(g.outpoint(i));
        initial += g.outputs[i].amount;
    }
    TaintMap h = propagate(s.chain, src, TaintPolicy::Haircut);
    for (const MassPoint& mp : h.mass) CHECK(mp.balanced());
    CHECK(h.mass.back().sourced == initial);

    // Independent oracle: sum fraction x value over outputs unspent at the tip.
    std::set<Outpoint> spent;
    for (const auto* tx : s.transactions())
        for (const auto& in : tx->inputs) spent.insert(in.outpoint);
    Rational live;
    for (const Block& b : s.chain) {
        for (std::uint32_t i = 0; i < b.coinbase.outputs.size(); ++i)
            if (!spent.count(b.coinbase.outpoint(i))) live += h.fraction_of(b.coinbase.outpoint(i)) * b.coinbase.outputs[i].amount;
        for (const auto& tx : b.txs)
            for (std::uint32_t i = 0; i < tx.outputs.size(); ++i)
                if (!spent.count(tx.outpoint(i))) live += h.fraction_of(tx.outpoint(i)) * tx.outputs[i].amount;
    }
    CHECK(live == initial);
    CHECK(!h.fee_taint.empty());

    // With fees leaving circulation the sink picks up the difference.
    TaintMap sunk = propagate(s.chain, src, TaintPolicy::Haircut, {false});
    CHECK(sunk.mass.back().balanced());
    CHECK(sunk.mass.back().fee_sink > 0);
    CHECK(sunk.mass.back().live + sunk.mass.back().fee_sink == initial);

    for (const auto& [op, f] : h.fraction) {
        CHECK(f > 0);
        CHECK(f <= 1);
    }
}

TEST_CASE("poison dominates haircut and propagation is idempotent") {
    Scenario s = mixed_scenario(42, 500, 1000);
    const Transaction& g = s.chain.front().coinbase;
    TaintSource src{{g.outpoint(0), g.outpoint(5)}};
    TaintMap h = propagate(s.chain, src, TaintPolicy::Haircut);
    TaintMap q = propagate(s.chain, src, TaintPolicy::Poison);
    for (const auto& [op, f] : h.fraction) CHECK(q.fraction_of(op) == 1);
    CHECK(q.fraction.size() >= h.fraction.size());
    CHECK(propagate(s.chain, src, TaintPolicy::Haircut) == h);
    CHECK_THROWS_AS(propagate(s.chain, {{Outpoint{g.txid, 9999}}}, TaintPolicy::Haircut), std::invalid_argument);
}

TEST_CASE("purity reference points") {
    ChainParams p = flat_params();
    Block g = BlockTree::make_genesis(p, {{1, 500}}, 0);
    BlockTree tree(p, g);
    Block b1 = tree.assemble_block(tree.tip(), 7, {}, 600);
    tree.connect_block(b1);
    auto chain1 = best(tree);
    PurityScore direct = purity(chain1, b1.coinbase.outpoint(0));
    CHECK(direct.purity == 1);
    CHECK(direct.dominant == b1.coinbase.txid);

    // 500 from genesis and 500 of the block-1 subsidy mixed evenly.
    Transaction split = make_transaction({spend(b1.coinbase, 0)}, {{8, 500}, {9, b1.coinbase.outputs[0].amount - 500}}, 700);
    Transaction mix = make_transaction({spend(g.coinbase, 0), spend(split, 0)}, {{10, 1000}}, 800);
    tree.connect_block(tree.assemble_block(tree.tip(), 7, {split, mix}, 1200));
    auto chain2 = best(tree);
    PurityScore half = purity(chain2, mix.outpoint(0));
    CHECK(half.purity == Rational(1, 2));
    Rational sum;
    for (const auto& [_, s] : half.shares) sum += s;
    CHECK(sum == 1);
    CHECK(purity_json(mix.outpoint(0), half).find("\"1/2\"") != std::string::npos);
}

TEST_CASE("coinjoin output purity matches the per-origin haircut oracle") {
    ScenarioConfig c;
    c.entities = 20;
    c.transactions = 400;
    c.coinjoin_min = 4;
    c.coinjoin_max = 4;
    c.defaults.coinjoin = 0.1;
    c.funding = FundingMode::Mining;
    c.fee = 0;  // coinbases then carry only their own subsidy
    c.seed = 43;
    Scenario s = generate(c);
    // Earliest coinjoin; later blocks cannot affect its outputs.
    const Transaction* cj = nullptr;
    std::size_t height = 0;
    for (std::size_t h = 0; h < s.chain.size() && !cj; ++h)
        for (const Transaction& tx : s.chain[h].txs)
            if (!cj && s.truth.coinjoins.count(tx.txid)) {
                cj = &tx;
                height = h;
            }
    REQUIRE(cj);
    CHECK(detect_coinjoin(*cj, 4, 4));
    std::span<const Block> prefix(s.chain.data(), height + 1);
    Outpoint target = cj->outpoint(0);
    PurityScore score = purity(prefix, target);
    CHECK(score.shares == purity(s.chain, target).shares);
    Rational sum, oracle_max;
    for (const auto& [origin, share] : score.shares) {
        sum += share;
        const Transaction* cb = nullptr;
        for (const Block& b : prefix)
            if (b.coinbase.txid == origin) cb = &b.coinbase;
        REQUIRE(cb);
        TaintSource src;
        for (std::uint32_t i = 0; i < cb->outputs.size(); ++i) src.outpoints.insert(cb->outpoint(i));
        Rational f = propagate(prefix, src, TaintPolicy::Haircut).fraction_of(target);
        CHECK(f == share);
        if (f > oracle_max) oracle_max = f;
    }
    CHECK(sum == 1);
    CHECK(score.purity <= oracle_max);
    CHECK(score.purity == oracle_max);
    CHECK(score.shares.size() >= 2);
}

TEST_CASE("taint exports and parsing") {
    ChainParams p = flat_params();
    Block g = BlockTree::make_genesis(p, {{1, 3}, {2, 1}}, 0);
    BlockTree tree(p, g);
    Transaction mix = make_transaction({spend(g.coinbase, 0), spend(g.coinbase, 1)}, {{3, 4}}, 1);
    tree.connect_block(tree.assemble_block(tree.tip(), 9, {mix}, 600));
    auto chain = best(tree);
    TaintMap h = propagate(chain, {{g.coinbase.outpoint(1)}}, TaintPolicy::Haircut);
    std::string csv = taint_csv(h);
    CHECK(csv.rfind("txid,index,numerator,denominator\n", 0) == 0);
    CHECK(csv.find(mix.txid.hex() + ",0,1,4\n") != std::string::npos);
    CHECK(taint_summary_json(h, chain).find("\"balanced\": true") != std::string::npos);

    Outpoint op = parse_outpoint(mix.txid.hex() + ":0");
    CHECK(op == mix.outpoint(0));
    CHECK_THROWS_AS(parse_outpoint("abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_outpoint(mix.txid.hex() + ":x"), std::invalid_argument);
    CHECK(parse_taint_policy("poison") == TaintPolicy::Poison);
    CHECK_THROWS_AS(parse_taint_policy("bleach"), std::invalid_argument);
}
