#include "bclab/example_chain.hpp"

#include <stdexcept>

namespace bclab {

LabelledChain running_example() {
    LabelledChain out;
    out.params.verify_pow = false;
    out.params.retarget_enabled = false;
    for (AddressId a : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15})
        out.addresses["a" + std::to_string(a)] = a;
    constexpr AddressId miner = 100;

    Block genesis = BlockTree::make_genesis(out.params, {{1, 1}, {2, 2}, {3, 1}, {7, 1}, {9, 1}, {10, 1}}, 0);
    const Transaction& g = genesis.coinbase;
    BlockTree tree(out.params, genesis);

    auto in = [](const Transaction& tx, std::uint32_t i) { return TxInput{tx.outpoint(i), tx.outputs[i].address}; };
    Transaction tx1 = make_transaction({in(g, 0)}, {{4, 1}}, 100);
    Transaction tx2 = make_transaction({in(g, 3), in(g, 4)}, {{11, 1}, {12, 1}}, 110);
    Transaction tx4 = make_transaction({in(g, 1), in(g, 2)}, {{5, 2}, {6, 1}}, 120);
    Transaction tx3 = make_transaction({in(tx4, 0)}, {{10, 1}, {8, 1}}, 700);
    Transaction tx5 = make_transaction({in(tx2, 0)}, {{13, 1}}, 710);
    Transaction tx6 = make_transaction({in(tx2, 1)}, {{13, 1}}, 720);
    Transaction tx7 = make_transaction({in(tx5, 0)}, {{14, 1}}, 1300);
    Transaction tx8 = make_transaction({in(tx6, 0)}, {{15, 1}}, 1310);
    out.txs = {{"tx1", tx1.txid}, {"tx2", tx2.txid}, {"tx3", tx3.txid}, {"tx4", tx4.txid},
               {"tx5", tx5.txid}, {"tx6", tx6.txid}, {"tx7", tx7.txid}, {"tx8", tx8.txid}};

    SimTime ts = 600;
    for (auto txs : {std::vector{tx1, tx2, tx4}, std::vector{tx3, tx5, tx6}, std::vector{tx7, tx8}}) {
        Block b = tree.assemble_block(tree.tip(), miner, txs, ts);
        if (tree.connect_block(b).status != ConnectStatus::Accepted) throw std::logic_error("running example invalid");
        ts += 600;
    }
    for (const Block* b : tree.best_chain_blocks()) out.chain.push_back(*b);
    return out;
}

}  // namespace bclab
