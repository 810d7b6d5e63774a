#pragma once

#include "bclab/consensus.hpp"

#include <map>
#include <string>
#include <vector>

namespace bclab {

/// A small hand-built chain with human-readable names for its parts.
struct LabelledChain {
    ChainParams params;
    std::vector<Block> chain;
    std::map<std::string, AddressId> addresses;  // "a2" -> 2
    std::map<std::string, TxId> txs;             // "tx4" -> txid
};

/// The running example of transactions 1-8, amounts in satoshi:
///   tx1 a1 -> a4, tx2 {a7, a9} -> {a11, a12}, tx4 {a2, a3} -> {a5: 2, a6: 1},
///   tx3 a5 -> {a10, a8 (change)}, tx5 a11 -> a13, tx6 a12 -> a13,
///   tx7 spends tx5 to a14, tx8 spends tx6 to a15.
/// Genesis funds a1, a2 (2), a3, a7, a9 and a10, so a8 is the only fresh output of tx3.
/// Block 1 holds tx1, tx2, tx4; block 2 tx3, tx5, tx6; block 3 tx7, tx8.
/// Coinbases pay address 100.
LabelledChain running_example();

}  // namespace bclab
