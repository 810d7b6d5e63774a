#pragma once

#include "bclab/consensus.hpp"
#include "bclab/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace bclab {

/// Malformed input file; the message starts with "path:line:" where known.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string transaction_json(const Transaction& tx);
std::string block_json(const Block& block, std::int64_t height);

/// One block per line, genesis first, transactions inline.
void write_chain_jsonl(std::ostream& out, std::span<const Block> chain);
void write_chain_jsonl(const std::filesystem::path& path, std::span<const Block> chain);

/// Checks txids, commitments, block hashes and parent links while reading.
/// `source` names the input in error messages.
std::vector<Block> read_chain_jsonl(std::istream& in, const std::string& source = "<chain>");
std::vector<Block> read_chain_jsonl(const std::filesystem::path& path);

/// addresses.csv (address,entity), origins.csv (txid,peer), coinjoin.csv
/// (txid,is_coinjoin), marked.csv (address,entity) and peel_chains.csv
/// (chain,position,txid,entity). `chain` supplies the txids listed in coinjoin.csv.
void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& truth, std::span<const Block> chain);

/// Accepts a directory written by write_ground_truth (missing files are
/// treated as empty, addresses.csv is required) or a single address,entity CSV.
GroundTruth read_ground_truth(const std::filesystem::path& path);

/// Splits one CSV line on commas; the format has no quoting.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace bclab
