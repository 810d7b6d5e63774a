#include "bclab/chainio.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace bclab {

namespace {

using nlohmann::json;

json tx_to_json(const Transaction& tx) {
    json j;
    j["txid"] = tx.txid.hex();
    j["timestamp"] = tx.timestamp;
    if (tx.coinbase_height) j["coinbase_height"] = *tx.coinbase_height;
    j["inputs"] = json::array();
    for (const TxInput& in : tx.inputs)
        j["inputs"].push_back({{"txid", in.outpoint.txid.hex()}, {"index", in.outpoint.index}, {"signer", in.signer}});
    j["outputs"] = json::array();
    for (const TxOutput& o : tx.outputs) j["outputs"].push_back({{"address", o.address}, {"amount", o.amount}});
    return j;
}

json block_to_json(const Block& b, std::int64_t height) {
    json j;
    j["height"] = height;
    j["hash"] = b.hash().hex();
    j["prev_hash"] = b.header.prev_hash.hex();
    j["tx_commitment"] = b.header.tx_commitment.hex();
    j["timestamp"] = b.header.timestamp;
    j["target"] = from_u256(b.header.target).hex();
    j["nonce"] = b.header.nonce;
    j["coinbase"] = tx_to_json(b.coinbase);
    j["txs"] = json::array();
    for (const Transaction& tx : b.txs) j["txs"].push_back(tx_to_json(tx));
    return j;
}

Transaction tx_from_json(const json& j) {
    Transaction tx;
    tx.timestamp = j.at("timestamp").get<SimTime>();
    if (j.contains("coinbase_height")) tx.coinbase_height = j.at("coinbase_height").get<std::int64_t>();
    for (const json& in : j.at("inputs"))
        tx.inputs.push_back({{Hash256::from_hex(in.at("txid").get<std::string>()), in.at("index").get<std::uint32_t>()},
                             in.at("signer").get<AddressId>()});
    for (const json& o : j.at("outputs")) tx.outputs.push_back({o.at("address").get<AddressId>(), o.at("amount").get<Amount>()});
    tx.txid = compute_txid(tx);
    if (tx.txid.hex() != j.at("txid").get<std::string>()) throw std::invalid_argument("txid does not match contents");
    return tx;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw FormatError(p.string() + ": cannot open");
    return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error(p.string() + ": cannot write");
    return out;
}

/// Calls `row(fields)` for every non-header line, after checking the header.
template <class F>
void read_csv(const std::filesystem::path& p, const std::string& header, F row) {
    std::ifstream in = open_in(p);
    std::string line;
    std::size_t n = 1;
    if (!std::getline(in, line) || line != header)
        throw FormatError(p.string() + ":1: expected header '" + header + "'");
    const std::size_t columns = split_csv_line(header).size();
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        std::string where = p.string() + ":" + std::to_string(n) + ": ";
        if (f.size() != columns) throw FormatError(where + "expected " + std::to_string(columns) + " fields");
        try {
            row(f);
        } catch (const std::exception& e) {
            throw FormatError(where + e.what());
        }
    }
}

std::uint64_t to_u64(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
    return v;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (!f.empty() && !f.back().empty() && f.back().back() == '\r') f.back().pop_back();
    return f;
}

std::string transaction_json(const Transaction& tx) { return tx_to_json(tx).dump(); }
std::string block_json(const Block& block, std::int64_t height) { return block_to_json(block, height).dump(); }

void write_chain_jsonl(std::ostream& out, std::span<const Block> chain) {
    for (std::size_t h = 0; h < chain.size(); ++h) out << block_json(chain[h], static_cast<std::int64_t>(h)) << '\n';
}

void write_chain_jsonl(const std::filesystem::path& path, std::span<const Block> chain) {
    auto out = open_out(path);
    write_chain_jsonl(out, chain);
}

std::vector<Block> read_chain_jsonl(std::istream& in, const std::string& source) {
    std::vector<Block> chain;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::string where = source + ":" + std::to_string(n) + ": ";
        try {
            json j = json::parse(line);
            Block b;
            b.header.prev_hash = Hash256::from_hex(j.at("prev_hash").get<std::string>());
            b.header.tx_commitment = Hash256::from_hex(j.at("tx_commitment").get<std::string>());
            b.header.timestamp = j.at("timestamp").get<SimTime>();
            b.header.target = to_u256(Hash256::from_hex(j.at("target").get<std::string>()));
            b.header.nonce = j.at("nonce").get<std::uint32_t>();
            b.coinbase = tx_from_json(j.at("coinbase"));
            if (!b.coinbase.is_coinbase()) throw std::invalid_argument("coinbase has inputs");
            for (const json& t : j.at("txs")) b.txs.push_back(tx_from_json(t));
            if (tx_commitment(b.coinbase, b.txs) != b.header.tx_commitment)
                throw std::invalid_argument("tx_commitment does not match transactions");
            if (j.contains("hash") && b.hash().hex() != j.at("hash").get<std::string>())
                throw std::invalid_argument("block hash does not match header");
            if (!chain.empty() && b.header.prev_hash != chain.back().hash())
                throw std::invalid_argument("prev_hash does not link to the previous line");
            chain.push_back(std::move(b));
        } catch (const json::exception& e) {
            throw FormatError(where + e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError(where + e.what());
        }
    }
    if (chain.empty()) throw FormatError(source + ": empty chain");
    return chain;
}

std::vector<Block> read_chain_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_chain_jsonl(in, path.string());
}

void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& truth, std::span<const Block> chain) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "addresses.csv");
        out << "address,entity\n";
        for (auto [a, e] : truth.owner) out << a << ',' << e << '\n';
    }
    {
        auto out = open_out(dir / "origins.csv");
        out << "txid,peer_id\n";
        for (const auto& [t, p] : truth.origin_peer) out << t.hex() << ',' << p << '\n';
    }
    {
        auto out = open_out(dir / "coinjoin.csv");
        out << "txid,is_coinjoin\n";
        for (const Block& b : chain)
            for (const Transaction& tx : b.txs) out << tx.txid.hex() << ',' << (truth.coinjoins.count(tx.txid) ? 1 : 0) << '\n';
    }
    {
        auto out = open_out(dir / "marked.csv");
        out << "address,entity\n";
        for (auto [a, e] : truth.marked) out << a << ',' << e << '\n';
    }
    {
        auto out = open_out(dir / "peel_chains.csv");
        out << "chain,position,txid,entity\n";
        for (std::size_t c = 0; c < truth.peel_chains.size(); ++c)
            for (std::size_t i = 0; i < truth.peel_chains[c].txids.size(); ++i)
                out << c << ',' << i << ',' << truth.peel_chains[c].txids[i].hex() << ',' << truth.peel_chains[c].entity << '\n';
    }
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    GroundTruth t;
    auto read_owner = [](const std::filesystem::path& p, std::map<AddressId, EntityId>& into) {
        read_csv(p, "address,entity", [&](const std::vector<std::string>& f) {
            into[to_u64(f[0])] = static_cast<EntityId>(to_u64(f[1]));
        });
    };
    if (!std::filesystem::is_directory(path)) {
        read_owner(path, t.owner);
        return t;
    }
    read_owner(path / "addresses.csv", t.owner);
    if (std::filesystem::exists(path / "marked.csv")) read_owner(path / "marked.csv", t.marked);
    if (std::filesystem::exists(path / "origins.csv"))
        read_csv(path / "origins.csv", "txid,peer_id", [&](const std::vector<std::string>& f) {
            t.origin_peer[Hash256::from_hex(f[0])] = static_cast<std::uint32_t>(to_u64(f[1]));
        });
    if (std::filesystem::exists(path / "coinjoin.csv"))
        read_csv(path / "coinjoin.csv", "txid,is_coinjoin", [&](const std::vector<std::string>& f) {
            if (f[1] != "0" && f[1] != "1") throw std::invalid_argument("is_coinjoin must be 0 or 1");
            if (f[1] == "1") t.coinjoins.insert(Hash256::from_hex(f[0]));
        });
    if (std::filesystem::exists(path / "peel_chains.csv")) {
        std::map<std::size_t, PeelChainTruth> chains;
        read_csv(path / "peel_chains.csv", "chain,position,txid,entity", [&](const std::vector<std::string>& f) {
            auto& c = chains[to_u64(f[0])];
            if (to_u64(f[1]) != c.txids.size()) throw std::invalid_argument("peel chain positions out of order");
            c.entity = static_cast<EntityId>(to_u64(f[3]));
            c.txids.push_back(Hash256::from_hex(f[2]));
        });
        for (auto& [_, c] : chains) t.peel_chains.push_back(std::move(c));
    }
    return t;
}

}  // namespace bclab
