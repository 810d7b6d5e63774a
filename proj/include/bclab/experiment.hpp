#pragma once

#include "bclab/netsim.hpp"
#include "bclab/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bclab {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration document; the message starts with the JSON path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wraps a JSON object with its path for error messages. Unknown keys are rejected.
class ConfigNode {
public:
    ConfigNode(const nlohmann::json& j, std::string path);

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const nlohmann::json& raw() const { return j_; }
    [[nodiscard]] bool has(const std::string& key) const;
    [[nodiscard]] ConfigNode child(const std::string& key) const;
    [[nodiscard]] std::vector<ConfigNode> items(const std::string& key) const;

    template <class T>
    T get(const std::string& key) const {
        if (!has(key)) throw ConfigError(path_ + "." + key + ": required field missing");
        return convert<T>(j_.at(key), path_ + "." + key);
    }
    template <class T>
    T get(const std::string& key, T fallback) const {
        return has(key) ? convert<T>(j_.at(key), path_ + "." + key) : fallback;
    }
    /// Throws ConfigError naming the first key not in `allowed`.
    void only(std::initializer_list<const char*> allowed) const;
    [[noreturn]] void fail(const std::string& key, const std::string& message) const;

    template <class T>
    static T convert(const nlohmann::json& v, const std::string& path) {
        try {
            return v.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path + ": wrong type (got " + std::string(v.type_name()) + ")");
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
};

ChainParams parse_chain_params(const ConfigNode& node, ChainParams base = {});
EntityProfile parse_profile(const ConfigNode& node, EntityProfile base);
ScenarioConfig parse_scenario_config(const ConfigNode& node);

// ---------------------------------------------------------------- scripted network runs

struct ScriptedBlockSpec {
    std::string label;
    std::string miner;
    netsim::Seconds time = 0;
    std::optional<std::string> parent;
};

struct ScriptedTxSpec {
    std::string label;
    std::string origin;
    netsim::Seconds time = 0;
};

struct RandomTopologySpec {
    std::size_t peers = 0;
    std::size_t min_peers = 8;
    std::size_t max_peers = 125;
    netsim::LatencyRange latency;
};

struct Expectations {
    std::optional<std::size_t> stale_blocks;
    std::optional<std::string> tip;
    bool tips_agree = false;
    /// tx label -> peer name the adversary must pin down.
    std::map<std::string, std::string> origin_of;
    bool accuracy_above_baseline = false;
};

struct NetScript {
    std::vector<std::string> peers;  // names, index = peer id
    std::vector<std::tuple<std::string, std::string, double>> links;
    std::optional<RandomTopologySpec> random_topology;
    netsim::NetConfig config;
    std::vector<std::pair<std::string, double>> miners;  // name, share
    std::optional<std::string> adversary;
    /// Extra observer linked to every honest peer.
    bool adversary_links_all = false;
    std::vector<ScriptedBlockSpec> blocks;
    std::vector<ScriptedTxSpec> txs;
    std::size_t random_transactions = 0;
    netsim::Seconds random_spacing = 0.3;
    netsim::Seconds horizon = 100;
    Expectations expect;
};

NetScript parse_net_script(const ConfigNode& node, std::uint64_t seed);

struct InferenceRow {
    std::string tx;  // label or txid
    TxId txid;
    netsim::PeerId truth = 0;
    std::optional<netsim::PeerId> first_relay;
    std::set<netsim::PeerId> candidates;
};

struct NetRun {
    std::optional<netsim::Simulation> sim;
    std::map<std::string, TxId> tx_labels;
    std::map<std::string, Hash256> block_labels;
    std::vector<InferenceRow> inference;
    std::optional<netsim::AccuracyEstimate> accuracy;
    std::size_t honest_peers = 0;
    /// name -> pass/fail for every expectation in the script.
    std::map<std::string, bool> checks;
};

/// Builds the topology, schedules everything and runs to the horizon.
/// `extra` are submitted from their given origins (economy transactions).
NetRun run_net_script(const NetScript& script, const Block& genesis,
                      const std::vector<std::pair<netsim::PeerId, Transaction>>& extra = {});

/// Genesis funding one output per scripted or random transaction.
Block net_script_genesis(const NetScript& script);

// ---------------------------------------------------------------- bundles

struct FileDigest {
    std::string path;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string tool = "bclab";
    std::string version;
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    nlohmann::ordered_json arguments;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
};

FileDigest digest_file(const std::filesystem::path& file, const std::filesystem::path& relative_to = {});
/// Digests every regular file under `dir` except manifest.json, sorted by path.
std::vector<FileDigest> inventory(const std::filesystem::path& dir);
std::string manifest_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& dir, RunManifest m);

/// Result summary of one `simulate` document.
struct SimulateResult {
    bool expectations_met = true;
    std::vector<std::string> lines;
};

/// Runs a simulate document (keys: seed, economy, network) into `out`.
SimulateResult run_simulation_document(const nlohmann::json& doc, std::uint64_t seed, const std::filesystem::path& out);

}  // namespace bclab
