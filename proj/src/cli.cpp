#include "bclab/cli.hpp"

#include "bclab/chainio.hpp"
#include "bclab/clustering.hpp"
#include "bclab/experiment.hpp"
#include "bclab/graphs.hpp"
#include "bclab/hash.hpp"
#include "bclab/mining.hpp"
#include "bclab/taint.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace bclab {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Options every subcommand accepts.
struct Common {
    std::uint64_t seed = 1;
    std::string out;
    std::string format;
    unsigned jobs = 1;
    std::size_t runs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool runs) {
    cmd->add_option("--seed", c.seed, "Base seed")->capture_default_str();
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--format", c.format, "csv, json or dot where a table is written");
    cmd->add_option("--jobs", c.jobs, "Worker threads for repeated runs")->capture_default_str()->check(CLI::Range(1u, 256u));
    if (runs)
        cmd->add_option("--runs", c.runs, "Independent runs with seeds seed, seed+1, ...")
            ->capture_default_str()
            ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error(p.string() + ": cannot write");
    out << s;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error(p.string() + ": cannot read");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunManifest manifest(const std::string& command, std::uint64_t seed, ojson args, const std::string& extra = {}) {
    RunManifest m;
    m.version = kVersion;
    m.command = command;
    m.seed = seed;
    m.config_digest = sha256(args.dump() + extra).hex();
    m.arguments = std::move(args);
    return m;
}

/// Ground-truth inputs recorded in a manifest.
void add_inputs(RunManifest& m, const fs::path& p) {
    if (p.empty()) return;
    if (fs::is_directory(p)) {
        for (FileDigest d : inventory(p)) {
            d.path = (p / d.path).generic_string();
            m.inputs.push_back(d);
        }
    } else {
        m.inputs.push_back(digest_file(p));
    }
}

ExportFormat table_format(const std::string& f, ExportFormat fallback) {
    return f.empty() ? fallback : parse_export_format(f);
}

const char* extension(ExportFormat f) {
    switch (f) {
        case ExportFormat::Csv: return "csv";
        case ExportFormat::Json: return "json";
        case ExportFormat::Dot: return "dot";
    }
    return "txt";
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads and prints their
/// output in index order. Returns the worst exit code.
int fan_out(std::size_t n, unsigned jobs, std::ostream& out, const std::function<int(std::size_t, std::ostream&)>& body) {
    std::vector<std::string> text(n);
    std::vector<int> codes(n, kExitOk);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            std::ostringstream o;
            try {
                codes[i] = body(i, o);
            } catch (...) {
                errors[i] = std::current_exception();
            }
            text[i] = o.str();
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    int worst = kExitOk;
    for (std::size_t i = 0; i < n; ++i) {
        out << text[i];
        if (errors[i]) std::rethrow_exception(errors[i]);
        worst = std::max(worst, codes[i]);
    }
    return worst;
}

fs::path run_dir(const Common& c, std::size_t i) {
    return c.runs == 1 ? fs::path(c.out) : fs::path(c.out) / ("seed-" + std::to_string(c.seed + i));
}

/// address,class_id[,...] as written by the cluster command.
std::map<AddressId, std::uint64_t> read_partition_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot read");
    std::map<AddressId, std::uint64_t> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || (n == 1 && line.rfind("address", 0) == 0)) continue;
        auto f = split_csv_line(line);
        try {
            if (f.size() < 2) throw std::invalid_argument("need address,class_id");
            out[std::stoull(f[0])] = std::stoull(f[1]);
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

/// txid,peer_id
std::map<TxId, std::uint32_t> read_origins_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot read");
    std::map<TxId, std::uint32_t> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || (n == 1 && line.rfind("txid", 0) == 0)) continue;
        auto f = split_csv_line(line);
        try {
            if (f.size() != 2) throw std::invalid_argument("need txid,peer_id");
            out[Hash256::from_hex(f[0])] = static_cast<std::uint32_t>(std::stoul(f[1]));
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

/// "txid:index", a unique txid prefix of at least 8 hex digits, or
/// "coinbase:<height>:<index>".
Outpoint resolve_outpoint(std::span<const Block> chain, const std::string& text) {
    auto fail = [&](const std::string& why) { throw std::invalid_argument("--source/--purity '" + text + "': " + why); };
    auto colon = text.rfind(':');
    if (colon == std::string::npos) fail("expected txid:index");
    const std::string head = text.substr(0, colon);
    const std::string idx = text.substr(colon + 1);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) fail("index must be a non-negative integer");
    Outpoint op;
    op.index = static_cast<std::uint32_t>(std::stoul(idx));
    if (head.rfind("coinbase:", 0) == 0) {
        const std::string h = head.substr(9);
        if (h.empty() || h.find_first_not_of("0123456789") != std::string::npos) fail("bad coinbase height");
        const std::size_t height = std::stoul(h);
        if (height >= chain.size()) fail("height beyond the chain tip");
        op.txid = chain[height].coinbase.txid;
        return op;
    }
    if (head.size() == 64) {
        op.txid = Hash256::from_hex(head);
        return op;
    }
    if (head.size() < 8) fail("txid prefix needs at least 8 hex digits");
    std::optional<TxId> found;
    auto consider = [&](const TxId& id) {
        if (id.hex().rfind(head, 0) != 0) return;
        if (found && *found != id) fail("txid prefix is ambiguous");
        found = id;
    };
    for (const Block& b : chain) {
        consider(b.coinbase.txid);
        for (const Transaction& tx : b.txs) consider(tx.txid);
    }
    if (!found) fail("no transaction with this txid prefix");
    op.txid = *found;
    return op;
}

std::string op_str(const Outpoint& op) { return op.txid.hex() + ":" + std::to_string(op.index); }

std::string fmt(double v, int precision = 6) {
    std::ostringstream o;
    o.precision(precision);
    o << v;
    return o.str();
}

// ---------------------------------------------------------------- mine

struct MineOpts {
    Common c;
    std::size_t blocks = 10;
    unsigned target_bits = 240;
    bool retarget = false;
    SimTime interval = 600;
    std::int64_t window = 2016;
    std::uint32_t clamp = 4;
    bool abstract = false;
    double hashrate = 0;
    std::optional<std::int64_t> change_at;
    double factor = 2.0;
};

int cmd_mine(const MineOpts& o, std::ostream& out) {
    if (o.c.format.size() && o.c.format != "json") throw std::invalid_argument("mine writes JSON only");
    ChainParams p;
    p.initial_target = target_from_bits(o.target_bits);
    p.retarget_enabled = o.retarget;
    p.target_block_interval = o.interval;
    p.retarget_window = o.window;
    p.retarget_clamp = o.clamp;
    p.validate();
    return fan_out(o.c.runs, o.c.jobs, out, [&](std::size_t i, std::ostream& log) {
        MiningConfig cfg;
        cfg.blocks = o.blocks;
        cfg.abstract_time = o.abstract;
        cfg.hashrate = o.hashrate;
        cfg.hashrate_change_height = o.change_at;
        cfg.hashrate_factor = o.factor;
        cfg.seed = o.c.seed + i;
        MiningRun run = mine_chain(p, cfg);

        std::vector<Block> chain;
        for (const Block* b : run.tree.best_chain_blocks()) chain.push_back(*b);
        bool pow_ok = true;
        if (!o.abstract)
            for (std::size_t h = 1; h < chain.size(); ++h) pow_ok = pow_ok && check_pow(chain[h].header);

        const fs::path dir = run_dir(o.c, i);
        fs::create_directories(dir);
        write_chain_jsonl(dir / "chain.jsonl", chain);

        double attempts = 0, duration = 0;
        ojson j;
        j["mode"] = o.abstract ? "abstract" : "pow";
        j["target_bits"] = o.target_bits;
        j["expected_attempts"] = expected_attempts(p.initial_target);
        j["blocks"] = ojson::array();
        for (const auto& b : run.blocks) {
            attempts += static_cast<double>(b.attempts);
            duration += b.duration;
            j["blocks"].push_back({{"height", b.height}, {"attempts", b.attempts}, {"timestamp", b.timestamp}, {"duration", b.duration}});
        }
        const double n = std::max<double>(1, static_cast<double>(run.blocks.size()));
        j["mean_attempts"] = attempts / n;
        j["mean_interval"] = duration / n;
        j["all_pass_check_pow"] = o.abstract ? ojson(nullptr) : ojson(pow_ok);
        j["retargets"] = ojson::array();
        for (const auto& r : run.retargets)
            j["retargets"].push_back({{"height", r.height},
                                      {"actual_duration", r.actual_duration},
                                      {"expected_duration", r.expected_duration},
                                      {"raw_ratio", r.raw_ratio},
                                      {"applied_ratio", r.applied_ratio},
                                      {"old_target", from_u256(r.old_target).hex()},
                                      {"new_target", from_u256(r.new_target).hex()}});
        write_text(dir / "mining.json", j.dump(2) + "\n");

        ojson args{{"blocks", o.blocks}, {"target_bits", o.target_bits}, {"retarget", o.retarget}, {"interval", o.interval},
                   {"window", o.window}, {"clamp", o.clamp}, {"abstract", o.abstract}, {"hashrate", o.hashrate},
                   {"hashrate_change_at", o.change_at ? ojson(*o.change_at) : ojson(nullptr)}, {"factor", o.factor}};
        write_manifest(dir, manifest("mine", cfg.seed, args));

        log << "seed " << cfg.seed << ": mined " << run.blocks.size() << " blocks, mean attempts " << fmt(attempts / n)
            << " (expected " << fmt(expected_attempts(p.initial_target)) << "), mean interval " << fmt(duration / n)
            << " s, " << run.retargets.size() << " retargets";
        if (!o.abstract) log << ", check_pow " << (pow_ok ? "all pass" : "FAILED");
        log << "\n";
        return pow_ok ? kExitOk : kExitRuntime;
    });
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
    Common c;
    std::string config;
};

int cmd_simulate(const SimulateOpts& o, std::ostream& out) {
    const std::string text = read_text(o.config);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(o.config + ": " + e.what());
    }
    // A seed in the document wins over --seed for the first run.
    std::uint64_t base = o.c.seed;
    if (doc.is_object() && doc.contains("seed")) base = ConfigNode::convert<std::uint64_t>(doc["seed"], "$.seed");
    return fan_out(o.c.runs, o.c.jobs, out, [&](std::size_t i, std::ostream& log) {
        const std::uint64_t seed = base + i;
        const fs::path dir = run_dir(o.c, i);
        SimulateResult r = run_simulation_document(doc, seed, dir);
        RunManifest m = manifest("simulate", seed, {{"config", o.config}}, text);
        m.inputs.push_back(digest_file(o.config));
        write_manifest(dir, m);
        for (const auto& l : r.lines) log << (o.c.runs > 1 ? "seed " + std::to_string(seed) + ": " : "") << l << "\n";
        return r.expectations_met ? kExitOk : kExitRuntime;
    });
}

// ---------------------------------------------------------------- graph and metrics

struct GraphOpts {
    Common c;
    std::string chain;
    std::string kind = "address";
    std::string share = "proportional";
    std::string partition;
    std::string ground_truth;
    std::size_t cutoff = 2;
    std::size_t top_k = 10;
};

struct BuiltGraph {
    EdgeTable table;
    /// Address node to entity label (address graphs with a partition).
    std::map<std::string, std::string> cluster_of;
};

BuiltGraph build_graph(const GraphOpts& o, std::span<const Block> chain) {
    BuiltGraph g;
    std::map<AddressId, std::uint64_t> classes;
    if (!o.partition.empty()) {
        classes = read_partition_csv(o.partition);
    } else if (!o.ground_truth.empty()) {
        for (const auto& [a, e] : read_ground_truth(o.ground_truth).owner) classes[a] = e;
    }
    if (o.kind == "transaction") {
        g.table = to_table(build_transaction_graph(chain));
        return g;
    }
    ShareMode mode = ShareMode::Proportional;
    if (o.share == "full") mode = ShareMode::FullAmount;
    else if (o.share != "proportional") throw std::invalid_argument("--share must be proportional or full");
    AddressGraph ag = build_address_graph(chain, mode);
    if (o.kind == "address") {
        g.table = to_table(ag);
        for (const auto& [a, cls] : classes) g.cluster_of[std::to_string(a)] = std::to_string(cls);
        return g;
    }
    if (o.kind != "entity") throw std::invalid_argument("--kind must be transaction, address or entity");
    if (classes.empty()) throw std::invalid_argument("--kind entity needs --partition or --ground-truth");
    g.table = to_table(build_entity_graph(ag, [&](AddressId a) -> std::optional<std::uint64_t> {
        auto it = classes.find(a);
        return it == classes.end() ? std::nullopt : std::optional<std::uint64_t>(it->second);
    }));
    return g;
}

ojson graph_args(const GraphOpts& o) {
    return {{"chain", o.chain}, {"kind", o.kind}, {"share", o.share}, {"partition", o.partition}, {"ground_truth", o.ground_truth}};
}

RunManifest graph_manifest(const std::string& command, const GraphOpts& o, ojson args) {
    RunManifest m = manifest(command, o.c.seed, std::move(args));
    add_inputs(m, o.chain);
    add_inputs(m, o.partition);
    add_inputs(m, o.ground_truth);
    return m;
}

int cmd_graph(const GraphOpts& o, std::ostream& out) {
    const ExportFormat f = table_format(o.c.format, ExportFormat::Csv);
    auto chain = read_chain_jsonl(fs::path(o.chain));
    BuiltGraph g = build_graph(o, chain);
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    const fs::path file = dir / (o.kind + "_graph." + extension(f));
    write_text(file, export_table(g.table, f, g.cluster_of));
    ojson args = graph_args(o);
    args["format"] = extension(f);
    write_manifest(dir, graph_manifest("graph", o, args));
    out << o.kind << " graph: " << g.table.nodes.size() << " nodes, " << g.table.edges.size() << " edges -> "
        << file.generic_string() << "\n";
    return kExitOk;
}

int cmd_metrics(const GraphOpts& o, std::ostream& out) {
    if (o.c.format.size() && o.c.format != "json") throw std::invalid_argument("metrics writes JSON only");
    auto chain = read_chain_jsonl(fs::path(o.chain));
    BuiltGraph g = build_graph(o, chain);
    GraphMetrics m = compute_metrics(g.table, {o.cutoff, o.top_k});
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_text(dir / "metrics.json", metrics_json(m));
    ojson args = graph_args(o);
    args["cutoff"] = o.cutoff;
    args["top_k"] = o.top_k;
    write_manifest(dir, graph_manifest("metrics", o, args));
    out << o.kind << " graph: " << m.nodes << " nodes, " << m.edges << " edges, clustering coefficient "
        << fmt(m.clustering_coefficient) << ", " << m.components << " components, tail exponent "
        << (m.tail_exponent ? fmt(*m.tail_exponent) : std::string("n/a")) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- cluster

struct ClusterOpts {
    Common c;
    std::string chain;
    std::string heuristics = "idioms,transitive";
    std::string ground_truth;
    std::string origins;
    bool keep_coinjoins = false;
    HeuristicConfig h;
};

int cmd_cluster(ClusterOpts o, std::ostream& out, std::ostream& err) {
    const ExportFormat f = table_format(o.c.format, ExportFormat::Csv);
    if (f == ExportFormat::Dot) throw std::invalid_argument("cluster writes csv or json");
    o.h.enabled = parse_heuristics(o.heuristics);
    o.h.exclude_coinjoins = !o.keep_coinjoins;
    o.h.validate();
    auto chain = read_chain_jsonl(fs::path(o.chain));

    std::optional<GroundTruth> truth;
    if (!o.ground_truth.empty()) truth = read_ground_truth(o.ground_truth);

    std::optional<std::map<TxId, std::uint32_t>> origin;
    std::string origin_source;
    if (o.h.enabled.count(Heuristic::Ip)) {
        if (!o.origins.empty()) {
            origin = read_origins_csv(o.origins);
            origin_source = o.origins;
        } else if (truth && !truth->origin_peer.empty()) {
            origin = truth->origin_peer;
            origin_source = "ground truth";
        } else {
            err << "warning: ip heuristic enabled without --origins or ground-truth origins; skipped\n";
        }
    }

    EntityPartition part = run_heuristics(chain, o.h, origin ? &*origin : nullptr);
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    if (f == ExportFormat::Csv) {
        write_text(dir / "partition.csv", partition_csv(part));
    } else {
        ojson j = ojson::array();
        for (AddressId a : part.addresses()) {
            auto prov = ojson::array();
            for (Heuristic h : part.provenance(a)) prov.push_back(to_string(h));
            j.push_back({{"address", a}, {"class_id", part.find(a)}, {"heuristic_provenance", prov}});
        }
        write_text(dir / "partition.json", j.dump(2) + "\n");
    }
    if (o.h.enabled.count(Heuristic::Peeling)) {
        ojson pc = ojson::array();
        for (const PeelChain& c : detect_peeling_chains(chain, o.h.peel_min_length, o.h.peel_fraction)) {
            auto txs = ojson::array();
            for (const TxId& t : c.txids) txs.push_back(t.hex());
            pc.push_back({{"txids", txs}, {"addresses", c.addresses}});
        }
        write_text(dir / "peel_chains.json", pc.dump(2) + "\n");
    }

    out << "clustered " << part.size() << " addresses into " << part.class_count() << " classes with " << o.heuristics;
    if (!origin_source.empty()) out << " (origins from " << origin_source << ")";
    out << "\n";
    if (truth) {
        EvalReport r = evaluate(part, *truth);
        write_text(dir / "eval.json", eval_json(r));
        out << "precision " << fmt(r.precision) << " recall " << fmt(r.recall) << " ARI " << fmt(r.ari) << "\n";
    } else {
        err << "warning: no --ground-truth given; evaluation skipped\n";
    }

    ojson args{{"chain", o.chain},
               {"heuristics", o.heuristics},
               {"ground_truth", o.ground_truth},
               {"origins", o.origins},
               {"exclude_coinjoins", o.h.exclude_coinjoins},
               {"coinjoin_min_inputs", o.h.coinjoin_min_inputs},
               {"coinjoin_min_equal", o.h.coinjoin_min_equal},
               {"peel_min_length", o.h.peel_min_length},
               {"peel_fraction", o.h.peel_fraction},
               {"temporal_window", o.h.temporal_window},
               {"temporal_tolerance", o.h.temporal_tolerance},
               {"temporal_min_occurrences", o.h.temporal_min_occurrences},
               {"format", extension(f)}};
    RunManifest m = manifest("cluster", o.c.seed, args);
    add_inputs(m, o.chain);
    add_inputs(m, o.ground_truth);
    add_inputs(m, o.origins);
    write_manifest(dir, m);
    return kExitOk;
}

// ---------------------------------------------------------------- taint

struct TaintOpts {
    Common c;
    std::string chain;
    std::string policy = "haircut";
    std::vector<std::string> sources;
    std::vector<std::string> purity;
    bool fee_sink = false;
};

int cmd_taint(const TaintOpts& o, std::ostream& out) {
    const ExportFormat f = table_format(o.c.format, ExportFormat::Csv);
    if (f == ExportFormat::Dot) throw std::invalid_argument("taint writes csv or json");
    const TaintPolicy policy = parse_taint_policy(o.policy);
    auto chain = read_chain_jsonl(fs::path(o.chain));
    TaintSource src;
    for (const auto& s : o.sources) src.outpoints.insert(resolve_outpoint(chain, s));
    std::vector<Outpoint> targets;
    for (const auto& s : o.purity) targets.push_back(resolve_outpoint(chain, s));

    TaintMap map = propagate(chain, src, policy, {!o.fee_sink});
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    if (f == ExportFormat::Csv) {
        write_text(dir / "taint.csv", taint_csv(map));
    } else {
        ojson j = ojson::array();
        for (const auto& [op, fr] : map.fraction)
            j.push_back({{"txid", op.txid.hex()},
                         {"index", op.index},
                         {"numerator", boost::multiprecision::numerator(fr).str()},
                         {"denominator", boost::multiprecision::denominator(fr).str()}});
        write_text(dir / "taint_outputs.json", j.dump(2) + "\n");
    }
    write_text(dir / "taint.json", taint_summary_json(map, chain));
    if (!targets.empty()) {
        ojson all = ojson::array();
        for (const Outpoint& t : targets) {
            PurityScore s = purity(chain, t);
            all.push_back(ojson::parse(purity_json(t, s)));
            out << "purity of " << op_str(t) << ": " << fmt(s.purity.convert_to<double>()) << " (" << s.shares.size()
                << " coinbase origins)\n";
        }
        write_text(dir / "purity.json", all.dump(2) + "\n");
    }

    out << to_string(policy) << " taint: " << map.fraction.size() << " tainted outputs";
    if (!map.mass.empty()) {
        const MassPoint& m = map.mass.back();
        bool every = true;
        for (const MassPoint& p : map.mass) every = every && p.balanced();
        out << "; mass live " << fmt(m.live.convert_to<double>(), 12) << " + fee_sink " << fmt(m.fee_sink.convert_to<double>(), 12)
            << " vs sourced " << fmt(m.sourced.convert_to<double>(), 12) << ": "
            << (every ? "balanced at every height" : "NOT balanced");
        if (policy == TaintPolicy::Poison) out << " (poison inflates mass by design)";
    }
    out << "\n";

    ojson args{{"chain", o.chain}, {"policy", o.policy}, {"sources", o.sources}, {"purity", o.purity}, {"fee_sink", o.fee_sink},
               {"format", extension(f)}};
    RunManifest m = manifest("taint", o.c.seed, args);
    add_inputs(m, o.chain);
    write_manifest(dir, m);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"bclab: blockchain ledger, network and forensics laboratory", "bclab"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    MineOpts mine;
    auto* m = app.add_subcommand("mine", "Mine a chain with one honest miner");
    add_common(m, mine.c, true);
    m->add_option("--blocks", mine.blocks, "Blocks to mine")->capture_default_str();
    m->add_option("--target-bits", mine.target_bits, "Initial target is 2^bits")->capture_default_str()->check(CLI::Range(1u, 256u));
    m->add_flag("--retarget", mine.retarget, "Enable difficulty retargeting");
    m->add_option("--interval", mine.interval, "Target block interval in seconds")->capture_default_str();
    m->add_option("--window", mine.window, "Retarget window in blocks")->capture_default_str();
    m->add_option("--clamp", mine.clamp, "Retarget clamp factor")->capture_default_str();
    m->add_flag("--abstract", mine.abstract, "Sample block times instead of hashing");
    m->add_option("--hashrate", mine.hashrate, "Hashes per second (0 derives it from target and interval)");
    m->add_option("--hashrate-change-at", mine.change_at, "Height at which the hashrate changes");
    m->add_option("--factor", mine.factor, "Hashrate multiplier at that height")->capture_default_str();

    SimulateOpts sim;
    auto* s = app.add_subcommand("simulate", "Run an economy and/or network document");
    add_common(s, sim.c, true);
    s->add_option("config", sim.config, "JSON document")->required()->check(CLI::ExistingFile);

    GraphOpts graph;
    auto* g = app.add_subcommand("graph", "Export a transaction, address or entity graph");
    add_common(g, graph.c, false);
    GraphOpts metrics;
    auto* me = app.add_subcommand("metrics", "Structural metrics of a graph");
    add_common(me, metrics.c, false);
    for (auto [cmd, o] : {std::pair{g, &graph}, std::pair{me, &metrics}}) {
        cmd->add_option("--chain", o->chain, "chain.jsonl")->required()->check(CLI::ExistingFile);
        cmd->add_option("--kind", o->kind, "transaction, address or entity")->capture_default_str();
        cmd->add_option("--share", o->share, "Address edge amounts: proportional or full")->capture_default_str();
        cmd->add_option("--partition", o->partition, "partition.csv from the cluster command")->check(CLI::ExistingFile);
        cmd->add_option("--ground-truth", o->ground_truth, "Ground-truth directory or address,entity CSV")->check(CLI::ExistingPath);
    }
    me->add_option("--cutoff", metrics.cutoff, "Smallest degree in the tail fit")->capture_default_str();
    me->add_option("--top-k", metrics.top_k, "Highest-degree nodes to list")->capture_default_str();

    ClusterOpts cl;
    auto* c = app.add_subcommand("cluster", "Cluster addresses into entities");
    add_common(c, cl.c, false);
    c->add_option("--chain", cl.chain, "chain.jsonl")->required()->check(CLI::ExistingFile);
    c->add_option("--heuristics", cl.heuristics, "Comma list of idioms, transitive, change, peeling, ip, temporal")->capture_default_str();
    c->add_option("--ground-truth", cl.ground_truth, "Ground-truth directory or address,entity CSV")->check(CLI::ExistingPath);
    c->add_option("--origins", cl.origins, "txid,peer_id CSV for the ip heuristic")->check(CLI::ExistingFile);
    c->add_flag("--keep-coinjoins", cl.keep_coinjoins, "Apply heuristics to coinjoin transactions too");
    c->add_option("--coinjoin-inputs", cl.h.coinjoin_min_inputs, "Coinjoin detector: minimum inputs")->capture_default_str();
    c->add_option("--coinjoin-equal", cl.h.coinjoin_min_equal, "Coinjoin detector: minimum equal outputs")->capture_default_str();
    c->add_option("--peel-length", cl.h.peel_min_length, "Shortest peeling chain")->capture_default_str();
    c->add_option("--peel-fraction", cl.h.peel_fraction, "Largest peel relative to the input")->capture_default_str();
    c->add_option("--temporal-window", cl.h.temporal_window, "Temporal window in seconds")->capture_default_str();
    c->add_option("--temporal-tolerance", cl.h.temporal_tolerance, "Relative amount tolerance")->capture_default_str();
    c->add_option("--temporal-min", cl.h.temporal_min_occurrences, "Distinct windows needed")->capture_default_str();

    TaintOpts ta;
    auto* t = app.add_subcommand("taint", "Propagate taint and score purity");
    add_common(t, ta.c, false);
    t->add_option("--chain", ta.chain, "chain.jsonl")->required()->check(CLI::ExistingFile);
    t->add_option("--policy", ta.policy, "poison or haircut")->capture_default_str();
    t->add_option("--source", ta.sources, "Tainted outpoint: txid:index, txid-prefix:index or coinbase:<height>:<index>")->required();
    t->add_option("--purity", ta.purity, "Outpoint to score for purity");
    t->add_flag("--fee-sink", ta.fee_sink, "Tainted fees leave circulation instead of entering the coinbase");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (m->parsed()) return cmd_mine(mine, out);
        if (s->parsed()) return cmd_simulate(sim, out);
        if (g->parsed()) return cmd_graph(graph, out);
        if (me->parsed()) return cmd_metrics(metrics, out);
        if (c->parsed()) return cmd_cluster(cl, out, err);
        if (t->parsed()) return cmd_taint(ta, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace bclab
