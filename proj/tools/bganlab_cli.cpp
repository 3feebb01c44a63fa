// bganlab command-line interface.
//
// Every command writes its outputs under --out together with
// config.echo.json, the effective configuration after merging the --config
// file, flags and BGANLAB_SEED. Exit codes: 0 success, 1 domain error,
// 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "bganlab/canonical_json.hpp"
#include "bganlab/cg_repr.hpp"
#include "bganlab/checkpoint.hpp"
#include "bganlab/dataset.hpp"
#include "bganlab/error.hpp"
#include "bganlab/file_io.hpp"
#include "bganlab/json_reader.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/network.hpp"
#include "bganlab/neuroml_io.hpp"
#include "bganlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace bganlab;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------ config file

struct ConfigFile {
  Json root = Json::object();
  fs::path dir;  // relative paths inside the file resolve against this

  bool has(const char* key) const { return root.contains(key); }
  const Json& at(const char* key) const { return root.at(key); }
};

ConfigFile load_config(const std::string& path) {
  ConfigFile c;
  if (path.empty()) return c;
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw UsageError(std::string("--config: ") + e.what());
  }
  try {
    c.root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw UsageError("--config " + path + ": " + e.what());
  }
  if (!c.root.is_object()) throw UsageError("--config " + path + ": expected a JSON object");
  static const std::vector<std::string> known{"seed", "network", "gen", "dataset", "sim", "fi", "train"};
  for (auto it = c.root.begin(); it != c.root.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw UsageError("--config " + path + ": $." + it.key() + ": unknown field");
  c.dir = fs::path(path).parent_path();
  return c;
}

// Runs a parser written against "$" and reports errors under `prefix`.
template <typename F>
auto in_section(const std::string& prefix, F&& parse) {
  try {
    return parse();
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    const std::string msg = what.substr(std::min(what.size(), e.path().size() + 2));
    throw UsageError("--config: " + prefix + e.path().substr(1) + ": " + msg);
  } catch (const Error& e) {
    throw UsageError("--config: " + prefix + ": " + e.what());
  }
}

std::vector<double> num_list(const Reader& r, const char* key) {
  const Json& a = r.array(key);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(Reader::as_num(a[i], Reader::item(r.sub(key), i)));
  return out;
}

std::vector<std::size_t> index_list(const Reader& r, const char* key) {
  const Json& a = r.array(key);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(Reader::as_index(a[i], Reader::item(r.sub(key), i)));
  return out;
}

// ------------------------------------------------------------ shared flags

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool uses_seed) {
  cmd->add_option("--config", c.config, "JSON configuration file; flags override its values")->check(CLI::ExistingFile);
  if (uses_seed)
    cmd->add_option("--seed", c.seed, "Random seed (falls back to the config file, then BGANLAB_SEED)");
  cmd->add_option("--out", c.out, "Output directory")->required();
}

std::uint64_t resolve_seed(const Common& c, const ConfigFile& cfg) {
  if (c.seed) return *c.seed;
  if (cfg.has("seed")) return in_section("$", [&] { return Reader(cfg.root, "$").index("seed"); });
  if (const char* env = std::getenv("BGANLAB_SEED")) {
    const std::string s = env;
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError("BGANLAB_SEED must be a non-negative integer, got '" + s + "'");
    try {
      return std::stoull(s);
    } catch (const std::out_of_range&) {
      throw UsageError("BGANLAB_SEED out of range: " + s);
    }
  }
  throw UsageError("no seed: pass --seed, set \"seed\" in --config or set BGANLAB_SEED");
}

std::string resolve_network_path(const std::string& flag, const ConfigFile& cfg) {
  if (!flag.empty()) return flag;
  if (cfg.has("network")) {
    const Json& v = cfg.at("network");
    if (!v.is_string()) throw UsageError("--config: $.network: expected string");
    fs::path p = v.get<std::string>();
    if (p.is_relative()) p = cfg.dir / p;
    return p.lexically_normal().string();
  }
  throw UsageError("no network: pass --network or set \"network\" in --config");
}

bool is_neuroml(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  return ext == ".nml" || ext == ".xml";
}

NetworkModel load_network(const std::string& path) {
  const std::string text = read_file(path);
  if (is_neuroml(path)) return parse_neuroml(text);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0, 0);
  }
  return network_from_json(j);
}

CompGraph load_graph(const fs::path& path) { return from_cgx(read_file(path)); }

std::string graph_label(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".cgx.json", ".json"}) {
    const std::string s = suffix;
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0)
      return name.substr(0, name.size() - s.size());
  }
  return name;
}

void write_text(const fs::path& out, const std::string& name, const std::string& bytes) { write_file(out / name, bytes); }

void write_json(const fs::path& out, const std::string& name, const Json& j) {
  write_text(out, name, dump_canonical(j) + "\n");
}

void write_json(const fs::path& out, const std::string& name, const OrderedJson& j) {
  write_text(out, name, dump_canonical(j) + "\n");
}

void echo_config(const fs::path& out, Json echo) { write_json(out, "config.echo.json", echo); }

// ------------------------------------------------------------ sim section

SimConfig sim_config(const ConfigFile& cfg) {
  SimConfig s;
  if (!cfg.has("sim")) return s;
  return in_section("$.sim", [&] {
    const Reader r(cfg.at("sim"), "$");
    r.only({"dt", "duration", "plasticity", "weight_snapshot_times"});
    s.dt = r.num_or("dt", s.dt);
    s.duration = r.num_or("duration", s.duration);
    if (r.has("plasticity")) s.plasticity = r.boolean("plasticity");
    if (r.has("weight_snapshot_times")) s.weight_snapshot_times = num_list(r, "weight_snapshot_times");
    return s;
  });
}

Json to_json(const SimConfig& s) {
  return Json{{"dt", s.dt},
              {"duration", s.duration},
              {"plasticity", s.plasticity},
              {"weight_snapshot_times", s.weight_snapshot_times},
              {"seed", s.seed}};
}

struct SimFlags {
  std::optional<double> dt, duration;
  bool plasticity = false;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  const SimConfig d;
  cmd->add_option("--dt", f.dt, "Integration step (ms) [default: " + format_double9(d.dt) + "]");
  cmd->add_option("--duration", f.duration, "Simulated time (ms) [default: " + format_double9(d.duration) + "]");
  cmd->add_flag("--plasticity", f.plasticity, "Apply the network's STDP rule online [default: off]");
}

void apply(const SimFlags& f, SimConfig& s) {
  if (f.dt) s.dt = *f.dt;
  if (f.duration) s.duration = *f.duration;
  if (f.plasticity) s.plasticity = true;
}

OrderedJson sim_output(const SimResult& r) {
  OrderedJson j = sim_result_to_json(r);
  OrderedJson w = OrderedJson::array();
  for (double x : r.final_weights) w.push_back(round9(x));
  j["final_weights"] = w;
  OrderedJson snaps = OrderedJson::array();
  for (const auto& s : r.weight_snapshots) {
    OrderedJson row = OrderedJson::array();
    for (double x : s) row.push_back(round9(x));
    snaps.push_back(row);
  }
  j["weight_snapshots"] = snaps;
  return j;
}

// ------------------------------------------------------------ commands

struct GenCmd {
  Common common;
  std::optional<std::size_t> n, trajectories, snapshots;
  std::optional<double> sim_duration, trajectory_duration;
  unsigned jobs = 1;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("gen", "Generate a dataset of random networks and their graphs");
    add_common(cmd, common, true);
    const DatasetOptions d;
    cmd->add_option("--n", n, "Number of networks [default: " + std::to_string(d.n) + "]");
    cmd->add_option("--sim-duration", sim_duration,
                    "Simulated time per network (ms) [default: " + format_double9(d.sim_duration_ms) + "]");
    cmd->add_option("--trajectories", trajectories,
                    "Entries that also get an STDP learning trajectory [default: " + std::to_string(d.n_trajectories) +
                        "]");
    cmd->add_option("--snapshots", snapshots,
                    "Snapshots per trajectory [default: " + std::to_string(d.n_snapshots) + "]");
    cmd->add_option("--trajectory-duration", trajectory_duration,
                    "Plastic run length per trajectory (ms) [default: " + format_double9(d.trajectory.duration_ms) +
                        "]");
    cmd->add_option("--jobs", jobs, "Worker threads; output does not depend on it")->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() {
    const ConfigFile cfg = load_config(common.config);
    const std::uint64_t seed = resolve_seed(common, cfg);
    GenSpec spec;
    if (cfg.has("gen")) spec = in_section("$.gen", [&] { return gen_spec_from_json(cfg.at("gen")); });
    spec.seed = seed;
    DatasetOptions opt;
    if (cfg.has("dataset")) {
      in_section("$.dataset", [&] {
        const Reader r(cfg.at("dataset"), "$");
        r.only({"n", "sim_duration_ms", "dt", "n_trajectories", "n_snapshots", "trajectory"});
        if (r.has("n")) opt.n = r.index("n");
        opt.sim_duration_ms = r.num_or("sim_duration_ms", opt.sim_duration_ms);
        opt.dt = r.num_or("dt", opt.dt);
        if (r.has("n_trajectories")) opt.n_trajectories = r.index("n_trajectories");
        if (r.has("n_snapshots")) opt.n_snapshots = r.index("n_snapshots");
        if (r.has("trajectory")) {
          const Reader t(r.at("trajectory"), r.sub("trajectory"));
          t.only({"duration_ms", "dt", "drive_rate_hz", "probe_duration_ms"});
          opt.trajectory.duration_ms = t.num_or("duration_ms", opt.trajectory.duration_ms);
          opt.trajectory.dt = t.num_or("dt", opt.trajectory.dt);
          if (t.has("drive_rate_hz")) opt.trajectory.drive_rate_hz = t.num("drive_rate_hz");
          opt.trajectory.probe_duration_ms = t.num_or("probe_duration_ms", opt.trajectory.probe_duration_ms);
        }
        return 0;
      });
    }
    if (n) opt.n = *n;
    if (sim_duration) opt.sim_duration_ms = *sim_duration;
    if (trajectories) opt.n_trajectories = *trajectories;
    if (snapshots) opt.n_snapshots = *snapshots;
    if (trajectory_duration) opt.trajectory.duration_ms = *trajectory_duration;
    opt.root_seed = seed;
    opt.jobs = jobs;

    const fs::path out = common.out;
    gen_dataset(spec, opt, out);
    Json traj{{"duration_ms", opt.trajectory.duration_ms},
              {"dt", opt.trajectory.dt},
              {"probe_duration_ms", opt.trajectory.probe_duration_ms}};
    if (opt.trajectory.drive_rate_hz) traj["drive_rate_hz"] = *opt.trajectory.drive_rate_hz;
    echo_config(out, Json{{"command", "gen"},
                          {"seed", seed},
                          {"gen", to_json(spec)},
                          {"dataset",
                           {{"n", opt.n},
                            {"sim_duration_ms", opt.sim_duration_ms},
                            {"dt", opt.dt},
                            {"n_trajectories", opt.n_trajectories},
                            {"n_snapshots", opt.n_snapshots},
                            {"trajectory", traj}}}});
    std::cout << "wrote " << opt.n << " entries to " << out.string() << "\n";
  }
};

struct SimCmd {
  Common common;
  std::string network;
  SimFlags flags;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("sim", "Simulate a network and write spikes, rates and synapse events");
    add_common(cmd, common, true);
    cmd->add_option("--network", network, "Network file (native .json or NeuroML .nml)");
    add_sim_flags(cmd, flags);
    cmd->callback([this] { run(); });
  }

  void run() {
    const ConfigFile cfg = load_config(common.config);
    const std::uint64_t seed = resolve_seed(common, cfg);
    const std::string path = resolve_network_path(network, cfg);
    SimConfig sc = sim_config(cfg);
    apply(flags, sc);
    sc.seed = seed;
    const SimResult r = simulate(load_network(path), sc);
    const fs::path out = common.out;
    write_json(out, "sim.json", sim_output(r));
    std::ostringstream csv;
    csv << "neuron,rate_hz\n";
    const auto rates = r.rates();
    for (std::size_t i = 0; i < rates.size(); ++i) csv << i << "," << format_double9(rates[i]) << "\n";
    write_text(out, "rates.csv", csv.str());
    echo_config(out, Json{{"command", "sim"}, {"seed", seed}, {"network", path}, {"sim", to_json(sc)}});
  }
};

struct FiCmd {
  Common common;
  std::string network;
  std::optional<double> duration, dt, input_weight;
  unsigned jobs = 1;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("fi", "Firing-rate response to Poisson drive at 0, 5, ..., 50 Hz");
    add_common(cmd, common, true);
    const FiOptions d;
    cmd->add_option("--network", network, "Network file (native .json or NeuroML .nml)");
    cmd->add_option("--duration", duration, "Simulated time per input rate (ms) [default: " +
                                                format_double9(d.duration) + "]");
    cmd->add_option("--dt", dt, "Integration step (ms) [default: " + format_double9(d.dt) + "]");
    cmd->add_option("--input-weight", input_weight,
                    "Weight of the protocol drive [default: " + format_double9(d.input_weight) + "]");
    cmd->add_option("--jobs", jobs, "Worker threads; output does not depend on it")->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() {
    const ConfigFile cfg = load_config(common.config);
    const std::uint64_t seed = resolve_seed(common, cfg);
    const std::string path = resolve_network_path(network, cfg);
    FiOptions opt;
    if (cfg.has("fi")) {
      in_section("$.fi", [&] {
        const Reader r(cfg.at("fi"), "$");
        r.only({"input_rates_hz", "duration", "dt", "input_neurons", "input_weight"});
        if (r.has("input_rates_hz")) opt.input_rates_hz = num_list(r, "input_rates_hz");
        opt.duration = r.num_or("duration", opt.duration);
        opt.dt = r.num_or("dt", opt.dt);
        if (r.has("input_neurons")) opt.input_neurons = index_list(r, "input_neurons");
        opt.input_weight = r.num_or("input_weight", opt.input_weight);
        return 0;
      });
    }
    if (duration) opt.duration = *duration;
    if (dt) opt.dt = *dt;
    if (input_weight) opt.input_weight = *input_weight;
    opt.seed = seed;
    opt.jobs = jobs;
    const RateMatrix m = fi_protocol(load_network(path), opt);
    const fs::path out = common.out;
    write_json(out, "rates.json", rate_matrix_to_json(m));
    write_text(out, "rates.csv", rate_matrix_to_csv(m));
    echo_config(out, Json{{"command", "fi"},
                          {"seed", seed},
                          {"network", path},
                          {"fi",
                           {{"input_rates_hz", opt.input_rates_hz},
                            {"duration", opt.duration},
                            {"dt", opt.dt},
                            {"input_neurons", opt.input_neurons},
                            {"input_weight", opt.input_weight}}}});
  }
};

struct BuildCgCmd {
  Common common;
  std::string network;
  SimFlags flags;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("build-cg", "Simulate a network and build its two-level computational graph");
    add_common(cmd, common, true);
    cmd->add_option("--network", network, "Network file (native .json or NeuroML .nml)");
    add_sim_flags(cmd, flags);
    cmd->callback([this] { run(); });
  }

  void run() {
    const ConfigFile cfg = load_config(common.config);
    const std::uint64_t seed = resolve_seed(common, cfg);
    const std::string path = resolve_network_path(network, cfg);
    SimConfig sc = sim_config(cfg);
    apply(flags, sc);
    sc.seed = seed;
    const NetworkModel net = load_network(path);
    const SimResult r = simulate(net, sc);
    CgSources sources;
    const CompGraph g = build_cg(net, r, &sources);
    const fs::path out = common.out;
    write_text(out, "graph.cgx.json", to_cgx(g));
    for (const auto& [name, text] : sources.files) write_text(out / "sources", name, text);
    echo_config(out, Json{{"command", "build-cg"}, {"seed", seed}, {"network", path}, {"sim", to_json(sc)}});
  }
};

struct NmlImportCmd {
  Common common;
  std::string input;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("nml-import", "Convert a NeuroML document to the native network JSON");
    add_common(cmd, common, false);
    cmd->add_option("--input", input, "NeuroML document")->required()->check(CLI::ExistingFile);
    cmd->callback([this] { run(); });
  }

  void run() {
    load_config(common.config);
    const NetworkModel net = parse_neuroml(read_file(input));
    const fs::path out = common.out;
    write_json(out, "network.json", network_to_json(net));
    echo_config(out, Json{{"command", "nml-import"}, {"input", input}});
    std::cout << net.neurons.size() << " neurons, " << net.synapses.size() << " synapses\n";
  }
};

struct ValidateCmd {
  Common common;
  std::string input;
  int* exit_code = nullptr;

  void add(CLI::App& app, int& code) {
    exit_code = &code;
    CLI::App* cmd = app.add_subcommand(
        "validate", "Check a dataset directory, graph (.cgx.json), network (.json, .nml) or checkpoint (.ckpt)");
    add_common(cmd, common, false);
    cmd->add_option("--input", input, "File or dataset directory to check")->required()->check(CLI::ExistingPath);
    cmd->callback([this] { run(); });
  }

  void run() {
    load_config(common.config);
    std::string kind;
    std::vector<std::string> problems;
    const fs::path p = input;
    const std::string name = p.filename().string();
    auto ends_with = [&](const std::string& s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    try {
      if (fs::is_directory(p)) {
        kind = "dataset";
        problems = verify_dataset(p);
      } else if (ends_with(".cgx.json")) {
        kind = "graph";
        problems = validate(load_graph(p));
      } else if (ends_with(".ckpt")) {
        kind = "checkpoint";
        load_checkpoint(p);
      } else {
        kind = "network";
        load_network(input);
      }
    } catch (const ValidationError& e) {
      problems = e.violations();
    } catch (const IoError&) {
      throw;
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
    const fs::path out = common.out;
    write_json(out, "validation.json",
               Json{{"input", input}, {"kind", kind}, {"ok", problems.empty()}, {"problems", problems}});
    echo_config(out, Json{{"command", "validate"}, {"input", input}});
    if (problems.empty()) {
      std::cout << input << ": ok (" << kind << ")\n";
    } else {
      std::cerr << input << ": " << problems.size() << " problem(s)\n";
      for (const auto& s : problems) std::cerr << "  - " << s << "\n";
      *exit_code = 1;
    }
  }
};

std::vector<std::pair<std::string, CompGraph>> load_dataset_graphs(const fs::path& dir) {
  const auto problems = verify_dataset(dir);
  if (!problems.empty()) throw ValidationError(problems);
  Json j;
  try {
    j = Json::parse(read_file(dir / "manifest.json"));
  } catch (const Json::parse_error& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what(), 0, 0);
  }
  const DatasetManifest m = manifest_from_json(j);
  std::vector<std::pair<std::string, CompGraph>> out;
  for (const auto& e : m.entries) out.emplace_back(graph_label(e.cgx), load_graph(dir / e.cgx));
  return out;
}

struct TrainCmd {
  Common common;
  std::vector<std::string> data, graphs;
  std::string objectives, mode;
  std::optional<std::size_t> epochs;
  std::optional<double> lr, mask_fraction, neg_ratio;
  bool momentum = false;
  unsigned jobs = 1;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("train", "Pre-train the bi-level attention model on graphs");
    add_common(cmd, common, true);
    const TrainConfig d;
    cmd->add_option("--data", data, "Dataset directories (entries are used in manifest order)")
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--graph", graphs, "Additional .cgx.json graphs")->check(CLI::ExistingFile);
    cmd->add_option("--objectives", objectives,
                    "Comma-separated subset of autoencode, masked, edge [default: masked]");
    cmd->add_option("--epochs", epochs, "Full-batch gradient steps [default: " + std::to_string(d.epochs) + "]");
    cmd->add_option("--lr", lr, "Learning rate [default: " + format_double9(d.learning_rate) + "]");
    cmd->add_option("--mask-fraction", mask_fraction,
                    "Fraction of input rows masked [default: " + format_double9(d.mask_fraction) + "]");
    cmd->add_option("--neg-ratio", neg_ratio,
                    "Negative edge samples per positive edge [default: " + format_double9(d.neg_ratio) + "]");
    cmd->add_option("--mode", mode, "Input representation: node-wise or feature-wise [default: node-wise]");
    cmd->add_flag("--momentum", momentum, "Heavy-ball momentum 0.9 [default: off]");
    cmd->add_option("--jobs", jobs, "Worker threads; output does not depend on it")->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() {
    const ConfigFile cfg = load_config(common.config);
    const std::uint64_t seed = resolve_seed(common, cfg);
    TrainConfig c;
    if (cfg.has("train")) c = in_section("$.train", [&] { return train_config_from_json(cfg.at("train")); });
    try {
      if (!objectives.empty()) {
        c.objectives.clear();
        std::stringstream ss(objectives);
        std::string item;
        while (std::getline(ss, item, ',')) c.objectives.insert(objective_from_string(item));
      }
      if (!mode.empty()) c.mode = input_mode_from_string(mode);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    if (mask_fraction) c.mask_fraction = *mask_fraction;
    if (neg_ratio) c.neg_ratio = *neg_ratio;
    if (momentum) c.momentum = true;
    c.seed = seed;
    c.jobs = jobs;

    if (data.empty() && graphs.empty()) throw UsageError("no training graphs: pass --data and/or --graph");
    std::vector<CompGraph> gs;
    for (const auto& d : data)
      for (auto& [label, g] : load_dataset_graphs(d)) gs.push_back(std::move(g));
    for (const auto& f : graphs) gs.push_back(load_graph(f));

    const TrainResult r = train(gs, c);
    const fs::path out = common.out;
    save_checkpoint(out / "model.ckpt", r.params, c);
    // Row e holds the objectives after e updates.
    std::ostringstream csv;
    csv << "epoch,autoencode,masked,edge,total\n";
    for (std::size_t e = 1; e < r.curve.size(); ++e) {
      const auto& l = r.curve[e];
      csv << e << "," << format_double9(l.autoencode) << "," << format_double9(l.masked) << ","
          << format_double9(l.edge) << "," << format_double9(l.total()) << "\n";
    }
    write_text(out, "loss.csv", csv.str());
    write_json(out, "train_summary.json",
               Json{{"graphs", gs.size()},
                    {"config_hash", config_hash(c)},
                    {"initial_loss", round9(r.curve.front().total())},
                    {"final_loss", round9(r.curve.back().total())}});
    echo_config(out, Json{{"command", "train"},
                          {"seed", seed},
                          {"data", data},
                          {"graphs", graphs},
                          {"train", to_json(c)}});
    std::cout << "loss " << format_double9(r.curve.front().total()) << " -> "
              << format_double9(r.curve.back().total()) << "\n";
  }
};

void write_snapshots(const fs::path& dir, const std::vector<AttnSnapshot>& snaps) {
  for (const auto& s : snaps) write_text(dir, s.label + ".json", export_snapshot(s));
}

struct AttnExportCmd {
  Common common;
  std::string checkpoint;
  std::vector<std::string> graphs;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("attn-export", "Write the attention weights of a trained model on graphs");
    add_common(cmd, common, false);
    cmd->add_option("--checkpoint", checkpoint, "Trained model (.ckpt)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--graph", graphs, ".cgx.json graphs; one trace file per graph, named after it")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->callback([this] { run(); });
  }

  void run() {
    load_config(common.config);
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::vector<AttnSnapshot> snaps;
    std::map<std::string, std::string> seen;
    for (const auto& f : graphs) {
      const std::string label = graph_label(f);
      if (!seen.emplace(label, f).second)
        throw UsageError("--graph: " + f + " and " + seen[label] + " would both write attn/" + label + ".json");
      snaps.push_back(attention_snapshot(ck.params, load_graph(f), ck.config, label));
    }
    const fs::path out = common.out;
    write_snapshots(out / "attn", snaps);
    echo_config(out, Json{{"command", "attn-export"}, {"checkpoint", checkpoint}, {"graphs", graphs}});
  }
};

struct CorrelateCmd {
  Common common;
  std::string checkpoint, trajectory;
  std::vector<std::string> graphs;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand(
        "correlate", "Correlate per-synapse attention with synaptic efficacy along a learning trajectory");
    add_common(cmd, common, false);
    cmd->add_option("--checkpoint", checkpoint, "Trained model (.ckpt)")->required()->check(CLI::ExistingFile);
    auto* t = cmd->add_option("--trajectory", trajectory, "Directory of stage_<k>.cgx.json snapshots")
                  ->check(CLI::ExistingDirectory);
    auto* g = cmd->add_option("--graph", graphs, "Snapshot graphs in trajectory order")->check(CLI::ExistingFile);
    t->excludes(g);
    cmd->callback([this] { run(); });
  }

  std::vector<std::string> stage_files() const {
    const std::regex re(R"(stage_(\d+)\.cgx\.json)");
    std::vector<std::pair<unsigned long, std::string>> found;
    for (const auto& e : fs::directory_iterator(trajectory)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (std::regex_match(name, m, re)) found.emplace_back(std::stoul(m[1].str()), e.path().string());
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> out;
    for (auto& [k, p] : found) out.push_back(p);
    return out;
  }

  void run() {
    load_config(common.config);
    if (trajectory.empty() && graphs.empty()) throw UsageError("pass --trajectory or --graph");
    const std::vector<std::string> files = trajectory.empty() ? graphs : stage_files();
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::vector<std::pair<std::string, CompGraph>> snaps;
    for (const auto& f : files) snaps.emplace_back(graph_label(f), load_graph(f));
    const Correlated c = record_and_correlate(snaps, ck.params, ck.config);
    const fs::path out = common.out;
    write_text(out, "correlation.json", report_json(c.report));
    write_text(out, "correlation.csv", report_csv(c.report));
    write_snapshots(out / "attn", c.trace);
    echo_config(out, Json{{"command", "correlate"}, {"checkpoint", checkpoint}, {"graphs", files}});
    std::cout << c.report.defined << " synapses with defined r, " << c.report.undefined << " undefined\n";
  }
};

Json error_json(const char* kind, const std::string& message, int code) {
  return Json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
}

}  // namespace

int main(int argc, char** argv) {
  bool json_errors = false;
  for (int i = 1; i < argc; ++i) json_errors = json_errors || std::string(argv[i]) == "--json-errors";

  int code = 0;
  CLI::App app{"bganlab: spiking network simulation, computational graphs and bi-level graph attention"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_flag("--json-errors", json_errors, "Also print errors as one JSON object on stdout");

  GenCmd gen;
  SimCmd sim;
  FiCmd fi;
  BuildCgCmd build_cg;
  NmlImportCmd nml_import;
  ValidateCmd validate_cmd;
  TrainCmd train_cmd;
  AttnExportCmd attn_export;
  CorrelateCmd correlate_cmd;
  gen.add(app);
  sim.add(app);
  fi.add(app);
  build_cg.add(app);
  nml_import.add(app);
  validate_cmd.add(app, code);
  train_cmd.add(app);
  attn_export.add(app);
  correlate_cmd.add(app);

  auto fail = [&](const char* kind, const std::string& message, int exit, Json extra = Json::object()) {
    std::cerr << "error: " << message << "\n";
    if (json_errors) {
      Json j = error_json(kind, message, exit);
      for (auto it = extra.begin(); it != extra.end(); ++it) j["error"][it.key()] = *it;
      std::cout << dump_canonical(j) << "\n";
    }
    return exit;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage_error", e.what(), 2);
  } catch (const UsageError& e) {
    return fail("usage_error", e.what(), 2);
  } catch (const ValidationError& e) {
    return fail(e.kind(), e.what(), 1, Json{{"violations", e.violations()}});
  } catch (const ParseError& e) {
    return fail(e.kind(), e.what(), 1, Json{{"line", e.line()}, {"column", e.column()}});
  } catch (const SchemaError& e) {
    return fail(e.kind(), e.what(), 1, Json{{"path", e.path()}});
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal_error", e.what(), 1);
  }
  return code;
}
