#include "bganlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bganlab/dynlang.hpp"
#include "bganlab/error.hpp"
#include "bganlab/file_io.hpp"
#include "bganlab/json_reader.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/parallel.hpp"
#include "bganlab/rng.hpp"
#include "bganlab/sha256.hpp"

namespace bganlab {

namespace fs = std::filesystem;

namespace {

struct NamedRange {
  const char* name;
  Range GenSpec::*field;
};

constexpr NamedRange kRanges[] = {
    {"connection_p", &GenSpec::connection_p},     {"tau_rise", &GenSpec::tau_rise},
    {"tau_decay", &GenSpec::tau_decay},           {"g_max", &GenSpec::g_max},
    {"weight", &GenSpec::weight},                 {"delay", &GenSpec::delay},
    {"soma_length", &GenSpec::soma_length},       {"soma_width", &GenSpec::soma_width},
    {"dendrite_length", &GenSpec::dendrite_length}, {"dendrite_width", &GenSpec::dendrite_width},
    {"axon_length", &GenSpec::axon_length},       {"axon_width", &GenSpec::axon_width},
    {"drive_weight", &GenSpec::drive_weight},     {"lif_gbar_leak", &GenSpec::lif_gbar_leak},
};

// Ranges whose lower bound must be strictly positive.
constexpr const char* kPositive[] = {"tau_rise",       "tau_decay",       "g_max",          "soma_length",
                                     "soma_width",     "dendrite_length", "dendrite_width", "axon_length",
                                     "axon_width",     "lif_gbar_leak"};

bool needs_positive(const char* name) {
  return std::any_of(std::begin(kPositive), std::end(kPositive), [&](const char* p) { return std::string(p) == name; });
}

std::string fmt(double v) { return format_double9(v); }

Json stdp_json(const dyn::StdpParams& sp) {
  return Json{{"a_plus", sp.a_plus},     {"a_minus", sp.a_minus}, {"tau_plus", sp.tau_plus},
              {"tau_minus", sp.tau_minus}, {"w_min", sp.w_min},     {"w_max", sp.w_max},
              {"pairing", sp.pairing == dyn::StdpPairing::nearest ? "nearest" : "all_pairs"}};
}

dyn::StdpParams stdp_from_json(const Json& j, const std::string& path) {
  const Reader r(j, path);
  r.only({"a_plus", "a_minus", "tau_plus", "tau_minus", "w_min", "w_max", "pairing"});
  dyn::StdpParams sp;
  sp.a_plus = r.num_or("a_plus", sp.a_plus);
  sp.a_minus = r.num_or("a_minus", sp.a_minus);
  sp.tau_plus = r.num_or("tau_plus", sp.tau_plus);
  sp.tau_minus = r.num_or("tau_minus", sp.tau_minus);
  sp.w_min = r.num_or("w_min", sp.w_min);
  sp.w_max = r.num_or("w_max", sp.w_max);
  if (r.has("pairing"))
    sp.pairing = parse_enum<dyn::StdpPairing>(r.str("pairing"), r.sub("pairing"),
                                              {{"nearest", dyn::StdpPairing::nearest},
                                               {"all_pairs", dyn::StdpPairing::all_pairs}});
  return sp;
}

Range range_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [lo, hi]");
  return {Reader::as_num(j[0], Reader::item(path, 0)), Reader::as_num(j[1], Reader::item(path, 1))};
}

std::string id4(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

dyn::Compartment make_compartment(dyn::CompartmentKind kind, Rng& rng, const GenSpec& s) {
  dyn::Compartment c;
  c.kind = kind;
  c.membrane = kind == dyn::CompartmentKind::dendrite ? dyn::MembraneKind::passive : dyn::MembraneKind::hh;
  const Range& len = kind == dyn::CompartmentKind::soma       ? s.soma_length
                     : kind == dyn::CompartmentKind::dendrite ? s.dendrite_length
                                                              : s.axon_length;
  const Range& wid = kind == dyn::CompartmentKind::soma       ? s.soma_width
                     : kind == dyn::CompartmentKind::dendrite ? s.dendrite_width
                                                              : s.axon_width;
  c.length_um = rng.uniform(len.lo, len.hi);
  c.width_um = rng.uniform(wid.lo, wid.hi);
  return c;
}

}  // namespace

std::vector<std::string> GenSpec::violations() const {
  std::vector<std::string> out;
  if (neurons.lo < 1) out.push_back("neurons: lower bound must be >= 1");
  if (neurons.lo > neurons.hi) out.push_back("neurons: lower bound exceeds upper bound");
  if (compartments.lo < 1) out.push_back("compartments: lower bound must be >= 1");
  if (compartments.lo > compartments.hi) out.push_back("compartments: lower bound exceeds upper bound");
  for (const auto& [name, field] : kRanges) {
    const Range& r = this->*field;
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) {
      out.push_back(std::string(name) + ": bounds must be finite");
      continue;
    }
    if (r.lo > r.hi) out.push_back(std::string(name) + ": lower bound " + fmt(r.lo) + " exceeds upper bound " + fmt(r.hi));
    if (needs_positive(name) && !(r.lo > 0.0)) out.push_back(std::string(name) + ": lower bound must be > 0");
  }
  if (connection_p.lo < 0.0 || connection_p.hi > 1.0) out.push_back("connection_p: must lie in [0, 1]");
  if (!(inhibitory_fraction >= 0.0 && inhibitory_fraction <= 1.0))
    out.push_back("inhibitory_fraction: must lie in [0, 1]");
  if (!(mix_hh >= 0.0 && mix_lif >= 0.0 && mix_multi >= 0.0)) out.push_back("kind mix: weights must be >= 0");
  if (!(mix_hh + mix_lif + mix_multi > 0.0)) out.push_back("kind mix: weights must not all be 0");
  if (tau_rise.hi >= tau_decay.lo) out.push_back("tau_rise: upper bound must be below the tau_decay lower bound");
  if (!(lif_t_ref >= 0.0) || !std::isfinite(lif_t_ref)) out.push_back("lif_t_ref: must be >= 0");
  if (delay.lo < 0.0) out.push_back("delay: must be >= 0");
  if (drive_weight.lo < 0.0) out.push_back("drive_weight: must be >= 0");
  if (!(drive_rate_hz >= 0.0) || !std::isfinite(drive_rate_hz)) out.push_back("drive_rate_hz: must be >= 0");
  if (!(extent_um >= 0.0) || !std::isfinite(extent_um)) out.push_back("extent_um: must be >= 0");
  try {
    plasticity.validate();
    if (weight.lo < plasticity.w_min || weight.hi > plasticity.w_max)
      out.push_back("weight: range must lie within [w_min, w_max] of the plasticity rule");
  } catch (const ParamError& e) {
    out.push_back(std::string("plasticity: ") + e.what());
  }
  return out;
}

void GenSpec::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

Json to_json(const GenSpec& s) {
  Json j{{"neurons", {s.neurons.lo, s.neurons.hi}},
         {"compartments", {s.compartments.lo, s.compartments.hi}},
         {"kind_mix", {{"hh", s.mix_hh}, {"lif", s.mix_lif}, {"multi", s.mix_multi}}},
         {"e_exc", s.e_exc},
         {"e_inh", s.e_inh},
         {"inhibitory_fraction", s.inhibitory_fraction},
         {"lif_t_ref", s.lif_t_ref},
         {"extent_um", s.extent_um},
         {"drive_rate_hz", s.drive_rate_hz},
         {"plasticity", stdp_json(s.plasticity)},
         {"seed", s.seed}};
  for (const auto& [name, field] : kRanges) j[name] = {(s.*field).lo, (s.*field).hi};
  return j;
}

GenSpec gen_spec_from_json(const Json& j) {
  const Reader r(j, "$");
  GenSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const std::string path = r.sub(key.c_str());
    bool is_range = false;
    for (const auto& [name, field] : kRanges)
      if (key == name) {
        s.*field = range_from_json(*it, path);
        is_range = true;
      }
    if (is_range) continue;
    if (key == "neurons" || key == "compartments") {
      if (!it->is_array() || it->size() != 2) throw SchemaError(path, "expected [lo, hi]");
      CountRange& dst = key == "neurons" ? s.neurons : s.compartments;
      dst = {Reader::as_index((*it)[0], Reader::item(path, 0)), Reader::as_index((*it)[1], Reader::item(path, 1))};
    } else if (key == "kind_mix") {
      const Reader m(*it, path);
      m.only({"hh", "lif", "multi"});
      s.mix_hh = m.num_or("hh", s.mix_hh);
      s.mix_lif = m.num_or("lif", s.mix_lif);
      s.mix_multi = m.num_or("multi", s.mix_multi);
    } else if (key == "e_exc") {
      s.e_exc = r.num("e_exc");
    } else if (key == "e_inh") {
      s.e_inh = r.num("e_inh");
    } else if (key == "inhibitory_fraction") {
      s.inhibitory_fraction = r.num("inhibitory_fraction");
    } else if (key == "lif_t_ref") {
      s.lif_t_ref = r.num("lif_t_ref");
    } else if (key == "extent_um") {
      s.extent_um = r.num("extent_um");
    } else if (key == "drive_rate_hz") {
      s.drive_rate_hz = r.num("drive_rate_hz");
    } else if (key == "plasticity") {
      s.plasticity = stdp_from_json(*it, path);
    } else if (key == "seed") {
      s.seed = r.index("seed");
    } else {
      throw SchemaError(path, "unknown field");
    }
  }
  return s;
}

GeneratedNetwork gen_network(const GenSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  GeneratedNetwork out;
  NetworkModel& net = out.net;
  net.plasticity = spec.plasticity;

  // counts
  const auto n = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(spec.neurons.lo), static_cast<std::int64_t>(spec.neurons.hi)));
  const double p = rng.uniform(spec.connection_p.lo, spec.connection_p.hi);
  std::vector<std::size_t> chain_len(n);
  for (auto& c : chain_len)
    c = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.compartments.lo),
                                                 static_cast<std::int64_t>(spec.compartments.hi)));

  // kinds
  const double total = spec.mix_hh + spec.mix_lif + spec.mix_multi;
  std::vector<NeuronKind> kinds(n);
  std::vector<std::size_t> dendrites(n, 0);
  std::vector<double> leak(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    kinds[i] = u < spec.mix_hh ? NeuronKind::hh : u < spec.mix_hh + spec.mix_lif ? NeuronKind::lif : NeuronKind::multi;
    if (kinds[i] == NeuronKind::multi)
      dendrites[i] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(chain_len[i]) - 1));
    else if (kinds[i] == NeuronKind::lif)
      leak[i] = rng.uniform(spec.lif_gbar_leak.lo, spec.lif_gbar_leak.hi);
  }

  // geometry
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "n" + std::to_string(i);
    dyn::LifParams lif;
    lif.gbar_leak = leak[i];
    lif.t_ref = spec.lif_t_ref;
    Neuron nr = kinds[i] == NeuronKind::lif ? make_point_lif(name, lif) : make_point_hh(name);
    nr.kind = kinds[i];
    const std::array<double, 3> pos{rng.uniform(0.0, spec.extent_um), rng.uniform(0.0, spec.extent_um),
                                    rng.uniform(0.0, spec.extent_um)};
    const std::size_t len = kinds[i] == NeuronKind::multi ? chain_len[i] : 1;
    std::vector<dyn::Compartment> comps;
    for (std::size_t c = 0; c < len; ++c) {
      const auto kind = c < dendrites[i]    ? dyn::CompartmentKind::dendrite
                        : c == dendrites[i] ? dyn::CompartmentKind::soma
                                            : dyn::CompartmentKind::axon;
      dyn::Compartment comp = make_compartment(kind, rng, spec);
      if (kinds[i] == NeuronKind::lif) comp.params = nr.chain.compartments[0].params;
      comps.push_back(comp);
    }
    // lay the chain out along x with the soma centre at the sampled position
    double x = 0.0, soma_x = 0.0;
    for (std::size_t c = 0; c < len; ++c) {
      if (c == dendrites[i]) soma_x = x + comps[c].length_um / 2;
      comps[c].position_um = {x + comps[c].length_um / 2, 0.0, 0.0};
      x += comps[c].length_um;
    }
    for (auto& c : comps) c.position_um = {pos[0] + c.position_um[0] - soma_x, pos[1], pos[2]};
    nr.chain.compartments = std::move(comps);
    net.neurons.push_back(std::move(nr));
  }

  // connectivity
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng.bernoulli(p)) pairs.emplace_back(i, j);

  // synapse parameters
  for (const auto& [i, j] : pairs) {
    Synapse s;
    s.name = "s" + std::to_string(net.synapses.size());
    s.pre = i;
    s.post = j;
    s.pre_compartment = net.neurons[i].output_compartment();
    s.post_compartment = net.neurons[j].input_compartment();
    const bool inhibitory = rng.bernoulli(spec.inhibitory_fraction);
    s.params.e_syn = inhibitory ? spec.e_inh : spec.e_exc;
    s.params.tau_rise = rng.uniform(spec.tau_rise.lo, spec.tau_rise.hi);
    s.params.tau_decay = rng.uniform(spec.tau_decay.lo, spec.tau_decay.hi);
    s.params.g_max = rng.uniform(spec.g_max.lo, spec.g_max.hi);
    s.weight = rng.uniform(spec.weight.lo, spec.weight.hi);
    s.delay_ms = rng.uniform(spec.delay.lo, spec.delay.hi);
    net.synapses.push_back(std::move(s));
  }

  // drive
  for (std::size_t i = 0; i < n; ++i)
    net.poisson_inputs.push_back({i, spec.drive_rate_hz, rng.uniform(spec.drive_weight.lo, spec.drive_weight.hi)});

  for (std::size_t i = 0; i < n; ++i) {
    const Neuron& nr = net.neurons[i];
    for (std::size_t c = 0; c < nr.chain.size(); ++c) {
      const auto& comp = nr.chain.compartments[c];
      const std::string text = nr.kind == NeuronKind::lif                 ? dynlang::emit_code(nr.lif)
                               : comp.membrane == dyn::MembraneKind::hh ? dynlang::emit_code(comp.params)
                                                                        : dynlang::emit_passive_code(comp.params);
      out.sources.push_back({"n" + std::to_string(i) + "_c" + std::to_string(c) + ".dyn", text});
    }
  }
  for (std::size_t s = 0; s < net.synapses.size(); ++s)
    out.sources.push_back({"s" + std::to_string(s) + ".dyn", dynlang::emit_code(net.synapses[s].params)});
  std::sort(out.sources.begin(), out.sources.end(), [](const auto& a, const auto& b) { return a.name < b.name; });

  net.validate();
  return out;
}

LearningTrajectory gen_trajectory(const NetworkModel& net, const dyn::StdpParams& stdp,
                                  const TrajectoryProtocol& protocol, std::size_t n_snapshots) {
  if (n_snapshots < 3) throw ParamError("gen_trajectory: n_snapshots must be >= 3");
  LearningTrajectory out;
  out.base = net;
  out.base.plasticity = stdp;
  if (protocol.drive_rate_hz) {
    out.base.poisson_inputs.clear();
    for (std::size_t i = 0; i < out.base.neurons.size(); ++i)
      out.base.poisson_inputs.push_back({i, *protocol.drive_rate_hz, 1.0});
  }
  out.base.validate();

  SimConfig run;
  run.dt = protocol.dt;
  run.duration = protocol.duration_ms;
  run.seed = hash64(protocol.seed, 0);
  run.plasticity = true;
  for (std::size_t k = 0; k < n_snapshots; ++k)
    run.weight_snapshot_times.push_back(protocol.duration_ms * static_cast<double>(k) /
                                        static_cast<double>(n_snapshots - 1));
  const SimResult plastic = simulate(out.base, run);

  SimConfig probe;
  probe.dt = protocol.dt;
  probe.duration = protocol.probe_duration_ms;
  probe.seed = hash64(protocol.seed, 1);
  for (std::size_t k = 0; k < n_snapshots; ++k) {
    TrajectoryStage st;
    st.label = "stage_" + std::to_string(k);
    st.time_ms = run.weight_snapshot_times[k];
    st.weights = plastic.weight_snapshots.at(k);
    NetworkModel at = out.base;
    for (std::size_t s = 0; s < at.synapses.size(); ++s) at.synapses[s].weight = st.weights[s];
    st.graph = build_cg(at, simulate(at, probe));
    out.stages.push_back(std::move(st));
  }
  return out;
}

// ------------------------------------------------------------ datasets

std::string manifest_bytes(const DatasetManifest& m, const DatasetOptions& opt) {
  Json entries = Json::array();
  for (const auto& e : m.entries)
    entries.push_back(Json{{"id", e.id},
                           {"seed", e.seed},
                           {"cgx", e.cgx},
                           {"sha256", e.sha256},
                           {"low_nodes", e.low_nodes},
                           {"low_edges", e.low_edges},
                           {"up_nodes", e.up_nodes},
                           {"up_edges", e.up_edges},
                           {"trajectory", e.trajectory}});
  Json files = Json::array();
  for (const auto& f : m.files) files.push_back(Json{{"path", f.path}, {"sha256", f.sha256}});
  const Json j{{"format", "bganlab-dataset"},
               {"version", m.version},
               {"root_seed", m.root_seed},
               {"spec", to_json(m.spec)},
               {"simulation", {{"duration_ms", opt.sim_duration_ms}, {"dt", opt.dt}}},
               {"entries", entries},
               {"files", files}};
  return dump_canonical(j) + "\n";
}

DatasetManifest manifest_from_json(const Json& j) {
  const Reader r(j, "$");
  r.only({"format", "version", "root_seed", "spec", "simulation", "entries", "files"});
  if (r.str("format") != "bganlab-dataset") throw SchemaError("$.format", "unexpected format");
  DatasetManifest m;
  m.version = static_cast<int>(r.index("version"));
  if (m.version != kDatasetFormatVersion) throw SchemaError("$.version", "unsupported dataset version");
  m.root_seed = r.index("root_seed");
  m.spec = gen_spec_from_json(r.at("spec"));
  const Json& entries = r.array("entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Reader e(entries[i], Reader::item("$.entries", i));
    ManifestEntry me;
    me.id = e.index("id");
    me.seed = e.index("seed");
    me.cgx = e.str("cgx");
    me.sha256 = e.str("sha256");
    me.low_nodes = e.index("low_nodes");
    me.low_edges = e.index("low_edges");
    me.up_nodes = e.index("up_nodes");
    me.up_edges = e.index("up_edges");
    const Json& t = e.array("trajectory");
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!t[k].is_string()) throw SchemaError(Reader::item(e.sub("trajectory"), k), "expected string");
      me.trajectory.push_back(t[k].get<std::string>());
    }
    m.entries.push_back(std::move(me));
  }
  const Json& files = r.array("files");
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Reader f(files[i], Reader::item("$.files", i));
    m.files.push_back({f.str("path"), f.str("sha256")});
  }
  return m;
}

namespace {

struct EntryOutput {
  ManifestEntry entry;
  std::vector<std::pair<std::string, std::string>> files;  // (relative path, bytes)
};

EntryOutput make_entry(const GenSpec& spec, const DatasetOptions& opt, std::size_t i) {
  EntryOutput out;
  const std::uint64_t seed = hash64(opt.root_seed, i);
  const GeneratedNetwork gn = gen_network(spec, seed);
  SimConfig sc;
  sc.dt = opt.dt;
  sc.duration = opt.sim_duration_ms;
  sc.seed = hash64(seed, 1);
  const CompGraph g = build_cg(gn.net, simulate(gn.net, sc));

  const std::string id = id4(i);
  ManifestEntry& e = out.entry;
  e.id = i;
  e.seed = seed;
  e.cgx = "entries/" + id + ".cgx.json";
  const std::string cgx = to_cgx(g);
  e.sha256 = sha256_hex(cgx);
  e.low_nodes = g.low.nodes.size();
  e.low_edges = g.low.edges.size();
  e.up_nodes = g.up.nodes.size();
  e.up_edges = g.up.edges.size();
  out.files.emplace_back(e.cgx, cgx);
  for (const auto& s : gn.sources) out.files.emplace_back("sources/" + id + "/" + s.name, s.text);

  if (i < opt.n_trajectories) {
    TrajectoryProtocol proto = opt.trajectory;
    proto.dt = opt.dt;
    proto.seed = hash64(seed, 2);
    const LearningTrajectory tr = gen_trajectory(gn.net, spec.plasticity, proto, opt.n_snapshots);
    for (const auto& st : tr.stages) {
      const std::string path = "trajectories/" + id + "/" + st.label + ".cgx.json";
      e.trajectory.push_back(path);
      out.files.emplace_back(path, to_cgx(st.graph));
    }
  }
  return out;
}

}  // namespace

DatasetManifest gen_dataset(const GenSpec& spec, const DatasetOptions& opt, const fs::path& out) {
  spec.validate();
  if (opt.n < 1) throw ParamError("gen_dataset: n must be >= 1");
  if (opt.n_trajectories > 0 && opt.n_snapshots < 3) throw ParamError("gen_dataset: n_snapshots must be >= 3");

  std::vector<EntryOutput> entries(opt.n);
  parallel_for(opt.n, opt.jobs, [&](std::size_t i) { entries[i] = make_entry(spec, opt, i); });

  DatasetManifest m;
  m.root_seed = opt.root_seed;
  m.spec = spec;
  const bool existed = fs::exists(out);
  std::vector<fs::path> written;
  try {
    for (auto& e : entries) {
      for (const auto& [rel, bytes] : e.files) {
        write_file(out / rel, bytes);
        written.push_back(out / rel);
        m.files.push_back({rel, sha256_hex(bytes)});
      }
      m.entries.push_back(std::move(e.entry));
    }
    std::sort(m.files.begin(), m.files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    write_file(out / "manifest.json", manifest_bytes(m, opt));
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    for (const char* sub : {"entries", "sources", "trajectories"}) {
      // only directories left empty by the cleanup
      const fs::path d = out / sub;
      if (fs::is_directory(d, ec)) {
        for (auto it = fs::directory_iterator(d, ec); it != fs::directory_iterator(); ++it)
          if (it->is_directory(ec) && fs::is_empty(it->path(), ec)) fs::remove(it->path(), ec);
        if (fs::is_empty(d, ec)) fs::remove(d, ec);
      }
    }
    if (!existed && fs::is_empty(out, ec)) fs::remove(out, ec);
    throw;
  }
  return m;
}

std::vector<std::string> verify_dataset(const fs::path& dir) {
  std::vector<std::string> problems;
  DatasetManifest m;
  try {
    m = manifest_from_json(Json::parse(read_file(dir / "manifest.json")));
  } catch (const Json::parse_error& e) {
    return {std::string("manifest.json: ") + e.what()};
  } catch (const Error& e) {
    return {std::string("manifest.json: ") + e.what()};
  }
  auto check = [&](const std::string& rel, const std::string& want) {
    std::string bytes;
    try {
      bytes = read_file(dir / rel);
    } catch (const IoError&) {
      problems.push_back(rel + ": missing");
      return;
    }
    if (sha256_hex(bytes) != want) problems.push_back(rel + ": sha256 mismatch");
  };
  std::vector<std::size_t> ids;
  for (const auto& e : m.entries) {
    check(e.cgx, e.sha256);
    ids.push_back(e.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) problems.push_back("manifest.json: duplicate entry ids");
  for (const auto& f : m.files) check(f.path, f.sha256);
  return problems;
}

}  // namespace bganlab
