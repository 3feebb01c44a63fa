#include "bganlab/cg_repr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "bganlab/error.hpp"
#include "bganlab/json_reader.hpp"

namespace bganlab {

namespace {

constexpr int kCgxVersion = 1;

NodeType compartment_type(dyn::CompartmentKind k) {
  switch (k) {
    case dyn::CompartmentKind::dendrite: return NodeType::dendrite;
    case dyn::CompartmentKind::soma: return NodeType::soma;
    case dyn::CompartmentKind::axon: return NodeType::axon;
  }
  return NodeType::soma;
}

Activity activity_of(const std::vector<double>& times, double duration) {
  const SynapseEvents ev = summarize_events(times);
  Activity a;
  a.count = ev.count;
  a.rate_hz = mean_firing_rate(ev.count, duration);
  a.isi_mean = ev.iei_mean;
  a.isi_cv = ev.iei_mean > 0.0 ? std::sqrt(ev.iei_var) / ev.iei_mean : 0.0;
  a.first = ev.first_time;
  a.last = ev.last_time;
  return a;
}

EdgeStats stats_of(const std::vector<double>& times) {
  const SynapseEvents ev = summarize_events(times);
  return {ev.count, ev.iei_mean, ev.iei_var, ev.last_time};
}

// Analyzes each distinct source once.
class CodeCache {
 public:
  Functional get(const std::string& name, const std::string& source) {
    auto it = summaries_.find(source);
    if (it == summaries_.end()) it = summaries_.emplace(source, dynlang::analyze(source).summary).first;
    files_[name] = source;
    return {it->second, name};
  }
  CgSources take() {
    CgSources s;
    s.files.assign(files_.begin(), files_.end());
    return s;
  }

 private:
  std::map<std::string, dynlang::CodeSummary> summaries_;
  std::map<std::string, std::string> files_;
};

std::string compartment_source(const Neuron& n, const dyn::Compartment& c) {
  if (n.kind == NeuronKind::lif) return dynlang::emit_code(n.lif);
  return c.membrane == dyn::MembraneKind::hh ? dynlang::emit_code(c.params) : dynlang::emit_passive_code(c.params);
}

void link_io(CgLevel& level, const std::vector<NodeType>& types) {
  for (CgNode& n : level.nodes) {
    n.inputs.clear();
    n.outputs.clear();
  }
  for (const CgEdge& e : level.edges) {
    level.nodes[e.src].outputs.push_back({types[e.dst], e.dst});
    level.nodes[e.dst].inputs.push_back({types[e.src], e.src});
  }
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json io_json(const std::vector<IoRef>& refs) {
  Json out = Json::array();
  for (const IoRef& r : refs) out.push_back(Json::array({to_string(r.type), r.index}));
  return out;
}

Json node_json(const CgNode& n) {
  const auto& h = n.functional.summary.ast_kind_histogram;
  Json j{{"index", n.index},
         {"type", to_string(n.type)},
         {"inputs", io_json(n.inputs)},
         {"outputs", io_json(n.outputs)},
         {"geometry",
          {{"length", n.length_um},
           {"width", n.width_um},
           {"position", {n.position_um[0], n.position_um[1], n.position_um[2]}}}},
         {"activity",
          {{"count", n.activity.count},
           {"rate", n.activity.rate_hz},
           {"isi_mean", n.activity.isi_mean},
           {"isi_cv", n.activity.isi_cv},
           {"first", opt_json(n.activity.first)},
           {"last", opt_json(n.activity.last)}}},
         {"functional",
          {{"histogram", std::vector<std::size_t>(h.begin(), h.end())},
           {"dfg_edges", n.functional.summary.dfg_edge_count},
           {"cfg_blocks", n.functional.summary.cfg_block_count},
           {"cfg_edges", n.functional.summary.cfg_edge_count},
           {"source", n.functional.source}}}};
  if (n.efficacy) j["efficacy"] = *n.efficacy;
  if (n.compartments) j["compartments"] = *n.compartments;
  return j;
}

Json edge_json(const CgEdge& e) {
  Json j{{"src", e.src},
         {"dst", e.dst},
         {"count", e.stats.count},
         {"iei_mean", e.stats.iei_mean},
         {"iei_var", e.stats.iei_var},
         {"last", opt_json(e.stats.last)}};
  if (e.synapse) j["synapse"] = *e.synapse;
  return j;
}

Json level_json(const CgLevel& l) {
  Json nodes = Json::array(), edges = Json::array();
  for (const CgNode& n : l.nodes) nodes.push_back(node_json(n));
  for (const CgEdge& e : l.edges) edges.push_back(edge_json(e));
  return {{"nodes", nodes}, {"edges", edges}};
}

std::optional<double> opt_num(const Reader& r, const char* key) {
  const Json& v = r.at(key);
  if (v.is_null()) return std::nullopt;
  return Reader::as_num(v, r.sub(key));
}

NodeType type_at(const std::string& s, const std::string& path) {
  return parse_enum<NodeType>(s, path,
                              {{"neuron", NodeType::neuron},
                               {"dendrite", NodeType::dendrite},
                               {"soma", NodeType::soma},
                               {"axon", NodeType::axon},
                               {"synapse", NodeType::synapse}});
}

std::vector<IoRef> io_from(const Json& arr, const std::string& path) {
  if (!arr.is_array()) throw SchemaError(path, "expected array");
  std::vector<IoRef> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = Reader::item(path, i);
    const Json& pair = arr[i];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string()) throw SchemaError(p, "expected [type, index]");
    out.push_back({type_at(pair[0].get<std::string>(), p + "[0]"), Reader::as_index(pair[1], p + "[1]")});
  }
  return out;
}

std::vector<std::size_t> indices_from(const Json& arr, const std::string& path) {
  if (!arr.is_array()) throw SchemaError(path, "expected array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(Reader::as_index(arr[i], Reader::item(path, i)));
  return out;
}

CgNode node_from(const Json& j, const std::string& path) {
  Reader r(j, path);
  r.only({"index", "type", "inputs", "outputs", "geometry", "activity", "functional", "efficacy", "compartments"});
  CgNode n;
  n.index = r.index("index");
  n.type = type_at(r.str("type"), r.sub("type"));
  n.inputs = io_from(r.at("inputs"), r.sub("inputs"));
  n.outputs = io_from(r.at("outputs"), r.sub("outputs"));

  Reader g(r.at("geometry"), r.sub("geometry"));
  n.length_um = g.num("length");
  n.width_um = g.num("width");
  const Json& pos = g.array("position");
  if (pos.size() != 3) throw SchemaError(g.sub("position"), "expected 3 coordinates");
  for (std::size_t k = 0; k < 3; ++k) n.position_um[k] = Reader::as_num(pos[k], Reader::item(g.sub("position"), k));

  Reader a(r.at("activity"), r.sub("activity"));
  n.activity.count = a.index("count");
  n.activity.rate_hz = a.num("rate");
  n.activity.isi_mean = a.num("isi_mean");
  n.activity.isi_cv = a.num("isi_cv");
  n.activity.first = opt_num(a, "first");
  n.activity.last = opt_num(a, "last");

  Reader f(r.at("functional"), r.sub("functional"));
  const auto hist = indices_from(f.array("histogram"), f.sub("histogram"));
  if (hist.size() != 8) throw SchemaError(f.sub("histogram"), "expected 8 counts");
  std::copy(hist.begin(), hist.end(), n.functional.summary.ast_kind_histogram.begin());
  n.functional.summary.dfg_edge_count = f.index("dfg_edges");
  n.functional.summary.cfg_block_count = f.index("cfg_blocks");
  n.functional.summary.cfg_edge_count = f.index("cfg_edges");
  n.functional.source = f.str("source");

  if (r.has("efficacy")) n.efficacy = r.num("efficacy");
  if (r.has("compartments")) n.compartments = indices_from(r.at("compartments"), r.sub("compartments"));
  return n;
}

CgEdge edge_from(const Json& j, const std::string& path) {
  Reader r(j, path);
  r.only({"src", "dst", "count", "iei_mean", "iei_var", "last", "synapse"});
  CgEdge e;
  e.src = r.index("src");
  e.dst = r.index("dst");
  e.stats.count = r.index("count");
  e.stats.iei_mean = r.num("iei_mean");
  e.stats.iei_var = r.num("iei_var");
  e.stats.last = opt_num(r, "last");
  if (r.has("synapse")) e.synapse = r.index("synapse");
  return e;
}

CgLevel level_from(const Json& j, const std::string& path) {
  Reader r(j, path);
  r.only({"nodes", "edges"});
  CgLevel l;
  const Json& nodes = r.array("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) l.nodes.push_back(node_from(nodes[i], Reader::item(r.sub("nodes"), i)));
  const Json& edges = r.array("edges");
  for (std::size_t i = 0; i < edges.size(); ++i) l.edges.push_back(edge_from(edges[i], Reader::item(r.sub("edges"), i)));
  return l;
}

bool is_compartment(NodeType t) { return t == NodeType::dendrite || t == NodeType::soma || t == NodeType::axon; }

}  // namespace

const char* to_string(NodeType t) {
  switch (t) {
    case NodeType::neuron: return "neuron";
    case NodeType::dendrite: return "dendrite";
    case NodeType::soma: return "soma";
    case NodeType::axon: return "axon";
    case NodeType::synapse: return "synapse";
  }
  return "?";
}

NodeType node_type_from_string(const std::string& s) {
  for (NodeType t : {NodeType::neuron, NodeType::dendrite, NodeType::soma, NodeType::axon, NodeType::synapse})
    if (s == to_string(t)) return t;
  throw ParamError("unknown node type '" + s + "'");
}

CompGraph build_cg(const NetworkModel& net, const SimResult& sim, CgSources* sources) {
  if (sim.spikes.size() != net.neurons.size() || sim.synapse_events.size() != net.synapses.size())
    throw ParamError("build_cg: simulation result has " + std::to_string(sim.spikes.size()) + " neurons and " +
                     std::to_string(sim.synapse_events.size()) + " synapses, network has " +
                     std::to_string(net.neurons.size()) + " and " + std::to_string(net.synapses.size()));
  net.validate();

  CompGraph g;
  g.duration_ms = sim.duration;
  const std::size_t n_neurons = net.neurons.size();
  CodeCache code;

  // dendrite activity: merged event times of afferent synapses
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> dendrite_events;
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    const Synapse& sy = net.synapses[s];
    auto& dst = dendrite_events[{sy.post, sy.post_compartment}];
    dst.insert(dst.end(), sim.synapse_events[s].times.begin(), sim.synapse_events[s].times.end());
  }
  for (auto& [key, times] : dendrite_events) std::sort(times.begin(), times.end());

  g.membership.resize(n_neurons);
  std::vector<NodeType> low_types;
  for (std::size_t i = 0; i < n_neurons; ++i) {
    const Neuron& nr = net.neurons[i];
    const Activity spikes = activity_of(sim.spikes[i], sim.duration);
    for (std::size_t c = 0; c < nr.chain.size(); ++c) {
      const dyn::Compartment& comp = nr.chain.compartments[c];
      CgNode node;
      node.type = compartment_type(comp.kind);
      node.index = g.low.nodes.size();
      node.length_um = comp.length_um;
      node.width_um = comp.width_um;
      node.position_um = comp.position_um;
      if (comp.kind == dyn::CompartmentKind::dendrite) {
        const auto it = dendrite_events.find({i, c});
        node.activity = activity_of(it == dendrite_events.end() ? std::vector<double>{} : it->second, sim.duration);
      } else {
        node.activity = spikes;
      }
      node.functional = code.get("n" + std::to_string(i) + "_c" + std::to_string(c) + ".dyn", compartment_source(nr, comp));
      g.membership[i].push_back(node.index);
      low_types.push_back(node.type);
      g.low.nodes.push_back(std::move(node));
    }
    const auto& m = g.membership[i];
    for (std::size_t k = 0; k + 1 < m.size(); ++k) g.low.edges.push_back({m[k], m[k + 1], stats_of(sim.spikes[i]), {}});
  }
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    const Synapse& sy = net.synapses[s];
    g.low.edges.push_back({g.membership[sy.pre][sy.pre_compartment], g.membership[sy.post][sy.post_compartment],
                           stats_of(sim.synapse_events[s].times), s});
  }

  std::vector<NodeType> up_types;
  for (std::size_t i = 0; i < n_neurons; ++i) {
    const Neuron& nr = net.neurons[i];
    const std::size_t soma = nr.chain.soma_index();
    const dyn::Compartment& sc = nr.chain.compartments[soma];
    CgNode node;
    node.type = NodeType::neuron;
    node.index = i;
    for (const auto& c : nr.chain.compartments) node.length_um += c.length_um;
    node.width_um = sc.width_um;
    node.position_um = sc.position_um;
    node.activity = activity_of(sim.spikes[i], sim.duration);
    node.functional = g.low.nodes[g.membership[i][soma]].functional;
    node.compartments = g.membership[i];
    up_types.push_back(node.type);
    g.up.nodes.push_back(std::move(node));
  }
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    const Synapse& sy = net.synapses[s];
    CgNode node;
    node.type = NodeType::synapse;
    node.index = n_neurons + s;
    node.position_um = net.neurons[sy.post].chain.compartments[sy.post_compartment].position_um;
    node.activity = activity_of(sim.synapse_events[s].times, sim.duration);
    node.functional = code.get("s" + std::to_string(s) + ".dyn", dynlang::emit_code(sy.params));
    node.efficacy = sim.final_weights.size() == net.synapses.size() ? sim.final_weights[s] : sy.weight;
    up_types.push_back(node.type);
    g.up.nodes.push_back(std::move(node));
    g.up.edges.push_back({sy.pre, n_neurons + s, stats_of(sim.spikes[sy.pre]), {}});
    g.up.edges.push_back({n_neurons + s, sy.post, stats_of(sim.synapse_events[s].times), {}});
  }

  link_io(g.low, low_types);
  link_io(g.up, up_types);
  if (sources) *sources = code.take();
  return g;
}

std::vector<std::string> validate(const CompGraph& g) {
  std::vector<std::string> out;
  auto check_level = [&](const CgLevel& l, const char* name, bool low) {
    for (std::size_t i = 0; i < l.nodes.size(); ++i) {
      const CgNode& n = l.nodes[i];
      const std::string tag = std::string(name) + " node " + std::to_string(i);
      if (n.index != i) out.push_back(tag + ": index " + std::to_string(n.index) + " is not dense");
      if (low != is_compartment(n.type)) out.push_back(tag + ": type " + to_string(n.type) + " not allowed at this level");
      if (n.efficacy.has_value() != (n.type == NodeType::synapse))
        out.push_back(tag + ": efficacy must be present exactly on synapse nodes");
      if (n.compartments.has_value() != (n.type == NodeType::neuron))
        out.push_back(tag + ": compartment list must be present exactly on neuron nodes");
      if (n.functional.summary.cfg_block_count < 1) out.push_back(tag + ": functional summary has no CFG blocks");
    }
    std::vector<std::vector<IoRef>> ins(l.nodes.size()), outs(l.nodes.size());
    for (std::size_t e = 0; e < l.edges.size(); ++e) {
      const CgEdge& ed = l.edges[e];
      const std::string tag = std::string(name) + " edge " + std::to_string(e);
      if (ed.src >= l.nodes.size() || ed.dst >= l.nodes.size()) {
        out.push_back(tag + ": endpoint does not exist");
        continue;
      }
      if (!std::isfinite(ed.stats.iei_mean) || !std::isfinite(ed.stats.iei_var) || ed.stats.iei_var < 0.0)
        out.push_back(tag + ": invalid statistics");
      outs[ed.src].push_back({l.nodes[ed.dst].type, ed.dst});
      ins[ed.dst].push_back({l.nodes[ed.src].type, ed.src});
    }
    for (std::size_t i = 0; i < l.nodes.size(); ++i)
      if (l.nodes[i].inputs != ins[i] || l.nodes[i].outputs != outs[i])
        out.push_back(std::string(name) + " node " + std::to_string(i) + ": input/output properties disagree with edges");
  };
  check_level(g.low, "low", true);
  check_level(g.up, "up", false);

  // membership partitions the low level and follows chain order
  std::vector<int> owner(g.low.nodes.size(), -1);
  std::set<std::pair<std::size_t, std::size_t>> low_edges;
  for (const CgEdge& e : g.low.edges) low_edges.insert({e.src, e.dst});
  for (std::size_t i = 0; i < g.membership.size(); ++i) {
    const auto& m = g.membership[i];
    const std::string tag = "neuron " + std::to_string(i);
    bool in_range = !m.empty();
    for (std::size_t c : m) {
      if (c >= g.low.nodes.size()) {
        out.push_back(tag + ": member " + std::to_string(c) + " does not exist");
        in_range = false;
        continue;
      }
      if (owner[c] >= 0) out.push_back(tag + ": compartment " + std::to_string(c) + " already belongs to neuron " + std::to_string(owner[c]));
      owner[c] = static_cast<int>(i);
    }
    if (m.empty()) out.push_back(tag + ": has no compartments");
    if (!in_range) continue;
    std::size_t somas = 0;
    int stage = 0;  // 0 dendrites, 1 soma, 2 axons
    bool ordered = true;
    for (std::size_t c : m) {
      const NodeType t = g.low.nodes[c].type;
      const int s = t == NodeType::dendrite ? 0 : t == NodeType::soma ? 1 : 2;
      somas += t == NodeType::soma;
      if (s < stage || (s == 1 && stage == 1)) ordered = false;
      stage = std::max(stage, s);
    }
    if (somas != 1) out.push_back(tag + ": has " + std::to_string(somas) + " somas");
    else if (!ordered) out.push_back(tag + ": compartments not in dendrite, soma, axon order");
    for (std::size_t k = 0; k + 1 < m.size(); ++k)
      if (!low_edges.count({m[k], m[k + 1]}))
        out.push_back(tag + ": missing chain edge " + std::to_string(m[k]) + " -> " + std::to_string(m[k + 1]));
    if (i < g.up.nodes.size() && g.up.nodes[i].compartments && *g.up.nodes[i].compartments != m)
      out.push_back(tag + ": compartment list disagrees with membership");
  }
  for (std::size_t c = 0; c < owner.size(); ++c)
    if (owner[c] < 0) out.push_back("low node " + std::to_string(c) + ": belongs to no neuron");

  const std::size_t n = g.membership.size();
  for (std::size_t i = 0; i < g.up.nodes.size(); ++i) {
    const bool should_be_neuron = i < n;
    if ((g.up.nodes[i].type == NodeType::neuron) != should_be_neuron)
      out.push_back("up node " + std::to_string(i) + ": neurons must precede synapses and match membership");
  }

  // cross-neuron low edges realize synapses; up edges are pre -> synapse -> post
  for (std::size_t e = 0; e < g.low.edges.size(); ++e) {
    const CgEdge& ed = g.low.edges[e];
    if (ed.src >= owner.size() || ed.dst >= owner.size()) continue;
    const bool cross = owner[ed.src] != owner[ed.dst];
    if (cross != ed.synapse.has_value())
      out.push_back("low edge " + std::to_string(e) + ": synapse label must be present exactly on cross-neuron edges");
    if (cross) {
      const NodeType a = g.low.nodes[ed.src].type, b = g.low.nodes[ed.dst].type;
      if (a == NodeType::dendrite || b == NodeType::axon)
        out.push_back("low edge " + std::to_string(e) + ": cross-neuron edge must run axon -> dendrite");
    }
  }
  std::vector<std::size_t> syn_in(g.up.nodes.size(), 0), syn_out(g.up.nodes.size(), 0);
  for (std::size_t e = 0; e < g.up.edges.size(); ++e) {
    const CgEdge& ed = g.up.edges[e];
    if (ed.src >= g.up.nodes.size() || ed.dst >= g.up.nodes.size()) continue;
    const NodeType a = g.up.nodes[ed.src].type, b = g.up.nodes[ed.dst].type;
    if (a == b) out.push_back("up edge " + std::to_string(e) + ": must connect a neuron and a synapse");
    if (b == NodeType::synapse) ++syn_in[ed.dst];
    if (a == NodeType::synapse) ++syn_out[ed.src];
  }
  for (std::size_t i = 0; i < g.up.nodes.size(); ++i) {
    if (g.up.nodes[i].type != NodeType::synapse) continue;
    if (syn_in[i] != 1 || syn_out[i] != 1)
      out.push_back("up node " + std::to_string(i) + ": synapse needs one presynaptic and one postsynaptic edge (has " +
                    std::to_string(syn_in[i]) + " in, " + std::to_string(syn_out[i]) + " out)");
  }
  return out;
}

FeatureNorms norms_for(const CompGraph& g) {
  FeatureNorms n;
  if (g.duration_ms > 0.0) n.duration_ms = g.duration_ms;
  return n;
}

std::array<double, feature::kWidth> featurize(const CgNode& node, std::size_t level_size, const FeatureNorms& norms) {
  using namespace feature;
  std::array<double, kWidth> f{};
  f[kType + static_cast<std::size_t>(node.type)] = 1.0;
  f[kIndex] = level_size ? static_cast<double>(node.index) / static_cast<double>(level_size) : 0.0;
  f[kDegree] = std::log1p(static_cast<double>(node.inputs.size()));
  f[kDegree + 1] = std::log1p(static_cast<double>(node.outputs.size()));
  f[kGeometry] = node.length_um / norms.length_um;
  f[kGeometry + 1] = node.width_um / norms.width_um;
  for (std::size_t k = 0; k < 3; ++k) f[kGeometry + 2 + k] = node.position_um[k] / norms.position_um;
  const Activity& a = node.activity;
  f[kActivity] = a.rate_hz / norms.rate_hz;
  f[kActivity + 1] = a.isi_mean / norms.duration_ms;
  f[kActivity + 2] = a.isi_cv;
  f[kActivity + 3] = a.first ? *a.first / norms.duration_ms : 0.0;
  f[kActivity + 4] = a.last ? *a.last / norms.duration_ms : 0.0;
  const auto summary = node.functional.summary.as_vector();
  for (std::size_t k = 0; k < summary.size(); ++k) f[kFunctional + k] = std::log1p(summary[k]);
  f[kEfficacy] = node.efficacy.value_or(0.0);
  f[kCompartments] = node.compartments ? std::log1p(static_cast<double>(node.compartments->size())) : 0.0;
  return f;
}

std::string to_cgx(const CompGraph& g) {
  Json j{{"version", kCgxVersion},
         {"duration_ms", g.duration_ms},
         {"low", level_json(g.low)},
         {"up", level_json(g.up)},
         {"membership", g.membership}};
  return dump_canonical(j);
}

CompGraph from_cgx(const std::string& bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("CGX is not valid JSON: ") + e.what(), 0, 0);
  }
  Reader r(j, "$");
  r.only({"version", "duration_ms", "low", "up", "membership"});
  const Json& v = r.at("version");
  if (!v.is_number_integer() || v.get<long long>() != kCgxVersion)
    throw SchemaError("$.version", "unsupported CGX version " + v.dump() + " (expected 1)");
  CompGraph g;
  g.duration_ms = r.num("duration_ms");
  g.low = level_from(r.at("low"), "$.low");
  g.up = level_from(r.at("up"), "$.up");
  const Json& m = r.array("membership");
  for (std::size_t i = 0; i < m.size(); ++i) g.membership.push_back(indices_from(m[i], Reader::item("$.membership", i)));
  return g;
}

}  // namespace bganlab
