#include "bganlab/network.hpp"

#include <algorithm>

#include "bganlab/error.hpp"
#include "bganlab/json_reader.hpp"

namespace bganlab {

using dyn::CompartmentKind;

const char* to_string(NeuronKind k) {
  switch (k) {
    case NeuronKind::hh: return "hh";
    case NeuronKind::lif: return "lif";
    case NeuronKind::multi: return "multi";
  }
  return "?";
}

const char* to_string(CompartmentKind k) {
  switch (k) {
    case CompartmentKind::dendrite: return "dendrite";
    case CompartmentKind::soma: return "soma";
    case CompartmentKind::axon: return "axon";
  }
  return "?";
}

namespace {

bool has_kind(const dyn::CompartmentChain& c, CompartmentKind k) {
  return std::any_of(c.compartments.begin(), c.compartments.end(),
                     [k](const dyn::Compartment& x) { return x.kind == k; });
}

std::string neuron_label(const NetworkModel& net, std::size_t i) {
  std::string s = "neuron " + std::to_string(i);
  if (i < net.neurons.size() && !net.neurons[i].name.empty()) s += " ('" + net.neurons[i].name + "')";
  return s;
}

}  // namespace

std::size_t Neuron::input_compartment() const {
  for (std::size_t i = 0; i < chain.size(); ++i)
    if (chain.compartments[i].kind == CompartmentKind::dendrite) return i;
  return chain.soma_index();
}

std::size_t Neuron::output_compartment() const {
  for (std::size_t i = chain.size(); i-- > 0;)
    if (chain.compartments[i].kind == CompartmentKind::axon) return i;
  return chain.soma_index();
}

Neuron make_point_hh(std::string name, const dyn::HhParams& p) {
  Neuron n;
  n.name = std::move(name);
  n.kind = NeuronKind::hh;
  dyn::Compartment soma;
  soma.params = p;
  n.chain.compartments.push_back(soma);
  return n;
}

Neuron make_point_lif(std::string name, const dyn::LifParams& p) {
  Neuron n;
  n.name = std::move(name);
  n.kind = NeuronKind::lif;
  n.lif = p;
  dyn::Compartment soma;
  soma.membrane = dyn::MembraneKind::passive;
  soma.params.c_m = p.c_m;
  soma.params.gbar_leak = p.gbar_leak;
  soma.params.e_leak = p.e_leak;
  n.chain.compartments.push_back(soma);
  return n;
}

std::vector<std::string> NetworkModel::violations() const {
  std::vector<std::string> out;
  const std::size_t n = neurons.size();

  for (std::size_t i = 0; i < n; ++i) {
    const Neuron& nr = neurons[i];
    for (const auto& v : nr.chain.violations()) out.push_back(neuron_label(*this, i) + ": " + v);
    if (nr.kind != NeuronKind::multi && nr.chain.size() != 1)
      out.push_back(neuron_label(*this, i) + ": point neuron must have exactly one (soma) compartment");
    if (nr.kind == NeuronKind::lif) {
      try {
        nr.lif.validate();
      } catch (const ParamError& e) {
        out.push_back(neuron_label(*this, i) + ": " + e.what());
      }
    }
  }

  auto endpoint_ok = [&](std::size_t neuron, std::size_t comp, CompartmentKind want) {
    const auto& chain = neurons[neuron].chain;
    if (comp >= chain.size()) return false;
    const auto k = chain.compartments[comp].kind;
    return k == want || (k == CompartmentKind::soma && !has_kind(chain, want));
  };

  for (std::size_t s = 0; s < synapses.size(); ++s) {
    const Synapse& sy = synapses[s];
    const std::string tag = "synapse " + std::to_string(s) + (sy.name.empty() ? "" : " ('" + sy.name + "')");
    if (!(sy.weight >= plasticity.w_min && sy.weight <= plasticity.w_max))
      out.push_back(tag + ": weight " + std::to_string(sy.weight) + " outside [w_min, w_max]");
    if (!(sy.delay_ms >= 0.0)) out.push_back(tag + ": negative delay");
    if (sy.pre >= n || sy.post >= n) {
      out.push_back(tag + ": references missing neuron (pre " + std::to_string(sy.pre) + ", post " +
                    std::to_string(sy.post) + ")");
      continue;
    }
    if (!endpoint_ok(sy.pre, sy.pre_compartment, CompartmentKind::axon))
      out.push_back(tag + ": pre endpoint compartment " + std::to_string(sy.pre_compartment) + " of " +
                    neuron_label(*this, sy.pre) + " is not an axon or point body");
    if (!endpoint_ok(sy.post, sy.post_compartment, CompartmentKind::dendrite))
      out.push_back(tag + ": post endpoint compartment " + std::to_string(sy.post_compartment) + " of " +
                    neuron_label(*this, sy.post) + " is not a dendrite or point body");
    try {
      sy.params.validate();
    } catch (const ParamError& e) {
      out.push_back(tag + ": " + e.what());
    }
  }

  for (std::size_t g = 0; g < gap_junctions.size(); ++g) {
    const GapJunction& gj = gap_junctions[g];
    const std::string tag = "gap junction " + std::to_string(g);
    if (gj.neuron_a >= n || gj.neuron_b >= n || gj.compartment_a >= neurons[gj.neuron_a].chain.size() ||
        gj.compartment_b >= neurons[gj.neuron_b].chain.size()) {
      out.push_back(tag + ": references missing neuron/compartment");
      continue;
    }
    if (gj.params.g_j < 0.0 || !(gj.params.g_uninj > 0.0))
      out.push_back(tag + ": require g_j >= 0 and g_uninj > 0");
  }

  for (std::size_t k = 0; k < poisson_inputs.size(); ++k) {
    const PoissonInput& in = poisson_inputs[k];
    if (in.neuron >= n) out.push_back("poisson input " + std::to_string(k) + ": references missing neuron " +
                                      std::to_string(in.neuron));
    if (!(in.rate_hz >= 0.0)) out.push_back("poisson input " + std::to_string(k) + ": negative rate");
    if (!(in.weight >= 0.0)) out.push_back("poisson input " + std::to_string(k) + ": negative weight");
  }
  for (std::size_t k = 0; k < pulse_inputs.size(); ++k) {
    const PulseInput& in = pulse_inputs[k];
    if (in.neuron >= n) out.push_back("pulse input " + std::to_string(k) + ": references missing neuron " +
                                      std::to_string(in.neuron));
    if (!(in.duration_ms >= 0.0)) out.push_back("pulse input " + std::to_string(k) + ": negative duration");
  }

  try {
    input_synapse.validate();
  } catch (const ParamError& e) {
    out.push_back(std::string("input synapse: ") + e.what());
  }
  try {
    plasticity.validate();
  } catch (const ParamError& e) {
    out.push_back(std::string("plasticity: ") + e.what());
  }
  return out;
}

void NetworkModel::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

std::vector<std::size_t> NetworkModel::neurons_without_afferents() const {
  std::vector<bool> has(neurons.size(), false);
  for (const auto& s : synapses)
    if (s.post < has.size()) has[s.post] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < has.size(); ++i)
    if (!has[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// native JSON

namespace {

Json hh_to_json(const dyn::HhParams& p) {
  return Json{{"c_m", p.c_m},         {"gbar_na", p.gbar_na}, {"gbar_k", p.gbar_k}, {"gbar_leak", p.gbar_leak},
              {"e_na", p.e_na},       {"e_k", p.e_k},         {"e_leak", p.e_leak}};
}

Json syn_to_json(const dyn::SynParams& p) {
  return Json{{"g_max", p.g_max}, {"tau_rise", p.tau_rise}, {"tau_decay", p.tau_decay}, {"e_syn", p.e_syn}};
}

dyn::HhParams hh_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  dyn::HhParams p;
  p.c_m = r.num("c_m");
  p.gbar_na = r.num("gbar_na");
  p.gbar_k = r.num("gbar_k");
  p.gbar_leak = r.num("gbar_leak");
  p.e_na = r.num("e_na");
  p.e_k = r.num("e_k");
  p.e_leak = r.num("e_leak");
  return p;
}

dyn::SynParams syn_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  return {r.num("g_max"), r.num("tau_rise"), r.num("tau_decay"), r.num("e_syn")};
}

}  // namespace

Json network_to_json(const NetworkModel& net) {
  Json neurons = Json::array();
  for (const Neuron& n : net.neurons) {
    Json comps = Json::array();
    for (const auto& c : n.chain.compartments) {
      comps.push_back(Json{{"kind", to_string(c.kind)},
                           {"membrane", c.membrane == dyn::MembraneKind::hh ? "hh" : "passive"},
                           {"params", hh_to_json(c.params)},
                           {"length", c.length_um},
                           {"width", c.width_um},
                           {"position", {c.position_um[0], c.position_um[1], c.position_um[2]}}});
    }
    Json jn{{"name", n.name}, {"kind", to_string(n.kind)}, {"r_a", n.chain.r_a}, {"compartments", comps}};
    if (n.kind == NeuronKind::lif)
      jn["lif"] = Json{{"c_m", n.lif.c_m},
                       {"gbar_leak", n.lif.gbar_leak},
                       {"e_leak", n.lif.e_leak},
                       {"v_thresh", n.lif.v_thresh},
                       {"v_reset", n.lif.v_reset},
                       {"t_ref", n.lif.t_ref}};
    neurons.push_back(jn);
  }
  Json synapses = Json::array();
  for (const Synapse& s : net.synapses) {
    synapses.push_back(Json{{"name", s.name},
                            {"pre", s.pre},
                            {"post", s.post},
                            {"pre_compartment", s.pre_compartment},
                            {"post_compartment", s.post_compartment},
                            {"params", syn_to_json(s.params)},
                            {"weight", s.weight},
                            {"delay", s.delay_ms}});
  }
  Json gaps = Json::array();
  for (const GapJunction& g : net.gap_junctions)
    gaps.push_back(Json{{"a", {g.neuron_a, g.compartment_a}},
                        {"b", {g.neuron_b, g.compartment_b}},
                        {"g_j", g.params.g_j},
                        {"g_uninj", g.params.g_uninj}});
  Json poisson = Json::array();
  for (const PoissonInput& p : net.poisson_inputs)
    poisson.push_back(Json{{"neuron", p.neuron}, {"rate_hz", p.rate_hz}, {"weight", p.weight}});
  Json pulses = Json::array();
  for (const PulseInput& p : net.pulse_inputs)
    pulses.push_back(Json{{"neuron", p.neuron},
                          {"delay", p.delay_ms},
                          {"duration", p.duration_ms},
                          {"amplitude_na", p.amplitude_na}});
  const auto& sp = net.plasticity;
  return Json{{"version", 1},
              {"neurons", neurons},
              {"synapses", synapses},
              {"gap_junctions", gaps},
              {"poisson_inputs", poisson},
              {"pulse_inputs", pulses},
              {"input_synapse", syn_to_json(net.input_synapse)},
              {"plasticity",
               {{"a_plus", sp.a_plus},
                {"a_minus", sp.a_minus},
                {"tau_plus", sp.tau_plus},
                {"tau_minus", sp.tau_minus},
                {"w_min", sp.w_min},
                {"w_max", sp.w_max},
                {"pairing", sp.pairing == dyn::StdpPairing::nearest ? "nearest" : "all_pairs"}}}};
}

NetworkModel network_from_json(const Json& j) {
  Reader root(j, "$");
  if (root.num("version") != 1) throw SchemaError("$.version", "unsupported network format version");
  NetworkModel net;

  const Json& neurons = root.array("neurons");
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const std::string path = "$.neurons[" + std::to_string(i) + "]";
    Reader r(neurons[i], path);
    Neuron n;
    n.name = r.str_or("name", "");
    n.kind = parse_enum<NeuronKind>(r.str("kind"), r.sub("kind"),
                                    {{"hh", NeuronKind::hh}, {"lif", NeuronKind::lif}, {"multi", NeuronKind::multi}});
    n.chain.r_a = r.num_or("r_a", n.chain.r_a);
    const Json& comps = r.array("compartments");
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const std::string cpath = path + ".compartments[" + std::to_string(c) + "]";
      Reader rc(comps[c], cpath);
      dyn::Compartment comp;
      comp.kind = parse_enum<CompartmentKind>(
          rc.str("kind"), rc.sub("kind"),
          {{"dendrite", CompartmentKind::dendrite}, {"soma", CompartmentKind::soma}, {"axon", CompartmentKind::axon}});
      comp.membrane = parse_enum<dyn::MembraneKind>(rc.str("membrane"), rc.sub("membrane"),
                                                    {{"hh", dyn::MembraneKind::hh}, {"passive", dyn::MembraneKind::passive}});
      comp.params = hh_from_json(rc.at("params"), rc.sub("params"));
      comp.length_um = rc.num("length");
      comp.width_um = rc.num("width");
      const Json& pos = rc.array("position");
      if (pos.size() != 3) throw SchemaError(rc.sub("position"), "expected 3 coordinates");
      for (std::size_t k = 0; k < 3; ++k) {
        if (!pos[k].is_number()) throw SchemaError(rc.sub("position"), "expected number");
        comp.position_um[k] = pos[k].get<double>();
      }
      n.chain.compartments.push_back(comp);
    }
    if (n.kind == NeuronKind::lif) {
      Reader rl(r.at("lif"), r.sub("lif"));
      n.lif = {rl.num("c_m"), rl.num("gbar_leak"), rl.num("e_leak"), rl.num("v_thresh"), rl.num("v_reset"),
               rl.num_or("t_ref", 0.0)};
    }
    net.neurons.push_back(std::move(n));
  }

  const Json& synapses = root.array("synapses");
  for (std::size_t i = 0; i < synapses.size(); ++i) {
    const std::string path = "$.synapses[" + std::to_string(i) + "]";
    Reader r(synapses[i], path);
    Synapse s;
    s.name = r.str_or("name", "");
    s.pre = r.index("pre");
    s.post = r.index("post");
    s.pre_compartment = r.index("pre_compartment");
    s.post_compartment = r.index("post_compartment");
    s.params = syn_from_json(r.at("params"), r.sub("params"));
    s.weight = r.num_or("weight", 1.0);
    s.delay_ms = r.num_or("delay", 1.0);
    net.synapses.push_back(std::move(s));
  }

  auto pair_of = [](const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned())
      throw SchemaError(path, "expected [neuron, compartment]");
    return std::pair{v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  };
  if (root.has("gap_junctions")) {
    const Json& gaps = root.array("gap_junctions");
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      const std::string path = "$.gap_junctions[" + std::to_string(i) + "]";
      Reader r(gaps[i], path);
      GapJunction g;
      std::tie(g.neuron_a, g.compartment_a) = pair_of(r.at("a"), r.sub("a"));
      std::tie(g.neuron_b, g.compartment_b) = pair_of(r.at("b"), r.sub("b"));
      g.params = {r.num("g_j"), r.num("g_uninj")};
      net.gap_junctions.push_back(g);
    }
  }
  if (root.has("poisson_inputs")) {
    const Json& arr = root.array("poisson_inputs");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader r(arr[i], "$.poisson_inputs[" + std::to_string(i) + "]");
      net.poisson_inputs.push_back({r.index("neuron"), r.num("rate_hz"), r.num_or("weight", 1.0)});
    }
  }
  if (root.has("pulse_inputs")) {
    const Json& arr = root.array("pulse_inputs");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader r(arr[i], "$.pulse_inputs[" + std::to_string(i) + "]");
      net.pulse_inputs.push_back({r.index("neuron"), r.num("delay"), r.num("duration"), r.num("amplitude_na")});
    }
  }
  if (root.has("input_synapse")) net.input_synapse = syn_from_json(root.at("input_synapse"), "$.input_synapse");
  if (root.has("plasticity")) {
    Reader r(root.at("plasticity"), "$.plasticity");
    auto& sp = net.plasticity;
    sp.a_plus = r.num("a_plus");
    sp.a_minus = r.num("a_minus");
    sp.tau_plus = r.num("tau_plus");
    sp.tau_minus = r.num("tau_minus");
    sp.w_min = r.num("w_min");
    sp.w_max = r.num("w_max");
    sp.pairing = parse_enum<dyn::StdpPairing>(r.str_or("pairing", "nearest"), r.sub("pairing"),
                                              {{"nearest", dyn::StdpPairing::nearest},
                                               {"all_pairs", dyn::StdpPairing::all_pairs}});
  }
  return net;
}

}  // namespace bganlab
