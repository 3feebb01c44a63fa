#include "bganlab/neuroml_io.hpp"

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "bganlab/canonical_json.hpp"
#include "bganlab/error.hpp"

namespace bganlab {

namespace {

// ------------------------------------------------------------ units

struct Unit {
  const char* name;
  double scale;
};

const std::vector<Unit>& units_for(Dimension d) {
  static const std::vector<Unit> time{{"ms", 1.0}, {"s", 1e3}, {"us", 1e-3}};
  static const std::vector<Unit> voltage{{"mV", 1.0}, {"V", 1e3}};
  static const std::vector<Unit> conductance{{"uS", 1.0}, {"nS", 1e-3}, {"pS", 1e-6}, {"mS", 1e3}, {"S", 1e6}};
  static const std::vector<Unit> current{{"nA", 1.0}, {"pA", 1e-3}, {"uA", 1e3}, {"mA", 1e6}, {"A", 1e9}};
  static const std::vector<Unit> rate{{"per_s", 1.0}, {"Hz", 1.0}, {"per_ms", 1e3}};
  switch (d) {
    case Dimension::time: return time;
    case Dimension::voltage: return voltage;
    case Dimension::conductance: return conductance;
    case Dimension::current: return current;
    case Dimension::rate: return rate;
  }
  return time;
}

const char* dimension_name(Dimension d) {
  switch (d) {
    case Dimension::time: return "time";
    case Dimension::voltage: return "voltage";
    case Dimension::conductance: return "conductance";
    case Dimension::current: return "current";
    case Dimension::rate: return "rate";
  }
  return "?";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// ------------------------------------------------------------ DOM

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<std::unique_ptr<XmlNode>> children;
  int line = 0, col = 0;

  const std::string* attr(const std::string& key) const {
    for (const auto& [k, v] : attrs)
      if (k == key) return &v;
    return nullptr;
  }
};

struct DomBuilder {
  XML_Parser parser = nullptr;
  std::unique_ptr<XmlNode> root;
  std::vector<XmlNode*> stack;

  static void on_start(void* data, const XML_Char* name, const XML_Char** atts) {
    auto* self = static_cast<DomBuilder*>(data);
    auto node = std::make_unique<XmlNode>();
    node->name = name;
    for (int i = 0; atts[i]; i += 2) node->attrs.emplace_back(atts[i], atts[i + 1]);
    node->line = static_cast<int>(XML_GetCurrentLineNumber(self->parser));
    node->col = static_cast<int>(XML_GetCurrentColumnNumber(self->parser)) + 1;
    XmlNode* raw = node.get();
    if (self->stack.empty())
      self->root = std::move(node);
    else
      self->stack.back()->children.push_back(std::move(node));
    self->stack.push_back(raw);
  }
  static void on_end(void* data, const XML_Char*) { static_cast<DomBuilder*>(data)->stack.pop_back(); }
};

std::unique_ptr<XmlNode> parse_xml(std::string_view text) {
  DomBuilder b;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, void (*)(XML_Parser)> parser(XML_ParserCreate("UTF-8"),
                                                                                   XML_ParserFree);
  if (!parser) throw Error("neuroml: could not create XML parser");
  b.parser = parser.get();
  XML_SetUserData(b.parser, &b);
  XML_SetElementHandler(b.parser, &DomBuilder::on_start, &DomBuilder::on_end);
  if (XML_Parse(b.parser, text.data(), static_cast<int>(text.size()), XML_TRUE) == XML_STATUS_ERROR)
    throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(b.parser)),
                     static_cast<int>(XML_GetCurrentLineNumber(b.parser)),
                     static_cast<int>(XML_GetCurrentColumnNumber(b.parser)) + 1);
  if (!b.root) throw ParseError("empty document", 1, 1);
  return std::move(b.root);
}

// ------------------------------------------------------------ import

const char* const kSupported =
    "neuroml, iafTauCell, expTwoSynapse, pulseGenerator, spikeGeneratorPoisson, network, population, projection, "
    "connection, connectionWD, explicitInput, notes";

std::string label(const XmlNode& n) {
  const std::string* id = n.attr("id");
  return "<" + n.name + (id ? " id=\"" + *id + "\"" : std::string()) + ">";
}

[[noreturn]] void fail(const XmlNode& n, const std::string& msg) { throw ParseError(label(n) + ": " + msg, n.line, n.col); }

[[noreturn]] void unsupported(const XmlNode& n) {
  throw ParseError("unsupported element <" + n.name + ">; supported: " + kSupported, n.line, n.col);
}

// Checks attribute names; namespace declarations and xsi:* are always allowed.
void allow_attrs(const XmlNode& n, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : n.attrs) {
    if (k == "xmlns" || k.rfind("xmlns:", 0) == 0 || k.rfind("xsi:", 0) == 0) continue;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ParseError(label(n) + ": unsupported attribute '" + k + "'", n.line, n.col);
  }
}

const std::string& required(const XmlNode& n, const char* key) {
  const std::string* v = n.attr(key);
  if (!v) throw ParseError(label(n) + ": missing attribute '" + key + "'", n.line, n.col);
  return *v;
}

double quantity(const XmlNode& n, const char* key, Dimension d) {
  try {
    return parse_quantity(required(n, key), d);
  } catch (const ParamError& e) {
    throw ParseError(label(n) + ": attribute '" + key + "': " + e.what(), n.line, n.col);
  }
}

double plain_number(const XmlNode& n, const char* key) {
  const std::string_view s = trim(required(n, key));
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(label(n) + ": attribute '" + key + "' is not a number", n.line, n.col);
  return v;
}

std::size_t count(const XmlNode& n, const char* key) {
  const std::string_view s = trim(required(n, key));
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(label(n) + ": attribute '" + key + "' is not a non-negative integer", n.line, n.col);
  return v;
}

struct Population {
  std::size_t first = 0, size = 0;
  std::string component;
};

struct CellRef {
  std::string population;
  std::size_t index = 0;
};

// Accepts "pop[3]", "../pop[3]" and "../pop/3/cell".
std::optional<CellRef> parse_cell_ref(std::string_view s) {
  s = trim(s);
  if (s.rfind("../", 0) == 0) s.remove_prefix(3);
  CellRef r;
  std::string_view idx;
  if (const auto open = s.find('['); open != std::string_view::npos) {
    if (s.back() != ']') return std::nullopt;
    r.population = std::string(s.substr(0, open));
    idx = s.substr(open + 1, s.size() - open - 2);
  } else {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    r.population = std::string(s.substr(0, slash));
    idx = s.substr(slash + 1);
    idx = idx.substr(0, idx.find('/'));
  }
  const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), r.index);
  if (r.population.empty() || idx.empty() || ec != std::errc() || ptr != idx.data() + idx.size()) return std::nullopt;
  return r;
}

class Importer {
 public:
  NetworkModel run(const XmlNode& root) {
    if (root.name != "neuroml") throw ParseError("document root must be <neuroml>, found <" + root.name + ">", root.line, root.col);
    allow_attrs(root, {"id"});
    const XmlNode* network = nullptr;
    for (const auto& c : root.children) {
      const XmlNode& n = *c;
      if (n.name == "notes") continue;
      if (n.name == "network") {
        if (network) fail(n, "only one <network> is supported");
        network = &n;
        claim_id(n);
      } else if (n.name == "iafTauCell") {
        allow_attrs(n, {"id", "leakReversal", "thresh", "reset", "tau"});
        dyn::LifParams p;
        p.c_m = 1.0;
        p.e_leak = quantity(n, "leakReversal", Dimension::voltage);
        p.v_thresh = quantity(n, "thresh", Dimension::voltage);
        p.v_reset = quantity(n, "reset", Dimension::voltage);
        const double tau = quantity(n, "tau", Dimension::time);
        if (!(tau > 0.0)) fail(n, "tau must be > 0");
        p.gbar_leak = p.c_m / tau;
        try {
          p.validate();
        } catch (const ParamError& e) {
          fail(n, e.what());
        }
        cells_[claim_id(n)] = p;
      } else if (n.name == "expTwoSynapse") {
        allow_attrs(n, {"id", "gbase", "erev", "tauRise", "tauDecay"});
        dyn::SynParams p;
        p.g_max = quantity(n, "gbase", Dimension::conductance);
        p.e_syn = quantity(n, "erev", Dimension::voltage);
        p.tau_rise = quantity(n, "tauRise", Dimension::time);
        p.tau_decay = quantity(n, "tauDecay", Dimension::time);
        try {
          p.validate();
        } catch (const ParamError& e) {
          fail(n, e.what());
        }
        synapses_[claim_id(n)] = p;
      } else if (n.name == "pulseGenerator") {
        allow_attrs(n, {"id", "delay", "duration", "amplitude"});
        PulseInput p;
        p.delay_ms = quantity(n, "delay", Dimension::time);
        p.duration_ms = quantity(n, "duration", Dimension::time);
        p.amplitude_na = quantity(n, "amplitude", Dimension::current);
        pulses_[claim_id(n)] = p;
      } else if (n.name == "spikeGeneratorPoisson") {
        allow_attrs(n, {"id", "averageRate"});
        PoissonInput p;
        p.rate_hz = quantity(n, "averageRate", Dimension::rate);
        if (!(p.rate_hz >= 0.0)) fail(n, "averageRate must be >= 0");
        poisson_[claim_id(n)] = p;
      } else {
        unsupported(n);
      }
    }
    if (network) import_network(*network);
    try {
      net_.validate();
    } catch (const ValidationError& e) {
      throw ParseError(std::string("imported network is invalid: ") + e.what(), root.line, root.col);
    }
    return std::move(net_);
  }

 private:
  std::string claim_id(const XmlNode& n) {
    const std::string& id = required(n, "id");
    if (!ids_.insert(id).second) fail(n, "duplicate id '" + id + "'");
    return id;
  }

  std::size_t resolve_cell(const XmlNode& n, const char* key, const std::string* expect_pop) {
    const std::string& text = required(n, key);
    const auto ref = parse_cell_ref(text);
    if (!ref) fail(n, "attribute '" + std::string(key) + "' has unrecognised cell reference '" + text + "'");
    const auto it = populations_.find(ref->population);
    if (it == populations_.end()) fail(n, "reference to unknown population '" + ref->population + "'");
    if (expect_pop && ref->population != *expect_pop)
      fail(n, "cell '" + text + "' is not in population '" + *expect_pop + "'");
    if (ref->index >= it->second.size)
      fail(n, "cell index " + std::to_string(ref->index) + " out of range for population '" + ref->population +
                  "' of size " + std::to_string(it->second.size));
    return it->second.first + ref->index;
  }

  void import_network(const XmlNode& net) {
    allow_attrs(net, {"id", "type", "temperature"});
    for (const auto& c : net.children) {
      const XmlNode& n = *c;
      if (n.name == "notes") continue;
      if (n.name == "population") {
        allow_attrs(n, {"id", "component", "size"});
        const std::string id = claim_id(n);
        Population pop;
        pop.component = required(n, "component");
        const auto cell = cells_.find(pop.component);
        if (cell == cells_.end()) fail(n, "reference to unknown cell component '" + pop.component + "'");
        pop.size = count(n, "size");
        pop.first = net_.neurons.size();
        for (std::size_t i = 0; i < pop.size; ++i) net_.neurons.push_back(make_point_lif(id + "_" + std::to_string(i), cell->second));
        populations_[id] = pop;
      } else if (n.name == "projection") {
        allow_attrs(n, {"id", "presynapticPopulation", "postsynapticPopulation", "synapse"});
        const std::string id = claim_id(n);
        const std::string& pre = required(n, "presynapticPopulation");
        const std::string& post = required(n, "postsynapticPopulation");
        for (const std::string* p : {&pre, &post})
          if (!populations_.count(*p)) fail(n, "reference to unknown population '" + *p + "'");
        const std::string& syn_id = required(n, "synapse");
        const auto syn = synapses_.find(syn_id);
        if (syn == synapses_.end()) fail(n, "reference to unknown synapse component '" + syn_id + "'");
        std::set<std::string> conn_ids;
        for (const auto& cc : n.children) {
          const XmlNode& k = *cc;
          if (k.name == "notes") continue;
          const bool wd = k.name == "connectionWD";
          if (k.name != "connection" && !wd) unsupported(k);
          if (wd)
            allow_attrs(k, {"id", "preCellId", "postCellId", "weight", "delay"});
          else
            allow_attrs(k, {"id", "preCellId", "postCellId"});
          if (!conn_ids.insert(required(k, "id")).second) fail(k, "duplicate connection id in projection '" + id + "'");
          Synapse s;
          s.name = id + "_" + required(k, "id");
          s.pre = resolve_cell(k, "preCellId", &pre);
          s.post = resolve_cell(k, "postCellId", &post);
          s.params = syn->second;
          if (wd) {
            s.weight = plain_number(k, "weight");
            s.delay_ms = quantity(k, "delay", Dimension::time);
          }
          net_.synapses.push_back(std::move(s));
        }
      } else if (n.name == "explicitInput") {
        allow_attrs(n, {"target", "input", "destination"});
        const std::size_t neuron = resolve_cell(n, "target", nullptr);
        const std::string& input = required(n, "input");
        if (const auto p = pulses_.find(input); p != pulses_.end()) {
          PulseInput in = p->second;
          in.neuron = neuron;
          net_.pulse_inputs.push_back(in);
        } else if (const auto q = poisson_.find(input); q != poisson_.end()) {
          PoissonInput in = q->second;
          in.neuron = neuron;
          net_.poisson_inputs.push_back(in);
        } else {
          fail(n, "reference to unknown input '" + input + "'");
        }
      } else {
        unsupported(n);
      }
    }
  }

  NetworkModel net_;
  std::set<std::string> ids_;
  std::map<std::string, dyn::LifParams> cells_;
  std::map<std::string, dyn::SynParams> synapses_;
  std::map<std::string, PulseInput> pulses_;
  std::map<std::string, PoissonInput> poisson_;
  std::map<std::string, Population> populations_;
};

// ------------------------------------------------------------ export

std::string q(double v, const char* unit) { return format_double9(v) + unit; }

// Population id for a run of neurons named <prefix>_0 .. <prefix>_<n-1>, if
// the names follow that pattern.
std::optional<std::string> common_prefix(const NetworkModel& net, std::size_t first, std::size_t size) {
  const std::string& name = net.neurons[first].name;
  const auto cut = name.rfind('_');
  if (cut == std::string::npos || cut == 0) return std::nullopt;
  const std::string prefix = name.substr(0, cut);
  for (std::size_t i = 0; i < size; ++i)
    if (net.neurons[first + i].name != prefix + "_" + std::to_string(i)) return std::nullopt;
  return prefix;
}

bool valid_id(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

}  // namespace

double parse_quantity(std::string_view text, Dimension d) {
  const std::string_view s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr == s.data())
    throw ParamError("'" + std::string(text) + "' does not start with a number");
  const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr)));
  std::string known;
  for (const Unit& u : units_for(d)) {
    if (unit == u.name) return v * u.scale;
    known += (known.empty() ? "" : ", ") + std::string(u.name);
  }
  throw ParamError("'" + std::string(text) + "': unit '" + std::string(unit) + "' is not a " + dimension_name(d) +
                   " unit (expected one of " + known + ")");
}

NetworkModel parse_neuroml(std::string_view document) {
  const auto root = parse_xml(document);
  return Importer().run(*root);
}

std::string export_neuroml(const NetworkModel& net) {
  net.validate();
  const std::size_t n = net.neurons.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Neuron& nr = net.neurons[i];
    const std::string who = "neuron " + std::to_string(i) + " ('" + nr.name + "')";
    if (nr.kind != NeuronKind::lif)
      throw ParamError(who + ": " + to_string(nr.kind) + " cells cannot be expressed in the NeuroML subset (LIF only)");
    if (nr.lif.c_m != 1.0) throw ParamError(who + ": iafTauCell requires unit membrane capacitance");
    if (nr.lif.t_ref != 0.0) throw ParamError(who + ": iafTauCell has no refractory period");
    if (nr.chain != make_point_lif(nr.name, nr.lif).chain)
      throw ParamError(who + ": non-default soma geometry cannot be expressed");
  }
  if (!net.gap_junctions.empty()) throw ParamError("gap junctions cannot be expressed in the NeuroML subset");
  if (net.input_synapse != NetworkModel{}.input_synapse)
    throw ParamError("a non-default Poisson input synapse cannot be expressed in the NeuroML subset");
  for (std::size_t k = 0; k < net.poisson_inputs.size(); ++k)
    if (net.poisson_inputs[k].weight != 1.0)
      throw ParamError("poisson input " + std::to_string(k) + ": weighted Poisson drive cannot be expressed");
  if (net.plasticity != dyn::StdpParams{}) throw ParamError("plasticity rules cannot be expressed in the NeuroML subset");

  // components
  std::vector<dyn::LifParams> cells;
  std::vector<std::size_t> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::find(cells.begin(), cells.end(), net.neurons[i].lif);
    if (it == cells.end()) it = cells.insert(cells.end(), net.neurons[i].lif);
    cell_of[i] = static_cast<std::size_t>(it - cells.begin());
  }
  std::vector<dyn::SynParams> syns;
  std::vector<std::size_t> syn_of(net.synapses.size());
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    auto it = std::find(syns.begin(), syns.end(), net.synapses[s].params);
    if (it == syns.end()) it = syns.insert(syns.end(), net.synapses[s].params);
    syn_of[s] = static_cast<std::size_t>(it - syns.begin());
  }

  // populations: maximal runs of neurons sharing a cell component
  struct Pop {
    std::string id;
    std::size_t first, size, cell;
  };
  std::vector<Pop> pops;
  std::vector<std::size_t> pop_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (pops.empty() || cell_of[i] != pops.back().cell) pops.push_back({"", i, 0, cell_of[i]});
    ++pops.back().size;
    pop_of[i] = pops.size() - 1;
  }
  // generated component ids share the document id space
  auto reserved = [](const std::string& id) {
    for (const char* r : {"cell", "syn", "pulse", "poisson", "proj", "net"})
      if (id.rfind(r, 0) == 0) return true;
    return false;
  };
  std::set<std::string> used;
  for (std::size_t p = 0; p < pops.size(); ++p) {
    const auto prefix = common_prefix(net, pops[p].first, pops[p].size);
    std::string id = prefix && valid_id(*prefix) && !reserved(*prefix) ? *prefix : "pop" + std::to_string(p);
    while (used.count(id)) id += "_";
    pops[p].id = id;
    used.insert(id);
  }
  auto cell_ref = [&](std::size_t neuron) {
    const Pop& p = pops[pop_of[neuron]];
    return "../" + p.id + "/" + std::to_string(neuron - p.first) + "/cell" + std::to_string(p.cell);
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<neuroml xmlns=\"http://www.neuroml.org/schema/neuroml2\" id=\"network\">\n";
  for (std::size_t c = 0; c < cells.size(); ++c)
    out << "  <iafTauCell id=\"cell" << c << "\" leakReversal=\"" << q(cells[c].e_leak, "mV") << "\" thresh=\""
        << q(cells[c].v_thresh, "mV") << "\" reset=\"" << q(cells[c].v_reset, "mV") << "\" tau=\""
        << q(cells[c].tau_m(), "ms") << "\"/>\n";
  for (std::size_t s = 0; s < syns.size(); ++s)
    out << "  <expTwoSynapse id=\"syn" << s << "\" gbase=\"" << q(syns[s].g_max, "uS") << "\" erev=\""
        << q(syns[s].e_syn, "mV") << "\" tauRise=\"" << q(syns[s].tau_rise, "ms") << "\" tauDecay=\""
        << q(syns[s].tau_decay, "ms") << "\"/>\n";
  for (std::size_t k = 0; k < net.pulse_inputs.size(); ++k) {
    const PulseInput& p = net.pulse_inputs[k];
    out << "  <pulseGenerator id=\"pulse" << k << "\" delay=\"" << q(p.delay_ms, "ms") << "\" duration=\""
        << q(p.duration_ms, "ms") << "\" amplitude=\"" << q(p.amplitude_na, "nA") << "\"/>\n";
  }
  for (std::size_t k = 0; k < net.poisson_inputs.size(); ++k)
    out << "  <spikeGeneratorPoisson id=\"poisson" << k << "\" averageRate=\"" << q(net.poisson_inputs[k].rate_hz, "per_s")
        << "\"/>\n";

  out << "  <network id=\"net\">\n";
  for (const Pop& p : pops)
    out << "    <population id=\"" << p.id << "\" component=\"cell" << p.cell << "\" size=\"" << p.size << "\"/>\n";
  // projections: maximal runs of synapses sharing populations and component,
  // which keeps the synapse order
  std::size_t proj = 0;
  for (std::size_t s = 0; s < net.synapses.size();) {
    const Synapse& first = net.synapses[s];
    std::size_t e = s;
    while (e < net.synapses.size() && pop_of[net.synapses[e].pre] == pop_of[first.pre] &&
           pop_of[net.synapses[e].post] == pop_of[first.post] && syn_of[e] == syn_of[s])
      ++e;
    out << "    <projection id=\"proj" << proj++ << "\" presynapticPopulation=\"" << pops[pop_of[first.pre]].id
        << "\" postsynapticPopulation=\"" << pops[pop_of[first.post]].id << "\" synapse=\"syn" << syn_of[s] << "\">\n";
    for (std::size_t k = s; k < e; ++k) {
      const Synapse& sy = net.synapses[k];
      out << "      <connectionWD id=\"" << k - s << "\" preCellId=\"" << cell_ref(sy.pre) << "\" postCellId=\""
          << cell_ref(sy.post) << "\" weight=\"" << format_double9(sy.weight) << "\" delay=\"" << q(sy.delay_ms, "ms")
          << "\"/>\n";
    }
    out << "    </projection>\n";
    s = e;
  }
  auto target = [&](std::size_t neuron) {
    const Pop& p = pops[pop_of[neuron]];
    return p.id + "[" + std::to_string(neuron - p.first) + "]";
  };
  for (std::size_t k = 0; k < net.pulse_inputs.size(); ++k)
    out << "    <explicitInput target=\"" << target(net.pulse_inputs[k].neuron) << "\" input=\"pulse" << k << "\"/>\n";
  for (std::size_t k = 0; k < net.poisson_inputs.size(); ++k)
    out << "    <explicitInput target=\"" << target(net.poisson_inputs[k].neuron) << "\" input=\"poisson" << k
        << "\"/>\n";
  out << "  </network>\n</neuroml>\n";
  return out.str();
}

}  // namespace bganlab
