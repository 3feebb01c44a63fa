#pragma once

// Two-level computational graph of a simulated network. The low level holds
// one node per compartment, the up level one node per neuron followed by one
// node per synapse.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bganlab/canonical_json.hpp"
#include "bganlab/dynlang.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/network.hpp"

namespace bganlab {

enum class NodeType { neuron, dendrite, soma, axon, synapse };

const char* to_string(NodeType t);
/// Throws ParamError for an unknown name.
NodeType node_type_from_string(const std::string& s);

struct IoRef {
  NodeType type;
  std::size_t index;
  bool operator==(const IoRef&) const = default;
};

struct Activity {
  std::size_t count = 0;
  double rate_hz = 0.0;
  double isi_mean = 0.0;  // ms
  double isi_cv = 0.0;
  std::optional<double> first;
  std::optional<double> last;
  bool operator==(const Activity&) const = default;
};

struct Functional {
  dynlang::CodeSummary summary;
  std::string source;  // relative file name of the generated DynLang source
  bool operator==(const Functional&) const = default;
};

struct CgNode {
  NodeType type = NodeType::soma;
  std::size_t index = 0;
  std::vector<IoRef> inputs;
  std::vector<IoRef> outputs;
  double length_um = 0.0;
  double width_um = 0.0;
  std::array<double, 3> position_um{0.0, 0.0, 0.0};
  Activity activity;
  Functional functional;
  std::optional<double> efficacy;                    // synapse nodes only
  std::optional<std::vector<std::size_t>> compartments;  // neuron nodes only

  bool operator==(const CgNode&) const = default;
};

struct EdgeStats {
  std::size_t count = 0;
  double iei_mean = 0.0;
  double iei_var = 0.0;
  std::optional<double> last;
  bool operator==(const EdgeStats&) const = default;
};

struct CgEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeStats stats;
  /// Set on low-level cross-neuron edges: the synapse they realize.
  std::optional<std::size_t> synapse;
  bool operator==(const CgEdge&) const = default;
};

struct CgLevel {
  std::vector<CgNode> nodes;
  std::vector<CgEdge> edges;
  bool operator==(const CgLevel&) const = default;
};

struct CompGraph {
  double duration_ms = 0.0;  // simulated time the activity features summarize
  CgLevel low;
  CgLevel up;
  /// membership[neuron] = low-level indices of its compartments, in chain order.
  std::vector<std::vector<std::size_t>> membership;

  std::size_t neuron_count() const { return membership.size(); }
  bool operator==(const CompGraph&) const = default;
};

/// DynLang sources generated while building a graph, keyed by the relative
/// file names referenced from node functional features.
struct CgSources {
  std::vector<std::pair<std::string, std::string>> files;  // (name, source), sorted by name
};

/// Throws ParamError when the simulation result does not belong to the net.
CompGraph build_cg(const NetworkModel& net, const SimResult& sim, CgSources* sources = nullptr);

/// Every violated invariant (empty when the graph is valid).
std::vector<std::string> validate(const CompGraph& g);

struct FeatureNorms {
  double duration_ms = 1000.0;
  double rate_hz = 100.0;
  double length_um = 100.0;
  double width_um = 10.0;
  double position_um = 1000.0;
};

namespace feature {
constexpr std::size_t kWidth = 31;
constexpr std::size_t kType = 0;         // [0, 5)
constexpr std::size_t kIndex = 5;        // [5, 6)
constexpr std::size_t kDegree = 6;       // [6, 8)
constexpr std::size_t kGeometry = 8;     // [8, 13)
constexpr std::size_t kActivity = 13;    // [13, 18)
constexpr std::size_t kFunctional = 18;  // [18, 29)
constexpr std::size_t kEfficacy = 29;    // [29, 30)
constexpr std::size_t kCompartments = 30;

struct Span {
  const char* name;
  std::size_t offset;
  std::size_t length;
};
inline constexpr std::array<Span, 8> kLayout{{{"type", 0, 5},
                                              {"index", 5, 1},
                                              {"degree", 6, 2},
                                              {"geometry", 8, 5},
                                              {"activity", 13, 5},
                                              {"functional", 18, 11},
                                              {"efficacy", 29, 1},
                                              {"compartments", 30, 1}}};
}  // namespace feature

/// Fixed-length encoding of one node of a level with `level_size` nodes.
std::array<double, feature::kWidth> featurize(const CgNode& node, std::size_t level_size, const FeatureNorms& norms);

FeatureNorms norms_for(const CompGraph& g);

/// Canonical CGX bytes (sorted keys, 9-digit floats).
std::string to_cgx(const CompGraph& g);
/// Throws SchemaError (with JSON path) or ParseError for malformed input.
CompGraph from_cgx(const std::string& bytes);

}  // namespace bganlab
