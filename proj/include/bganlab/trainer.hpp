#pragma once

// Input representations, pre-training objectives, gradient-descent training,
// attention traces and attention/efficacy correlation.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bganlab/bgan.hpp"
#include "bganlab/canonical_json.hpp"
#include "bganlab/cg_repr.hpp"

namespace bganlab {

constexpr std::size_t kClsWidth = 8;
constexpr std::size_t kNodeRowWidth = kClsWidth + feature::kWidth;  // 39
constexpr std::size_t kNodeTypes = 5;

enum class InputMode { node_wise, feature_wise };
const char* to_string(InputMode m);
InputMode input_mode_from_string(const std::string& s);

/// Learned input-side tensors.
struct EmbedParams {
  bgan::Mat cls;        // kNodeTypes x 8, node-wise [CLS] spans
  bgan::Mat mask;       // 1 x l, [MASK] replacement row
  bgan::Mat tok_cls;    // kNodeTypes x l, feature-wise [CLS] tokens
  bgan::Mat pos;        // 31 x l, feature-wise position embeddings
  bgan::Mat value_dir;  // 1 x l
  bgan::Mat sep;        // 1 x l
};

struct TrainParams {
  bgan::ModelParams model;
  EmbedParams embed;
  bgan::Mat recon_w;  // l x row width
  bgan::Mat recon_b;  // 1 x row width

  void visit(const std::function<void(const std::string&, bgan::Mat&)>& fn);
  void visit(const std::function<void(const std::string&, const bgan::Mat&)>& fn) const;
  TrainParams zeros_like() const;
  void add_scaled(const TrainParams& other, double scale);
};

/// What one input row stands for.
struct TokenRef {
  enum class Kind { node, cls, feature, sep } kind = Kind::node;
  std::size_t node = 0;
  NodeType type = NodeType::soma;
  std::size_t feature = 0;  // feature tokens: offset into the featurization
  double value = 0.0;       // feature tokens: featurized value
};

struct InputRep {
  InputMode mode = InputMode::node_wise;
  bgan::Mat f_low, f_up;
  bgan::Topology topo;
  std::vector<TokenRef> low_tokens, up_tokens;

  std::size_t rows() const { return static_cast<std::size_t>(f_low.rows() + f_up.rows()); }
};

InputRep build_nodewise(const CompGraph& g, const EmbedParams& e);
InputRep build_featurewise(const CompGraph& g, const EmbedParams& e);
InputRep build_input(const CompGraph& g, const EmbedParams& e, InputMode mode);

/// Row indices into the pooled sequence (low rows first, then up rows).
struct MaskedRep {
  InputRep rep;
  bgan::Mat targets;               // original rows, in index order
  std::vector<std::size_t> index;  // ascending
};

/// Replaces ceil(fraction * rows) rows, sampled without replacement, by the
/// [MASK] row. Throws ParamError when that count is 0 or exceeds the rows.
MaskedRep mask_nodes(const InputRep& rep, const bgan::Mat& mask_row, double fraction, std::uint64_t seed);

double mse(const bgan::Mat& out, const bgan::Mat& target);

struct EdgeSample {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> labels;  // 1 positive, 0 negative
};

/// Every up-level edge plus round(ratio * edges) distinct uniformly sampled
/// non-edges (no self pairs). Throws ParamError when the level has no edges.
EdgeSample sample_edges(const CompGraph& g, double neg_ratio, std::uint64_t seed);

/// Mean binary cross-entropy of logistic(z_i . z_j). If grad is given it
/// receives dLoss/dz.
double edge_loss(const bgan::Mat& z, const EdgeSample& s, bgan::Mat* grad = nullptr);

enum class Objective { autoencode, masked, edge };
const char* to_string(Objective o);
Objective objective_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  double mask_fraction = 0.15;
  double neg_ratio = 1.0;
  std::set<Objective> objectives{Objective::masked};
  bool momentum = false;  // heavy ball, coefficient 0.9
  InputMode mode = InputMode::node_wise;
  bgan::ModelConfig model;
  unsigned jobs = 1;  // not part of the result; excluded from JSON and hashes

  void validate() const;
};

Json to_json(const TrainConfig& c);
/// Throws SchemaError with a JSON path.
TrainConfig train_config_from_json(const Json& j);
std::string config_hash(const TrainConfig& c);

TrainParams init_train_params(const TrainConfig& c);

/// Per-graph state fixed for the whole run: masks and edge samples.
struct GraphTask {
  const CompGraph* graph = nullptr;
  std::vector<std::size_t> mask_index;
  std::optional<EdgeSample> edges;
};

std::vector<GraphTask> prepare_tasks(const std::vector<CompGraph>& graphs, const TrainConfig& c);

struct LossBreakdown {
  double autoencode = 0.0;
  double masked = 0.0;
  double edge = 0.0;
  double total() const { return autoencode + masked + edge; }
};

/// Objective values of one graph and, if grad is given, their gradient.
/// Reconstruction targets are constants: they are built from target_embed
/// (p.embed when null) and no gradient flows through them.
LossBreakdown graph_loss(const TrainParams& p, const GraphTask& t, const TrainConfig& c, TrainParams* grad,
                         const EmbedParams* target_embed = nullptr);

struct TrainResult {
  TrainParams params;
  /// loss[e] is evaluated after e updates; size epochs + 1.
  std::vector<LossBreakdown> curve;
};

/// Throws Error("... diverged at epoch N") if a loss becomes non-finite.
TrainResult train(const std::vector<CompGraph>& graphs, const TrainConfig& c);
/// Continues from given parameters.
TrainResult train_from(TrainParams p, const std::vector<CompGraph>& graphs, const TrainConfig& c);

// ------------------------------------------------------------ traces

struct AttnSnapshot {
  std::string label;
  std::vector<bgan::AttnRecord> records;
};

AttnSnapshot attention_snapshot(const TrainParams& p, const CompGraph& g, const TrainConfig& c,
                                const std::string& label);
std::string export_snapshot(const AttnSnapshot& s);
AttnSnapshot import_snapshot(const std::string& bytes);

struct SynapseCorrelation {
  std::size_t synapse = 0;
  std::optional<double> r;  // empty: a trajectory is constant
  std::size_t n = 0;
  std::vector<double> attention;
  std::vector<double> efficacy;
};

struct CorrelationReport {
  std::vector<std::string> snapshots;
  std::vector<SynapseCorrelation> synapses;
  std::size_t defined = 0;
  std::size_t undefined = 0;
  std::optional<double> mean_r;
  std::optional<double> mean_abs_r;
};

/// Pearson r; empty when either sequence is constant.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Mean attention on the up-level edges incident to each synapse node, over
/// blocks, heads and both directions.
std::vector<double> synapse_attention(const AttnSnapshot& s, const CompGraph& g);

struct Correlated {
  std::vector<AttnSnapshot> trace;
  CorrelationReport report;
};

/// Throws ParamError with fewer than 3 snapshots or differing topologies.
Correlated record_and_correlate(const std::vector<std::pair<std::string, CompGraph>>& snapshots, const TrainParams& p,
                                const TrainConfig& c);
/// Correlates given per-snapshot synapse attention against efficacy.
CorrelationReport correlate(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& attention,
                            const std::vector<std::vector<double>>& efficacy);

std::string report_json(const CorrelationReport& r);
std::string report_csv(const CorrelationReport& r);

}  // namespace bganlab
