#pragma once

// Bidirectional graph attention over the two-level computational graph.
//
// Row convention: node features are rows, projections multiply on the right
// (F * W). Biases, gains and other vectors are stored as 1 x n matrices so
// every learnable tensor has the same type.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bganlab/cg_repr.hpp"

namespace bganlab::bgan {

using Mat = Eigen::MatrixXd;
/// true = attention allowed. Square, diagonal always true.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ------------------------------------------------------------ primitives

/// q * k^T / sqrt(d). Throws ParamError on shape mismatch.
Mat scores(const Mat& q, const Mat& k);

/// Row-wise softmax over admissible entries; inadmissible entries are exactly
/// 0. Throws ParamError if a row has no admissible entry.
Mat masked_softmax(const Mat& c, const Mask& mask);

enum class MaskMode { one_hop, transitive };

/// Forward: i attends to itself and its direct predecessors (edge j -> i).
Mask mask_forward(const CgLevel& level, MaskMode mode = MaskMode::one_hop);
/// Backward: i attends to itself and its direct successors (edge i -> j).
Mask mask_backward(const CgLevel& level, MaskMode mode = MaskMode::one_hop);
Mask mask_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, bool forward,
                     MaskMode mode);
Mask identity_mask(std::size_t n);

/// Normalized edge attention alpha (k x k): softmax over admissible j of
/// LeakyReLU(a^T [f_i W || f_j W]), slope 0.2.
Mat gat_edge_scores(const Mat& f, const Mat& w, const Mat& a, const Mask& mask);

// ------------------------------------------------------------ parameters

/// Query projections per head; key/value projections per key-value group.
/// n_kv = n_head is MHSA, n_kv = 1 is MQSA, anything dividing n_head is GMQSA.
struct AttnParams {
  std::vector<Mat> w_q;  // n_head x (l x d)
  std::vector<Mat> w_k;  // n_kv x (l x d)
  std::vector<Mat> w_v;  // n_kv x (l x d)
  Mat w_o;               // (n_head * d) x l

  std::size_t n_head() const { return w_q.size(); }
  std::size_t n_kv() const { return w_k.size(); }
  std::size_t d_head() const { return w_q.empty() ? 0 : static_cast<std::size_t>(w_q[0].cols()); }
  /// Key-value group used by head h.
  std::size_t group_of(std::size_t h) const { return h / (n_head() / n_kv()); }
  void check(std::size_t l) const;
};

struct GanBlockParams {
  AttnParams attn;
  Mat w1, b1;  // l x 4l, 1 x 4l
  Mat w2, b2;  // 4l x l, 1 x l
  Mat ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x l
};

struct BganBlockParams {
  GanBlockParams low;
  GanBlockParams up;
  Mat w_agg;  // l x l
};

struct HeadParams {
  Mat ln_g, ln_b;  // 1 x l
  Mat w_out;       // l x n_classes
  Mat b_out;       // 1 x n_classes
};

struct ModelConfig {
  std::size_t d_model = 39;
  std::size_t n_head = 3;
  std::size_t d_head = 13;
  /// Key-value groups (n_query); must divide n_head.
  std::size_t n_kv = 3;
  std::size_t n_blocks = 2;
  std::size_t n_classes = 2;
  /// GAN_up reuses GAN_low's parameters (the up tensors stay unused).
  bool share_levels = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  std::vector<BganBlockParams> blocks;
  HeadParams head;

  /// Every learnable tensor with a stable dotted name, in checkpoint order.
  void visit(const std::function<void(const std::string&, Mat&)>& fn);
  void visit(const std::function<void(const std::string&, const Mat&)>& fn) const;
  std::size_t parameter_count() const;
  /// Same shapes, all zeros.
  ModelParams zeros_like() const;
  /// this += scale * other (shapes must match).
  void add_scaled(const ModelParams& other, double scale);
};

/// Xavier-uniform matrices, unit gains, zero biases; deterministic in seed.
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

// ------------------------------------------------------------ topology

struct LevelTopology {
  Mask a;  // forward
  Mask b;  // backward
};

/// Masks for both levels plus aggregation groups: agg[r] lists the low rows
/// averaged into up row r (empty for rows that receive nothing).
struct Topology {
  LevelTopology low;
  LevelTopology up;
  std::vector<std::vector<std::size_t>> agg;
};

Topology topology_from(const CompGraph& g, MaskMode mode = MaskMode::one_hop);

// ------------------------------------------------------------ forward

struct AttnCache {
  Mat x;
  std::vector<Mat> q, k, v;    // per head / per group
  std::vector<Mat> a_a, a_b;   // per head
  Mat o_a, o_b;                // concatenated head outputs
};

struct AttnOut {
  Mat f_a, f_b;
};

/// Bidirectional masked self-attention with shared Q, K, V and output
/// projection. Dispatches on n_kv (MHSA / MQSA / GMQSA).
AttnOut bmsa(const Mat& f, const AttnParams& p, const Mask& mask_a, const Mask& mask_b, AttnCache* cache = nullptr);

/// Single-direction variants. Each is implemented separately; equivalences
/// between them hold exactly.
Mat mhsa(const Mat& f, const AttnParams& p, const Mask& mask);
Mat mqsa(const Mat& f, const AttnParams& p, const Mask& mask);
Mat gmqsa(const Mat& f, const AttnParams& p, const Mask& mask, std::size_t n_query);

struct LnCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

Mat layer_norm(const Mat& x, const Mat& g, const Mat& b, LnCache* cache = nullptr);

struct GanCache {
  AttnCache attn;
  LnCache ln1, ln2;
  Mat f1, z1, h;
};

Mat gan_block(const Mat& f, const GanBlockParams& p, const LevelTopology& t, GanCache* cache = nullptr);

struct BlockCache {
  GanCache low, up;
  Mat low_out;  // f'_low
  Mat agg;      // aggregated low rows per up row (zero rows where agg is empty)
};

struct LevelPair {
  Mat low, up;
};

LevelPair bgan_block(const Mat& f_low, const Mat& f_up, const BganBlockParams& p, const Topology& t,
                     bool share_levels = false, BlockCache* cache = nullptr);

enum class HeadTarget { up, low, both };

struct HeadCache {
  Mat x;
  LnCache ln;
  Mat probs;
};

/// Normalization, linear map, row softmax.
Mat head_forward(const Mat& f, const HeadParams& p, HeadCache* cache = nullptr);

struct ModelCache {
  std::vector<BlockCache> blocks;
  HeadCache head;
  std::vector<std::vector<std::size_t>> agg;  // copy of the topology's groups
};

struct ModelOutput {
  Mat low, up;  // final embeddings
  Mat probs;    // class distributions of the head target rows (low rows first for both)
};

ModelOutput model_forward(const ModelParams& p, const Mat& f_low, const Mat& f_up, const Topology& t,
                          const ModelConfig& cfg, HeadTarget target = HeadTarget::up, ModelCache* cache = nullptr);

/// Attention matrix of one (block, level, head, direction).
struct AttnRecord {
  std::size_t block;
  std::string level;  // "low" | "up"
  std::size_t head;
  char direction;     // 'A' forward, 'B' backward
  Mat weights;
};

std::vector<AttnRecord> attention_trace(const ModelCache& cache);

// ------------------------------------------------------------ backward

struct ModelGrads {
  ModelParams params;
  Mat d_low, d_up;  // gradients w.r.t. the model inputs
};

/// Exact gradients given upstream gradients of the final embeddings and of
/// the head probabilities (either may be empty, meaning zero).
ModelGrads model_backward(const ModelParams& p, const ModelCache& cache, const ModelConfig& cfg, HeadTarget target,
                          const Mat& d_low, const Mat& d_up, const Mat& d_probs);

}  // namespace bganlab::bgan
