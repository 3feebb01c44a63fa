#include "bganlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bganlab/error.hpp"
#include "bganlab/json_reader.hpp"
#include "bganlab/parallel.hpp"
#include "bganlab/rng.hpp"
#include "bganlab/sha256.hpp"

namespace bganlab {

using bgan::Mat;

namespace {

constexpr std::size_t kTokensPerNode = 1 + feature::kWidth + 1;  // [CLS], features, [SEP]
constexpr double kMomentum = 0.9;

Mat uniform_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

std::size_t type_row(NodeType t) { return static_cast<std::size_t>(t); }

template <typename P, typename F>
void visit_train(P& p, F&& fn) {
  p.model.visit(fn);
  fn("embed.cls", p.embed.cls);
  fn("embed.mask", p.embed.mask);
  fn("embed.tok_cls", p.embed.tok_cls);
  fn("embed.pos", p.embed.pos);
  fn("embed.value_dir", p.embed.value_dir);
  fn("embed.sep", p.embed.sep);
  fn("recon.w", p.recon_w);
  fn("recon.b", p.recon_b);
}

// Token-level mask: token t may attend token u iff their nodes are admissible.
bgan::Mask expand_mask(const bgan::Mask& node_mask, std::size_t per_node) {
  const auto k = static_cast<Eigen::Index>(per_node);
  bgan::Mask m(node_mask.rows() * k, node_mask.cols() * k);
  for (Eigen::Index i = 0; i < node_mask.rows(); ++i)
    for (Eigen::Index j = 0; j < node_mask.cols(); ++j) m.block(i * k, j * k, k, k).setConstant(node_mask(i, j));
  return m;
}

std::vector<TokenRef> node_tokens(const CgLevel& level) {
  std::vector<TokenRef> out;
  for (std::size_t i = 0; i < level.nodes.size(); ++i) out.push_back({TokenRef::Kind::node, i, level.nodes[i].type, 0, 0.0});
  return out;
}

Mat nodewise_rows(const CgLevel& level, const EmbedParams& e, const FeatureNorms& norms) {
  Mat m(static_cast<Eigen::Index>(level.nodes.size()), static_cast<Eigen::Index>(kNodeRowWidth));
  for (std::size_t i = 0; i < level.nodes.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    m.row(row).head(kClsWidth) = e.cls.row(static_cast<Eigen::Index>(type_row(level.nodes[i].type)));
    const auto f = featurize(level.nodes[i], level.nodes.size(), norms);
    for (std::size_t k = 0; k < f.size(); ++k) m(row, static_cast<Eigen::Index>(kClsWidth + k)) = f[k];
  }
  return m;
}

void featurewise_level(const CgLevel& level, const EmbedParams& e, const FeatureNorms& norms, Mat& rows,
                       std::vector<TokenRef>& tokens) {
  const Eigen::Index l = e.sep.cols();
  rows.resize(static_cast<Eigen::Index>(level.nodes.size() * kTokensPerNode), l);
  tokens.clear();
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < level.nodes.size(); ++i) {
    const NodeType type = level.nodes[i].type;
    rows.row(r++) = e.tok_cls.row(static_cast<Eigen::Index>(type_row(type)));
    tokens.push_back({TokenRef::Kind::cls, i, type, 0, 0.0});
    const auto f = featurize(level.nodes[i], level.nodes.size(), norms);
    for (std::size_t k = 0; k < f.size(); ++k) {
      rows.row(r++) = e.pos.row(static_cast<Eigen::Index>(k)) + f[k] * e.value_dir;
      tokens.push_back({TokenRef::Kind::feature, i, type, k, f[k]});
    }
    rows.row(r++) = e.sep;
    tokens.push_back({TokenRef::Kind::sep, i, type, 0, 0.0});
  }
}

// Adds d(input row) into the embedding tensors that produced it.
void embed_backward(const std::vector<TokenRef>& tokens, const Mat& d, const std::vector<bool>& masked,
                    std::size_t offset, EmbedParams& g) {
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto row = d.row(static_cast<Eigen::Index>(t));
    if (masked[offset + t]) {
      g.mask += row;
      continue;
    }
    const TokenRef& tok = tokens[t];
    const auto type = static_cast<Eigen::Index>(type_row(tok.type));
    switch (tok.kind) {
      case TokenRef::Kind::node: g.cls.row(type) += row.head(kClsWidth); break;
      case TokenRef::Kind::cls: g.tok_cls.row(type) += row; break;
      case TokenRef::Kind::feature:
        g.pos.row(static_cast<Eigen::Index>(tok.feature)) += row;
        g.value_dir += tok.value * row;
        break;
      case TokenRef::Kind::sep: g.sep += row; break;
    }
  }
}

Mat stack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), std::max(a.cols(), b.cols()));
  if (a.rows() > 0) out.topRows(a.rows()) = a;
  if (b.rows() > 0) out.bottomRows(b.rows()) = b;
  return out;
}

// Evaluates the linear reconstruction head against targets and returns the
// gradient w.r.t. the head inputs.
double recon_loss(const Mat& x, const Mat& target, const TrainParams& p, TrainParams* grad, Mat* dx) {
  const Mat r = (x * p.recon_w).rowwise() + p.recon_b.row(0);
  const double loss = mse(r, target);
  if (grad) {
    const Mat dr = (2.0 / static_cast<double>(r.size())) * (r - target);
    grad->recon_w += x.transpose() * dr;
    grad->recon_b += dr.colwise().sum();
    *dx = dr * p.recon_w.transpose();
  }
  return loss;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

const char* to_string(InputMode m) { return m == InputMode::node_wise ? "node-wise" : "feature-wise"; }

InputMode input_mode_from_string(const std::string& s) {
  if (s == "node-wise") return InputMode::node_wise;
  if (s == "feature-wise") return InputMode::feature_wise;
  throw ParamError("unknown input mode '" + s + "' (expected node-wise or feature-wise)");
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::autoencode: return "autoencode";
    case Objective::masked: return "masked";
    case Objective::edge: return "edge";
  }
  return "?";
}

Objective objective_from_string(const std::string& s) {
  if (s == "autoencode") return Objective::autoencode;
  if (s == "masked") return Objective::masked;
  if (s == "edge") return Objective::edge;
  throw ParamError("unknown objective '" + s + "'");
}

// ------------------------------------------------------------ parameters

void TrainParams::visit(const std::function<void(const std::string&, Mat&)>& fn) { visit_train(*this, fn); }
void TrainParams::visit(const std::function<void(const std::string&, const Mat&)>& fn) const {
  visit_train(*this, fn);
}

TrainParams TrainParams::zeros_like() const {
  TrainParams z = *this;
  z.visit([](const std::string&, Mat& m) { m.setZero(); });
  return z;
}

void TrainParams::add_scaled(const TrainParams& other, double scale) {
  std::vector<const Mat*> src;
  other.visit([&](const std::string&, const Mat& m) { src.push_back(&m); });
  std::size_t i = 0;
  visit([&](const std::string& name, Mat& m) {
    if (i >= src.size() || src[i]->rows() != m.rows() || src[i]->cols() != m.cols())
      throw ParamError("add_scaled: shape mismatch at " + name);
    m += scale * *src[i++];
  });
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ParamError("learning rate must be >= 0");
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) throw ParamError("mask fraction must be in (0, 1)");
  if (!(neg_ratio >= 0.0) || !std::isfinite(neg_ratio)) throw ParamError("negative ratio must be >= 0");
  if (objectives.empty()) throw ParamError("at least one objective is required");
  model.validate();
  if (mode == InputMode::node_wise && model.d_model != kNodeRowWidth)
    throw ParamError("node-wise input needs d_model = " + std::to_string(kNodeRowWidth) + ", got " +
                     std::to_string(model.d_model));
}

Json to_json(const TrainConfig& c) {
  Json objs = Json::array();
  for (Objective o : c.objectives) objs.push_back(to_string(o));
  return Json{{"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"mask_fraction", c.mask_fraction},
              {"neg_ratio", c.neg_ratio},
              {"objectives", objs},
              {"momentum", c.momentum},
              {"mode", to_string(c.mode)},
              {"model",
               {{"d_model", c.model.d_model},
                {"n_head", c.model.n_head},
                {"d_head", c.model.d_head},
                {"n_query", c.model.n_kv},
                {"n_blocks", c.model.n_blocks},
                {"n_classes", c.model.n_classes},
                {"share_levels", c.model.share_levels}}}};
}

TrainConfig train_config_from_json(const Json& j) {
  const Reader r(j, "$");
  r.only({"learning_rate", "epochs", "seed", "mask_fraction", "neg_ratio", "objectives", "momentum", "mode", "model"});
  TrainConfig c;
  c.learning_rate = r.num_or("learning_rate", c.learning_rate);
  if (r.has("epochs")) c.epochs = r.index("epochs");
  if (r.has("seed")) c.seed = r.index("seed");
  c.mask_fraction = r.num_or("mask_fraction", c.mask_fraction);
  c.neg_ratio = r.num_or("neg_ratio", c.neg_ratio);
  if (r.has("objectives")) {
    const Json& a = r.array("objectives");
    c.objectives.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string path = Reader::item(r.sub("objectives"), i);
      if (!a[i].is_string()) throw SchemaError(path, "expected string");
      c.objectives.insert(parse_enum<Objective>(a[i].get<std::string>(), path,
                                                {{"autoencode", Objective::autoencode},
                                                 {"masked", Objective::masked},
                                                 {"edge", Objective::edge}}));
    }
  }
  if (r.has("momentum")) c.momentum = r.boolean("momentum");
  if (r.has("mode"))
    c.mode = parse_enum<InputMode>(r.str("mode"), r.sub("mode"),
                                   {{"node-wise", InputMode::node_wise}, {"feature-wise", InputMode::feature_wise}});
  if (r.has("model")) {
    const Reader m(r.at("model"), r.sub("model"));
    m.only({"d_model", "n_head", "d_head", "n_query", "n_blocks", "n_classes", "share_levels"});
    if (m.has("d_model")) c.model.d_model = m.index("d_model");
    if (m.has("n_head")) c.model.n_head = m.index("n_head");
    if (m.has("d_head")) c.model.d_head = m.index("d_head");
    if (m.has("n_query")) c.model.n_kv = m.index("n_query");
    if (m.has("n_blocks")) c.model.n_blocks = m.index("n_blocks");
    if (m.has("n_classes")) c.model.n_classes = m.index("n_classes");
    if (m.has("share_levels")) c.model.share_levels = m.boolean("share_levels");
  }
  return c;
}

std::string config_hash(const TrainConfig& c) { return sha256_hex(dump_canonical(to_json(c))); }

TrainParams init_train_params(const TrainConfig& c) {
  c.validate();
  TrainParams p;
  p.model = bgan::init_model(c.model, c.seed);
  Rng rng(hash64(c.seed, 1));
  const auto l = static_cast<Eigen::Index>(c.model.d_model);
  const auto types = static_cast<Eigen::Index>(kNodeTypes);
  p.embed.cls = uniform_mat(rng, types, static_cast<Eigen::Index>(kClsWidth));
  p.embed.mask = uniform_mat(rng, 1, l);
  p.embed.tok_cls = uniform_mat(rng, types, l);
  p.embed.pos = uniform_mat(rng, static_cast<Eigen::Index>(feature::kWidth), l);
  p.embed.value_dir = uniform_mat(rng, 1, l);
  p.embed.sep = uniform_mat(rng, 1, l);
  p.recon_w = uniform_mat(rng, l, l);
  p.recon_b = Mat::Zero(1, l);
  return p;
}

// ------------------------------------------------------------ inputs

InputRep build_nodewise(const CompGraph& g, const EmbedParams& e) {
  if (e.cls.rows() != static_cast<Eigen::Index>(kNodeTypes) || e.cls.cols() != static_cast<Eigen::Index>(kClsWidth))
    throw ParamError("build_nodewise: [CLS] table must be 5 x 8");
  InputRep rep;
  rep.mode = InputMode::node_wise;
  const FeatureNorms norms = norms_for(g);
  rep.f_low = nodewise_rows(g.low, e, norms);
  rep.f_up = nodewise_rows(g.up, e, norms);
  rep.topo = bgan::topology_from(g);
  rep.low_tokens = node_tokens(g.low);
  rep.up_tokens = node_tokens(g.up);
  return rep;
}

InputRep build_featurewise(const CompGraph& g, const EmbedParams& e) {
  InputRep rep;
  rep.mode = InputMode::feature_wise;
  const FeatureNorms norms = norms_for(g);
  featurewise_level(g.low, e, norms, rep.f_low, rep.low_tokens);
  featurewise_level(g.up, e, norms, rep.f_up, rep.up_tokens);
  const bgan::Topology nodes = bgan::topology_from(g);
  rep.topo.low = {expand_mask(nodes.low.a, kTokensPerNode), expand_mask(nodes.low.b, kTokensPerNode)};
  rep.topo.up = {expand_mask(nodes.up.a, kTokensPerNode), expand_mask(nodes.up.b, kTokensPerNode)};
  // Member compartments' tokens are pooled into the neuron's [CLS] token.
  rep.topo.agg.assign(static_cast<std::size_t>(rep.f_up.rows()), {});
  for (std::size_t n = 0; n < nodes.agg.size(); ++n)
    for (std::size_t c : nodes.agg[n])
      for (std::size_t k = 0; k < kTokensPerNode; ++k) rep.topo.agg[n * kTokensPerNode].push_back(c * kTokensPerNode + k);
  return rep;
}

InputRep build_input(const CompGraph& g, const EmbedParams& e, InputMode mode) {
  return mode == InputMode::node_wise ? build_nodewise(g, e) : build_featurewise(g, e);
}

MaskedRep mask_nodes(const InputRep& rep, const Mat& mask_row, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ParamError("mask fraction must be in (0, 1)");
  const std::size_t rows = rep.rows();
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows) - 1e-9));
  if (count == 0 || count > rows)
    throw ParamError("mask_nodes: " + std::to_string(rows) + " rows are too few to mask a fraction of " +
                     std::to_string(fraction));
  if (mask_row.cols() != rep.f_low.cols() && mask_row.cols() != rep.f_up.cols())
    throw ParamError("mask_nodes: [MASK] width differs from the rows");
  // Partial Fisher-Yates.
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(rows - 1)));
    std::swap(order[i], order[j]);
  }
  MaskedRep out;
  out.index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.index.begin(), out.index.end());
  out.rep = rep;
  const Mat all = stack(rep.f_low, rep.f_up);
  out.targets.resize(static_cast<Eigen::Index>(count), all.cols());
  const auto n_low = static_cast<std::size_t>(rep.f_low.rows());
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = out.index[k];
    out.targets.row(static_cast<Eigen::Index>(k)) = all.row(static_cast<Eigen::Index>(i));
    if (i < n_low) out.rep.f_low.row(static_cast<Eigen::Index>(i)) = mask_row;
    else out.rep.f_up.row(static_cast<Eigen::Index>(i - n_low)) = mask_row;
  }
  return out;
}

double mse(const Mat& out, const Mat& target) {
  if (out.rows() != target.rows() || out.cols() != target.cols())
    throw ParamError("mse: shapes differ (" + std::to_string(out.rows()) + " x " + std::to_string(out.cols()) + " vs " +
                     std::to_string(target.rows()) + " x " + std::to_string(target.cols()) + ")");
  if (out.size() == 0) return 0.0;
  return (out - target).squaredNorm() / static_cast<double>(out.size());
}

// ------------------------------------------------------------ edges

EdgeSample sample_edges(const CompGraph& g, double neg_ratio, std::uint64_t seed) {
  const std::size_t n = g.up.nodes.size();
  if (g.up.edges.empty()) throw ParamError("edge prediction: the up level has no edges");
  std::set<std::pair<std::size_t, std::size_t>> pos;
  EdgeSample s;
  for (const CgEdge& e : g.up.edges)
    if (pos.insert({e.src, e.dst}).second) {
      s.pairs.emplace_back(e.src, e.dst);
      s.labels.push_back(1.0);
    }
  const std::size_t available = n * (n - 1) - pos.size();
  const std::size_t want =
      std::min(available, static_cast<std::size_t>(std::llround(neg_ratio * static_cast<double>(pos.size()))));
  std::set<std::pair<std::size_t, std::size_t>> neg;
  Rng rng(seed);
  if (want * 2 > available) {
    // Dense: enumerate every non-edge and take a seeded subset.
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && !pos.count({i, j})) all.emplace_back(i, j);
    for (std::size_t k = 0; k < want; ++k) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(k), static_cast<std::int64_t>(all.size() - 1)));
      std::swap(all[k], all[j]);
      s.pairs.push_back(all[k]);
      s.labels.push_back(0.0);
    }
    return s;
  }
  while (neg.size() < want) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
    if (i == j || pos.count({i, j}) || !neg.insert({i, j}).second) continue;
    s.pairs.emplace_back(i, j);
    s.labels.push_back(0.0);
  }
  return s;
}

double edge_loss(const Mat& z, const EdgeSample& s, Mat* grad) {
  if (s.pairs.empty()) throw ParamError("edge_loss: empty sample");
  if (grad) *grad = Mat::Zero(z.rows(), z.cols());
  const double m = static_cast<double>(s.pairs.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < s.pairs.size(); ++k) {
    const auto [i, j] = s.pairs[k];
    if (i >= static_cast<std::size_t>(z.rows()) || j >= static_cast<std::size_t>(z.rows()))
      throw ParamError("edge_loss: pair outside the embedding rows");
    const auto ri = static_cast<Eigen::Index>(i), rj = static_cast<Eigen::Index>(j);
    const double x = z.row(ri).dot(z.row(rj));
    const double y = s.labels[k];
    // -[y log sigma(x) + (1 - y) log(1 - sigma(x))] in overflow-safe form.
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    if (grad) {
      const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      const double dx = (sig - y) / m;
      grad->row(ri) += dx * z.row(rj);
      grad->row(rj) += dx * z.row(ri);
    }
  }
  return loss / m;
}

// ------------------------------------------------------------ training

std::vector<GraphTask> prepare_tasks(const std::vector<CompGraph>& graphs, const TrainConfig& c) {
  std::vector<GraphTask> tasks;
  const TrainParams probe = init_train_params(c);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    GraphTask t;
    t.graph = &graphs[i];
    if (c.objectives.count(Objective::masked)) {
      const InputRep rep = build_input(graphs[i], probe.embed, c.mode);
      t.mask_index = mask_nodes(rep, probe.embed.mask, c.mask_fraction, hash64(c.seed, 2 * i + 100)).index;
    }
    if (c.objectives.count(Objective::edge)) t.edges = sample_edges(graphs[i], c.neg_ratio, hash64(c.seed, 2 * i + 101));
    tasks.push_back(std::move(t));
  }
  return tasks;
}

LossBreakdown graph_loss(const TrainParams& p, const GraphTask& t, const TrainConfig& c, TrainParams* grad,
                         const EmbedParams* target_embed) {
  LossBreakdown out;
  const InputRep rep = build_input(*t.graph, p.embed, c.mode);
  const InputRep target_rep = target_embed ? build_input(*t.graph, *target_embed, c.mode) : rep;
  const Mat all_targets = stack(target_rep.f_low, target_rep.f_up);
  const auto n_low = static_cast<Eigen::Index>(rep.f_low.rows());
  const auto n_up = static_cast<Eigen::Index>(rep.f_up.rows());
  const auto l = static_cast<Eigen::Index>(c.model.d_model);

  auto backprop = [&](const InputRep& in, const bgan::ModelCache& cache, const Mat& d_low, const Mat& d_up,
                      const std::vector<bool>& masked) {
    const bgan::ModelGrads g = bgan::model_backward(p.model, cache, c.model, bgan::HeadTarget::up, d_low, d_up, Mat());
    grad->model.add_scaled(g.params, 1.0);
    embed_backward(in.low_tokens, g.d_low, masked, 0, grad->embed);
    embed_backward(in.up_tokens, g.d_up, masked, static_cast<std::size_t>(n_low), grad->embed);
  };

  const bool plain = c.objectives.count(Objective::autoencode) || c.objectives.count(Objective::edge);
  if (plain) {
    bgan::ModelCache cache;
    const bgan::ModelOutput o =
        bgan::model_forward(p.model, rep.f_low, rep.f_up, rep.topo, c.model, bgan::HeadTarget::up, grad ? &cache : nullptr);
    Mat d_low = Mat::Zero(n_low, l), d_up = Mat::Zero(n_up, l);
    if (c.objectives.count(Objective::autoencode)) {
      Mat dx;
      out.autoencode = recon_loss(stack(o.low, o.up), all_targets, p, grad, &dx);
      if (grad) {
        d_low += dx.topRows(n_low);
        d_up += dx.bottomRows(n_up);
      }
    }
    if (c.objectives.count(Objective::edge)) {
      if (!t.edges) throw ParamError("graph_loss: edge objective without an edge sample");
      if (c.mode == InputMode::node_wise) {
        Mat dz;
        out.edge = edge_loss(o.up, *t.edges, grad ? &dz : nullptr);
        if (grad) d_up += dz;
      } else {
        // One embedding per node: its [CLS] token.
        Mat z(static_cast<Eigen::Index>(t.graph->up.nodes.size()), l);
        for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) = o.up.row(i * static_cast<Eigen::Index>(kTokensPerNode));
        Mat dz;
        out.edge = edge_loss(z, *t.edges, grad ? &dz : nullptr);
        if (grad)
          for (Eigen::Index i = 0; i < z.rows(); ++i) d_up.row(i * static_cast<Eigen::Index>(kTokensPerNode)) += dz.row(i);
      }
    }
    if (grad) backprop(rep, cache, d_low, d_up, std::vector<bool>(rep.rows(), false));
  }

  if (c.objectives.count(Objective::masked)) {
    InputRep m = rep;
    std::vector<bool> masked(rep.rows(), false);
    Mat targets(static_cast<Eigen::Index>(t.mask_index.size()), all_targets.cols());
    for (std::size_t k = 0; k < t.mask_index.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(t.mask_index[k]);
      if (t.mask_index[k] >= rep.rows()) throw ParamError("graph_loss: mask index outside the rows");
      masked[t.mask_index[k]] = true;
      targets.row(static_cast<Eigen::Index>(k)) = all_targets.row(i);
      if (i < n_low) m.f_low.row(i) = p.embed.mask;
      else m.f_up.row(i - n_low) = p.embed.mask;
    }
    bgan::ModelCache cache;
    const bgan::ModelOutput o =
        bgan::model_forward(p.model, m.f_low, m.f_up, m.topo, c.model, bgan::HeadTarget::up, grad ? &cache : nullptr);
    const Mat outs = stack(o.low, o.up);
    Mat x(targets.rows(), outs.cols());
    for (std::size_t k = 0; k < t.mask_index.size(); ++k)
      x.row(static_cast<Eigen::Index>(k)) = outs.row(static_cast<Eigen::Index>(t.mask_index[k]));
    Mat dx;
    out.masked = recon_loss(x, targets, p, grad, &dx);
    if (grad) {
      Mat d_low = Mat::Zero(n_low, l), d_up = Mat::Zero(n_up, l);
      for (std::size_t k = 0; k < t.mask_index.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(t.mask_index[k]);
        if (i < n_low) d_low.row(i) += dx.row(static_cast<Eigen::Index>(k));
        else d_up.row(i - n_low) += dx.row(static_cast<Eigen::Index>(k));
      }
      backprop(m, cache, d_low, d_up, masked);
    }
  }
  return out;
}

TrainResult train(const std::vector<CompGraph>& graphs, const TrainConfig& c) {
  c.validate();
  return train_from(init_train_params(c), graphs, c);
}

TrainResult train_from(TrainParams p, const std::vector<CompGraph>& graphs, const TrainConfig& c) {
  c.validate();
  if (graphs.empty()) throw ParamError("train: needs at least one graph");
  const std::vector<GraphTask> tasks = prepare_tasks(graphs, c);
  TrainResult res;
  std::optional<TrainParams> velocity;
  if (c.momentum) velocity = p.zeros_like();

  for (std::size_t epoch = 0;; ++epoch) {
    const bool update = epoch < c.epochs;
    std::vector<LossBreakdown> losses(tasks.size());
    std::vector<TrainParams> grads(update ? tasks.size() : 0);
    parallel_for(tasks.size(), c.jobs, [&](std::size_t i) {
      TrainParams* g = nullptr;
      if (update) {
        grads[i] = p.zeros_like();
        g = &grads[i];
      }
      losses[i] = graph_loss(p, tasks[i], c, g);
    });
    LossBreakdown sum;
    for (const LossBreakdown& l : losses) {  // ascending graph index
      sum.autoencode += l.autoencode;
      sum.masked += l.masked;
      sum.edge += l.edge;
    }
    if (!std::isfinite(sum.total()))
      throw Error("training diverged at epoch " + std::to_string(epoch) + ": loss is not finite");
    res.curve.push_back(sum);
    if (!update) break;
    TrainParams total = p.zeros_like();
    for (const TrainParams& g : grads) total.add_scaled(g, 1.0);
    if (velocity) {
      velocity->add_scaled(*velocity, kMomentum - 1.0);
      velocity->add_scaled(total, 1.0);
      p.add_scaled(*velocity, -c.learning_rate);
    } else {
      p.add_scaled(total, -c.learning_rate);
    }
  }
  res.params = std::move(p);
  return res;
}

// ------------------------------------------------------------ traces

AttnSnapshot attention_snapshot(const TrainParams& p, const CompGraph& g, const TrainConfig& c,
                                const std::string& label) {
  const InputRep rep = build_input(g, p.embed, c.mode);
  bgan::ModelCache cache;
  bgan::model_forward(p.model, rep.f_low, rep.f_up, rep.topo, c.model, bgan::HeadTarget::up, &cache);
  AttnSnapshot s;
  s.label = label;
  s.records = bgan::attention_trace(cache);
  return s;
}

std::string export_snapshot(const AttnSnapshot& s) {
  OrderedJson blocks = OrderedJson::array();
  for (const bgan::AttnRecord& r : s.records) {
    OrderedJson w = OrderedJson::array();
    for (Eigen::Index i = 0; i < r.weights.rows(); ++i) {
      OrderedJson row = OrderedJson::array();
      for (Eigen::Index j = 0; j < r.weights.cols(); ++j) row.push_back(r.weights(i, j));
      w.push_back(std::move(row));
    }
    blocks.push_back(OrderedJson{{"block", r.block},
                                 {"level", r.level},
                                 {"head", r.head},
                                 {"direction", std::string(1, r.direction)},
                                 {"weights", std::move(w)}});
  }
  return dump_canonical(OrderedJson{{"snapshot", s.label}, {"blocks", std::move(blocks)}});
}

AttnSnapshot import_snapshot(const std::string& bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("attention trace: ") + e.what(), 0, 0);
  }
  const Reader r(j, "$");
  r.only({"snapshot", "blocks"});
  AttnSnapshot s;
  s.label = r.str("snapshot");
  const Json& blocks = r.array("blocks");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string path = Reader::item("$.blocks", b);
    const Reader br(blocks[b], path);
    br.only({"block", "level", "head", "direction", "weights"});
    bgan::AttnRecord rec;
    rec.block = br.index("block");
    rec.level = br.str("level");
    if (rec.level != "low" && rec.level != "up") throw SchemaError(br.sub("level"), "expected low or up");
    rec.head = br.index("head");
    const std::string dir = br.str("direction");
    if (dir != "A" && dir != "B") throw SchemaError(br.sub("direction"), "expected A or B");
    rec.direction = dir[0];
    const Json& w = br.array("weights");
    rec.weights.resize(static_cast<Eigen::Index>(w.size()), w.empty() ? 0 : static_cast<Eigen::Index>(w[0].size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string rp = Reader::item(br.sub("weights"), i);
      if (!w[i].is_array() || static_cast<Eigen::Index>(w[i].size()) != rec.weights.cols())
        throw SchemaError(rp, "expected a row of " + std::to_string(rec.weights.cols()) + " numbers");
      for (std::size_t k = 0; k < w[i].size(); ++k)
        rec.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = Reader::as_num(w[i][k], Reader::item(rp, k));
    }
    s.records.push_back(std::move(rec));
  }
  return s;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ParamError("pearson: sequences differ in length");
  if (a.size() < 2) return std::nullopt;
  auto constant = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo <= 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
  };
  if (constant(a) || constant(b)) return std::nullopt;
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> synapse_attention(const AttnSnapshot& s, const CompGraph& g) {
  const std::size_t n = g.neuron_count();
  const std::size_t n_syn = g.up.nodes.size() - n;
  std::vector<double> sum(n_syn, 0.0);
  std::vector<std::size_t> count(n_syn, 0);
  const std::size_t up_rows = g.up.nodes.size();
  for (const bgan::AttnRecord& r : s.records) {
    if (r.level != "up") continue;
    if (up_rows == 0) break;
    const std::size_t per = static_cast<std::size_t>(r.weights.rows()) / up_rows;  // 1 node-wise, 33 feature-wise
    for (const CgEdge& e : g.up.edges) {
      const std::size_t syn_node = e.src >= n ? e.src : e.dst;
      if (syn_node < n) continue;
      const auto src = static_cast<Eigen::Index>(e.src * per), dst = static_cast<Eigen::Index>(e.dst * per);
      // Forward: the target attends to the source; backward: the reverse.
      const double w = r.direction == 'A' ? r.weights(dst, src) : r.weights(src, dst);
      sum[syn_node - n] += w;
      ++count[syn_node - n];
    }
  }
  for (std::size_t i = 0; i < n_syn; ++i) sum[i] = count[i] ? sum[i] / static_cast<double>(count[i]) : 0.0;
  return sum;
}

CorrelationReport correlate(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& attention,
                            const std::vector<std::vector<double>>& efficacy) {
  if (attention.size() != labels.size() || efficacy.size() != labels.size())
    throw ParamError("correlate: one attention and efficacy vector per snapshot is required");
  if (labels.size() < 3) throw ParamError("correlate: needs at least 3 snapshots, got " + std::to_string(labels.size()));
  CorrelationReport rep;
  rep.snapshots = labels;
  const std::size_t n_syn = attention[0].size();
  double sum = 0.0, sum_abs = 0.0;
  for (std::size_t s = 0; s < n_syn; ++s) {
    SynapseCorrelation c;
    c.synapse = s;
    c.n = labels.size();
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (attention[k].size() != n_syn || efficacy[k].size() != n_syn)
        throw ParamError("correlate: snapshot " + labels[k] + " has a different synapse count");
      c.attention.push_back(attention[k][s]);
      c.efficacy.push_back(efficacy[k][s]);
    }
    c.r = pearson(c.attention, c.efficacy);
    if (c.r) {
      ++rep.defined;
      sum += *c.r;
      sum_abs += std::abs(*c.r);
    } else {
      ++rep.undefined;
    }
    rep.synapses.push_back(std::move(c));
  }
  if (rep.defined > 0) {
    rep.mean_r = sum / static_cast<double>(rep.defined);
    rep.mean_abs_r = sum_abs / static_cast<double>(rep.defined);
  }
  return rep;
}

namespace {
bool same_topology(const CompGraph& a, const CompGraph& b) {
  auto level_eq = [](const CgLevel& x, const CgLevel& y) {
    if (x.nodes.size() != y.nodes.size() || x.edges.size() != y.edges.size()) return false;
    for (std::size_t i = 0; i < x.nodes.size(); ++i)
      if (x.nodes[i].type != y.nodes[i].type) return false;
    for (std::size_t i = 0; i < x.edges.size(); ++i)
      if (x.edges[i].src != y.edges[i].src || x.edges[i].dst != y.edges[i].dst) return false;
    return true;
  };
  return level_eq(a.low, b.low) && level_eq(a.up, b.up) && a.membership == b.membership;
}
}  // namespace

Correlated record_and_correlate(const std::vector<std::pair<std::string, CompGraph>>& snapshots, const TrainParams& p,
                                const TrainConfig& c) {
  if (snapshots.size() < 3)
    throw ParamError("record_and_correlate: needs at least 3 snapshots, got " + std::to_string(snapshots.size()));
  for (std::size_t k = 1; k < snapshots.size(); ++k)
    if (!same_topology(snapshots[0].second, snapshots[k].second))
      throw ParamError("record_and_correlate: snapshot " + snapshots[k].first + " differs in topology");
  Correlated out;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> att, eff;
  for (const auto& [label, g] : snapshots) {
    out.trace.push_back(attention_snapshot(p, g, c, label));
    labels.push_back(label);
    att.push_back(synapse_attention(out.trace.back(), g));
    std::vector<double> e;
    for (std::size_t i = g.neuron_count(); i < g.up.nodes.size(); ++i) e.push_back(g.up.nodes[i].efficacy.value_or(0.0));
    eff.push_back(std::move(e));
  }
  out.report = correlate(labels, att, eff);
  return out;
}

std::string report_json(const CorrelationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? OrderedJson(*v) : OrderedJson(nullptr); };
  OrderedJson syn = OrderedJson::array();
  for (const SynapseCorrelation& s : r.synapses)
    syn.push_back(OrderedJson{{"synapse", s.synapse},
                              {"r", opt(s.r)},
                              {"n", s.n},
                              {"attention", s.attention},
                              {"efficacy", s.efficacy}});
  return dump_canonical(OrderedJson{{"snapshots", r.snapshots},
                                    {"synapses", std::move(syn)},
                                    {"summary",
                                     {{"defined", r.defined},
                                      {"undefined", r.undefined},
                                      {"mean_r", opt(r.mean_r)},
                                      {"mean_abs_r", opt(r.mean_abs_r)}}}});
}

std::string report_csv(const CorrelationReport& r) {
  std::string out = "synapse_id,r,n\n";
  for (const SynapseCorrelation& s : r.synapses)
    out += std::to_string(s.synapse) + "," + (s.r ? format_double9(*s.r) : "undefined") + "," + std::to_string(s.n) + "\n";
  return out;
}

}  // namespace bganlab
