#include "bganlab/bgan.hpp"

#include <cmath>

#include "bganlab/error.hpp"
#include "bganlab/rng.hpp"

namespace bganlab::bgan {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kLeakySlope = 0.2;

std::string shape(const Mat& m) { return "(" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + ")"; }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ParamError(msg);
}

void check_mask(const Mask& m, Eigen::Index k, const char* what) {
  require(m.rows() == k && m.cols() == k, std::string(what) + ": mask must be " + std::to_string(k) + " x " +
                                              std::to_string(k) + ", got " + std::to_string(m.rows()) + " x " +
                                              std::to_string(m.cols()));
}

Mat xavier(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

GanBlockParams init_gan(Rng& rng, const ModelConfig& c) {
  const auto l = static_cast<Eigen::Index>(c.d_model);
  const auto d = static_cast<Eigen::Index>(c.d_head);
  GanBlockParams p;
  for (std::size_t h = 0; h < c.n_head; ++h) p.attn.w_q.push_back(xavier(rng, l, d));
  for (std::size_t g = 0; g < c.n_kv; ++g) p.attn.w_k.push_back(xavier(rng, l, d));
  for (std::size_t g = 0; g < c.n_kv; ++g) p.attn.w_v.push_back(xavier(rng, l, d));
  p.attn.w_o = xavier(rng, static_cast<Eigen::Index>(c.n_head) * d, l);
  p.w1 = xavier(rng, l, 4 * l);
  p.b1 = Mat::Zero(1, 4 * l);
  p.w2 = xavier(rng, 4 * l, l);
  p.b2 = Mat::Zero(1, l);
  p.ln1_g = Mat::Ones(1, l);
  p.ln1_b = Mat::Zero(1, l);
  p.ln2_g = Mat::Ones(1, l);
  p.ln2_b = Mat::Zero(1, l);
  return p;
}

template <typename P, typename F>
void visit_gan(P& g, const std::string& prefix, F&& fn) {
  for (std::size_t h = 0; h < g.attn.w_q.size(); ++h) fn(prefix + ".attn.w_q." + std::to_string(h), g.attn.w_q[h]);
  for (std::size_t k = 0; k < g.attn.w_k.size(); ++k) fn(prefix + ".attn.w_k." + std::to_string(k), g.attn.w_k[k]);
  for (std::size_t k = 0; k < g.attn.w_v.size(); ++k) fn(prefix + ".attn.w_v." + std::to_string(k), g.attn.w_v[k]);
  fn(prefix + ".attn.w_o", g.attn.w_o);
  fn(prefix + ".ffn.w1", g.w1);
  fn(prefix + ".ffn.b1", g.b1);
  fn(prefix + ".ffn.w2", g.w2);
  fn(prefix + ".ffn.b2", g.b2);
  fn(prefix + ".ln1.g", g.ln1_g);
  fn(prefix + ".ln1.b", g.ln1_b);
  fn(prefix + ".ln2.g", g.ln2_g);
  fn(prefix + ".ln2.b", g.ln2_b);
}

template <typename P, typename F>
void visit_model(P& m, F&& fn) {
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    const std::string pre = "blocks." + std::to_string(b);
    visit_gan(m.blocks[b].low, pre + ".low", fn);
    visit_gan(m.blocks[b].up, pre + ".up", fn);
    fn(pre + ".w_agg", m.blocks[b].w_agg);
  }
  fn("head.ln.g", m.head.ln_g);
  fn("head.ln.b", m.head.ln_b);
  fn("head.w_out", m.head.w_out);
  fn("head.b_out", m.head.b_out);
}

// Reachability closure (Floyd-Warshall on booleans).
void close_transitively(Mask& m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      if (m(i, k))
        for (Eigen::Index j = 0; j < n; ++j)
          if (m(k, j)) m(i, j) = true;
}

// One head's attention output into the concatenated output block.
void attend(const Mat& q, const Mat& k, const Mat& v, const Mask& mask, Mat& out, Eigen::Index col, Mat* a_store) {
  Mat a = masked_softmax(scores(q, k), mask);
  out.middleCols(col, v.cols()) = a * v;
  if (a_store) *a_store = std::move(a);
}

}  // namespace

// ------------------------------------------------------------ primitives

Mat scores(const Mat& q, const Mat& k) {
  require(q.cols() == k.cols(), "scores: q " + shape(q) + " and k " + shape(k) + " differ in width");
  require(q.cols() >= 1, "scores: width must be >= 1");
  return (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
}

Mat masked_softmax(const Mat& c, const Mask& mask) {
  require(mask.rows() == c.rows() && mask.cols() == c.cols(),
          "masked_softmax: mask shape differs from scores " + shape(c));
  Mat out = Mat::Zero(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    require(mask.row(i).any(), "masked_softmax: row " + std::to_string(i) + " has no admissible entry");
    double mx = -INFINITY;
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      if (mask(i, j)) mx = std::max(mx, c(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (!mask(i, j)) continue;
      out(i, j) = std::exp(c(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

Mask identity_mask(std::size_t n) {
  Mask m = Mask::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), false);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = true;
  return m;
}

Mask mask_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, bool forward,
                     MaskMode mode) {
  Mask m = identity_mask(n);
  for (const auto& [src, dst] : edges) {
    require(src < n && dst < n, "mask: edge endpoint out of range");
    if (forward) m(static_cast<Eigen::Index>(dst), static_cast<Eigen::Index>(src)) = true;
    else m(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(dst)) = true;
  }
  if (mode == MaskMode::transitive) close_transitively(m);
  return m;
}

namespace {
std::vector<std::pair<std::size_t, std::size_t>> edge_list(const CgLevel& level) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (const CgEdge& x : level.edges) e.emplace_back(x.src, x.dst);
  return e;
}
}  // namespace

Mask mask_forward(const CgLevel& level, MaskMode mode) {
  return mask_from_edges(level.nodes.size(), edge_list(level), true, mode);
}

Mask mask_backward(const CgLevel& level, MaskMode mode) {
  return mask_from_edges(level.nodes.size(), edge_list(level), false, mode);
}

Mat gat_edge_scores(const Mat& f, const Mat& w, const Mat& a, const Mask& mask) {
  require(f.cols() == w.rows(), "gat_edge_scores: features " + shape(f) + " incompatible with w " + shape(w));
  require(a.size() == 2 * w.cols(), "gat_edge_scores: attention vector must have length 2 * " + std::to_string(w.cols()));
  check_mask(mask, f.rows(), "gat_edge_scores");
  const Mat h = f * w;
  const Eigen::Index d = w.cols();
  const Eigen::VectorXd av = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  const Eigen::VectorXd left = h * av.head(d);
  const Eigen::VectorXd right = h * av.tail(d);
  Mat e(f.rows(), f.rows());
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      const double x = left(i) + right(j);
      e(i, j) = x > 0.0 ? x : kLeakySlope * x;
    }
  return masked_softmax(e, mask);
}

// ------------------------------------------------------------ parameters

void AttnParams::check(std::size_t l) const {
  require(!w_q.empty() && !w_k.empty() && w_k.size() == w_v.size(), "attention: needs >= 1 head and matching k/v groups");
  require(n_head() % n_kv() == 0, "attention: n_query " + std::to_string(n_kv()) + " does not divide n_head " +
                                      std::to_string(n_head()));
  const auto L = static_cast<Eigen::Index>(l);
  const auto d = static_cast<Eigen::Index>(d_head());
  require(d >= 1, "attention: d must be >= 1");
  for (const auto* group : {&w_q, &w_k, &w_v})
    for (const Mat& m : *group)
      require(m.rows() == L && m.cols() == d, "attention: projection " + shape(m) + " expected (" + std::to_string(l) +
                                                  " x " + std::to_string(d) + ")");
  require(w_o.rows() == static_cast<Eigen::Index>(n_head()) * d && w_o.cols() == L, "attention: w_o " + shape(w_o));
}

void ModelConfig::validate() const {
  require(d_model >= 1 && d_head >= 1 && n_head >= 1 && n_kv >= 1, "model config: sizes must be >= 1");
  require(n_head % n_kv == 0, "model config: n_query " + std::to_string(n_kv) + " does not divide n_head " +
                                  std::to_string(n_head));
  require(n_blocks >= 1, "model config: needs >= 1 block");
  require(n_classes >= 2, "model config: n_classes must be >= 2");
}

void ModelParams::visit(const std::function<void(const std::string&, Mat&)>& fn) { visit_model(*this, fn); }

void ModelParams::visit(const std::function<void(const std::string&, const Mat&)>& fn) const { visit_model(*this, fn); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.visit([](const std::string&, Mat& m) { m.setZero(); });
  return z;
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  std::vector<const Mat*> src;
  other.visit([&](const std::string&, const Mat& m) { src.push_back(&m); });
  std::size_t i = 0;
  visit([&](const std::string& name, Mat& m) {
    require(i < src.size() && src[i]->rows() == m.rows() && src[i]->cols() == m.cols(),
            "add_scaled: shape mismatch at " + name);
    m += scale * *src[i++];
  });
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  const auto l = static_cast<Eigen::Index>(cfg.d_model);
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    BganBlockParams blk;
    blk.low = init_gan(rng, cfg);
    blk.up = init_gan(rng, cfg);
    blk.w_agg = xavier(rng, l, l);
    p.blocks.push_back(std::move(blk));
  }
  p.head.ln_g = Mat::Ones(1, l);
  p.head.ln_b = Mat::Zero(1, l);
  p.head.w_out = xavier(rng, l, static_cast<Eigen::Index>(cfg.n_classes));
  p.head.b_out = Mat::Zero(1, static_cast<Eigen::Index>(cfg.n_classes));
  return p;
}

// ------------------------------------------------------------ topology

Topology topology_from(const CompGraph& g, MaskMode mode) {
  Topology t;
  t.low = {mask_forward(g.low, mode), mask_backward(g.low, mode)};
  t.up = {mask_forward(g.up, mode), mask_backward(g.up, mode)};
  t.agg.assign(g.up.nodes.size(), {});
  for (std::size_t n = 0; n < g.membership.size() && n < t.agg.size(); ++n) t.agg[n] = g.membership[n];
  return t;
}

// ------------------------------------------------------------ attention

AttnOut bmsa(const Mat& f, const AttnParams& p, const Mask& mask_a, const Mask& mask_b, AttnCache* cache) {
  p.check(static_cast<std::size_t>(f.cols()));
  check_mask(mask_a, f.rows(), "bmsa");
  check_mask(mask_b, f.rows(), "bmsa");
  const std::size_t H = p.n_head(), G = p.n_kv();
  const auto d = static_cast<Eigen::Index>(p.d_head());
  std::vector<Mat> q(H), k(G), v(G);
  for (std::size_t h = 0; h < H; ++h) q[h] = f * p.w_q[h];
  for (std::size_t g = 0; g < G; ++g) {
    k[g] = f * p.w_k[g];
    v[g] = f * p.w_v[g];
  }
  Mat o_a(f.rows(), static_cast<Eigen::Index>(H) * d), o_b(f.rows(), static_cast<Eigen::Index>(H) * d);
  if (cache) {
    cache->a_a.assign(H, Mat());
    cache->a_b.assign(H, Mat());
  }
  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t g = p.group_of(h);
    const Mat c = scores(q[h], k[g]);
    Mat a = masked_softmax(c, mask_a);
    Mat b = masked_softmax(c, mask_b);
    o_a.middleCols(static_cast<Eigen::Index>(h) * d, d) = a * v[g];
    o_b.middleCols(static_cast<Eigen::Index>(h) * d, d) = b * v[g];
    if (cache) {
      cache->a_a[h] = std::move(a);
      cache->a_b[h] = std::move(b);
    }
  }
  AttnOut out{o_a * p.w_o, o_b * p.w_o};
  if (cache) {
    cache->x = f;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o_a = std::move(o_a);
    cache->o_b = std::move(o_b);
  }
  return out;
}

Mat mhsa(const Mat& f, const AttnParams& p, const Mask& mask) {
  p.check(static_cast<std::size_t>(f.cols()));
  require(p.n_kv() == p.n_head(), "mhsa: needs one key/value set per head");
  check_mask(mask, f.rows(), "mhsa");
  const auto d = static_cast<Eigen::Index>(p.d_head());
  Mat o(f.rows(), static_cast<Eigen::Index>(p.n_head()) * d);
  for (std::size_t h = 0; h < p.n_head(); ++h)
    attend(f * p.w_q[h], f * p.w_k[h], f * p.w_v[h], mask, o, static_cast<Eigen::Index>(h) * d, nullptr);
  return o * p.w_o;
}

Mat mqsa(const Mat& f, const AttnParams& p, const Mask& mask) {
  p.check(static_cast<std::size_t>(f.cols()));
  require(p.n_kv() == 1, "mqsa: needs exactly one shared key/value set");
  check_mask(mask, f.rows(), "mqsa");
  const auto d = static_cast<Eigen::Index>(p.d_head());
  const Mat k = f * p.w_k[0];
  const Mat v = f * p.w_v[0];
  Mat o(f.rows(), static_cast<Eigen::Index>(p.n_head()) * d);
  for (std::size_t h = 0; h < p.n_head(); ++h) attend(f * p.w_q[h], k, v, mask, o, static_cast<Eigen::Index>(h) * d, nullptr);
  return o * p.w_o;
}

Mat gmqsa(const Mat& f, const AttnParams& p, const Mask& mask, std::size_t n_query) {
  require(n_query >= 1 && p.n_head() % n_query == 0,
          "gmqsa: n_query " + std::to_string(n_query) + " does not divide n_head " + std::to_string(p.n_head()));
  require(p.n_kv() == n_query, "gmqsa: parameters hold " + std::to_string(p.n_kv()) + " key/value sets, expected " +
                                   std::to_string(n_query));
  p.check(static_cast<std::size_t>(f.cols()));
  check_mask(mask, f.rows(), "gmqsa");
  const auto d = static_cast<Eigen::Index>(p.d_head());
  std::vector<Mat> k(n_query), v(n_query);
  for (std::size_t g = 0; g < n_query; ++g) {
    k[g] = f * p.w_k[g];
    v[g] = f * p.w_v[g];
  }
  Mat o(f.rows(), static_cast<Eigen::Index>(p.n_head()) * d);
  for (std::size_t h = 0; h < p.n_head(); ++h) {
    const std::size_t g = p.group_of(h);
    attend(f * p.w_q[h], k[g], v[g], mask, o, static_cast<Eigen::Index>(h) * d, nullptr);
  }
  return o * p.w_o;
}

// ------------------------------------------------------------ blocks

Mat layer_norm(const Mat& x, const Mat& g, const Mat& b, LnCache* cache) {
  require(g.cols() == x.cols() && b.cols() == x.cols(), "layer_norm: gain/bias width differs from input " + shape(x));
  const double n = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).sum() / n;
    const double var = (x.row(i).array() - mu).square().sum() / n;
    rstd(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
  }
  Mat y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Mat gan_block(const Mat& f, const GanBlockParams& p, const LevelTopology& t, GanCache* cache) {
  require(p.w1.rows() == f.cols(), "gan_block: input " + shape(f) + " does not match model width " +
                                       std::to_string(p.w1.rows()));
  const AttnOut att = bmsa(f, p.attn, t.a, t.b, cache ? &cache->attn : nullptr);
  const Mat s1 = f + att.f_a + att.f_b;
  Mat f1 = layer_norm(s1, p.ln1_g, p.ln1_b, cache ? &cache->ln1 : nullptr);
  Mat z1 = (f1 * p.w1).rowwise() + p.b1.row(0);
  Mat h = z1.cwiseMax(0.0);
  const Mat s2 = f1 + ((h * p.w2).rowwise() + p.b2.row(0));
  Mat out = layer_norm(s2, p.ln2_g, p.ln2_b, cache ? &cache->ln2 : nullptr);
  if (cache) {
    cache->f1 = std::move(f1);
    cache->z1 = std::move(z1);
    cache->h = std::move(h);
  }
  return out;
}

LevelPair bgan_block(const Mat& f_low, const Mat& f_up, const BganBlockParams& p, const Topology& t, bool share_levels,
                     BlockCache* cache) {
  require(t.low.a.rows() == f_low.rows(), "bgan_block: low rows " + std::to_string(f_low.rows()) +
                                              " differ from low topology size " + std::to_string(t.low.a.rows()));
  require(t.up.a.rows() == f_up.rows(), "bgan_block: up rows " + std::to_string(f_up.rows()) +
                                            " differ from up topology size " + std::to_string(t.up.a.rows()));
  require(t.agg.size() == static_cast<std::size_t>(f_up.rows()), "bgan_block: aggregation groups differ from up rows");
  require(f_low.cols() == f_up.cols(), "bgan_block: low and up widths differ");

  Mat low_out = f_low.rows() > 0 ? gan_block(f_low, p.low, t.low, cache ? &cache->low : nullptr) : f_low;
  Mat agg = Mat::Zero(f_up.rows(), f_up.cols());
  for (std::size_t r = 0; r < t.agg.size(); ++r) {
    const auto& members = t.agg[r];
    if (members.empty()) continue;
    for (std::size_t c : members) {
      require(c < static_cast<std::size_t>(low_out.rows()), "bgan_block: aggregation member out of range");
      agg.row(static_cast<Eigen::Index>(r)) += low_out.row(static_cast<Eigen::Index>(c));
    }
    agg.row(static_cast<Eigen::Index>(r)) /= static_cast<double>(members.size());
  }
  const Mat up_in = f_up + agg * p.w_agg;
  const GanBlockParams& up_params = share_levels ? p.low : p.up;
  Mat up_out = f_up.rows() > 0 ? gan_block(up_in, up_params, t.up, cache ? &cache->up : nullptr) : up_in;
  if (cache) {
    cache->low_out = low_out;
    cache->agg = std::move(agg);
  }
  return {std::move(low_out), std::move(up_out)};
}

Mat head_forward(const Mat& f, const HeadParams& p, HeadCache* cache) {
  LnCache ln;
  const Mat y = layer_norm(f, p.ln_g, p.ln_b, &ln);
  Mat z = (y * p.w_out).rowwise() + p.b_out.row(0);
  Mat probs(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp();
    probs.row(i) /= probs.row(i).sum();
  }
  if (cache) {
    cache->x = f;
    cache->ln = std::move(ln);
    cache->probs = probs;
  }
  return probs;
}

ModelOutput model_forward(const ModelParams& p, const Mat& f_low, const Mat& f_up, const Topology& t,
                          const ModelConfig& cfg, HeadTarget target, ModelCache* cache) {
  require(!p.blocks.empty(), "model_forward: needs >= 1 block");
  if (cache) {
    cache->blocks.assign(p.blocks.size(), BlockCache{});
    cache->agg = t.agg;
  }
  Mat low = f_low, up = f_up;
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    LevelPair next = bgan_block(low, up, p.blocks[b], t, cfg.share_levels, cache ? &cache->blocks[b] : nullptr);
    low = std::move(next.low);
    up = std::move(next.up);
  }
  ModelOutput out;
  Mat head_in;
  switch (target) {
    case HeadTarget::up: head_in = up; break;
    case HeadTarget::low: head_in = low; break;
    case HeadTarget::both:
      head_in.resize(low.rows() + up.rows(), low.cols());
      head_in << low, up;
      break;
  }
  out.probs = head_forward(head_in, p.head, cache ? &cache->head : nullptr);
  out.low = std::move(low);
  out.up = std::move(up);
  return out;
}

std::vector<AttnRecord> attention_trace(const ModelCache& cache) {
  std::vector<AttnRecord> out;
  for (std::size_t b = 0; b < cache.blocks.size(); ++b) {
    for (const auto& [name, gc] : {std::pair<const char*, const GanCache*>{"low", &cache.blocks[b].low},
                                   std::pair<const char*, const GanCache*>{"up", &cache.blocks[b].up}}) {
      for (std::size_t h = 0; h < gc->attn.a_a.size(); ++h) {
        out.push_back({b, name, h, 'A', gc->attn.a_a[h]});
        out.push_back({b, name, h, 'B', gc->attn.a_b[h]});
      }
    }
  }
  return out;
}

}  // namespace bganlab::bgan
