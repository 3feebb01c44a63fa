// Hand-derived reverse pass for bgan.cpp. Every function mirrors a forward
// routine and consumes its cache.

#include <cmath>

#include "bganlab/bgan.hpp"
#include "bganlab/error.hpp"

namespace bganlab::bgan {

namespace {

Mat col_sum(const Mat& m) { return m.colwise().sum(); }

// y = g * xhat + b, xhat = (x - mean) * rstd per row.
Mat layer_norm_backward(const Mat& dy, const LnCache& c, const Mat& g, Mat& dg, Mat& db) {
  dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db += col_sum(dy);
  const Mat dxhat = dy.array().rowwise() * g.row(0).array();
  const double n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double s1 = dxhat.row(i).sum();
    const double s2 = dxhat.row(i).dot(c.xhat.row(i));
    dx.row(i) = (c.rstd(i) / n) * (n * dxhat.row(i).array() - s1 - c.xhat.row(i).array() * s2);
  }
  return dx;
}

// Softmax Jacobian applied row-wise; masked entries have a = 0 and get 0.
Mat softmax_backward(const Mat& a, const Mat& da) {
  const Eigen::VectorXd dot = (a.array() * da.array()).rowwise().sum();
  return a.array() * (da.colwise() - dot).array();
}

Mat bmsa_backward(const AttnCache& c, const AttnParams& p, const Mat& df_a, const Mat& df_b, AttnParams& g) {
  const std::size_t H = p.n_head(), G = p.n_kv();
  const auto d = static_cast<Eigen::Index>(p.d_head());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  g.w_o += c.o_a.transpose() * df_a + c.o_b.transpose() * df_b;
  const Mat do_a = df_a * p.w_o.transpose();
  const Mat do_b = df_b * p.w_o.transpose();

  std::vector<Mat> dk(G, Mat::Zero(c.x.rows(), d)), dv(G, Mat::Zero(c.x.rows(), d));
  Mat dx = Mat::Zero(c.x.rows(), c.x.cols());
  for (std::size_t h = 0; h < H; ++h) {
    const std::size_t grp = p.group_of(h);
    const auto col = static_cast<Eigen::Index>(h) * d;
    const Mat doa = do_a.middleCols(col, d);
    const Mat dob = do_b.middleCols(col, d);
    dv[grp] += c.a_a[h].transpose() * doa + c.a_b[h].transpose() * dob;
    const Mat dc = softmax_backward(c.a_a[h], doa * c.v[grp].transpose()) +
                   softmax_backward(c.a_b[h], dob * c.v[grp].transpose());
    const Mat dq = dc * c.k[grp] * inv_sqrt_d;
    dk[grp] += dc.transpose() * c.q[h] * inv_sqrt_d;
    g.w_q[h] += c.x.transpose() * dq;
    dx += dq * p.w_q[h].transpose();
  }
  for (std::size_t grp = 0; grp < G; ++grp) {
    g.w_k[grp] += c.x.transpose() * dk[grp];
    g.w_v[grp] += c.x.transpose() * dv[grp];
    dx += dk[grp] * p.w_k[grp].transpose() + dv[grp] * p.w_v[grp].transpose();
  }
  return dx;
}

Mat gan_backward(const GanCache& c, const GanBlockParams& p, const Mat& dout, GanBlockParams& g) {
  const Mat ds2 = layer_norm_backward(dout, c.ln2, p.ln2_g, g.ln2_g, g.ln2_b);
  g.w2 += c.h.transpose() * ds2;
  g.b2 += col_sum(ds2);
  const Mat dz1 = (ds2 * p.w2.transpose()).array() * (c.z1.array() > 0.0).cast<double>();
  g.w1 += c.f1.transpose() * dz1;
  g.b1 += col_sum(dz1);
  const Mat df1 = ds2 + dz1 * p.w1.transpose();
  const Mat ds1 = layer_norm_backward(df1, c.ln1, p.ln1_g, g.ln1_g, g.ln1_b);
  // s1 = f + f_a + f_b
  return ds1 + bmsa_backward(c.attn, p.attn, ds1, ds1, g.attn);
}

Mat head_backward(const HeadCache& c, const HeadParams& p, const Mat& dprobs, HeadParams& g) {
  const Mat dz = softmax_backward(c.probs, dprobs);
  const Mat y = (c.ln.xhat.array().rowwise() * p.ln_g.row(0).array()).rowwise() + p.ln_b.row(0).array();
  g.w_out += y.transpose() * dz;
  g.b_out += col_sum(dz);
  return layer_norm_backward(dz * p.w_out.transpose(), c.ln, p.ln_g, g.ln_g, g.ln_b);
}

Mat or_zero(const Mat& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.size() == 0) return Mat::Zero(rows, cols);
  if (m.rows() != rows || m.cols() != cols)
    throw ParamError("model_backward: upstream gradient is " + std::to_string(m.rows()) + " x " +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + " x " + std::to_string(cols));
  return m;
}

}  // namespace

ModelGrads model_backward(const ModelParams& p, const ModelCache& cache, const ModelConfig& cfg, HeadTarget target,
                          const Mat& d_low, const Mat& d_up, const Mat& d_probs) {
  if (cache.blocks.size() != p.blocks.size()) throw ParamError("model_backward: cache does not match parameters");
  ModelGrads out;
  out.params = p.zeros_like();
  const BlockCache& last = cache.blocks.back();
  const Eigen::Index l = last.low_out.cols();
  const Eigen::Index n_low = last.low_out.rows();
  const Eigen::Index n_up = static_cast<Eigen::Index>(last.agg.rows());

  Mat g_low = or_zero(d_low, n_low, l);
  Mat g_up = or_zero(d_up, n_up, l);

  if (d_probs.size() != 0) {
    const Mat dprobs = or_zero(d_probs, cache.head.probs.rows(), cache.head.probs.cols());
    const Mat dhead = head_backward(cache.head, p.head, dprobs, out.params.head);
    switch (target) {
      case HeadTarget::up: g_up += dhead; break;
      case HeadTarget::low: g_low += dhead; break;
      case HeadTarget::both:
        g_low += dhead.topRows(n_low);
        g_up += dhead.bottomRows(n_up);
        break;
    }
  }

  for (std::size_t b = p.blocks.size(); b-- > 0;) {
    const BlockCache& c = cache.blocks[b];
    const BganBlockParams& bp = p.blocks[b];
    BganBlockParams& bg = out.params.blocks[b];
    // up_out = gan_up(f_up + agg * w_agg)
    Mat d_up_in = g_up;
    if (n_up > 0) {
      const GanBlockParams& up_p = cfg.share_levels ? bp.low : bp.up;
      GanBlockParams& up_g = cfg.share_levels ? bg.low : bg.up;
      d_up_in = gan_backward(c.up, up_p, g_up, up_g);
    }
    bg.w_agg += c.agg.transpose() * d_up_in;
    const Mat d_agg = d_up_in * bp.w_agg.transpose();
    Mat d_low_out = g_low;
    for (Eigen::Index r = 0; r < n_up; ++r) {
      const auto& members = cache.agg[static_cast<std::size_t>(r)];
      if (members.empty()) continue;
      const double w = 1.0 / static_cast<double>(members.size());
      for (std::size_t m : members) d_low_out.row(static_cast<Eigen::Index>(m)) += w * d_agg.row(r);
    }
    g_low = n_low > 0 ? gan_backward(c.low, bp.low, d_low_out, bg.low) : d_low_out;
    g_up = d_up_in;
  }
  out.d_low = std::move(g_low);
  out.d_up = std::move(g_up);
  return out;
}

}  // namespace bganlab::bgan
