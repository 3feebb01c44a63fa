#pragma once

// Central finite differences over every parameter and input element of the
// attention model, against model_backward.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bganlab/bgan.hpp"

namespace bganlab::testsupport {

struct GradCheckResult {
  std::size_t checked = 0;
  /// Entries whose +h / -h evaluations straddle a ReLU kink; the function is
  /// not differentiable across that interval and they are not compared.
  std::size_t kinks = 0;
  double worst = 0.0;
  std::string worst_name;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckInput {
  bgan::Mat f_low, f_up;
  bgan::Topology topo;
  bgan::ModelConfig cfg;
  bgan::HeadTarget target = bgan::HeadTarget::both;
  // Loss = sum(w_low * low) + sum(w_up * up) + sum(w_probs * probs).
  bgan::Mat w_low, w_up, w_probs;
};

namespace detail {

inline double loss_of(const bgan::ModelOutput& o, const GradCheckInput& in) {
  return (o.low.array() * in.w_low.array()).sum() + (o.up.array() * in.w_up.array()).sum() +
         (o.probs.array() * in.w_probs.array()).sum();
}

inline std::vector<bool> relu_pattern(const bgan::ModelCache& c) {
  std::vector<bool> out;
  for (const auto& b : c.blocks)
    for (const bgan::GanCache* g : {&b.low, &b.up})
      for (Eigen::Index i = 0; i < g->z1.size(); ++i) out.push_back(g->z1.data()[i] > 0.0);
  return out;
}

struct Eval {
  double loss;
  std::vector<bool> pattern;
};

inline Eval evaluate(const bgan::ModelParams& p, const bgan::Mat& low, const bgan::Mat& up, const GradCheckInput& in) {
  bgan::ModelCache c;
  const bgan::ModelOutput o = bgan::model_forward(p, low, up, in.topo, in.cfg, in.target, &c);
  return {loss_of(o, in), relu_pattern(c)};
}

}  // namespace detail

/// Relative error |a - n| / max(|a|, |n|, floor).
inline GradCheckResult check_gradients(bgan::ModelParams p, const GradCheckInput& in, double h, double floor) {
  bgan::ModelCache cache;
  bgan::model_forward(p, in.f_low, in.f_up, in.topo, in.cfg, in.target, &cache);
  const bgan::ModelGrads g = bgan::model_backward(p, cache, in.cfg, in.target, in.w_low, in.w_up, in.w_probs);
  std::vector<const bgan::Mat*> grads;
  g.params.visit([&](const std::string&, const bgan::Mat& m) { grads.push_back(&m); });

  GradCheckResult res;
  auto compare = [&](double analytic, const detail::Eval& plus, const detail::Eval& minus, const std::string& name) {
    if (plus.pattern != minus.pattern) {
      ++res.kinks;
      return;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * h);
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++res.checked;
    if (err > res.worst) {
      res.worst = err;
      res.worst_name = name;
      res.worst_analytic = analytic;
      res.worst_numeric = numeric;
    }
  };

  std::vector<std::pair<std::string, bgan::Mat*>> tensors;
  p.visit([&](const std::string& name, bgan::Mat& m) { tensors.emplace_back(name, &m); });
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    bgan::Mat& m = *tensors[t].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + h;
      const detail::Eval plus = detail::evaluate(p, in.f_low, in.f_up, in);
      m.data()[i] = orig - h;
      const detail::Eval minus = detail::evaluate(p, in.f_low, in.f_up, in);
      m.data()[i] = orig;
      compare(grads[t]->data()[i], plus, minus, tensors[t].first + "[" + std::to_string(i) + "]");
    }
  }

  bgan::Mat low = in.f_low, up = in.f_up;
  for (auto [x, grad, label] : {std::tuple<bgan::Mat*, const bgan::Mat*, const char*>{&low, &g.d_low, "input.low"},
                                std::tuple<bgan::Mat*, const bgan::Mat*, const char*>{&up, &g.d_up, "input.up"}}) {
    for (Eigen::Index i = 0; i < x->size(); ++i) {
      const double orig = x->data()[i];
      x->data()[i] = orig + h;
      const detail::Eval plus = detail::evaluate(p, low, up, in);
      x->data()[i] = orig - h;
      const detail::Eval minus = detail::evaluate(p, low, up, in);
      x->data()[i] = orig;
      compare(grad->data()[i], plus, minus, std::string(label) + "[" + std::to_string(i) + "]");
    }
  }
  return res;
}

}  // namespace bganlab::testsupport
