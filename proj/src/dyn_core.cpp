#include "bganlab/dyn_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bganlab/error.hpp"

namespace bganlab::dyn {

namespace {

/// x / (1 - exp(-x)) with its removable singularity at x = 0.
double exprel_ratio(double x) {
  if (std::abs(x) < 1e-7) return 1.0 + 0.5 * x;
  return x / -std::expm1(-x);
}

void require_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("dt must be positive and finite");
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Classical RK4 leaves its stability region on the spike downstroke at
// dt = 0.1 ms (|lambda*dt| ~ 4), so each step is split into equal substeps.
constexpr double kMaxSubstep = 0.025;

int substeps(double dt) { return std::max(1, static_cast<int>(std::ceil(dt / kMaxSubstep - 1e-9))); }

struct HhDeriv {
  double dv, dm, dh, dn;
};

HhDeriv gate_derivs(const HhState& s) {
  const GatingRates r = gating_rates(s.v_m);
  return {0.0,
          r.alpha_m * (1.0 - s.p_na) - r.beta_m * s.p_na,
          r.alpha_h * (1.0 - s.q_na) - r.beta_h * s.q_na,
          r.alpha_n * (1.0 - s.p_k) - r.beta_n * s.p_k};
}

HhState axpy(const HhState& s, const HhDeriv& d, double h) {
  return {s.v_m + h * d.dv, s.p_na + h * d.dm, s.q_na + h * d.dh, s.p_k + h * d.dn};
}

}  // namespace

void HhParams::validate() const {
  if (!(c_m > 0.0)) throw ParamError("HhParams: c_m must be > 0");
  if (gbar_na < 0.0 || gbar_k < 0.0 || gbar_leak < 0.0)
    throw ParamError("HhParams: maximal conductances must be >= 0");
}

GatingRates gating_rates(double v) {
  GatingRates r{};
  r.alpha_m = exprel_ratio((v + 40.0) / 10.0);
  r.beta_m = 4.0 * std::exp(-(v + 65.0) / 18.0);
  r.alpha_h = 0.07 * std::exp(-(v + 65.0) / 20.0);
  r.beta_h = 1.0 / (1.0 + std::exp(-(v + 35.0) / 10.0));
  r.alpha_n = 0.1 * exprel_ratio((v + 55.0) / 10.0);
  r.beta_n = 0.125 * std::exp(-(v + 65.0) / 80.0);
  return r;
}

HhState hh_steady_state(double v) {
  const GatingRates r = gating_rates(v);
  return {v, r.alpha_m / (r.alpha_m + r.beta_m), r.alpha_h / (r.alpha_h + r.beta_h),
          r.alpha_n / (r.alpha_n + r.beta_n)};
}

double hh_ionic_current(const HhState& s, const HhParams& p) {
  const double m3h = s.p_na * s.p_na * s.p_na * s.q_na;
  const double n2 = s.p_k * s.p_k;
  return p.gbar_na * m3h * (s.v_m - p.e_na) + p.gbar_k * n2 * n2 * (s.v_m - p.e_k) +
         p.gbar_leak * (s.v_m - p.e_leak);
}

HhState step_hh(const HhState& s, const HhParams& p, double i_inj, double dt) {
  require_dt(dt);
  auto f = [&](const HhState& x) {
    HhDeriv d = gate_derivs(x);
    d.dv = (-hh_ionic_current(x, p) + i_inj) / p.c_m;
    return d;
  };
  const int n = substeps(dt);
  const double h = dt / n;
  HhState out = s;
  for (int k = 0; k < n; ++k) {
    const HhDeriv k1 = f(out);
    const HhDeriv k2 = f(axpy(out, k1, 0.5 * h));
    const HhDeriv k3 = f(axpy(out, k2, 0.5 * h));
    const HhDeriv k4 = f(axpy(out, k3, h));
    const double w = h / 6.0;
    out = {out.v_m + w * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv),
           clamp01(out.p_na + w * (k1.dm + 2 * k2.dm + 2 * k3.dm + k4.dm)),
           clamp01(out.q_na + w * (k1.dh + 2 * k2.dh + 2 * k3.dh + k4.dh)),
           clamp01(out.p_k + w * (k1.dn + 2 * k2.dn + 2 * k3.dn + k4.dn))};
  }
  return out;
}

void LifParams::validate() const {
  if (!(c_m > 0.0)) throw ParamError("LifParams: c_m must be > 0");
  if (!(gbar_leak > 0.0)) throw ParamError("LifParams: gbar_leak must be > 0");
  if (!(v_reset < v_thresh)) throw ParamError("LifParams: v_reset must be < v_thresh");
  if (!(t_ref >= 0.0)) throw ParamError("LifParams: t_ref must be >= 0");
}

LifStep step_lif(LifState s, const LifParams& p, double i_total, double dt) {
  require_dt(dt);
  const double v_inf = p.e_leak + i_total / p.gbar_leak;
  const double decay = std::exp(-dt / p.tau_m());
  LifStep out{{v_inf + (s.v_m - v_inf) * decay}, false};
  if (out.state.v_m > p.v_thresh) {
    out.state.v_m = p.v_reset;
    out.spiked = true;
  }
  return out;
}

void SynParams::validate() const {
  if (!(tau_rise > 0.0) || !(tau_rise < tau_decay))
    throw ParamError("SynParams: require 0 < tau_rise < tau_decay");
  if (g_max < 0.0) throw ParamError("SynParams: g_max must be >= 0");
}

SynState syn_on_spike(SynState s) { return {s.a_rise + 1.0, s.b_decay + 1.0}; }

SynState syn_step(SynState s, const SynParams& p, double dt) {
  require_dt(dt);
  return {s.a_rise * std::exp(-dt / p.tau_rise), s.b_decay * std::exp(-dt / p.tau_decay)};
}

double syn_conductance(SynState s, double g_max) { return g_max * (s.b_decay - s.a_rise); }

double syn_current(double g_syn, double v_m, double e_syn) { return g_syn * (v_m - e_syn); }

double syn_peak_time(const SynParams& p) {
  const double td = p.tau_decay, tr = p.tau_rise;
  return td * tr / (td - tr) * std::log(td / tr);
}

double syn_peak_fraction(const SynParams& p) {
  const double t = syn_peak_time(p);
  return std::exp(-t / p.tau_decay) - std::exp(-t / p.tau_rise);
}

double coupling_coefficient(const GapJunctionParams& p) {
  if (!(p.g_uninj > 0.0)) throw ParamError("coupling_coefficient: g_uninj must be > 0");
  if (p.g_j < 0.0) throw ParamError("coupling_coefficient: g_j must be >= 0");
  return p.g_j / (p.g_j + p.g_uninj);
}

double Compartment::area_cm2() const {
  return std::numbers::pi * length_um * width_um * 1e-8;
}

std::size_t CompartmentChain::soma_index() const {
  for (std::size_t i = 0; i < compartments.size(); ++i)
    if (compartments[i].kind == CompartmentKind::soma) return i;
  throw ParamError("CompartmentChain: no soma");
}

std::vector<std::string> CompartmentChain::violations() const {
  std::vector<std::string> out;
  if (compartments.empty()) {
    out.push_back("chain has no compartments");
    return out;
  }
  std::size_t somas = 0;
  int stage = 0;  // 0 dendrites, 1 soma seen, 2 axons
  for (std::size_t i = 0; i < compartments.size(); ++i) {
    const auto& c = compartments[i];
    const int rank = c.kind == CompartmentKind::dendrite ? 0 : c.kind == CompartmentKind::soma ? 1 : 2;
    if (c.kind == CompartmentKind::soma) ++somas;
    if (rank < stage || (rank == 1 && stage == 1))
      out.push_back("compartment " + std::to_string(i) + " breaks dendrite*->soma->axon* order");
    stage = std::max(stage, rank);
    if (!(c.length_um > 0.0) || !(c.width_um > 0.0))
      out.push_back("compartment " + std::to_string(i) + " has non-positive geometry");
    if (!(c.params.c_m > 0.0) || c.params.gbar_leak < 0.0 || c.params.gbar_na < 0.0 || c.params.gbar_k < 0.0)
      out.push_back("compartment " + std::to_string(i) + " has invalid membrane parameters");
  }
  if (somas != 1) out.push_back("chain has " + std::to_string(somas) + " somas, expected exactly 1");
  if (compartments.size() > 1 && !(r_a > 0.0)) out.push_back("axial resistance r_a must be > 0");
  return out;
}

void CompartmentChain::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

double membrane_current(const Compartment& c, const HhState& s) {
  if (c.membrane == MembraneKind::passive) return c.params.gbar_leak * (s.v_m - c.params.e_leak);
  return hh_ionic_current(s, c.params);
}

std::vector<HhState> step_chain(const CompartmentChain& chain, std::span<const HhState> states,
                                std::span<const double> injections, double dt) {
  require_dt(dt);
  const std::size_t n = chain.size();
  if (states.size() != n || injections.size() != n)
    throw ParamError("step_chain: states/injections length must equal compartment count");

  std::vector<double> area(n);
  for (std::size_t i = 0; i < n; ++i) area[i] = chain.compartments[i].area_cm2();

  auto deriv = [&](const std::vector<HhState>& x) {
    std::vector<HhDeriv> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Compartment& c = chain.compartments[i];
      double axial = 0.0;  // nA
      if (i > 0) axial += (x[i - 1].v_m - x[i].v_m) / chain.r_a;
      if (i + 1 < n) axial += (x[i + 1].v_m - x[i].v_m) / chain.r_a;
      d[i] = c.membrane == MembraneKind::hh ? gate_derivs(x[i]) : HhDeriv{0.0, 0.0, 0.0, 0.0};
      d[i].dv = (-membrane_current(c, x[i]) + injections[i] + na_to_density(axial, area[i])) / c.params.c_m;
    }
    return d;
  };
  auto shifted = [&](const std::vector<HhState>& x, const std::vector<HhDeriv>& d, double h) {
    std::vector<HhState> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = axpy(x[i], d[i], h);
    return y;
  };

  const int steps = substeps(dt);
  const double h = dt / steps;
  std::vector<HhState> x(states.begin(), states.end());
  for (int k = 0; k < steps; ++k) {
    const auto k1 = deriv(x);
    const auto k2 = deriv(shifted(x, k1, 0.5 * h));
    const auto k3 = deriv(shifted(x, k2, 0.5 * h));
    const auto k4 = deriv(shifted(x, k3, h));
    const double w = h / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
      const HhState s = x[i];
      x[i] = {s.v_m + w * (k1[i].dv + 2 * k2[i].dv + 2 * k3[i].dv + k4[i].dv),
              clamp01(s.p_na + w * (k1[i].dm + 2 * k2[i].dm + 2 * k3[i].dm + k4[i].dm)),
              clamp01(s.q_na + w * (k1[i].dh + 2 * k2[i].dh + 2 * k3[i].dh + k4[i].dh)),
              clamp01(s.p_k + w * (k1[i].dn + 2 * k2[i].dn + 2 * k3[i].dn + k4[i].dn))};
    }
  }
  return x;
}

void StdpParams::validate() const {
  if (!(tau_plus > 0.0) || !(tau_minus > 0.0)) throw ParamError("StdpParams: time constants must be > 0");
  if (!(w_min <= w_max)) throw ParamError("StdpParams: require w_min <= w_max");
}

double stdp_delta(double delta_t, const StdpParams& p) {
  if (delta_t > 0.0) return p.a_plus * std::exp(-delta_t / p.tau_plus);
  if (delta_t < 0.0) return -p.a_minus * std::exp(delta_t / p.tau_minus);
  return 0.0;
}

double clip_weight(double w, const StdpParams& p) { return std::clamp(w, p.w_min, p.w_max); }

double StdpSynapse::on_pre(double t, double w) {
  if (params_.pairing == StdpPairing::nearest) {
    if (last_post_) w = clip_weight(w + stdp_delta(*last_post_ - t, params_), params_);
  } else {
    if (last_post_) w = clip_weight(w - params_.a_minus * post_trace_ * std::exp(-(t - *last_post_) / params_.tau_minus), params_);
    const double decayed = last_pre_ ? pre_trace_ * std::exp(-(t - *last_pre_) / params_.tau_plus) : 0.0;
    pre_trace_ = decayed + 1.0;
  }
  last_pre_ = t;
  return w;
}

double StdpSynapse::on_post(double t, double w) {
  if (params_.pairing == StdpPairing::nearest) {
    if (last_pre_) w = clip_weight(w + stdp_delta(t - *last_pre_, params_), params_);
  } else {
    if (last_pre_ && t > *last_pre_)
      w = clip_weight(w + params_.a_plus * pre_trace_ * std::exp(-(t - *last_pre_) / params_.tau_plus), params_);
    const double decayed = last_post_ ? post_trace_ * std::exp(-(t - *last_post_) / params_.tau_minus) : 0.0;
    post_trace_ = decayed + 1.0;
  }
  last_post_ = t;
  return w;
}

}  // namespace bganlab::dyn
