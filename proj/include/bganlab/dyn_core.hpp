#pragma once

// Neuron, synapse and plasticity dynamics with deterministic fixed-step
// integration.
//
// Units throughout: time ms, voltage mV, specific capacitance uF/cm^2,
// conductance densities mS/cm^2, current densities uA/cm^2. Synaptic and
// gap-junction quantities are absolute: conductance uS (synapse) or nS (gap
// junction), current nA. Axial resistance is in MOhm, geometry in um.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bganlab::dyn {

/// Squid-axon membrane parameters (classical values by default).
struct HhParams {
  double c_m = 1.0;
  double gbar_na = 120.0;
  double gbar_k = 36.0;
  double gbar_leak = 0.3;
  double e_na = 50.0;
  double e_k = -77.0;
  double e_leak = -54.387;

  void validate() const;
  bool operator==(const HhParams&) const = default;
};

/// Membrane potential plus the Na activation (p_na), Na inactivation (q_na)
/// and K activation (p_k) gates.
struct HhState {
  double v_m = -65.0;
  double p_na = 0.0;
  double q_na = 0.0;
  double p_k = 0.0;

  bool operator==(const HhState&) const = default;
};

struct GatingRates {
  double alpha_m, beta_m;  // p_na
  double alpha_h, beta_h;  // q_na
  double alpha_n, beta_n;  // p_k
};

/// Opening/closing rates (1/ms) of the three gates at voltage v.
GatingRates gating_rates(double v);

/// State at voltage v with every gate at its steady state alpha/(alpha+beta).
HhState hh_steady_state(double v);

/// Total ionic current density (uA/cm^2), outward positive.
double hh_ionic_current(const HhState& s, const HhParams& p);

/// Advances the point HH membrane by dt under a constant injected current
/// density, using classical RK4 on equal substeps of at most 0.025 ms. Gates
/// are clamped to [0, 1] after each substep. Throws ParamError if dt <= 0.
HhState step_hh(const HhState& s, const HhParams& p, double i_inj, double dt);

struct LifParams {
  double c_m = 1.0;
  double gbar_leak = 0.05;  // tau_m = c_m / gbar_leak = 20 ms
  double e_leak = -65.0;
  double v_thresh = -50.0;
  double v_reset = -70.0;
  /// Absolute refractory period (ms) applied by the network simulator: the
  /// membrane is held at v_reset for this long after a spike.
  double t_ref = 0.0;

  double tau_m() const { return c_m / gbar_leak; }
  void validate() const;
  bool operator==(const LifParams&) const = default;
};

struct LifState {
  double v_m = -65.0;
};

struct LifStep {
  LifState state;
  bool spiked = false;
};

/// Exact exponential relaxation toward e_leak + i_total/gbar_leak over dt,
/// followed by threshold/reset.
LifStep step_lif(LifState s, const LifParams& p, double i_total, double dt);

/// Double-exponential synapse.
struct SynParams {
  double g_max = 0.005;  // uS
  double tau_rise = 0.5;
  double tau_decay = 5.0;
  double e_syn = 0.0;

  void validate() const;
  bool operator==(const SynParams&) const = default;
};

/// Two exponential accumulators; conductance is g_max * (b_decay - a_rise).
/// A single spike at t0 reproduces g_max * (exp(-(t-t0)/tau_decay) -
/// exp(-(t-t0)/tau_rise)); spike trains superpose linearly.
struct SynState {
  double a_rise = 0.0;
  double b_decay = 0.0;
};

SynState syn_on_spike(SynState s);
SynState syn_step(SynState s, const SynParams& p, double dt);
double syn_conductance(SynState s, double g_max);

/// Synaptic current in nA for a conductance in uS.
double syn_current(double g_syn, double v_m, double e_syn);

/// Time of the conductance maximum after a single spike, and its value as a
/// fraction of g_max.
double syn_peak_time(const SynParams& p);
double syn_peak_fraction(const SynParams& p);

struct GapJunctionParams {
  double g_j = 1.0;      // nS
  double g_uninj = 3.0;  // nS

  bool operator==(const GapJunctionParams&) const = default;
};

/// g_j / (g_j + g_uninj). Throws ParamError if g_uninj <= 0 or g_j < 0.
double coupling_coefficient(const GapJunctionParams& p);

enum class CompartmentKind { dendrite, soma, axon };
enum class MembraneKind { hh, passive };

/// One R-C segment. A passive membrane uses only c_m, gbar_leak and e_leak of
/// the parameter block.
struct Compartment {
  CompartmentKind kind = CompartmentKind::soma;
  MembraneKind membrane = MembraneKind::hh;
  HhParams params;
  double length_um = 20.0;
  double width_um = 20.0;
  std::array<double, 3> position_um{0.0, 0.0, 0.0};

  /// Lateral cylinder area, cm^2.
  double area_cm2() const;
  bool operator==(const Compartment&) const = default;
};

/// Unbranched cable: dendrite* -> soma -> axon*, adjacent compartments
/// coupled through r_a.
struct CompartmentChain {
  std::vector<Compartment> compartments;
  double r_a = 150.0;  // MOhm

  std::size_t size() const { return compartments.size(); }
  std::size_t soma_index() const;
  /// Violations of the chain invariants (empty when valid).
  std::vector<std::string> violations() const;
  void validate() const;
  bool operator==(const CompartmentChain&) const = default;
};

/// Converts a current in nA into a density (uA/cm^2) over the given area.
inline double na_to_density(double current_na, double area_cm2) { return current_na * 1e-3 / area_cm2; }

/// Membrane current (uA/cm^2, outward positive) of one compartment.
double membrane_current(const Compartment& c, const HhState& s);

/// Advances the whole chain jointly by dt (RK4, same substeps as step_hh). `injections` are current densities
/// (uA/cm^2) per compartment, held constant over the step.
std::vector<HhState> step_chain(const CompartmentChain& chain, std::span<const HhState> states,
                                std::span<const double> injections, double dt);

enum class StdpPairing { nearest, all_pairs };

struct StdpParams {
  double a_plus = 0.01;
  double a_minus = 0.012;
  double tau_plus = 20.0;
  double tau_minus = 20.0;
  double w_min = 0.0;
  double w_max = 2.0;
  StdpPairing pairing = StdpPairing::nearest;

  void validate() const;
  bool operator==(const StdpParams&) const = default;
};

/// Pair-based exponential window for delta_t = t_post - t_pre.
double stdp_delta(double delta_t, const StdpParams& p);

double clip_weight(double w, const StdpParams& p);

/// Online STDP bookkeeping for one synapse. Pre times are arrival times at the
/// synapse. Nearest-neighbour pairing pairs each event with the most recent
/// event of the other side; all-pairs pairing sums over the whole history.
class StdpSynapse {
 public:
  explicit StdpSynapse(const StdpParams& p) : params_(p) {}

  /// Applies the depression due to a presynaptic arrival at t; returns the
  /// clipped weight.
  double on_pre(double t, double w);
  /// Applies the potentiation due to a postsynaptic spike at t.
  double on_post(double t, double w);

 private:
  StdpParams params_;
  std::optional<double> last_pre_;
  std::optional<double> last_post_;
  // all-pairs traces, valid at last_pre_/last_post_ respectively
  double pre_trace_ = 0.0;
  double post_trace_ = 0.0;
};

}  // namespace bganlab::dyn
