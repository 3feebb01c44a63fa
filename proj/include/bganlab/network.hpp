#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bganlab/canonical_json.hpp"
#include "bganlab/dyn_core.hpp"

namespace bganlab {

enum class NeuronKind { hh, lif, multi };

const char* to_string(NeuronKind k);
const char* to_string(dyn::CompartmentKind k);

/// A neuron is always described by a compartment chain. Point neurons (hh,
/// lif) carry a single soma compartment whose geometry converts absolute
/// synaptic currents to densities; for lif the membrane block is unused and
/// `lif` holds the dynamics.
struct Neuron {
  std::string name;
  NeuronKind kind = NeuronKind::hh;
  dyn::CompartmentChain chain;
  dyn::LifParams lif;

  /// Compartment receiving external (Poisson) input: the first dendrite, or
  /// the soma when the chain has none.
  std::size_t input_compartment() const;
  /// Compartment whose spikes are transmitted: the last axon, or the soma.
  std::size_t output_compartment() const;

  bool operator==(const Neuron&) const = default;
};

struct Synapse {
  std::string name;
  std::size_t pre = 0;
  std::size_t post = 0;
  std::size_t pre_compartment = 0;   // an axon, or the soma of a neuron without one
  std::size_t post_compartment = 0;  // a dendrite, or the soma of a neuron without one
  dyn::SynParams params;
  double weight = 1.0;  // efficacy multiplier on g_max
  double delay_ms = 1.0;

  bool operator==(const Synapse&) const = default;
};

/// Ohmic electrical coupling between two compartments.
struct GapJunction {
  std::size_t neuron_a = 0, compartment_a = 0;
  std::size_t neuron_b = 0, compartment_b = 0;
  dyn::GapJunctionParams params;

  bool operator==(const GapJunction&) const = default;
};

/// Homogeneous Poisson spike source driving one neuron through the network's
/// input synapse.
struct PoissonInput {
  std::size_t neuron = 0;
  double rate_hz = 0.0;
  double weight = 1.0;

  bool operator==(const PoissonInput&) const = default;
};

/// Rectangular current step into the soma.
struct PulseInput {
  std::size_t neuron = 0;
  double delay_ms = 0.0;
  double duration_ms = 0.0;
  double amplitude_na = 0.0;

  bool operator==(const PulseInput&) const = default;
};

struct NetworkModel {
  std::vector<Neuron> neurons;
  std::vector<Synapse> synapses;
  std::vector<GapJunction> gap_junctions;
  std::vector<PoissonInput> poisson_inputs;
  std::vector<PulseInput> pulse_inputs;
  /// Synapse used by every Poisson input.
  dyn::SynParams input_synapse{0.001, 0.5, 5.0, 0.0};
  /// Plasticity rule and weight bounds for every synapse.
  dyn::StdpParams plasticity;

  /// Every violated invariant, each naming the offending ids.
  std::vector<std::string> violations() const;
  /// Throws ValidationError listing all violations.
  void validate() const;

  /// Neurons that no synapse targets.
  std::vector<std::size_t> neurons_without_afferents() const;

  bool operator==(const NetworkModel&) const = default;
};

/// Point HH neuron with default geometry (20 um x 20 um soma).
Neuron make_point_hh(std::string name, const dyn::HhParams& p = {});
/// Point LIF neuron with default geometry.
Neuron make_point_lif(std::string name, const dyn::LifParams& p = {});

/// Native network JSON (full expressiveness, including multi-compartment and
/// HH cells). See README for the schema.
Json network_to_json(const NetworkModel& net);
NetworkModel network_from_json(const Json& j);

}  // namespace bganlab
