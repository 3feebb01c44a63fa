#pragma once

#include "bganlab/cg_repr.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/network.hpp"

namespace bganlab::testsupport {

/// Passive dendrite, HH soma, HH axon.
inline Neuron three_compartment_neuron(const std::string& name, double x) {
  Neuron n;
  n.name = name;
  n.kind = NeuronKind::multi;
  dyn::Compartment d;
  d.kind = dyn::CompartmentKind::dendrite;
  d.membrane = dyn::MembraneKind::passive;
  d.params.gbar_leak = 0.3;
  d.params.e_leak = -65.0;
  d.length_um = 60.0;
  d.width_um = 4.0;
  d.position_um = {x - 40.0, 0.0, 0.0};
  dyn::Compartment s;
  s.position_um = {x, 0.0, 0.0};
  dyn::Compartment a = s;
  a.kind = dyn::CompartmentKind::axon;
  a.length_um = 80.0;
  a.width_um = 2.0;
  a.position_um = {x + 50.0, 0.0, 0.0};
  n.chain.compartments = {d, s, a};
  n.chain.r_a = 150.0;
  return n;
}

/// Two three-compartment neurons and one excitatory synapse from the axon of
/// the first to the dendrite of the second; a current pulse drives the first.
inline NetworkModel two_neuron_fixture() {
  NetworkModel net;
  net.neurons.push_back(three_compartment_neuron("a", 0.0));
  net.neurons.push_back(three_compartment_neuron("b", 200.0));
  Synapse s;
  s.name = "ab";
  s.pre = 0;
  s.post = 1;
  s.pre_compartment = 2;
  s.post_compartment = 0;
  s.params.g_max = 0.02;
  s.weight = 1.2;
  net.synapses.push_back(s);
  net.pulse_inputs.push_back({0, 20.0, 200.0, 0.15});
  return net;
}

/// The two-neuron fixture simulated for 300 ms: 6 low nodes, 3 up nodes.
inline CompGraph two_neuron_graph() {
  const NetworkModel net = two_neuron_fixture();
  SimConfig cfg;
  cfg.duration = 300.0;
  return build_cg(net, simulate(net, cfg));
}

// Two LIF neurons, one synapse 0 -> 1 too weak to matter. Current pulses make
// the presynaptic spike arrive `lag` ms before each postsynaptic spike.
inline NetworkModel forced_pairing(std::size_t pairings, double lag, double w0) {
  NetworkModel net;
  net.neurons.push_back(make_point_lif("pre"));
  net.neurons.push_back(make_point_lif("post"));
  Synapse s;
  s.pre = 0;
  s.post = 1;
  s.params.g_max = 1e-9;
  s.weight = w0;
  s.delay_ms = 1.0;
  net.synapses.push_back(s);
  for (std::size_t k = 0; k < pairings; ++k) {
    const double t0 = 100.0 + 500.0 * static_cast<double>(k);
    // a spike is stamped at the end of the step that crosses threshold
    net.pulse_inputs.push_back({0, t0, 0.1, 10.0});
    net.pulse_inputs.push_back({1, t0 + s.delay_ms + lag, 0.1, 10.0});
  }
  return net;
}

// Input-layer LIF neurons feed an output layer through excitatory synapses.
inline NetworkModel feedforward_lif(std::size_t n_in, std::size_t n_out) {
  NetworkModel net;
  for (std::size_t i = 0; i < n_in + n_out; ++i) net.neurons.push_back(make_point_lif("n" + std::to_string(i)));
  for (std::size_t i = 0; i < n_in; ++i) {
    for (std::size_t j = 0; j < n_out; ++j) {
      Synapse s;
      s.name = "s" + std::to_string(i) + "_" + std::to_string(j);
      s.pre = i;
      s.post = n_in + j;
      s.params = {0.004, 0.5, 5.0, 0.0};
      net.synapses.push_back(s);
    }
  }
  net.input_synapse.g_max = 0.002;
  return net;
}

}  // namespace bganlab::testsupport
