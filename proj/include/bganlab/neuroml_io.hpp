#pragma once

// NeuroML v2 subset import and export.
//
// Supported elements: neuroml, iafTauCell, expTwoSynapse, pulseGenerator,
// spikeGeneratorPoisson, network, population, projection, connection,
// connectionWD, explicitInput (and notes, which is skipped). Cells are point
// LIF neurons with the default soma geometry and unit membrane capacitance;
// Poisson sources drive their target through the network's input synapse.

#include <string>
#include <string_view>

#include "bganlab/network.hpp"

namespace bganlab {

enum class Dimension { time, voltage, conductance, current, rate };

/// Parses "<number>[ ]<unit>" into internal units (ms, mV, uS, nA, Hz).
/// Throws ParamError for a malformed value or a unit foreign to the
/// dimension.
double parse_quantity(std::string_view text, Dimension d);

/// Throws ParseError (with line and column) for malformed XML, unsupported
/// elements or attributes, bad values and dangling references.
NetworkModel parse_neuroml(std::string_view document);

/// Throws ParamError naming the neuron or synapse that the subset cannot
/// express (HH or multi-compartment cells, refractory periods, non-default
/// geometry, weighted or non-default Poisson drive, gap junctions).
std::string export_neuroml(const NetworkModel& net);

}  // namespace bganlab
