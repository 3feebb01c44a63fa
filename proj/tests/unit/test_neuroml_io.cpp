#include <gtest/gtest.h>

#include <cmath>

#include "bganlab/error.hpp"
#include "bganlab/file_io.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/neuroml_io.hpp"

using namespace bganlab;

namespace {

std::string fixture() { return read_file(std::string(BGANLAB_FIXTURE_DIR) + "/two_populations.nml"); }

std::string wrap(const std::string& body) {
  return "<neuroml xmlns=\"http://www.neuroml.org/schema/neuroml2\" id=\"t\">\n" + body + "</neuroml>\n";
}

const char* kCells =
    "  <iafTauCell id=\"c\" leakReversal=\"-65mV\" thresh=\"-50mV\" reset=\"-70mV\" tau=\"20ms\"/>\n"
    "  <expTwoSynapse id=\"s\" gbase=\"1nS\" erev=\"0mV\" tauRise=\"1ms\" tauDecay=\"5ms\"/>\n";

ParseError parse_error(const std::string& doc) {
  try {
    parse_neuroml(doc);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no ParseError";
  return ParseError("", 0, 0);
}

void expect_close9(double a, double b) { EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, std::abs(b))); }

}  // namespace

TEST(Quantity, UnitsConvertToInternalScale) {
  EXPECT_DOUBLE_EQ(parse_quantity("5 ms", Dimension::time), parse_quantity("0.005 s", Dimension::time));
  EXPECT_DOUBLE_EQ(parse_quantity("5ms", Dimension::time), 5.0);
  EXPECT_DOUBLE_EQ(parse_quantity("-0.065V", Dimension::voltage), -65.0);
  EXPECT_DOUBLE_EQ(parse_quantity("4nS", Dimension::conductance), 0.004);
  EXPECT_DOUBLE_EQ(parse_quantity("200 pA", Dimension::current), 0.2);
  EXPECT_DOUBLE_EQ(parse_quantity("10 per_s", Dimension::rate), 10.0);
  EXPECT_DOUBLE_EQ(parse_quantity("0.01per_ms", Dimension::rate), 10.0);
  EXPECT_THROW(parse_quantity("5 mV", Dimension::time), ParamError);
  EXPECT_THROW(parse_quantity("5", Dimension::time), ParamError);
  EXPECT_THROW(parse_quantity("ms", Dimension::time), ParamError);
  EXPECT_THROW(parse_quantity("5 furlongs", Dimension::time), ParamError);
}

TEST(NeuromlImport, FixtureMatchesHandCount) {
  const NetworkModel net = parse_neuroml(fixture());
  ASSERT_EQ(net.neurons.size(), 4u);
  ASSERT_EQ(net.synapses.size(), 2u);
  EXPECT_EQ(net.pulse_inputs.size(), 1u);
  EXPECT_TRUE(net.poisson_inputs.empty());
  EXPECT_TRUE(net.gap_junctions.empty());

  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(net.neurons[i].kind, NeuronKind::lif);
    EXPECT_EQ(net.neurons[i].chain.size(), 1u);
  }
  EXPECT_EQ(net.neurons[1].name, "popA_1");
  EXPECT_EQ(net.neurons[2].name, "popB_0");
  const dyn::LifParams& a = net.neurons[0].lif;
  EXPECT_EQ(a.e_leak, -65.0);
  EXPECT_EQ(a.v_thresh, -50.0);
  EXPECT_EQ(a.v_reset, -70.0);
  EXPECT_DOUBLE_EQ(a.tau_m(), 20.0);
  const dyn::LifParams& b = net.neurons[3].lif;
  EXPECT_EQ(b.e_leak, -60.0);
  EXPECT_DOUBLE_EQ(b.v_thresh, -48.0);
  EXPECT_EQ(b.v_reset, -72.0);
  EXPECT_DOUBLE_EQ(b.tau_m(), 15.0);

  const Synapse& s0 = net.synapses[0];
  EXPECT_EQ(s0.pre, 0u);
  EXPECT_EQ(s0.post, 2u);
  EXPECT_DOUBLE_EQ(s0.params.g_max, 0.001);
  EXPECT_EQ(s0.params.tau_rise, 0.5);
  EXPECT_EQ(s0.params.tau_decay, 5.0);
  EXPECT_EQ(s0.params.e_syn, 0.0);
  EXPECT_EQ(s0.weight, 1.0);
  EXPECT_EQ(s0.delay_ms, 1.0);
  const Synapse& s1 = net.synapses[1];
  EXPECT_EQ(s1.pre, 1u);
  EXPECT_EQ(s1.post, 3u);
  EXPECT_EQ(s1.weight, 1.5);
  EXPECT_EQ(s1.delay_ms, 2.0);

  const PulseInput& p = net.pulse_inputs[0];
  EXPECT_EQ(p.neuron, 0u);
  EXPECT_EQ(p.delay_ms, 50.0);
  EXPECT_EQ(p.duration_ms, 200.0);
  EXPECT_DOUBLE_EQ(p.amplitude_na, 0.05);
}

TEST(NeuromlImport, UnsupportedElementIsNamed) {
  const std::string doc = wrap(std::string(kCells) + "  <izhikevichCell id=\"iz\" a=\"0.02\"/>\n");
  const ParseError e = parse_error(doc);
  EXPECT_NE(std::string(e.what()).find("izhikevichCell"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("iafTauCell"), std::string::npos);  // lists the supported set
  EXPECT_EQ(e.line(), 4);
}

TEST(NeuromlImport, MalformedXmlHasLocation) {
  const ParseError e = parse_error("<neuroml>\n  <network id=\"n\">\n</neuroml>\n");
  EXPECT_EQ(e.line(), 3);
  EXPECT_GT(e.column(), 0);
}

TEST(NeuromlImport, DanglingReferencesNameTheId) {
  auto message = [](const std::string& doc) { return std::string(parse_error(doc).what()); };
  const std::string cells = kCells;
  EXPECT_NE(message(wrap(cells + "  <network id=\"n\"><population id=\"p\" component=\"ghost\" size=\"2\"/></network>\n"))
                .find("ghost"),
            std::string::npos);
  const std::string pop = cells + "  <network id=\"n\">\n    <population id=\"p\" component=\"c\" size=\"2\"/>\n";
  EXPECT_NE(message(wrap(pop +
                         "    <projection id=\"j\" presynapticPopulation=\"p\" postsynapticPopulation=\"p\" "
                         "synapse=\"nmda\"/>\n  </network>\n"))
                .find("nmda"),
            std::string::npos);
  EXPECT_NE(message(wrap(pop +
                         "    <projection id=\"j\" presynapticPopulation=\"p\" postsynapticPopulation=\"p\" synapse=\"s\">"
                         "<connection id=\"0\" preCellId=\"../p/5/c\" postCellId=\"../p/0/c\"/></projection>\n"
                         "  </network>\n"))
                .find("out of range"),
            std::string::npos);
  EXPECT_NE(message(wrap(pop + "    <explicitInput target=\"p[0]\" input=\"drive\"/>\n  </network>\n")).find("drive"),
            std::string::npos);
  EXPECT_NE(message(wrap(cells + "  <expTwoSynapse id=\"c\" gbase=\"1nS\" erev=\"0mV\" tauRise=\"1ms\" tauDecay=\"5ms\"/>\n"))
                .find("duplicate id 'c'"),
            std::string::npos);
}

TEST(NeuromlImport, BadAttributesAreRejected) {
  const ParseError unit =
      parse_error(wrap("  <iafTauCell id=\"c\" leakReversal=\"-65mV\" thresh=\"-50mV\" reset=\"-70mV\" tau=\"20mV\"/>\n"));
  EXPECT_NE(std::string(unit.what()).find("tau"), std::string::npos);
  const ParseError extra = parse_error(
      wrap("  <iafTauCell id=\"c\" leakReversal=\"-65mV\" thresh=\"-50mV\" reset=\"-70mV\" tau=\"20ms\" C=\"1pF\"/>\n"));
  EXPECT_NE(std::string(extra.what()).find("'C'"), std::string::npos);
  const ParseError missing = parse_error(wrap("  <iafTauCell id=\"c\" thresh=\"-50mV\" reset=\"-70mV\" tau=\"20ms\"/>\n"));
  EXPECT_NE(std::string(missing.what()).find("leakReversal"), std::string::npos);
  EXPECT_THROW(parse_neuroml("<network id=\"n\"/>"), ParseError);
}

TEST(NeuromlExport, RoundTripPreservesFixture) {
  const NetworkModel a = parse_neuroml(fixture());
  const std::string doc = export_neuroml(a);
  const NetworkModel b = parse_neuroml(doc);
  ASSERT_EQ(b.neurons.size(), a.neurons.size());
  ASSERT_EQ(b.synapses.size(), a.synapses.size());
  ASSERT_EQ(b.pulse_inputs.size(), a.pulse_inputs.size());
  for (std::size_t i = 0; i < a.neurons.size(); ++i) {
    EXPECT_EQ(b.neurons[i].name, a.neurons[i].name);
    expect_close9(b.neurons[i].lif.gbar_leak, a.neurons[i].lif.gbar_leak);
    expect_close9(b.neurons[i].lif.e_leak, a.neurons[i].lif.e_leak);
    expect_close9(b.neurons[i].lif.v_thresh, a.neurons[i].lif.v_thresh);
    expect_close9(b.neurons[i].lif.v_reset, a.neurons[i].lif.v_reset);
  }
  for (std::size_t s = 0; s < a.synapses.size(); ++s) {
    EXPECT_EQ(b.synapses[s].pre, a.synapses[s].pre);
    EXPECT_EQ(b.synapses[s].post, a.synapses[s].post);
    expect_close9(b.synapses[s].params.g_max, a.synapses[s].params.g_max);
    expect_close9(b.synapses[s].params.tau_rise, a.synapses[s].params.tau_rise);
    expect_close9(b.synapses[s].params.tau_decay, a.synapses[s].params.tau_decay);
    expect_close9(b.synapses[s].weight, a.synapses[s].weight);
    expect_close9(b.synapses[s].delay_ms, a.synapses[s].delay_ms);
  }
  expect_close9(b.pulse_inputs[0].amplitude_na, a.pulse_inputs[0].amplitude_na);
  EXPECT_EQ(export_neuroml(b), doc);
}

TEST(NeuromlExport, RoundTripKeepsFiResponse) {
  const NetworkModel a = parse_neuroml(fixture());
  const NetworkModel b = parse_neuroml(export_neuroml(a));
  FiOptions opt;
  opt.duration = 1000.0;
  opt.seed = 4;
  const ResponseReport r = compare_responses(fi_protocol(a, opt), fi_protocol(b, opt));
  EXPECT_LT(r.global_rmse, 0.1);
}

TEST(NeuromlExport, MixedPopulationsAndPoissonInputs) {
  NetworkModel net;
  dyn::LifParams fast;
  fast.gbar_leak = 0.2;
  net.neurons = {make_point_lif("x"), make_point_lif("y", fast), make_point_lif("z")};
  Synapse s;
  s.pre = 0;
  s.post = 1;
  net.synapses.push_back(s);
  s.pre = 2;
  s.post = 0;
  s.params.e_syn = -75.0;
  net.synapses.push_back(s);
  s.pre = 0;
  s.post = 1;
  net.synapses.push_back(s);
  net.poisson_inputs.push_back({2, 15.0, 1.0});
  const NetworkModel b = parse_neuroml(export_neuroml(net));
  ASSERT_EQ(b.neurons.size(), 3u);
  EXPECT_EQ(b.neurons[1].lif.gbar_leak, 0.2);
  ASSERT_EQ(b.synapses.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(b.synapses[k].pre, net.synapses[k].pre);
    EXPECT_EQ(b.synapses[k].post, net.synapses[k].post);
    EXPECT_EQ(b.synapses[k].params, net.synapses[k].params);
  }
  ASSERT_EQ(b.poisson_inputs.size(), 1u);
  EXPECT_EQ(b.poisson_inputs[0].neuron, 2u);
  EXPECT_EQ(b.poisson_inputs[0].rate_hz, 15.0);
}

TEST(NeuromlExport, InexpressibleComponentsAreRejected) {
  NetworkModel hh;
  hh.neurons.push_back(make_point_hh("h"));
  try {
    export_neuroml(hh);
    FAIL();
  } catch (const ParamError& e) {
    EXPECT_NE(std::string(e.what()).find("hh"), std::string::npos);
  }
  NetworkModel ref;
  dyn::LifParams p;
  p.t_ref = 2.0;
  ref.neurons.push_back(make_point_lif("r", p));
  EXPECT_THROW(export_neuroml(ref), ParamError);
  NetworkModel weighted;
  weighted.neurons.push_back(make_point_lif("w"));
  weighted.poisson_inputs.push_back({0, 10.0, 3.0});
  EXPECT_THROW(export_neuroml(weighted), ParamError);
}
