#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../support/fixtures.hpp"
#include "bganlab/error.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/rng.hpp"

using namespace bganlab;

namespace {

void expect_ordered(const SimResult& r) {
  for (const auto& s : r.spikes) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_GE(s[i], 0.0);
      EXPECT_LE(s[i], r.duration);
      if (i) EXPECT_GT(s[i], s[i - 1]);
    }
  }
}

}  // namespace

TEST(PoissonTrain, ZeroRateAndNegativeRate) {
  EXPECT_TRUE(poisson_train(0.0, 1000.0, 1).empty());
  EXPECT_THROW(poisson_train(-1.0, 1000.0, 1), ParamError);
}

TEST(PoissonTrain, CountStatistics) {
  double mean = 0.0;
  const double sigma = std::sqrt(200.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto t = poisson_train(20.0, 10000.0, seed);
    EXPECT_LT(std::abs(static_cast<double>(t.size()) - 200.0), 3 * sigma) << seed;
    mean += t.size() / 100.0;
    for (std::size_t i = 1; i < t.size(); ++i) ASSERT_GT(t[i], t[i - 1]);
    if (!t.empty()) EXPECT_LT(t.back(), 10000.0);
  }
  EXPECT_LT(std::abs(mean - 200.0), 0.05 * 200.0);
}

TEST(PoissonTrain, Deterministic) {
  EXPECT_EQ(poisson_train(35.0, 5000.0, 77), poisson_train(35.0, 5000.0, 77));
  EXPECT_NE(poisson_train(35.0, 5000.0, 77), poisson_train(35.0, 5000.0, 78));
}

TEST(MeanFiringRate, Arithmetic) {
  EXPECT_EQ(mean_firing_rate(0, 1000.0), 0.0);
  EXPECT_EQ(mean_firing_rate(10, 1000.0), 10.0);
  EXPECT_DOUBLE_EQ(mean_firing_rate(37, 2500.0), 14.8);
  EXPECT_THROW(mean_firing_rate(1, 0.0), ParamError);
}

TEST(Simulate, QuiescentNetworkNeverSpikes) {
  NetworkModel net = testsupport::feedforward_lif(2, 2);
  net.neurons.push_back(make_point_hh("h"));
  SimConfig cfg;
  cfg.duration = 500.0;
  const auto r = simulate(net, cfg);
  for (const auto& s : r.spikes) EXPECT_TRUE(s.empty());
  for (const auto& e : r.synapse_events) EXPECT_EQ(e.count, 0u);
}

TEST(Simulate, RejectsInvalidConfigAndNetwork) {
  NetworkModel net = testsupport::feedforward_lif(1, 1);
  SimConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(simulate(net, cfg), ParamError);
  cfg = {};
  cfg.duration = -1.0;
  EXPECT_THROW(simulate(net, cfg), ParamError);

  net.synapses[0].post = 9;
  net.synapses[0].weight = 5.0;
  try {
    simulate(net, SimConfig{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_GE(e.violations().size(), 2u);
  }
}

TEST(Simulate, DrivenLifFiresBelowInputEventRate) {
  NetworkModel net;
  net.neurons.push_back(make_point_lif("a"));
  net.poisson_inputs.push_back({0, 50.0, 1.0});
  SimConfig cfg;
  cfg.duration = 4000.0;
  cfg.seed = 3;
  const auto r = simulate(net, cfg);
  const auto events = poisson_train(50.0, cfg.duration, hash64(cfg.seed, 0));
  expect_ordered(r);
  EXPECT_GT(r.spikes[0].size(), 0u);
  EXPECT_LE(r.spikes[0].size(), events.size());

  SimConfig fine = cfg;
  fine.dt = 0.01;
  const auto rf = simulate(net, fine);
  EXPECT_NEAR(r.rates()[0], rf.rates()[0], 0.1 * rf.rates()[0] + 0.5);
}

TEST(Simulate, HhChainFollowsPresynapticSpikes) {
  NetworkModel net;
  net.neurons.push_back(make_point_hh("pre"));
  net.neurons.push_back(make_point_hh("post"));
  Synapse s;
  s.name = "s";
  s.pre = 0;
  s.post = 1;
  s.params.g_max = 0.05;
  net.synapses.push_back(s);
  const double area = net.neurons[0].chain.compartments[0].area_cm2();
  net.pulse_inputs.push_back({0, 10.0, 180.0, 10.0 * area * 1e3});  // 10 uA/cm^2
  SimConfig cfg;
  cfg.duration = 200.0;
  const auto r = simulate(net, cfg);
  expect_ordered(r);
  ASSERT_GE(r.spikes[0].size(), 5u);
  ASSERT_EQ(r.spikes[1].size(), r.spikes[0].size());
  for (std::size_t i = 0; i < r.spikes[0].size(); ++i) {
    const double lat = r.spikes[1][i] - r.spikes[0][i];
    EXPECT_GT(lat, 0.0);
    EXPECT_LT(lat, 10.0);
  }

  SimConfig fine = cfg;
  fine.dt = 0.001;
  const auto rf = simulate(net, fine);
  ASSERT_EQ(rf.spikes[1].size(), r.spikes[1].size());
  for (std::size_t i = 0; i < r.spikes[1].size(); ++i) EXPECT_NEAR(r.spikes[1][i], rf.spikes[1][i], 1.0);
}

TEST(Simulate, DeterministicAndEventCountsMatchPreSpikes) {
  NetworkModel net = testsupport::feedforward_lif(3, 2);
  for (std::size_t i = 0; i < 3; ++i) net.poisson_inputs.push_back({i, 40.0, 1.0});
  SimConfig cfg;
  cfg.duration = 2000.0;
  cfg.seed = 12;
  const auto a = simulate(net, cfg);
  const auto b = simulate(net, cfg);
  EXPECT_EQ(dump_canonical(sim_result_to_json(a)), dump_canonical(sim_result_to_json(b)));
  expect_ordered(a);
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    EXPECT_EQ(a.synapse_events[s].count, a.spikes[net.synapses[s].pre].size());
    EXPECT_EQ(a.synapse_events[s].times, a.spikes[net.synapses[s].pre]);
  }
  EXPECT_GT(a.spikes[3].size(), 0u);
}

TEST(Simulate, MultiCompartmentReceivesInputOnDendrite) {
  NetworkModel net;
  Neuron n;
  n.name = "m";
  n.kind = NeuronKind::multi;
  dyn::Compartment d;
  d.kind = dyn::CompartmentKind::dendrite;
  d.membrane = dyn::MembraneKind::passive;
  d.params.gbar_leak = 0.3;
  d.params.e_leak = -65.0;
  d.length_um = 50.0;
  d.width_um = 4.0;
  dyn::Compartment soma;
  dyn::Compartment ax = soma;
  ax.kind = dyn::CompartmentKind::axon;
  ax.length_um = 50.0;
  ax.width_um = 2.0;
  n.chain.compartments = {d, soma, ax};
  net.neurons.push_back(n);
  net.poisson_inputs.push_back({0, 50.0, 1.0});
  SimConfig cfg;
  cfg.duration = 300.0;
  cfg.record_traces = true;
  const auto r = simulate(net, cfg);
  ASSERT_EQ(r.traces.size(), 1u);
  ASSERT_EQ(r.traces[0].size(), 3u);
  ASSERT_EQ(r.traces[0][0].size(), 3000u);
  const auto peak = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  EXPECT_GT(peak(r.traces[0][0]), -65.0 + 0.1);
}

TEST(FiProtocol, ShapeAndZeroColumn) {
  NetworkModel net = testsupport::feedforward_lif(2, 2);
  FiOptions opt;
  opt.duration = 500.0;
  const auto m = fi_protocol(net, opt);
  EXPECT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.cols(), 11u);
  EXPECT_EQ(m.input_rates_hz.front(), 0.0);
  EXPECT_EQ(m.input_rates_hz.back(), 50.0);
  for (std::size_t i = 0; i < m.rows(); ++i) EXPECT_EQ(m.rates[i][0], 0.0);
}

TEST(FiProtocol, ParallelEqualsSerial) {
  NetworkModel net = testsupport::feedforward_lif(2, 1);
  FiOptions opt;
  opt.duration = 1000.0;
  opt.seed = 4;
  const auto a = fi_protocol(net, opt);
  opt.jobs = 3;
  const auto b = fi_protocol(net, opt);
  EXPECT_EQ(a.rates, b.rates);
}

TEST(FiProtocol, ExcitatoryFeedforwardIsMonotone) {
  NetworkModel net = testsupport::feedforward_lif(3, 2);
  FiOptions opt;
  opt.duration = 2000.0;
  std::vector<std::vector<double>> avg(net.neurons.size(), std::vector<double>(11, 0.0));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    opt.seed = seed;
    const auto m = fi_protocol(net, opt);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t c = 0; c < m.cols(); ++c) avg[i][c] += m.rates[i][c] / 10.0;
  }
  for (std::size_t i = 0; i < avg.size(); ++i) {
    EXPECT_GT(avg[i].back(), 0.0) << i;
    for (std::size_t c = 1; c < 11; ++c) EXPECT_GE(avg[i][c], avg[i][c - 1] - 0.5) << i << " " << c;
  }
}

TEST(CompareResponses, Basics) {
  RateMatrix a;
  a.input_rates_hz = {0, 5, 10};
  a.rates = {{0, 1, 2}, {3, 4, 5}};
  auto rep = compare_responses(a, a);
  EXPECT_EQ(rep.global_rmse, 0.0);
  EXPECT_EQ(rep.max_abs_deviation, 0.0);
  EXPECT_EQ(rep.per_neuron_rmse, (std::vector<double>{0.0, 0.0}));

  RateMatrix b = a;
  for (auto& row : b.rates)
    for (auto& v : row) v += 1.0;
  rep = compare_responses(a, b);
  EXPECT_DOUBLE_EQ(rep.global_rmse, 1.0);
  EXPECT_DOUBLE_EQ(rep.max_abs_deviation, 1.0);

  b.rates[1][2] += 3.0;
  rep = compare_responses(a, b);
  EXPECT_EQ(rep.worst_neurons.front(), 1u);

  RateMatrix c;
  c.input_rates_hz = {0, 5};
  c.rates = {{0, 1}};
  try {
    compare_responses(a, c);
    FAIL();
  } catch (const ParamError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2 x 3)"), std::string::npos);
    EXPECT_NE(msg.find("(1 x 2)"), std::string::npos);
  }
}

TEST(SimResultJson, FixedKeyOrder) {
  SimResult r;
  r.duration = 1000.0;
  r.spikes = {{1.5, 2.25}, {}};
  r.synapse_events = {summarize_events({1.5, 2.25}), summarize_events({})};
  const std::string s = dump_canonical(sim_result_to_json(r));
  EXPECT_EQ(s,
            R"({"spikes":[[1.5,2.25],[]],"rates":[2,0],"synapse_events":[{"count":2,"iei_mean":0.75,"iei_var":0,"last":2.25},{"count":0,"iei_mean":0,"iei_var":0,"last":null}]})");
}

TEST(NetworkJson, RoundTrip) {
  NetworkModel net = testsupport::feedforward_lif(2, 1);
  net.neurons.push_back(make_point_hh("h"));
  net.gap_junctions.push_back({0, 0, 3, 0, {2.0, 3.0}});
  net.poisson_inputs.push_back({0, 10.0, 1.5});
  net.pulse_inputs.push_back({3, 5.0, 10.0, 0.2});
  const Json j = network_to_json(net);
  EXPECT_EQ(network_from_json(j), net);
  Json bad = j;
  bad["synapses"][0]["pre"] = "zero";
  try {
    network_from_json(bad);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("synapses[0].pre"), std::string::npos);
  }
}
