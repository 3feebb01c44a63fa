#include "bganlab/net_sim.hpp"

#include <limits>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "bganlab/error.hpp"
#include "bganlab/parallel.hpp"
#include "bganlab/rng.hpp"

namespace bganlab {

namespace {

constexpr double kHhSpikeThreshold = 0.0;  // mV
constexpr double kHhLockout = 1.0;         // ms
constexpr double kTimeEps = 1e-9;

struct NeuronRun {
  std::vector<dyn::HhState> comps;
  std::vector<double> injection;
  std::optional<double> last_spike;
};

struct SynapseRun {
  dyn::SynState state;
  std::deque<double> pending;  // arrival times
  double weight = 1.0;
  std::optional<dyn::StdpSynapse> stdp;
};

struct InputRun {
  dyn::SynState state;
  std::vector<double> events;
  std::size_t cursor = 0;
};

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("SimConfig: dt must be > 0");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ParamError("SimConfig: duration must be > 0");
  for (std::size_t i = 0; i < weight_snapshot_times.size(); ++i) {
    const double t = weight_snapshot_times[i];
    if (!(t >= 0.0 && t <= duration) || (i > 0 && t < weight_snapshot_times[i - 1]))
      throw ParamError("SimConfig: weight snapshot times must be ascending within [0, duration]");
  }
}

std::vector<double> SimResult::rates() const {
  std::vector<double> out;
  out.reserve(spikes.size());
  for (const auto& s : spikes) out.push_back(mean_firing_rate(s.size(), duration));
  return out;
}

std::vector<double> poisson_train(double rate_hz, double duration_ms, std::uint64_t seed) {
  if (!(rate_hz >= 0.0)) throw ParamError("poisson_train: rate must be >= 0");
  std::vector<double> out;
  if (rate_hz == 0.0 || !(duration_ms > 0.0)) return out;
  Rng rng(seed);
  const double per_ms = rate_hz / 1000.0;
  for (double t = rng.exponential(per_ms); t < duration_ms; t += rng.exponential(per_ms)) out.push_back(t);
  return out;
}

double mean_firing_rate(std::size_t spike_count, double duration_ms) {
  if (!(duration_ms > 0.0)) throw ParamError("mean_firing_rate: duration must be > 0");
  return static_cast<double>(spike_count) / (duration_ms / 1000.0);
}

SynapseEvents summarize_events(std::vector<double> times) {
  SynapseEvents ev;
  ev.count = times.size();
  if (!times.empty()) {
    ev.first_time = times.front();
    ev.last_time = times.back();
  }
  if (times.size() >= 2) {
    const std::size_t m = times.size() - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += times[i + 1] - times[i];
    ev.iei_mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = times[i + 1] - times[i] - ev.iei_mean;
      ss += d * d;
    }
    ev.iei_var = ss / static_cast<double>(m);
  }
  ev.times = std::move(times);
  return ev;
}

SimResult simulate(const NetworkModel& net, const SimConfig& cfg) {
  net.validate();
  cfg.validate();

  const std::size_t n_neurons = net.neurons.size();
  const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));

  std::vector<NeuronRun> neurons(n_neurons);
  for (std::size_t i = 0; i < n_neurons; ++i) {
    const Neuron& nr = net.neurons[i];
    NeuronRun& run = neurons[i];
    run.injection.assign(nr.chain.size(), 0.0);
    for (const auto& c : nr.chain.compartments) {
      const double v0 = nr.kind == NeuronKind::lif ? nr.lif.e_leak
                        : c.membrane == dyn::MembraneKind::hh ? -65.0
                                                              : c.params.e_leak;
      run.comps.push_back(c.membrane == dyn::MembraneKind::hh && nr.kind != NeuronKind::lif
                              ? dyn::hh_steady_state(v0)
                              : dyn::HhState{v0, 0.0, 0.0, 0.0});
    }
  }

  std::vector<std::vector<std::size_t>> efferent(n_neurons), afferent(n_neurons);
  std::vector<SynapseRun> syns(net.synapses.size());
  for (std::size_t s = 0; s < net.synapses.size(); ++s) {
    efferent[net.synapses[s].pre].push_back(s);
    afferent[net.synapses[s].post].push_back(s);
    syns[s].weight = net.synapses[s].weight;
    if (cfg.plasticity) syns[s].stdp.emplace(net.plasticity);
  }

  std::vector<InputRun> inputs(net.poisson_inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k)
    inputs[k].events = poisson_train(net.poisson_inputs[k].rate_hz, cfg.duration, hash64(cfg.seed, k));

  SimResult result;
  result.duration = cfg.duration;
  result.spikes.assign(n_neurons, {});
  std::vector<std::vector<double>> emitted(net.synapses.size());
  if (cfg.record_traces) {
    result.traces.resize(n_neurons);
    for (std::size_t i = 0; i < n_neurons; ++i)
      result.traces[i].assign(net.neurons[i].chain.size(), std::vector<double>{});
  }

  std::vector<std::vector<double>> areas(n_neurons);
  for (std::size_t i = 0; i < n_neurons; ++i)
    for (const auto& c : net.neurons[i].chain.compartments) areas[i].push_back(c.area_cm2());

  std::size_t next_snapshot = 0;
  auto take_snapshots = [&](double upto) {
    while (next_snapshot < cfg.weight_snapshot_times.size() && cfg.weight_snapshot_times[next_snapshot] <= upto + kTimeEps) {
      std::vector<double> w(syns.size());
      for (std::size_t s = 0; s < syns.size(); ++s) w[s] = syns[s].weight;
      result.weight_snapshots.push_back(std::move(w));
      ++next_snapshot;
    }
  };

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    take_snapshots(t);

    // deliver due events
    for (std::size_t s = 0; s < syns.size(); ++s) {
      SynapseRun& sr = syns[s];
      while (!sr.pending.empty() && sr.pending.front() <= t + kTimeEps) {
        const double arrival = sr.pending.front();
        sr.pending.pop_front();
        sr.state = dyn::syn_on_spike(sr.state);
        if (sr.stdp) sr.weight = sr.stdp->on_pre(arrival, sr.weight);
      }
    }
    for (InputRun& in : inputs) {
      while (in.cursor < in.events.size() && in.events[in.cursor] <= t + kTimeEps) {
        in.state = dyn::syn_on_spike(in.state);
        ++in.cursor;
      }
    }

    // injection densities
    for (std::size_t i = 0; i < n_neurons; ++i) std::fill(neurons[i].injection.begin(), neurons[i].injection.end(), 0.0);
    for (const PulseInput& p : net.pulse_inputs) {
      if (t + kTimeEps >= p.delay_ms && t + kTimeEps < p.delay_ms + p.duration_ms) {
        const std::size_t soma = net.neurons[p.neuron].chain.soma_index();
        neurons[p.neuron].injection[soma] += dyn::na_to_density(p.amplitude_na, areas[p.neuron][soma]);
      }
    }
    for (std::size_t s = 0; s < syns.size(); ++s) {
      const Synapse& sy = net.synapses[s];
      const double g = dyn::syn_conductance(syns[s].state, sy.params.g_max * syns[s].weight);
      if (g == 0.0) continue;
      const double v = neurons[sy.post].comps[sy.post_compartment].v_m;
      neurons[sy.post].injection[sy.post_compartment] -=
          dyn::na_to_density(dyn::syn_current(g, v, sy.params.e_syn), areas[sy.post][sy.post_compartment]);
    }
    for (std::size_t q = 0; q < inputs.size(); ++q) {
      const PoissonInput& pi = net.poisson_inputs[q];
      const double g = dyn::syn_conductance(inputs[q].state, net.input_synapse.g_max * pi.weight);
      if (g == 0.0) continue;
      const std::size_t c = net.neurons[pi.neuron].input_compartment();
      const double v = neurons[pi.neuron].comps[c].v_m;
      neurons[pi.neuron].injection[c] -=
          dyn::na_to_density(dyn::syn_current(g, v, net.input_synapse.e_syn), areas[pi.neuron][c]);
    }
    for (const GapJunction& gj : net.gap_junctions) {
      const double va = neurons[gj.neuron_a].comps[gj.compartment_a].v_m;
      const double vb = neurons[gj.neuron_b].comps[gj.compartment_b].v_m;
      const double i_na = gj.params.g_j * (vb - va) * 1e-3;  // nS * mV = pA
      neurons[gj.neuron_a].injection[gj.compartment_a] += dyn::na_to_density(i_na, areas[gj.neuron_a][gj.compartment_a]);
      neurons[gj.neuron_b].injection[gj.compartment_b] -= dyn::na_to_density(i_na, areas[gj.neuron_b][gj.compartment_b]);
    }

    // advance membranes and detect spikes
    for (std::size_t i = 0; i < n_neurons; ++i) {
      const Neuron& nr = net.neurons[i];
      NeuronRun& run = neurons[i];
      std::optional<double> spike_time;
      if (nr.kind == NeuronKind::lif) {
        if (run.last_spike && t + kTimeEps < *run.last_spike + nr.lif.t_ref) {
          run.comps[0].v_m = nr.lif.v_reset;
          if (cfg.record_traces) result.traces[i][0].push_back(run.comps[0].v_m);
          continue;
        }
        const auto step = dyn::step_lif({run.comps[0].v_m}, nr.lif, run.injection[0], cfg.dt);
        run.comps[0].v_m = step.state.v_m;
        if (step.spiked) spike_time = t + cfg.dt;
      } else {
        const std::size_t soma = nr.chain.soma_index();
        const double v_before = run.comps[soma].v_m;
        if (nr.kind == NeuronKind::hh) {
          run.comps[0] = dyn::step_hh(run.comps[0], nr.chain.compartments[0].params, run.injection[0], cfg.dt);
        } else {
          run.comps = dyn::step_chain(nr.chain, run.comps, run.injection, cfg.dt);
        }
        const double v_after = run.comps[soma].v_m;
        if (v_before < kHhSpikeThreshold && v_after >= kHhSpikeThreshold) {
          const double tc = t + cfg.dt * (kHhSpikeThreshold - v_before) / (v_after - v_before);
          if (!run.last_spike || tc - *run.last_spike >= kHhLockout) spike_time = tc;
        }
      }
      if (cfg.record_traces)
        for (std::size_t c = 0; c < run.comps.size(); ++c) result.traces[i][c].push_back(run.comps[c].v_m);

      if (!spike_time) continue;
      run.last_spike = *spike_time;
      result.spikes[i].push_back(*spike_time);
      for (std::size_t s : efferent[i]) {
        syns[s].pending.push_back(*spike_time + net.synapses[s].delay_ms);
        emitted[s].push_back(*spike_time);
      }
      for (std::size_t s : afferent[i])
        if (syns[s].stdp) syns[s].weight = syns[s].stdp->on_post(*spike_time, syns[s].weight);
    }

    for (std::size_t s = 0; s < syns.size(); ++s) syns[s].state = dyn::syn_step(syns[s].state, net.synapses[s].params, cfg.dt);
    for (InputRun& in : inputs) in.state = dyn::syn_step(in.state, net.input_synapse, cfg.dt);
  }

  take_snapshots(std::numeric_limits<double>::infinity());
  result.synapse_events.reserve(syns.size());
  result.final_weights.reserve(syns.size());
  for (std::size_t s = 0; s < syns.size(); ++s) {
    result.synapse_events.push_back(summarize_events(std::move(emitted[s])));
    result.final_weights.push_back(syns[s].weight);
  }
  return result;
}

OrderedJson sim_result_to_json(const SimResult& r) {
  OrderedJson spikes = OrderedJson::array();
  for (const auto& s : r.spikes) spikes.push_back(s);
  OrderedJson events = OrderedJson::array();
  for (const auto& e : r.synapse_events) {
    OrderedJson je;
    je["count"] = e.count;
    je["iei_mean"] = e.iei_mean;
    je["iei_var"] = e.iei_var;
    je["last"] = e.last_time ? OrderedJson(*e.last_time) : OrderedJson(nullptr);
    events.push_back(std::move(je));
  }
  OrderedJson out;
  out["spikes"] = std::move(spikes);
  out["rates"] = r.rates();
  out["synapse_events"] = std::move(events);
  return out;
}

std::vector<double> FiOptions::default_rates() {
  std::vector<double> r;
  for (int i = 0; i <= 10; ++i) r.push_back(5.0 * i);
  return r;
}

RateMatrix fi_protocol(const NetworkModel& net, const FiOptions& opt) {
  net.validate();
  const std::vector<std::size_t> targets =
      opt.input_neurons.empty() ? net.neurons_without_afferents() : opt.input_neurons;
  for (std::size_t t : targets)
    if (t >= net.neurons.size()) throw ParamError("fi_protocol: input neuron " + std::to_string(t) + " does not exist");

  RateMatrix m;
  m.input_rates_hz = opt.input_rates_hz;
  m.rates.assign(net.neurons.size(), std::vector<double>(opt.input_rates_hz.size(), 0.0));

  parallel_for(opt.input_rates_hz.size(), opt.jobs, [&](std::size_t col) {
    NetworkModel driven = net;
    driven.poisson_inputs.clear();
    const double rate = opt.input_rates_hz[col];
    if (rate < 0.0) throw ParamError("fi_protocol: negative input rate");
    if (rate > 0.0)
      for (std::size_t t : targets) driven.poisson_inputs.push_back({t, rate, opt.input_weight});
    SimConfig cfg;
    cfg.dt = opt.dt;
    cfg.duration = opt.duration;
    cfg.seed = hash64(opt.seed, col);
    const SimResult r = simulate(driven, cfg);
    const auto rates = r.rates();
    for (std::size_t i = 0; i < rates.size(); ++i) m.rates[i][col] = rates[i];
  });
  return m;
}

ResponseReport compare_responses(const RateMatrix& a, const RateMatrix& b) {
  auto shape = [](const RateMatrix& m) {
    return "(" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + ")";
  };
  bool same = a.rows() == b.rows() && a.cols() == b.cols();
  for (std::size_t i = 0; same && i < a.rows(); ++i)
    same = a.rates[i].size() == a.cols() && b.rates[i].size() == b.cols();
  if (!same) throw ParamError("compare_responses: shape mismatch " + shape(a) + " vs " + shape(b));

  ResponseReport rep;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double d = a.rates[i][c] - b.rates[i][c];
      ss += d * d;
      rep.max_abs_deviation = std::max(rep.max_abs_deviation, std::abs(d));
    }
    total += ss;
    n += a.cols();
    rep.per_neuron_rmse.push_back(a.cols() ? std::sqrt(ss / static_cast<double>(a.cols())) : 0.0);
  }
  rep.global_rmse = n ? std::sqrt(total / static_cast<double>(n)) : 0.0;
  rep.worst_neurons.resize(a.rows());
  std::iota(rep.worst_neurons.begin(), rep.worst_neurons.end(), std::size_t{0});
  std::stable_sort(rep.worst_neurons.begin(), rep.worst_neurons.end(), [&](std::size_t x, std::size_t y) {
    return rep.per_neuron_rmse[x] > rep.per_neuron_rmse[y];
  });
  return rep;
}

OrderedJson rate_matrix_to_json(const RateMatrix& m) {
  OrderedJson out;
  out["input_rates_hz"] = m.input_rates_hz;
  out["shape"] = {m.rows(), m.cols()};
  out["rates"] = m.rates;
  return out;
}

std::string rate_matrix_to_csv(const RateMatrix& m) {
  std::ostringstream os;
  os << "neuron";
  for (double r : m.input_rates_hz) os << ",in_" << format_double9(r) << "hz";
  os << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << i;
    for (double v : m.rates[i]) os << ',' << format_double9(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace bganlab
