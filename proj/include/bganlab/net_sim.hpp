#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bganlab/canonical_json.hpp"
#include "bganlab/network.hpp"

namespace bganlab {

struct SimConfig {
  double dt = 0.1;  // ms; 10 kHz
  double duration = 1000.0;  // ms
  bool record_traces = false;
  std::uint64_t seed = 0;
  /// Apply the network's STDP rule online to synapse weights.
  bool plasticity = false;
  /// Times (ms, ascending, within [0, duration]) at which synapse weights are
  /// recorded, before the events due at that time are delivered.
  std::vector<double> weight_snapshot_times;

  void validate() const;
};

/// Transmission statistics of one synapse. Event times are the presynaptic
/// spike times entering the synapse.
struct SynapseEvents {
  std::size_t count = 0;
  double iei_mean = 0.0;  // ms
  double iei_var = 0.0;   // ms^2
  std::optional<double> first_time;
  std::optional<double> last_time;
  std::vector<double> times;
};

struct SimResult {
  double duration = 0.0;
  /// Per-neuron spike times (ms), strictly increasing, within [0, duration].
  std::vector<std::vector<double>> spikes;
  /// traces[neuron][compartment][step]: membrane potential after each step.
  std::vector<std::vector<std::vector<double>>> traces;
  std::vector<SynapseEvents> synapse_events;
  /// Synapse weights at the end of the run (equal to the initial weights
  /// unless plasticity was enabled).
  std::vector<double> final_weights;
  /// One weight vector per requested snapshot time.
  std::vector<std::vector<double>> weight_snapshots;

  std::vector<double> rates() const;
};

/// Homogeneous Poisson event times in [0, duration) from exponential
/// inter-arrival draws. Throws ParamError for a negative rate.
std::vector<double> poisson_train(double rate_hz, double duration_ms, std::uint64_t seed);

/// Deterministic fixed-step co-simulation of the network.
SimResult simulate(const NetworkModel& net, const SimConfig& cfg);

/// count / duration, in Hz (duration in ms).
double mean_firing_rate(std::size_t spike_count, double duration_ms);

/// Summary statistics of an event sequence (count, inter-event mean/variance,
/// first/last time). `times` is copied into the result.
SynapseEvents summarize_events(std::vector<double> times);

/// {"spikes", "rates", "synapse_events"} in that order, floats at 9
/// significant digits.
OrderedJson sim_result_to_json(const SimResult& r);

/// Rows are neurons, columns input rates.
struct RateMatrix {
  std::vector<double> input_rates_hz;
  std::vector<std::vector<double>> rates;  // [neuron][column]

  std::size_t rows() const { return rates.size(); }
  std::size_t cols() const { return input_rates_hz.size(); }
};

struct FiOptions {
  /// 0, 5, ..., 50 Hz.
  std::vector<double> input_rates_hz = default_rates();
  double duration = 2000.0;
  double dt = 0.1;
  std::uint64_t seed = 0;
  /// Neurons receiving the protocol drive; empty means every neuron without
  /// afferent synapses.
  std::vector<std::size_t> input_neurons;
  double input_weight = 1.0;
  unsigned jobs = 1;

  static std::vector<double> default_rates();
};

/// Firing-rate response to Poisson drive at each input rate. Column c uses
/// seed hash64(seed, c). Existing Poisson inputs of the network are replaced
/// by the protocol drive; pulse inputs are kept.
RateMatrix fi_protocol(const NetworkModel& net, const FiOptions& opt);

struct ResponseReport {
  std::vector<double> per_neuron_rmse;
  double global_rmse = 0.0;
  double max_abs_deviation = 0.0;
  /// Neuron indices by decreasing RMSE (ties by index).
  std::vector<std::size_t> worst_neurons;
};

/// Throws ParamError naming both shapes when they differ.
ResponseReport compare_responses(const RateMatrix& a, const RateMatrix& b);

OrderedJson rate_matrix_to_json(const RateMatrix& m);
std::string rate_matrix_to_csv(const RateMatrix& m);

}  // namespace bganlab
