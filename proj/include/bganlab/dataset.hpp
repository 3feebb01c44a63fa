#pragma once

// Synthetic network generation, dataset directories and STDP learning
// trajectories.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bganlab/canonical_json.hpp"
#include "bganlab/cg_repr.hpp"
#include "bganlab/network.hpp"

namespace bganlab {

struct Range {
  double lo = 0.0, hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct CountRange {
  std::size_t lo = 0, hi = 0;
  bool operator==(const CountRange&) const = default;
};

/// Sampling ranges for generated networks. Point neurons (hh, lif) always
/// have a single compartment; `compartments` bounds the chain length of
/// multi-compartment neurons.
struct GenSpec {
  CountRange neurons{5, 50};
  CountRange compartments{1, 5};
  double mix_hh = 0.4, mix_lif = 0.4, mix_multi = 0.2;  // relative weights
  Range lif_gbar_leak{0.1, 0.3};  // mS/cm^2
  double lif_t_ref = 2.0;         // ms
  Range connection_p{0.02, 0.2};
  Range tau_rise{0.3, 2.0};    // ms
  Range tau_decay{3.0, 20.0};  // ms
  Range g_max{0.0005, 0.002};  // uS
  double e_exc = 0.0, e_inh = -75.0;  // mV
  double inhibitory_fraction = 0.2;
  Range weight{0.5, 1.5};
  Range delay{0.5, 3.0};  // ms
  Range soma_length{20.0, 40.0}, soma_width{20.0, 40.0};  // um
  Range dendrite_length{20.0, 100.0}, dendrite_width{1.0, 4.0};
  Range axon_length{20.0, 100.0}, axon_width{0.5, 2.0};
  double extent_um = 500.0;  // soma positions in [0, extent]^3
  double drive_rate_hz = 10.0;
  Range drive_weight{2.0, 6.0};
  dyn::StdpParams plasticity;
  std::uint64_t seed = 0;

  std::vector<std::string> violations() const;
  /// Throws ValidationError listing every violation.
  void validate() const;
  bool operator==(const GenSpec&) const = default;
};

Json to_json(const GenSpec& s);
/// Missing fields keep their defaults. Throws SchemaError with a JSON path.
GenSpec gen_spec_from_json(const Json& j);

/// Bumped whenever the sampling sequence of gen_network changes.
constexpr int kDatasetFormatVersion = 1;

struct SourceFile {
  std::string name;
  std::string text;
};

struct GeneratedNetwork {
  NetworkModel net;
  std::vector<SourceFile> sources;  // n<i>_c<k>.dyn, s<k>.dyn
};

/// One random stream seeded with `seed`, drawn in this order:
///   1. counts: neuron count, connection probability, then a chain length per
///      neuron (used by multi neurons only)
///   2. kinds: per neuron the kind, then the dendrite count of a multi chain
///      or the leak conductance of a lif neuron
///   3. geometry: per neuron the soma position, then length and width of each
///      compartment in chain order
///   4. connectivity: one Bernoulli draw per ordered pair (i, j), i != j,
///      row-major
///   5. synapse parameters, per synapse: inhibitory flag, tau_rise, tau_decay,
///      g_max, weight, delay
///   6. drive: per neuron the Poisson input weight
GeneratedNetwork gen_network(const GenSpec& spec, std::uint64_t seed);

// ------------------------------------------------------------ trajectories

struct TrajectoryProtocol {
  double duration_ms = 10000.0;  // plastic run
  double dt = 0.1;
  std::uint64_t seed = 0;
  /// When set, the network's Poisson inputs are replaced by one input per
  /// neuron at this rate (weight 1). Otherwise they are used as given.
  std::optional<double> drive_rate_hz;
  /// Fixed-weight run used to build each stage's graph.
  double probe_duration_ms = 2000.0;
};

struct TrajectoryStage {
  std::string label;  // stage_<k>
  double time_ms = 0.0;
  std::vector<double> weights;
  CompGraph graph;
};

struct LearningTrajectory {
  NetworkModel base;
  std::vector<TrajectoryStage> stages;
};

/// Simulates once with STDP applied online, records weights at n_snapshots
/// evenly spaced times (stage 0 = initial weights, last = end of the run) and
/// builds each stage's graph from a probe simulation at those weights. Every
/// probe uses the same seed. Throws ParamError when n_snapshots < 3.
LearningTrajectory gen_trajectory(const NetworkModel& net, const dyn::StdpParams& stdp,
                                  const TrajectoryProtocol& protocol, std::size_t n_snapshots);

// ------------------------------------------------------------ datasets

struct DatasetOptions {
  std::size_t n = 1;
  std::uint64_t root_seed = 0;
  double sim_duration_ms = 2000.0;
  double dt = 0.1;
  /// The first n_trajectories entries also get a learning trajectory.
  std::size_t n_trajectories = 0;
  std::size_t n_snapshots = 5;
  TrajectoryProtocol trajectory;  // seed is replaced per entry
  unsigned jobs = 1;
};

struct ManifestFile {
  std::string path;  // relative to the dataset directory
  std::string sha256;
};

struct ManifestEntry {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  std::string cgx;
  std::string sha256;
  std::size_t low_nodes = 0, low_edges = 0, up_nodes = 0, up_edges = 0;
  std::vector<std::string> trajectory;  // stage files; empty when none
};

struct DatasetManifest {
  int version = kDatasetFormatVersion;
  std::uint64_t root_seed = 0;
  GenSpec spec;
  std::vector<ManifestEntry> entries;
  std::vector<ManifestFile> files;  // every file but the manifest, sorted by path
};

std::string manifest_bytes(const DatasetManifest& m, const DatasetOptions& opt);
DatasetManifest manifest_from_json(const Json& j);

/// Writes entries/NNNN.cgx.json, sources/NNNN/*.dyn,
/// trajectories/NNNN/stage_K.cgx.json and finally manifest.json. On failure
/// the files written so far are removed and the error is rethrown.
DatasetManifest gen_dataset(const GenSpec& spec, const DatasetOptions& opt, const std::filesystem::path& out);

/// Problems found when checking every manifest hash against the files
/// (empty when the dataset is intact).
std::vector<std::string> verify_dataset(const std::filesystem::path& dir);

}  // namespace bganlab
