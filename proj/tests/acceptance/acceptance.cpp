// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are fixed below. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../support/attention_ref.hpp"
#include "../support/dyn_gen.hpp"
#include "../support/fixtures.hpp"
#include "../support/grad_check.hpp"
#include "../support/hh_reference.hpp"
#include "bganlab/bgan.hpp"
#include "bganlab/checkpoint.hpp"
#include "bganlab/dataset.hpp"
#include "bganlab/dyn_core.hpp"
#include "bganlab/dynlang.hpp"
#include "bganlab/file_io.hpp"
#include "bganlab/net_sim.hpp"
#include "bganlab/neuroml_io.hpp"
#include "bganlab/rng.hpp"
#include "bganlab/trainer.hpp"

using namespace bganlab;
using namespace bganlab::testsupport;
namespace fs = std::filesystem;

namespace {

// Collects failed checks; the first few are reported.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    if (ok()) return std::to_string(checks_) + " checks";
    std::ostringstream s;
    s << failures_.size() << "/" << checks_ << " checks failed: ";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, failures_.size()); ++i) s << (i ? "; " : "") << failures_[i];
    return s.str();
  }

 private:
  std::size_t checks_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ------------------------------------------------------------ 1

void dynamics(Check& c) {
  const auto [ref_final, ref_spikes] = ref_run({-65.0, kMInf65, kHInf65, kNInf65}, 10.0, 1000.0, 0.001);
  const auto spikes = run_hh(dyn::hh_steady_state(-65.0), 10.0, 1000.0, 0.1);
  c.expect(ref_spikes.size() > 10, "reference HH fires repetitively");
  c.expect(spikes.size() == ref_spikes.size(),
           "HH spike count " + std::to_string(spikes.size()) + " vs reference " + std::to_string(ref_spikes.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(spikes.size(), ref_spikes.size()); ++i)
    worst = std::max(worst, std::abs(spikes[i] - ref_spikes[i]));
  c.expect(worst < 1.0, "HH spike time deviation " + fmt(worst) + " ms");

  const double dt = 0.1;
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    dyn::LifParams p;
    p.c_m = rng.uniform(0.5, 2.0);
    p.gbar_leak = rng.uniform(0.02, 0.2);
    p.e_leak = rng.uniform(-75.0, -60.0);
    p.v_thresh = rng.uniform(-55.0, -45.0);
    p.v_reset = rng.uniform(-80.0, p.v_thresh - 5.0);
    const double v_inf = rng.uniform(p.v_thresh + 1.0, p.v_thresh + 30.0);
    const double i_total = (v_inf - p.e_leak) * p.gbar_leak;
    const double isi = p.tau_m() * std::log((v_inf - p.v_reset) / (v_inf - p.v_thresh));
    dyn::LifState s{p.v_reset};
    std::vector<double> t;
    for (long k = 0; t.size() < 4 && k < 10'000'000; ++k) {
      const auto step = dyn::step_lif(s, p, i_total, dt);
      s = step.state;
      if (step.spiked) t.push_back(static_cast<double>(k + 1) * dt);
    }
    c.expect(t.size() == 4, "LIF trial " + std::to_string(trial) + " fires");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double got = i == 0 ? t[0] : t[i] - t[i - 1];
      c.expect(std::abs(got - isi) <= dt, "LIF trial " + std::to_string(trial) + " interval " + fmt(got) +
                                              " vs closed form " + fmt(isi));
    }
  }

  // Peak of a single-spike double exponential: t* = ln(td/tr) tr td / (td - tr).
  for (const dyn::SynParams p : {dyn::SynParams{1.0, 0.5, 5.0, 0.0}, dyn::SynParams{0.02, 0.3, 20.0, 0.0},
                                 dyn::SynParams{0.5, 2.0, 3.0, -75.0}}) {
    const double tr = p.tau_rise, td = p.tau_decay;
    const double t_peak = std::log(td / tr) * tr * td / (td - tr);
    const double g_peak = p.g_max * (std::exp(-t_peak / td) - std::exp(-t_peak / tr));
    dyn::SynState s = dyn::syn_on_spike({});
    double best = -1.0, best_t = 0.0;
    for (int k = 0; k * dt <= 5.0 * td; ++k) {
      const double g = dyn::syn_conductance(s, p.g_max);
      if (g > best) {
        best = g;
        best_t = k * dt;
      }
      s = dyn::syn_step(s, p, dt);
    }
    c.expect(std::abs(best_t - t_peak) <= dt, "synapse peak time " + fmt(best_t) + " vs " + fmt(t_peak));
    const double at_peak = dyn::syn_conductance(dyn::syn_step(dyn::syn_on_spike({}), p, t_peak), p.g_max);
    c.expect(std::abs(at_peak / g_peak - 1.0) < 1e-6, "synapse peak amplitude " + fmt(at_peak) + " vs " + fmt(g_peak));
  }
}

// ------------------------------------------------------------ 2

void protocol(Check& c) {
  const NetworkModel net = feedforward_lif(3, 2);
  FiOptions opt;
  c.expect(opt.dt == 0.1, "default step is 0.1 ms (10 kHz)");
  std::vector<double> want;
  for (int k = 0; k <= 10; ++k) want.push_back(5.0 * k);
  c.expect(opt.input_rates_hz == want, "default input rates are 0, 5, ..., 50 Hz");

  std::vector<std::vector<double>> avg(net.neurons.size(), std::vector<double>(11, 0.0));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    opt.seed = seed;
    const RateMatrix m = fi_protocol(net, opt);
    c.expect(m.rows() == net.neurons.size() && m.cols() == 11, "rate matrix is N x 11");
    c.expect(m.input_rates_hz == want, "rate matrix columns");
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t k = 0; k < m.cols(); ++k) avg[i][k] += m.rates[i][k] / 10.0;
  }
  for (std::size_t i = 0; i < avg.size(); ++i) {
    c.expect(avg[i].back() > 0.0, "neuron " + std::to_string(i) + " responds at 50 Hz");
    for (std::size_t k = 1; k < 11; ++k)
      c.expect(avg[i][k] >= avg[i][k - 1] - 0.5, "neuron " + std::to_string(i) + " drops from " +
                                                      fmt(avg[i][k - 1]) + " to " + fmt(avg[i][k]) + " Hz");
  }
}

// ------------------------------------------------------------ 3

void attention(Check& c) {
  using namespace bgan;
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 8));
    Mask m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) m(i, j) = i == j || rng.bernoulli(0.4);
    const Mat a = masked_softmax(random_mat(rng, k, k, 20.0), m);
    for (int i = 0; i < k; ++i) {
      c.expect(std::abs(a.row(i).sum() - 1.0) <= 1e-12, "softmax row sum");
      for (int j = 0; j < k; ++j)
        if (!m(i, j)) c.expect(a(i, j) == 0.0, "inadmissible weight is exactly 0");
    }
  }

  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    for (std::size_t n_kv : {1u, 3u}) {
      ModelConfig cfg;
      cfg.n_head = 3;
      cfg.d_head = 13;
      cfg.n_kv = n_kv;
      const ModelParams p = random_params(cfg, seed);
      const Instance in = fixture_instance(39, seed);
      c.expect(in.f_low.rows() == 6, "fixture has 6 low nodes");
      const AttnOut out = bmsa(in.f_low, p.blocks[0].low.attn, in.topo.low.a, in.topo.low.b);
      const auto [ra, rb] = naive_bmsa(in.f_low, p.blocks[0].low.attn, in.topo.low.a, in.topo.low.b);
      c.expect(max_abs(out.f_a, ra) <= 1e-12 && max_abs(out.f_b, rb) <= 1e-12,
               "bmsa vs reference " + fmt(std::max(max_abs(out.f_a, ra), max_abs(out.f_b, rb))));
      const double d_low = max_abs(gan_block(in.f_low, p.blocks[0].low, in.topo.low),
                                   naive_gan(in.f_low, p.blocks[0].low, in.topo.low.a, in.topo.low.b));
      const double d_up = max_abs(gan_block(in.f_up, p.blocks[0].up, in.topo.up),
                                  naive_gan(in.f_up, p.blocks[0].up, in.topo.up.a, in.topo.up.b));
      c.expect(d_low <= 1e-12 && d_up <= 1e-12, "gan block vs reference " + fmt(std::max(d_low, d_up)));
    }
  }

  Rng frng(13);
  const Mat f = random_mat(frng, 6, 6);
  const Mask m = mask_forward(chain_level(6));
  for (std::size_t heads : {2u, 4u}) {
    ModelConfig full = small_config(heads, heads);
    full.d_model = 6;
    const AttnParams mh = random_params(full, 1).blocks[0].low.attn;
    c.expect(gmqsa(f, mh, m, heads) == mhsa(f, mh, m), "GMQSA(n_head) == MHSA");
    const AttnParams mq = random_params(small_config(heads, 1), 2).blocks[0].low.attn;
    c.expect(mqsa(f, mq, m) == gmqsa(f, mq, m, 1), "MQSA == GMQSA(1)");
  }
}

// ------------------------------------------------------------ 4

void gradients(Check& c, std::string& detail) {
  const bgan::ModelConfig cfg;  // 2 blocks, 3 heads, width 39, classification head
  c.expect(cfg.n_blocks == 2, "two blocks");
  const bgan::ModelParams p = bgan::init_model(cfg, 0);
  // Input seed 25 keeps every hidden pre-activation at least 1.5e-3 from the
  // ReLU kink, so no +-h pair straddles it.
  const Instance in = fixture_instance(39, 25);
  Rng rng(3);
  GradCheckInput g;
  g.f_low = in.f_low;
  g.f_up = in.f_up;
  g.topo = in.topo;
  g.cfg = cfg;
  g.w_low = random_mat(rng, 6, 39);
  g.w_up = random_mat(rng, 3, 39);
  g.w_probs = random_mat(rng, 9, static_cast<Eigen::Index>(cfg.n_classes));
  const GradCheckResult r = check_gradients(p, g, 1e-5, 1e-5);
  std::size_t params = 0;
  p.visit([&](const std::string&, const bgan::Mat& m) { params += static_cast<std::size_t>(m.size()); });
  c.expect(r.kinks == 0, std::to_string(r.kinks) + " entries straddle a ReLU kink");
  c.expect(r.checked >= params, "every parameter entry compared");
  c.expect(r.worst < 1e-4, "worst relative error " + fmt(r.worst) + " at " + r.worst_name);
  detail = std::to_string(params) + " parameters, worst relative error " + fmt(r.worst);
}

// ------------------------------------------------------------ 5

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
  return p;
}

bgan::Mat permute_rows(const bgan::Mat& m, const std::vector<std::size_t>& perm) {
  bgan::Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    out.row(static_cast<Eigen::Index>(perm[i])) = m.row(static_cast<Eigen::Index>(i));
  return out;
}

bgan::Mask permute_mask(const bgan::Mask& m, const std::vector<std::size_t>& perm) {
  bgan::Mask out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j)
      out(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) =
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

void structure(Check& c) {
  using namespace bgan;
  Rng rng(23);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ModelConfig cfg = small_config();
    const ModelParams p = random_params(cfg, 23 + seed);
    const Instance in = fixture_instance(6, 23 + seed);
    const ModelOutput base = model_forward(p, in.f_low, in.f_up, in.topo, cfg, HeadTarget::both);
    const auto pl = shuffled(6, rng), pu = shuffled(3, rng);
    Topology t;
    t.low = {permute_mask(in.topo.low.a, pl), permute_mask(in.topo.low.b, pl)};
    t.up = {permute_mask(in.topo.up.a, pu), permute_mask(in.topo.up.b, pu)};
    t.agg.assign(3, {});
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t m : in.topo.agg[r]) t.agg[pu[r]].push_back(pl[m]);
    const ModelOutput moved =
        model_forward(p, permute_rows(in.f_low, pl), permute_rows(in.f_up, pu), t, cfg, HeadTarget::both);
    std::vector<std::size_t> pall = pl;  // head rows: low nodes, then up nodes
    for (std::size_t u : pu) pall.push_back(6 + u);
    const double d = std::max({max_abs(moved.low, permute_rows(base.low, pl)),
                               max_abs(moved.up, permute_rows(base.up, pu)),
                               max_abs(moved.probs, permute_rows(base.probs, pall))});
    c.expect(d <= 1e-12, "permutation equivariance deviation " + fmt(d));

    // Locality: row i of a block output ignores rows outside Mask_A(i) and Mask_B(i).
    for (const auto& [f, level, gp] :
         {std::tuple<const Mat*, const LevelTopology*, const GanBlockParams*>{&in.f_low, &in.topo.low, &p.blocks[0].low},
          std::tuple<const Mat*, const LevelTopology*, const GanBlockParams*>{&in.f_up, &in.topo.up, &p.blocks[0].up}}) {
      const Mat out = gan_block(*f, *gp, *level);
      for (Eigen::Index i = 0; i < f->rows(); ++i)
        for (Eigen::Index j = 0; j < f->rows(); ++j) {
          if (level->a(i, j) || level->b(i, j)) continue;
          Mat g = *f;
          g.row(j) += random_mat(rng, 1, 6, 3.0);
          const double dev = (gan_block(g, *gp, *level).row(i) - out.row(i)).cwiseAbs().maxCoeff();
          c.expect(dev <= 1e-12, "row " + std::to_string(i) + " moved by " + fmt(dev) + " after perturbing row " +
                                     std::to_string(j));
        }
    }
  }

  // A chain labelled in random order: after sorting into topological order
  // the forward mask is the identity plus the first subdiagonal.
  for (std::size_t n : {1u, 2u, 5u, 9u, 16u}) {
    const auto label = shuffled(n, rng);  // label[k] = index of the k-th chain node
    CgLevel l;
    l.nodes.resize(n);
    for (std::size_t k = 0; k + 1 < n; ++k) l.edges.push_back({label[k], label[k + 1], {}, std::nullopt});
    const Mask fwd = mask_forward(l), bwd = mask_backward(l);
    bool banded = true, transposed = true;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const auto i = static_cast<Eigen::Index>(label[a]), j = static_cast<Eigen::Index>(label[b]);
        banded = banded && fwd(i, j) == (a == b || a == b + 1);
        transposed = transposed && bwd(i, j) == fwd(j, i);
      }
    c.expect(banded, "chain of " + std::to_string(n) + ": forward mask is banded lower-triangular");
    c.expect(transposed, "chain of " + std::to_string(n) + ": backward mask is its transpose");
  }
}

// ------------------------------------------------------------ 6

void parsers(Check& c) {
  using namespace dynlang;
  Rng rng(6);
  std::size_t identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const Program p = random_program(rng);
    const std::string src = print(p);
    const Program back = parse(src);
    identical += back == p && print(back) == src;
  }
  c.expect(identical == 1000, std::to_string(identical) + "/1000 programs round-trip");

  using Edges = std::vector<std::pair<std::size_t, std::size_t>>;
  struct DfgCase {
    const char* src;
    std::size_t nodes;
    Edges edges;
  };
  // Sites in statement order, then external inputs in first-use order.
  const DfgCase dfgs[] = {
      {"a = 1; b = a;", 2, {{0, 1}}},
      {"a = 1; if (x > 0) { a = 2; } b = a;", 5, {{0, 3}, {2, 3}, {4, 1}}},
      {"a = 1; if (a > 0) { b = a; } else { b = a + 1; } c = b;", 5, {{0, 1}, {0, 2}, {0, 3}, {2, 4}, {3, 4}}},
  };
  for (const auto& d : dfgs) {
    const Dfg g = build_dfg(parse(d.src));
    Edges got = g.edges;
    std::sort(got.begin(), got.end());
    Edges want = d.edges;
    std::sort(want.begin(), want.end());
    c.expect(g.nodes.size() == d.nodes && got == want, std::string("DFG of '") + d.src + "'");
  }
  struct CfgCase {
    const char* src;
    std::size_t blocks, edges;
  };
  const CfgCase cfgs[] = {
      {"a = 1; b = a; c = b;", 3, 2},
      {"a = 1; if (a > 0) { b = 1; } else { b = 2; } c = b;", 6, 6},
      {"a = 1; if (a > 0) { b = 1; } c = 2;", 5, 5},
      {"if (a > 0) { if (b > 0) { c = 1; } } if (d > 0) { e = 1; } else { e = 2; }", 10, 12},
  };
  for (const auto& d : cfgs) {
    const Cfg g = build_cfg(parse(d.src));
    c.expect(g.blocks.size() == d.blocks && g.edges.size() == d.edges,
             std::string("CFG of '") + d.src + "': " + std::to_string(g.blocks.size()) + " blocks, " +
                 std::to_string(g.edges.size()) + " edges");
  }

  const NetworkModel a = parse_neuroml(read_file(std::string(BGANLAB_FIXTURE_DIR) + "/two_populations.nml"));
  c.expect(a.neurons.size() == 4 && a.synapses.size() == 2 && a.pulse_inputs.size() == 1 &&
               a.poisson_inputs.empty() && a.gap_junctions.empty(),
           "NeuroML fixture counts");
  if (a.neurons.size() == 4 && a.synapses.size() == 2 && a.pulse_inputs.size() == 1) {
    const dyn::LifParams& la = a.neurons[0].lif;
    const dyn::LifParams& lb = a.neurons[3].lif;
    c.expect(la.e_leak == -65.0 && la.v_thresh == -50.0 && la.v_reset == -70.0 && std::abs(la.tau_m() - 20.0) < 1e-12,
             "lifA parameters");
    c.expect(lb.e_leak == -60.0 && std::abs(lb.v_thresh + 48.0) < 1e-12 && lb.v_reset == -72.0 &&
                 std::abs(lb.tau_m() - 15.0) < 1e-12,
             "lifB parameters");
    const Synapse& s0 = a.synapses[0];
    const Synapse& s1 = a.synapses[1];
    c.expect(s0.pre == 0 && s0.post == 2 && std::abs(s0.params.g_max - 0.001) < 1e-15 && s0.params.tau_rise == 0.5 &&
                 s0.params.tau_decay == 5.0 && s0.params.e_syn == 0.0 && s0.weight == 1.0 && s0.delay_ms == 1.0,
             "connection 0");
    c.expect(s1.pre == 1 && s1.post == 3 && s1.weight == 1.5 && s1.delay_ms == 2.0, "connection 1");
    const PulseInput& p = a.pulse_inputs[0];
    c.expect(p.neuron == 0 && p.delay_ms == 50.0 && p.duration_ms == 200.0 && std::abs(p.amplitude_na - 0.05) < 1e-15,
             "pulse input");
  }
  const NetworkModel b = parse_neuroml(export_neuroml(a));
  c.expect(b.neurons.size() == a.neurons.size() && b.synapses.size() == a.synapses.size(), "round-trip counts");
  FiOptions opt;
  opt.seed = 4;
  const double rmse = compare_responses(fi_protocol(a, opt), fi_protocol(b, opt)).global_rmse;
  c.expect(rmse < 0.1, "round-trip F-I RMSE " + fmt(rmse) + " Hz");
}

// ------------------------------------------------------------ 7

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

void determinism(Check& c) {
  const fs::path root = fs::temp_directory_path() / "bganlab_acceptance_determinism";
  fs::remove_all(root);
  GenSpec spec;
  DatasetOptions opt;
  opt.n = 5;
  opt.root_seed = 20240501;
  const DatasetManifest m1 = gen_dataset(spec, opt, root / "a");
  opt.jobs = 2;
  gen_dataset(spec, opt, root / "b");
  const auto ta = read_tree(root / "a"), tb = read_tree(root / "b");
  c.expect(ta.size() > 5 && ta == tb, "dataset directories are byte-identical");
  c.expect(verify_dataset(root / "a").empty(), "manifest hashes verify");

  std::vector<CompGraph> graphs;
  for (const auto& e : m1.entries) graphs.push_back(from_cgx(read_file(root / "a" / e.cgx)));
  TrainConfig tc;
  tc.seed = 99;
  tc.epochs = 10;
  tc.objectives = {Objective::autoencode, Objective::masked, Objective::edge};
  save_checkpoint(root / "a.ckpt", train(graphs, tc).params, tc);
  save_checkpoint(root / "b.ckpt", train(graphs, tc).params, tc);
  c.expect(read_file(root / "a.ckpt") == read_file(root / "b.ckpt"), "checkpoints are byte-identical");
  fs::remove_all(root);
}

// ------------------------------------------------------------ 8

void trajectory(Check& c) {
  const dyn::StdpParams stdp;
  const std::size_t pairings = 100;
  TrajectoryProtocol proto;
  proto.duration_ms = 100.0 + 500.0 * static_cast<double>(pairings);
  proto.probe_duration_ms = 50.0;
  struct Case {
    double lag, w0, expected;
  };
  const Case cases[] = {
      {10.0, 1.0, 1.0 + pairings * stdp.a_plus * std::exp(-10.0 / stdp.tau_plus)},
      {-10.0, 1.5, 1.5 - pairings * stdp.a_minus * std::exp(-10.0 / stdp.tau_minus)},
  };
  for (const Case& k : cases) {
    c.expect(k.expected > stdp.w_min && k.expected < stdp.w_max, "closed form stays inside the bounds");
    const LearningTrajectory tr = gen_trajectory(forced_pairing(pairings, k.lag, k.w0), stdp, proto, 3);
    const double got = tr.stages.back().weights.at(0);
    c.expect(std::abs(got - k.expected) < 1e-6,
             "lag " + fmt(k.lag) + " ms: weight " + fmt(got) + " vs closed form " + fmt(k.expected));
  }

  GenSpec spec;
  spec.neurons = {8, 12};
  const NetworkModel net = gen_network(spec, 8).net;
  TrajectoryProtocol tp;
  tp.duration_ms = 5000.0;
  tp.probe_duration_ms = 1000.0;
  tp.seed = 8;
  const TrainConfig tc;
  const TrainParams params = init_train_params(tc);
  auto snapshots = [](const LearningTrajectory& tr) {
    std::vector<std::pair<std::string, CompGraph>> s;
    for (const auto& st : tr.stages) s.emplace_back(st.label, st.graph);
    return s;
  };
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };

  const Correlated live = record_and_correlate(snapshots(gen_trajectory(net, stdp, tp, 5)), params, tc);
  c.expect(live.trace.size() == 5 && live.report.snapshots.size() == 5, "5 snapshots traced");
  c.expect(!live.report.synapses.empty() && live.report.synapses.size() == net.synapses.size(), "one row per synapse");
  c.expect(live.report.defined > 0, "plastic trajectory has defined correlations");
  for (const SynapseCorrelation& s : live.report.synapses) {
    const bool flat = constant(s.attention) || constant(s.efficacy);
    c.expect(s.r.has_value() != flat, "synapse " + std::to_string(s.synapse) + " flagged iff a sequence is constant");
    if (s.r) c.expect(std::abs(*s.r) <= 1.0, "|r| <= 1 for synapse " + std::to_string(s.synapse));
  }

  dyn::StdpParams frozen = stdp;
  frozen.a_plus = frozen.a_minus = 0.0;
  const Correlated still = record_and_correlate(snapshots(gen_trajectory(net, frozen, tp, 5)), params, tc);
  c.expect(still.report.defined == 0 && still.report.undefined == net.synapses.size() && !still.report.mean_r,
           "constant trajectory: every correlation flagged undefined");
}

// ------------------------------------------------------------ 9

void descent(Check& c, std::string& detail) {
  TrainConfig tc;  // masked objective, node-wise, 200 epochs, lr 1e-3, seed 0
  c.expect(tc.learning_rate == 1e-3 && tc.epochs == 200 && tc.objectives == std::set<Objective>{Objective::masked},
           "default configuration");
  const TrainResult r = train({two_neuron_graph()}, tc);
  const double first = r.curve.front().masked, last = r.curve.back().masked;
  c.expect(last <= 0.5 * first, "masked loss " + fmt(first) + " -> " + fmt(last));
  detail = "masked loss " + fmt(first) + " -> " + fmt(last);
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<void(Check&, std::string&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "dynamics oracle equivalence", 10.0, [](Check& c, std::string&) { dynamics(c); }},
      {2, "F-I protocol fidelity", 120.0, [](Check& c, std::string&) { protocol(c); }},
      {3, "attention correctness", 5.0, [](Check& c, std::string&) { attention(c); }},
      {4, "gradient validation", 60.0, gradients},
      {5, "structural invariants", 0.0, [](Check& c, std::string&) { structure(c); }},
      {6, "parser suite", 0.0, [](Check& c, std::string&) { parsers(c); }},
      {7, "pipeline determinism", 180.0, [](Check& c, std::string&) { determinism(c); }},
      {8, "learning-trajectory sanity", 120.0, [](Check& c, std::string&) { trajectory(c); }},
      {9, "training descent", 120.0, descent},
  };
  int failed = 0;
  for (const Criterion& k : criteria) {
    Check check;
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      k.run(check, detail);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (k.budget_s > 0.0) check.expect(secs < k.budget_s, "runtime " + fmt(secs) + " s over " + fmt(k.budget_s) + " s");
    const bool ok = check.ok();
    failed += !ok;
    std::printf("%s criterion %d: %s (%s%s%s; %.2f s)\n", ok ? "PASS" : "FAIL", k.id, k.name, check.summary().c_str(),
                detail.empty() ? "" : "; ", detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
