// Acceptance suite: one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gesture/diffusion.hpp"
#include "gesture/error.hpp"
#include "gesture/harness.hpp"
#include "gesture/lifter.hpp"
#include "gesture/metrics.hpp"
#include "gesture/nn/layers.hpp"
#include "gesture/rng.hpp"
#include "gesture/runtime.hpp"
#include "gesture/synth_data.hpp"
#include "grad_check.hpp"

using namespace gesture;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool gating = true;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// 1. FGD oracles

Outcome fgd_oracles() {
  Rng rng(101);
  double worst_1d = 0.0, worst_diag = 0.0, worst_self = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double m1 = uniform(rng, -3, 3), m2 = uniform(rng, -3, 3);
    const double s1 = uniform(rng, 0.1, 3), s2 = uniform(rng, 0.1, 3);
    metrics::GestureStats a{Eigen::VectorXd::Constant(1, m1), Eigen::MatrixXd::Constant(1, 1, s1 * s1), 2};
    metrics::GestureStats b{Eigen::VectorXd::Constant(1, m2), Eigen::MatrixXd::Constant(1, 1, s2 * s2), 2};
    const double want = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    worst_1d = std::max(worst_1d, std::abs(metrics::fgd(a, b) - want));

    const int d = 2 + trial % 7;
    metrics::GestureStats p{Eigen::VectorXd(d), Eigen::MatrixXd::Zero(d, d), 2};
    metrics::GestureStats q{Eigen::VectorXd(d), Eigen::MatrixXd::Zero(d, d), 2};
    double want_diag = 0.0;
    for (int i = 0; i < d; ++i) {
      p.mu[i] = uniform(rng, -2, 2);
      q.mu[i] = uniform(rng, -2, 2);
      const double sp = uniform(rng, 0.1, 2), sq = uniform(rng, 0.1, 2);
      p.sigma(i, i) = sp * sp;
      q.sigma(i, i) = sq * sq;
      want_diag += (p.mu[i] - q.mu[i]) * (p.mu[i] - q.mu[i]) + (sp - sq) * (sp - sq);
    }
    worst_diag = std::max(worst_diag, std::abs(metrics::fgd(p, q) - want_diag));

    Eigen::MatrixXd l = Eigen::MatrixXd::Random(d, d);
    metrics::GestureStats full{p.mu, l * l.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d), 2};
    worst_self = std::max(worst_self, std::abs(metrics::fgd(full, full)));
  }
  const bool ok = worst_1d < 1e-8 && worst_diag < 1e-8 && worst_self < 1e-8;
  return {ok, "max |err| 1-D " + num(worst_1d) + ", diagonal " + num(worst_diag) + ", self " + num(worst_self) +
                  " (tol 1e-8)"};
}

// ---------------------------------------------------------------------------
// 2. Beat consistency

Outcome bc_exactness() {
  const metrics::BeatSet beats{{0.2, 0.9, 1.5}};
  const double coincident = metrics::beat_consistency(beats, beats, 0.1);
  const double shifted = metrics::beat_consistency(metrics::BeatSet{{1.0}}, metrics::BeatSet{{1.1}}, 0.1);
  const double err_shift = std::abs(shifted - std::exp(-0.5));

  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto draw = [&](int n) {
      std::set<double> s;
      while (static_cast<int>(s.size()) < n) s.insert(uniform(rng, 0.0, 5.0));
      return std::vector<double>(s.begin(), s.end());
    };
    const auto audio = draw(1 + trial % 9);
    const auto kin = draw(1 + (trial * 7) % 11);
    const double sigma = uniform(rng, 0.05, 0.5);
    double sum = 0.0;
    for (double t : audio) {
      double best = INFINITY;
      for (double k : kin) best = std::min(best, std::abs(t - k));
      sum += std::exp(-best * best / (2 * sigma * sigma));
    }
    const double want = sum / static_cast<double>(audio.size());
    worst = std::max(worst, std::abs(metrics::beat_consistency({audio}, {kin}, sigma) - want));
  }
  const bool ok = coincident == 1.0 && err_shift < 1e-9 && worst < 1e-12;
  return {ok, "coincident " + num(coincident, 17) + ", 0.1 s offset err " + num(err_shift) +
                  ", brute-force max err " + num(worst)};
}

// ---------------------------------------------------------------------------
// 3. Diversity

Outcome diversity_checks() {
  // Identical gestures through a trained encoder.
  synth::SynthConfig sc;
  sc.num_sequences = 40;
  const auto ds = synth::generate(sc, skeleton::SkeletonTopology::upper_body(), 303);
  metrics::EncoderConfig ec;
  ec.steps = 50;
  ec.seed = 3;
  const auto enc = metrics::train_encoder(ds.poses(), ec);
  const std::vector<skeleton::PoseSequence> same(200, ds.pairs[0].pose);
  const double zero = metrics::diversity(enc, same, 64, 9);

  // E[Div^2] = 2 Tr(S) / N for N-sized subsets of Gaussian latents.
  const int n = 50, dim = 4, trials = 1000;
  const Eigen::Vector4d sd(0.5, 1.0, 1.5, 2.0);
  const double trace = sd.squaredNorm();
  Rng rng(304);
  double sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    metrics::Latents l(2 * n, dim);
    for (int i = 0; i < 2 * n; ++i)
      for (int k = 0; k < dim; ++k) l(i, k) = 3.0 + sd[k] * standard_normal(rng);
    const double d = metrics::diversity(l, n, derive_seed(305, static_cast<std::uint64_t>(t)));
    sum_sq += d * d;
  }
  const double expected = 2.0 * trace / n;
  const double rel = std::abs(sum_sq / trials - expected) / expected;

  // Direct oracle: distance between the two subset means.
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(400 + seed);
    metrics::Latents l(150, 6);
    for (int i = 0; i < l.rows(); ++i)
      for (int k = 0; k < l.cols(); ++k) l(i, k) = standard_normal(r);
    const auto [a, b] = metrics::diversity_subsets(150, 40, seed);
    std::vector<double> ma(6, 0.0), mb(6, 0.0);
    for (std::size_t i : a)
      for (int k = 0; k < 6; ++k) ma[k] += l(static_cast<Eigen::Index>(i), k) / 40.0;
    for (std::size_t i : b)
      for (int k = 0; k < 6; ++k) mb[k] += l(static_cast<Eigen::Index>(i), k) / 40.0;
    double s = 0.0;
    for (int k = 0; k < 6; ++k) s += (ma[k] - mb[k]) * (ma[k] - mb[k]);
    worst = std::max(worst, std::abs(metrics::diversity(l, 40, seed) - std::sqrt(s)));
  }
  const bool ok = std::abs(zero) < 1e-8 && rel < 0.10 && worst < 1e-10;
  return {ok, "identical corpus " + num(zero) + ", E[Div^2] rel err " + num(rel) + " (tol 0.10), oracle max err " +
                  num(worst)};
}

// ---------------------------------------------------------------------------
// 4. Gradient checks

Outcome gradient_checks() {
  using namespace gesture::nn;
  double worst = 0.0;
  std::string worst_kind;
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    Rng rng(500 + trial);
    std::uniform_int_distribution<int> width(1, 5), len(3, 8), batch(1, 3);
    const auto b = static_cast<std::size_t>(batch(rng));
    const auto t = static_cast<std::size_t>(len(rng));
    const int in = width(rng), out = width(rng);
    const int heads = 1 + static_cast<int>(trial % 2);

    std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers;
    layers.emplace_back("dense", make_layer(LayerSpec::dense(in, out), "d"));
    layers.emplace_back("conv1d", make_layer(LayerSpec::conv1d(in, out, 3, 1 + static_cast<int>(trial % 3)), "c"));
    layers.emplace_back("conv1d_edge",
                        make_layer(LayerSpec::conv1d(in, out, 2 + static_cast<int>(trial % 3), 2, Padding::Edge), "e"));
    layers.emplace_back("layer_norm", make_layer(LayerSpec::layer_norm(in + 1), "n"));
    layers.emplace_back("relu", make_layer(LayerSpec::act(ActivationKind::Relu), "r"));
    layers.emplace_back("gelu", make_layer(LayerSpec::act(ActivationKind::Gelu), "g"));
    layers.emplace_back("tanh", make_layer(LayerSpec::act(ActivationKind::Tanh), "t"));
    layers.emplace_back("attention", make_layer(LayerSpec::attention(4 * heads, heads, 6, trial % 2 == 0), "a"));
    auto residual = std::make_unique<Sequential>(true);
    residual->add(LayerSpec::conv1d(in, in, 3, 2, Padding::Edge), "rc").add(LayerSpec::act(ActivationKind::Gelu), "rg");
    layers.emplace_back("residual", std::move(residual));

    for (auto& [kind, layer] : layers) {
      layer->init(rng);
      for (auto* p : layer->parameters())
        for (double& v : p->value.values()) v += 0.1 * standard_normal(rng);
      std::size_t w = static_cast<std::size_t>(in);
      if (kind == "layer_norm") w = static_cast<std::size_t>(in + 1);
      if (kind == "attention") w = static_cast<std::size_t>(4 * heads);
      const Tensor x = testing::random_tensor({b, t, w}, rng);
      const double err = testing::max_grad_error(*layer, x, 600 + trial);
      if (err > worst) {
        worst = err;
        worst_kind = kind;
      }
    }
  }
  return {worst < 1e-4, "max relative error " + num(worst) + " (" + worst_kind + ", tol 1e-4)"};
}

// ---------------------------------------------------------------------------
// 5. Diffusion

Outcome diffusion_checks() {
  using namespace gesture::diffusion;
  const auto schedule = DiffusionSchedule::linear(100);
  Rng rng(701);
  bool moments = true;
  std::string moment_detail;
  for (int t : {0, 49, 99}) {
    const int draws = 100000;
    const double x0 = -0.4;
    Tensor eps({static_cast<std::size_t>(draws)});
    for (double& v : eps.values()) v = standard_normal(rng);
    const Tensor xt = forward_sample(Tensor({static_cast<std::size_t>(draws)}, x0), t, eps, schedule);
    double m = 0.0, var = 0.0;
    for (double v : xt.values()) m += v;
    m /= draws;
    for (double v : xt.values()) var += (v - m) * (v - m);
    var /= draws - 1;
    const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double zm = std::abs(m - std::sqrt(ab) * x0) / std::sqrt((1 - ab) / draws);
    const double zv = std::abs(var - (1 - ab)) / ((1 - ab) * std::sqrt(2.0 / (draws - 1)));
    moments = moments && zm < 4 && zv < 4;
    moment_detail += " t" + std::to_string(t) + " z=" + num(zm, 2) + "/" + num(zv, 2);
  }

  // Two-bone constant pose.
  const std::vector<double> target{0.0, 0.6, 0.8, 0.8, 0.0, 0.6};
  synth::GestureDataset ds;
  ds.seq_len = 8;
  ds.bone_count = 2;
  ds.dims = 3;
  ds.feature_dim = 4;
  for (int s = 0; s < 64; ++s) {
    synth::GesturePair p;
    p.pose = skeleton::PoseSequence(8, 2, 3, 15.0);
    for (int f = 0; f < 8; ++f) std::copy(target.begin(), target.end(), p.pose.data.begin() + f * 6);
    p.speech.frames = 8;
    p.speech.feature_dim = 4;
    for (int i = 0; i < 32; ++i) p.speech.features.push_back(standard_normal(rng));
    ds.pairs.push_back(std::move(p));
  }
  GeneratorConfig cfg;
  cfg.dims = 3;
  cfg.steps = 50;
  cfg.denoiser = {32, 2, 1, 64, 8, 8, 16};
  cfg.train_steps = 2000;
  cfg.batch = 16;
  cfg.seed = 7;
  const auto gen = train(ds, cfg);
  const auto samples = gen.generate(ds.pairs[0].speech, 500, 19);
  double worst_mean = 0.0, worst_sd = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples)
      for (int f = 0; f < s.frames; ++f, ++n) {
        const double v = s.data[static_cast<std::size_t>(f) * 6 + k];
        sum += v;
        sq += v * v;
      }
    const double m = sum / static_cast<double>(n);
    worst_mean = std::max(worst_mean, std::abs(m - target[k]));
    worst_sd = std::max(worst_sd, std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m)));
  }

  Tensor c({5}), u({5});
  for (std::size_t i = 0; i < 5; ++i) {
    c[i] = standard_normal(rng);
    u[i] = standard_normal(rng);
  }
  const bool anchor = guided_eps(c, u, 0.0) == c;

  const bool ok = moments && worst_mean < 0.1 && worst_sd < 0.2 && anchor;
  return {ok, "moments" + moment_detail + "; toy mean err " + num(worst_mean) + " (tol 0.1), std " + num(worst_sd) +
                  " (tol 0.2); w=0 anchor " + (anchor ? "exact" : "broken")};
}

// ---------------------------------------------------------------------------
// 6. Lifter

Outcome lifter_checks() {
  const auto topo = skeleton::SkeletonTopology::upper_body();

  synth::SynthConfig inv;
  inv.ambiguity_mode = synth::AmbiguityMode::None;
  const auto inv_ds = synth::generate(inv, topo, 801);
  const auto [inv_train, inv_test] = synth::split(inv_ds, 0.9, 802);
  lifter::LifterConfig lc;
  lc.seed = 803;
  const auto inv_lifter = lifter::train_lifter(inv_train, lc);
  std::vector<skeleton::PoseSequence> flat, truth;
  for (const auto& p : inv_test.pairs) {
    flat.push_back(skeleton::project_2d(p.pose));
    truth.push_back(p.pose);
  }
  const double inv_err = lifter::mpjpe(inv_lifter.lift_all(flat), truth);

  synth::SynthConfig mir;
  mir.num_sequences = 3000;
  const auto mir_ds = synth::generate(mir, topo, 811);
  const auto [mir_train, mir_test] = synth::split(mir_ds, 0.9, 812);
  lc.seed = 813;
  const auto mir_lifter = lifter::train_lifter(mir_train, lc);
  std::vector<skeleton::PoseSequence> raw, midpoint;
  for (const auto& p : mir_test.pairs) {
    raw.push_back(mir_lifter.predict_raw(skeleton::project_2d(p.pose)));
    auto mid = p.pose;
    for (int f = 0; f < mid.frames; ++f)
      for (int b = 0; b < mid.bone_count; ++b) mid.at(f, b, skeleton::kDepthAxis) = 0.0;
    midpoint.push_back(std::move(mid));
  }
  const double mid_err = lifter::mpjpe(raw, midpoint);

  const auto first = mir_lifter.lift(skeleton::project_2d(mir_test.pairs[0].pose));
  bool deterministic = true;
  for (int r = 0; r < 5; ++r)
    deterministic = deterministic && mir_lifter.lift(skeleton::project_2d(mir_test.pairs[0].pose)) == first;
  const auto reloaded_path = std::filesystem::temp_directory_path() / "acceptance_lifter.ckpt";
  mir_lifter.save(reloaded_path);
  deterministic = deterministic &&
                  lifter::TrainedLifter::load_file(reloaded_path).lift(skeleton::project_2d(mir_test.pairs[0].pose)) == first;

  const bool ok = inv_err < 0.05 && mid_err < 0.1 && deterministic;
  return {ok, "invertible MPJPE " + num(inv_err) + " (tol 0.05), mirror midpoint distance " + num(mid_err) +
                  " (tol 0.1), bitwise deterministic " + (deterministic ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 7, 8, 10 and the informational properties share experiment runs.

struct PipelineRuns {
  std::filesystem::path work;
  std::map<std::uint64_t, std::vector<harness::MetricRow>> rows;
  std::map<std::uint64_t, std::filesystem::path> dirs;
  std::string full_csv;
  double seconds_seeds = 0.0;
  double seconds_full = 0.0;
};

std::string csv_of(const harness::MetricReport& r) {
  std::ostringstream out;
  harness::write_csv(r, out);
  return out.str();
}

const harness::MetricRow& row_of(const std::vector<harness::MetricRow>& rows, harness::Setting s) {
  for (const auto& r : rows)
    if (r.setting == s) return r;
  throw Error(ErrorCode::ConfigInvalid, "missing setting row");
}

void run_seeds(PipelineRuns& runs) {
  // Master seed 0 runs the full default pipeline (shared with criterion 10);
  // the others run only the settings the ordering needs.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t0 = Clock::now();
    harness::ExperimentConfig c;
    c.seed = seed;
    c.artifacts = runs.work / ("seed" + std::to_string(seed));
    std::filesystem::remove_all(c.artifacts);
    if (seed != 0) c.settings = {harness::Setting::Gen3d, harness::Setting::Gen2dLift};
    const auto report = harness::run_experiment(c);
    runs.rows[seed] = report.rows;
    runs.dirs[seed] = c.artifacts;
    if (seed == 0) {
      runs.full_csv = csv_of(report);
      harness::write_report(report, c.artifacts / "report");
      runs.seconds_full += seconds_since(t0);
    }
    runs.seconds_seeds += seconds_since(t0);
    std::cerr << "  seed " << seed << " done in " << num(seconds_since(t0), 4) << " s\n";
  }
}

Outcome ordering(const PipelineRuns& runs) {
  using harness::Setting;
  std::vector<double> dfgd, ddiv;
  std::string per_seed;
  for (const auto& [seed, rows] : runs.rows) {
    const auto& g3 = row_of(rows, Setting::Gen3d);
    const auto& lift = row_of(rows, Setting::Gen2dLift);
    dfgd.push_back(lift.fgd - g3.fgd);
    ddiv.push_back(g3.diversity - lift.diversity);
    per_seed += " [" + num(g3.fgd) + " vs " + num(lift.fgd) + "; " + num(g3.diversity) + " vs " + num(lift.diversity) +
                "]";
  }
  const double mf = mean(dfgd), sf = stddev(dfgd), md = mean(ddiv), sd = stddev(ddiv);
  const bool ok = mf > 3 * sf && md > 3 * sd && mf > 0 && md > 0 && runs.seconds_seeds < 1800;
  return {ok, "FGD margin " + num(mf) + " vs 3sd " + num(3 * sf) + ", Diversity margin " + num(md) + " vs 3sd " +
                  num(3 * sd) + ", " + num(runs.seconds_seeds, 4) + " s; per seed (gen3d vs gen2d_lift FGD; Div):" +
                  per_seed};
}

Outcome beat_drop(const PipelineRuns& runs) {
  using harness::Setting;
  std::vector<double> g3, lift;
  for (const auto& [seed, rows] : runs.rows) {
    g3.push_back(row_of(rows, Setting::Gen3d).bc);
    lift.push_back(row_of(rows, Setting::Gen2dLift).bc);
  }
  const bool holds = mean(lift) <= mean(g3);
  Outcome o{holds, "mean BC gen2d_lift " + num(mean(lift)) + " vs gen3d " + num(mean(g3)), false};
  if (!holds) o.detail += "; documented negative result, not gating";
  return o;
}

// Smoothing and collapse on the seed-0 artifacts: lift of the projected test
// split against the true test split.
std::vector<std::string> properties(const PipelineRuns& runs) {
  harness::ExperimentConfig c;
  c.artifacts = runs.dirs.at(0);
  const auto corpus = harness::prepare_dataset(c);
  const auto test = harness::split_dataset(c, corpus).second;
  const auto lifter_model = lifter::TrainedLifter::load_file(harness::artifact_path(c, harness::Artifact::Lifter));
  const auto enc = metrics::PoseEncoder::load_file(harness::artifact_path(c, harness::Artifact::Encoder3d));
  std::vector<skeleton::PoseSequence> truth = test.poses(), lifted;
  for (const auto& p : truth) lifted.push_back(lifter_model.lift(skeleton::project_2d(p)));

  auto mean_velocity = [](const std::vector<skeleton::PoseSequence>& seqs) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& q : seqs) {
      const auto v = metrics::angle_velocity(q);
      s += std::accumulate(v.begin() + 1, v.end(), 0.0);
      n += v.size() - 1;
    }
    return s / static_cast<double>(n);
  };
  const double v_lift = mean_velocity(lifted), v_true = mean_velocity(truth);
  const auto seed = derive_seed(c.seed, "acceptance-collapse");
  const double d_lift = metrics::diversity(enc, lifted, c.diversity_n, seed);
  const double d_true = metrics::diversity(enc, truth, c.diversity_n, seed);
  const auto s_true = metrics::gesture_stats(enc, truth);
  const auto half = truth.size() / 2;
  const std::vector<skeleton::PoseSequence> first(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<skeleton::PoseSequence> second(truth.begin() + static_cast<std::ptrdiff_t>(half), truth.end());
  const double f_lift = metrics::fgd(s_true, metrics::gesture_stats(enc, lifted));
  const double f_held = metrics::fgd(metrics::gesture_stats(enc, first), metrics::gesture_stats(enc, second));

  return {
      std::string("INFO smoothing: mean angle velocity lifted ") + num(v_lift) + " vs true " + num(v_true) +
          (v_lift <= v_true ? " (holds)" : " (does not hold on this corpus)"),
      std::string("INFO collapse: Diversity lifted ") + num(d_lift) + " vs true " + num(d_true) + ", FGD lifted " +
          num(f_lift) + " vs held-out halves " + num(f_held) +
          (d_lift < d_true && f_lift > f_held ? " (holds)" : " (does not hold on this corpus)"),
  };
}

Outcome determinism(PipelineRuns& runs) {
  const auto t0 = Clock::now();
  harness::ExperimentConfig c;
  c.artifacts = runs.work / "repeat";
  std::filesystem::remove_all(c.artifacts);
  const auto report = harness::run_experiment(c);
  const double second = seconds_since(t0);
  const double total = runs.seconds_full + second;
  const bool same = csv_of(report) == runs.full_csv;
  const bool ten = report.rows.size() == 10;
  return {same && ten && total < 1800, std::string("CSV ") + (same ? "byte-identical" : "differs") + ", " +
                                           std::to_string(report.rows.size()) + " settings, two runs " + num(total, 4) +
                                           " s (limit 1800)"};
}

// ---------------------------------------------------------------------------
// 9. Unconditional ablation

Outcome unconditional() {
  synth::SynthConfig sc;
  sc.num_sequences = 60;
  const auto ds = synth::generate(sc, skeleton::SkeletonTopology::upper_body(), 901);
  diffusion::GeneratorConfig cfg;
  cfg.p_uncond = 1.0;
  cfg.train_steps = 100;
  cfg.seed = 902;
  const auto gen = diffusion::train(ds, cfg);
  bool same = gen.log().masked_fraction == 1.0;
  for (int i = 1; i < 6 && same; ++i)
    same = gen.generate(ds.pairs[0].speech, 4, 903) == gen.generate(ds.pairs[static_cast<std::size_t>(i)].speech, 4, 903);
  std::vector<synth::SpeechTrack> a, b;
  for (int i = 0; i < 8; ++i) {
    a.push_back(ds.pairs[static_cast<std::size_t>(i)].speech);
    b.push_back(ds.pairs[static_cast<std::size_t>(59 - i)].speech);
  }
  same = same && gen.generate_batch(a, 904) == gen.generate_batch(b, 904);
  return {same, std::string("outputs for different speech under one seed ") + (same ? "bitwise equal" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string work = (std::filesystem::temp_directory_path() / "gesture_acceptance").string();
  app.add_option("criteria", only, "Criteria to run (default all)")->check(CLI::Range(1, 10));
  app.add_option("--work", work, "Scratch directory for pipeline runs");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> chosen = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                            : std::set<int>(only.begin(), only.end());

  PipelineRuns runs;
  runs.work = work;
  bool ran_seeds = false;
  int failures = 0;

  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f, double limit) {
    if (!chosen.count(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += "; over the " + num(limit, 4) + " s limit";
    }
    if (!o.pass && o.gating) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << " ["
              << num(secs, 4) << " s]" << std::endl;
  };

  auto need_seeds = [&] {
    if (ran_seeds) return;
    run_seeds(runs);
    ran_seeds = true;
  };

  report(1, "fgd oracles", fgd_oracles, 10);
  report(2, "beat consistency", bc_exactness, 0);
  report(3, "diversity", diversity_checks, 60);
  report(4, "gradients", gradient_checks, 60);
  report(5, "diffusion", diffusion_checks, 600);
  report(6, "lifter", lifter_checks, 600);
  report(7, "lifting ordering", [&] { need_seeds(); return ordering(runs); }, 0);
  report(8, "beat consistency drop", [&] { need_seeds(); return beat_drop(runs); }, 0);
  if (chosen.count(7) || chosen.count(8)) {
    try {
      for (const auto& line : properties(runs)) std::cout << line << std::endl;
    } catch (const std::exception& e) {
      std::cout << "INFO properties unavailable: " << e.what() << std::endl;
    }
  }
  report(9, "unconditional ablation", unconditional, 0);
  report(10, "end-to-end determinism", [&] {
    if (!ran_seeds) {
      const auto t0 = Clock::now();
      harness::ExperimentConfig c;
      c.artifacts = runs.work / "seed0";
      std::filesystem::remove_all(c.artifacts);
      runs.full_csv = csv_of(harness::run_experiment(c));
      runs.seconds_full = seconds_since(t0);
    }
    return determinism(runs);
  }, 0);

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
