#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gesture/diffusion.hpp"
#include "gesture/error.hpp"
#include "gesture/pose_tensor.hpp"
#include "grad_check.hpp"

using namespace gesture;
using namespace gesture::diffusion;

namespace {

Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

/// Every frame of every sequence holds the same pose.
synth::GestureDataset constant_dataset(int sequences, int frames, int bones, int dims,
                                       const std::vector<double>& frame_pose, std::uint64_t seed) {
  synth::GestureDataset ds;
  ds.seq_len = frames;
  ds.bone_count = bones;
  ds.dims = dims;
  ds.feature_dim = 4;
  ds.fps = 15.0;
  Rng rng(seed);
  for (int s = 0; s < sequences; ++s) {
    synth::GesturePair p;
    p.pose.frames = frames;
    p.pose.bone_count = bones;
    p.pose.dims = dims;
    p.pose.fps = 15.0;
    for (int f = 0; f < frames; ++f) p.pose.data.insert(p.pose.data.end(), frame_pose.begin(), frame_pose.end());
    p.speech.frames = frames;
    p.speech.feature_dim = 4;
    p.speech.fps = 15.0;
    for (int i = 0; i < frames * 4; ++i) p.speech.features.push_back(standard_normal(rng));
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

GeneratorConfig tiny_config(int dims, int train_steps) {
  GeneratorConfig c;
  c.dims = dims;
  c.steps = 50;
  c.denoiser = {32, 2, 1, 64, 8, 8, 16};
  c.train_steps = train_steps;
  c.batch = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("forward sample closed form on a scalar") {
  DiffusionSchedule s;
  s.steps = 1;
  s.beta = {0.75};
  s.alpha = {0.25};
  s.alpha_bar = {0.25};
  const Tensor x = forward_sample(scalar(1.0), 0, scalar(2.0), s);
  CHECK(x[0] == doctest::Approx(0.5 + std::sqrt(0.75) * 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(forward_sample(scalar(1.0), 1, scalar(2.0), s), Error);
  CHECK_THROWS_AS(forward_sample(scalar(1.0), -1, scalar(2.0), s), Error);
}

TEST_CASE("noiseless forward sample and vanishing-beta step") {
  const auto s = DiffusionSchedule::linear(100);
  const Tensor x0({4}, std::vector<double>{0.3, -1.0, 2.0, 0.0});
  const Tensor x = forward_sample(x0, 40, Tensor({4}), s);
  for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == std::sqrt(s.alpha_bar[40]) * x0[i]);

  double prev = 1.0;
  for (double beta : {1e-2, 1e-4, 1e-6, 1e-8}) {
    DiffusionSchedule tiny;
    tiny.steps = 1;
    tiny.beta = {beta};
    tiny.alpha = {1.0 - beta};
    tiny.alpha_bar = {1.0 - beta};
    const double gap = std::abs(sample_step(scalar(1.0), 0, scalar(0.0), tiny, scalar(0.0))[0] - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("last step is close to a standard normal") {
  const auto s = DiffusionSchedule::linear(100);
  Rng rng(12);
  const std::size_t draws = 100000;
  Tensor eps({draws});
  for (double& v : eps.values()) v = standard_normal(rng);
  const Tensor xt = forward_sample(Tensor({draws}), 99, eps, s);
  double mean = 0.0, var = 0.0;
  for (double v : xt.values()) mean += v;
  mean /= draws;
  for (double v : xt.values()) var += (v - mean) * (v - mean);
  var /= draws - 1;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(draws)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / (draws - 1)) + (1.0 - (1.0 - s.alpha_bar[99])));
}

TEST_CASE("linear schedule invariants") {
  for (int steps : {1, 10, 50, 100, 1000}) {
    const auto s = DiffusionSchedule::linear(steps);
    CHECK(s.beta.size() == static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
      const auto i = static_cast<std::size_t>(t);
      CHECK(s.beta[i] > 0.0);
      CHECK(s.beta[i] < 1.0);
      CHECK(s.alpha[i] == doctest::Approx(1.0 - s.beta[i]));
      if (t > 0) CHECK(s.alpha_bar[i] < s.alpha_bar[i - 1]);
    }
    CHECK(s.alpha_bar.back() < 0.01);
  }
  CHECK_THROWS_AS(DiffusionSchedule::linear(0), Error);
}

TEST_CASE("forward sample matches Gaussian moments") {
  const auto s = DiffusionSchedule::linear(100);
  const double x0 = 0.7;
  Rng rng(11);
  for (int t : {0, 49, 99}) {
    const int draws = 100000;
    Tensor eps({std::size_t(draws)});
    for (double& v : eps.values()) v = standard_normal(rng);
    const Tensor xt = forward_sample(Tensor({std::size_t(draws)}, x0), t, eps, s);
    double mean = 0.0, var = 0.0;
    for (double v : xt.values()) mean += v;
    mean /= draws;
    for (double v : xt.values()) var += (v - mean) * (v - mean);
    var /= draws - 1;
    const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
    const double want_var = 1.0 - ab;
    CHECK(std::abs(mean - std::sqrt(ab) * x0) < 4.0 * std::sqrt(want_var / draws));
    CHECK(std::abs(var - want_var) < 4.0 * want_var * std::sqrt(2.0 / (draws - 1)));
  }
}

TEST_CASE("guidance arithmetic") {
  CHECK(guided_eps(scalar(1.0), scalar(0.0), 2.0)[0] == doctest::Approx(3.0));
  CHECK(guided_eps(scalar(0.4), scalar(-1.3), 0.0)[0] == doctest::Approx(0.4));
  const Tensor a({3}, std::vector<double>{0.2, -0.5, 1.1});
  const Tensor g = guided_eps(a, a, 7.5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(g[i] == doctest::Approx(a[i]).epsilon(1e-12));
  CHECK_THROWS_AS(guided_eps(scalar(1.0), scalar(0.0), -0.1), Error);
  CHECK_THROWS_AS(guided_eps(scalar(1.0), Tensor({2}), 1.0), Error);
}

TEST_CASE("ancestral step on a scalar") {
  DiffusionSchedule s;
  s.steps = 2;
  s.beta = {0.01, 0.02};
  s.alpha = {0.99, 0.98};
  s.alpha_bar = {0.99, 0.99 * 0.98};
  const Tensor x = sample_step(scalar(1.0), 0, scalar(0.0), s, scalar(0.0));
  CHECK(x[0] == doctest::Approx(1.0 / std::sqrt(0.99)).epsilon(1e-12));
  const Tensor y = sample_step(scalar(1.0), 1, scalar(0.5), s, scalar(2.0));
  const double want = (1.0 - 0.02 / std::sqrt(1.0 - 0.99 * 0.98) * 0.5) / std::sqrt(0.98) + std::sqrt(0.02) * 2.0;
  CHECK(y[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(sample_step(scalar(1.0), 0, scalar(0.0), s, scalar(0.3)), Error);
  CHECK_THROWS_AS(sample_step(scalar(1.0), 2, scalar(0.0), s, scalar(0.0)), Error);
}

TEST_CASE("denoiser gradients match finite differences") {
  DenoiserSpec spec{8, 2, 1, 12, 4, 4, 6};
  Denoiser net(6, 3, spec);
  Rng rng(3);
  net.init(rng);
  const Tensor x = testing::random_tensor({3, 5, 6}, rng);
  const Tensor cond = testing::random_tensor({3, 5, 3}, rng);
  const std::vector<int> steps{0, 7, 19};
  const std::vector<char> masked{0, 1, 0};
  const Tensor weights = testing::random_tensor({3, 5, 6}, rng);

  auto loss = [&]() {
    const Tensor y = net.forward(x, steps, cond, masked);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
    return s;
  };
  auto params = net.parameters();
  nn::zero_grad(params);
  net.forward_train(x, steps, cond, masked);
  net.backward(weights);
  double worst = 0.0;
  const double h = 1e-5;
  for (auto* p : params)
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = loss();
      p->value[i] = keep - h;
      const double down = loss();
      p->value[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - p->grad[i]) / std::max({std::abs(fd), std::abs(p->grad[i]), 1e-5}));
    }
  CHECK(worst < 1e-4);
  CHECK_THROWS_AS(net.backward(weights), Error);
}

TEST_CASE("masked rows ignore their speech features") {
  DenoiserSpec spec{8, 2, 1, 12, 4, 4, 6};
  Denoiser net(6, 3, spec);
  Rng rng(4);
  net.init(rng);
  const Tensor x = testing::random_tensor({2, 5, 6}, rng);
  Tensor cond = testing::random_tensor({2, 5, 3}, rng);
  const std::vector<int> steps{3, 3};
  const Tensor a = net.forward(x, steps, cond, {1, 1});
  for (double& v : cond.values()) v *= -4.0;
  const Tensor b = net.forward(x, steps, cond, {1, 1});
  CHECK(a == b);
  const Tensor c = net.forward(x, steps, Tensor(), {1, 1});
  CHECK(a == c);
  CHECK_FALSE(net.forward(x, steps, cond, {0, 1}) == a);
}

TEST_CASE("generator config validation and JSON") {
  GeneratorConfig c;
  CHECK_NOTHROW(c.validate());
  nlohmann::json j = c;
  CHECK(j.get<GeneratorConfig>() == c);
  auto bad = [](auto mutate) {
    GeneratorConfig g;
    mutate(g);
    return g;
  };
  CHECK_THROWS_AS(bad([](GeneratorConfig& g) { g.dims = 4; }).validate(), Error);
  CHECK_THROWS_AS(bad([](GeneratorConfig& g) { g.p_uncond = 1.5; }).validate(), Error);
  CHECK_THROWS_AS(bad([](GeneratorConfig& g) { g.guidance_weight = -1; }).validate(), Error);
  CHECK_THROWS_AS(bad([](GeneratorConfig& g) { g.schedule = "cosine"; }).validate(), Error);
  CHECK_THROWS_AS(bad([](GeneratorConfig& g) { g.denoiser.heads = 3; }).validate(), Error);
  j["unexpected"] = 1;
  CHECK_THROWS_AS(j.get<GeneratorConfig>(), Error);
}

TEST_CASE("dimension mismatch and empty requests") {
  const auto ds = constant_dataset(4, 6, 1, 2, {0.6, 0.8}, 1);
  CHECK_THROWS_AS(train(ds, tiny_config(3, 1)), Error);
  const auto gen = train(ds, tiny_config(2, 1));
  CHECK(gen.generate(ds.pairs[0].speech, 0, 9).empty());
  auto short_track = ds.pairs[0].speech;
  short_track.frames = 5;
  short_track.features.resize(20);
  try {
    gen.generate(short_track, 2, 9);
    FAIL("expected FrameMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }
}

TEST_CASE("toy generator recovers a constant pose") {
  const std::vector<double> target{0.6, 0.8};
  const auto ds = constant_dataset(64, 8, 1, 2, target, 2);
  const auto gen = train(ds, tiny_config(2, 2000));
  CHECK(gen.log().final_heldout_loss < gen.log().initial_heldout_loss);
  const auto samples = gen.generate(ds.pairs[0].speech, 500, 17);
  REQUIRE(samples.size() == 500);
  for (std::size_t k = 0; k < 2; ++k) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples)
      for (int f = 0; f < s.frames; ++f, ++n) {
        const double v = s.data[static_cast<std::size_t>(f) * 2 + k];
        sum += v;
        sq += v * v;
      }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
    CHECK(std::abs(mean - target[k]) < 0.1);
    CHECK(sd < 0.2);
  }
}

TEST_CASE("unconditional training ignores speech entirely") {
  const auto ds = constant_dataset(20, 6, 2, 3, {0.0, 0.6, 0.8, 1.0, 0.0, 0.0}, 3);
  auto cfg = tiny_config(3, 20);
  cfg.p_uncond = 1.0;
  const auto gen = train(ds, cfg);
  CHECK(gen.log().masked_fraction == 1.0);
  const auto a = gen.generate(ds.pairs[0].speech, 3, 21);
  const auto b = gen.generate(ds.pairs[5].speech, 3, 21);
  CHECK(a == b);
}

TEST_CASE("training and sampling are deterministic and round-trip through files") {
  const auto ds = constant_dataset(20, 6, 2, 3, {0.0, 0.6, 0.8, 1.0, 0.0, 0.0}, 4);
  const auto cfg = tiny_config(3, 30);
  const auto g1 = train(ds, cfg);
  const auto g2 = train(ds, cfg);
  CHECK(g1.checksum() == g2.checksum());
  const auto s1 = g1.generate(ds.pairs[1].speech, 4, 8);
  CHECK(s1 == g2.generate(ds.pairs[1].speech, 4, 8));
  for (const auto& s : s1) CHECK(skeleton::max_unit_norm_deviation(s) < 1e-9);

  // chain i depends only on (seed, i)
  const auto s_more = g1.generate(ds.pairs[1].speech, 6, 8);
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s_more[i] == s1[i]);

  const auto path = std::filesystem::temp_directory_path() / "gesture_gen_roundtrip.ckpt";
  g1.save(path);
  const auto g3 = TrainedGenerator::load_file(path);
  CHECK(g3.checksum() == g1.checksum());
  CHECK(g3.generate(ds.pairs[1].speech, 4, 8) == s1);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
  CHECK_THROWS_AS(TrainedGenerator::load_file(path), Error);
}
