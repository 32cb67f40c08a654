#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "gesture/error.hpp"
#include "gesture/nn/checkpoint.hpp"
#include "gesture/nn/layers.hpp"
#include "gesture/nn/optim.hpp"
#include "grad_check.hpp"

using namespace gesture;
using namespace gesture::nn;
using testing::max_grad_error;
using testing::random_tensor;

TEST_CASE("dense identity and scalar conv") {
  auto dense = make_layer(LayerSpec::dense(3, 3), "d");
  auto params = dense->parameters();
  params[0]->value.fill(0.0);
  for (int i = 0; i < 3; ++i) params[0]->value[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  Rng rng(1);
  const Tensor x = random_tensor({2, 5, 3}, rng);
  CHECK(dense->forward(x) == x);

  auto conv = make_layer(LayerSpec::conv1d(1, 1, 1), "c");
  conv->parameters()[0]->value.fill(2.0);
  const Tensor s = random_tensor({1, 7, 1}, rng);
  const Tensor y = conv->forward(s);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(y[i] == 2.0 * s[i]);
}

TEST_CASE("two-layer net matches a hand-written forward oracle") {
  Sequential net;
  net.add(LayerSpec::dense(3, 4), "fc1").add(LayerSpec::act(ActivationKind::Tanh), "act").add(LayerSpec::dense(4, 2), "fc2");
  Rng rng(77);
  net.init(rng);
  const Tensor x = random_tensor({5, 3}, rng);
  const Tensor y = net.forward(x);

  const auto ps = net.parameters();
  const Tensor &w1 = ps[0]->value, &b1 = ps[1]->value, &w2 = ps[2]->value, &b2 = ps[3]->value;
  double worst = 0.0;
  for (std::size_t r = 0; r < 5; ++r) {
    double h[4];
    for (std::size_t j = 0; j < 4; ++j) {
      double s = b1[j];
      for (std::size_t i = 0; i < 3; ++i) s += w1[j * 3 + i] * x[r * 3 + i];
      h[j] = std::tanh(s);
    }
    for (std::size_t k = 0; k < 2; ++k) {
      double s = b2[k];
      for (std::size_t j = 0; j < 4; ++j) s += w2[k * 4 + j] * h[j];
      worst = std::max(worst, std::abs(s - y[r * 2 + k]));
    }
  }
  CHECK(worst < 1e-6);

  // bitwise determinism
  CHECK(net.forward(x) == y);
}

TEST_CASE("conv1d forward matches a direct loop oracle") {
  for (Padding pad : {Padding::Zeros, Padding::Edge}) {
    auto conv = make_layer(LayerSpec::conv1d(2, 3, 3, 2, pad), "c");
    Rng rng(5);
    conv->init(rng);
    for (auto* p : conv->parameters())
      for (double& v : p->value.values()) v = standard_normal(rng);
    const Tensor x = random_tensor({2, 9, 2}, rng);
    const Tensor y = conv->forward(x);
    const Tensor& w = conv->parameters()[0]->value;  // [k, out, in]
    const Tensor& b = conv->parameters()[1]->value;
    double worst = 0.0;
    for (int n = 0; n < 2; ++n)
      for (int t = 0; t < 9; ++t)
        for (int o = 0; o < 3; ++o) {
          double s = b[static_cast<std::size_t>(o)];
          for (int k = 0; k < 3; ++k) {
            int src = t + (k - 1) * 2;
            if (src < 0 || src >= 9) {
              if (pad == Padding::Zeros) continue;
              src = std::clamp(src, 0, 8);
            }
            for (int i = 0; i < 2; ++i)
              s += w[static_cast<std::size_t>((k * 3 + o) * 2 + i)] * x[static_cast<std::size_t>((n * 9 + src) * 2 + i)];
          }
          worst = std::max(worst, std::abs(s - y[static_cast<std::size_t>((n * 9 + t) * 3 + o)]));
        }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("finite-difference gradient checks for every layer kind") {
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    Rng rng(1000 + trial);
    std::uniform_int_distribution<int> width(1, 5), len(3, 8), batch(1, 3);
    const std::size_t b = static_cast<std::size_t>(batch(rng));
    const std::size_t t = static_cast<std::size_t>(len(rng));
    const int in = width(rng), out = width(rng);

    std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers;
    layers.emplace_back("dense", make_layer(LayerSpec::dense(in, out), "dense"));
    layers.emplace_back("conv_zero", make_layer(LayerSpec::conv1d(in, out, 3, 1 + static_cast<int>(trial % 3)), "cz"));
    layers.emplace_back("conv_edge", make_layer(LayerSpec::conv1d(in, out, 2 + static_cast<int>(trial % 3), 2, Padding::Edge), "ce"));
    layers.emplace_back("layer_norm", make_layer(LayerSpec::layer_norm(in + 1), "ln"));
    layers.emplace_back("relu", make_layer(LayerSpec::act(ActivationKind::Relu), "relu"));
    layers.emplace_back("gelu", make_layer(LayerSpec::act(ActivationKind::Gelu), "gelu"));
    layers.emplace_back("tanh", make_layer(LayerSpec::act(ActivationKind::Tanh), "tanh"));
    const int heads = 1 + static_cast<int>(trial % 2);
    layers.emplace_back("attention", make_layer(LayerSpec::attention(4 * heads, heads, 6, trial % 2 == 0), "attn"));

    for (auto& [kind, layer] : layers) {
      layer->init(rng);
      // perturb norm gains so their gradients are exercised away from 1/0
      for (auto* p : layer->parameters())
        for (double& v : p->value.values()) v += 0.1 * standard_normal(rng);
      std::size_t w = static_cast<std::size_t>(in);
      if (kind == "layer_norm") w = static_cast<std::size_t>(in + 1);
      if (kind == "attention") w = static_cast<std::size_t>(4 * heads);
      const Tensor x = random_tensor({b, t, w}, rng);
      const double err = max_grad_error(*layer, x, 7 + trial);
      INFO(kind << " trial " << trial);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("residual composition gradients") {
  Sequential res(true);
  res.add(LayerSpec::conv1d(3, 3, 3, 3, Padding::Edge), "c").add(LayerSpec::act(ActivationKind::Relu), "r");
  Sequential net;
  net.add(LayerSpec::dense(2, 3), "in");
  net.add(std::make_unique<Sequential>(std::move(res)));
  net.add(LayerSpec::layer_norm(3), "ln").add(LayerSpec::dense(3, 2), "out");
  Rng rng(31);
  net.init(rng);
  const Tensor x = random_tensor({2, 10, 2}, rng);
  CHECK(max_grad_error(net, x, 3) < 1e-4);
}

TEST_CASE("loss minimum and bias gradient") {
  Sequential net;
  net.add(LayerSpec::dense(3, 4), "fc1").add(LayerSpec::act(ActivationKind::Gelu), "a").add(LayerSpec::dense(4, 2), "fc2");
  Rng rng(2);
  net.init(rng);
  const Tensor x = random_tensor({6, 3}, rng);
  const Tensor target = net.forward(x);
  Tensor grad;
  zero_grad(net.parameters());
  const double loss = mse_loss(net.forward_train(x), target, &grad);
  CHECK(loss == 0.0);
  net.backward(grad);
  for (auto* p : net.parameters())
    for (double g : p->grad.values()) CHECK(g == 0.0);

  auto dense = make_layer(LayerSpec::dense(2, 3), "d");
  dense->init(rng);
  const Tensor ones({4, 2}, 1.0);
  const Tensor upstream = random_tensor({4, 3}, rng);
  dense->forward_train(ones);
  dense->backward(upstream);
  const Tensor& gb = dense->parameters()[1]->grad;
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < 4; ++r) s += upstream[r * 3 + j];
    CHECK(gb[j] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("errors: shapes and missing forward state") {
  auto dense = make_layer(LayerSpec::dense(3, 2), "d");
  try {
    dense->forward(Tensor({4, 5}));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  try {
    dense->backward(Tensor({4, 2}));
    FAIL("expected NoForwardState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoForwardState);
  }
  CHECK_THROWS_AS(LayerSpec::conv1d(1, 1, 0).validate(), Error);
  CHECK_THROWS_AS(LayerSpec::attention(6, 4, 8).validate(), Error);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient is a no-op apart from the step counter") {
    Tensor w({3}, 1.5);
    const Tensor g({3}, 0.0);
    AdamState st;
    adam_step({&w}, {&g}, st, {});
    CHECK(st.step == 1);
    for (double v : w.values()) CHECK(v == 1.5);
  }
  SUBCASE("first step has magnitude lr * sign(g)") {
    Tensor w({3}, 0.0);
    const Tensor g({3}, std::vector<double>{0.3, -2.0, 1e-3});
    AdamState st;
    adam_step({&w}, {&g}, st, {0.01});
    CHECK(w[0] == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(std::abs(w[0] + 0.01) < 1e-6);
    CHECK(std::abs(w[1] - 0.01) < 1e-6);
    CHECK(std::abs(w[2] + 0.01) < 1e-6);
  }
  SUBCASE("quadratic converges") {
    Tensor w({1}, 0.0);
    Tensor g({1});
    AdamState st;
    for (int i = 0; i < 500; ++i) {
      g[0] = 2.0 * (w[0] - 3.0);
      adam_step({&w}, {&g}, st, {0.1});
    }
    CHECK(std::abs(w[0] - 3.0) < 1e-3);
  }
  SUBCASE("shape mismatch") {
    Tensor w({3});
    const Tensor g({2});
    AdamState st;
    CHECK_THROWS_AS(adam_step({&w}, {&g}, st, {}), Error);
  }
}

TEST_CASE("tiny-batch training loss is non-increasing for small learning rates") {
  int monotone = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(500 + static_cast<std::uint64_t>(trial));
    Sequential net;
    net.add(LayerSpec::dense(3, 8), "a").add(LayerSpec::act(ActivationKind::Tanh), "t").add(LayerSpec::dense(8, 2), "b");
    net.init(rng);
    const Tensor x = random_tensor({4, 3}, rng);
    const Tensor y = random_tensor({4, 2}, rng);
    AdamState st;
    double prev = 1e300;
    bool ok = true;
    for (int step = 0; step <= 100; ++step) {
      zero_grad(net.parameters());
      Tensor grad;
      const double loss = mse_loss(net.forward_train(x), y, &grad);
      if (loss > prev) ok = false;
      prev = loss;
      net.backward(grad);
      adam_step(net.parameters(), st, {1e-3});
    }
    monotone += ok;
  }
  CHECK(monotone >= 0.95 * trials);
}

TEST_CASE("receptive field") {
  CHECK(receptive_field({{3, 1}}) == 3);
  CHECK(receptive_field({{3, 1}, {3, 3}, {3, 9}, {3, 27}, {3, 81}}) == 243);
  CHECK(receptive_field({{1, 1}}) == 1);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Sequential net;
  net.add(LayerSpec::conv1d(2, 4, 3, 1), "c").add(LayerSpec::attention(4, 2, 8), "att").add(LayerSpec::dense(4, 1), "o");
  Rng rng(8);
  net.init(rng);
  round_to_f32(net.parameters());
  const ModelParams params = collect_params(net.parameters(), 8);
  const std::string bytes = checkpoint_bytes(params);
  std::istringstream in(bytes);
  const ModelParams back = read_checkpoint(in);
  CHECK(back == params);
  CHECK(checkpoint_bytes(back) == bytes);
  CHECK(bytes.substr(0, 4) == "CKP1");

  // header: version 1, tensor count
  std::uint32_t version, count;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  CHECK(version == 1);
  CHECK(count == params.tensors.size());

  Sequential other;
  other.add(LayerSpec::conv1d(2, 4, 3, 1), "c").add(LayerSpec::attention(4, 2, 8), "att").add(LayerSpec::dense(4, 1), "o");
  assign_params(back, other.parameters());
  const Tensor x = random_tensor({1, 6, 2}, rng);
  CHECK(other.forward(x) == net.forward(x));

  Sequential wrong;
  wrong.add(LayerSpec::dense(2, 2), "o");
  CHECK_THROWS_AS(assign_params(back, wrong.parameters()), Error);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
