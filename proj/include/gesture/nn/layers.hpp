#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gesture/nn/tensor.hpp"
#include "gesture/rng.hpp"

namespace gesture::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

enum class LayerKind { Dense, Conv1d, LayerNorm, Activation, AttentionBlock };
enum class ActivationKind { Relu, Gelu, Tanh };
enum class Padding { Zeros, Edge };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int in = 0;
  int out = 0;
  // conv1d
  int kernel_size = 1;
  int dilation = 1;
  Padding padding = Padding::Zeros;
  // activation
  ActivationKind activation = ActivationKind::Relu;
  // attention_block: model_dim is `in`
  int heads = 1;
  int mlp_hidden = 0;
  bool positional = true;

  static LayerSpec dense(int in, int out);
  static LayerSpec conv1d(int in, int out, int kernel_size, int dilation = 1, Padding padding = Padding::Zeros);
  static LayerSpec layer_norm(int width);
  static LayerSpec act(ActivationKind kind);
  static LayerSpec attention(int model_dim, int heads, int mlp_hidden, bool positional = true);

  /// Throws InvalidConfig on non-positive widths, kernel, dilation or heads.
  void validate() const;
};

/// A differentiable layer. `forward` is pure and thread-safe; `forward_train`
/// records the intermediates that the following `backward` consumes.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) const = 0;
  virtual Tensor forward_train(const Tensor& x) = 0;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  /// Throws NoForwardState without a preceding forward_train.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void init(Rng& rng) { (void)rng; }
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::string& name);

/// Sequential composition, optionally wrapped as a residual `x + f(x)`.
class Sequential final : public Layer {
 public:
  explicit Sequential(bool residual = false) : residual_(residual) {}

  Sequential& add(std::unique_ptr<Layer> layer);
  Sequential& add(const LayerSpec& spec, const std::string& name) { return add(make_layer(spec, name)); }

  Tensor forward(const Tensor& x) const override;
  Tensor forward_train(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void init(Rng& rng) override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }

 private:
  bool residual_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// 1 + sum (kernel - 1) * dilation over the stack.
int receptive_field(const std::vector<std::pair<int, int>>& conv_stack);

/// Fixed sinusoidal encoding, time x width.
RowMatrix sinusoidal_encoding(std::size_t time, std::size_t width);

void zero_grad(const std::vector<Parameter*>& params);

}  // namespace gesture::nn
