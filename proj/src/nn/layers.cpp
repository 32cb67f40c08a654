#include "gesture/nn/layers.hpp"

#include <cmath>
#include <numbers>

#include "gesture/error.hpp"

namespace gesture::nn {

namespace {

struct SeqShape {
  std::size_t batch, time, width;
};

SeqShape seq_shape(const Tensor& x, const char* who) {
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  throw Error(ErrorCode::ShapeMismatch, std::string(who) + " expects [batch, time, features], got " +
                                             shape_string(x.shape()));
}

ConstMatrixMap slice(const Tensor& x, const SeqShape& s, std::size_t b) {
  return {x.data() + b * s.time * s.width, static_cast<Eigen::Index>(s.time), static_cast<Eigen::Index>(s.width)};
}

MatrixMap slice(Tensor& x, const SeqShape& s, std::size_t b) {
  return {x.data() + b * s.time * s.width, static_cast<Eigen::Index>(s.time), static_cast<Eigen::Index>(s.width)};
}

void require_cols(const Tensor& x, int width, const std::string& who) {
  if (x.rank() == 0 || x.cols() != static_cast<std::size_t>(width))
    throw Error(ErrorCode::ShapeMismatch, who + " expects " + std::to_string(width) + " features, got " +
                                              shape_string(x.shape()));
}

void uniform_init(Tensor& t, double fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (double& v : t.values()) v = uniform(rng, -bound, bound);
}

[[noreturn]] void no_forward(const std::string& who) {
  throw Error(ErrorCode::NoForwardState, who + ": backward called without forward_train");
}

// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(int in, int out, const std::string& name)
      : in_(in), out_(out), name_(name),
        w_{name + ".weight", Tensor({std::size_t(out), std::size_t(in)}), Tensor({std::size_t(out), std::size_t(in)})},
        b_{name + ".bias", Tensor({std::size_t(out)}), Tensor({std::size_t(out)})} {}

  Tensor forward(const Tensor& x) const override {
    require_cols(x, in_, name_);
    auto shape = x.shape();
    shape.back() = static_cast<std::size_t>(out_);
    Tensor y(shape);
    auto ym = y.matrix();
    ym.noalias() = x.matrix() * w_.value.matrix().transpose();
    ym.rowwise() += b_.value.matrix().row(0);
    return y;
  }

  Tensor forward_train(const Tensor& x) override {
    Tensor y = forward(x);
    input_ = x;
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (!input_) no_forward(name_);
    require_cols(g, out_, name_);
    const auto gm = g.matrix();
    w_.grad.matrix().noalias() += gm.transpose() * input_->matrix();
    b_.grad.matrix().row(0) += gm.colwise().sum();
    auto shape = g.shape();
    shape.back() = static_cast<std::size_t>(in_);
    Tensor gx(shape);
    gx.matrix().noalias() = gm * w_.value.matrix();
    input_.reset();
    return gx;
  }

  std::vector<Parameter*> parameters() override { return {&w_, &b_}; }
  void init(Rng& rng) override {
    uniform_init(w_.value, in_, rng);
    b_.value.fill(0.0);
  }

 private:
  int in_, out_;
  std::string name_;
  Parameter w_, b_;
  std::optional<Tensor> input_;
};

// ---------------------------------------------------------------------------

class Conv1d final : public Layer {
  auto weight(int k) const {
    return w_.value.matrix().middleRows(static_cast<Eigen::Index>(k) * out_, out_);
  }
  auto weight_grad(int k) { return w_.grad.matrix().middleRows(static_cast<Eigen::Index>(k) * out_, out_); }

 public:
  Conv1d(const LayerSpec& s, const std::string& name)
      : in_(s.in), out_(s.out), k_(s.kernel_size), dil_(s.dilation), padding_(s.padding), name_(name),
        w_{name + ".weight", Tensor({std::size_t(k_), std::size_t(out_), std::size_t(in_)}),
           Tensor({std::size_t(k_), std::size_t(out_), std::size_t(in_)})},
        b_{name + ".bias", Tensor({std::size_t(out_)}), Tensor({std::size_t(out_)})} {
    const int span = (k_ - 1) * dil_;
    pad_left_ = span / 2;
    pad_right_ = span - pad_left_;
  }

  Tensor forward(const Tensor& x) const override {
    Tensor padded;
    return run(x, padded);
  }

  Tensor forward_train(const Tensor& x) override {
    Tensor padded;
    Tensor y = run(x, padded);
    padded_ = std::move(padded);
    in_shape_ = x.shape();
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (!padded_) no_forward(name_);
    const SeqShape s = seq_shape(g, name_.c_str());
    const std::size_t tp = s.time + static_cast<std::size_t>(pad_left_ + pad_right_);
    const SeqShape ps{s.batch, tp, static_cast<std::size_t>(in_)};
    Tensor gx(in_shape_);
    const SeqShape xs{s.batch, s.time, static_cast<std::size_t>(in_)};
    RowMatrix gpad(static_cast<Eigen::Index>(tp), in_);
    auto bias_grad = b_.grad.matrix().row(0);
    for (std::size_t b = 0; b < s.batch; ++b) {
      const auto gb = slice(g, s, b);
      const auto pb = slice(*padded_, ps, b);
      gpad.setZero();
      bias_grad += gb.colwise().sum();
      for (int k = 0; k < k_; ++k) {
        const auto rows = pb.middleRows(k * dil_, static_cast<Eigen::Index>(s.time));
        weight_grad(k).noalias() += gb.transpose() * rows;
        gpad.middleRows(k * dil_, static_cast<Eigen::Index>(s.time)).noalias() += gb * weight(k);
      }
      auto gxb = slice(gx, xs, b);
      gxb = gpad.middleRows(pad_left_, static_cast<Eigen::Index>(s.time));
      if (padding_ == Padding::Edge) {
        for (int p = 0; p < pad_left_; ++p) gxb.row(0) += gpad.row(p);
        for (int p = 0; p < pad_right_; ++p) gxb.row(static_cast<Eigen::Index>(s.time) - 1) += gpad.row(pad_left_ + static_cast<Eigen::Index>(s.time) + p);
      }
    }
    padded_.reset();
    return gx;
  }

  std::vector<Parameter*> parameters() override { return {&w_, &b_}; }
  void init(Rng& rng) override {
    uniform_init(w_.value, static_cast<double>(in_) * k_, rng);
    b_.value.fill(0.0);
  }

 private:
  Tensor run(const Tensor& x, Tensor& padded) const {
    require_cols(x, in_, name_);
    const SeqShape s = seq_shape(x, name_.c_str());
    const std::size_t tp = s.time + static_cast<std::size_t>(pad_left_ + pad_right_);
    const SeqShape ps{s.batch, tp, static_cast<std::size_t>(in_)};
    padded = Tensor({s.batch, tp, static_cast<std::size_t>(in_)});
    auto shape = x.shape();
    shape.back() = static_cast<std::size_t>(out_);
    Tensor y(shape);
    const SeqShape ys{s.batch, s.time, static_cast<std::size_t>(out_)};
    for (std::size_t b = 0; b < s.batch; ++b) {
      const auto xb = slice(x, s, b);
      auto pb = slice(padded, ps, b);
      pb.middleRows(pad_left_, static_cast<Eigen::Index>(s.time)) = xb;
      if (padding_ == Padding::Edge && s.time > 0) {
        for (int p = 0; p < pad_left_; ++p) pb.row(p) = xb.row(0);
        for (int p = 0; p < pad_right_; ++p)
          pb.row(pad_left_ + static_cast<Eigen::Index>(s.time) + p) = xb.row(static_cast<Eigen::Index>(s.time) - 1);
      }
      auto yb = slice(y, ys, b);
      yb.rowwise() = b_.value.matrix().row(0);
      for (int k = 0; k < k_; ++k)
        yb.noalias() += pb.middleRows(k * dil_, static_cast<Eigen::Index>(s.time)) * weight(k).transpose();
    }
    return y;
  }

  int in_, out_, k_, dil_;
  Padding padding_;
  int pad_left_ = 0, pad_right_ = 0;
  std::string name_;
  Parameter w_, b_;
  std::optional<Tensor> padded_;
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------

class LayerNorm final : public Layer {
 public:
  LayerNorm(int width, const std::string& name)
      : width_(width), name_(name),
        gamma_{name + ".gamma", Tensor({std::size_t(width)}, 1.0), Tensor({std::size_t(width)})},
        beta_{name + ".beta", Tensor({std::size_t(width)}), Tensor({std::size_t(width)})} {}

  Tensor forward(const Tensor& x) const override {
    Tensor xhat, inv;
    return run(x, xhat, inv);
  }
  Tensor forward_train(const Tensor& x) override {
    Tensor xhat, inv;
    Tensor y = run(x, xhat, inv);
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv);
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (!xhat_) no_forward(name_);
    require_cols(g, width_, name_);
    const auto gm = g.matrix();
    const auto xh = xhat_->matrix();
    const auto gamma = gamma_.value.matrix().row(0);
    gamma_.grad.matrix().row(0) += (gm.array() * xh.array()).colwise().sum().matrix();
    beta_.grad.matrix().row(0) += gm.colwise().sum();
    Tensor gx(g.shape());
    auto gxm = gx.matrix();
    const double n = width_;
    for (Eigen::Index r = 0; r < gm.rows(); ++r) {
      const Eigen::RowVectorXd dxhat = gm.row(r).cwiseProduct(gamma);
      const double mean_d = dxhat.sum() / n;
      const double mean_dx = dxhat.dot(xh.row(r)) / n;
      gxm.row(r) = (*inv_std_)[static_cast<std::size_t>(r)] *
                   (dxhat.array() - mean_d - xh.row(r).array() * mean_dx).matrix();
    }
    xhat_.reset();
    inv_std_.reset();
    return gx;
  }

  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  void init(Rng&) override {
    gamma_.value.fill(1.0);
    beta_.value.fill(0.0);
  }

 private:
  Tensor run(const Tensor& x, Tensor& xhat, Tensor& inv) const {
    require_cols(x, width_, name_);
    xhat = Tensor(x.shape());
    inv = Tensor({x.rows()});
    Tensor y(x.shape());
    const auto xm = x.matrix();
    auto xh = xhat.matrix();
    auto ym = y.matrix();
    for (Eigen::Index r = 0; r < xm.rows(); ++r) {
      const double mean = xm.row(r).mean();
      const double var = (xm.row(r).array() - mean).square().mean();
      const double is = 1.0 / std::sqrt(var + kEps);
      inv[static_cast<std::size_t>(r)] = is;
      xh.row(r) = (xm.row(r).array() - mean) * is;
    }
    ym = (xh.array().rowwise() * gamma_.value.matrix().row(0).array()).rowwise() +
         beta_.value.matrix().row(0).array();
    return y;
  }

  static constexpr double kEps = 1e-5;
  int width_;
  std::string name_;
  Parameter gamma_, beta_;
  std::optional<Tensor> xhat_, inv_std_;
};

// ---------------------------------------------------------------------------

class Activation final : public Layer {
 public:
  explicit Activation(ActivationKind kind, const std::string& name) : kind_(kind), name_(name) {}

  Tensor forward(const Tensor& x) const override {
    Tensor y(x.shape());
    const auto in = array(x);
    auto out = array(y);
    switch (kind_) {
      case ActivationKind::Relu: out = in.max(0.0); break;
      case ActivationKind::Tanh: out = fast_tanh(in); break;
      case ActivationKind::Gelu: out = 0.5 * in * (1.0 + fast_tanh(kGeluC * (in + kGeluA * in.cube()))); break;
    }
    return y;
  }
  Tensor forward_train(const Tensor& x) override {
    input_ = x;
    return forward(x);
  }
  Tensor backward(const Tensor& g) override {
    if (!input_) no_forward(name_);
    require_same_shape(g, *input_, name_.c_str());
    Tensor gx(g.shape());
    const auto in = array(*input_);
    const auto gin = array(g);
    auto out = array(gx);
    switch (kind_) {
      case ActivationKind::Relu: out = gin * (in > 0.0).cast<double>(); break;
      case ActivationKind::Tanh: out = gin * (1.0 - fast_tanh(in).square()); break;
      case ActivationKind::Gelu: {
        const Eigen::ArrayXd t = fast_tanh(kGeluC * (in + kGeluA * in.cube()));
        out = gin * (0.5 * (1.0 + t) + 0.5 * in * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * in.square()));
        break;
      }
    }
    input_.reset();
    return gx;
  }

 private:
  static constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double kGeluA = 0.044715;

  static Eigen::Map<Eigen::ArrayXd> array(Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }
  static Eigen::Map<const Eigen::ArrayXd> array(const Tensor& t) {
    return {t.data(), static_cast<Eigen::Index>(t.size())};
  }
  // tanh through the vectorized exp; saturates cleanly at +-1.
  template <typename E>
  static Eigen::ArrayXd fast_tanh(const Eigen::ArrayBase<E>& u) {
    return 1.0 - 2.0 / ((2.0 * u).exp() + 1.0);
  }

  ActivationKind kind_;
  std::string name_;
  std::optional<Tensor> input_;
};

// ---------------------------------------------------------------------------

// Pre-norm block: h = x + MHA(LN(x)); y = h + MLP(LN(h)).
class AttentionBlock final : public Layer {
 public:
  AttentionBlock(const LayerSpec& s, const std::string& name)
      : dim_(s.in), heads_(s.heads), head_dim_(s.in / s.heads), positional_(s.positional), name_(name),
        ln1_(s.in, name + ".ln1"), q_(s.in, s.in, name + ".q"), k_(s.in, s.in, name + ".k"),
        v_(s.in, s.in, name + ".v"), o_(s.in, s.in, name + ".o"), ln2_(s.in, name + ".ln2"),
        fc1_(s.in, s.mlp_hidden, name + ".fc1"), act_(ActivationKind::Gelu, name + ".gelu"),
        fc2_(s.mlp_hidden, s.in, name + ".fc2") {}

  Tensor forward(const Tensor& x) const override {
    require_cols(x, dim_, name_);
    const SeqShape s = seq_shape(x, name_.c_str());
    Tensor x0 = with_position(x, s);
    const Tensor a = ln1_.forward(x0);
    Tensor attn = attend(q_.forward(a), k_.forward(a), v_.forward(a), s, nullptr);
    Tensor h = o_.forward(attn);
    h += x0;
    Tensor m = fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(h))));
    m += h;
    return m;
  }

  Tensor forward_train(const Tensor& x) override {
    require_cols(x, dim_, name_);
    const SeqShape s = seq_shape(x, name_.c_str());
    Tensor x0 = with_position(x, s);
    const Tensor a = ln1_.forward_train(x0);
    Cache c;
    c.q = q_.forward_train(a);
    c.k = k_.forward_train(a);
    c.v = v_.forward_train(a);
    c.shape = s;
    Tensor attn = attend(c.q, c.k, c.v, s, &c.probs);
    Tensor h = o_.forward_train(attn);
    h += x0;
    Tensor m = fc2_.forward_train(act_.forward_train(fc1_.forward_train(ln2_.forward_train(h))));
    m += h;
    cache_ = std::move(c);
    return m;
  }

  Tensor backward(const Tensor& g) override {
    if (!cache_) no_forward(name_);
    require_cols(g, dim_, name_);
    Tensor gh = ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(g))));
    gh += g;
    const Tensor gattn = o_.backward(gh);

    const Cache& c = *cache_;
    const SeqShape& s = c.shape;
    Tensor gq(c.q.shape()), gk(c.k.shape()), gv(c.v.shape());
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    const auto T = static_cast<Eigen::Index>(s.time);
    for (std::size_t b = 0; b < s.batch; ++b) {
      const auto qb = slice(c.q, s, b), kb = slice(c.k, s, b), vb = slice(c.v, s, b);
      const auto gob = slice(gattn, s, b);
      auto gqb = slice(gq, s, b), gkb = slice(gk, s, b), gvb = slice(gv, s, b);
      for (int hd = 0; hd < heads_; ++hd) {
        const Eigen::Index off = static_cast<Eigen::Index>(hd) * head_dim_;
        const ConstMatrixMap p(c.probs.data() + (b * heads_ + static_cast<std::size_t>(hd)) * s.time * s.time, T, T);
        const auto go = gob.middleCols(off, head_dim_);
        gvb.middleCols(off, head_dim_).noalias() = p.transpose() * go;
        const RowMatrix dp = go * vb.middleCols(off, head_dim_).transpose();
        RowMatrix ds = p.array() * (dp.colwise() - (dp.cwiseProduct(p)).rowwise().sum()).array();
        ds *= scale;
        gqb.middleCols(off, head_dim_).noalias() = ds * kb.middleCols(off, head_dim_);
        gkb.middleCols(off, head_dim_).noalias() = ds.transpose() * qb.middleCols(off, head_dim_);
      }
    }
    Tensor ga = q_.backward(gq);
    ga += k_.backward(gk);
    ga += v_.backward(gv);
    Tensor gx = ln1_.backward(ga);
    gx += gh;
    cache_.reset();
    return gx;
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (Layer* l : std::initializer_list<Layer*>{&ln1_, &q_, &k_, &v_, &o_, &ln2_, &fc1_, &fc2_})
      for (Parameter* p : l->parameters()) out.push_back(p);
    return out;
  }

  void init(Rng& rng) override {
    for (Layer* l : std::initializer_list<Layer*>{&ln1_, &q_, &k_, &v_, &o_, &ln2_, &fc1_, &fc2_}) l->init(rng);
  }

 private:
  struct Cache {
    Tensor q, k, v, probs;
    SeqShape shape{};
  };

  Tensor with_position(const Tensor& x, const SeqShape& s) const {
    Tensor x0 = x;
    if (!positional_) return x0;
    const RowMatrix pe = sinusoidal_encoding(s.time, s.width);
    for (std::size_t b = 0; b < s.batch; ++b) slice(x0, s, b) += pe;
    return x0;
  }

  // Softmax attention per batch element and head; probabilities stored as
  // [batch, heads, time, time] when requested.
  Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const SeqShape& s, Tensor* probs) const {
    Tensor out(q.shape());
    if (probs) *probs = Tensor({s.batch, std::size_t(heads_), s.time, s.time});
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    const auto T = static_cast<Eigen::Index>(s.time);
    RowMatrix scores(T, T);
    for (std::size_t b = 0; b < s.batch; ++b) {
      const auto qb = slice(q, s, b), kb = slice(k, s, b), vb = slice(v, s, b);
      auto ob = slice(out, s, b);
      for (int hd = 0; hd < heads_; ++hd) {
        const Eigen::Index off = static_cast<Eigen::Index>(hd) * head_dim_;
        scores.noalias() = qb.middleCols(off, head_dim_) * kb.middleCols(off, head_dim_).transpose();
        scores *= scale;
        const Eigen::VectorXd mx = scores.rowwise().maxCoeff();
        scores = (scores.colwise() - mx).array().exp();
        const Eigen::VectorXd inv = scores.rowwise().sum().cwiseInverse();
        scores = inv.asDiagonal() * scores;
        ob.middleCols(off, head_dim_).noalias() = scores * vb.middleCols(off, head_dim_);
        if (probs) {
          MatrixMap p(probs->data() + (b * heads_ + static_cast<std::size_t>(hd)) * s.time * s.time, T, T);
          p = scores;
        }
      }
    }
    return out;
  }

  int dim_, heads_, head_dim_;
  bool positional_;
  std::string name_;
  LayerNorm ln1_;
  Dense q_, k_, v_, o_;
  LayerNorm ln2_;
  Dense fc1_;
  Activation act_;
  Dense fc2_;
  std::optional<Cache> cache_;
};

}  // namespace

// ---------------------------------------------------------------------------

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv1d(int in, int out, int kernel_size, int dilation, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv1d;
  s.in = in;
  s.out = out;
  s.kernel_size = kernel_size;
  s.dilation = dilation;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::layer_norm(int width) {
  LayerSpec s;
  s.kind = LayerKind::LayerNorm;
  s.in = s.out = width;
  return s;
}

LayerSpec LayerSpec::act(ActivationKind kind) {
  LayerSpec s;
  s.kind = LayerKind::Activation;
  s.activation = kind;
  return s;
}

LayerSpec LayerSpec::attention(int model_dim, int heads, int mlp_hidden, bool positional) {
  LayerSpec s;
  s.kind = LayerKind::AttentionBlock;
  s.in = s.out = model_dim;
  s.heads = heads;
  s.mlp_hidden = mlp_hidden;
  s.positional = positional;
  return s;
}

void LayerSpec::validate() const {
  auto fail = [](const char* why) { throw Error(ErrorCode::InvalidConfig, why); };
  switch (kind) {
    case LayerKind::Dense:
      if (in < 1 || out < 1) fail("dense widths must be >= 1");
      break;
    case LayerKind::Conv1d:
      if (in < 1 || out < 1) fail("conv1d channels must be >= 1");
      if (kernel_size < 1 || dilation < 1) fail("conv1d kernel and dilation must be >= 1");
      break;
    case LayerKind::LayerNorm:
      if (in < 1) fail("layer_norm width must be >= 1");
      break;
    case LayerKind::Activation:
      break;
    case LayerKind::AttentionBlock:
      if (in < 1 || heads < 1 || mlp_hidden < 1) fail("attention widths and heads must be >= 1");
      if (in % heads != 0) fail("attention model_dim must be divisible by heads");
      break;
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::string& name) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<Dense>(spec.in, spec.out, name);
    case LayerKind::Conv1d: return std::make_unique<Conv1d>(spec, name);
    case LayerKind::LayerNorm: return std::make_unique<LayerNorm>(spec.in, name);
    case LayerKind::Activation: return std::make_unique<Activation>(spec.activation, name);
    case LayerKind::AttentionBlock: return std::make_unique<AttentionBlock>(spec, name);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown layer kind");
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& l : layers_) h = l->forward(h);
  if (residual_) h += x;
  return h;
}

Tensor Sequential::forward_train(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward_train(h);
  if (residual_) h += x;
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  if (residual_) g += grad_out;
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

void Sequential::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

int receptive_field(const std::vector<std::pair<int, int>>& conv_stack) {
  int rf = 1;
  for (const auto& [kernel, dilation] : conv_stack) rf += (kernel - 1) * dilation;
  return rf;
}

RowMatrix sinusoidal_encoding(std::size_t time, std::size_t width) {
  RowMatrix pe(static_cast<Eigen::Index>(time), static_cast<Eigen::Index>(width));
  for (std::size_t t = 0; t < time; ++t)
    for (std::size_t i = 0; i < width; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double arg = static_cast<double>(t) * rate;
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
  return pe;
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->grad.fill(0.0);
}

}  // namespace gesture::nn
