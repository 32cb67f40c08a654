#include "gesture/nn/optim.hpp"

#include <cmath>

#include "gesture/error.hpp"

namespace gesture::nn {

void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, AdamState& state,
               const AdamOptions& opt) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "adam: params/grads count differ");
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(*params[i], *grads[i], "adam grad");
  if (state.m.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: state size differs");
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(*params[i], state.m[i], "adam state");

  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * g[j];
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamOptions& options) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  for (Parameter* p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(std::move(values), grads, state, options);
}

}  // namespace gesture::nn
