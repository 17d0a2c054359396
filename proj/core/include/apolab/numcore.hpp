#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "apolab/rng.hpp"

namespace apolab {

using Vec = std::vector<double>;

struct Matrix {
  int rows = 0;
  int cols = 0;
  Vec data;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Affine scorer: w.x + b
struct LinearParams {
  Vec w;
  double b = 0.0;
};

/// Two-layer scorer: w2 . tanh(W1 x + b1) + b2
struct Mlp2Params {
  Matrix w1;  // hidden x input
  Vec b1;
  Vec w2;
  double b2 = 0.0;
};

using ScorerParams = std::variant<LinearParams, Mlp2Params>;

/// Same shape as the ScorerParams it differentiates.
using Gradient = ScorerParams;

struct ScorerSpec {
  enum class Arch { Linear, Mlp2 };
  Arch arch = Arch::Mlp2;
  int hidden = 16;  // ignored for Linear
};

int input_dim(const ScorerParams& params);
int param_count(const ScorerParams& params);
bool all_finite(const ScorerParams& params);
bool same_shape(const ScorerParams& a, const ScorerParams& b);

Vec flatten(const ScorerParams& params);
/// Rebuild params with `shape`'s layout and `flat`'s values.
ScorerParams unflatten(const ScorerParams& shape, const Vec& flat);
ScorerParams zeros_like(const ScorerParams& params);
/// params += alpha * grad
void axpy(double alpha, const Gradient& grad, ScorerParams& params);

/// All entries i.i.d. N(0, (weight_scale/sqrt(fan_in))^2); fan_in is the
/// layer's input dimension. Draw order: Linear w then b; Mlp2 w1 row-major,
/// b1, w2, b2.
ScorerParams init_params(const ScorerSpec& spec, int in_dim, double weight_scale, Rng& rng);

double score(const ScorerParams& params, const Vec& x_feat);
std::pair<double, Gradient> score_grad(const ScorerParams& params, const Vec& x_feat);

/// Central differences, (f(p + eps e_i) - f(p - eps e_i)) / (2 eps).
Gradient finite_diff_grad(const ScorerParams& params,
                          const std::function<double(const ScorerParams&)>& objective,
                          double eps);

struct SgdState {
  double lr = 0.0;
};

struct AdamState {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Gradient m;
  Gradient v;
  std::int64_t t = 0;
};

using OptimizerState = std::variant<SgdState, AdamState>;

OptimizerState make_sgd(double lr);
OptimizerState make_adam(double lr, const ScorerParams& shape);

/// One descent step; Adam uses the standard bias-corrected moment update.
/// Non-finite gradient entries are rejected with a diagnostic.
std::pair<OptimizerState, ScorerParams> opt_step(OptimizerState state,
                                                 const ScorerParams& params,
                                                 const Gradient& grad);

// Stable scalar kernels shared by the loss modules.
double sigmoid(double z);
double softplus(double z);       // log(1 + exp(z)) without overflow
double log_sigmoid(double z);    // -softplus(-z)

}  // namespace apolab
