#include "apolab/numcore.hpp"

#include <cmath>
#include <stdexcept>

namespace apolab {

namespace {

void check_dim(int want, int got, const char* where) {
  if (want != got) {
    throw std::invalid_argument(std::string(where) + ": feature dim " + std::to_string(got) +
                                " does not match scorer input dim " + std::to_string(want));
  }
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool finite_vec(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

int input_dim(const ScorerParams& params) {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>)
          return static_cast<int>(p.w.size());
        else
          return p.w1.cols;
      },
      params);
}

int param_count(const ScorerParams& params) {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>)
          return static_cast<int>(p.w.size()) + 1;
        else
          return static_cast<int>(p.w1.data.size() + p.b1.size() + p.w2.size()) + 1;
      },
      params);
}

bool all_finite(const ScorerParams& params) {
  return std::visit(
      [](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>)
          return finite_vec(p.w) && std::isfinite(p.b);
        else
          return finite_vec(p.w1.data) && finite_vec(p.b1) && finite_vec(p.w2) &&
                 std::isfinite(p.b2);
      },
      params);
}

bool same_shape(const ScorerParams& a, const ScorerParams& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<LinearParams>(a)) {
    return std::get<LinearParams>(a).w.size() == std::get<LinearParams>(b).w.size();
  }
  const auto& ma = std::get<Mlp2Params>(a);
  const auto& mb = std::get<Mlp2Params>(b);
  return ma.w1.rows == mb.w1.rows && ma.w1.cols == mb.w1.cols &&
         ma.b1.size() == mb.b1.size() && ma.w2.size() == mb.w2.size();
}

Vec flatten(const ScorerParams& params) {
  Vec out;
  out.reserve(static_cast<std::size_t>(param_count(params)));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          out.insert(out.end(), p.w.begin(), p.w.end());
          out.push_back(p.b);
        } else {
          out.insert(out.end(), p.w1.data.begin(), p.w1.data.end());
          out.insert(out.end(), p.b1.begin(), p.b1.end());
          out.insert(out.end(), p.w2.begin(), p.w2.end());
          out.push_back(p.b2);
        }
      },
      params);
  return out;
}

ScorerParams unflatten(const ScorerParams& shape, const Vec& flat) {
  if (static_cast<int>(flat.size()) != param_count(shape))
    throw std::invalid_argument("unflatten: size mismatch");
  ScorerParams out = shape;
  std::size_t k = 0;
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          for (auto& w : p.w) w = flat[k++];
          p.b = flat[k++];
        } else {
          for (auto& w : p.w1.data) w = flat[k++];
          for (auto& b : p.b1) b = flat[k++];
          for (auto& w : p.w2) w = flat[k++];
          p.b2 = flat[k++];
        }
      },
      out);
  return out;
}

ScorerParams zeros_like(const ScorerParams& params) {
  return unflatten(params, Vec(static_cast<std::size_t>(param_count(params)), 0.0));
}

void axpy(double alpha, const Gradient& grad, ScorerParams& params) {
  if (!same_shape(grad, params)) throw std::invalid_argument("axpy: shape mismatch");
  if (std::holds_alternative<LinearParams>(params)) {
    auto& p = std::get<LinearParams>(params);
    const auto& g = std::get<LinearParams>(grad);
    for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] += alpha * g.w[i];
    p.b += alpha * g.b;
    return;
  }
  auto& p = std::get<Mlp2Params>(params);
  const auto& g = std::get<Mlp2Params>(grad);
  for (std::size_t i = 0; i < p.w1.data.size(); ++i) p.w1.data[i] += alpha * g.w1.data[i];
  for (std::size_t i = 0; i < p.b1.size(); ++i) p.b1[i] += alpha * g.b1[i];
  for (std::size_t i = 0; i < p.w2.size(); ++i) p.w2[i] += alpha * g.w2[i];
  p.b2 += alpha * g.b2;
}

ScorerParams init_params(const ScorerSpec& spec, int in_dim, double weight_scale, Rng& rng) {
  if (in_dim < 1) throw std::invalid_argument("init_params: in_dim must be >= 1");
  if (weight_scale <= 0.0) throw std::invalid_argument("init_params: weight_scale must be > 0");
  if (spec.arch == ScorerSpec::Arch::Linear) {
    LinearParams p;
    const double std1 = weight_scale / std::sqrt(static_cast<double>(in_dim));
    p.w.resize(static_cast<std::size_t>(in_dim));
    for (auto& w : p.w) w = std1 * rng.normal();
    p.b = std1 * rng.normal();
    return p;
  }
  if (spec.hidden < 1) throw std::invalid_argument("init_params: hidden must be >= 1");
  Mlp2Params p;
  const double std1 = weight_scale / std::sqrt(static_cast<double>(in_dim));
  const double std2 = weight_scale / std::sqrt(static_cast<double>(spec.hidden));
  p.w1 = Matrix(spec.hidden, in_dim);
  for (auto& w : p.w1.data) w = std1 * rng.normal();
  p.b1.resize(static_cast<std::size_t>(spec.hidden));
  for (auto& b : p.b1) b = std1 * rng.normal();
  p.w2.resize(static_cast<std::size_t>(spec.hidden));
  for (auto& w : p.w2) w = std2 * rng.normal();
  p.b2 = std2 * rng.normal();
  return p;
}

double score(const ScorerParams& params, const Vec& x_feat) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          check_dim(static_cast<int>(p.w.size()), static_cast<int>(x_feat.size()), "score");
          return dot(p.w, x_feat) + p.b;
        } else {
          check_dim(p.w1.cols, static_cast<int>(x_feat.size()), "score");
          double out = p.b2;
          for (int i = 0; i < p.w1.rows; ++i) {
            double z = p.b1[static_cast<std::size_t>(i)];
            for (int j = 0; j < p.w1.cols; ++j) z += p.w1.at(i, j) * x_feat[static_cast<std::size_t>(j)];
            out += p.w2[static_cast<std::size_t>(i)] * std::tanh(z);
          }
          return out;
        }
      },
      params);
}

std::pair<double, Gradient> score_grad(const ScorerParams& params, const Vec& x_feat) {
  if (std::holds_alternative<LinearParams>(params)) {
    const auto& p = std::get<LinearParams>(params);
    check_dim(static_cast<int>(p.w.size()), static_cast<int>(x_feat.size()), "score_grad");
    LinearParams g;
    g.w = x_feat;
    g.b = 1.0;
    return {dot(p.w, x_feat) + p.b, Gradient(std::move(g))};
  }
  const auto& p = std::get<Mlp2Params>(params);
  check_dim(p.w1.cols, static_cast<int>(x_feat.size()), "score_grad");
  const int h = p.w1.rows;
  const int d = p.w1.cols;
  Mlp2Params g;
  g.w1 = Matrix(h, d);
  g.b1.assign(static_cast<std::size_t>(h), 0.0);
  g.w2.assign(static_cast<std::size_t>(h), 0.0);
  g.b2 = 1.0;
  double out = p.b2;
  for (int i = 0; i < h; ++i) {
    double z = p.b1[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) z += p.w1.at(i, j) * x_feat[static_cast<std::size_t>(j)];
    const double th = std::tanh(z);
    out += p.w2[static_cast<std::size_t>(i)] * th;
    g.w2[static_cast<std::size_t>(i)] = th;
    const double dz = p.w2[static_cast<std::size_t>(i)] * (1.0 - th * th);  // tanh' = 1 - tanh^2
    g.b1[static_cast<std::size_t>(i)] = dz;
    for (int j = 0; j < d; ++j) g.w1.at(i, j) = dz * x_feat[static_cast<std::size_t>(j)];
  }
  return {out, Gradient(std::move(g))};
}

Gradient finite_diff_grad(const ScorerParams& params,
                          const std::function<double(const ScorerParams&)>& objective,
                          double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  Vec flat = flatten(params);
  Vec out(flat.size(), 0.0);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + eps;
    const double fp = objective(unflatten(params, flat));
    flat[i] = orig - eps;
    const double fm = objective(unflatten(params, flat));
    flat[i] = orig;
    out[i] = (fp - fm) / (2.0 * eps);
  }
  return unflatten(params, out);
}

OptimizerState make_sgd(double lr) {
  if (lr < 0.0) throw std::invalid_argument("make_sgd: lr must be >= 0");
  return SgdState{lr};
}

OptimizerState make_adam(double lr, const ScorerParams& shape) {
  if (lr < 0.0) throw std::invalid_argument("make_adam: lr must be >= 0");
  AdamState st;
  st.lr = lr;
  st.m = zeros_like(shape);
  st.v = zeros_like(shape);
  return st;
}

std::pair<OptimizerState, ScorerParams> opt_step(OptimizerState state,
                                                 const ScorerParams& params,
                                                 const Gradient& grad) {
  if (!same_shape(grad, params)) throw std::invalid_argument("opt_step: gradient shape mismatch");
  if (!all_finite(grad)) throw std::runtime_error("opt_step: non-finite gradient entries");
  ScorerParams next = params;
  if (std::holds_alternative<SgdState>(state)) {
    axpy(-std::get<SgdState>(state).lr, grad, next);
    return {state, next};
  }
  auto& st = std::get<AdamState>(state);
  if (!same_shape(st.m, params)) throw std::invalid_argument("opt_step: Adam state shape mismatch");
  st.t += 1;
  Vec m = flatten(st.m);
  Vec v = flatten(st.v);
  const Vec g = flatten(grad);
  Vec p = flatten(params);
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
  st.m = unflatten(params, m);
  st.v = unflatten(params, v);
  return {std::move(state), unflatten(params, p)};
}

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  // max(z, 0) + log1p(exp(-|z|))
  return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double log_sigmoid(double z) { return -softplus(-z); }

}  // namespace apolab
