#include "apolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apolab {

namespace {

void check_temperature(const Policy& policy) {
  if (!(policy.temperature > 0.0))
    throw std::invalid_argument("policy temperature must be > 0");
}

}  // namespace

Vec joint_feature(const World& world, QueryId x, ResponseId y) {
  return joint_feature(world.query_features(x), world.response_features(x, y));
}

Vec response_log_probs(const Policy& policy, const World& world, QueryId x) {
  check_temperature(policy);
  const int k = world.num_candidates(x);
  Vec logits(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    logits[static_cast<std::size_t>(c)] =
        score(policy.params, joint_feature(world, x, c)) / policy.temperature;
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double lse = zmax + std::log(sum);
  for (auto& z : logits) z -= lse;
  return logits;
}

Vec response_probs(const Policy& policy, const World& world, QueryId x) {
  Vec logp = response_log_probs(policy, world, x);
  for (auto& v : logp) v = std::exp(v);
  return logp;
}

std::vector<ResponseId> sample_responses(const Policy& policy, const World& world, QueryId x,
                                         int s, Rng& rng) {
  if (s < 1) throw std::invalid_argument("sample_responses: S must be >= 1");
  const Vec probs = response_probs(policy, world, x);
  std::vector<ResponseId> out(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i)
    out[static_cast<std::size_t>(i)] =
        static_cast<ResponseId>(categorical_from_uniform(probs, rng.uniform()));
  return out;
}

double log_prob(const Policy& policy, const World& world, QueryId x, ResponseId y) {
  world.validate_response(x, y);
  return response_log_probs(policy, world, x)[static_cast<std::size_t>(y)];
}

Gradient log_prob_grad_from_scores(const std::vector<Gradient>& score_grads, const Vec& probs,
                                   int y, double temperature) {
  if (score_grads.empty() || score_grads.size() != probs.size())
    throw std::invalid_argument("log_prob_grad_from_scores: size mismatch");
  Gradient acc = zeros_like(score_grads[0]);
  for (std::size_t c = 0; c < score_grads.size(); ++c) {
    const double coef =
        ((static_cast<int>(c) == y ? 1.0 : 0.0) - probs[c]) / temperature;
    axpy(coef, score_grads[c], acc);
  }
  return acc;
}

Gradient log_prob_grad(const Policy& policy, const World& world, QueryId x, ResponseId y) {
  world.validate_response(x, y);
  check_temperature(policy);
  const int k = world.num_candidates(x);
  std::vector<Gradient> grads;
  grads.reserve(static_cast<std::size_t>(k));
  Vec logits(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    auto [s, g] = score_grad(policy.params, joint_feature(world, x, c));
    logits[static_cast<std::size_t>(c)] = s / policy.temperature;
    grads.push_back(std::move(g));
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  Vec probs(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    probs[static_cast<std::size_t>(c)] = std::exp(logits[static_cast<std::size_t>(c)] - zmax) / sum;
  return log_prob_grad_from_scores(grads, probs, y, policy.temperature);
}

double kl_to(const Policy& policy, const Policy& ref, const World& world,
             const std::vector<QueryId>& queries) {
  if (queries.empty()) throw std::invalid_argument("kl_to: empty query set");
  double total = 0.0;
  for (QueryId x : queries) {
    const Vec lp = response_log_probs(policy, world, x);
    const Vec lq = response_log_probs(ref, world, x);
    double kl = 0.0;
    for (std::size_t c = 0; c < lp.size(); ++c) kl += std::exp(lp[c]) * (lp[c] - lq[c]);
    total += kl;
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace apolab
