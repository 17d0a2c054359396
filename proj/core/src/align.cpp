#include "apolab/align.hpp"

#include <cmath>
#include <stdexcept>

namespace apolab {

namespace {

/// Everything needed to combine log-prob gradients for one query.
struct QueryEval {
  Vec log_probs;
  Vec probs;
  std::vector<Gradient> score_grads;
};

QueryEval eval_query(const Policy& policy, const World& world, QueryId x) {
  const int k = world.num_candidates(x);
  QueryEval ev;
  ev.score_grads.reserve(static_cast<std::size_t>(k));
  Vec logits(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    auto [s, g] = score_grad(policy.params, joint_feature(world, x, c));
    logits[static_cast<std::size_t>(c)] = s / policy.temperature;
    ev.score_grads.push_back(std::move(g));
  }
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double lse = zmax + std::log(sum);
  ev.log_probs.resize(static_cast<std::size_t>(k));
  ev.probs.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    ev.log_probs[static_cast<std::size_t>(c)] = logits[static_cast<std::size_t>(c)] - lse;
    ev.probs[static_cast<std::size_t>(c)] = std::exp(ev.log_probs[static_cast<std::size_t>(c)]);
  }
  return ev;
}

/// Adds sum_k alpha_k * dlog pi(y_k)/dtheta for one query, where `alpha`
/// maps candidate -> summed weight. Uses
///   sum_k a_k dlog pi(y_k) = (1/T) sum_y [A_y - pi_y * sum(A)] g_y.
void add_logprob_terms(const QueryEval& ev, const Vec& alpha, double temperature,
                       Gradient& acc) {
  double total = 0.0;
  for (double a : alpha) total += a;
  for (std::size_t c = 0; c < alpha.size(); ++c) {
    const double coef = (alpha[c] - ev.probs[c] * total) / temperature;
    if (coef != 0.0) axpy(coef, ev.score_grads[c], acc);
  }
}

int extreme_sample_index(const ScoredQuery& sq, bool want_max) {
  if (sq.samples.empty()) throw std::invalid_argument("scored query has no samples");
  if (sq.samples.size() != sq.rewards.size())
    throw std::invalid_argument("scored query: samples/rewards misaligned");
  int best = 0;
  for (int i = 1; i < static_cast<int>(sq.rewards.size()); ++i) {
    const double r = sq.rewards[static_cast<std::size_t>(i)];
    const double rb = sq.rewards[static_cast<std::size_t>(best)];
    if (want_max ? (r > rb) : (r < rb)) best = i;
  }
  return best;
}

Policy stepped(const Policy& policy, const LossGrad& lg, double lr) {
  if (!std::isfinite(lg.loss)) throw std::runtime_error("alignment loss is non-finite");
  Policy next = policy;
  auto [st, params] = opt_step(make_sgd(lr), policy.params, lg.grad);
  next.params = std::move(params);
  return next;
}

}  // namespace

const char* align_method_name(AlignMethod method) {
  switch (method) {
    case AlignMethod::Rjs: return "rjs";
    case AlignMethod::Rrhf: return "rrhf";
    case AlignMethod::Dpo: return "dpo";
    case AlignMethod::GoldenSft: return "golden_sft";
    case AlignMethod::ExactPg: return "exact_pg";
  }
  throw std::logic_error("unreachable");
}

AlignMethod align_method_from_name(const std::string& name) {
  if (name == "rjs") return AlignMethod::Rjs;
  if (name == "rrhf") return AlignMethod::Rrhf;
  if (name == "dpo") return AlignMethod::Dpo;
  if (name == "golden_sft") return AlignMethod::GoldenSft;
  if (name == "exact_pg") return AlignMethod::ExactPg;
  throw std::invalid_argument("unknown align method '" + name +
                              "' (expected rjs|rrhf|dpo|golden_sft|exact_pg)");
}

bool method_uses_samples(AlignMethod method) {
  return method == AlignMethod::Rjs || method == AlignMethod::Rrhf || method == AlignMethod::Dpo;
}

ScoredBatch score_batch(const Policy& policy, const RewardModel& rm, const World& world,
                        const std::vector<QueryId>& queries, int s, Rng& rng) {
  if (s < 1) throw std::invalid_argument("score_batch: S must be >= 1");
  ScoredBatch batch;
  batch.reserve(queries.size());
  for (QueryId q : queries) {
    ScoredQuery sq;
    sq.query = q;
    sq.samples = sample_responses(policy, world, q, s, rng);
    sq.rewards.resize(sq.samples.size());
    for (std::size_t i = 0; i < sq.samples.size(); ++i)
      sq.rewards[i] = reward(rm, world, q, sq.samples[i]);
    batch.push_back(std::move(sq));
  }
  return batch;
}

int best_sample_index(const ScoredQuery& sq) { return extreme_sample_index(sq, true); }
int worst_sample_index(const ScoredQuery& sq) { return extreme_sample_index(sq, false); }

LossGrad rjs_loss(const Policy& policy, const World& world, const ScoredBatch& batch) {
  if (batch.empty()) throw std::invalid_argument("rjs_loss: empty batch");
  LossGrad out{0.0, zeros_like(policy.params)};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& sq : batch) {
    const QueryEval ev = eval_query(policy, world, sq.query);
    const auto best = static_cast<std::size_t>(sq.samples[static_cast<std::size_t>(best_sample_index(sq))]);
    out.loss += -scale * ev.log_probs[best];
    Vec alpha(ev.probs.size(), 0.0);
    alpha[best] = -scale;
    add_logprob_terms(ev, alpha, policy.temperature, out.grad);
  }
  return out;
}

LossGrad rrhf_loss(const Policy& policy, const World& world, const ScoredBatch& batch,
                   double lambda) {
  if (batch.empty()) throw std::invalid_argument("rrhf_loss: empty batch");
  if (lambda < 0.0) throw std::invalid_argument("rrhf_loss: lambda must be >= 0");

  // Count reward-ordered pairs first; the pair term is a mean over them.
  std::size_t n_pairs = 0;
  for (const auto& sq : batch) {
    const std::size_t s = sq.samples.size();
    if (s < 2) throw std::invalid_argument("rrhf_loss: needs at least two samples per query");
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = 0; b < s; ++b)
        if (sq.rewards[a] > sq.rewards[b]) ++n_pairs;
  }
  const double pair_scale = n_pairs > 0 ? 1.0 / static_cast<double>(n_pairs) : 0.0;
  const double best_scale = lambda / static_cast<double>(batch.size());

  LossGrad out{0.0, zeros_like(policy.params)};
  for (const auto& sq : batch) {
    const QueryEval ev = eval_query(policy, world, sq.query);
    Vec alpha(ev.probs.size(), 0.0);
    const std::size_t s = sq.samples.size();
    for (std::size_t w = 0; w < s; ++w) {
      for (std::size_t l = 0; l < s; ++l) {
        if (!(sq.rewards[w] > sq.rewards[l])) continue;
        const auto yw = static_cast<std::size_t>(sq.samples[w]);
        const auto yl = static_cast<std::size_t>(sq.samples[l]);
        const double margin = ev.log_probs[yl] - ev.log_probs[yw];
        if (margin > 0.0) {  // relu active; subgradient at 0 is 0
          out.loss += pair_scale * margin;
          alpha[yl] += pair_scale;
          alpha[yw] -= pair_scale;
        }
      }
    }
    const auto best = static_cast<std::size_t>(sq.samples[static_cast<std::size_t>(best_sample_index(sq))]);
    out.loss += -best_scale * ev.log_probs[best];
    alpha[best] -= best_scale;
    add_logprob_terms(ev, alpha, policy.temperature, out.grad);
  }
  return out;
}

LossGrad dpo_loss(const Policy& policy, const Policy& ref, const World& world,
                  const ScoredBatch& batch, double beta) {
  if (batch.empty()) throw std::invalid_argument("dpo_loss: empty batch");
  if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss: beta must be > 0");

  int counted = 0;
  for (const auto& sq : batch) {
    if (sq.samples.size() < 2) throw std::invalid_argument("dpo_loss: needs at least two samples");
    if (best_sample_index(sq) != worst_sample_index(sq)) ++counted;
  }
  LossGrad out{0.0, zeros_like(policy.params)};
  if (counted == 0) return out;  // every query degenerate: all rewards tied
  const double scale = 1.0 / static_cast<double>(counted);

  for (const auto& sq : batch) {
    const int bi = best_sample_index(sq);
    const int wi = worst_sample_index(sq);
    if (bi == wi) continue;
    const auto yw = static_cast<std::size_t>(sq.samples[static_cast<std::size_t>(bi)]);
    const auto yl = static_cast<std::size_t>(sq.samples[static_cast<std::size_t>(wi)]);
    const QueryEval ev = eval_query(policy, world, sq.query);
    const Vec ref_logp = response_log_probs(ref, world, sq.query);
    const double logit = beta * ((ev.log_probs[yw] - ref_logp[yw]) -
                                 (ev.log_probs[yl] - ref_logp[yl]));
    out.loss += scale * softplus(-logit);
    const double coef = -sigmoid(-logit) * beta * scale;
    Vec alpha(ev.probs.size(), 0.0);
    alpha[yw] += coef;
    alpha[yl] -= coef;
    add_logprob_terms(ev, alpha, policy.temperature, out.grad);
  }
  return out;
}

LossGrad golden_sft_loss(const Policy& policy, const World& world,
                         const std::vector<GoldenExample>& golden_set) {
  if (golden_set.empty()) throw std::invalid_argument("golden_sft_loss: empty golden set");
  LossGrad out{0.0, zeros_like(policy.params)};
  const double scale = 1.0 / static_cast<double>(golden_set.size());
  for (const auto& ex : golden_set) {
    const QueryEval ev = eval_query(policy, world, ex.query);
    const auto y = static_cast<std::size_t>(ex.golden_response);
    out.loss += -scale * ev.log_probs[y];
    Vec alpha(ev.probs.size(), 0.0);
    alpha[y] = -scale;
    add_logprob_terms(ev, alpha, policy.temperature, out.grad);
  }
  return out;
}

LossGrad exact_pg_loss(const Policy& policy, const RewardModel& rm, const Policy& ref,
                       const World& world, const std::vector<QueryId>& queries, double beta) {
  if (queries.empty()) throw std::invalid_argument("exact_pg_loss: empty query set");
  if (beta < 0.0) throw std::invalid_argument("exact_pg_loss: beta must be >= 0");
  LossGrad out{0.0, zeros_like(policy.params)};
  const double scale = 1.0 / static_cast<double>(queries.size());
  for (QueryId q : queries) {
    const QueryEval ev = eval_query(policy, world, q);
    const Vec ref_logp = response_log_probs(ref, world, q);
    const std::size_t k = ev.probs.size();
    // a_y = r(q,y) - beta * (log pi(y) - log ref(y)). The per-query objective
    // is E_pi[a] and its exact gradient is Cov_pi(a, g) / T.
    Vec a(k);
    double abar = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double r = reward(rm, world, q, static_cast<ResponseId>(c));
      a[c] = r - beta * (ev.log_probs[c] - ref_logp[c]);
      abar += ev.probs[c] * a[c];
    }
    out.loss += -scale * abar;
    for (std::size_t c = 0; c < k; ++c) {
      const double coef = -scale * ev.probs[c] * (a[c] - abar) / policy.temperature;
      if (coef != 0.0) axpy(coef, ev.score_grads[c], out.grad);
    }
  }
  return out;
}

Policy rjs_update(const Policy& policy, const World& world, const ScoredBatch& batch,
                  const AlignConfig& config) {
  return stepped(policy, rjs_loss(policy, world, batch), config.lr);
}

Policy rrhf_update(const Policy& policy, const World& world, const ScoredBatch& batch,
                   const AlignConfig& config) {
  return stepped(policy, rrhf_loss(policy, world, batch, config.rrhf_lambda), config.lr);
}

Policy dpo_update(const Policy& policy, const Policy& ref, const World& world,
                  const ScoredBatch& batch, const AlignConfig& config) {
  return stepped(policy, dpo_loss(policy, ref, world, batch, config.dpo_beta), config.lr);
}

Policy golden_sft_update(const Policy& policy, const World& world,
                         const std::vector<GoldenExample>& golden_set,
                         const AlignConfig& config) {
  return stepped(policy, golden_sft_loss(policy, world, golden_set), config.lr);
}

Policy exact_pg_update(const Policy& policy, const RewardModel& rm, const Policy& ref,
                       const World& world, const std::vector<QueryId>& queries,
                       const AlignConfig& config) {
  return stepped(policy, exact_pg_loss(policy, rm, ref, world, queries, config.pg_beta), config.lr);
}

Policy run_alignment(Policy policy, const Policy& ref, const RewardModel& rm, const World& world,
                     const ScoredBatch& batch, const std::vector<GoldenExample>& golden_set,
                     const std::vector<QueryId>& queries, const AlignConfig& config, Rng& rng,
                     const std::string& context) {
  if (config.epochs < 0) throw std::invalid_argument("align config: epochs must be >= 0");
  if (config.minibatch < 1) throw std::invalid_argument("align config: minibatch must be >= 1");
  if (!(config.lr >= 0.0)) throw std::invalid_argument("align config: lr must be >= 0");

  std::size_t n_items = 0;
  switch (config.method) {
    case AlignMethod::Rjs:
    case AlignMethod::Rrhf:
    case AlignMethod::Dpo: n_items = batch.size(); break;
    case AlignMethod::GoldenSft: n_items = golden_set.size(); break;
    case AlignMethod::ExactPg: n_items = queries.size(); break;
  }
  if (n_items == 0) throw std::invalid_argument("run_alignment: no training items (" + context + ")");

  std::vector<std::size_t> order(n_items);
  for (std::size_t i = 0; i < n_items; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < n_items; start += static_cast<std::size_t>(config.minibatch)) {
      const std::size_t stop = std::min(n_items, start + static_cast<std::size_t>(config.minibatch));
      try {
        switch (config.method) {
          case AlignMethod::Rjs:
          case AlignMethod::Rrhf:
          case AlignMethod::Dpo: {
            ScoredBatch mb;
            mb.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) mb.push_back(batch[order[i]]);
            if (config.method == AlignMethod::Rjs)
              policy = rjs_update(policy, world, mb, config);
            else if (config.method == AlignMethod::Rrhf)
              policy = rrhf_update(policy, world, mb, config);
            else
              policy = dpo_update(policy, ref, world, mb, config);
            break;
          }
          case AlignMethod::GoldenSft: {
            std::vector<GoldenExample> mb;
            mb.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) mb.push_back(golden_set[order[i]]);
            policy = golden_sft_update(policy, world, mb, config);
            break;
          }
          case AlignMethod::ExactPg: {
            std::vector<QueryId> mb;
            mb.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) mb.push_back(queries[order[i]]);
            policy = exact_pg_update(policy, rm, ref, world, mb, config);
            break;
          }
        }
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " (" + context + ", epoch " +
                                 std::to_string(epoch + 1) + ", step at item " +
                                 std::to_string(start) + ")");
      }
    }
  }
  return policy;
}

}  // namespace apolab
