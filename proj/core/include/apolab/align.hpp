#pragma once

#include <string>
#include <vector>

#include "apolab/policy.hpp"
#include "apolab/reward.hpp"
#include "apolab/world.hpp"

namespace apolab {

/// Per-query sampled responses with their reward scores, the unit all
/// sample-based policy updates consume.
struct ScoredQuery {
  QueryId query = 0;
  std::vector<ResponseId> samples;
  Vec rewards;  // aligned 1:1 with samples
};

using ScoredBatch = std::vector<ScoredQuery>;

enum class AlignMethod { Rjs, Rrhf, Dpo, GoldenSft, ExactPg };

struct AlignConfig {
  AlignMethod method = AlignMethod::Rjs;
  double lr = 1.0;
  int epochs = 1;
  int minibatch = 32;        // queries per gradient step
  double rrhf_lambda = 1.0;  // weight of the best-response likelihood term
  double dpo_beta = 0.5;
  double pg_beta = 0.1;      // KL coefficient of the exact-enumeration objective
};

const char* align_method_name(AlignMethod method);
AlignMethod align_method_from_name(const std::string& name);
/// True for methods that train on policy samples (rjs/rrhf/dpo).
bool method_uses_samples(AlignMethod method);

/// S samples per query from the policy, each scored by the reward model.
ScoredBatch score_batch(const Policy& policy, const RewardModel& rm, const World& world,
                        const std::vector<QueryId>& queries, int s, Rng& rng);

/// Index of the highest-reward sample; ties broken by lowest index.
int best_sample_index(const ScoredQuery& sq);
/// Index of the lowest-reward sample; ties broken by lowest index.
int worst_sample_index(const ScoredQuery& sq);

// Batch losses with exact gradients w.r.t. the policy params. All are means,
// to be minimized.

/// -mean_q log pi(best-reward sample | q)
LossGrad rjs_loss(const Policy& policy, const World& world, const ScoredBatch& batch);

/// mean over reward-ordered sample pairs (r_w > r_l) of
/// relu(log pi(l) - log pi(w)), plus lambda * mean_q -log pi(best | q).
/// The relu subgradient at exactly 0 is 0.
LossGrad rrhf_loss(const Policy& policy, const World& world, const ScoredBatch& batch,
                   double lambda);

/// Per query the (best, worst) reward pair; mean of
/// -log sigmoid(beta * [dlog(best) - dlog(worst)]) where dlog is the
/// policy/reference log-likelihood ratio. Queries with all rewards tied are
/// skipped.
LossGrad dpo_loss(const Policy& policy, const Policy& ref, const World& world,
                  const ScoredBatch& batch, double beta);

/// -mean log pi(golden response | query)
LossGrad golden_sft_loss(const Policy& policy, const World& world,
                         const std::vector<GoldenExample>& golden_set);

/// Negative of mean_q [ sum_y pi(y|q) r(q,y) - beta KL(pi || ref) ], all terms
/// by exact candidate enumeration.
LossGrad exact_pg_loss(const Policy& policy, const RewardModel& rm, const Policy& ref,
                       const World& world, const std::vector<QueryId>& queries, double beta);

// Single plain gradient steps (params -= lr * grad of the matching loss).

Policy rjs_update(const Policy& policy, const World& world, const ScoredBatch& batch,
                  const AlignConfig& config);
Policy rrhf_update(const Policy& policy, const World& world, const ScoredBatch& batch,
                   const AlignConfig& config);
Policy dpo_update(const Policy& policy, const Policy& ref, const World& world,
                  const ScoredBatch& batch, const AlignConfig& config);
Policy golden_sft_update(const Policy& policy, const World& world,
                         const std::vector<GoldenExample>& golden_set,
                         const AlignConfig& config);
Policy exact_pg_update(const Policy& policy, const RewardModel& rm, const Policy& ref,
                       const World& world, const std::vector<QueryId>& queries,
                       const AlignConfig& config);

/// config.epochs full passes of single-step updates over shuffled minibatches
/// of config.minibatch items (scored queries, golden examples, or raw queries
/// depending on the method). Aborts with `context` in the diagnostic if a
/// loss turns non-finite.
Policy run_alignment(Policy policy, const Policy& ref, const RewardModel& rm, const World& world,
                     const ScoredBatch& batch, const std::vector<GoldenExample>& golden_set,
                     const std::vector<QueryId>& queries, const AlignConfig& config, Rng& rng,
                     const std::string& context);

}  // namespace apolab
