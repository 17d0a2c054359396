#pragma once

#include <vector>

#include "apolab/numcore.hpp"
#include "apolab/world.hpp"

namespace apolab {

/// Softmax response policy over each query's candidate set, driven by a
/// learnable scorer on the joint query/response features.
struct Policy {
  ScorerParams params;
  double temperature = 1.0;
};

Vec joint_feature(const World& world, QueryId x, ResponseId y);

/// softmax(score / temperature) over the candidates of x, computed with
/// max-subtraction.
Vec response_probs(const Policy& policy, const World& world, QueryId x);
Vec response_log_probs(const Policy& policy, const World& world, QueryId x);

/// S i.i.d. categorical draws, one uniform per draw.
std::vector<ResponseId> sample_responses(const Policy& policy, const World& world, QueryId x,
                                         int s, Rng& rng);

double log_prob(const Policy& policy, const World& world, QueryId x, ResponseId y);

/// d log pi(y|x) / d params = (g_y - sum_y' pi(y') g_y') / T with g the
/// candidate score gradients.
Gradient log_prob_grad(const Policy& policy, const World& world, QueryId x, ResponseId y);

/// Same combination exposed on raw per-candidate score gradients; y is an
/// index into grads/probs.
Gradient log_prob_grad_from_scores(const std::vector<Gradient>& score_grads, const Vec& probs,
                                   int y, double temperature);

/// Mean over queries of the exact KL[policy || ref] by candidate enumeration.
double kl_to(const Policy& policy, const Policy& ref, const World& world,
             const std::vector<QueryId>& queries);

}  // namespace apolab
