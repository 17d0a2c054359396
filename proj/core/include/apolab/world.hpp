#pragma once

#include <cstdint>
#include <vector>

#include "apolab/numcore.hpp"
#include "apolab/rng.hpp"

namespace apolab {

using QueryId = std::int32_t;
using ResponseId = std::int32_t;  // index into a query's candidate list

struct WorldConfig {
  int feature_dim = 16;
  int n_queries = 1000;
  int candidates_per_query = 16;
  int golden_hidden = 64;          // capacity of the hidden golden utility
  double feature_scale = 1.0;
  double golden_param_scale = 1.5; // weight std = golden_param_scale / sqrt(fan-in)
  double tau_gold = 0.25;          // golden-response sampling temperature
};

struct PreferencePair {
  QueryId query = 0;
  ResponseId winner = 0;
  ResponseId loser = 0;

  bool operator==(const PreferencePair&) const = default;
};

struct GoldenExample {
  QueryId query = 0;
  ResponseId golden_response = 0;

  bool operator==(const GoldenExample&) const = default;
};

struct SplitConfig {
  double rm_ratio = 0.2;
  double llm_ratio = 0.66;
  double test_ratio = 0.14;
  int n_pref_pairs = 2000;  // D_P, drawn from the rm-train queries
  int n_dev_pairs = 500;    // drawn from the llm-train queries
  int n_test_pairs = 1000;  // drawn from the test queries
};

struct DataSplit {
  std::vector<QueryId> rm_train_queries;
  std::vector<QueryId> llm_train_queries;
  std::vector<QueryId> test_queries;
  std::vector<PreferencePair> dev_pairs;
  std::vector<PreferencePair> test_pairs;
};

/// Concat(query, response, query*response); dim 3d.
Vec joint_feature(const Vec& query_feat, const Vec& response_feat);

/// Synthetic preference environment. Queries and candidate responses are
/// seeded normal feature vectors; a frozen over-capacity MLP defines the
/// hidden utility u* behind every ground-truth preference. Immutable after
/// construction.
class World {
 public:
  World(const WorldConfig& config, std::uint64_t seed);

  /// Rebuild from persisted parts; features and golden params are adopted
  /// verbatim so round-trips are bit-exact.
  World(const WorldConfig& config, std::uint64_t seed, std::vector<Vec> query_feat,
        std::vector<std::vector<Vec>> cand_feat, ScorerParams golden);

  const WorldConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  int feature_dim() const { return cfg_.feature_dim; }
  int num_queries() const { return static_cast<int>(query_feat_.size()); }
  int num_candidates(QueryId x) const;
  int joint_dim() const { return 3 * cfg_.feature_dim; }

  const Vec& query_features(QueryId x) const;
  const Vec& response_features(QueryId x, ResponseId y) const;
  const ScorerParams& golden_params() const { return golden_; }

  double golden_utility(QueryId x, ResponseId y) const;
  /// P(y > y2 | x) = sigmoid(u*(x,y) - u*(x,y2)); a Bradley-Terry oracle.
  double true_pref_prob(QueryId x, ResponseId y, ResponseId y2) const;
  /// Bernoulli draw from true_pref_prob; simulated noisy human annotation.
  PreferencePair annotate_pair(QueryId x, ResponseId y, ResponseId y2, Rng& rng) const;
  /// Sample from softmax(u*(x,.)/tau_gold); tau -> 0 degenerates to argmax.
  GoldenExample golden_response(QueryId x, Rng& rng) const;
  /// softmax(u*(x,.)/tau_gold), the law golden_response draws from.
  Vec golden_response_probs(QueryId x) const;

  void validate_query(QueryId x) const;
  void validate_response(QueryId x, ResponseId y) const;

 private:
  void build_utility_cache();

  WorldConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<Vec> query_feat_;
  std::vector<std::vector<Vec>> cand_feat_;
  ScorerParams golden_;
  std::vector<Vec> golden_util_;  // [query][candidate], cached at construction
};

World gen_world(const WorldConfig& config, std::uint64_t seed);

/// Seeded disjoint partition into rm-train / llm-train / test, with dev pairs
/// annotated from llm-train queries and test pairs from test queries.
DataSplit make_split(const World& world, const SplitConfig& config, std::uint64_t seed);

/// n_pairs pairs: query uniform from query_set, two distinct candidates
/// uniform, winner by oracle annotation.
std::vector<PreferencePair> build_pref_dataset(const World& world,
                                               const std::vector<QueryId>& query_set,
                                               int n_pairs, Rng& rng);

}  // namespace apolab
