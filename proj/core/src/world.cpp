#include "apolab/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apolab {

namespace {

constexpr std::uint64_t kGoldenParamsStream = 1;
constexpr std::uint64_t kFeatureStream = 2;
constexpr std::uint64_t kPartitionStream = 1;
constexpr std::uint64_t kDevPairStream = 2;
constexpr std::uint64_t kTestPairStream = 3;

void validate_config(const WorldConfig& cfg) {
  if (cfg.feature_dim < 1) throw std::invalid_argument("world config: feature_dim must be >= 1");
  if (cfg.n_queries < 1) throw std::invalid_argument("world config: n_queries must be >= 1");
  if (cfg.candidates_per_query < 2)
    throw std::invalid_argument("world config: candidates_per_query must be >= 2");
  if (cfg.golden_hidden < 1) throw std::invalid_argument("world config: golden_hidden must be >= 1");
  if (!(cfg.feature_scale > 0.0)) throw std::invalid_argument("world config: feature_scale must be > 0");
  if (!(cfg.golden_param_scale > 0.0))
    throw std::invalid_argument("world config: golden_param_scale must be > 0");
  if (!(cfg.tau_gold > 0.0)) throw std::invalid_argument("world config: tau_gold must be > 0");
}

}  // namespace

Vec joint_feature(const Vec& query_feat, const Vec& response_feat) {
  if (query_feat.size() != response_feat.size())
    throw std::invalid_argument("joint_feature: query/response dims differ");
  const std::size_t d = query_feat.size();
  Vec out(3 * d);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = query_feat[j];
    out[d + j] = response_feat[j];
    out[2 * d + j] = query_feat[j] * response_feat[j];
  }
  return out;
}

World::World(const WorldConfig& config, std::uint64_t seed) : cfg_(config), seed_(seed) {
  validate_config(cfg_);
  Rng root(seed);

  Rng grng = root.fork(kGoldenParamsStream);
  ScorerSpec golden_spec{ScorerSpec::Arch::Mlp2, cfg_.golden_hidden};
  golden_ = init_params(golden_spec, 3 * cfg_.feature_dim, cfg_.golden_param_scale, grng);

  Rng frng = root.fork(kFeatureStream);
  query_feat_.resize(static_cast<std::size_t>(cfg_.n_queries));
  cand_feat_.resize(static_cast<std::size_t>(cfg_.n_queries));
  for (int q = 0; q < cfg_.n_queries; ++q) {
    Vec& qf = query_feat_[static_cast<std::size_t>(q)];
    qf.resize(static_cast<std::size_t>(cfg_.feature_dim));
    for (auto& v : qf) v = cfg_.feature_scale * frng.normal();
    auto& cands = cand_feat_[static_cast<std::size_t>(q)];
    cands.resize(static_cast<std::size_t>(cfg_.candidates_per_query));
    for (auto& cf : cands) {
      cf.resize(static_cast<std::size_t>(cfg_.feature_dim));
      for (auto& v : cf) v = cfg_.feature_scale * frng.normal();
    }
  }
  build_utility_cache();
}

World::World(const WorldConfig& config, std::uint64_t seed, std::vector<Vec> query_feat,
             std::vector<std::vector<Vec>> cand_feat, ScorerParams golden)
    : cfg_(config),
      seed_(seed),
      query_feat_(std::move(query_feat)),
      cand_feat_(std::move(cand_feat)),
      golden_(std::move(golden)) {
  validate_config(cfg_);
  if (static_cast<int>(query_feat_.size()) != cfg_.n_queries ||
      query_feat_.size() != cand_feat_.size())
    throw std::invalid_argument("world: inconsistent feature table sizes");
  build_utility_cache();
}

void World::build_utility_cache() {
  golden_util_.resize(query_feat_.size());
  for (std::size_t q = 0; q < query_feat_.size(); ++q) {
    const auto& cands = cand_feat_[q];
    auto& row = golden_util_[q];
    row.resize(cands.size());
    for (std::size_t c = 0; c < cands.size(); ++c) {
      row[c] = score(golden_, joint_feature(query_feat_[q], cands[c]));
      if (!std::isfinite(row[c])) throw std::runtime_error("world: non-finite golden utility");
    }
  }
}

int World::num_candidates(QueryId x) const {
  validate_query(x);
  return static_cast<int>(cand_feat_[static_cast<std::size_t>(x)].size());
}

const Vec& World::query_features(QueryId x) const {
  validate_query(x);
  return query_feat_[static_cast<std::size_t>(x)];
}

const Vec& World::response_features(QueryId x, ResponseId y) const {
  validate_response(x, y);
  return cand_feat_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
}

double World::golden_utility(QueryId x, ResponseId y) const {
  validate_response(x, y);
  return golden_util_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
}

double World::true_pref_prob(QueryId x, ResponseId y, ResponseId y2) const {
  return sigmoid(golden_utility(x, y) - golden_utility(x, y2));
}

PreferencePair World::annotate_pair(QueryId x, ResponseId y, ResponseId y2, Rng& rng) const {
  if (y == y2) throw std::invalid_argument("annotate_pair: responses must differ");
  const double p = true_pref_prob(x, y, y2);
  if (rng.uniform() < p) return {x, y, y2};
  return {x, y2, y};
}

Vec World::golden_response_probs(QueryId x) const {
  validate_query(x);
  const Vec& util = golden_util_[static_cast<std::size_t>(x)];
  Vec probs(util.size());
  const double umax = *std::max_element(util.begin(), util.end());
  double z = 0.0;
  for (std::size_t c = 0; c < util.size(); ++c) {
    probs[c] = std::exp((util[c] - umax) / cfg_.tau_gold);
    z += probs[c];
  }
  for (auto& p : probs) p /= z;
  return probs;
}

GoldenExample World::golden_response(QueryId x, Rng& rng) const {
  const Vec probs = golden_response_probs(x);
  return {x, static_cast<ResponseId>(categorical_from_uniform(probs, rng.uniform()))};
}

void World::validate_query(QueryId x) const {
  if (x < 0 || x >= static_cast<QueryId>(query_feat_.size()))
    throw std::invalid_argument("unknown query id " + std::to_string(x));
}

void World::validate_response(QueryId x, ResponseId y) const {
  validate_query(x);
  if (y < 0 || y >= static_cast<ResponseId>(cand_feat_[static_cast<std::size_t>(x)].size()))
    throw std::invalid_argument("unknown response id " + std::to_string(y) + " for query " +
                                std::to_string(x));
}

World gen_world(const WorldConfig& config, std::uint64_t seed) { return World(config, seed); }

DataSplit make_split(const World& world, const SplitConfig& cfg, std::uint64_t seed) {
  const double ratio_sum = cfg.rm_ratio + cfg.llm_ratio + cfg.test_ratio;
  if (std::abs(ratio_sum - 1.0) > 1e-9)
    throw std::invalid_argument("split config: ratios must sum to 1");
  if (cfg.rm_ratio < 0.0 || cfg.llm_ratio < 0.0 || cfg.test_ratio < 0.0)
    throw std::invalid_argument("split config: ratios must be nonnegative");
  if (cfg.n_pref_pairs < 0 || cfg.n_dev_pairs < 0 || cfg.n_test_pairs < 0)
    throw std::invalid_argument("split config: pair counts must be nonnegative");

  const int n = world.num_queries();
  const int n_rm = static_cast<int>(std::llround(cfg.rm_ratio * n));
  const int n_llm = static_cast<int>(std::llround(cfg.llm_ratio * n));
  const int n_test = n - n_rm - n_llm;
  if (n_rm < 1 || n_llm < 1 || n_test < 1)
    throw std::invalid_argument("split config: every partition must receive at least one query");

  Rng root(seed);
  std::vector<QueryId> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng perm = root.fork(kPartitionStream);
  shuffle(order, perm);

  DataSplit split;
  split.rm_train_queries.assign(order.begin(), order.begin() + n_rm);
  split.llm_train_queries.assign(order.begin() + n_rm, order.begin() + n_rm + n_llm);
  split.test_queries.assign(order.begin() + n_rm + n_llm, order.end());
  std::sort(split.rm_train_queries.begin(), split.rm_train_queries.end());
  std::sort(split.llm_train_queries.begin(), split.llm_train_queries.end());
  std::sort(split.test_queries.begin(), split.test_queries.end());

  Rng dev_rng = root.fork(kDevPairStream);
  split.dev_pairs = build_pref_dataset(world, split.llm_train_queries, cfg.n_dev_pairs, dev_rng);
  Rng test_rng = root.fork(kTestPairStream);
  split.test_pairs = build_pref_dataset(world, split.test_queries, cfg.n_test_pairs, test_rng);
  return split;
}

std::vector<PreferencePair> build_pref_dataset(const World& world,
                                               const std::vector<QueryId>& query_set,
                                               int n_pairs, Rng& rng) {
  if (n_pairs < 0) throw std::invalid_argument("build_pref_dataset: n_pairs must be >= 0");
  if (n_pairs > 0 && query_set.empty())
    throw std::invalid_argument("build_pref_dataset: empty query set");
  std::vector<PreferencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    const QueryId q = query_set[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(query_set.size())))];
    const int k = world.num_candidates(q);
    const auto a = static_cast<ResponseId>(rng.uniform_int(k));
    auto b = static_cast<ResponseId>(rng.uniform_int(k - 1));
    if (b >= a) b += 1;
    pairs.push_back(world.annotate_pair(q, a, b, rng));
  }
  return pairs;
}

}  // namespace apolab
