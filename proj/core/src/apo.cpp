#include "apolab/apo.hpp"

#include <cmath>
#include <stdexcept>

namespace apolab {

namespace {

// Stream tags. Evaluation streams are fixed across rounds (common random
// numbers, so a frozen run yields constant metrics); training streams mix the
// round index for fresh draws each round.
constexpr std::uint64_t kWorldStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kPrefDataStream = 3;
constexpr std::uint64_t kGoldenSetStream = 4;
constexpr std::uint64_t kPolicyInitStream = 5;
constexpr std::uint64_t kRmInitStream = 6;
constexpr std::uint64_t kBaseRmTrainStream = 7;
constexpr std::uint64_t kEvalPolicyStream = 8;
constexpr std::uint64_t kEvalRmRewardStream = 9;
constexpr std::uint64_t kWinRateStream = 10;
constexpr std::uint64_t kShiftPairStream = 11;
constexpr std::uint64_t kEceOrientStream = 12;
constexpr std::uint64_t kApoSetStream = 13;
constexpr std::uint64_t kRmTrainStream = 14;
constexpr std::uint64_t kAlignSampleStream = 15;
constexpr std::uint64_t kAlignUpdateStream = 16;
constexpr std::uint64_t kRoundStride = 1000;

std::uint64_t round_tag(std::uint64_t base, int round) {
  return base + static_cast<std::uint64_t>(round) * kRoundStride;
}

void validate_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.rounds < 1) throw std::invalid_argument("experiment config: rounds must be >= 1");
  if (cfg.samples_per_query < 1)
    throw std::invalid_argument("experiment config: samples_per_query must be >= 1");
  if (method_uses_samples(cfg.align.method) && cfg.samples_per_query < 2)
    throw std::invalid_argument(
        "experiment config: pairwise align methods need samples_per_query >= 2");
  if (cfg.eval_samples < 1)
    throw std::invalid_argument("experiment config: eval_samples must be >= 1");
  if (cfg.n_shift_pairs < 1)
    throw std::invalid_argument("experiment config: n_shift_pairs must be >= 1");
  if (!(cfg.tie_eps > 0.0)) throw std::invalid_argument("experiment config: tie_eps must be > 0");
  if (cfg.rm.epochs < 0) throw std::invalid_argument("rm config: epochs must be >= 0");
  if (cfg.rm.minibatch < 1) throw std::invalid_argument("rm config: minibatch must be >= 1");
  if (!(cfg.rm.lr >= 0.0)) throw std::invalid_argument("rm config: lr must be >= 0");
  if (!(cfg.rm.beta2 >= 0.0)) throw std::invalid_argument("rm config: beta2 must be >= 0");
  if (cfg.rm.ece_bins < 1) throw std::invalid_argument("rm config: ece_bins must be >= 1");
  if (cfg.rm.optimizer != "adam" && cfg.rm.optimizer != "sgd")
    throw std::invalid_argument("rm config: optimizer must be adam or sgd");
}

}  // namespace

const char* rm_init_mode_name(RmInitMode mode) {
  return mode == RmInitMode::FreshFromBase ? "fresh_from_base" : "sequential";
}

RmInitMode rm_init_mode_from_name(const std::string& name) {
  if (name == "fresh_from_base") return RmInitMode::FreshFromBase;
  if (name == "sequential") return RmInitMode::Sequential;
  throw std::invalid_argument("unknown rm init mode '" + name +
                              "' (expected fresh_from_base|sequential)");
}

const char* rm_variant_name(RmVariant variant) {
  switch (variant) {
    case RmVariant::BtForm: return "bt";
    case RmVariant::WganForm: return "wgan";
    case RmVariant::GailForm: return "gail";
    case RmVariant::NoApoSamples: return "no_apo_samples";
  }
  throw std::logic_error("unreachable");
}

RmVariant rm_variant_from_name(const std::string& name) {
  if (name == "bt") return RmVariant::BtForm;
  if (name == "wgan") return RmVariant::WganForm;
  if (name == "gail") return RmVariant::GailForm;
  if (name == "no_apo_samples") return RmVariant::NoApoSamples;
  throw std::invalid_argument("unknown rm variant '" + name +
                              "' (expected bt|wgan|gail|no_apo_samples)");
}

std::string experiment_tag(const ExperimentConfig& config) {
  if (!config.run_tag.empty()) return config.run_tag;
  std::string tag = align_method_name(config.align.method);
  if (config.apo_enabled) tag += "+apo";
  return tag;
}

std::vector<ApoTriplet> build_apo_set(const Policy& policy, const World& world,
                                      const std::vector<GoldenExample>& golden_set, int s,
                                      Rng& rng) {
  if (golden_set.empty()) throw std::invalid_argument("build_apo_set: empty golden set");
  if (s < 1) throw std::invalid_argument("build_apo_set: S must be >= 1");
  std::vector<ApoTriplet> out;
  out.reserve(golden_set.size() * static_cast<std::size_t>(s));
  for (const auto& ex : golden_set) {
    const auto samples = sample_responses(policy, world, ex.query, s, rng);
    for (ResponseId y : samples) out.push_back({ex.query, ex.golden_response, y});
  }
  return out;
}

RewardModel train_rm(const RewardModel& init, const World& world,
                     const std::vector<ApoTriplet>& d_apo,
                     const std::vector<PreferencePair>& d_p, const RmConfig& config, Rng& rng,
                     const std::string& context) {
  const bool needs_apo = config.variant != RmVariant::NoApoSamples;
  const bool needs_p = config.variant != RmVariant::GailForm;
  if (needs_apo && d_apo.empty())
    throw std::invalid_argument("train_rm: variant " + std::string(rm_variant_name(config.variant)) +
                                " needs a nonempty APO set (" + context + ")");
  if (needs_p && d_p.empty())
    throw std::invalid_argument("train_rm: variant " + std::string(rm_variant_name(config.variant)) +
                                " needs a nonempty preference set (" + context + ")");

  RewardModel rm = init;
  if (config.epochs == 0) return rm;

  OptimizerState opt = config.optimizer == "adam" ? make_adam(config.lr, rm.params)
                                                  : make_sgd(config.lr);

  // One epoch sweeps the driving set (D_P, or D_APO for the gail form) in
  // shuffled minibatches; the other set contributes a same-sized minibatch
  // per step, cycling through its own shuffled order.
  const std::size_t n_drive = needs_p ? d_p.size() : d_apo.size();
  std::vector<std::size_t> drive_order(n_drive);
  for (std::size_t i = 0; i < n_drive; ++i) drive_order[i] = i;
  std::vector<std::size_t> apo_order(d_apo.size());
  for (std::size_t i = 0; i < apo_order.size(); ++i) apo_order[i] = i;
  std::size_t apo_cursor = 0;

  const auto mb = static_cast<std::size_t>(config.minibatch);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(drive_order, rng);
    if (needs_apo && needs_p) shuffle(apo_order, rng);
    for (std::size_t start = 0; start < n_drive; start += mb) {
      const std::size_t stop = std::min(n_drive, start + mb);
      std::vector<PreferencePair> p_batch;
      std::vector<ApoTriplet> apo_batch;
      if (needs_p) {
        p_batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) p_batch.push_back(d_p[drive_order[i]]);
        if (needs_apo) {
          apo_batch.reserve(stop - start);
          for (std::size_t i = start; i < stop; ++i) {
            apo_batch.push_back(d_apo[apo_order[apo_cursor]]);
            apo_cursor = (apo_cursor + 1) % apo_order.size();
          }
        }
      } else {
        apo_batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) apo_batch.push_back(d_apo[drive_order[i]]);
      }

      LossGrad lg;
      switch (config.variant) {
        case RmVariant::BtForm: lg = apo_rm_loss(rm, world, apo_batch, p_batch, config.beta2); break;
        case RmVariant::WganForm: lg = wgan_rm_loss(rm, world, apo_batch, p_batch, config.beta2); break;
        case RmVariant::GailForm: lg = gail_rm_loss(rm, world, apo_batch); break;
        case RmVariant::NoApoSamples: lg = rank_loss(rm, world, p_batch); break;
      }
      if (!std::isfinite(lg.loss))
        throw std::runtime_error("train_rm: non-finite loss (" + context + ", epoch " +
                                 std::to_string(epoch + 1) + ", step at item " +
                                 std::to_string(start) + ")");
      auto [next_opt, next_params] = opt_step(std::move(opt), rm.params, lg.grad);
      opt = std::move(next_opt);
      rm.params = std::move(next_params);
    }
  }
  return rm;
}

PolicyEval evaluate_policy(const Policy& policy, const Policy& ref, const World& world,
                           const std::vector<QueryId>& queries, int n_samples, Rng& rng) {
  if (queries.empty()) throw std::invalid_argument("evaluate_policy: empty query set");
  if (n_samples < 1) throw std::invalid_argument("evaluate_policy: n_samples must be >= 1");
  double total = 0.0;
  for (QueryId q : queries) {
    const auto samples = sample_responses(policy, world, q, n_samples, rng);
    for (ResponseId y : samples) total += world.golden_utility(q, y);
  }
  PolicyEval out;
  out.true_utility = total / (static_cast<double>(queries.size()) * n_samples);
  out.kl_to_ref = kl_to(policy, ref, world, queries);
  return out;
}

double mean_rm_reward(const Policy& policy, const RewardModel& rm, const World& world,
                      const std::vector<QueryId>& queries, int n_samples, Rng& rng) {
  if (queries.empty()) throw std::invalid_argument("mean_rm_reward: empty query set");
  if (n_samples < 1) throw std::invalid_argument("mean_rm_reward: n_samples must be >= 1");
  double total = 0.0;
  for (QueryId q : queries) {
    const auto samples = sample_responses(policy, world, q, n_samples, rng);
    for (ResponseId y : samples) total += reward(rm, world, q, y);
  }
  return total / (static_cast<double>(queries.size()) * n_samples);
}

WinRateResult win_rate(const Policy& policy_a, const Policy& policy_b, const World& world,
                       const std::vector<QueryId>& queries, Rng& rng, double tie_eps) {
  if (queries.empty()) throw std::invalid_argument("win_rate: empty query set");
  if (!(tie_eps > 0.0)) throw std::invalid_argument("win_rate: tie_eps must be > 0");
  int win = 0, lose = 0, tie = 0;
  for (QueryId q : queries) {
    const double u = rng.uniform();  // shared draw for both policies
    const Vec pa = response_probs(policy_a, world, q);
    const Vec pb = response_probs(policy_b, world, q);
    const auto ya = static_cast<ResponseId>(categorical_from_uniform(pa, u));
    const auto yb = static_cast<ResponseId>(categorical_from_uniform(pb, u));
    const double gap = world.golden_utility(q, ya) - world.golden_utility(q, yb);
    if (gap > tie_eps)
      ++win;
    else if (gap < -tie_eps)
      ++lose;
    else
      ++tie;
  }
  const auto n = static_cast<double>(queries.size());
  return {win / n, lose / n, tie / n};
}

std::vector<PreferencePair> sample_policy_pairs(const Policy& policy, const World& world,
                                                const std::vector<QueryId>& queries, int n_pairs,
                                                Rng& rng) {
  if (queries.empty()) throw std::invalid_argument("sample_policy_pairs: empty query set");
  if (n_pairs < 1) throw std::invalid_argument("sample_policy_pairs: n_pairs must be >= 1");
  std::vector<PreferencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    const QueryId q = queries[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(queries.size())))];
    const Vec probs = response_probs(policy, world, q);
    const auto a = static_cast<ResponseId>(categorical_from_uniform(probs, rng.uniform()));
    ResponseId b = a;
    for (int attempt = 0; attempt < 64 && b == a; ++attempt)
      b = static_cast<ResponseId>(categorical_from_uniform(probs, rng.uniform()));
    if (b == a) {
      // near-deterministic policy: fall back to a uniform distinct candidate
      b = static_cast<ResponseId>(rng.uniform_int(world.num_candidates(q) - 1));
      if (b >= a) b += 1;
    }
    pairs.push_back(world.annotate_pair(q, a, b, rng));
  }
  return pairs;
}

double shift_accuracy(const RewardModel& rm, const Policy& policy, const World& world,
                      const std::vector<QueryId>& queries, int n_pairs, Rng& rng) {
  return accuracy(rm, world, sample_policy_pairs(policy, world, queries, n_pairs, rng));
}

ExperimentLog run_apo(const ExperimentConfig& config) {
  validate_experiment_config(config);
  const Rng root(config.seed);

  const World world(config.world, root.fork_seed(kWorldStream));
  const DataSplit split = make_split(world, config.split, root.fork_seed(kSplitStream));
  if (split.dev_pairs.empty() || split.test_pairs.empty())
    throw std::invalid_argument("run_apo: dev/test pair sets must be nonempty");

  Rng pref_rng = root.fork(kPrefDataStream);
  const auto d_p = build_pref_dataset(world, split.rm_train_queries, config.split.n_pref_pairs, pref_rng);
  if (d_p.empty()) throw std::invalid_argument("run_apo: D_P must be nonempty");

  Rng golden_rng = root.fork(kGoldenSetStream);
  std::vector<GoldenExample> golden_set;
  golden_set.reserve(split.rm_train_queries.size());
  for (QueryId q : split.rm_train_queries) golden_set.push_back(world.golden_response(q, golden_rng));

  Rng policy_init_rng = root.fork(kPolicyInitStream);
  Policy policy{init_params(config.policy.arch, world.joint_dim(), 0.1, policy_init_rng),
                config.policy.temperature};
  const Policy ref = policy;  // frozen reference copy of the initial policy

  Rng rm_init_rng = root.fork(kRmInitStream);
  const ScorerParams rm_base_init = init_params(config.rm.arch, world.joint_dim(), 0.1, rm_init_rng);

  // The frozen baseline RM: D_P only, from the stored base initialization.
  RmConfig base_rm_config = config.rm;
  base_rm_config.variant = RmVariant::NoApoSamples;
  Rng base_rm_rng = root.fork(kBaseRmTrainStream);
  const RewardModel base_rm =
      train_rm(RewardModel{rm_base_init}, world, {}, d_p, base_rm_config, base_rm_rng, "base rm");

  RewardModel rm = base_rm;
  std::vector<ApoTriplet> accumulated_apo;

  ExperimentLog log;
  log.config = config;
  log.ref_policy_params = ref.params;
  log.base_rm_params = base_rm.params;

  for (int round = 1; round <= config.rounds; ++round) {
    const std::string context = "round " + std::to_string(round);

    if (config.apo_enabled) {
      Rng apo_rng = root.fork(round_tag(kApoSetStream, round));
      auto fresh_apo = build_apo_set(policy, world, golden_set, config.samples_per_query, apo_rng);
      const RewardModel start = config.rm.init_mode == RmInitMode::FreshFromBase
                                    ? RewardModel{rm_base_init}
                                    : rm;
      Rng rm_rng = root.fork(round_tag(kRmTrainStream, round));
      if (config.rm.init_mode == RmInitMode::FreshFromBase) {
        accumulated_apo.insert(accumulated_apo.end(), fresh_apo.begin(), fresh_apo.end());
        rm = train_rm(start, world, accumulated_apo, d_p, config.rm, rm_rng, context + "/rm-update");
      } else {
        rm = train_rm(start, world, fresh_apo, d_p, config.rm, rm_rng, context + "/rm-update");
      }
    }

    ScoredBatch batch;
    if (method_uses_samples(config.align.method)) {
      Rng sample_rng = root.fork(round_tag(kAlignSampleStream, round));
      batch = score_batch(policy, rm, world, split.llm_train_queries, config.samples_per_query,
                          sample_rng);
    }
    Rng align_rng = root.fork(round_tag(kAlignUpdateStream, round));
    policy = run_alignment(policy, ref, rm, world, batch, golden_set, split.llm_train_queries,
                           config.align, align_rng, context + "/policy-update");

    EpochMetrics m;
    m.round = round;
    m.rm_dev_acc = accuracy(rm, world, split.dev_pairs);
    m.rm_test_acc = accuracy(rm, world, split.test_pairs);
    const std::uint64_t orient_seed = root.fork_seed(kEceOrientStream);
    m.rm_dev_ece = ece(rm, world, split.dev_pairs, config.rm.ece_bins, orient_seed).ece;
    m.rm_test_ece = ece(rm, world, split.test_pairs, config.rm.ece_bins, orient_seed).ece;

    Rng eval_rng = root.fork(kEvalPolicyStream);
    const PolicyEval pe = evaluate_policy(policy, ref, world, split.test_queries,
                                          config.eval_samples, eval_rng);
    m.policy_true_utility = pe.true_utility;
    m.kl_to_ref = pe.kl_to_ref;
    Rng reward_rng = root.fork(kEvalRmRewardStream);
    m.policy_rm_reward = mean_rm_reward(policy, rm, world, split.test_queries,
                                        config.eval_samples, reward_rng);
    Rng win_rng = root.fork(kWinRateStream);
    const WinRateResult wr = win_rate(policy, ref, world, split.test_queries, win_rng, config.tie_eps);
    m.win = wr.win;
    m.lose = wr.lose;
    m.tie = wr.tie;

    Rng shift_rng = root.fork(kShiftPairStream);
    const auto shift_pairs =
        sample_policy_pairs(policy, world, split.test_queries, config.n_shift_pairs, shift_rng);
    m.shift_base_acc = accuracy(base_rm, world, shift_pairs);
    m.shift_rm_acc = accuracy(rm, world, shift_pairs);

    log.rounds.push_back(m);
  }

  log.final_policy_params = policy.params;
  log.final_rm_params = rm.params;
  return log;
}

}  // namespace apolab
