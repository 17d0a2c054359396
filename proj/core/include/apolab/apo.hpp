#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "apolab/align.hpp"
#include "apolab/policy.hpp"
#include "apolab/reward.hpp"
#include "apolab/world.hpp"

namespace apolab {

enum class RmInitMode { FreshFromBase, Sequential };
enum class RmVariant { BtForm, WganForm, GailForm, NoApoSamples };

const char* rm_init_mode_name(RmInitMode mode);
RmInitMode rm_init_mode_from_name(const std::string& name);
const char* rm_variant_name(RmVariant variant);
RmVariant rm_variant_from_name(const std::string& name);

struct PolicyConfig {
  ScorerSpec arch{ScorerSpec::Arch::Mlp2, 16};
  double temperature = 1.0;
};

struct RmConfig {
  ScorerSpec arch{ScorerSpec::Arch::Mlp2, 16};
  std::string optimizer = "adam";  // adam | sgd
  double lr = 0.02;
  int epochs = 4;
  int minibatch = 64;
  RmInitMode init_mode = RmInitMode::FreshFromBase;
  RmVariant variant = RmVariant::BtForm;
  double beta2 = 10.0;  // weight of the D_P regularizer
  int ece_bins = 10;
};

struct ExperimentConfig {
  WorldConfig world;
  SplitConfig split;
  PolicyConfig policy;
  RmConfig rm;
  AlignConfig align;
  bool apo_enabled = false;
  int rounds = 3;
  int samples_per_query = 4;  // S, for both the APO set and alignment sampling
  int eval_samples = 64;      // per test query, for sampled policy metrics
  int n_shift_pairs = 2000;   // policy-sampled pairs behind the shift metrics
  double tie_eps = 0.1;       // win-rate tie margin in golden-utility units
  std::uint64_t seed = 1;
  std::string run_tag;        // defaults to "<method>" or "<method>+apo"
};

/// Effective tag: config.run_tag if set, else derived from method + apo flag.
std::string experiment_tag(const ExperimentConfig& config);

struct EpochMetrics {
  int round = 0;
  double rm_dev_acc = 0.0;
  double rm_test_acc = 0.0;
  double rm_dev_ece = 0.0;
  double rm_test_ece = 0.0;
  double policy_true_utility = 0.0;
  double policy_rm_reward = 0.0;
  double kl_to_ref = 0.0;
  double win = 0.0;
  double lose = 0.0;
  double tie = 0.0;
  // Accuracy of the frozen base RM / the current RM on fresh pairs sampled
  // from the current policy and labeled by the oracle (the
  // distribution-shift witness). Not part of the metrics CSV schema.
  double shift_base_acc = 0.0;
  double shift_rm_acc = 0.0;
};

struct ExperimentLog {
  ExperimentConfig config;
  std::vector<EpochMetrics> rounds;
  ScorerParams ref_policy_params;
  ScorerParams base_rm_params;
  ScorerParams final_policy_params;
  ScorerParams final_rm_params;
};

/// For each golden example, S policy samples; one triplet per sample.
std::vector<ApoTriplet> build_apo_set(const Policy& policy, const World& world,
                                      const std::vector<GoldenExample>& golden_set, int s,
                                      Rng& rng);

/// config.epochs passes of minibatch descent on the configured variant loss,
/// starting from `init`. BtForm/WganForm need both sets, GailForm only the
/// APO set, NoApoSamples only D_P.
RewardModel train_rm(const RewardModel& init, const World& world,
                     const std::vector<ApoTriplet>& d_apo,
                     const std::vector<PreferencePair>& d_p, const RmConfig& config, Rng& rng,
                     const std::string& context = "train_rm");

struct PolicyEval {
  double true_utility = 0.0;  // mean golden utility of sampled responses
  double kl_to_ref = 0.0;     // exact, averaged over the query set
};

PolicyEval evaluate_policy(const Policy& policy, const Policy& ref, const World& world,
                           const std::vector<QueryId>& queries, int n_samples, Rng& rng);

double mean_rm_reward(const Policy& policy, const RewardModel& rm, const World& world,
                      const std::vector<QueryId>& queries, int n_samples, Rng& rng);

struct WinRateResult {
  double win = 0.0;
  double lose = 0.0;
  double tie = 0.0;
};

/// One sampled response from each policy per query, compared on golden
/// utility with margin tie_eps. Both policies sample from the same uniform
/// draw (common random numbers), so identical policies tie exactly.
WinRateResult win_rate(const Policy& policy_a, const Policy& policy_b, const World& world,
                       const std::vector<QueryId>& queries, Rng& rng, double tie_eps);

/// Fresh pairs whose two distinct responses are both drawn from the policy,
/// labeled by the oracle. The sampling law behind the shift metrics.
std::vector<PreferencePair> sample_policy_pairs(const Policy& policy, const World& world,
                                                const std::vector<QueryId>& queries, int n_pairs,
                                                Rng& rng);

/// accuracy(rm) on sample_policy_pairs(policy).
double shift_accuracy(const RewardModel& rm, const Policy& policy, const World& world,
                      const std::vector<QueryId>& queries, int n_pairs, Rng& rng);

/// The full alternating loop: per round, an RM update on golden-vs-sample
/// data (when apo_enabled), then sampling + scoring + policy update, then
/// metrics. With apo_enabled=false the RM is trained once on D_P before
/// round 1 and frozen. Fully deterministic given (config, seed).
ExperimentLog run_apo(const ExperimentConfig& config);

}  // namespace apolab
