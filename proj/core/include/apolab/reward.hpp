#pragma once

#include <cstdint>
#include <vector>

#include "apolab/numcore.hpp"
#include "apolab/world.hpp"

namespace apolab {

struct RewardModel {
  ScorerParams params;
};

/// Golden-vs-sample comparison (x, y_gold, y_sample). golden == sample is
/// allowed: it arises when the policy samples the golden response and
/// contributes ln 2 / zero gradient to the BT form.
struct ApoTriplet {
  QueryId query = 0;
  ResponseId golden = 0;
  ResponseId sample = 0;

  bool operator==(const ApoTriplet&) const = default;
};

struct CalibrationBin {
  int count = 0;
  double mean_predicted = 0.0;  // e_b
  double empirical_rate = 0.0;  // o_b
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

struct LossGrad {
  double loss = 0.0;
  Gradient grad;
};

double reward(const RewardModel& rm, const World& world, QueryId x, ResponseId y);

/// Q(y > y2 | x) = sigmoid(r(x,y) - r(x,y2)).
double pref_prob(const RewardModel& rm, const World& world, QueryId x, ResponseId y,
                 ResponseId y2);

/// Mean over pairs of -log sigmoid(r(winner) - r(loser)), with exact gradient.
LossGrad rank_loss(const RewardModel& rm, const World& world,
                   const std::vector<PreferencePair>& pairs);

/// rank loss over the golden-vs-sample set plus beta2 x rank loss over the
/// annotated preference set.
LossGrad apo_rm_loss(const RewardModel& rm, const World& world,
                     const std::vector<ApoTriplet>& d_apo,
                     const std::vector<PreferencePair>& d_p, double beta2);

/// Un-squashed gap form: mean(r(sample) - r(golden)) + beta2 x rank loss(D_P).
LossGrad wgan_rm_loss(const RewardModel& rm, const World& world,
                      const std::vector<ApoTriplet>& d_apo,
                      const std::vector<PreferencePair>& d_p, double beta2);

/// Discriminator-only form: rank loss over the golden-vs-sample set alone.
LossGrad gail_rm_loss(const RewardModel& rm, const World& world,
                      const std::vector<ApoTriplet>& d_apo);

/// Fraction of pairs with r(winner) > r(loser); exact ties count as incorrect.
double accuracy(const RewardModel& rm, const World& world,
                const std::vector<PreferencePair>& pairs);

/// Binning for expected calibration error. `predicted` holds Q for each
/// oriented pair, `first_won` whether the pair's presented-first response was
/// the annotated winner. Bin b collects predictions in [b/B, (b+1)/B); each
/// bin contributes (count/N) * |o_b - e_b|.
CalibrationReport ece_from_predictions(const std::vector<double>& predicted,
                                       const std::vector<bool>& first_won, int bins);

/// Orient each pair (winner-first or loser-first) by a seeded coin so
/// predictions cover [0,1], then bin Q(first > second).
CalibrationReport ece(const RewardModel& rm, const World& world,
                      const std::vector<PreferencePair>& pairs, int bins,
                      std::uint64_t orient_seed);

}  // namespace apolab
