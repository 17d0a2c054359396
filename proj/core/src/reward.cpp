#include "apolab/reward.hpp"

#include <cmath>
#include <stdexcept>

#include "apolab/policy.hpp"

namespace apolab {

namespace {

/// Accumulates mean_{pairs} -log sigmoid(r(hi) - r(lo)) and its gradient into
/// (loss, grad) with weight `weight`.
template <typename PairRange, typename HiFn, typename LoFn>
void add_rank_terms(const RewardModel& rm, const World& world, const PairRange& items,
                    HiFn hi, LoFn lo, double weight, double& loss, Gradient& grad) {
  const double scale = weight / static_cast<double>(items.size());
  for (const auto& item : items) {
    auto [r_hi, g_hi] = score_grad(rm.params, joint_feature(world, item.query, hi(item)));
    auto [r_lo, g_lo] = score_grad(rm.params, joint_feature(world, item.query, lo(item)));
    const double gap = r_hi - r_lo;
    loss += scale * softplus(-gap);
    // d/dgap -log sigmoid(gap) = -sigmoid(-gap)
    const double coef = -sigmoid(-gap) * scale;
    axpy(coef, g_hi, grad);
    axpy(-coef, g_lo, grad);
  }
}

}  // namespace

double reward(const RewardModel& rm, const World& world, QueryId x, ResponseId y) {
  return score(rm.params, joint_feature(world, x, y));
}

double pref_prob(const RewardModel& rm, const World& world, QueryId x, ResponseId y,
                 ResponseId y2) {
  return sigmoid(reward(rm, world, x, y) - reward(rm, world, x, y2));
}

LossGrad rank_loss(const RewardModel& rm, const World& world,
                   const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("rank_loss: empty pair list");
  LossGrad out{0.0, zeros_like(rm.params)};
  add_rank_terms(
      rm, world, pairs, [](const PreferencePair& p) { return p.winner; },
      [](const PreferencePair& p) { return p.loser; }, 1.0, out.loss, out.grad);
  return out;
}

LossGrad apo_rm_loss(const RewardModel& rm, const World& world,
                     const std::vector<ApoTriplet>& d_apo,
                     const std::vector<PreferencePair>& d_p, double beta2) {
  if (d_apo.empty()) throw std::invalid_argument("apo_rm_loss: empty APO set");
  if (d_p.empty()) throw std::invalid_argument("apo_rm_loss: empty preference set");
  if (!(beta2 >= 0.0)) throw std::invalid_argument("apo_rm_loss: beta2 must be >= 0");
  LossGrad out{0.0, zeros_like(rm.params)};
  add_rank_terms(
      rm, world, d_apo, [](const ApoTriplet& t) { return t.golden; },
      [](const ApoTriplet& t) { return t.sample; }, 1.0, out.loss, out.grad);
  add_rank_terms(
      rm, world, d_p, [](const PreferencePair& p) { return p.winner; },
      [](const PreferencePair& p) { return p.loser; }, beta2, out.loss, out.grad);
  return out;
}

LossGrad wgan_rm_loss(const RewardModel& rm, const World& world,
                      const std::vector<ApoTriplet>& d_apo,
                      const std::vector<PreferencePair>& d_p, double beta2) {
  if (d_apo.empty()) throw std::invalid_argument("wgan_rm_loss: empty APO set");
  if (d_p.empty()) throw std::invalid_argument("wgan_rm_loss: empty preference set");
  if (!(beta2 >= 0.0)) throw std::invalid_argument("wgan_rm_loss: beta2 must be >= 0");
  LossGrad out{0.0, zeros_like(rm.params)};
  const double scale = 1.0 / static_cast<double>(d_apo.size());
  for (const auto& t : d_apo) {
    auto [r_s, g_s] = score_grad(rm.params, joint_feature(world, t.query, t.sample));
    auto [r_g, g_g] = score_grad(rm.params, joint_feature(world, t.query, t.golden));
    out.loss += scale * (r_s - r_g);
    axpy(scale, g_s, out.grad);
    axpy(-scale, g_g, out.grad);
  }
  add_rank_terms(
      rm, world, d_p, [](const PreferencePair& p) { return p.winner; },
      [](const PreferencePair& p) { return p.loser; }, beta2, out.loss, out.grad);
  return out;
}

LossGrad gail_rm_loss(const RewardModel& rm, const World& world,
                      const std::vector<ApoTriplet>& d_apo) {
  if (d_apo.empty()) throw std::invalid_argument("gail_rm_loss: empty APO set");
  LossGrad out{0.0, zeros_like(rm.params)};
  add_rank_terms(
      rm, world, d_apo, [](const ApoTriplet& t) { return t.golden; },
      [](const ApoTriplet& t) { return t.sample; }, 1.0, out.loss, out.grad);
  return out;
}

double accuracy(const RewardModel& rm, const World& world,
                const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("accuracy: empty pair list");
  int correct = 0;
  for (const auto& p : pairs)
    if (reward(rm, world, p.query, p.winner) > reward(rm, world, p.query, p.loser)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

CalibrationReport ece_from_predictions(const std::vector<double>& predicted,
                                       const std::vector<bool>& first_won, int bins) {
  if (predicted.empty()) throw std::invalid_argument("ece: empty prediction list");
  if (predicted.size() != first_won.size())
    throw std::invalid_argument("ece: prediction/outcome size mismatch");
  if (bins < 1) throw std::invalid_argument("ece: bins must be >= 1");
  std::vector<double> sum_pred(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> sum_won(static_cast<std::size_t>(bins), 0.0);
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double q = predicted[i];
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("ece: prediction outside [0,1]");
    auto b = static_cast<int>(q * bins);
    if (b >= bins) b = bins - 1;
    sum_pred[static_cast<std::size_t>(b)] += q;
    sum_won[static_cast<std::size_t>(b)] += first_won[i] ? 1.0 : 0.0;
    count[static_cast<std::size_t>(b)] += 1;
  }
  CalibrationReport report;
  report.bins.resize(static_cast<std::size_t>(bins));
  const auto n = static_cast<double>(predicted.size());
  for (int b = 0; b < bins; ++b) {
    auto& bin = report.bins[static_cast<std::size_t>(b)];
    bin.count = count[static_cast<std::size_t>(b)];
    if (bin.count > 0) {
      bin.mean_predicted = sum_pred[static_cast<std::size_t>(b)] / bin.count;
      bin.empirical_rate = sum_won[static_cast<std::size_t>(b)] / bin.count;
      report.ece += (bin.count / n) * std::abs(bin.empirical_rate - bin.mean_predicted);
    }
  }
  return report;
}

CalibrationReport ece(const RewardModel& rm, const World& world,
                      const std::vector<PreferencePair>& pairs, int bins,
                      std::uint64_t orient_seed) {
  if (pairs.empty()) throw std::invalid_argument("ece: empty pair list");
  Rng coin(orient_seed);
  std::vector<double> predicted(pairs.size());
  std::vector<bool> first_won(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const bool winner_first = coin.uniform() < 0.5;
    const ResponseId first = winner_first ? p.winner : p.loser;
    const ResponseId second = winner_first ? p.loser : p.winner;
    predicted[i] = pref_prob(rm, world, p.query, first, second);
    first_won[i] = winner_first;
  }
  return ece_from_predictions(predicted, first_won, bins);
}

}  // namespace apolab
