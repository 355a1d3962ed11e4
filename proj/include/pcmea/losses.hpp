#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pcmea/autodiff.hpp"
#include "pcmea/encoders.hpp"
#include "pcmea/kg.hpp"
#include "pcmea/params.hpp"

namespace pcmea {

struct ContrastiveConfig {
  double temperature = 0.1;
  double momentum = 0.999;

  void validate() const;
};

/// Aligned pairs of one mini-batch. For anchor i the candidates are its
/// counterpart plus every other in-batch entity of both graphs.
struct CandidateBatch {
  std::vector<EntityIndex> source_rows;
  std::vector<EntityIndex> target_rows;
  /// True for pairs that came from promoted pseudo-labels.
  std::vector<bool> pseudo;

  std::size_t size() const { return source_rows.size(); }
  static CandidateBatch from_pairs(std::span<const SeedPair> pairs, std::span<const bool> pseudo = {});
  /// Same-graph negatives of anchor i (every j != i).
  std::vector<std::size_t> negatives(std::size_t i) const;
};

/// Softmax of anchor . candidate / tau, max-shifted.
Vector alignment_distribution(const Vector& anchor, std::span<const Vector> candidates, double tau);

/// Log-probabilities over the candidate set of every anchor row, for one
/// direction. Row i holds [anchor_i . counterpart_j for all j | anchor_i .
/// same_side_j for j != i] / tau; the diagonal of the second block is masked
/// (value 0). The positive sits at column i.
ad::Var candidate_log_probs(ad::Var anchors, ad::Var counterparts, ad::Var same_side, double tau);

/// Bidirectional KL(joint || modal) over the in-batch candidate sets,
/// averaged over the batch. The joint side is treated as a fixed target.
/// All inputs are B x d batch rows.
ad::Var align_loss(ad::Var joint_src, ad::Var joint_tgt, ad::Var modal_src, ad::Var modal_tgt, double tau);

/// q for one anchor: delta(pos) / (delta(pos) + sum delta(N1) + sum delta(N2)),
/// delta(u, v) = exp(u . v / tau).
double contrastive_q(const Vector& anchor, const Vector& positive, std::span<const Vector> same_side_negatives,
                     std::span<const Vector> cross_side_negatives, double tau);

/// -mean_i log(0.5 * (q(e1_i -> e2_i) + q(e2_i -> e1_i))). Anchors come from
/// the online encoder, candidates from the momentum encoder.
ad::Var contrastive_loss(ad::Var online_src, ad::Var online_tgt, ad::Var momentum_src, ad::Var momentum_tgt,
                         double tau);

// ---------------------------------------------------------------------------
// MINE statistics networks.

/// Adds a one-hidden-layer statistics network under `prefix` to `store`.
void add_mine_network(ParameterStore& store, const std::string& prefix, Eigen::Index input_dim,
                      Eigen::Index hidden, Rng& rng);

/// Phi(x) = elu(x W1 + b1) w2 + b2, one scalar per row.
ad::Var mine_statistic(const BoundParameters& params, const std::string& prefix, ad::Var input);

/// Donsker-Varadhan estimate mean(Phi(paired)) - log mean exp(Phi(shuffled))
/// where the shuffled samples pair joint row i with modal row shuffle[i].
ad::Var mine_estimate(const BoundParameters& params, const std::string& prefix, ad::Var joint, ad::Var modal,
                      std::span<const std::size_t> shuffle);

/// Generic form on already-built paired / shuffled statistic columns.
ad::Var dv_bound(ad::Var paired_stats, ad::Var shuffled_stats);

/// Surrogate whose gradient replaces 1/mean(exp) with 1/ema (bias-corrected
/// MINE). Its value equals the plain bound.
ad::Var dv_bound_corrected(ad::Var paired_stats, ad::Var shuffled_stats, double ema);

/// Modalities that enter the mutual-information loss.
inline constexpr std::array<Modality, 4> kMiModalities = {Modality::Structure, Modality::RelText,
                                                         Modality::AttrText, Modality::Visual};

std::string mine_prefix(Modality m);

/// -sum over the four MI modalities of the estimate for each.
ad::Var mi_loss(std::span<const ad::Var> estimates);

// ---------------------------------------------------------------------------

/// theta_target <- kappa * theta_target + (1 - kappa) * theta_online.
void momentum_update(ParameterStore& target, const ParameterStore& online, double kappa);

struct LossBreakdown {
  std::array<double, kNumModalities> align{};
  double mi = 0.0;
  /// Six modalities followed by the joint embedding.
  std::array<double, kNumModalities + 1> contrastive{};
  double total = 0.0;
};

/// Fills `total` as sum(align) + mi + sum(contrastive) and returns the breakdown.
LossBreakdown total_loss(LossBreakdown parts);

}  // namespace pcmea
