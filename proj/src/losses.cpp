#include "pcmea/losses.hpp"

#include <cmath>
#include <numeric>

#include "pcmea/error.hpp"

namespace pcmea {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum coefficient must lie in [0, 1)");
}

CandidateBatch CandidateBatch::from_pairs(std::span<const SeedPair> pairs, std::span<const bool> pseudo) {
  CandidateBatch b;
  for (const auto& p : pairs) {
    b.source_rows.push_back(p.source);
    b.target_rows.push_back(p.target);
  }
  if (pseudo.empty()) {
    b.pseudo.assign(pairs.size(), false);
  } else {
    b.pseudo.assign(pseudo.begin(), pseudo.end());
  }
  return b;
}

std::vector<std::size_t> CandidateBatch::negatives(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i) out.push_back(j);
  }
  return out;
}

Vector alignment_distribution(const Vector& anchor, std::span<const Vector> candidates, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("temperature must be positive");
  if (candidates.empty()) throw ArgumentError("need at least one candidate");
  Vector logits(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    logits(static_cast<Eigen::Index>(k)) = anchor.dot(candidates[k]) / tau;
  }
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

ad::Var candidate_log_probs(ad::Var anchors, ad::Var counterparts, ad::Var same_side, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("temperature must be positive");
  const auto b = anchors.rows();
  if (b < 1) throw ArgumentError("empty batch");
  const std::array<ad::Var, 2> blocks = {ad::matmul(anchors, ad::transpose(counterparts)),
                                         ad::matmul(anchors, ad::transpose(same_side))};
  const auto logits = ad::scale(ad::concat_cols(blocks), 1.0 / tau);
  BoolMatrix mask = BoolMatrix::Constant(b, 2 * b, true);
  for (Eigen::Index i = 0; i < b; ++i) mask(i, b + i) = false;
  return ad::row_log_softmax(logits, mask);
}

namespace {

// sum over live entries of p_joint * (log p_joint - log p_modal), summed over rows.
ad::Var directional_kl(ad::Var joint_anchor, ad::Var joint_counter, ad::Var modal_anchor, ad::Var modal_counter,
                       double tau) {
  auto& tape = *modal_anchor.tape;
  const auto j_anchor = tape.constant(joint_anchor.value());
  const auto j_counter = tape.constant(joint_counter.value());
  const Matrix log_joint = candidate_log_probs(j_anchor, j_counter, j_anchor, tau).value();
  const auto b = log_joint.rows();
  Matrix p_joint = log_joint.array().exp();
  for (Eigen::Index i = 0; i < b; ++i) p_joint(i, b + i) = 0.0;
  const auto log_modal = candidate_log_probs(modal_anchor, modal_counter, modal_anchor, tau);
  return ad::sum(ad::hadamard(tape.constant(std::move(p_joint)), ad::sub(tape.constant(log_joint), log_modal)));
}

}  // namespace

ad::Var align_loss(ad::Var joint_src, ad::Var joint_tgt, ad::Var modal_src, ad::Var modal_tgt, double tau) {
  const auto b = modal_src.rows();
  if (b < 1) throw ArgumentError("align loss needs a non-empty batch");
  const auto forward = directional_kl(joint_src, joint_tgt, modal_src, modal_tgt, tau);
  const auto backward = directional_kl(joint_tgt, joint_src, modal_tgt, modal_src, tau);
  return ad::scale(ad::add(forward, backward), 1.0 / static_cast<double>(b));
}

double contrastive_q(const Vector& anchor, const Vector& positive, std::span<const Vector> same_side_negatives,
                     std::span<const Vector> cross_side_negatives, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("temperature must be positive");
  std::vector<double> logits;
  logits.push_back(anchor.dot(positive) / tau);
  for (const auto& v : same_side_negatives) logits.push_back(anchor.dot(v) / tau);
  for (const auto& v : cross_side_negatives) logits.push_back(anchor.dot(v) / tau);
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - m);
  return std::exp(logits.front() - m) / denom;
}

ad::Var contrastive_loss(ad::Var online_src, ad::Var online_tgt, ad::Var momentum_src, ad::Var momentum_tgt,
                         double tau) {
  const auto b = online_src.rows();
  if (b < 1) throw ArgumentError("contrastive loss needs a non-empty batch");
  // Direction e1 -> e2: counterparts are momentum targets, same-side negatives
  // are momentum sources; and symmetrically.
  const auto lp12 = candidate_log_probs(online_src, momentum_tgt, momentum_src, tau);
  const auto lp21 = candidate_log_probs(online_tgt, momentum_src, momentum_tgt, tau);
  const auto log_q12 = ad::diagonal(ad::slice_cols(lp12, 0, b));
  const auto log_q21 = ad::diagonal(ad::slice_cols(lp21, 0, b));
  const auto log_mean_q = ad::add_scalar(ad::log_add_exp(log_q12, log_q21), -std::log(2.0));
  return ad::scale(ad::mean(log_mean_q), -1.0);
}

// ---------------------------------------------------------------------------

void add_mine_network(ParameterStore& store, const std::string& prefix, Eigen::Index input_dim,
                      Eigen::Index hidden, Rng& rng) {
  if (input_dim < 1 || hidden < 1) throw ConfigError("MINE network dims must be positive");
  store.add(prefix + ".w1", glorot_uniform(rng, input_dim, hidden));
  store.add(prefix + ".b1", Matrix::Zero(1, hidden));
  store.add(prefix + ".w2", glorot_uniform(rng, hidden, 1));
  store.add(prefix + ".b2", Matrix::Zero(1, 1));
}

ad::Var mine_statistic(const BoundParameters& params, const std::string& prefix, ad::Var input) {
  const auto hidden = ad::elu(ad::add_row(ad::matmul(input, params[prefix + ".w1"]), params[prefix + ".b1"]));
  return ad::add_row(ad::matmul(hidden, params[prefix + ".w2"]), params[prefix + ".b2"]);
}

ad::Var dv_bound(ad::Var paired_stats, ad::Var shuffled_stats) {
  return ad::sub(ad::mean(paired_stats), ad::log_mean_exp(shuffled_stats));
}

ad::Var dv_bound_corrected(ad::Var paired_stats, ad::Var shuffled_stats, double ema) {
  if (!(ema > 0.0)) throw ArgumentError("moving average must be positive");
  auto& tape = *paired_stats.tape;
  const double lme = ad::log_mean_exp(tape.constant(shuffled_stats.value())).scalar();
  const double mean_exp = std::exp(lme);
  // value: mean(T) - mean(e^T)/ema + (mean(e^T)/ema - lme)  ==  mean(T) - lme
  const auto grad_path = ad::scale(ad::mean(ad::exp(shuffled_stats)), 1.0 / ema);
  return ad::add_scalar(ad::sub(ad::mean(paired_stats), grad_path), mean_exp / ema - lme);
}

ad::Var mine_estimate(const BoundParameters& params, const std::string& prefix, ad::Var joint, ad::Var modal,
                      std::span<const std::size_t> shuffle) {
  const auto n = joint.rows();
  if (n < 2) throw ArgumentError("MINE needs at least two samples");
  if (modal.rows() != n || static_cast<Eigen::Index>(shuffle.size()) != n) {
    throw ArgumentError("MINE sample counts differ");
  }
  std::vector<EntityIndex> order(shuffle.begin(), shuffle.end());
  const std::array<ad::Var, 2> paired_parts = {joint, modal};
  const std::array<ad::Var, 2> shuffled_parts = {joint, ad::gather_rows(modal, order)};
  const auto paired = mine_statistic(params, prefix, ad::concat_cols(paired_parts));
  const auto shuffled = mine_statistic(params, prefix, ad::concat_cols(shuffled_parts));
  return dv_bound(paired, shuffled);
}

std::string mine_prefix(Modality m) { return std::string("mine.") + modality_name(m); }

ad::Var mi_loss(std::span<const ad::Var> estimates) {
  if (estimates.size() != kMiModalities.size()) throw ArgumentError("MI loss takes exactly four estimates");
  ad::Var total = estimates.front();
  for (std::size_t k = 1; k < estimates.size(); ++k) total = ad::add(total, estimates[k]);
  return ad::scale(total, -1.0);
}

// ---------------------------------------------------------------------------

void momentum_update(ParameterStore& target, const ParameterStore& online, double kappa) {
  if (!target.same_schema(online)) throw ConfigError("online and target stores differ in schema");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw ArgumentError("momentum coefficient must lie in [0, 1)");
  auto dst = target.entries();
  auto src = online.entries();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i].value = kappa * dst[i].value + (1.0 - kappa) * src[i].value;
  }
}

LossBreakdown total_loss(LossBreakdown parts) {
  parts.total = std::accumulate(parts.align.begin(), parts.align.end(), 0.0) + parts.mi +
                std::accumulate(parts.contrastive.begin(), parts.contrastive.end(), 0.0);
  return parts;
}

}  // namespace pcmea
