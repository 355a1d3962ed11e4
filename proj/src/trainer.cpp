#include "pcmea/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pcmea/checkpoint.hpp"
#include "pcmea/error.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x7A11E5ULL;
constexpr std::uint64_t kMineSalt = 0x313E5ULL;

const char* stage_name(Stage s) { return s == Stage::Momentum ? "momentum" : "online_only"; }

AdamConfig adam_config(const TrainConfig& c) {
  return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_eps};
}

Matrix gather(const Matrix& m, std::span<const EntityIndex> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::string describe_batch(std::span<const SeedPair> pairs, const LossBreakdown& parts) {
  std::ostringstream out;
  out << "non-finite loss on batch of " << pairs.size() << " pairs [";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out << (i ? " " : "") << pairs[i].source << ':' << pairs[i].target;
  }
  out << "] al=";
  for (double v : parts.align) out << v << ',';
  out << " mi=" << parts.mi << " cl=";
  for (double v : parts.contrastive) out << v << ',';
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------

TrainData TrainData::build(MMKGPair pair, ModalFeatureBundle source_features, ModalFeatureBundle target_features) {
  pair.validate();
  source_features.validate(pair.source.num_entities());
  target_features.validate(pair.target.num_entities());
  TrainData d;
  d.source_adj = build_adjacency(pair.source);
  d.target_adj = build_adjacency(pair.target);
  d.pair = std::move(pair);
  d.source_features = std::move(source_features);
  d.target_features = std::move(target_features);
  return d;
}

std::string EpochRecord::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["stage"] = stage_name(stage);
  nlohmann::json al, cl;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    al[modality_name(kAllModalities[m])] = loss.align[m];
    cl[modality_name(kAllModalities[m])] = loss.contrastive[m];
  }
  cl["j"] = loss.contrastive[kNumModalities];
  j["l_al"] = al;
  j["l_mi"] = loss.mi;
  j["l_cl"] = cl;
  j["total"] = loss.total;
  j["batches"] = batches;
  j["promoted"] = promoted;
  j["dictionary"] = dictionary;
  if (eval) {
    j["hits1"] = eval->hits_at(1);
    j["hits5"] = eval->hits_at(5);
    j["hits10"] = eval->hits_at(10);
    j["mrr"] = eval->mrr;
    j["n_queries"] = eval->n_queries;
    j["eval_direction"] = static_cast<int>(eval->direction);
  }
  return j.dump();
}

EpochRecord EpochRecord::from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.stage = j.at("stage").get<std::string>() == "momentum" ? Stage::Momentum : Stage::OnlineOnly;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    r.loss.align[m] = j.at("l_al").at(modality_name(kAllModalities[m])).get<double>();
    r.loss.contrastive[m] = j.at("l_cl").at(modality_name(kAllModalities[m])).get<double>();
  }
  r.loss.contrastive[kNumModalities] = j.at("l_cl").at("j").get<double>();
  r.loss.mi = j.at("l_mi").get<double>();
  r.loss.total = j.at("total").get<double>();
  r.batches = j.at("batches").get<std::size_t>();
  r.promoted = j.at("promoted").get<std::size_t>();
  r.dictionary = j.at("dictionary").get<std::size_t>();
  if (j.contains("hits1")) {
    EvalReport e;
    e.ks = kDefaultKs;
    e.hits = {j["hits1"].get<double>(), j["hits5"].get<double>(), j["hits10"].get<double>()};
    e.mrr = j["mrr"].get<double>();
    e.n_queries = j["n_queries"].get<std::size_t>();
    e.direction = static_cast<EvalDirection>(j["eval_direction"].get<int>());
    r.eval = e;
  }
  return r;
}

void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& r : history) out << r.to_json() << '\n';
  detail::finish_output(out, path);
}

std::vector<EpochRecord> read_history(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<EpochRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(EpochRecord::from_json(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> chunk_batches(std::span<const std::size_t> order, std::size_t batch_size) {
  if (batch_size < 1) throw ArgumentError("batch_size must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const auto end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::vector<std::size_t>> reorder_labeled(std::span<const SeedPair> pairs, const Matrix& source_joint,
                                                      const Matrix& target_joint, std::size_t batch_size) {
  if (batch_size < 1) throw ArgumentError("batch_size must be positive");
  const auto n = pairs.size();
  Matrix means(static_cast<Eigen::Index>(n), source_joint.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::RowVectorXd m = 0.5 * (source_joint.row(pairs[k].source) + target_joint.row(pairs[k].target));
    const double norm = m.norm();
    means.row(static_cast<Eigen::Index>(k)) = norm > 0.0 ? Eigen::RowVectorXd(m / norm) : m;
  }
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  while (!remaining.empty()) {
    const auto anchor = remaining.front();
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const auto k = remaining[i];
      scored.emplace_back(means.row(static_cast<Eigen::Index>(anchor)).dot(means.row(static_cast<Eigen::Index>(k))), k);
    }
    const auto take = std::min(scored.size(), batch_size - 1);
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::size_t> batch = {anchor};
    for (std::size_t i = 0; i < take; ++i) batch.push_back(scored[i].second);
    std::set<std::size_t> used(batch.begin(), batch.end());
    std::erase_if(remaining, [&](std::size_t k) { return used.contains(k); });
    out.push_back(std::move(batch));
  }
  return out;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig config, const TrainData& data)
    : config_(std::move(config)),
      data_(&data),
      encoder_(config_.encoder, ModelShape::from_features(data.source_features, data.target_features)),
      rng_(config_.rng_seed ^ kShuffleSalt) {
  config_.validate();
  init_fresh();
}

Trainer::Trainer(TrainConfig config, const TrainData& data, TrainState state)
    : config_(std::move(config)),
      data_(&data),
      encoder_(config_.encoder, ModelShape::from_features(data.source_features, data.target_features)),
      state_(std::move(state)) {
  config_.validate();
  const auto fresh = encoder_.init_parameters(config_.rng_seed);
  if (!fresh.same_schema(state_.online) || !fresh.same_schema(state_.target)) {
    throw IncompatibleCheckpoint("saved parameters do not match the model built from this data and config");
  }
  std::istringstream in(state_.rng_state);
  in >> rng_;
  if (!in) throw IncompatibleCheckpoint("corrupt RNG state");
  state_.pseudo.validate(data.pair.train_seeds);
}

void Trainer::init_fresh() {
  state_ = TrainState{};
  state_.online = encoder_.init_parameters(config_.rng_seed);
  state_.target = state_.online;
  state_.target.set_role(StoreRole::Target);
  Rng mine_rng(config_.rng_seed ^ kMineSalt);
  state_.mine = ParameterStore(StoreRole::Auxiliary);
  for (auto m : kMiModalities) {
    add_mine_network(state_.mine, mine_prefix(m), encoder_.joint_dim() + config_.encoder.modal_dim,
                     config_.mine_hidden, mine_rng);
  }
  state_.adam_online = AdamMoments::for_store(state_.online);
  state_.adam_mine = AdamMoments::for_store(state_.mine);
  state_.stage = state_.epoch >= config_.stage_switch_epoch ? Stage::Momentum : Stage::OnlineOnly;
  std::ostringstream rs;
  rs << rng_;
  state_.rng_state = rs.str();
}

EmbeddingSet Trainer::embed(GraphSide side, bool use_target) const {
  return encoder_.embed(use_target ? state_.target : state_.online, side, data_->features(side),
                        data_->adjacency(side));
}

EvalReport Trainer::evaluate() const {
  const auto src = embed(GraphSide::Source);
  const auto tgt = embed(GraphSide::Target);
  return evaluate_alignment(src.joint, tgt.joint, data_->pair.test_seeds, config_.eval_all_targets,
                            config_.eval_bidirectional);
}

std::vector<SeedPair> Trainer::positives() const {
  auto out = data_->pair.train_seeds.pairs;
  for (const auto& p : state_.pseudo.promoted) out.push_back(p.pair);
  return out;
}

const std::array<EmbeddingSet, 2>& Trainer::online_embeddings() {
  if (!cached_online_) cached_online_ = std::array{embed(GraphSide::Source), embed(GraphSide::Target)};
  return *cached_online_;
}

Trainer::BatchResult Trainer::run_batch(std::span<const SeedPair> pairs, std::span<const bool> pseudo,
                                        const std::optional<std::array<EmbeddingSet, 2>>& momentum) {
  ad::Tape tape;
  BoundParameters online(tape, state_.online, true);
  BoundParameters mine(tape, state_.mine, true);
  const auto enc_s = encoder_.encode(online, GraphSide::Source, data_->source_features, data_->source_adj);
  const auto enc_t = encoder_.encode(online, GraphSide::Target, data_->target_features, data_->target_adj);
  const double tau = config_.temperature;

  std::vector<EntityIndex> src_rows, tgt_rows, seed_src_rows, seed_tgt_rows;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    src_rows.push_back(pairs[i].source);
    tgt_rows.push_back(pairs[i].target);
    if (!config_.pseudo_labels_contrastive_only || !pseudo[i]) {
      seed_src_rows.push_back(pairs[i].source);
      seed_tgt_rows.push_back(pairs[i].target);
    }
  }

  LossBreakdown parts;
  std::vector<ad::Var> terms;

  if (config_.use_align_loss && !seed_src_rows.empty()) {
    const auto js = ad::gather_rows(enc_s.joint, seed_src_rows);
    const auto jt = ad::gather_rows(enc_t.joint, seed_tgt_rows);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const auto l = align_loss(js, jt, ad::gather_rows(enc_s.modal[m], seed_src_rows),
                                ad::gather_rows(enc_t.modal[m], seed_tgt_rows), tau);
      parts.align[m] = l.scalar();
      terms.push_back(l);
    }
  }

  if (config_.use_mi_loss && !seed_src_rows.empty()) {
    const std::array<ad::Var, 2> joint_parts = {ad::gather_rows(enc_s.joint, seed_src_rows),
                                                ad::gather_rows(enc_t.joint, seed_tgt_rows)};
    const auto joint = ad::concat_rows(joint_parts);
    const auto n = static_cast<std::size_t>(joint.rows());
    std::vector<ad::Var> estimates;
    for (std::size_t k = 0; k < kMiModalities.size(); ++k) {
      const auto m = static_cast<std::size_t>(kMiModalities[k]);
      const std::array<ad::Var, 2> modal_parts = {ad::gather_rows(enc_s.modal[m], seed_src_rows),
                                                  ad::gather_rows(enc_t.modal[m], seed_tgt_rows)};
      const auto modal = ad::concat_rows(modal_parts);
      std::vector<EntityIndex> order(n);
      std::iota(order.begin(), order.end(), EntityIndex{0});
      shuffle(std::span<EntityIndex>(order), rng_);
      const auto prefix = mine_prefix(kMiModalities[k]);
      const std::array<ad::Var, 2> paired_in = {joint, modal};
      const std::array<ad::Var, 2> shuffled_in = {joint, ad::gather_rows(modal, order)};
      const auto paired = mine_statistic(mine, prefix, ad::concat_cols(paired_in));
      const auto shuffled = mine_statistic(mine, prefix, ad::concat_cols(shuffled_in));
      if (config_.mine_bias_correction) {
        const double mean_exp = shuffled.value().array().exp().mean();
        auto& ema = state_.mine_ema[k];
        ema = state_.mine_ema_ready ? (1.0 - config_.mine_ema_rate) * ema + config_.mine_ema_rate * mean_exp
                                    : mean_exp;
        estimates.push_back(dv_bound_corrected(paired, shuffled, ema));
      } else {
        estimates.push_back(dv_bound(paired, shuffled));
      }
    }
    if (config_.mine_bias_correction) state_.mine_ema_ready = true;
    const auto l = mi_loss(estimates);
    parts.mi = l.scalar();
    terms.push_back(l);
  }

  if (config_.use_contrastive_loss) {
    for (std::size_t m = 0; m <= kNumModalities; ++m) {
      const auto on_s = ad::gather_rows(m < kNumModalities ? enc_s.modal[m] : enc_s.joint, src_rows);
      const auto on_t = ad::gather_rows(m < kNumModalities ? enc_t.modal[m] : enc_t.joint, tgt_rows);
      ad::Var mo_s = on_s, mo_t = on_t;
      if (momentum) {
        const auto& ms = (*momentum)[0];
        const auto& mt = (*momentum)[1];
        mo_s = tape.constant(gather(m < kNumModalities ? ms.modal[m] : ms.joint, src_rows));
        mo_t = tape.constant(gather(m < kNumModalities ? mt.modal[m] : mt.joint, tgt_rows));
      }
      const auto l = contrastive_loss(on_s, on_t, mo_s, mo_t, tau);
      parts.contrastive[m] = l.scalar();
      terms.push_back(l);
    }
  }

  parts = total_loss(parts);
  if (!std::isfinite(parts.total)) throw NumericError(describe_batch(pairs, parts));

  BatchResult result{parts, state_.online.zeros_like(), state_.mine.zeros_like()};
  if (!terms.empty()) {
    ad::Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    tape.backward(total);
    result.online_grads = online.gradients();
    result.mine_grads = mine.gradients();
  }
  return result;
}

void Trainer::calibrate(int epoch, const std::array<EmbeddingSet, 2>& online) {
  std::set<EntityIndex> used_src, used_tgt;
  for (const auto& p : positives()) {
    used_src.insert(p.source);
    used_tgt.insert(p.target);
  }
  std::vector<EntityIndex> sources, targets;
  for (EntityIndex s = 0; s < data_->pair.source.num_entities(); ++s) {
    if (!used_src.contains(s)) sources.push_back(s);
  }
  for (EntityIndex t = 0; t < data_->pair.target.num_entities(); ++t) {
    if (!used_tgt.contains(t)) targets.push_back(t);
  }
  auto preds = predict_unlabeled(online[0].joint, online[1].joint, sources, targets);
  if (config_.ensemble_agreement) {
    std::vector<PredictionMap> per_modality;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      per_modality.push_back(predict_unlabeled(online[0].modal[m], online[1].modal[m], sources, targets));
    }
    preds = filter_by_ensemble(preds, per_modality);
  }
  calibrate_pseudo_labels(state_.pseudo, preds, epoch);
}

const EpochRecord& Trainer::train_epoch() {
  const int e = state_.epoch;
  const bool momentum_stage = state_.stage == Stage::Momentum;

  const auto pos = positives();
  std::vector<bool> pseudo(pos.size(), false);
  std::fill(pseudo.begin() + static_cast<std::ptrdiff_t>(data_->pair.train_seeds.size()), pseudo.end(), true);

  const auto batch_size = static_cast<std::size_t>(config_.batch_size);
  std::vector<std::vector<std::size_t>> batches;
  if (config_.use_reorder && e >= config_.reorder_start && e < config_.reorder_stop) {
    const auto& emb = online_embeddings();
    batches = reorder_labeled(pos, emb[0].joint, emb[1].joint, batch_size);
  } else {
    std::vector<std::size_t> order(pos.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng_);
    batches = chunk_batches(order, batch_size);
  }

  std::optional<std::array<EmbeddingSet, 2>> momentum;
  if (momentum_stage && config_.use_contrastive_loss) {
    momentum = std::array{embed(GraphSide::Source, true), embed(GraphSide::Target, true)};
  }

  EpochRecord record;
  record.epoch = e;
  record.stage = state_.stage;
  const auto adam = adam_config(config_);
  for (const auto& batch : batches) {
    std::vector<SeedPair> pairs;
    std::unique_ptr<bool[]> flags(new bool[batch.size()]);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      pairs.push_back(pos[batch[i]]);
      flags[i] = pseudo[batch[i]];
    }
    auto result = run_batch(pairs, std::span<const bool>(flags.get(), batch.size()), momentum);
    ++state_.adam_step;
    adam_step(state_.online, result.online_grads, state_.adam_online, state_.adam_step, adam);
    adam_step(state_.mine, result.mine_grads, state_.adam_mine, state_.adam_step, adam);
    for (std::size_t m = 0; m < kNumModalities; ++m) record.loss.align[m] += result.parts.align[m];
    for (std::size_t m = 0; m <= kNumModalities; ++m) record.loss.contrastive[m] += result.parts.contrastive[m];
    record.loss.mi += result.parts.mi;
  }
  cached_online_.reset();
  record.batches = batches.size();
  if (!batches.empty()) {
    const double inv = 1.0 / static_cast<double>(batches.size());
    for (auto& v : record.loss.align) v *= inv;
    for (auto& v : record.loss.contrastive) v *= inv;
    record.loss.mi *= inv;
  }
  record.loss = total_loss(record.loss);

  if (momentum_stage && e % config_.momentum_span == 0) {
    momentum_update(state_.target, state_.online, config_.momentum);
  }

  if (config_.use_pseudo_labels && e >= config_.pseudo_label_start && e % config_.calibration_window == 0) {
    calibrate(e, online_embeddings());
  }
  record.promoted = state_.pseudo.promoted.size();
  record.dictionary = state_.pseudo.dictionary.size();

  if (config_.eval_every > 0 && (e + 1) % config_.eval_every == 0) {
    const auto& emb = online_embeddings();
    record.eval = evaluate_alignment(emb[0].joint, emb[1].joint, data_->pair.test_seeds, config_.eval_all_targets,
                                     config_.eval_bidirectional);
  }

  state_.epoch = e + 1;
  if (state_.epoch == config_.stage_switch_epoch) {
    for (std::size_t i = 0; i < state_.online.size(); ++i) {
      state_.target.entries()[i].value = state_.online.entries()[i].value;
    }
  }
  state_.stage = state_.epoch >= config_.stage_switch_epoch ? Stage::Momentum : Stage::OnlineOnly;
  std::ostringstream rs;
  rs << rng_;
  state_.rng_state = rs.str();
  state_.history.push_back(std::move(record));
  return state_.history.back();
}

// ---------------------------------------------------------------------------

TrainState run_training(const TrainConfig& config, const TrainData& data, const std::filesystem::path& out_dir,
                        std::optional<TrainState> resume) {
  const RunPaths paths{out_dir};
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create run directory '" + out_dir.string() + "': " + ec.message());
  write_config(config, paths.config());

  Trainer trainer = resume ? Trainer(config, data, std::move(*resume)) : Trainer(config, data);
  write_history(trainer.state().history, paths.history());
  {
    auto out = std::ofstream(paths.history(), std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open '" + paths.history().string() + "' for appending");
    while (trainer.state().epoch < config.epochs) {
      const auto& record = trainer.train_epoch();
      out << record.to_json() << '\n';
      out.flush();
      if (!out) throw IoError("write failed on '" + paths.history().string() + "'");
      if (config.checkpoint_every > 0 && trainer.state().epoch % config.checkpoint_every == 0) {
        save_checkpoint(trainer.state(), config, paths.checkpoint_at(trainer.state().epoch));
      }
    }
  }
  save_checkpoint(trainer.state(), config, paths.checkpoint());
  return trainer.state();
}

}  // namespace pcmea
