// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "pcmea/dataset.hpp"
#include "pcmea/encoders.hpp"
#include "pcmea/error.hpp"
#include "pcmea/eval.hpp"
#include "pcmea/losses.hpp"
#include "pcmea/optimizer.hpp"
#include "pcmea/pseudo_labels.hpp"
#include "pcmea/synthetic.hpp"
#include "pcmea/trainer.hpp"
#include "test_util.hpp"

namespace pcmea {
namespace {

using ad::Tape;
using ad::Var;
using testing::gradient_error;
using testing::random_matrix;
using testing::random_unit_rows;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Var weighted_sum(Var x) {
  Matrix w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = std::cos(0.7 * static_cast<double>(i) + 0.3);
  return ad::sum(ad::hadamard(x, x.tape->constant(w)));
}

// ---------------------------------------------------------------------------
// 1. Gradients

Outcome check_gradients() {
  Rng rng(101);
  std::map<std::string, double> worst;
  auto record = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };
  const Adjacency adj{{{0, 1, 3}, {0, 1, 2}, {1, 2}, {0, 3}}};

  for (int trial = 0; trial < 5; ++trial) {
    const auto b = static_cast<Eigen::Index>(1 + uniform_index(rng, 4));
    const auto d = static_cast<Eigen::Index>(2 + uniform_index(rng, 7));
    const double tau = 0.05 + 0.5 * uniform_unit(rng);

    const Matrix js = random_unit_rows(rng, b, d), jt = random_unit_rows(rng, b, d);
    record("align", gradient_error(
                        [&](Tape& t, const std::vector<Var>& v) {
                          return align_loss(t.constant(js), t.constant(jt), ad::row_normalize(v[0]),
                                            ad::row_normalize(v[1]), tau);
                        },
                        {random_matrix(rng, b, d), random_matrix(rng, b, d)}));

    std::vector<Matrix> cl_in;
    for (int k = 0; k < 4; ++k) cl_in.push_back(random_matrix(rng, b, d, 0.5));
    record("contrastive", gradient_error(
                              [&](Tape&, const std::vector<Var>& v) { return contrastive_loss(v[0], v[1], v[2], v[3], tau); },
                              cl_in));

    const auto n = std::max<Eigen::Index>(b, 2);
    ParameterStore mine(StoreRole::Auxiliary);
    for (auto m : kMiModalities) add_mine_network(mine, mine_prefix(m), 2 * d, 6, rng);
    for (auto& e : mine.entries()) e.value += random_matrix(rng, e.value.rows(), e.value.cols(), 0.1);
    std::vector<std::size_t> shuffle(static_cast<std::size_t>(n));
    std::iota(shuffle.begin(), shuffle.end(), std::size_t{0});
    std::rotate(shuffle.begin(), shuffle.begin() + 1, shuffle.end());
    std::vector<Matrix> mine_in;
    for (int k = 0; k < 5; ++k) mine_in.push_back(random_matrix(rng, n, d));
    auto mi_objective = [&](Tape&, const BoundParameters& p, const std::vector<Var>& v) {
      std::vector<Var> estimates;
      for (std::size_t k = 0; k < kMiModalities.size(); ++k) {
        estimates.push_back(mine_estimate(p, mine_prefix(kMiModalities[k]), v[0], v[k + 1], shuffle));
      }
      return mi_loss(estimates);
    };
    record("mutual information", testing::store_gradient_error(mine, [&](Tape& t, const BoundParameters& p) {
             std::vector<Var> v;
             for (const auto& x : mine_in) v.push_back(t.constant(x));
             return mi_objective(t, p, v);
           }));
    record("mutual information", gradient_error(
                                     [&](Tape& t, const std::vector<Var>& v) {
                                       const BoundParameters p(t, mine, false);
                                       return mi_objective(t, p, v);
                                     },
                                     mine_in));
    const Matrix paired = random_matrix(rng, n, 1), shuffled = random_matrix(rng, n, 1);
    const double ema = shuffled.array().exp().mean() * (0.5 + uniform_unit(rng));
    record("bias-corrected bound value", [&] {
      Tape t;
      return std::abs(dv_bound_corrected(t.constant(paired), t.constant(shuffled), ema).scalar() -
                      dv_bound(t.constant(paired), t.constant(shuffled)).scalar());
    }());

    const std::vector<Matrix> gat_in{random_matrix(rng, 4, 4), random_matrix(rng, 4, 4), random_matrix(rng, 4, 1),
                                     random_matrix(rng, 4, 1), random_matrix(rng, 4, 4), random_matrix(rng, 4, 1),
                                     random_matrix(rng, 4, 1), random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)};
    record("graph attention", gradient_error(
                                  [&](Tape&, const std::vector<Var>& v) {
                                    const std::vector<GatHeadVars> l1{{v[1], v[2], v[3]}};
                                    const std::vector<GatHeadVars> l2{{v[4], v[5], v[6]}};
                                    return weighted_sum(gat_forward(v[0], l1, l2, v[7], v[8], adj, 0.2));
                                  },
                                  gat_in));

    const std::vector<Matrix> asm_in{random_matrix(rng, b, 8), random_matrix(rng, 2, 4), random_matrix(rng, 2, 4),
                                     random_matrix(rng, 2, 4), random_matrix(rng, 4, 2), random_matrix(rng, 8, 3),
                                     random_matrix(rng, 1, 3), random_matrix(rng, 3, 8), random_matrix(rng, 1, 8)};
    record("adaptor self-attention", gradient_error(
                                         [&](Tape&, const std::vector<Var>& v) {
                                           const AttentionVars w{v[1], v[2], v[3], v[4]};
                                           const AdaptorVars a{v[5], v[6], v[7], v[8], 0.1};
                                           return weighted_sum(asm_forward(v[0], w, a, 4, 2));
                                         },
                                         asm_in));

    const std::vector<Matrix> cam_in{random_matrix(rng, b, 6), random_matrix(rng, b, 6), random_matrix(rng, 3, 6),
                                     random_matrix(rng, 3, 6), random_matrix(rng, 3, 6), random_matrix(rng, 6, 3)};
    record("cross-attention", gradient_error(
                                  [&](Tape&, const std::vector<Var>& v) {
                                    const AttentionVars w{v[2], v[3], v[4], v[5]};
                                    return weighted_sum(cam_forward(v[0], v[1], w, 2, 2));
                                  },
                                  cam_in));

    std::vector<Matrix> fuse_in;
    for (int m = 0; m < kNumModalities; ++m) fuse_in.push_back(random_matrix(rng, b, 4));
    fuse_in.push_back(random_matrix(rng, 4, 3));
    fuse_in.push_back(random_matrix(rng, 1, 3));
    fuse_in.push_back(random_matrix(rng, 1, kNumModalities));
    record("projection and fusion", gradient_error(
                                        [&](Tape&, const std::vector<Var>& v) {
                                          std::vector<Var> modal;
                                          for (std::size_t m = 0; m < kNumModalities; ++m) {
                                            modal.push_back(project_modality(v[m], v[kNumModalities], v[kNumModalities + 1]));
                                          }
                                          return weighted_sum(fuse_joint(modal, v[kNumModalities + 2]));
                                        },
                                        fuse_in));
  }

  Outcome out;
  double overall = 0.0;
  for (const auto& [name, err] : worst) {
    overall = std::max(overall, err);
    if (!(err < 1e-4)) {
      out.pass = false;
      out.detail += name + fmt(" error %.2e; ", err);
    }
  }
  out.detail += fmt("worst relative error %.2e over %zu blocks", overall, worst.size());
  return out;
}

// ---------------------------------------------------------------------------
// 2. MINE

double train_mine(double rho, std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore params;
  add_mine_network(params, "m", 2, 64, rng);
  auto moments = AdamMoments::for_store(params);
  const AdamConfig adam{5e-3, 0.9, 0.999, 1e-8};
  const double c = std::sqrt(1.0 - rho * rho);
  auto sample = [&](Eigen::Index n, Matrix& x, Matrix& y) {
    x.resize(n, 1);
    y.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = standard_normal(rng), b = standard_normal(rng);
      x(i, 0) = a;
      y(i, 0) = rho * a + c * b;
    }
  };
  auto permutation = [&](Eigen::Index n) {
    std::vector<std::size_t> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(p), rng);
    return p;
  };

  Matrix x, y;
  for (long step = 1; step <= 3000; ++step) {
    sample(512, x, y);
    const auto perm = permutation(512);
    Tape tape;
    BoundParameters p(tape, params, true);
    tape.backward(ad::scale(mine_estimate(p, "m", tape.constant(x), tape.constant(y), perm), -1.0));
    adam_step(params, p.gradients(), moments, step, adam);
  }
  double total = 0.0;
  const int rounds = 10;
  for (int r = 0; r < rounds; ++r) {
    sample(20000, x, y);
    const auto perm = permutation(20000);
    Tape tape;
    BoundParameters p(tape, params, false);
    total += mine_estimate(p, "m", tape.constant(x), tape.constant(y), perm).scalar();
  }
  return total / rounds;
}

Outcome check_mine() {
  const double truth = -0.5 * std::log(1.0 - 0.64);
  const double correlated = train_mine(0.8, 202);
  const double independent = train_mine(0.0, 203);
  Outcome out;
  out.pass = std::abs(correlated - truth) <= 0.05 && std::abs(independent) <= 0.05;
  out.detail = fmt("rho 0.8: %.4f nats (closed form %.4f); independent: %.4f nats", correlated, truth, independent);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Contrastive identities

Outcome check_contrastive_identities() {
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<Eigen::Index>(2 + uniform_index(rng, 7));
    const double tau = 0.05 + uniform_unit(rng);
    const Vector a = random_unit_rows(rng, 1, d).row(0).transpose();
    const Vector p = random_unit_rows(rng, 1, d).row(0).transpose();
    worst = std::max(worst, std::abs(contrastive_q(a, p, {}, {}, tau) - 1.0));

    const auto n1 = uniform_index(rng, 8), n2 = uniform_index(rng, 8);
    const std::vector<Vector> neg1(n1, p), neg2(n2, p);
    const double uniform = 1.0 / (1.0 + static_cast<double>(n1 + n2));
    worst = std::max(worst, std::abs(contrastive_q(a, p, neg1, neg2, tau) - uniform));

    Tape t;
    const auto row = [&] { return t.constant(random_unit_rows(rng, 1, d)); };
    worst = std::max(worst, std::abs(contrastive_loss(row(), row(), row(), row(), tau).scalar()));
  }
  return {worst <= 1e-12, fmt("largest deviation %.2e over 300 identities", worst)};
}

// ---------------------------------------------------------------------------
// 4. Alignment-loss identities

Outcome check_align_identities() {
  Rng rng(404);
  double zero_dev = 0.0, min_value = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = static_cast<Eigen::Index>(1 + uniform_index(rng, 8));
    const Matrix s = random_unit_rows(rng, b, 6), g = random_unit_rows(rng, b, 6);
    Tape t;
    zero_dev = std::max(zero_dev, std::abs(align_loss(t.constant(s), t.constant(g), t.constant(s), t.constant(g),
                                                      0.02 + uniform_unit(rng))
                                               .scalar()));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const auto b = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const auto dj = static_cast<Eigen::Index>(1 + uniform_index(rng, 8));
    const auto dm = static_cast<Eigen::Index>(1 + uniform_index(rng, 8));
    Tape t;
    const double l = align_loss(t.constant(random_unit_rows(rng, b, dj)), t.constant(random_unit_rows(rng, b, dj)),
                                t.constant(random_unit_rows(rng, b, dm)), t.constant(random_unit_rows(rng, b, dm)),
                                0.02 + uniform_unit(rng))
                         .scalar();
    min_value = std::min(min_value, l);
  }
  return {zero_dev <= 1e-12 && min_value >= -1e-12,
          fmt("max |loss| with modal == joint %.2e; min over 1000 random instances %.3e", zero_dev, min_value)};
}

// ---------------------------------------------------------------------------
// Shared training helpers

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 8;
  c.encoder.modal_dim = 8;
  c.encoder.segments = 2;
  c.encoder.attention_heads = 2;
  c.encoder.adaptor_bottleneck = 4;
  c.mine_hidden = 8;
  c.eval_every = 0;
  c.rng_seed = 5;
  return c;
}

TrainData small_data() {
  const auto bench = generate_synthetic_pair(40, 4, 6, 8, 0.1, 5);
  return TrainData::build(bench.make_pair(0.3, 5), bench.source_features, bench.target_features);
}

// ---------------------------------------------------------------------------
// 5. Momentum schedule

Outcome check_momentum() {
  Outcome out;
  auto fail = [&](const std::string& why) {
    out.pass = false;
    out.detail += why + "; ";
  };
  const auto data = small_data();
  auto config = small_config();
  config.stage_switch_epoch = 3;
  config.momentum = 0.999;
  Trainer trainer(config, data);
  const auto initial = trainer.state().target;
  for (int e = 0; e < 2; ++e) {
    trainer.train_epoch();
    if (!trainer.state().target.identical(initial)) fail(fmt("target changed before switch (epoch %d)", e));
  }
  trainer.train_epoch();
  if (!trainer.state().target.identical(trainer.state().online)) fail("target differs from online at switch");
  const auto before = trainer.state().target;
  trainer.train_epoch();
  auto expect = before;
  momentum_update(expect, trainer.state().online, config.momentum);
  if (!trainer.state().target.identical(expect)) fail("post-switch update is not the EMA");

  Rng rng(505);
  ParameterStore a, b;
  a.add("w", random_matrix(rng, 3, 4));
  b.add("w", random_matrix(rng, 3, 4));
  auto copy = a;
  momentum_update(copy, b, 0.0);
  if (!copy.identical(b)) fail("kappa 0 does not copy");

  double worst_ratio = 0.0;
  for (double kappa : {0.5, 0.9, 0.999}) {
    auto target = a;
    const Matrix start_gap = a.at("w") - b.at("w");
    double scale = 1.0, prev = start_gap.norm();
    for (int k = 1; k <= 100; ++k) {
      momentum_update(target, b, kappa);
      scale *= kappa;
      const Matrix gap = target.at("w") - b.at("w");
      const double dev = (gap - scale * start_gap).cwiseAbs().maxCoeff();
      if (dev > 1e-12) fail(fmt("kappa %.3f step %d off by %.2e", kappa, k, dev));
      if (prev > 1e-6 * start_gap.norm()) worst_ratio = std::max(worst_ratio, std::abs(gap.norm() / prev - kappa));
      prev = gap.norm();
    }
  }
  out.detail += fmt("frozen, copied, EMA; per-step rate error %.2e", worst_ratio);
  if (worst_ratio > 1e-9) out.pass = false;
  return out;
}

// ---------------------------------------------------------------------------
// 6. Calibration

Outcome check_calibration() {
  std::size_t failures = 0, promotions = 0;
  Rng rng(606);
  for (int run = 0; run < 500; ++run) {
    const auto n_src = 2 + uniform_index(rng, 10);
    const auto n_tgt = 2 + uniform_index(rng, 8);
    SeedAlignmentSet seeds;
    seeds.pairs = {{0, 0}};
    PseudoLabelStore store;
    testing::CalibrationModel model;
    std::map<EntityIndex, EntityIndex> previous;
    for (int epoch = 0; epoch < 30; epoch += 2) {
      PredictionMap preds;
      for (EntityIndex s = 1; s < n_src; ++s) {
        if (store.source_promoted(s) || uniform_unit(rng) < 0.2) continue;
        preds[s] = {static_cast<EntityIndex>(1 + uniform_index(rng, n_tgt - 1)),
                    static_cast<double>(uniform_index(rng, 4)) / 4.0};
      }
      const auto fresh = calibrate_pseudo_labels(store, preds, epoch);
      std::set<std::pair<EntityIndex, EntityIndex>> got;
      for (const auto& p : fresh) {
        got.insert({p.pair.source, p.pair.target});
        const auto it = previous.find(p.pair.source);
        if (it == previous.end() || it->second != p.pair.target) ++failures;
      }
      if (got != model.step(preds)) ++failures;
      try {
        store.validate(seeds);
      } catch (const Error&) {
        ++failures;
      }
      promotions += fresh.size();
      for (const auto& [s, p] : preds) previous[s] = p.target;
      for (const auto& p : store.promoted) previous.erase(p.pair.source);
    }
  }

  enum class Prev { Absent, Same, Other };
  std::size_t configs = 0;
  const EntityIndex target = 9;
  for (auto p0 : {Prev::Absent, Prev::Same, Prev::Other}) {
    for (auto p1 : {Prev::Absent, Prev::Same, Prev::Other}) {
      for (double sb : {0.3, 0.5, 0.7}) {
        for (bool swap_order : {false, true}) {
          ++configs;
          const EntityIndex a = swap_order ? 4 : 2, b = swap_order ? 2 : 4;
          const double sa = 0.5;
          PseudoLabelStore store;
          auto seed_prev = [&](EntityIndex s, Prev p) {
            if (p == Prev::Same) store.dictionary[s] = {target, 0, 0.1};
            if (p == Prev::Other) store.dictionary[s] = {target + 1, 0, 0.1};
          };
          seed_prev(a, p0);
          seed_prev(b, p1);
          const auto fresh = calibrate_pseudo_labels(store, {{a, {target, sa}}, {b, {target, sb}}}, 2);
          const bool stable_a = p0 == Prev::Same, stable_b = p1 == Prev::Same;
          std::optional<EntityIndex> winner;
          if (stable_a && stable_b) {
            winner = sa > sb ? a : sb > sa ? b : std::min(a, b);
          } else if (stable_a) {
            winner = a;
          } else if (stable_b) {
            winner = b;
          }
          const bool ok = winner ? (fresh.size() == 1 && fresh[0].pair == SeedPair{*winner, target})
                                 : fresh.empty();
          if (!ok) ++failures;
        }
      }
    }
  }
  return {failures == 0, fmt("%zu mismatches; %zu promotions over 500 random sequences; %zu conflict configurations",
                             failures, promotions, configs)};
}

// ---------------------------------------------------------------------------
// 7. Metrics

Outcome check_metrics() {
  Rng rng(707);
  const std::vector<int> ks{1, 5, 10, 50};
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityMatrix sim;
    sim.values.resize(50, 50);
    const bool coarse = trial % 2 == 0;
    for (Eigen::Index i = 0; i < sim.values.size(); ++i) {
      sim.values.data()[i] = coarse ? static_cast<double>(uniform_index(rng, 5)) : standard_normal(rng);
    }
    sim.rows.resize(50);
    std::iota(sim.rows.begin(), sim.rows.end(), EntityIndex{0});
    sim.cols = sim.rows;
    std::vector<EntityIndex> perm = sim.rows;
    shuffle(std::span<EntityIndex>(perm), rng);
    SeedAlignmentSet gold;
    for (EntityIndex i = 0; i < 50; ++i) gold.pairs.push_back({i, perm[i]});
    const auto got = rank_metrics(sim, gold, ks);
    const auto expect = testing::sort_oracle(sim.values, perm, ks);
    if (got.hits != expect.hits || got.mrr != expect.mrr) ++mismatches;
  }
  SimilarityMatrix perfect{Matrix::Identity(50, 50), {}, {}};
  SeedAlignmentSet gold;
  for (EntityIndex i = 0; i < 50; ++i) {
    perfect.rows.push_back(i);
    gold.pairs.push_back({i, i});
  }
  perfect.cols = perfect.rows;
  const auto r = rank_metrics(perfect, gold, ks);
  const bool perfect_ok = r.mrr == 1.0 && std::all_of(r.hits.begin(), r.hits.end(), [](double h) { return h == 1.0; });
  return {mismatches == 0 && perfect_ok,
          fmt("%zu of 100 matrices differ from the sort oracle; perfect alignment %s", mismatches,
              perfect_ok ? "scores 1" : "does not score 1")};
}

// ---------------------------------------------------------------------------
// 8-10. End-to-end runs on the 200-entity synthetic benchmark

struct RunResult {
  double hits1 = 0.0;
  double mrr = 0.0;
  std::string history;
  double seconds = 0.0;
};

class Benchmarks {
 public:
  explicit Benchmarks(int epochs) : epochs_(epochs) {}

  const RunResult& run(double noise, std::uint64_t seed, const std::string& variant = "") {
    const auto key = fmt("%.2f/%llu/%s", noise, static_cast<unsigned long long>(seed), variant.c_str());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    return cache_[key] = train(noise, seed, variant);
  }

  RunResult train(double noise, std::uint64_t seed, const std::string& variant) const {
    const auto start = std::chrono::steady_clock::now();
    testing::TempDir dir;
    write_dataset(generate_synthetic_pair(200, 12, 16, 32, noise, seed), dir / "data");
    std::string text = fmt("epochs = %d\neval_every = 0\nrng_seed = %llu\n", epochs_,
                           static_cast<unsigned long long>(seed));
    if (!variant.empty()) text += variant + "\n";
    const auto config = parse_config(text);
    const auto data = load_dataset(dir / "data", config);
    Trainer trainer(config, data);
    for (int e = 0; e < config.epochs; ++e) trainer.train_epoch();
    const auto report = trainer.evaluate();
    RunResult r;
    r.hits1 = report.hits_at(1);
    r.mrr = report.mrr;
    for (const auto& rec : trainer.state().history) r.history += rec.to_json() + "\n";
    r.history += report.to_json();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

  int epochs() const { return epochs_; }

 private:
  int epochs_;
  std::map<std::string, RunResult> cache_;
};

Outcome check_learnability(Benchmarks& bench) {
  const auto& clean = bench.run(0.0, 1);
  const auto& noisy = bench.run(0.2, 1);
  return {clean.hits1 >= 0.9 && noisy.hits1 >= 0.6 && clean.seconds < 600 && noisy.seconds < 600,
          fmt("noise 0: Hits@1 %.3f (%.0f s); noise 0.2: Hits@1 %.3f (%.0f s); %d epochs", clean.hits1,
              clean.seconds, noisy.hits1, noisy.seconds, bench.epochs())};
}

Outcome check_ablation(Benchmarks& bench) {
  const std::vector<std::pair<std::string, std::string>> variants{{"full", ""},
                                                                  {"no CL", "use_contrastive_loss = false"},
                                                                  {"no AL", "use_align_loss = false"},
                                                                  {"no MI", "use_mi_loss = false"},
                                                                  {"no PL", "use_pseudo_labels = false"}};
  std::map<std::string, double> mean;
  for (const auto& [name, setting] : variants) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) mean[name] += bench.run(0.2, seed, setting).hits1 / 5.0;
  }
  const double drop_cl = mean["full"] - mean["no CL"];
  const double drop_al = mean["full"] - mean["no AL"];
  const double drop_mi = mean["full"] - mean["no MI"];
  const double drop_pl = mean["full"] - mean["no PL"];
  Outcome out;
  out.pass = drop_cl > drop_al && drop_cl > drop_mi && drop_pl > 0.0;
  out.detail = fmt("mean Hits@1 over 5 seeds: full %.3f, no CL %.3f, no AL %.3f, no MI %.3f, no PL %.3f",
                   mean["full"], mean["no CL"], mean["no AL"], mean["no MI"], mean["no PL"]);
  return out;
}

Outcome check_determinism(Benchmarks& bench) {
  const auto& first = bench.run(0.2, 1);
  const auto second = bench.train(0.2, 1, "");
  const bool same = first.history == second.history;
  return {same, fmt("two runs (seed 1, noise 0.2) %s; Hits@1 %.3f vs %.3f", same ? "identical" : "differ",
                    first.hits1, second.hits1)};
}

}  // namespace
}  // namespace pcmea

int main(int argc, char** argv) {
  using namespace pcmea;
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  int epochs = 300;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--epochs", epochs, "Epochs for the end-to-end runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Benchmarks bench(epochs);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", check_gradients},
      {"MINE oracle", check_mine},
      {"contrastive identities", check_contrastive_identities},
      {"alignment-loss identities", check_align_identities},
      {"momentum schedule", check_momentum},
      {"pseudo-label calibration", check_calibration},
      {"metric oracle", check_metrics},
      {"end-to-end learnability", [&] { return check_learnability(bench); }},
      {"ablation direction", [&] { return check_ablation(bench); }},
      {"determinism", [&] { return check_determinism(bench); }},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << criteria[i].first << ": "
              << out.detail << " [" << pcmea::fmt("%.1f", secs) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
