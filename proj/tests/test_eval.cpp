#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "pcmea/error.hpp"
#include "pcmea/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace pcmea {
namespace {

using testing::random_unit_rows;
using testing::sort_oracle;
using testing::read_text;
using testing::TempDir;
using testing::write_text;

SeedAlignmentSet identity_gold(std::size_t n) {
  SeedAlignmentSet g;
  g.role = SeedRole::Test;
  for (EntityIndex i = 0; i < n; ++i) g.pairs.push_back({i, i});
  return g;
}

std::vector<EntityIndex> iota_ids(std::size_t n) {
  std::vector<EntityIndex> v(n);
  std::iota(v.begin(), v.end(), EntityIndex{0});
  return v;
}

TEST(RankMetrics, EqualsSortOracleOnRandomMatrices) {
  Rng rng(1);
  const std::vector<int> ks{1, 3, 5, 10, 50};
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityMatrix sim;
    sim.values.resize(50, 50);
    // Half the matrices use coarse integer scores so ties are frequent.
    const bool coarse = trial % 2 == 0;
    for (Eigen::Index i = 0; i < sim.values.size(); ++i) {
      sim.values.data()[i] = coarse ? static_cast<double>(uniform_index(rng, 5)) : standard_normal(rng);
    }
    sim.rows = iota_ids(50);
    sim.cols = iota_ids(50);
    std::vector<EntityIndex> perm = iota_ids(50);
    shuffle(std::span<EntityIndex>(perm), rng);
    SeedAlignmentSet gold;
    for (EntityIndex i = 0; i < 50; ++i) gold.pairs.push_back({i, perm[i]});

    const auto got = rank_metrics(sim, gold, ks);
    const auto expect = sort_oracle(sim.values, perm, ks);
    EXPECT_EQ(got.hits, expect.hits) << "trial " << trial;
    EXPECT_EQ(got.mrr, expect.mrr) << "trial " << trial;
    EXPECT_EQ(got.n_queries, 50u);
  }
}

TEST(RankMetrics, PerfectAlignmentScoresOne) {
  SimilarityMatrix sim{Matrix::Identity(7, 7), iota_ids(7), iota_ids(7)};
  const auto r = rank_metrics(sim, identity_gold(7));
  for (double h : r.hits) EXPECT_EQ(h, 1.0);
  EXPECT_EQ(r.mrr, 1.0);
}

TEST(RankMetrics, TiesArePessimistic) {
  SimilarityMatrix sim{Matrix::Constant(1, 4, 0.5), {0}, iota_ids(4)};
  SeedAlignmentSet gold;
  gold.pairs = {{0, 0}};
  const std::vector<int> ks{1, 4};
  const auto r = rank_metrics(sim, gold, ks);
  EXPECT_EQ(r.hits[0], 0.0);
  EXPECT_EQ(r.hits[1], 1.0);
  EXPECT_DOUBLE_EQ(r.mrr, 0.25);
}

TEST(RankMetrics, GoldRankedSecond) {
  Matrix m(1, 3);
  m << 0.1, 0.9, 0.5;
  SimilarityMatrix sim{m, {0}, iota_ids(3)};
  SeedAlignmentSet gold;
  gold.pairs = {{0, 2}};
  const auto r = rank_metrics(sim, gold);
  EXPECT_EQ(r.hits_at(1), 0.0);
  EXPECT_EQ(r.hits_at(5), 1.0);
  EXPECT_DOUBLE_EQ(r.mrr, 0.5);
  EXPECT_THROW(r.hits_at(2), ArgumentError);
}

TEST(RankMetrics, UnknownGoldEntityIsArgumentError) {
  SimilarityMatrix sim{Matrix::Identity(2, 2), iota_ids(2), iota_ids(2)};
  SeedAlignmentSet gold;
  gold.pairs = {{0, 5}};
  EXPECT_THROW(rank_metrics(sim, gold), ArgumentError);
  gold.pairs = {{5, 0}};
  EXPECT_THROW(rank_metrics(sim, gold), ArgumentError);
}

TEST(RankMetrics, MonotoneLadderAndMrrBound) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + uniform_index(rng, 30);
    const Matrix s = random_unit_rows(rng, static_cast<Eigen::Index>(n), 3);
    const Matrix t = random_unit_rows(rng, static_cast<Eigen::Index>(n), 3);
    const auto ids = iota_ids(n);
    const auto sim = similarity_matrix(s, t, ids, ids);
    std::vector<int> ks{1, 2, 5, 10};
    const auto r = rank_metrics(sim, identity_gold(n), ks);
    double bound = 0.0, prev = 0.0;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (k > 0) EXPECT_GE(r.hits[k], r.hits[k - 1]);
      bound += (r.hits[k] - prev) / ks[k];
      prev = r.hits[k];
    }
    EXPECT_GE(r.mrr + 1e-12, bound);
    EXPECT_GE(r.mrr, 0.0);
    EXPECT_LE(r.mrr, 1.0);
  }
}

TEST(SimilarityMatrix, SwapInputsTransposes) {
  Rng rng(3);
  const Matrix a = random_unit_rows(rng, 6, 4), b = random_unit_rows(rng, 5, 4);
  const std::vector<EntityIndex> rows{0, 2, 5}, cols{1, 4};
  const auto ab = similarity_matrix(a, b, rows, cols);
  const auto ba = similarity_matrix(b, a, cols, rows);
  EXPECT_TRUE(ab.values.transpose() == ba.values);
  const auto tr = transposed(ab);
  EXPECT_EQ(tr.rows, ab.cols);
  EXPECT_TRUE(tr.values == ba.values);
  EXPECT_THROW(similarity_matrix(a, b, std::vector<EntityIndex>{9}, cols), ArgumentError);
}

TEST(EvaluateAlignment, BidirectionalAveragesBothSides) {
  Rng rng(4);
  const Matrix s = random_unit_rows(rng, 10, 3), t = random_unit_rows(rng, 10, 3);
  SeedAlignmentSet test;
  for (EntityIndex i = 0; i < 10; i += 2) test.pairs.push_back({i, 9 - i});
  const auto fwd = evaluate_alignment(s, t, test, true, false);
  const auto both = evaluate_alignment(s, t, test, true, true);
  std::vector<EntityIndex> rows, all = iota_ids(10);
  for (const auto& p : test.pairs) rows.push_back(p.target);
  const auto rev = rank_metrics(similarity_matrix(t, s, rows, all), swapped(test));
  EXPECT_DOUBLE_EQ(both.mrr, 0.5 * (fwd.mrr + rev.mrr));
  EXPECT_EQ(both.direction, EvalDirection::Mean);
  const auto restricted = evaluate_alignment(s, t, test, false, false);
  EXPECT_GE(restricted.mrr, fwd.mrr);
}

TEST(EvalReport, JsonAndTable) {
  EvalReport r;
  r.ks = {1, 10};
  r.hits = {0.5, 0.75};
  r.mrr = 0.6;
  r.n_queries = 4;
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["hits@1"].get<double>(), 0.5);
  EXPECT_EQ(j["mrr"].get<double>(), 0.6);
  EXPECT_EQ(j["n_queries"].get<int>(), 4);
  EXPECT_NE(r.to_table().find("Hits@10"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(ExportAlignments, TopOneRowsWithSixDecimals) {
  KnowledgeGraph src, tgt;
  src.entities = {"a", "b"};
  tgt.entities = {"x", "y", "z"};
  Matrix m(2, 3);
  m << 0.1, 0.7, 0.2, 0.3, -0.1, 0.2;
  SimilarityMatrix sim{m, {0, 1}, {0, 1, 2}};
  TempDir dir;
  export_alignments(sim, src, tgt, dir / "out.tsv");
  EXPECT_EQ(read_text(dir / "out.tsv"), "a\ty\t0.700000\nb\tx\t0.300000\n");
  export_alignments(sim, src, tgt, dir / "thr.tsv", 0.5);
  EXPECT_EQ(read_text(dir / "thr.tsv"), "a\ty\t0.700000\n");
}

TEST(ExportAlignments, EmptyTestSetWritesEmptyFile) {
  KnowledgeGraph src, tgt;
  SimilarityMatrix sim{Matrix(0, 0), {}, {}};
  TempDir dir;
  export_alignments(sim, src, tgt, dir / "out.tsv");
  EXPECT_EQ(read_text(dir / "out.tsv"), "");
}

TEST(PlotData, EmitsRequestedColumn) {
  TempDir dir;
  write_text(dir / "h.jsonl",
             "{\"epoch\":0,\"total\":3.5}\n{\"epoch\":1,\"total\":2.25,\"hits1\":0.5,\"mrr\":0.625}\n");
  emit_plot_data(dir / "h.jsonl", PlotQuantity::Hits1VsEpoch, dir / "h.csv");
  EXPECT_EQ(read_text(dir / "h.csv"), "epoch,hits1\n1,0.5\n");
  emit_plot_data(dir / "h.jsonl", parse_plot_quantity("loss_vs_epoch"), dir / "l.csv");
  EXPECT_EQ(read_text(dir / "l.csv"), "epoch,loss\n0,3.5\n1,2.25\n");
  emit_plot_data(dir / "h.jsonl", parse_plot_quantity("mrr_vs_epoch"), dir / "m.csv");
  EXPECT_EQ(read_text(dir / "m.csv"), "epoch,mrr\n1,0.625\n");
}

TEST(PlotData, UnknownQuantityAndBadJson) {
  EXPECT_THROW(parse_plot_quantity("accuracy"), ArgumentError);
  TempDir dir;
  write_text(dir / "bad.jsonl", "{\"epoch\":0}\nnot json\n");
  try {
    emit_plot_data(dir / "bad.jsonl", PlotQuantity::LossVsEpoch, dir / "o.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace pcmea
