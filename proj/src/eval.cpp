#include "pcmea/eval.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pcmea/error.hpp"
#include "text_io.hpp"

namespace pcmea {

double EvalReport::hits_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return hits[i];
  }
  throw ArgumentError("hits@" + std::to_string(k) + " was not evaluated");
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  for (std::size_t i = 0; i < ks.size(); ++i) j["hits@" + std::to_string(ks[i])] = hits[i];
  j["mrr"] = mrr;
  j["n_queries"] = n_queries;
  j["direction"] = direction == EvalDirection::SourceToTarget   ? "src->tgt"
                   : direction == EvalDirection::TargetToSource ? "tgt->src"
                                                                : "mean";
  return j.dump();
}

std::string EvalReport::to_table() const {
  std::ostringstream head, row;
  char buf[32];
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%10s", ("Hits@" + std::to_string(ks[i])).c_str());
    head << buf;
    std::snprintf(buf, sizeof buf, "%10.4f", hits[i]);
    row << buf;
  }
  std::snprintf(buf, sizeof buf, "%10s%10s", "MRR", "queries");
  head << buf;
  std::snprintf(buf, sizeof buf, "%10.4f%10zu", mrr, n_queries);
  row << buf;
  return head.str() + "\n" + row.str() + "\n";
}

SimilarityMatrix similarity_matrix(const Matrix& source_emb, const Matrix& target_emb,
                                   std::span<const EntityIndex> rows, std::span<const EntityIndex> cols) {
  if (source_emb.cols() != target_emb.cols()) throw FormatError("embedding dims differ");
  SimilarityMatrix sim;
  sim.rows.assign(rows.begin(), rows.end());
  sim.cols.assign(cols.begin(), cols.end());
  Matrix a(static_cast<Eigen::Index>(rows.size()), source_emb.cols());
  Matrix b(static_cast<Eigen::Index>(cols.size()), target_emb.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= source_emb.rows()) throw ArgumentError("row entity out of range");
    a.row(static_cast<Eigen::Index>(i)) = source_emb.row(rows[i]);
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= target_emb.rows()) throw ArgumentError("column entity out of range");
    b.row(static_cast<Eigen::Index>(i)) = target_emb.row(cols[i]);
  }
  sim.values = a * b.transpose();
  return sim;
}

EvalReport rank_metrics(const SimilarityMatrix& sim, const SeedAlignmentSet& gold, std::span<const int> ks) {
  std::map<EntityIndex, Eigen::Index> row_of, col_of;
  for (std::size_t i = 0; i < sim.rows.size(); ++i) row_of[sim.rows[i]] = static_cast<Eigen::Index>(i);
  for (std::size_t i = 0; i < sim.cols.size(); ++i) col_of[sim.cols[i]] = static_cast<Eigen::Index>(i);

  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.hits.assign(ks.size(), 0.0);
  for (const auto& p : gold.pairs) {
    const auto r = row_of.find(p.source);
    if (r == row_of.end()) throw ArgumentError("gold source " + std::to_string(p.source) + " is not a row");
    const auto c = col_of.find(p.target);
    if (c == col_of.end()) throw ArgumentError("gold target " + std::to_string(p.target) + " is not a column");
    const auto row = sim.values.row(r->second);
    const double g = row(c->second);
    std::size_t rank = 1;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (j != c->second && row(j) >= g) ++rank;
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (rank <= static_cast<std::size_t>(ks[k])) report.hits[k] += 1.0;
    }
    report.mrr += 1.0 / static_cast<double>(rank);
  }
  report.n_queries = gold.pairs.size();
  if (report.n_queries > 0) {
    const double n = static_cast<double>(report.n_queries);
    for (auto& h : report.hits) h /= n;
    report.mrr /= n;
  }
  return report;
}

SimilarityMatrix transposed(const SimilarityMatrix& sim) {
  return {sim.values.transpose(), sim.cols, sim.rows};
}

SeedAlignmentSet swapped(const SeedAlignmentSet& gold) {
  SeedAlignmentSet out;
  out.role = gold.role;
  for (const auto& p : gold.pairs) out.pairs.push_back({p.target, p.source});
  return out;
}

EvalReport mean_report(const EvalReport& a, const EvalReport& b) {
  if (a.ks != b.ks) throw ArgumentError("reports cover different ks");
  EvalReport out = a;
  for (std::size_t i = 0; i < out.hits.size(); ++i) out.hits[i] = 0.5 * (a.hits[i] + b.hits[i]);
  out.mrr = 0.5 * (a.mrr + b.mrr);
  out.direction = EvalDirection::Mean;
  return out;
}

EvalReport evaluate_alignment(const Matrix& source_emb, const Matrix& target_emb, const SeedAlignmentSet& test,
                              bool all_targets, bool bidirectional) {
  std::vector<EntityIndex> rows, cols;
  for (const auto& p : test.pairs) rows.push_back(p.source);
  if (all_targets) {
    for (Eigen::Index t = 0; t < target_emb.rows(); ++t) cols.push_back(static_cast<EntityIndex>(t));
  } else {
    for (const auto& p : test.pairs) cols.push_back(p.target);
  }
  const auto sim = similarity_matrix(source_emb, target_emb, rows, cols);
  auto forward = rank_metrics(sim, test);
  if (!bidirectional) return forward;
  // The reverse direction ranks over the same candidate pool on the source side.
  std::vector<EntityIndex> rev_cols;
  if (all_targets) {
    for (Eigen::Index s = 0; s < source_emb.rows(); ++s) rev_cols.push_back(static_cast<EntityIndex>(s));
  } else {
    rev_cols = rows;
  }
  std::vector<EntityIndex> rev_rows;
  for (const auto& p : test.pairs) rev_rows.push_back(p.target);
  const auto rev = similarity_matrix(target_emb, source_emb, rev_rows, rev_cols);
  auto backward = rank_metrics(rev, swapped(test));
  backward.direction = EvalDirection::TargetToSource;
  return mean_report(forward, backward);
}

void export_alignments(const SimilarityMatrix& sim, const KnowledgeGraph& source, const KnowledgeGraph& target,
                       const std::filesystem::path& path, double threshold) {
  auto out = detail::open_output(path);
  char buf[64];
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i) {
    if (sim.values.cols() == 0) break;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < sim.values.cols(); ++j) {
      if (sim.values(i, j) > sim.values(i, best)) best = j;
    }
    const double score = sim.values(i, best);
    if (score < threshold) continue;
    std::snprintf(buf, sizeof buf, "%.6f", score);
    out << source.entities.at(sim.rows[static_cast<std::size_t>(i)]) << '\t'
        << target.entities.at(sim.cols[static_cast<std::size_t>(best)]) << '\t' << buf << '\n';
  }
  detail::finish_output(out, path);
}

PlotQuantity parse_plot_quantity(const std::string& name) {
  if (name == "hits1_vs_epoch") return PlotQuantity::Hits1VsEpoch;
  if (name == "mrr_vs_epoch") return PlotQuantity::MrrVsEpoch;
  if (name == "loss_vs_epoch") return PlotQuantity::LossVsEpoch;
  throw ArgumentError("unknown plot quantity '" + name + "'");
}

void emit_plot_data(const std::filesystem::path& history_path, PlotQuantity quantity,
                    const std::filesystem::path& out_path) {
  const char* key = quantity == PlotQuantity::Hits1VsEpoch ? "hits1"
                    : quantity == PlotQuantity::MrrVsEpoch ? "mrr"
                                                           : "total";
  auto in = detail::open_input(history_path);
  auto out = detail::open_output(out_path);
  out << "epoch," << (quantity == PlotQuantity::LossVsEpoch ? "loss" : key) << '\n';
  std::string line;
  std::size_t line_no = 0;
  char buf[64];
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(history_path.string(), line_no, e.what());
    }
    if (!j.contains(key) || !j.contains("epoch")) continue;
    std::snprintf(buf, sizeof buf, "%.17g", j[key].get<double>());
    out << j["epoch"].get<long>() << ',' << buf << '\n';
  }
  detail::finish_output(out, out_path);
}

}  // namespace pcmea
