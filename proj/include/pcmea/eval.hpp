#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcmea/kg.hpp"
#include "pcmea/matrix.hpp"

namespace pcmea {

/// Cosine scores of `rows` (source entities) against `cols` (target entities).
struct SimilarityMatrix {
  Matrix values;
  std::vector<EntityIndex> rows;
  std::vector<EntityIndex> cols;
};

enum class EvalDirection : std::uint8_t { SourceToTarget, TargetToSource, Mean };

struct EvalReport {
  std::vector<int> ks;
  std::vector<double> hits;
  double mrr = 0.0;
  std::size_t n_queries = 0;
  EvalDirection direction = EvalDirection::SourceToTarget;

  /// Throws ArgumentError if k was not evaluated.
  double hits_at(int k) const;
  std::string to_json() const;
  /// Two-line aligned table.
  std::string to_table() const;
};

inline const std::vector<int> kDefaultKs = {1, 5, 10};

/// Dot products of the selected rows; inputs are expected to be unit-norm.
SimilarityMatrix similarity_matrix(const Matrix& source_emb, const Matrix& target_emb,
                                   std::span<const EntityIndex> rows, std::span<const EntityIndex> cols);

/// Rank of each gold target among its row, counting every other column with
/// a score >= the gold score ahead of it.
EvalReport rank_metrics(const SimilarityMatrix& sim, const SeedAlignmentSet& gold,
                        std::span<const int> ks = kDefaultKs);

/// Same matrix seen from the target side.
SimilarityMatrix transposed(const SimilarityMatrix& sim);
SeedAlignmentSet swapped(const SeedAlignmentSet& gold);

/// Averages two reports over the same ks.
EvalReport mean_report(const EvalReport& a, const EvalReport& b);

/// Embeddings-to-report in one call. Candidates are the test targets, or every
/// target when `all_targets` is set.
EvalReport evaluate_alignment(const Matrix& source_emb, const Matrix& target_emb, const SeedAlignmentSet& test,
                              bool all_targets, bool bidirectional);

/// Writes `source<TAB>target<TAB>score` for the top-1 column of every row,
/// in row order, scores with 6 decimals. Rows whose best score is below
/// `threshold` are skipped.
void export_alignments(const SimilarityMatrix& sim, const KnowledgeGraph& source, const KnowledgeGraph& target,
                       const std::filesystem::path& path, double threshold = -2.0);

enum class PlotQuantity : std::uint8_t { Hits1VsEpoch, MrrVsEpoch, LossVsEpoch };

/// Throws ArgumentError for an unknown name.
PlotQuantity parse_plot_quantity(const std::string& name);

/// Two-column CSV (epoch, value) from a history file. Epochs without the
/// requested value are skipped.
void emit_plot_data(const std::filesystem::path& history_path, PlotQuantity quantity,
                    const std::filesystem::path& out_path);

}  // namespace pcmea
