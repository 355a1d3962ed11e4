#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcmea/config.hpp"
#include "pcmea/encoders.hpp"
#include "pcmea/eval.hpp"
#include "pcmea/losses.hpp"
#include "pcmea/optimizer.hpp"
#include "pcmea/pseudo_labels.hpp"
#include "pcmea/random.hpp"

namespace pcmea {

/// Graph pair, raw features and adjacency of everything the trainer reads.
struct TrainData {
  MMKGPair pair;
  ModalFeatureBundle source_features;
  ModalFeatureBundle target_features;
  Adjacency source_adj;
  Adjacency target_adj;

  static TrainData build(MMKGPair pair, ModalFeatureBundle source_features, ModalFeatureBundle target_features);
  const ModalFeatureBundle& features(GraphSide side) const {
    return side == GraphSide::Source ? source_features : target_features;
  }
  const Adjacency& adjacency(GraphSide side) const { return side == GraphSide::Source ? source_adj : target_adj; }
};

enum class Stage : std::uint8_t { OnlineOnly, Momentum };

struct EpochRecord {
  int epoch = 0;
  Stage stage = Stage::OnlineOnly;
  LossBreakdown loss;
  std::size_t batches = 0;
  std::size_t promoted = 0;
  std::size_t dictionary = 0;
  std::optional<EvalReport> eval;

  std::string to_json() const;
  static EpochRecord from_json(const std::string& line);
  friend bool operator==(const EpochRecord& a, const EpochRecord& b) { return a.to_json() == b.to_json(); }
};

struct TrainState {
  /// Number of completed epochs, i.e. the index of the next epoch to run.
  int epoch = 0;
  Stage stage = Stage::OnlineOnly;
  ParameterStore online{StoreRole::Online};
  ParameterStore target{StoreRole::Target};
  ParameterStore mine{StoreRole::Auxiliary};
  AdamMoments adam_online;
  AdamMoments adam_mine;
  long adam_step = 0;
  PseudoLabelStore pseudo;
  std::vector<EpochRecord> history;
  /// Textual engine state of the trainer RNG.
  std::string rng_state;
  std::array<double, kMiModalities.size()> mine_ema{};
  bool mine_ema_ready = false;
};

/// Groups aligned pairs into batches of mutually similar pairs. Each batch
/// starts from the lowest-index remaining pair and takes the `batch_size - 1`
/// remaining pairs whose normalized pair-mean joint embeddings are most
/// cosine-similar to it (lower index on ties). Returns indices into `pairs`.
std::vector<std::vector<std::size_t>> reorder_labeled(std::span<const SeedPair> pairs, const Matrix& source_joint,
                                                      const Matrix& target_joint, std::size_t batch_size);

/// Consecutive chunks of `order`.
std::vector<std::vector<std::size_t>> chunk_batches(std::span<const std::size_t> order, std::size_t batch_size);

class Trainer {
 public:
  /// Fresh run: parameters are initialized from config.rng_seed.
  Trainer(TrainConfig config, const TrainData& data);
  /// Continues from a saved state.
  Trainer(TrainConfig config, const TrainData& data, TrainState state);

  /// Runs epoch `state().epoch` and returns its record.
  const EpochRecord& train_epoch();

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  const Encoder& encoder() const { return encoder_; }

  /// Value-only embeddings from the online (or target) store.
  EmbeddingSet embed(GraphSide side, bool use_target = false) const;
  EvalReport evaluate() const;

  /// Positives of the next epoch: train seeds followed by promoted pairs.
  std::vector<SeedPair> positives() const;

 private:
  struct BatchResult {
    LossBreakdown parts;
    ParameterStore online_grads;
    ParameterStore mine_grads;
  };

  void init_fresh();
  BatchResult run_batch(std::span<const SeedPair> pairs, std::span<const bool> pseudo,
                        const std::optional<std::array<EmbeddingSet, 2>>& momentum);
  void calibrate(int epoch, const std::array<EmbeddingSet, 2>& online);
  const std::array<EmbeddingSet, 2>& online_embeddings();

  TrainConfig config_;
  const TrainData* data_;
  Encoder encoder_;
  TrainState state_;
  Rng rng_;
  std::optional<std::array<EmbeddingSet, 2>> cached_online_;
};

/// Output files of a run directory.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path checkpoint() const { return dir / "checkpoint.bin"; }
  std::filesystem::path checkpoint_at(int epoch) const {
    return dir / ("checkpoint_epoch_" + std::to_string(epoch) + ".bin");
  }
  std::filesystem::path history() const { return dir / "history.jsonl"; }
  std::filesystem::path config() const { return dir / "config.txt"; }
};

/// Trains until config.epochs completed epochs, writing the history file, the
/// final checkpoint and periodic checkpoints into `out_dir`. With `resume`
/// set, continues from that state.
TrainState run_training(const TrainConfig& config, const TrainData& data, const std::filesystem::path& out_dir,
                        std::optional<TrainState> resume = std::nullopt);

void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path);
std::vector<EpochRecord> read_history(const std::filesystem::path& path);

}  // namespace pcmea
