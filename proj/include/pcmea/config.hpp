#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pcmea/encoders.hpp"

namespace pcmea {

inline constexpr int kConfigVersion = 1;

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;

  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double temperature = 0.1;
  double momentum = 0.999;
  int momentum_span = 1;
  int stage_switch_epoch = 500;
  int calibration_window = 2;

  double train_fraction = 0.2;
  int reorder_start = 0;
  int reorder_stop = 50;
  std::uint64_t rng_seed = 0;

  EncoderConfig encoder;
  Eigen::Index mine_hidden = 64;
  bool mine_bias_correction = false;
  double mine_ema_rate = 0.01;

  std::size_t bow_rel_size = 1000;
  std::size_t bow_attr_size = 1000;
  /// Width of stub text features when a dataset ships none.
  std::size_t text_dim = 64;

  bool use_align_loss = true;
  bool use_mi_loss = true;
  bool use_contrastive_loss = true;
  bool use_pseudo_labels = true;
  bool use_reorder = true;
  bool pseudo_labels_contrastive_only = false;
  int pseudo_label_start = 0;
  bool ensemble_agreement = false;

  bool eval_all_targets = false;
  bool eval_bidirectional = false;
  /// Evaluate into the history every N epochs (0 disables).
  int eval_every = 10;
  /// Extra numbered checkpoints every N epochs (0 disables).
  int checkpoint_every = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key in a fixed order.
std::string format_config(const TrainConfig& config);
void write_config(const TrainConfig& config, const std::filesystem::path& path);

/// Hash of the settings that shape the model and its trajectory. Run-length
/// and reporting keys (epochs, eval_every, checkpoint_every) are excluded so a
/// run can be resumed with a longer schedule.
std::uint64_t config_hash(const TrainConfig& config);

}  // namespace pcmea
