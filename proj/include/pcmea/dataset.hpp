#pragma once

#include <filesystem>

#include "pcmea/config.hpp"
#include "pcmea/synthetic.hpp"
#include "pcmea/trainer.hpp"

namespace pcmea {

/// Writes a benchmark as a dataset directory:
///   source/{entities.txt, rel_triples.tsv, attr_triples.tsv, text_rel.feat, text_attr.feat, visual.feat}
///   target/... (same files)
///   seeds.tsv   the full ground-truth alignment
void write_dataset(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

/// Loads a dataset directory. Seeds come from train_seeds.tsv + test_seeds.tsv
/// when both exist, otherwise seeds.tsv is split with config.train_fraction and
/// config.rng_seed. BOW features are rebuilt with the configured vocabulary
/// sizes. Missing text feature files fall back to the stub encoder
/// (config.text_dim wide); missing visual rows are mean-imputed and a missing
/// visual file yields zero vectors flagged absent.
TrainData load_dataset(const std::filesystem::path& dir, const TrainConfig& config);

}  // namespace pcmea
