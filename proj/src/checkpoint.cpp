#include "pcmea/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "pcmea/error.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'M', 'E', 'A', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes little-endian doubles");

struct Section {
  const char* prefix;
  ParameterStore TrainState::*store = nullptr;
  AdamMoments TrainState::*moments = nullptr;
  bool second = false;

  ParameterStore& get(TrainState& s) const {
    if (store) return s.*store;
    return second ? (s.*moments).v : (s.*moments).m;
  }
  const ParameterStore& get(const TrainState& s) const {
    if (store) return s.*store;
    return second ? (s.*moments).v : (s.*moments).m;
  }
};

const std::array<Section, 7> kSections = {{
    {"online/", &TrainState::online},
    {"target/", &TrainState::target},
    {"mine/", &TrainState::mine},
    {"adam_online_m/", nullptr, &TrainState::adam_online, false},
    {"adam_online_v/", nullptr, &TrainState::adam_online, true},
    {"adam_mine_m/", nullptr, &TrainState::adam_mine, false},
    {"adam_mine_v/", nullptr, &TrainState::adam_mine, true},
}};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IncompatibleCheckpoint("truncated checkpoint '" + path.string() + "'");
  return v;
}

nlohmann::json pseudo_to_json(const PseudoLabelStore& p) {
  nlohmann::json dict = nlohmann::json::array(), promoted = nlohmann::json::array();
  for (const auto& [s, e] : p.dictionary) dict.push_back({s, e.target, e.epoch, e.score});
  for (const auto& q : p.promoted) promoted.push_back({q.pair.source, q.pair.target, q.epoch, q.score});
  return {{"dictionary", dict}, {"promoted", promoted}};
}

PseudoLabelStore pseudo_from_json(const nlohmann::json& j) {
  PseudoLabelStore p;
  for (const auto& e : j.at("dictionary")) {
    p.dictionary[e[0].get<EntityIndex>()] = {e[1].get<EntityIndex>(), e[2].get<int>(), e[3].get<double>()};
  }
  for (const auto& e : j.at("promoted")) {
    p.promoted.push_back({{e[0].get<EntityIndex>(), e[1].get<EntityIndex>()}, e[2].get<int>(), e[3].get<double>()});
  }
  return p;
}

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["config"] = format_config(config);
  manifest["config_hash"] = config_hash(config);
  manifest["epoch"] = state.epoch;
  manifest["stage"] = state.stage == Stage::Momentum ? "momentum" : "online_only";
  manifest["rng_state"] = state.rng_state;
  manifest["adam_step"] = state.adam_step;
  manifest["pseudo_labels"] = pseudo_to_json(state.pseudo);
  manifest["mine_ema"] = state.mine_ema;
  manifest["mine_ema_ready"] = state.mine_ema_ready;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : state.history) history.push_back(r.to_json());
  manifest["history"] = history;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& section : kSections) {
    for (const auto& entry : section.get(state).entries()) {
      arrays.push_back({std::string(section.prefix) + entry.name, entry.value.rows(), entry.value.cols()});
    }
  }
  manifest["arrays"] = arrays;
  const auto text = manifest.dump();

  auto out = detail::open_output(path);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& section : kSections) {
    for (const auto& entry : section.get(state).entries()) {
      out.write(reinterpret_cast<const char*>(entry.value.data()),
                static_cast<std::streamsize>(entry.value.size() * sizeof(double)));
    }
  }
  detail::finish_output(out, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IncompatibleCheckpoint("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = take<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = take<std::uint64_t>(in, path);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IncompatibleCheckpoint("truncated checkpoint '" + path.string() + "'");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint("corrupt checkpoint manifest: " + std::string(e.what()));
  }

  LoadedCheckpoint out;
  try {
    out.config = parse_config(manifest.at("config").get<std::string>());
    if (config_hash(out.config) != manifest.at("config_hash").get<std::uint64_t>()) {
      throw IncompatibleCheckpoint("checkpoint manifest hash does not match its config");
    }
    auto& s = out.state;
    s.epoch = manifest.at("epoch").get<int>();
    s.stage = manifest.at("stage").get<std::string>() == "momentum" ? Stage::Momentum : Stage::OnlineOnly;
    s.rng_state = manifest.at("rng_state").get<std::string>();
    s.adam_step = manifest.at("adam_step").get<long>();
    s.pseudo = pseudo_from_json(manifest.at("pseudo_labels"));
    s.mine_ema = manifest.at("mine_ema").get<std::array<double, kMiModalities.size()>>();
    s.mine_ema_ready = manifest.at("mine_ema_ready").get<bool>();
    for (const auto& line : manifest.at("history")) s.history.push_back(EpochRecord::from_json(line.get<std::string>()));
    s.online.set_role(StoreRole::Online);
    s.target.set_role(StoreRole::Target);
    s.mine.set_role(StoreRole::Auxiliary);

    for (const auto& a : manifest.at("arrays")) {
      const auto full = a[0].get<std::string>();
      const auto rows = a[1].get<Eigen::Index>();
      const auto cols = a[2].get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw IncompatibleCheckpoint("negative array shape in checkpoint");
      const Section* section = nullptr;
      for (const auto& sec : kSections) {
        if (full.starts_with(sec.prefix)) section = &sec;
      }
      if (!section) throw IncompatibleCheckpoint("unknown array '" + full + "' in checkpoint");
      Matrix value(rows, cols);
      in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(double)));
      if (!in) throw IncompatibleCheckpoint("truncated checkpoint '" + path.string() + "'");
      section->get(s).add(full.substr(std::strlen(section->prefix)), std::move(value));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint("malformed checkpoint manifest: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw IncompatibleCheckpoint("checkpoint config rejected: " + std::string(e.what()));
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected) {
  auto out = load_checkpoint(path);
  if (config_hash(out.config) != config_hash(expected)) {
    throw IncompatibleCheckpoint("checkpoint was written with a different configuration");
  }
  return out;
}

}  // namespace pcmea
