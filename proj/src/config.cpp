#include "pcmea/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <vector>

#include "pcmea/error.hpp"
#include "pcmea/random.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ConfigError("bad value '" + text + "' for key '" + key + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad boolean '" + text + "' for key '" + key + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  const char* key;
  bool hashed;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T>
Field number_field(const char* key, T TrainConfig::*member, bool hashed = true) {
  return {key, hashed,
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <typename T>
Field encoder_field(const char* key, T EncoderConfig::*member) {
  return {key, true,
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.encoder.*member);
            } else {
              return std::to_string(c.encoder.*member);
            }
          },
          [member, key](TrainConfig& c, const std::string& v) { c.encoder.*member = parse_number<T>(key, v); }};
}

Field bool_field(const char* key, bool TrainConfig::*member, bool hashed = true) {
  return {key, hashed, [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("epochs", &TrainConfig::epochs, false),
      number_field("batch_size", &TrainConfig::batch_size),
      number_field("learning_rate", &TrainConfig::learning_rate),
      number_field("adam_beta1", &TrainConfig::adam_beta1),
      number_field("adam_beta2", &TrainConfig::adam_beta2),
      number_field("adam_eps", &TrainConfig::adam_eps),
      number_field("temperature", &TrainConfig::temperature),
      number_field("momentum", &TrainConfig::momentum),
      number_field("momentum_span", &TrainConfig::momentum_span),
      number_field("stage_switch_epoch", &TrainConfig::stage_switch_epoch),
      number_field("calibration_window", &TrainConfig::calibration_window),
      number_field("train_fraction", &TrainConfig::train_fraction),
      number_field("reorder_start", &TrainConfig::reorder_start),
      number_field("reorder_stop", &TrainConfig::reorder_stop),
      number_field("rng_seed", &TrainConfig::rng_seed),
      encoder_field("modal_dim", &EncoderConfig::modal_dim),
      encoder_field("segments", &EncoderConfig::segments),
      encoder_field("attention_heads", &EncoderConfig::attention_heads),
      encoder_field("adaptor_bottleneck", &EncoderConfig::adaptor_bottleneck),
      encoder_field("adaptor_scale", &EncoderConfig::adaptor_scale),
      encoder_field("gat_heads", &EncoderConfig::gat_heads),
      encoder_field("gat_slope", &EncoderConfig::gat_slope),
      encoder_field("gat_init_std", &EncoderConfig::gat_init_std),
      number_field("mine_hidden", &TrainConfig::mine_hidden),
      bool_field("mine_bias_correction", &TrainConfig::mine_bias_correction),
      number_field("mine_ema_rate", &TrainConfig::mine_ema_rate),
      number_field("bow_rel_size", &TrainConfig::bow_rel_size),
      number_field("bow_attr_size", &TrainConfig::bow_attr_size),
      number_field("text_dim", &TrainConfig::text_dim),
      bool_field("use_align_loss", &TrainConfig::use_align_loss),
      bool_field("use_mi_loss", &TrainConfig::use_mi_loss),
      bool_field("use_contrastive_loss", &TrainConfig::use_contrastive_loss),
      bool_field("use_pseudo_labels", &TrainConfig::use_pseudo_labels),
      bool_field("use_reorder", &TrainConfig::use_reorder),
      bool_field("pseudo_labels_contrastive_only", &TrainConfig::pseudo_labels_contrastive_only),
      number_field("pseudo_label_start", &TrainConfig::pseudo_label_start),
      bool_field("ensemble_agreement", &TrainConfig::ensemble_agreement),
      bool_field("eval_all_targets", &TrainConfig::eval_all_targets),
      bool_field("eval_bidirectional", &TrainConfig::eval_bidirectional),
      number_field("eval_every", &TrainConfig::eval_every, false),
      number_field("checkpoint_every", &TrainConfig::checkpoint_every, false),
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 2, "batch_size must be >= 2");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(temperature > 0.0, "temperature must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(momentum_span >= 1, "momentum_span must be >= 1");
  require(stage_switch_epoch >= 1, "stage_switch_epoch must be >= 1");
  require(calibration_window >= 1, "calibration_window must be >= 1");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(reorder_start >= 0 && reorder_stop >= reorder_start, "need 0 <= reorder_start <= reorder_stop");
  require(mine_hidden >= 1, "mine_hidden must be positive");
  require(mine_ema_rate > 0.0 && mine_ema_rate <= 1.0, "mine_ema_rate must lie in (0, 1]");
  require(bow_rel_size >= 1 && bow_attr_size >= 1, "bow sizes must be positive");
  require(text_dim >= 1, "text_dim must be positive");
  require(pseudo_label_start >= 0, "pseudo_label_start must be >= 0");
  require(eval_every >= 0 && checkpoint_every >= 0, "eval_every and checkpoint_every must be >= 0");
  encoder.validate();
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (detail::next_line(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ParseError("config", line_no, "expected 'key = value'");
    const auto key = trim(std::string_view(stripped).substr(0, eq));
    const auto value = trim(std::string_view(stripped).substr(eq + 1));
    if (key == "config_version") {
      if (parse_number<int>(key, value) != kConfigVersion) {
        throw ConfigError("unsupported config_version " + value);
      }
      continue;
    }
    bool found = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(config, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(line_no));
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out = "config_version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

void write_config(const TrainConfig& config, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << format_config(config);
  detail::finish_output(out, path);
}

std::uint64_t config_hash(const TrainConfig& config) {
  std::uint64_t h = fnv1a("pcmea-config-v" + std::to_string(kConfigVersion));
  for (const auto& f : fields()) {
    if (!f.hashed) continue;
    h = fnv1a(std::string(f.key) + "=" + f.get(config) + "\n", h);
  }
  return h;
}

}  // namespace pcmea
