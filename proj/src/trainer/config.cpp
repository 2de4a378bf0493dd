#include "ptts/trainer/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ptts/adversary/receptive_field.hpp"

namespace ptts::trainer {

namespace {

std::string describe(const std::string& source, std::size_t line, const std::string& field,
                     const std::string& message) {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  out += ": ";
  if (!field.empty()) out += "field '" + field + "': ";
  return out + message;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> parse;
  std::function<std::string(const TrainConfig&)> print;
};

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string print_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
Field size_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_u64(v)); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const TrainConfig& c) { return print_double(c.*member); }};
}

Field bool_field(bool TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& v) { c.*member = parse_bool(v); },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"learning_rate", double_field(&TrainConfig::learning_rate)},
      {"beta1", double_field(&TrainConfig::beta1)},
      {"beta2", double_field(&TrainConfig::beta2)},
      {"lr_decay", double_field(&TrainConfig::lr_decay)},
      {"max_grad_norm", double_field(&TrainConfig::max_grad_norm)},
      {"batch_size", size_field(&TrainConfig::batch_size)},
      {"total_steps", size_field(&TrainConfig::total_steps)},
      {"joint_start", size_field(&TrainConfig::joint_start)},
      {"adversarial_start", size_field(&TrainConfig::adversarial_start)},
      {"use_conditional_discriminator", bool_field(&TrainConfig::use_conditional_discriminator)},
      {"use_prosody_conditioned_aligner", bool_field(&TrainConfig::use_prosody_conditioned_aligner)},
      {"eval_interval", size_field(&TrainConfig::eval_interval)},
      {"checkpoint_interval", size_field(&TrainConfig::checkpoint_interval)},
      {"record_wall_time", bool_field(&TrainConfig::record_wall_time)},
      {"seed", size_field(&TrainConfig::seed)},
      {"vocab", size_field(&TrainConfig::vocab)},
      {"channels", size_field(&TrainConfig::channels)},
      {"encoder_blocks", size_field(&TrainConfig::encoder_blocks)},
      {"disc_hidden", size_field(&TrainConfig::disc_hidden)},
      {"disc_projection", size_field(&TrainConfig::disc_projection)},
      {"receptive_field", size_field(&TrainConfig::receptive_field)},
      {"manifest", {[](TrainConfig& c, const std::string& v) { c.manifest = v; },
                    [](const TrainConfig& c) { return c.manifest; }}},
  };
  return table;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& field,
                         const std::string& message)
    : std::runtime_error(describe(source, line, field, message)), line_(line), field_(field) {}

void TrainConfig::resolve() {
  if (joint_start == 0) joint_start = total_steps * 3 / 10;
  if (adversarial_start == 0) adversarial_start = total_steps * 35 / 100;
  if (checkpoint_interval == 0) checkpoint_interval = eval_interval;
}

void TrainConfig::validate(const std::string& source) const {
  auto fail = [&](const std::string& field, const std::string& msg) { throw ConfigError(source, 0, field, msg); };
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1", "must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2", "must lie in (0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay", "must lie in (0, 1]");
  if (max_grad_norm < 0.0) fail("max_grad_norm", "must be non-negative");
  if (batch_size == 0) fail("batch_size", "must be at least 1");
  if (total_steps == 0) fail("total_steps", "must be at least 1");
  if (joint_start == 0 || joint_start >= total_steps) fail("joint_start", "must lie strictly between 0 and total_steps");
  if (adversarial_start <= joint_start || adversarial_start >= total_steps) {
    fail("adversarial_start", "must lie strictly between joint_start and total_steps");
  }
  if (eval_interval == 0) fail("eval_interval", "must be at least 1");
  if (vocab == 0) fail("vocab", "must be at least 1");
  if (channels == 0) fail("channels", "must be at least 1");
  if (disc_hidden == 0) fail("disc_hidden", "must be at least 1");
  if (disc_projection == 0) fail("disc_projection", "must be at least 1");
  const std::size_t rf = adversary::receptive_field(model_config().conv_layout);
  if (receptive_field != rf) {
    fail("receptive_field", "the conv layout yields " + std::to_string(rf) + " frames, config asks for " +
                                std::to_string(receptive_field));
  }
}

model::ModelConfig TrainConfig::model_config() const {
  model::ModelConfig m;
  m.vocab = vocab;
  m.channels = channels;
  m.encoder_blocks = encoder_blocks;
  m.disc_hidden = disc_hidden;
  m.disc_projection = disc_projection;
  m.seed = seed;
  return m;
}

void TrainConfig::set(const std::string& key, const std::string& value, const std::string& source, std::size_t line) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(source, line, key, "unknown key");
  try {
    it->second.parse(*this, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, line, key, e.what());
  }
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.print(*this) + "\n";
  return out;
}

TrainConfig parse_config(std::istream& is, const std::string& source) {
  TrainConfig config;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "", "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line, "", "missing key before '='");
    config.set(key, value, source, line);
  }
  config.resolve();
  config.validate(source);
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string(), 0, "", "cannot open config file");
  return parse_config(is, path.string());
}

}  // namespace ptts::trainer
