#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "ptts/model/model.hpp"

namespace ptts::trainer {

/// Parse or validation failure. `line` is 0 when the problem is not tied to a
/// single line of the file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& field, const std::string& message);
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct TrainConfig {
  // optimizer
  double learning_rate = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double lr_decay = 0.999;  // per epoch
  double max_grad_norm = 0.0;  // 0 disables clipping

  // schedule; a boundary of 0 resolves to 30% / 35% of total_steps
  std::size_t batch_size = 4;
  std::size_t total_steps = 2000;
  std::size_t joint_start = 0;
  std::size_t adversarial_start = 0;

  // ablations
  bool use_conditional_discriminator = true;
  bool use_prosody_conditioned_aligner = true;

  // bookkeeping
  std::size_t eval_interval = 200;
  std::size_t checkpoint_interval = 0;  // 0: same as eval_interval
  bool record_wall_time = true;
  std::uint64_t seed = 1;

  // model
  std::size_t vocab = 40;
  std::size_t channels = 32;
  std::size_t encoder_blocks = 2;
  std::size_t disc_hidden = 32;
  std::size_t disc_projection = 128;
  std::size_t receptive_field = 19;

  std::string manifest;

  /// Fills zero boundaries from total_steps.
  void resolve();
  /// Throws ConfigError on out-of-range or inconsistent values.
  void validate(const std::string& source = "config") const;
  model::ModelConfig model_config() const;

  /// Sets one field from its text form; throws ConfigError naming the field.
  void set(const std::string& key, const std::string& value, const std::string& source = "config",
           std::size_t line = 0);

  /// key = value lines in a stable order, parseable by parse_config.
  std::string to_text() const;
};

/// Flat `key = value` text; `#` starts a comment. Unknown keys are errors.
TrainConfig parse_config(std::istream& is, const std::string& source = "config");
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace ptts::trainer
