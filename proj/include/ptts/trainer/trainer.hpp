#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptts/aligner/aligner.hpp"
#include "ptts/model/model.hpp"
#include "ptts/signal/pitch.hpp"
#include "ptts/signal/spectral.hpp"
#include "ptts/trainer/config.hpp"
#include "ptts/trainer/optimizer.hpp"

namespace ptts::trainer {

using ad::Tensor;

/// One utterance with its analysis features precomputed.
struct Example {
  std::string id;
  std::vector<std::size_t> phonemes;
  std::vector<double> wave;
  signal::MelSpectrogram mel;
  Tensor mel_tensor;  // [T, bands], constant
  signal::ProsodyTargets prosody;

  std::size_t frames() const { return mel.frames; }
};

/// Computes mel, pitch and energy for a wave. Throws when the wave is shorter
/// than one analysis window or has fewer frames than phonemes.
Example make_example(std::string id, std::vector<std::size_t> phonemes, std::vector<double> wave,
                     const signal::MelConfig& mel_config = {});

enum class Stage { AlignerWarmup, Joint, Adversarial };

Stage stage_at(const TrainConfig& config, std::size_t step);
const char* stage_name(Stage stage);

/// base * decay^epoch with epoch = step / steps_per_epoch.
double lr_schedule(const TrainConfig& config, std::size_t step, std::size_t steps_per_epoch);

/// Generator-side loss terms of one batch element. Undefined tensors are
/// terms that were not computed.
struct LossComponents {
  Tensor var;
  Tensor align;
  Tensor pred;
  Tensor voc;
  Tensor aux;
};

/// Unit-weight sum of the terms active at `stage`. pred is ignored before the
/// joint stage and required from it on; the other four are always required.
Tensor total_loss(const LossComponents& components, Stage stage);

/// Everything the generator pass produces for one example.
struct ForwardPass {
  LossComponents losses;
  aligner::SoftAlignment soft;
  aligner::HardAlignment hard;
  model::DurationVector durations;
  // Frame-scale prosody embeddings for the discriminator; defined from the
  // joint stage on.
  model::EmbeddingSequence frame_pred;
  model::EmbeddingSequence frame_target;
  model::EmbeddingSequence frame_condition;  // detached upsampled h_ph
};

/// Runs the training-time generator graph. With `with_losses` false only the
/// alignment and the discriminator inputs are produced.
ForwardPass generator_forward(const model::TTSModel& model, const Example& example, Stage stage,
                              const TrainConfig& config, const model::PitchStats& stats, bool with_losses = true);

/// LSGAN discriminator loss on detached generator outputs.
Tensor discriminator_loss(const model::TTSModel& model, const ForwardPass& pass);

/// Pads a wave tensor with trailing zeros up to `min_length` samples.
Tensor pad_wave(const Tensor& wave, std::size_t min_length);

struct StepReport {
  std::size_t step = 0;
  double lvar = 0.0;
  double lalign = 0.0;
  double lpred = 0.0;
  double lvoc = 0.0;
  double laux = 0.0;
  double ld = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

std::string step_csv_header();
std::string to_csv(const StepReport& report);

struct UtteranceScore {
  std::string id;
  double mcd_dtw = 0.0;
};

struct EvalResult {
  std::size_t step = 0;
  std::vector<UtteranceScore> utterances;
  double mean = 0.0;
};

/// Synthesizes from phonemes alone and scores against the reference mel.
double synthesis_mcd(const model::TTSModel& model, const Example& example);
EvalResult evaluate(const model::TTSModel& model, std::span<const Example> test, std::size_t step = 0);

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Trainer {
 public:
  Trainer(TrainConfig config, std::vector<Example> train);

  /// Runs the next iteration: a discriminator update (adversarial stage
  /// only) followed by a generator update.
  StepReport step();

  std::size_t next_step() const { return step_; }
  Stage stage() const { return stage_at(config_, step_); }
  std::size_t steps_per_epoch() const;
  double current_lr() const { return lr_schedule(config_, step_, steps_per_epoch()); }

  model::TTSModel& model() { return model_; }
  const model::TTSModel& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  const model::PitchStats& pitch_stats() const { return stats_; }
  std::span<const Example> train_set() const { return train_; }

 private:
  std::vector<std::size_t> next_batch();
  void plan_epoch();

  TrainConfig config_;
  std::vector<Example> train_;
  model::TTSModel model_;
  model::PitchStats stats_;
  Adam core_, prosody_, duration_, discriminator_;
  model::Rng order_rng_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t batch_cursor_ = 0;
  std::size_t step_ = 0;
};

struct RunHooks {
  std::function<void(const StepReport&)> on_step;
  std::function<void(const EvalResult&)> on_eval;
  // Called after every step with the step count completed so far.
  std::function<void(std::size_t, const model::TTSModel&)> after_step;
};

struct RunResult {
  std::vector<EvalResult> evals;
  std::filesystem::path final_checkpoint;
};

/// Trains to config.total_steps, writing under `out_dir`:
///   metrics.csv          one StepReport per step
///   eval.csv             step, mean MCD-DTW at every eval interval
///   checkpoints/step_NNNNNN.ckpt and final.ckpt
///   align/step_NNNNNN_{soft,hard}.pgm for the first training utterance
///   config.txt           the resolved configuration
/// Throws TrainingAborted on a non-finite loss or gradient; checkpoints
/// already written are left in place.
RunResult run_training(Trainer& trainer, std::span<const Example> test, const std::filesystem::path& out_dir,
                       const RunHooks& hooks = {});

std::string checkpoint_name(std::size_t step);

}  // namespace ptts::trainer
