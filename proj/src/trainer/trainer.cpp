#include "ptts/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ptts/adversary/losses.hpp"
#include "ptts/model/checkpoint.hpp"
#include "ptts/signal/mcd.hpp"

namespace ptts::trainer {

namespace {

using model::EmbeddingSequence;
using model::Scale;

double value_or_zero(const Tensor& t) { return t.defined() ? t.item() : 0.0; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void save_atomically(const std::filesystem::path& path, const model::ParamList& params, std::size_t step) {
  const auto tmp = path.string() + ".tmp";
  model::save_checkpoint(tmp, params, step);
  std::filesystem::rename(tmp, path);
}

bool report_finite(const StepReport& r) {
  for (double v : {r.lvar, r.lalign, r.lpred, r.lvoc, r.laux, r.ld}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

Example make_example(std::string id, std::vector<std::size_t> phonemes, std::vector<double> wave,
                     const signal::MelConfig& mel_config) {
  if (wave.size() < mel_config.stft.win) {
    throw std::invalid_argument("utterance '" + id + "': " + std::to_string(wave.size()) +
                                " samples is shorter than one analysis window");
  }
  Example ex;
  ex.id = std::move(id);
  ex.phonemes = std::move(phonemes);
  ex.wave = std::move(wave);
  ex.mel = signal::mel_spectrogram(ex.wave, mel_config);
  if (ex.mel.frames < ex.phonemes.size()) {
    throw std::invalid_argument("utterance '" + ex.id + "': " + std::to_string(ex.mel.frames) +
                                " frames cannot cover " + std::to_string(ex.phonemes.size()) + " phonemes");
  }
  ex.mel_tensor = Tensor::from({ex.mel.frames, ex.mel.bands}, ex.mel.values.values);
  signal::PitchConfig pc;
  pc.sample_rate = mel_config.sample_rate;
  pc.frame = mel_config.stft.win;
  pc.hop = mel_config.stft.hop;
  ex.prosody.pitch = signal::pitch_track(ex.wave, pc);
  ex.prosody.energy = signal::energy_track(ex.mel);
  return ex;
}

Stage stage_at(const TrainConfig& config, std::size_t step) {
  if (step < config.joint_start) return Stage::AlignerWarmup;
  if (step < config.adversarial_start) return Stage::Joint;
  return Stage::Adversarial;
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::AlignerWarmup: return "aligner-warmup";
    case Stage::Joint: return "joint";
    case Stage::Adversarial: return "adversarial";
  }
  return "?";
}

double lr_schedule(const TrainConfig& config, std::size_t step, std::size_t steps_per_epoch) {
  const std::size_t epoch = steps_per_epoch == 0 ? 0 : step / steps_per_epoch;
  return config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
}

Tensor total_loss(const LossComponents& c, Stage stage) {
  auto require = [&](const Tensor& t, const char* name) {
    if (!t.defined()) {
      throw std::invalid_argument(std::string("total_loss: component ") + name + " is required in the " +
                                  stage_name(stage) + " stage");
    }
  };
  require(c.var, "var");
  require(c.align, "align");
  require(c.voc, "voc");
  require(c.aux, "aux");
  Tensor total = ad::add(ad::add(ad::add(c.var, c.align), c.voc), c.aux);
  if (stage != Stage::AlignerWarmup) {
    require(c.pred, "pred");
    total = ad::add(total, c.pred);
  }
  return total;
}

Tensor pad_wave(const Tensor& wave, std::size_t min_length) {
  if (wave.numel() >= min_length) return wave;
  return ad::concat({wave, Tensor::zeros({min_length - wave.numel()})}, 0);
}

ForwardPass generator_forward(const model::TTSModel& m, const Example& ex, Stage stage, const TrainConfig& config,
                              const model::PitchStats& stats, bool with_losses) {
  ForwardPass pass;
  const EmbeddingSequence h_ph = m.phoneme_encoder(ex.phonemes);
  const EmbeddingSequence h_pr_frame = m.prosody_encoder(ex.mel_tensor);
  const EmbeddingSequence h_pr = m.prosody_attention(h_ph, h_pr_frame);

  const EmbeddingSequence aligner_input =
      config.use_prosody_conditioned_aligner ? EmbeddingSequence{ad::add(h_ph.values, h_pr.values), Scale::Phoneme}
                                             : h_ph;
  pass.soft = m.aligner(aligner_input, ex.mel_tensor);
  pass.hard = aligner::monotonic_best_path(pass.soft);
  pass.durations = aligner::durations_from_path(pass.hard);

  const bool joint = stage != Stage::AlignerWarmup;
  const bool adversarial = stage == Stage::Adversarial && config.use_conditional_discriminator;
  if (joint) {
    const EmbeddingSequence h_pred = m.prosody_predictor(h_ph);
    pass.frame_pred = model::length_regulate(h_pred, pass.durations);
    pass.frame_target = model::length_regulate(h_pr, pass.durations);
    pass.frame_condition =
        model::length_regulate({ad::stop_gradient(h_ph.values), Scale::Phoneme}, pass.durations);
  }
  if (!with_losses) return pass;

  auto& L = pass.losses;
  L.var = model::variance_loss(m.variance_predictors(h_pr_frame), ex.prosody, stats);

  Tensor log_dur;
  if (joint) log_dur = m.duration_predictor(h_ph);
  L.align = aligner::align_loss(pass.soft, pass.hard, joint ? &log_dur : nullptr).total;

  const EmbeddingSequence combined{ad::add(h_ph.values, h_pr.values), Scale::Phoneme};
  const EmbeddingSequence intermediate = model::length_regulate(combined, pass.durations);
  L.aux = ad::mean(ad::abs(ad::sub(m.auxiliary(intermediate), ex.mel_tensor)));

  const signal::StftConfig stft{};
  const Tensor wave = m.vocoder(intermediate);
  std::vector<double> target(ex.wave.begin(), ex.wave.begin() + static_cast<std::ptrdiff_t>(wave.numel()));
  const std::size_t length = std::max(wave.numel(), stft.win);
  target.resize(length, 0.0);
  L.voc = model::stft_l1_loss(pad_wave(wave, length), target);

  if (joint) {
    if (adversarial) {
      const auto fake = m.discriminator(pass.frame_pred, pass.frame_condition);
      const EmbeddingSequence real_in{ad::stop_gradient(pass.frame_target.values), Scale::Frame};
      const auto real = m.discriminator(real_in, pass.frame_condition);
      L.pred = adversary::prosody_g_loss(&fake, &real, pass.frame_pred.values, pass.frame_target.values, true).total;
    } else {
      L.pred = adversary::prosody_g_loss(nullptr, nullptr, pass.frame_pred.values, pass.frame_target.values, false)
                   .total;
    }
  }
  return pass;
}

Tensor discriminator_loss(const model::TTSModel& m, const ForwardPass& pass) {
  if (!pass.frame_pred.values.defined()) {
    throw std::logic_error("discriminator_loss: generator pass has no prosody prediction (pre-joint stage)");
  }
  const EmbeddingSequence fake_in{ad::stop_gradient(pass.frame_pred.values), Scale::Frame};
  const EmbeddingSequence real_in{ad::stop_gradient(pass.frame_target.values), Scale::Frame};
  const EmbeddingSequence cond{ad::stop_gradient(pass.frame_condition.values), Scale::Frame};
  return adversary::lsgan_d_loss(m.discriminator(real_in, cond), m.discriminator(fake_in, cond));
}

std::string step_csv_header() { return "step,lvar,lalign,lpred,lvoc,laux,ld,lr,wall_ms\n"; }

std::string to_csv(const StepReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.step, r.lvar, r.lalign,
                r.lpred, r.lvoc, r.laux, r.ld, r.lr, r.wall_ms);
  return buf;
}

double synthesis_mcd(const model::TTSModel& m, const Example& ex) {
  auto out = m.infer(ex.phonemes);
  const signal::StftConfig stft{};
  if (out.wave.size() < stft.win) out.wave.resize(stft.win, 0.0);
  const auto predicted = signal::mel_spectrogram(out.wave);
  return signal::mcd_dtw(predicted, ex.mel);
}

EvalResult evaluate(const model::TTSModel& m, std::span<const Example> test, std::size_t step) {
  EvalResult result;
  result.step = step;
  double sum = 0.0;
  for (const auto& ex : test) {
    const double v = synthesis_mcd(m, ex);
    result.utterances.push_back({ex.id, v});
    sum += v;
  }
  result.mean = test.empty() ? 0.0 : sum / static_cast<double>(test.size());
  return result;
}

Trainer::Trainer(TrainConfig config, std::vector<Example> train)
    : config_(std::move(config)),
      train_(std::move(train)),
      model_((config_.resolve(), config_.validate(), config_.model_config())),
      order_rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (train_.empty()) throw std::invalid_argument("trainer: empty training set");
  std::vector<std::vector<double>> tracks;
  for (const auto& ex : train_) tracks.push_back(ex.prosody.pitch);
  stats_ = model::pitch_stats(tracks);
  const AdamHyper hyper{config_.beta1, config_.beta2, 1e-8};
  core_ = Adam(model_.parameters(model::Partition::Core), hyper);
  prosody_ = Adam(model_.parameters(model::Partition::ProsodyPredictor), hyper);
  duration_ = Adam(model_.parameters(model::Partition::DurationPredictor), hyper);
  discriminator_ = Adam(model_.parameters(model::Partition::Discriminator), hyper);
}

std::size_t Trainer::steps_per_epoch() const { return (train_.size() + config_.batch_size - 1) / config_.batch_size; }

void Trainer::plan_epoch() {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng_.below(i)]);
  // Sort inside windows of a few batches so each batch holds similar lengths.
  const std::size_t window = config_.batch_size * 4;
  for (std::size_t b = 0; b < order.size(); b += window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(b);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(b + window, order.size()));
    std::stable_sort(first, last, [&](std::size_t x, std::size_t y) { return train_[x].frames() < train_[y].frames(); });
  }
  batches_.clear();
  for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
    batches_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(b + config_.batch_size, order.size())));
  }
  for (std::size_t i = batches_.size(); i > 1; --i) std::swap(batches_[i - 1], batches_[order_rng_.below(i)]);
  batch_cursor_ = 0;
}

std::vector<std::size_t> Trainer::next_batch() {
  if (batch_cursor_ >= batches_.size()) plan_epoch();
  return batches_[batch_cursor_++];
}

StepReport Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const Stage stage = this->stage();
  const double lr = current_lr();
  const auto batch = next_batch();
  const double weight = 1.0 / static_cast<double>(batch.size());
  auto& graph = ad::Graph::current();

  StepReport report;
  report.step = step_;
  report.lr = lr;

  const bool train_disc = stage == Stage::Adversarial && config_.use_conditional_discriminator;
  if (train_disc) {
    discriminator_.zero_grad();
    for (std::size_t idx : batch) {
      graph.reset();
      ForwardPass pass;
      {
        ad::NoGradGuard no_grad;
        pass = generator_forward(model_, train_[idx], stage, config_, stats_, false);
      }
      const Tensor ld = discriminator_loss(model_, pass);
      report.ld += weight * ld.item();
      ad::backward(ad::scale(ld, weight));
    }
    graph.reset();
    if (config_.max_grad_norm > 0.0) discriminator_.clip_grad_norm(config_.max_grad_norm);
    discriminator_.step(lr);
  }

  for (Adam* opt : {&core_, &prosody_, &duration_, &discriminator_}) opt->zero_grad();
  for (std::size_t idx : batch) {
    graph.reset();
    const ForwardPass pass = generator_forward(model_, train_[idx], stage, config_, stats_, true);
    const auto& L = pass.losses;
    report.lvar += weight * L.var.item();
    report.lalign += weight * L.align.item();
    report.lvoc += weight * L.voc.item();
    report.laux += weight * L.aux.item();
    report.lpred += weight * value_or_zero(stage == Stage::AlignerWarmup ? Tensor() : L.pred);
    ad::backward(ad::scale(total_loss(L, stage), weight));
  }
  graph.reset();

  std::vector<Adam*> active{&core_};
  if (stage != Stage::AlignerWarmup) {
    active.push_back(&prosody_);
    active.push_back(&duration_);
  }
  if (config_.max_grad_norm > 0.0) {
    for (Adam* opt : active) opt->clip_grad_norm(config_.max_grad_norm);
  }
  if (!report_finite(report)) {
    throw TrainingAborted("non-finite loss at step " + std::to_string(step_));
  }
  for (Adam* opt : active) opt->step(lr);
  for (Adam* opt : {&core_, &prosody_, &duration_, &discriminator_}) opt->zero_grad();

  ++step_;
  if (config_.record_wall_time) {
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return report;
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu", step);
  return buf;
}

RunResult run_training(Trainer& trainer, std::span<const Example> test, const std::filesystem::path& out_dir,
                       const RunHooks& hooks) {
  namespace fs = std::filesystem;
  const auto& config = trainer.config();
  fs::create_directories(out_dir / "checkpoints");
  fs::create_directories(out_dir / "align");
  write_text(out_dir / "config.txt", config.to_text());

  std::ofstream metrics(out_dir / "metrics.csv", std::ios::binary);
  std::ofstream eval_csv(out_dir / "eval.csv", std::ios::binary);
  if (!metrics || !eval_csv) throw std::runtime_error("cannot write metrics under " + out_dir.string());
  metrics << step_csv_header();
  eval_csv << "step,mean_mcd_dtw\n";

  RunResult result;
  const auto params = trainer.model().parameters();
  while (trainer.next_step() < config.total_steps) {
    StepReport report;
    try {
      report = trainer.step();
    } catch (const ad::NonFiniteError& e) {
      throw TrainingAborted(std::string("step ") + std::to_string(trainer.next_step()) + ": " + e.what());
    } catch (const NonFiniteGradient& e) {
      throw TrainingAborted(std::string("step ") + std::to_string(trainer.next_step()) + ": " + e.what());
    }
    metrics << to_csv(report);
    metrics.flush();
    if (hooks.on_step) hooks.on_step(report);
    const std::size_t done = trainer.next_step();
    if (hooks.after_step) hooks.after_step(done, trainer.model());

    if (done % config.checkpoint_interval == 0 || done == config.total_steps) {
      save_atomically(out_dir / "checkpoints" / (checkpoint_name(done) + ".ckpt"), params, done);
    }
    if (done % config.eval_interval == 0 || done == config.total_steps) {
      EvalResult ev = evaluate(trainer.model(), test, done);
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.17g\n", done, ev.mean);
      eval_csv << line;
      eval_csv.flush();
      const Example& probe = trainer.train_set().front();
      ForwardPass pass;
      {
        ad::NoGradGuard no_grad;
        pass = generator_forward(trainer.model(), probe, trainer.stage(), config, trainer.pitch_stats(), false);
      }
      const std::string stem = checkpoint_name(done);
      aligner::write_pgm(out_dir / "align" / (stem + "_soft.pgm"), pass.soft.probabilities());
      aligner::write_pgm(out_dir / "align" / (stem + "_hard.pgm"), pass.hard.to_matrix());
      if (hooks.on_eval) hooks.on_eval(ev);
      result.evals.push_back(std::move(ev));
    }
  }
  result.final_checkpoint = out_dir / "final.ckpt";
  save_atomically(result.final_checkpoint, params, trainer.next_step());
  return result;
}

}  // namespace ptts::trainer
