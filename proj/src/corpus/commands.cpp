#include "ptts/corpus/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include "ptts/model/checkpoint.hpp"
#include "ptts/signal/audio_io.hpp"
#include "ptts/signal/mcd.hpp"

namespace ptts::corpus {

namespace fs = std::filesystem;

namespace {

fs::path manifest_path(const trainer::TrainConfig& config, const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (config.manifest.empty()) throw ManifestError("no manifest given (use --manifest or the 'manifest' config key)");
  return config.manifest;
}

// Returns false (after reporting) when the manifest file does not exist.
bool manifest_exists(const fs::path& path, std::ostream& err) {
  if (fs::exists(path)) return true;
  err << "error: manifest not found: " << path.string() << "\n";
  return false;
}

model::TTSModel load_model(const trainer::TrainConfig& config, const fs::path& checkpoint) {
  model::TTSModel m(config.model_config());
  model::load_checkpoint(checkpoint, m.parameters());
  return m;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const trainer::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

trainer::TrainConfig resolve_config(const std::optional<fs::path>& config, const fs::path& checkpoint) {
  if (config) return trainer::load_config(*config);
  if (!checkpoint.empty()) {
    fs::path dir = fs::is_directory(checkpoint) ? checkpoint : checkpoint.parent_path();
    for (int up = 0; up < 2 && !dir.empty(); ++up, dir = dir.parent_path()) {
      if (fs::exists(dir / "config.txt")) return trainer::load_config(dir / "config.txt");
    }
  }
  trainer::TrainConfig c;
  c.resolve();
  c.validate();
  return c;
}

trainer::TrainConfig apply_ablations(trainer::TrainConfig config, const std::vector<std::string>& ablate) {
  for (const auto& a : ablate) {
    if (a == "no-cond-disc") {
      config.use_conditional_discriminator = false;
    } else if (a == "no-prosody-align") {
      config.use_prosody_conditioned_aligner = false;
    } else {
      throw trainer::ConfigError("--ablate", 0, a, "unknown ablation (expected no-cond-disc or no-prosody-align)");
    }
  }
  return config;
}

int cmd_gen_corpus(const GenCorpusOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.ljspeech_metadata) {
      if (!fs::exists(*o.ljspeech_metadata)) {
        err << "error: metadata not found: " << o.ljspeech_metadata->string() << "\n";
        return kExitMissingInput;
      }
      const fs::path wavs = o.wav_dir ? *o.wav_dir : o.ljspeech_metadata->parent_path() / "wavs";
      auto manifest = ingest_ljspeech(*o.ljspeech_metadata, wavs, o.test.value_or(10));
      fs::create_directories(o.out);
      write_manifest(o.out / "manifest.tsv", manifest);
      out << "ingested " << manifest.entries.size() << " utterances to " << (o.out / "manifest.tsv").string() << "\n";
      return kExitOk;
    }
    SyntheticSpec spec;
    if (o.seed) spec.seed = *o.seed;
    if (o.train) spec.train_utterances = *o.train;
    if (o.test) spec.test_utterances = *o.test;
    const auto manifest = gen_corpus(spec, o.out);
    out << "wrote " << manifest.entries.size() << " utterances to " << (o.out / "manifest.tsv").string() << "\n";
    return kExitOk;
  });
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    trainer::TrainConfig config = resolve_config(o.config);
    if (o.seed) config.seed = *o.seed;
    if (o.eval_interval) {
      config.eval_interval = *o.eval_interval;
      config.checkpoint_interval = *o.eval_interval;
    }
    if (o.steps) {
      // Rescale boundaries that were derived from the old horizon.
      config.total_steps = *o.steps;
      config.joint_start = 0;
      config.adversarial_start = 0;
    }
    config = apply_ablations(config, o.ablate);
    const fs::path mpath = manifest_path(config, o.manifest);
    if (!manifest_exists(mpath, err)) return kExitMissingInput;
    config.manifest = mpath.string();
    config.resolve();
    config.validate("command line");

    const auto manifest = read_manifest(mpath);
    manifest.validate(config.vocab);
    auto train = load_examples(manifest, "train");
    const auto test = load_examples(manifest, "test");
    trainer::Trainer t(config, std::move(train));
    out << "training " << config.total_steps << " steps on " << t.train_set().size() << " utterances ("
        << t.steps_per_epoch() << " steps per epoch)\n";
    trainer::RunHooks hooks;
    hooks.on_eval = [&](const trainer::EvalResult& ev) {
      out << "step " << ev.step << " [" << trainer::stage_name(t.stage()) << "] mean MCD-DTW " << ev.mean << "\n";
    };
    const auto result = trainer::run_training(t, test, o.out, hooks);
    out << "final checkpoint: " << result.final_checkpoint.string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const trainer::TrainConfig config = resolve_config(o.config, o.checkpoint);
    const fs::path mpath = manifest_path(config, o.manifest);
    if (!manifest_exists(mpath, err)) return kExitMissingInput;
    if (!o.reference && !fs::exists(o.checkpoint)) {
      err << "error: checkpoint not found: " << o.checkpoint.string() << "\n";
      return kExitMissingInput;
    }
    const auto manifest = read_manifest(mpath);
    const auto examples = load_examples(manifest, o.split);
    if (examples.empty()) throw ManifestError("split '" + o.split + "' is empty");
    std::ofstream csv(o.out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + o.out.string());
    csv.precision(17);

    if (o.reference) {
      csv << "id,mcd_dtw\n";
      double sum = 0.0;
      for (const auto& ex : examples) {
        const double v = signal::mcd_dtw(ex.mel, ex.mel);
        sum += v;
        csv << ex.id << ',' << v << '\n';
      }
      csv << "mean," << sum / double(examples.size()) << '\n';
      out << "reference mean MCD-DTW " << sum / double(examples.size()) << "\n";
      return kExitOk;
    }

    if (fs::is_directory(o.checkpoint)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(o.checkpoint)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("step_", 0) == 0 && entry.path().extension() == ".ckpt") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      csv << "step,mean_mcd_dtw\n";
      for (const auto& f : files) {
        const auto m = load_model(config, f);
        const auto ev = trainer::evaluate(m, examples, model::checkpoint_step(f));
        csv << ev.step << ',' << ev.mean << '\n';
        out << "step " << ev.step << " mean MCD-DTW " << ev.mean << "\n";
      }
      return kExitOk;
    }

    const auto m = load_model(config, o.checkpoint);
    const auto ev = trainer::evaluate(m, examples, model::checkpoint_step(o.checkpoint));
    csv << "id,mcd_dtw\n";
    for (const auto& u : ev.utterances) csv << u.id << ',' << u.mcd_dtw << '\n';
    csv << "mean," << ev.mean << '\n';
    out << "mean MCD-DTW over " << ev.utterances.size() << " utterances: " << ev.mean << "\n";
    return kExitOk;
  });
}

int cmd_align(const AlignOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const trainer::TrainConfig config = resolve_config(o.config, o.checkpoint);
    const fs::path mpath = manifest_path(config, o.manifest);
    if (!manifest_exists(mpath, err)) return kExitMissingInput;
    const auto manifest = read_manifest(mpath);
    const auto& entry = manifest.find(o.utterance);
    const auto wave = signal::read_wav(manifest.resolve(entry));
    const auto ex = trainer::make_example(entry.id, entry.phonemes, wave.samples);
    const auto m = load_model(config, o.checkpoint);

    trainer::ForwardPass pass;
    {
      ad::NoGradGuard no_grad;
      pass = trainer::generator_forward(m, ex, trainer::Stage::AlignerWarmup, config, {}, false);
    }
    fs::create_directories(o.out);
    aligner::write_pgm(o.out / (entry.id + "_soft.pgm"), pass.soft.probabilities());
    aligner::write_pgm(o.out / (entry.id + "_hard.pgm"), pass.hard.to_matrix());
    std::size_t sum = 0;
    out << "durations:";
    for (std::size_t d : pass.durations) {
      out << ' ' << d;
      sum += d;
    }
    out << "\nsum " << sum << " frames " << ex.frames() << (sum == ex.frames() ? " (ok)" : " (MISMATCH)") << "\n";
    return sum == ex.frames() ? kExitOk : kExitFailure;
  });
}

int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.phonemes.empty()) throw std::invalid_argument("synth: empty phoneme list");
    const trainer::TrainConfig config = resolve_config(o.config, o.checkpoint);
    const auto m = load_model(config, o.checkpoint);
    const auto result = m.infer(o.phonemes);
    signal::write_wav(o.out, result.wave);
    std::size_t frames = 0;
    for (std::size_t d : result.durations) frames += d;
    out << "wrote " << result.wave.size() << " samples (" << frames << " frames) to " << o.out.string() << "\n";
    return kExitOk;
  });
}

}  // namespace ptts::corpus
