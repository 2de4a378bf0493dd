#include "ptts/corpus/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "ptts/model/layers.hpp"
#include "ptts/signal/audio_io.hpp"

namespace ptts::corpus {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::size_t> parse_ids(const std::string& text, const std::string& where) {
  std::vector<std::size_t> ids;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.front() == '-') throw ManifestError(where + ": bad phoneme id '" + tok + "'");
    ids.push_back(static_cast<std::size_t>(v));
  }
  return ids;
}

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<ManifestEntry> CorpusManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

const ManifestEntry& CorpusManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw ManifestError("utterance '" + id + "' not in manifest");
}

fs::path CorpusManifest::resolve(const ManifestEntry& entry) const {
  const fs::path p(entry.wave_path);
  return p.is_absolute() ? p : base_dir / p;
}

void CorpusManifest::validate(std::size_t vocab) const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.id.empty()) throw ManifestError("manifest entry with empty id");
    if (!seen.insert(e.id).second) throw ManifestError("duplicate utterance id '" + e.id + "'");
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      throw ManifestError("utterance '" + e.id + "': unknown split '" + e.split + "'");
    }
    if (e.phonemes.empty()) throw ManifestError("utterance '" + e.id + "': no phonemes");
    for (std::size_t id : e.phonemes) {
      if (vocab > 0 && id >= vocab) {
        throw ManifestError("utterance '" + e.id + "': phoneme id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab));
      }
    }
  }
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ManifestError("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    os << e.id << '\t' << join_ids(e.phonemes) << '\t' << e.wave_path << '\t' << e.split << '\n';
  }
  if (!os) throw ManifestError("failed writing manifest " + path.string());
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ManifestError("cannot open manifest " + path.string());
  CorpusManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n);
    const auto f = split_on(line, '\t');
    if (f.size() != 4) throw ManifestError(where + ": expected 4 tab-separated fields, got " + std::to_string(f.size()));
    m.entries.push_back({f[0], parse_ids(f[1], where), f[2], f[3]});
  }
  m.validate();
  return m;
}

void SyntheticSpec::validate() const {
  if (train_utterances + val_utterances + test_utterances == 0) throw std::invalid_argument("synthetic corpus: no utterances");
  if (vocab == 0) throw std::invalid_argument("synthetic corpus: vocab must be positive");
  if (min_phonemes == 0 || min_phonemes > max_phonemes) throw std::invalid_argument("synthetic corpus: bad phoneme count range");
  if (min_duration == 0 || min_duration > max_duration) throw std::invalid_argument("synthetic corpus: duration range must be >= 1 frame");
  if (!(min_pitch > 0.0) || min_pitch > max_pitch) throw std::invalid_argument("synthetic corpus: bad pitch range");
  if (harmonics == 0) throw std::invalid_argument("synthetic corpus: need at least one harmonic");
  if (hop == 0 || win < hop) throw std::invalid_argument("synthetic corpus: bad framing");
}

std::vector<PhonemeVoice> make_voices(const SyntheticSpec& spec) {
  model::Rng rng(spec.seed * 0x2545f4914f6cdd1dULL + 11);
  std::vector<PhonemeVoice> voices(spec.vocab);
  for (auto& v : voices) {
    v.base_pitch = spec.min_pitch + (spec.max_pitch - spec.min_pitch) * rng.uniform();
    v.contour = static_cast<Contour>(rng.below(3));
    v.amplitude = 0.15 + 0.35 * rng.uniform();
    v.harmonic_weights.resize(spec.harmonics);
    for (std::size_t h = 0; h < spec.harmonics; ++h) v.harmonic_weights[h] = (0.3 + 0.7 * rng.uniform()) / double(h + 1);
    v.base_duration = spec.min_duration + rng.below(spec.max_duration - spec.min_duration + 1);
  }
  return voices;
}

RenderedUtterance render(const SyntheticSpec& spec, const std::vector<PhonemeVoice>& voices,
                         const std::vector<std::size_t>& phonemes, const std::vector<std::size_t>& durations,
                         std::uint64_t noise_seed) {
  if (phonemes.size() != durations.size() || phonemes.empty()) {
    throw std::invalid_argument("render: need one duration per phoneme");
  }
  std::size_t frames = 0;
  for (std::size_t d : durations) frames += d;
  if (frames == 0) throw std::invalid_argument("render: durations sum to zero");
  const std::size_t total = frames * spec.hop + (spec.win - spec.hop);

  // f0 and amplitude per sample, phoneme k covering [start_k, end_k) frames;
  // the last phoneme also covers the window tail.
  std::vector<double> f0(total), amp(total);
  std::vector<const PhonemeVoice*> voice_at(total);
  std::size_t start = 0;
  for (std::size_t k = 0; k < phonemes.size(); ++k) {
    const PhonemeVoice& v = voices.at(phonemes[k]);
    const std::size_t s0 = start * spec.hop;
    const std::size_t s1 = k + 1 == phonemes.size() ? total : (start + durations[k]) * spec.hop;
    for (std::size_t s = s0; s < s1; ++s) {
      const double u = s1 > s0 + 1 ? double(s - s0) / double(s1 - s0 - 1) : 0.0;
      double scale = 1.0;
      if (v.contour == Contour::Rising) scale = 1.0 + spec.contour_depth * (u - 0.5);
      if (v.contour == Contour::Falling) scale = 1.0 - spec.contour_depth * (u - 0.5);
      f0[s] = v.base_pitch * scale;
      amp[s] = v.amplitude;
      voice_at[s] = &v;
    }
    start += durations[k];
  }

  RenderedUtterance out;
  out.samples.resize(total);
  model::Rng noise(noise_seed);
  double phase = 0.0;
  for (std::size_t s = 0; s < total; ++s) {
    phase += 2.0 * std::numbers::pi * f0[s] / spec.sample_rate;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    double x = 0.0;
    const auto& w = voice_at[s]->harmonic_weights;
    for (std::size_t h = 0; h < w.size(); ++h) x += w[h] * std::sin(double(h + 1) * phase);
    out.samples[s] = amp[s] * x + spec.noise_level * noise.normal();
  }
  out.frame_pitch.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) out.frame_pitch[t] = f0[t * spec.hop + spec.win / 2];
  return out;
}

void write_truth(const fs::path& path, const std::vector<TruthEntry>& truth) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(17);
  for (const auto& t : truth) {
    os << t.id << '\t' << join_ids(t.durations) << '\t';
    for (std::size_t i = 0; i < t.frame_pitch.size(); ++i) os << (i ? " " : "") << t.frame_pitch[i];
    os << '\n';
  }
}

std::vector<TruthEntry> read_truth(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<TruthEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 3) throw std::runtime_error(path.string() + ": malformed truth line");
    TruthEntry t;
    t.id = f[0];
    t.durations = parse_ids(f[1], path.string());
    std::istringstream ps(f[2]);
    double v;
    while (ps >> v) t.frame_pitch.push_back(v);
    out.push_back(std::move(t));
  }
  return out;
}

CorpusManifest gen_corpus(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "wavs", ec);
  if (ec) throw std::runtime_error("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

  const auto voices = make_voices(spec);
  model::Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 3);
  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  std::vector<TruthEntry> truth;
  const std::size_t total = spec.train_utterances + spec.val_utterances + spec.test_utterances;
  for (std::size_t u = 0; u < total; ++u) {
    const std::size_t n = spec.min_phonemes + rng.below(spec.max_phonemes - spec.min_phonemes + 1);
    std::vector<std::size_t> ids(n), durations(n);
    for (std::size_t k = 0; k < n; ++k) {
      ids[k] = rng.below(spec.vocab);
      const auto base = static_cast<long long>(voices[ids[k]].base_duration);
      const auto j = static_cast<long long>(spec.duration_jitter);
      const long long d = base - j + static_cast<long long>(rng.below(2 * spec.duration_jitter + 1));
      durations[k] = static_cast<std::size_t>(std::max(1LL, d));
    }
    char name[32];
    std::snprintf(name, sizeof name, "utt_%04zu", u);
    const std::string wave_rel = std::string("wavs/") + name + ".wav";
    const auto rendered = render(spec, voices, ids, durations, rng.next());
    signal::write_wav(out_dir / wave_rel, rendered.samples, spec.sample_rate);
    const std::string split = u < spec.train_utterances                        ? "train"
                              : u < spec.train_utterances + spec.val_utterances ? "val"
                                                                                : "test";
    manifest.entries.push_back({name, ids, wave_rel, split});
    truth.push_back({name, durations, rendered.frame_pitch});
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  write_truth(out_dir / "truth.tsv", truth);
  return manifest;
}

CorpusManifest ingest_ljspeech(const fs::path& metadata, const fs::path& wav_dir, std::size_t test_count) {
  std::ifstream is(metadata, std::ios::binary);
  if (!is) throw ManifestError("cannot open metadata " + metadata.string());
  CorpusManifest m;
  m.base_dir = metadata.parent_path();
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_on(line, '|');
    const std::string where = metadata.string() + ":" + std::to_string(n);
    if (f.size() < 2) throw ManifestError(where + ": expected 'id|phoneme ids'");
    m.entries.push_back({f[0], parse_ids(f.back(), where), fs::absolute(wav_dir / (f[0] + ".wav")).string(), "train"});
  }
  for (std::size_t i = m.entries.size() > test_count ? m.entries.size() - test_count : 0; i < m.entries.size(); ++i) {
    m.entries[i].split = "test";
  }
  m.validate();
  return m;
}

std::vector<trainer::Example> load_examples(const CorpusManifest& manifest, const std::string& split) {
  std::vector<trainer::Example> out;
  for (const auto& e : manifest.split(split)) {
    const fs::path wav = manifest.resolve(e);
    auto wave = signal::read_wav(wav);
    out.push_back(trainer::make_example(e.id, e.phonemes, std::move(wave.samples)));
  }
  return out;
}

}  // namespace ptts::corpus
