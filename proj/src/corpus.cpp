#include "cvtslr/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "cvtslr/error.hpp"

namespace cvtslr {

namespace {

constexpr std::string_view kFeatureMagic = "CVTF";
constexpr std::uint32_t kFeatureVersion = 1;

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string sample_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", std::string(split_name(split)).c_str(), index);
  return buf;
}

}  // namespace

GlossVocab::GlossVocab(std::vector<std::string> glosses) : glosses_(std::move(glosses)) {
  for (std::size_t i = 0; i < glosses_.size(); ++i) {
    const auto& g = glosses_[i];
    if (g.empty() || g.find_first_of(" \t\r\n") != std::string::npos) {
      fail(ErrorCode::kInvalidConfig, "gloss '" + g + "' is empty or contains whitespace");
    }
    if (!ids_.emplace(g, static_cast<int>(i)).second) fail(ErrorCode::kInvalidConfig, "duplicate gloss " + g);
  }
}

GlossVocab GlossVocab::synthetic(std::size_t size) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < size; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "G%02zu", i);
    names.emplace_back(buf);
  }
  return GlossVocab(std::move(names));
}

const std::string& GlossVocab::gloss(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= glosses_.size()) {
    fail(ErrorCode::kUnknownGlossId, "gloss id " + std::to_string(id));
  }
  return glosses_[static_cast<std::size_t>(id)];
}

int GlossVocab::id_of(std::string_view gloss) const {
  auto it = ids_.find(std::string(gloss));
  if (it == ids_.end()) fail(ErrorCode::kUnknownGloss, "gloss '" + std::string(gloss) + "' is not in the vocabulary");
  return it->second;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kSplitMissing, "unknown split '" + std::string(name) + "'");
}

void SynthConfig::validate() const {
  if (vocab_size < 2) fail(ErrorCode::kInvalidConfig, "vocab_size must be at least 2");
  if (min_glosses < 1 || max_glosses < min_glosses) fail(ErrorCode::kInvalidConfig, "bad gloss length range");
  if (min_frames_per_gloss < 1 || max_frames_per_gloss < min_frames_per_gloss) {
    fail(ErrorCode::kInvalidConfig, "bad frames-per-gloss range");
  }
  if (d_in == 0) fail(ErrorCode::kInvalidConfig, "d_in must be positive");
  if (feature_noise < 0.0) fail(ErrorCode::kInvalidConfig, "feature noise must be non-negative");
  if (train_size == 0 || dev_size == 0 || test_size == 0) fail(ErrorCode::kInvalidConfig, "split sizes must be positive");
}

std::vector<const SignSample*> Corpus::split(Split s) const {
  std::vector<const SignSample*> out;
  for (const auto& sample : samples) {
    if (sample.split == s) out.push_back(&sample);
  }
  return out;
}

const SignSample* Corpus::find(std::string_view id) const {
  for (const auto& sample : samples) {
    if (sample.id == id) return &sample;
  }
  return nullptr;
}

std::size_t Corpus::feature_dim() const {
  for (const auto& s : samples) {
    if (s.frames.rows > 0) return s.frames.cols;
  }
  return 0;
}

Corpus generate_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t vocab = cfg.vocab_size;
  Corpus corpus;
  corpus.vocab = GlossVocab::synthetic(vocab);

  Rng proto_rng(cfg.prototype_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  corpus.prototypes = Matrix(vocab, cfg.d_in);
  for (double& v : corpus.prototypes.data) v = static_cast<double>(static_cast<float>(normal(proto_rng)));

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Sparse-ish random bigram table; self-transitions are excluded so that
  // consecutive glosses never need a separating blank frame.
  std::vector<std::discrete_distribution<int>> transitions;
  for (std::size_t i = 0; i < vocab; ++i) {
    std::vector<double> w(vocab);
    for (std::size_t j = 0; j < vocab; ++j) {
      const double u = unit(rng);
      w[j] = i == j ? 0.0 : u * u * u;
    }
    transitions.emplace_back(w.begin(), w.end());
  }
  std::uniform_int_distribution<int> first_gloss(0, static_cast<int>(vocab) - 1);
  std::uniform_int_distribution<std::size_t> length(cfg.min_glosses, cfg.max_glosses);
  std::uniform_int_distribution<std::size_t> frames_per(cfg.min_frames_per_gloss, cfg.max_frames_per_gloss);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::pair<Split, std::size_t> plan[] = {
      {Split::kTrain, cfg.train_size}, {Split::kDev, cfg.dev_size}, {Split::kTest, cfg.test_size}};
  for (const auto& [split, count] : plan) {
    for (std::size_t k = 0; k < count; ++k) {
      SignSample s;
      s.id = sample_id(split, k);
      s.split = split;
      const std::size_t n = length(rng);
      s.glosses.push_back(first_gloss(rng));
      while (s.glosses.size() < n) s.glosses.push_back(transitions[static_cast<std::size_t>(s.glosses.back())](rng));
      std::vector<std::size_t> spans;
      std::size_t total = 0;
      for (std::size_t i = 0; i < n; ++i) total += spans.emplace_back(frames_per(rng));
      s.frames = Matrix(total, cfg.d_in);
      std::size_t row = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto proto = corpus.prototypes.row(static_cast<std::size_t>(s.glosses[i]));
        for (std::size_t f = 0; f < spans[i]; ++f, ++row) {
          for (std::size_t j = 0; j < cfg.d_in; ++j) {
            const double v = proto[j] + (cfg.feature_noise > 0.0 ? cfg.feature_noise * noise(rng) : 0.0);
            // Rounded to the on-disk f32 precision so saved corpora reload bit-identically.
            s.frames(row, j) = static_cast<double>(static_cast<float>(v));
          }
        }
      }
      corpus.samples.push_back(std::move(s));
    }
  }
  return corpus;
}

void write_annotations(const std::filesystem::path& path, std::span<const SignSample> samples, const GlossVocab& vocab) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& s : samples) {
    os << s.id << '\t' << split_name(s.split) << '\t';
    for (std::size_t i = 0; i < s.glosses.size(); ++i) os << (i ? " " : "") << vocab.gloss(s.glosses[i]);
    os << '\n';
  }
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path, const GlossVocab& vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  auto parse_error = [&](const std::string& what) {
    fail(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 3) parse_error("expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    AnnotationRecord rec;
    rec.id = fields[0];
    if (rec.id.empty()) parse_error("empty sample id");
    if (fields[1] != "train" && fields[1] != "dev" && fields[1] != "test") parse_error("unknown split '" + fields[1] + "'");
    rec.split = parse_split(fields[1]);
    for (const auto& tok : split_on(fields[2], ' ')) {
      if (tok.empty()) continue;
      rec.glosses.push_back(vocab.id_of(tok));
    }
    if (rec.glosses.empty()) parse_error("sample has no glosses");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_vocab(const std::filesystem::path& path, const GlossVocab& vocab) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& g : vocab.glosses()) os << g << '\n';
}

GlossVocab read_vocab(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<std::string> glosses;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) glosses.push_back(line);
  }
  return GlossVocab(std::move(glosses));
}

std::vector<std::uint8_t> encode_features(const FeatureMap& features) {
  detail::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.put<std::uint32_t>(kFeatureVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(features.size()));
  for (const auto& [id, m] : features) {
    w.short_string(id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) w.put<float>(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

FeatureMap decode_features(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kFeatureMagic.size() || r.bytes(kFeatureMagic.size()) != kFeatureMagic) {
    fail(ErrorCode::kBadMagic, "not a feature file (missing CVTF magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kFeatureVersion) fail(ErrorCode::kParseError, "unsupported feature file version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  FeatureMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = r.short_string();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    r.need(static_cast<std::size_t>(rows) * cols * sizeof(float));
    Matrix m(rows, cols);
    for (double& v : m.data) v = static_cast<double>(r.get<float>());
    out.emplace(std::move(id), std::move(m));
  }
  return out;
}

void write_features(const std::filesystem::path& path, const FeatureMap& features) {
  detail::write_file_bytes(path, encode_features(features));
}

FeatureMap read_features(const std::filesystem::path& path) { return decode_features(detail::read_file_bytes(path)); }

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  write_vocab(dir / kVocabFile, corpus.vocab);
  write_annotations(dir / kAnnotationFile, corpus.samples, corpus.vocab);
  FeatureMap features;
  for (const auto& s : corpus.samples) features.emplace(s.id, s.frames);
  write_features(dir / kFeatureFile, features);
}

Corpus load_corpus(const std::filesystem::path& dir, bool with_features) {
  namespace fs = std::filesystem;
  for (const char* name : {kVocabFile, kAnnotationFile}) {
    if (!fs::exists(dir / name)) fail(ErrorCode::kCorpusMissing, "missing " + (dir / name).string());
  }
  Corpus corpus;
  corpus.vocab = read_vocab(dir / kVocabFile);
  FeatureMap features;
  if (with_features) {
    if (!fs::exists(dir / kFeatureFile)) fail(ErrorCode::kCorpusMissing, "missing " + (dir / kFeatureFile).string());
    features = read_features(dir / kFeatureFile);
  }
  for (auto& rec : read_annotations(dir / kAnnotationFile, corpus.vocab)) {
    SignSample s;
    s.id = std::move(rec.id);
    s.split = rec.split;
    s.glosses = std::move(rec.glosses);
    if (with_features) {
      auto it = features.find(s.id);
      if (it == features.end()) fail(ErrorCode::kCorpusMissing, "no features for sample " + s.id);
      s.frames = std::move(it->second);
    }
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

Tensor Batch::sample_frames(std::size_t b) const {
  const std::size_t len = frame_length(b);
  if (len == 0) fail(ErrorCode::kEmptySequence, "batch sample " + std::to_string(b) + " has no frames");
  const auto begin = frames.begin() + static_cast<std::ptrdiff_t>(b * max_frames * d_in);
  return Tensor({len, d_in}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(len * d_in)));
}

GlossSeq Batch::sample_target(std::size_t b) const {
  GlossSeq out;
  for (std::size_t i = 0; i < max_glosses; ++i) {
    const int g = targets[b * max_glosses + i];
    if (g == kPadGloss) break;
    out.push_back(g);
  }
  return out;
}

Batch make_batch(std::span<const SignSample* const> samples, std::span<const std::size_t> indices) {
  Batch batch;
  batch.indices.assign(indices.begin(), indices.end());
  for (std::size_t idx : indices) {
    const auto& s = *samples[idx];
    batch.max_frames = std::max(batch.max_frames, s.frames.rows);
    batch.max_glosses = std::max(batch.max_glosses, s.glosses.size());
    if (s.frames.rows > 0) {
      if (batch.d_in != 0 && batch.d_in != s.frames.cols) fail(ErrorCode::kDimensionMismatch, "mixed feature widths");
      batch.d_in = s.frames.cols;
    }
  }
  const std::size_t b_count = indices.size();
  batch.frames.assign(b_count * batch.max_frames * batch.d_in, 0.0);
  batch.mask = FrameMask(b_count, batch.max_frames, false);
  batch.targets.assign(b_count * batch.max_glosses, kPadGloss);
  for (std::size_t b = 0; b < b_count; ++b) {
    const auto& s = *samples[indices[b]];
    std::copy(s.frames.data.begin(), s.frames.data.end(),
              batch.frames.begin() + static_cast<std::ptrdiff_t>(b * batch.max_frames * batch.d_in));
    for (std::size_t t = 0; t < s.frames.rows; ++t) batch.mask.set(b, t, true);
    std::copy(s.glosses.begin(), s.glosses.end(),
              batch.targets.begin() + static_cast<std::ptrdiff_t>(b * batch.max_glosses));
  }
  return batch;
}

std::vector<Batch> make_batches(std::span<const SignSample* const> samples, std::size_t batch_size, Rng& rng,
                                bool shuffle) {
  if (batch_size == 0) fail(ErrorCode::kInvalidConfig, "batch size must be positive");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(make_batch(samples, std::span<const std::size_t>(order).subspan(start, end - start)));
  }
  return out;
}

}  // namespace cvtslr
