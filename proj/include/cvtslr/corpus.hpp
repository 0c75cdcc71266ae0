#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cvtslr/ctc.hpp"
#include "cvtslr/mask.hpp"
#include "cvtslr/matrix.hpp"
#include "cvtslr/nn.hpp"

namespace cvtslr {

// Dense ids 0..|V|-1 for glosses; the CTC blank is id |V|.
class GlossVocab {
 public:
  GlossVocab() = default;
  explicit GlossVocab(std::vector<std::string> glosses);
  static GlossVocab synthetic(std::size_t size);

  std::size_t size() const { return glosses_.size(); }
  int blank_id() const { return static_cast<int>(glosses_.size()); }
  const std::string& gloss(int id) const;
  int id_of(std::string_view gloss) const;
  const std::vector<std::string>& glosses() const { return glosses_; }
  bool operator==(const GlossVocab& o) const { return glosses_ == o.glosses_; }

 private:
  std::vector<std::string> glosses_;
  std::unordered_map<std::string, int> ids_;
};

enum class Split { kTrain, kDev, kTest };
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct SignSample {
  std::string id;
  Split split = Split::kTrain;
  Matrix frames;  // [T, d_in]; empty when loaded without features
  GlossSeq glosses;
};

struct SynthConfig {
  std::size_t vocab_size = 10;
  std::size_t min_glosses = 2;
  std::size_t max_glosses = 5;
  std::size_t min_frames_per_gloss = 2;
  std::size_t max_frames_per_gloss = 4;
  std::size_t d_in = 32;
  double feature_noise = 0.1;
  std::uint64_t prototype_seed = 7;
  std::size_t train_size = 200;
  std::size_t dev_size = 40;
  std::size_t test_size = 40;

  void validate() const;
};

struct Corpus {
  GlossVocab vocab;
  std::vector<SignSample> samples;
  // Per-gloss feature prototypes [|V|, d_in]; only known for generated corpora.
  Matrix prototypes;

  std::vector<const SignSample*> split(Split s) const;
  const SignSample* find(std::string_view id) const;
  std::size_t feature_dim() const;
};

// Bigram-biased gloss sequences (no immediate repeats) rendered as noisy
// copies of per-gloss prototype vectors. Pure function of (cfg, seed).
Corpus generate_corpus(const SynthConfig& cfg, std::uint64_t seed);

struct AnnotationRecord {
  std::string id;
  Split split = Split::kTrain;
  GlossSeq glosses;
  bool operator==(const AnnotationRecord&) const = default;
};

// TSV lines: id<TAB>split<TAB>space-separated glosses.
void write_annotations(const std::filesystem::path& path, std::span<const SignSample> samples, const GlossVocab& vocab);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path, const GlossVocab& vocab);

void write_vocab(const std::filesystem::path& path, const GlossVocab& vocab);
GlossVocab read_vocab(const std::filesystem::path& path);

using FeatureMap = std::map<std::string, Matrix>;

// Binary "CVTF" container with f32 payloads.
std::vector<std::uint8_t> encode_features(const FeatureMap& features);
FeatureMap decode_features(const std::vector<std::uint8_t>& bytes);
void write_features(const std::filesystem::path& path, const FeatureMap& features);
FeatureMap read_features(const std::filesystem::path& path);

inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kAnnotationFile = "annotations.tsv";
inline constexpr const char* kFeatureFile = "features.cvtf";

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
// Without features only vocab and annotations are touched.
Corpus load_corpus(const std::filesystem::path& dir, bool with_features);

inline constexpr int kPadGloss = -1;

struct Batch {
  std::vector<std::size_t> indices;  // into the sample list the batch was built from
  std::size_t max_frames = 0;
  std::size_t d_in = 0;
  std::vector<double> frames;        // [B, max_frames, d_in], zero padded
  FrameMask mask;                    // [B, max_frames]
  std::size_t max_glosses = 0;
  std::vector<int> targets;          // [B, max_glosses], kPadGloss padded

  std::size_t size() const { return indices.size(); }
  std::size_t frame_length(std::size_t b) const { return mask.length(b); }
  // Unpadded [T_b, d_in] frames of one sample.
  Tensor sample_frames(std::size_t b) const;
  GlossSeq sample_target(std::size_t b) const;
};

Batch make_batch(std::span<const SignSample* const> samples, std::span<const std::size_t> indices);

// Shuffled partition of the samples into batches of at most batch_size.
std::vector<Batch> make_batches(std::span<const SignSample* const> samples, std::size_t batch_size, Rng& rng,
                                bool shuffle = true);

}  // namespace cvtslr
