#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cvtslr/ctc.hpp"
#include "cvtslr/matrix.hpp"

namespace cvtslr {

struct EditBreakdown {
  std::size_t del = 0;
  std::size_t ins = 0;
  std::size_t sub = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return del + ins + sub; }
  EditBreakdown& operator+=(const EditBreakdown& o);
  bool operator==(const EditBreakdown&) const = default;
};

// Minimum-cost unit edit script; among optimal scripts the backtrace prefers
// substitution (or match), then insertion, then deletion.
EditBreakdown edit_alignment(std::span<const int> ref, std::span<const int> hyp);

struct WerReport {
  double wer = 0.0;
  EditBreakdown totals;
  std::vector<EditBreakdown> per_sample;

  double del_rate() const;
  double ins_rate() const;
  double sub_rate() const;
};

using RefHypPair = std::pair<GlossSeq, GlossSeq>;

// Corpus-level ratio of summed errors to summed reference lengths.
WerReport wer(std::span<const RefHypPair> pairs);

// Cosine similarity between every visual frame (rows) and textual frame
// (columns) of one sample.
Matrix alignment_matrix(const Matrix& visual, const Matrix& textual);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);
// Binary 8-bit PGM, values min-max scaled to 0..255.
void write_matrix_pgm(const std::filesystem::path& path, const Matrix& m);

}  // namespace cvtslr
