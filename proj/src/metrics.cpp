#include "cvtslr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "cvtslr/error.hpp"

namespace cvtslr {

EditBreakdown& EditBreakdown::operator+=(const EditBreakdown& o) {
  del += o.del;
  ins += o.ins;
  sub += o.sub;
  ref_len += o.ref_len;
  return *this;
}

EditBreakdown edit_alignment(std::span<const int> ref, std::span<const int> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1] ? 1 : 0);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }

  EditBreakdown out;
  out.ref_len = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool mismatch = ref[i - 1] != hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (mismatch ? 1 : 0)) {
        out.sub += mismatch ? 1 : 0;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++out.ins;
      --j;
    } else {
      ++out.del;
      --i;
    }
  }
  return out;
}

double WerReport::del_rate() const { return static_cast<double>(totals.del) / static_cast<double>(totals.ref_len); }
double WerReport::ins_rate() const { return static_cast<double>(totals.ins) / static_cast<double>(totals.ref_len); }
double WerReport::sub_rate() const { return static_cast<double>(totals.sub) / static_cast<double>(totals.ref_len); }

WerReport wer(std::span<const RefHypPair> pairs) {
  WerReport report;
  report.per_sample.reserve(pairs.size());
  for (const auto& [ref, hyp] : pairs) {
    report.per_sample.push_back(edit_alignment(ref, hyp));
    report.totals += report.per_sample.back();
  }
  if (report.totals.ref_len == 0) fail(ErrorCode::kEmptyReferenceCorpus, "WER needs at least one reference gloss");
  report.wer = static_cast<double>(report.totals.errors()) / static_cast<double>(report.totals.ref_len);
  return report;
}

Matrix alignment_matrix(const Matrix& visual, const Matrix& textual) {
  if (visual.cols != textual.cols) {
    fail(ErrorCode::kDimensionMismatch, "alignment_matrix: feature widths " + std::to_string(visual.cols) + " and " +
                                            std::to_string(textual.cols));
  }
  auto norms = [](const Matrix& x) {
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
      double ss = 0.0;
      for (double v : x.row(r)) ss += v * v;
      out[r] = std::sqrt(ss);
    }
    return out;
  };
  const auto nv = norms(visual);
  const auto nt = norms(textual);
  Matrix out(visual.rows, textual.rows, 0.0);
  for (std::size_t i = 0; i < visual.rows; ++i) {
    for (std::size_t j = 0; j < textual.rows; ++j) {
      if (nv[i] == 0.0 || nt[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < visual.cols; ++k) dot += visual(i, k) * textual(j, k);
      out(i, j) = dot / (nv[i] * nt[j]);
    }
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIoError, "cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      if (c) os << ',';
      os.write(buf, res.ptr - buf);
    }
    os << '\n';
  }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIoError, "cannot read " + path.string());
  Matrix m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      double v = 0.0;
      auto res = std::from_chars(line.data() + start, line.data() + end, v);
      if (res.ec != std::errc() || res.ptr != line.data() + end) {
        fail(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": bad number");
      }
      row.push_back(v);
      start = end + 1;
    }
    if (m.rows == 0) m.cols = row.size();
    if (row.size() != m.cols) fail(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": ragged row");
    m.data.insert(m.data.end(), row.begin(), row.end());
    ++m.rows;
  }
  return m;
}

void write_matrix_pgm(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIoError, "cannot write " + path.string());
  os << "P5\n" << m.cols << ' ' << m.rows << "\n255\n";
  double lo = 0.0;
  double hi = 0.0;
  if (!m.data.empty()) {
    auto [mn, mx] = std::minmax_element(m.data.begin(), m.data.end());
    lo = *mn;
    hi = *mx;
  }
  const double span = hi - lo;
  for (double v : m.data) {
    const double scaled = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
}

}  // namespace cvtslr
