#pragma once

// Corpus I/O, near-duplicate-aware dataset splitting, and the seeded
// synthetic contract corpus.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "deontic/text.hpp"

namespace deontic::corpus {

struct Corpus {
  std::vector<text::Section> sections;
  std::string source;
  std::optional<std::uint64_t> seed;

  bool operator==(const Corpus&) const = default;
  std::size_t sentence_count() const;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unit-cost edit distance over any random-access sequence (characters
/// of a string, tokens of a sentence).
template <typename Seq>
  requires(!std::is_convertible_v<const Seq&, std::string_view>)
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[m];
}

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Distance if it is at most `limit`, otherwise nullopt. Only the diagonal
/// band of width 2 * limit + 1 is evaluated.
template <typename Seq>
std::optional<std::size_t> levenshtein_bounded(const Seq& a, const Seq& b, std::size_t limit) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t diff = n > m ? n - m : m - n;
  if (diff > limit) return std::nullopt;
  if (n == 0 || m == 0) return std::max(n, m);
  const std::size_t inf = limit + 1;
  std::vector<std::size_t> prev(m + 1, inf), cur(m + 1, inf);
  for (std::size_t j = 0; j <= std::min(m, limit); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > limit ? i - limit : 1;
    const std::size_t hi = std::min(m, i + limit);
    std::fill(cur.begin(), cur.end(), inf);
    if (i <= limit) cur[0] = i;
    std::size_t row_min = cur[0];
    for (std::size_t j = lo; j <= hi; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      const std::size_t v = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
      cur[j] = std::min(v, inf);
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > limit) return std::nullopt;
    std::swap(prev, cur);
  }
  if (prev[m] > limit) return std::nullopt;
  return prev[m];
}

/// 1 - d(a, b) / max(|a|, |b|); two empty strings are identical.
double similarity(std::string_view a, std::string_view b);

enum class DistanceLevel { Character, Token };

struct ClusterTable {
  std::vector<std::vector<int>> clusters;  // section indices, ascending
  std::vector<int> cluster_of;             // section index -> cluster id
};

/// Single-linkage agglomeration: the connected components of the graph
/// linking every pair with similarity >= threshold.
ClusterTable cluster_texts(const std::vector<std::string>& texts, double threshold,
                           DistanceLevel level = DistanceLevel::Character);
ClusterTable cluster_sections(const std::vector<text::Section>& sections, double threshold,
                              DistanceLevel level = DistanceLevel::Character);

enum class Split { Train = 0, Dev = 1, Test = 2 };
std::string_view split_name(Split s);

struct SplitAssignment {
  std::vector<Split> of_section;
  ClusterTable clusters;
  std::vector<std::string> warnings;
};

/// Shuffles clusters with `seed`, then gives each one whole to the split
/// whose sentence count is furthest below its target share.
SplitAssignment assign_splits(const ClusterTable& clusters, const std::vector<std::size_t>& weights,
                              std::array<double, 3> ratios, std::uint64_t seed);

struct LeakPair {
  int a = 0;
  int b = 0;
  double similarity = 0.0;
};

/// Exhaustive check: every pair in different splits with similarity >= threshold.
std::vector<LeakPair> find_leaks(const std::vector<std::string>& texts,
                                 const std::vector<Split>& assignment, double threshold,
                                 DistanceLevel level = DistanceLevel::Character);

struct SynthOptions {
  /// Fraction of clause lists opened by a prohibition intro ("shall not:").
  double prohibition_list_rate = 0.4;
  /// Maximum sentences per section.
  int max_sentences = 15;
};

/// Generation statistics kept alongside a synthetic corpus.
struct SynthStats {
  std::size_t list_items = 0;
  /// Items whose label is decided only by the intro clause (no local negation).
  std::size_t intro_dependent_items = 0;
  std::array<std::size_t, text::kNumClasses> label_counts{};
};

Corpus generate_synthetic(std::size_t n_sections, std::uint64_t seed, const SynthOptions& options = {},
                          SynthStats* stats = nullptr);

/// Appends `count` perturbed copies of randomly chosen sections, each
/// edited so that its similarity to the original stays >= min_similarity.
/// Returns (original, copy) index pairs.
std::vector<std::pair<int, int>> inject_near_duplicates(Corpus& corpus, std::size_t count,
                                                        double min_similarity, std::uint64_t seed);

/// Modal and negation vocabulary used for attention diagnostics.
bool is_modal_or_negation(std::string_view token);

Corpus read_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl, const std::string& source = "");
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_jsonl(const Corpus& corpus);

/// Sections whose assignment equals `which`.
Corpus select_split(const Corpus& corpus, const std::vector<Split>& assignment, Split which);

}  // namespace deontic::corpus
