#pragma once

// Contract-section text to Sections of Sentences of TokenRecords.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deontic::text {

enum class ClassLabel {
  None = 0,
  Obligation,
  Prohibition,
  ObligationListIntro,
  ObligationListItem,
  ProhibitionListItem,
};
inline constexpr int kNumClasses = 6;

std::string_view label_name(ClassLabel label);
/// Short column header as used in report tables ("Obl. List Item").
std::string_view label_title(ClassLabel label);
std::optional<ClassLabel> parse_label(std::string_view name);
inline int label_index(ClassLabel label) { return static_cast<int>(label); }
ClassLabel label_from_index(int index);

enum class Shape {
  AllCaps = 0,
  InitCap,
  AllLower,
  AllDigits,
  MixedAlnum,
  Punct,
  ListMarker,
  Other,
};
inline constexpr int kNumShapes = 8;

std::string_view shape_name(Shape shape);
std::optional<Shape> parse_shape(std::string_view name);

/// Closed POS tag inventory (Penn Treebank tags plus punctuation tags).
const std::vector<std::string>& pos_tags();
/// Index into pos_tags(), or -1 for an unknown tag.
int pos_index(std::string_view tag);

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

struct TokenRecord {
  std::string surface;
  std::string pos;
  Shape shape = Shape::Other;
  bool operator==(const TokenRecord&) const = default;
};

inline constexpr std::size_t kMaxSentenceTokens = 150;
inline constexpr std::size_t kMaxSectionSentences = 15;

struct Sentence {
  std::string text;
  std::vector<TokenRecord> tokens;
  std::optional<ClassLabel> gold;
  CharSpan span;
  bool truncated = false;
  bool operator==(const Sentence&) const = default;
};

struct Section {
  std::string doc_id;
  std::string section_id;
  std::vector<Sentence> sentences;
  bool operator==(const Section&) const = default;

  /// Sentence texts joined by single spaces.
  std::string joined_text() const;
};

struct Segment {
  std::string text;
  CharSpan span;
};

struct AlignmentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Splits section text into sentences, and clause lists into the intro
/// clause plus one segment per enumerated item.
std::vector<Segment> split_sentences(std::string_view section_text);

std::vector<std::string> tokenize(std::string_view sentence_text);

Shape compute_shape(std::string_view surface);

/// Lexicon and suffix-rule tagger. Every emitted tag is in pos_tags().
std::vector<std::string> tag_pos(const std::vector<std::string>& tokens);

/// Builds token records; keeps `existing_tags` when given and complete.
std::vector<TokenRecord> make_tokens(const std::vector<std::string>& surfaces,
                                     const std::vector<std::string>& existing_tags = {});

struct AssembleOptions {
  std::size_t max_tokens = kMaxSentenceTokens;
  std::size_t max_sentences = kMaxSectionSentences;
};

/// Splits, tokenizes, tags and shapes a raw section. Sections with more
/// than `max_sentences` sentences come back as consecutive chunks whose
/// ids get a "#k" suffix.
std::vector<Section> assemble_section(const std::string& doc_id, const std::string& section_id,
                                      std::string_view raw_text,
                                      const std::vector<ClassLabel>& gold_labels = {},
                                      const AssembleOptions& options = {});

/// Tokenizes and tags one already-split sentence, truncating to max_tokens.
Sentence make_sentence(std::string text, std::optional<ClassLabel> gold, CharSpan span = {},
                       std::size_t max_tokens = kMaxSentenceTokens);

}  // namespace deontic::text
