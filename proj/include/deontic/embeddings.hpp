#pragma once

// Vocabulary and the word + POS + shape token representation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "deontic/rng.hpp"
#include "deontic/tensor.hpp"
#include "deontic/text.hpp"

namespace deontic::embed {

using tensor::Matrix;
using tensor::RowVector;
using VectorMap = std::map<std::string, RowVector>;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmbeddingDims {
  int word = 200;
  int pos = 25;
  int shape = 5;
  int total() const { return word + pos + shape; }
  bool operator==(const EmbeddingDims&) const = default;
};

struct LoadResult {
  VectorMap vectors;
  std::size_t duplicates = 0;
};

/// Reads the word2vec text export: "token v1 ... vd" per line, with an
/// optional "count dim" header line. Duplicate tokens: last one wins.
LoadResult load_pretrained(const std::filesystem::path& path, int expected_dim);

/// Each token, in list order, gets dim draws from U(-0.05, 0.05) out of a
/// single stream seeded with `seed`.
VectorMap random_table(const std::vector<std::string>& vocab, int dim, std::uint64_t seed);

struct TableOptions {
  EmbeddingDims dims;
  bool train_words = false;
  std::uint64_t seed = 0;
  const VectorMap* pretrained_words = nullptr;
  const VectorMap* pretrained_pos = nullptr;
  const VectorMap* pretrained_shapes = nullptr;
};

/// Word, POS, shape and POS-specific unk tables. Rows of `pos` and `unk`
/// follow text::pos_tags(); rows of `shapes` follow text::Shape.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Builds tables over `vocab` (duplicates ignored). Words found in
  /// pretrained_words take those vectors; the rest use random_table.
  static EmbeddingTable create(const std::vector<std::string>& vocab, const TableOptions& options);

  const EmbeddingDims& dims() const { return dims_; }
  const std::vector<std::string>& vocabulary() const { return words_; }

  /// Row of `surface` in the word table: exact match, then lower case.
  std::optional<int> word_row(const std::string& surface) const;

  /// [word-or-unk ; pos ; shape] for one token.
  RowVector lookup(const text::TokenRecord& token) const;

  /// Time-major batch of token rows: row t * batch + b holds token t of
  /// sequence b, zero rows past each sequence's end. Differentiable w.r.t.
  /// every trainable table.
  tensor::Var embed_rows(tensor::Tape& tape,
                         const std::vector<std::vector<const text::TokenRecord*>>& sequences,
                         std::size_t steps) const;

  /// n x dims().total() matrix, row t = lookup(token t).
  tensor::Var embed_sentence(tensor::Tape& tape, const std::vector<text::TokenRecord>& tokens) const;

  tensor::Parameter& word_table() { return word_table_; }
  tensor::Parameter& pos_table() { return pos_table_; }
  tensor::Parameter& shape_table() { return shape_table_; }
  tensor::Parameter& unk_table() { return unk_table_; }
  const tensor::Parameter& word_table() const { return word_table_; }
  const tensor::Parameter& pos_table() const { return pos_table_; }
  const tensor::Parameter& shape_table() const { return shape_table_; }
  const tensor::Parameter& unk_table() const { return unk_table_; }

  std::vector<tensor::Parameter*> parameters();

  /// Rebuilds the lookup index after the vocabulary or tables were
  /// replaced wholesale (checkpoint loading).
  void restore(std::vector<std::string> words, EmbeddingDims dims, tensor::Parameter word_table,
               tensor::Parameter pos_table, tensor::Parameter shape_table,
               tensor::Parameter unk_table);

 private:
  struct RowRefs {
    int word = -1;  // row in word table, or -1 for unk
    int pos = 0;
    int shape = 0;
  };
  RowRefs resolve(const text::TokenRecord& token) const;

  EmbeddingDims dims_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  tensor::Parameter word_table_;
  tensor::Parameter pos_table_;
  tensor::Parameter shape_table_;
  tensor::Parameter unk_table_;
};

}  // namespace deontic::embed
