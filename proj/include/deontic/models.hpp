#pragma once

// The four sentence classifiers and their building blocks. Sequences are
// processed in time-major batches: row t * batch + b of a sequence matrix
// holds step t of sequence b.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deontic/embeddings.hpp"
#include "deontic/rng.hpp"
#include "deontic/tensor.hpp"
#include "deontic/text.hpp"

namespace deontic::models {

using tensor::Matrix;
using tensor::Parameter;
using tensor::Tape;
using tensor::Var;

enum class ModelVariant { BiLstm, BiLstmAtt, XBiLstmAtt, HBiLstmAtt };

std::string_view variant_name(ModelVariant v);
std::optional<ModelVariant> parse_variant(std::string_view name);
const std::vector<ModelVariant>& all_variants();
bool has_attention(ModelVariant v);

/// Gate blocks along the 4u axis are ordered (input, forget, cell, output).
struct LstmCellParams {
  Parameter W;  // input_dim x 4u
  Parameter U;  // u x 4u
  Parameter b;  // 1 x 4u

  int input_dim() const { return static_cast<int>(W.value.rows()); }
  int hidden() const { return static_cast<int>(U.value.rows()); }
  static LstmCellParams glorot(const std::string& prefix, int input_dim, int hidden, Rng& rng);
};

struct AttentionParams {
  Parameter v;  // 2u x 1
  Parameter b;  // 1 x 1
};

struct LinearParams {
  Parameter W;  // in x k
  Parameter b;  // 1 x k
};

struct ModelConfig {
  ModelVariant variant = ModelVariant::BiLstmAtt;
  int hidden = 100;
  int context = 150;  // tokens each side, X variant only
  int classes = text::kNumClasses;
  embed::EmbeddingDims dims;
  bool train_words = false;
};

/// Dense sequence batch in time-major layout.
struct SequenceBatch {
  Var data;          // (steps * batch) x dim
  Matrix mask;       // batch x steps, 1 for real positions
  int batch = 0;
  int steps = 0;
};

struct CellState {
  Var h;
  Var c;
};

/// One LSTM step on a batch of rows: x is B x input_dim, h/c are B x u.
CellState lstm_cell_step(Tape& tape, Var x, CellState prev, const LstmCellParams& p);

/// Runs one LSTM chain over the batch. Masked steps carry the previous
/// state through unchanged. Returns (steps * batch) x u states.
Var lstm_run(Tape& tape, const SequenceBatch& in, const LstmCellParams& p, bool reverse);

/// [forward ; backward] states, (steps * batch) x 2u.
Var bilstm_encode(Tape& tape, const SequenceBatch& in, const LstmCellParams& fwd,
                  const LstmCellParams& bwd);
/// Single sequence convenience: embs is n x d, result n x 2u.
Var bilstm_encode(Tape& tape, Var embs, const LstmCellParams& fwd, const LstmCellParams& bwd,
                  const std::vector<bool>& mask = {});

/// batch x 2u: forward half at each sequence's last real step joined with
/// the backward half at its first real step.
Var last_state_pool(Tape& tape, Var states, const Matrix& mask);

struct Pooled {
  Var h;          // batch x 2u
  Var scores;     // batch x steps, zero on masked steps
};

/// Self-attention pooling: a_t = softmax over unmasked t of tanh(v.h_t + b),
/// h = sum_t a_t h_t.
Pooled attention_pool(Tape& tape, Var states, const Matrix& mask, const AttentionParams& p);

/// Single-sequence forms taking an n x 2u state matrix.
Var last_state_pool(Tape& tape, Var states, const std::vector<bool>& mask = {});
Pooled attention_pool(Tape& tape, Var states, const AttentionParams& p,
                      const std::vector<bool>& mask = {});

enum class DropoutMode { PerCall, PerTimestep };

/// Forward-pass switches. `rng` is required when training with dropout.
struct RunOptions {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// 1 / (1 - rate). PerTimestep draws a fresh mask per row; PerCall shares
/// one row mask across all rows. Identity when not training.
Var dropout_apply(Tape& tape, Var x, double rate, DropoutMode mode, Rng* rng, bool training);

/// One sentence to classify, addressed inside its section.
struct Instance {
  const text::Section* section = nullptr;
  int sentence = 0;
};

struct BatchOutput {
  Var probs;                  // N x classes
  std::vector<int> gold;      // -1 where unlabeled
  /// Attention scores per classified sentence (attention variants only).
  std::vector<tensor::RowVector> attention;
};

struct ParameterCount {
  std::map<std::string, long long> items;
  long long total = 0;
};

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, embed::EmbeddingTable embeddings, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const embed::EmbeddingTable& embeddings() const { return embeddings_; }
  embed::EmbeddingTable& embeddings() { return embeddings_; }

  const LstmCellParams& encoder_fwd() const { return enc_fwd_; }
  const LstmCellParams& encoder_bwd() const { return enc_bwd_; }
  LstmCellParams& encoder_fwd() { return enc_fwd_; }
  LstmCellParams& encoder_bwd() { return enc_bwd_; }
  const std::optional<AttentionParams>& attention() const { return attention_; }
  std::optional<AttentionParams>& attention() { return attention_; }
  const std::optional<LstmCellParams>& upper_fwd() const { return upper_fwd_; }
  const std::optional<LstmCellParams>& upper_bwd() const { return upper_bwd_; }
  const LinearParams& output() const { return output_; }
  LinearParams& output() { return output_; }

  /// Every parameter, including frozen ones, in a fixed order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// Flat variants: probabilities for each instance. The H variant takes
  /// whole sections; instances then name one sentence per section and the
  /// output covers every sentence of each section in order.
  BatchOutput forward_instances(Tape& tape, const std::vector<Instance>& batch,
                                const RunOptions& run) const;
  BatchOutput forward_sections(Tape& tape, const std::vector<const text::Section*>& sections,
                               const RunOptions& run) const;

  /// Probabilities (1 x k) for one sentence with BILSTM / BILSTM_ATT.
  Var classify_flat(Tape& tape, const text::Sentence& sentence) const;
  /// X variant: encodes the sentence inside its clipped section window.
  Var classify_with_context(Tape& tape, const text::Section& section, int index) const;
  /// H variant: m x k probabilities for the section's sentences.
  Var classify_section_hier(Tape& tape, const text::Section& section) const;

  /// Replaces parameters wholesale (checkpoint loading).
  void restore(ModelConfig config, embed::EmbeddingTable embeddings, LstmCellParams enc_fwd,
               LstmCellParams enc_bwd, std::optional<AttentionParams> attention,
               std::optional<LstmCellParams> upper_fwd, std::optional<LstmCellParams> upper_bwd,
               LinearParams output);

 private:
  struct Encoded {
    Var sentence_vectors;  // N x 2u
    std::vector<tensor::RowVector> attention;
  };
  Encoded encode_sentences(Tape& tape, const std::vector<Instance>& batch, bool with_context,
                           const RunOptions& run) const;
  Var output_probs(Tape& tape, Var features, const RunOptions& run) const;

  ModelConfig config_;
  embed::EmbeddingTable embeddings_;
  LstmCellParams enc_fwd_;
  LstmCellParams enc_bwd_;
  std::optional<AttentionParams> attention_;
  std::optional<LstmCellParams> upper_fwd_;
  std::optional<LstmCellParams> upper_bwd_;
  LinearParams output_;
};

/// Learnable scalars for a configuration, itemized. Frozen word vectors
/// are excluded unless config.train_words is set.
ParameterCount count_parameters(const ModelConfig& config, long long vocab_size);
long long lstm_cell_parameters(long long input_dim, long long hidden);

/// Sum of trainable parameter sizes of a built model.
long long trainable_scalars(const Model& model);

/// Tokens of the sentence window [left context ; sentence ; right
/// context] for the X variant, never crossing the section. Returns the
/// window and the [begin, end) range of the sentence inside it.
std::pair<std::vector<const text::TokenRecord*>, std::pair<int, int>> context_window(
    const text::Section& section, int index, int context);

/// Structured-text checkpoint (JSON, version "1").
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const Model& model);
Model checkpoint_from_json(const std::string& json);

}  // namespace deontic::models
