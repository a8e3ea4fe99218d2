#include "deontic/models.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

#include "deontic/init.hpp"

namespace deontic::models {

namespace {

constexpr std::array<std::string_view, 4> kVariantNames = {"bilstm", "bilstm-att", "x-bilstm-att",
                                                           "h-bilstm-att"};

Matrix mask_row(const std::vector<bool>& mask, Eigen::Index n) {
  Matrix m = Matrix::Ones(1, n);
  if (mask.empty()) return m;
  if (static_cast<Eigen::Index>(mask.size()) != n)
    throw tensor::DimensionError("mask of length " + std::to_string(mask.size()) + " for " +
                                 std::to_string(n) + " steps");
  for (Eigen::Index t = 0; t < n; ++t) m(0, t) = mask[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
  return m;
}

// Gate nonlinearities and state update from pre-activations z (B x 4u).
CellState step_from_preactivation(Var z, CellState prev, int u) {
  Var i = tensor::sigmoid(tensor::slice(z, 1, 0, u));
  Var f = tensor::sigmoid(tensor::slice(z, 1, u, u));
  Var g = tensor::tanh(tensor::slice(z, 1, 2 * u, u));
  Var o = tensor::sigmoid(tensor::slice(z, 1, 3 * u, u));
  Var c = tensor::add(tensor::mul(f, prev.c), tensor::mul(i, g));
  Var h = tensor::mul(o, tensor::tanh(c));
  return {h, c};
}

struct SeqSpec {
  std::vector<const text::TokenRecord*> tokens;
  int att_begin = 0;
  int att_end = 0;
};

SeqSpec plain_spec(const text::Sentence& s) {
  SeqSpec spec;
  for (const auto& t : s.tokens) spec.tokens.push_back(&t);
  spec.att_end = static_cast<int>(spec.tokens.size());
  return spec;
}

}  // namespace

std::string_view variant_name(ModelVariant v) { return kVariantNames[static_cast<int>(v)]; }

std::optional<ModelVariant> parse_variant(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kVariantNames[i] == name) return static_cast<ModelVariant>(i);
  return std::nullopt;
}

const std::vector<ModelVariant>& all_variants() {
  static const std::vector<ModelVariant> v = {ModelVariant::BiLstm, ModelVariant::BiLstmAtt,
                                              ModelVariant::XBiLstmAtt, ModelVariant::HBiLstmAtt};
  return v;
}

bool has_attention(ModelVariant v) { return v != ModelVariant::BiLstm; }

LstmCellParams LstmCellParams::glorot(const std::string& prefix, int input_dim, int hidden,
                                      Rng& rng) {
  LstmCellParams p;
  p.W = Parameter(prefix + ".W", train::glorot_init(input_dim, 4 * hidden, rng));
  p.U = Parameter(prefix + ".U", train::glorot_init(hidden, 4 * hidden, rng));
  p.b = Parameter(prefix + ".b", Matrix::Zero(1, 4 * hidden));
  return p;
}

CellState lstm_cell_step(Tape& tape, Var x, CellState prev, const LstmCellParams& p) {
  const int u = p.hidden();
  if (x.cols() != p.input_dim())
    throw tensor::DimensionError("lstm_cell_step: input " + tensor::shape_string(x.value()) +
                                 " does not match input_dim " + std::to_string(p.input_dim()));
  if (prev.h.cols() != u || prev.c.cols() != u || prev.h.rows() != x.rows() ||
      prev.c.rows() != x.rows())
    throw tensor::DimensionError("lstm_cell_step: state shapes " +
                                 tensor::shape_string(prev.h.value()) + " / " +
                                 tensor::shape_string(prev.c.value()) + " do not match hidden " +
                                 std::to_string(u));
  Var z = tensor::add(tensor::add(tensor::matmul(x, tape.parameter(p.W)),
                                  tensor::matmul(prev.h, tape.parameter(p.U))),
                      tape.parameter(p.b));
  return step_from_preactivation(z, prev, u);
}

// The recurrence is one tape node: the forward pass keeps the gate
// activations of every step and the backward pass runs BPTT over them.
Var lstm_run(Tape& tape, const SequenceBatch& in, const LstmCellParams& p, bool reverse) {
  const int B = in.batch, n = in.steps, u = p.hidden();
  if (n < 1 || B < 1) throw tensor::DimensionError("lstm_run: empty sequence batch");
  if (in.data.cols() != p.input_dim())
    throw tensor::DimensionError("lstm_run: input width " + std::to_string(in.data.cols()) +
                                 " does not match input_dim " + std::to_string(p.input_dim()));
  if (in.mask.rows() != B || in.mask.cols() != n)
    throw tensor::DimensionError("lstm_run: mask " + tensor::shape_string(in.mask) + " for " +
                                 std::to_string(B) + " sequences of " + std::to_string(n) + " steps");
  Var projected = tensor::add(tensor::matmul(in.data, tape.parameter(p.W)), tape.parameter(p.b));
  Var U = tape.parameter(p.U);

  struct Trace {
    std::vector<Matrix> gates;   // B x 4u activations (i, f, g, o)
    std::vector<Matrix> c_new;   // B x u cell before masking
    std::vector<Matrix> h_prev;  // B x u
    std::vector<Matrix> c_prev;  // B x u
  };
  auto trace = std::make_shared<Trace>();
  trace->gates.resize(static_cast<std::size_t>(n));
  trace->c_new.resize(static_cast<std::size_t>(n));
  trace->h_prev.resize(static_cast<std::size_t>(n));
  trace->c_prev.resize(static_cast<std::size_t>(n));

  const Matrix& P = projected.value();
  const Matrix& Uv = U.value();
  Matrix out(static_cast<Eigen::Index>(n) * B, u);
  Matrix h = Matrix::Zero(B, u), c = Matrix::Zero(B, u);
  for (int k = 0; k < n; ++k) {
    const int t = reverse ? n - 1 - k : k;
    const auto ts = static_cast<std::size_t>(t);
    Matrix z = P.middleRows(static_cast<Eigen::Index>(t) * B, B);
    z.noalias() += h * Uv;
    auto& a = trace->gates[ts];
    a.resize(B, 4 * u);
    a.leftCols(2 * u) = (1.0 / (1.0 + (-z.leftCols(2 * u).array()).exp())).matrix();
    a.middleCols(2 * u, u) = z.middleCols(2 * u, u).array().tanh().matrix();
    a.rightCols(u) = (1.0 / (1.0 + (-z.rightCols(u).array()).exp())).matrix();
    Matrix cn = (a.middleCols(u, u).array() * c.array() +
                 a.leftCols(u).array() * a.middleCols(2 * u, u).array()).matrix();
    Matrix hn = (a.rightCols(u).array() * cn.array().tanh()).matrix();
    trace->h_prev[ts] = h;
    trace->c_prev[ts] = c;
    for (Eigen::Index b = 0; b < B; ++b) {
      // Masked steps carry the previous state through unchanged.
      if (in.mask(b, t) != 1.0) {
        hn.row(b) = h.row(b);
        cn.row(b) = c.row(b);
      }
    }
    trace->c_new[ts] = cn;
    h = hn;
    c = std::move(cn);
    out.middleRows(static_cast<Eigen::Index>(t) * B, B) = h;
  }

  Matrix mask = in.mask;
  return tape.record(std::move(out), {projected.id, U.id},
                     [trace, mask, B, n, u, reverse, P_id = projected.id, U_id = U.id](Tape& tp, int self) {
    const Matrix& dH = tp.grad(self);
    const Matrix& Uv = tp.value(U_id);
    const bool want_p = tp.requires_grad(P_id);
    const bool want_u = tp.requires_grad(U_id);
    Matrix dP;
    if (want_p) dP = Matrix::Zero(static_cast<Eigen::Index>(n) * B, 4 * u);
    Matrix dU;
    if (want_u) dU = Matrix::Zero(u, 4 * u);
    Matrix dh_carry = Matrix::Zero(B, u), dc_carry = Matrix::Zero(B, u);
    Matrix dz(B, 4 * u);
    for (int k = n - 1; k >= 0; --k) {
      const int t = reverse ? n - 1 - k : k;
      const auto ts = static_cast<std::size_t>(t);
      const Matrix& a = trace->gates[ts];
      const Matrix& cn = trace->c_new[ts];
      Matrix dh = dH.middleRows(static_cast<Eigen::Index>(t) * B, B) + dh_carry;
      Matrix dc = dc_carry;
      Matrix dh_pass = Matrix::Zero(B, u), dc_pass = Matrix::Zero(B, u);
      for (Eigen::Index b = 0; b < B; ++b) {
        if (mask(b, t) != 1.0) {
          dh_pass.row(b) = dh.row(b);
          dc_pass.row(b) = dc.row(b);
          dh.row(b).setZero();
          dc.row(b).setZero();
        }
      }
      const auto ig = a.leftCols(u).array();
      const auto fg = a.middleCols(u, u).array();
      const auto gg = a.middleCols(2 * u, u).array();
      const auto og = a.rightCols(u).array();
      const Eigen::ArrayXXd tc = cn.array().tanh();
      const Eigen::ArrayXXd dcn = dc.array() + dh.array() * og * (1.0 - tc.square());
      dz.leftCols(u) = (dcn * gg * ig * (1.0 - ig)).matrix();
      dz.middleCols(u, u) = (dcn * trace->c_prev[ts].array() * fg * (1.0 - fg)).matrix();
      dz.middleCols(2 * u, u) = (dcn * ig * (1.0 - gg.square())).matrix();
      dz.rightCols(u) = (dh.array() * tc * og * (1.0 - og)).matrix();
      if (want_p) dP.middleRows(static_cast<Eigen::Index>(t) * B, B) = dz;
      if (want_u) dU.noalias() += trace->h_prev[ts].transpose() * dz;
      dh_carry = dh_pass;
      dh_carry.noalias() += dz * Uv.transpose();
      dc_carry = (dcn * fg).matrix() + dc_pass;
    }
    if (want_p) tp.grad(P_id) += dP;
    if (want_u) tp.grad(U_id) += dU;
  });
}

Var bilstm_encode(Tape& tape, const SequenceBatch& in, const LstmCellParams& fwd,
                  const LstmCellParams& bwd) {
  return tensor::concat({lstm_run(tape, in, fwd, false), lstm_run(tape, in, bwd, true)}, 1);
}

Var bilstm_encode(Tape& tape, Var embs, const LstmCellParams& fwd, const LstmCellParams& bwd,
                  const std::vector<bool>& mask) {
  SequenceBatch in{embs, mask_row(mask, embs.rows()), 1, static_cast<int>(embs.rows())};
  return bilstm_encode(tape, in, fwd, bwd);
}

Var last_state_pool(Tape& tape, Var states, const Matrix& mask) {
  (void)tape;
  const auto B = mask.rows(), n = mask.cols();
  if (states.rows() != B * n)
    throw tensor::DimensionError("last_state_pool: " + tensor::shape_string(states.value()) +
                                 " states for mask " + tensor::shape_string(mask));
  const auto u = states.cols() / 2;
  std::vector<int> last(static_cast<std::size_t>(B)), first(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Index lo = -1, hi = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask(b, t) == 0.0) continue;
      if (lo < 0) lo = t;
      hi = t;
    }
    if (lo < 0) throw std::invalid_argument("last_state_pool: sequence with no unmasked step");
    last[static_cast<std::size_t>(b)] = static_cast<int>(hi * B + b);
    first[static_cast<std::size_t>(b)] = static_cast<int>(lo * B + b);
  }
  Var fwd = tensor::slice(tensor::gather_rows(states, last), 1, 0, u);
  Var bwd = tensor::slice(tensor::gather_rows(states, first), 1, u, u);
  return tensor::concat({fwd, bwd}, 1);
}

Pooled attention_pool(Tape& tape, Var states, const Matrix& mask, const AttentionParams& p) {
  const auto B = mask.rows(), n = mask.cols();
  if (states.rows() != B * n)
    throw tensor::DimensionError("attention_pool: " + tensor::shape_string(states.value()) +
                                 " states for mask " + tensor::shape_string(mask));
  if (p.v.value.rows() != states.cols())
    throw tensor::DimensionError("attention_pool: v has " + std::to_string(p.v.value.rows()) +
                                 " entries, states have width " + std::to_string(states.cols()));
  for (Eigen::Index b = 0; b < B; ++b)
    if ((mask.row(b).array() == 0.0).all())
      throw std::invalid_argument("attention_pool: every position of a sequence is masked");
  Var logits = tensor::tanh(
      tensor::add(tensor::matmul(states, tape.parameter(p.v)), tape.parameter(p.b)));
  Var scores = tensor::softmax_rows(tensor::transpose(tensor::reshape(logits, n, B)), mask);
  Var h;
  bool first = true;
  for (Eigen::Index t = 0; t < n; ++t) {
    if ((mask.col(t).array() == 0.0).all()) continue;
    Var term = tensor::mul(tensor::slice(scores, 1, t, 1), tensor::slice(states, 0, t * B, B));
    h = first ? term : tensor::add(h, term);
    first = false;
  }
  return {h, scores};
}

Var last_state_pool(Tape& tape, Var states, const std::vector<bool>& mask) {
  return last_state_pool(tape, states, mask_row(mask, states.rows()));
}

Pooled attention_pool(Tape& tape, Var states, const AttentionParams& p,
                      const std::vector<bool>& mask) {
  return attention_pool(tape, states, mask_row(mask, states.rows()), p);
}

Var dropout_apply(Tape& tape, Var x, double rate, DropoutMode mode, Rng* rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout in training mode needs a random stream");
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  if (mode == DropoutMode::PerTimestep) {
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng->bernoulli(rate) ? 0.0 : keep_scale;
  } else {
    Matrix row(1, x.cols());
    for (Eigen::Index j = 0; j < row.cols(); ++j) row(0, j) = rng->bernoulli(rate) ? 0.0 : keep_scale;
    mask = row.replicate(x.rows(), 1);
  }
  return tensor::mul(x, tape.constant(std::move(mask)));
}

Model::Model(ModelConfig config, embed::EmbeddingTable embeddings, std::uint64_t seed)
    : config_(config), embeddings_(std::move(embeddings)) {
  if (config_.hidden <= 0) throw std::invalid_argument("hidden size must be positive");
  if (config_.context < 0 || config_.context > static_cast<int>(text::kMaxSentenceTokens))
    throw std::invalid_argument("context window must be in [0, 150]");
  if (!(embeddings_.dims() == config_.dims))
    throw std::invalid_argument("embedding table dimensions differ from the model configuration");
  Rng rng(seed);
  const int u = config_.hidden;
  const int d = config_.dims.total();
  enc_fwd_ = LstmCellParams::glorot("encoder.fwd", d, u, rng);
  enc_bwd_ = LstmCellParams::glorot("encoder.bwd", d, u, rng);
  if (has_attention(config_.variant)) {
    attention_ = AttentionParams{Parameter("attention.v", train::glorot_init(2 * u, 1, rng)),
                                 Parameter("attention.b", Matrix::Zero(1, 1))};
  }
  if (config_.variant == ModelVariant::HBiLstmAtt) {
    upper_fwd_ = LstmCellParams::glorot("upper.fwd", 2 * u, u, rng);
    upper_bwd_ = LstmCellParams::glorot("upper.bwd", 2 * u, u, rng);
  }
  output_ = LinearParams{Parameter("output.W", train::glorot_init(2 * u, config_.classes, rng)),
                         Parameter("output.b", Matrix::Zero(1, config_.classes))};
  embeddings_.word_table().trainable = config_.train_words;
}

void Model::restore(ModelConfig config, embed::EmbeddingTable embeddings, LstmCellParams enc_fwd,
                    LstmCellParams enc_bwd, std::optional<AttentionParams> attention,
                    std::optional<LstmCellParams> upper_fwd,
                    std::optional<LstmCellParams> upper_bwd, LinearParams output) {
  config_ = config;
  embeddings_ = std::move(embeddings);
  enc_fwd_ = std::move(enc_fwd);
  enc_bwd_ = std::move(enc_bwd);
  attention_ = std::move(attention);
  upper_fwd_ = std::move(upper_fwd);
  upper_bwd_ = std::move(upper_bwd);
  output_ = std::move(output);
  embeddings_.word_table().trainable = config_.train_words;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = embeddings_.parameters();
  for (LstmCellParams* cell : {&enc_fwd_, &enc_bwd_}) {
    out.push_back(&cell->W);
    out.push_back(&cell->U);
    out.push_back(&cell->b);
  }
  if (attention_) {
    out.push_back(&attention_->v);
    out.push_back(&attention_->b);
  }
  for (auto* cell : {&upper_fwd_, &upper_bwd_}) {
    if (!*cell) continue;
    out.push_back(&(*cell)->W);
    out.push_back(&(*cell)->U);
    out.push_back(&(*cell)->b);
  }
  out.push_back(&output_.W);
  out.push_back(&output_.b);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::pair<std::vector<const text::TokenRecord*>, std::pair<int, int>> context_window(
    const text::Section& section, int index, int context) {
  const auto& sents = section.sentences;
  if (index < 0 || index >= static_cast<int>(sents.size()))
    throw std::out_of_range("sentence index " + std::to_string(index) + " outside section");
  std::vector<const text::TokenRecord*> left;
  for (int s = index - 1; s >= 0 && static_cast<int>(left.size()) < context; --s) {
    const auto& toks = sents[static_cast<std::size_t>(s)].tokens;
    for (auto it = toks.rbegin(); it != toks.rend() && static_cast<int>(left.size()) < context; ++it)
      left.push_back(&*it);
  }
  std::reverse(left.begin(), left.end());
  std::vector<const text::TokenRecord*> window = left;
  const int begin = static_cast<int>(window.size());
  for (const auto& t : sents[static_cast<std::size_t>(index)].tokens) window.push_back(&t);
  const int end = static_cast<int>(window.size());
  int right = 0;
  for (std::size_t s = static_cast<std::size_t>(index) + 1; s < sents.size() && right < context; ++s) {
    for (const auto& t : sents[s].tokens) {
      if (right >= context) break;
      window.push_back(&t);
      ++right;
    }
  }
  return {std::move(window), {begin, end}};
}

Model::Encoded Model::encode_sentences(Tape& tape, const std::vector<Instance>& batch,
                                       bool with_context, const RunOptions& run) const {
  std::vector<SeqSpec> specs;
  specs.reserve(batch.size());
  for (const Instance& inst : batch) {
    if (inst.section == nullptr) throw std::invalid_argument("instance without a section");
    if (inst.sentence < 0 || inst.sentence >= static_cast<int>(inst.section->sentences.size()))
      throw std::out_of_range("sentence index outside section " + inst.section->section_id);
    const auto& sentence = inst.section->sentences[static_cast<std::size_t>(inst.sentence)];
    if (sentence.tokens.empty()) throw std::invalid_argument("cannot classify an empty sentence");
    if (with_context) {
      auto [window, range] = context_window(*inst.section, inst.sentence, config_.context);
      specs.push_back(SeqSpec{std::move(window), range.first, range.second});
    } else {
      specs.push_back(plain_spec(sentence));
    }
  }
  std::size_t steps = 0;
  for (const auto& s : specs) steps = std::max(steps, s.tokens.size());
  const auto B = static_cast<Eigen::Index>(specs.size());
  const auto n = static_cast<Eigen::Index>(steps);
  Matrix mask = Matrix::Zero(B, n);
  Matrix att_mask = Matrix::Zero(B, n);
  std::vector<std::vector<const text::TokenRecord*>> seqs;
  for (Eigen::Index b = 0; b < B; ++b) {
    const SeqSpec& s = specs[static_cast<std::size_t>(b)];
    mask.row(b).head(static_cast<Eigen::Index>(s.tokens.size())).setOnes();
    att_mask.row(b).segment(s.att_begin, s.att_end - s.att_begin).setOnes();
    seqs.push_back(s.tokens);
  }
  Var emb = embeddings_.embed_rows(tape, seqs, steps);
  emb = dropout_apply(tape, emb, run.dropout, DropoutMode::PerTimestep, run.rng, run.training);
  SequenceBatch in{emb, mask, static_cast<int>(B), static_cast<int>(n)};
  Var states = bilstm_encode(tape, in, enc_fwd_, enc_bwd_);
  Encoded out;
  if (attention_) {
    Pooled pooled = attention_pool(tape, states, att_mask, *attention_);
    out.sentence_vectors = pooled.h;
    const Matrix& scores = pooled.scores.value();
    for (Eigen::Index b = 0; b < B; ++b) {
      const SeqSpec& s = specs[static_cast<std::size_t>(b)];
      out.attention.emplace_back(scores.row(b).segment(s.att_begin, s.att_end - s.att_begin));
    }
  } else {
    out.sentence_vectors = last_state_pool(tape, states, mask);
  }
  return out;
}

Var Model::output_probs(Tape& tape, Var features, const RunOptions& run) const {
  features = dropout_apply(tape, features, run.dropout, DropoutMode::PerTimestep, run.rng,
                           run.training);
  Var logits = tensor::add(tensor::matmul(features, tape.parameter(output_.W)),
                           tape.parameter(output_.b));
  return tensor::softmax_rows(logits);
}

BatchOutput Model::forward_instances(Tape& tape, const std::vector<Instance>& batch,
                                     const RunOptions& run) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (config_.variant == ModelVariant::HBiLstmAtt) {
    std::vector<const text::Section*> sections;
    for (const auto& inst : batch) sections.push_back(inst.section);
    return forward_sections(tape, sections, run);
  }
  const bool with_context = config_.variant == ModelVariant::XBiLstmAtt;
  Encoded enc = encode_sentences(tape, batch, with_context, run);
  BatchOutput out;
  out.probs = output_probs(tape, enc.sentence_vectors, run);
  out.attention = std::move(enc.attention);
  for (const auto& inst : batch) {
    const auto& g = inst.section->sentences[static_cast<std::size_t>(inst.sentence)].gold;
    out.gold.push_back(g ? text::label_index(*g) : -1);
  }
  return out;
}

BatchOutput Model::forward_sections(Tape& tape, const std::vector<const text::Section*>& sections,
                                    const RunOptions& run) const {
  std::vector<Instance> all;
  for (const auto* sec : sections)
    for (int i = 0; i < static_cast<int>(sec->sentences.size()); ++i) all.push_back({sec, i});
  if (all.empty()) throw std::invalid_argument("no sentences to classify");
  if (config_.variant != ModelVariant::HBiLstmAtt) return forward_instances(tape, all, run);

  Encoded enc = encode_sentences(tape, all, false, run);
  const int u2 = 2 * config_.hidden;
  const auto N = static_cast<int>(all.size());
  // Dropout sits where the flat models have it (embeddings, classifier
  // input), not between the two encoders.
  Var padded = tensor::concat({enc.sentence_vectors, tape.constant(Matrix::Zero(1, u2))}, 0);

  const auto Bs = static_cast<Eigen::Index>(sections.size());
  Eigen::Index m = 0;
  for (const auto* sec : sections) m = std::max<Eigen::Index>(m, static_cast<Eigen::Index>(sec->sentences.size()));
  std::vector<int> rows(static_cast<std::size_t>(m * Bs), N);
  Matrix mask = Matrix::Zero(Bs, m);
  std::vector<int> real_rows;
  int offset = 0;
  std::vector<int> section_offsets;
  for (Eigen::Index s = 0; s < Bs; ++s) {
    const auto count = static_cast<Eigen::Index>(sections[static_cast<std::size_t>(s)]->sentences.size());
    for (Eigen::Index j = 0; j < count; ++j) {
      rows[static_cast<std::size_t>(j * Bs + s)] = offset + static_cast<int>(j);
      mask(s, j) = 1.0;
    }
    offset += static_cast<int>(count);
  }
  for (Eigen::Index s = 0; s < Bs; ++s) {
    const auto count = static_cast<Eigen::Index>(sections[static_cast<std::size_t>(s)]->sentences.size());
    for (Eigen::Index j = 0; j < count; ++j) real_rows.push_back(static_cast<int>(j * Bs + s));
  }
  SequenceBatch upper{tensor::gather_rows(padded, rows), mask, static_cast<int>(Bs),
                      static_cast<int>(m)};
  Var upper_states = bilstm_encode(tape, upper, *upper_fwd_, *upper_bwd_);
  Var per_sentence = tensor::gather_rows(upper_states, real_rows);

  BatchOutput out;
  out.probs = output_probs(tape, per_sentence, run);
  out.attention = std::move(enc.attention);
  for (const auto& inst : all) {
    const auto& g = inst.section->sentences[static_cast<std::size_t>(inst.sentence)].gold;
    out.gold.push_back(g ? text::label_index(*g) : -1);
  }
  return out;
}

Var Model::classify_flat(Tape& tape, const text::Sentence& sentence) const {
  if (config_.variant != ModelVariant::BiLstm && config_.variant != ModelVariant::BiLstmAtt)
    throw std::invalid_argument("classify_flat needs a BILSTM or BILSTM-ATT model");
  text::Section holder;
  holder.sentences.push_back(sentence);
  return forward_instances(tape, {Instance{&holder, 0}}, RunOptions{}).probs;
}

Var Model::classify_with_context(Tape& tape, const text::Section& section, int index) const {
  if (config_.variant != ModelVariant::XBiLstmAtt)
    throw std::invalid_argument("classify_with_context needs an X-BILSTM-ATT model");
  return forward_instances(tape, {Instance{&section, index}}, RunOptions{}).probs;
}

Var Model::classify_section_hier(Tape& tape, const text::Section& section) const {
  if (config_.variant != ModelVariant::HBiLstmAtt)
    throw std::invalid_argument("classify_section_hier needs an H-BILSTM-ATT model");
  if (section.sentences.empty() || section.sentences.size() > text::kMaxSectionSentences)
    throw std::invalid_argument("section must hold 1 to 15 sentences");
  return forward_sections(tape, {&section}, RunOptions{}).probs;
}

long long lstm_cell_parameters(long long input_dim, long long hidden) {
  return 4 * (input_dim * hidden + hidden * hidden + hidden);
}

ParameterCount count_parameters(const ModelConfig& config, long long vocab_size) {
  ParameterCount count;
  const long long u = config.hidden;
  const long long n_pos = static_cast<long long>(text::pos_tags().size());
  const auto& d = config.dims;
  if (config.train_words) count.items["embeddings.word"] = vocab_size * d.word;
  count.items["embeddings.pos"] = n_pos * d.pos;
  count.items["embeddings.shape"] = static_cast<long long>(text::kNumShapes) * d.shape;
  count.items["embeddings.unk"] = n_pos * d.word;
  count.items["encoder"] = 2 * lstm_cell_parameters(d.total(), u);
  if (has_attention(config.variant)) count.items["attention"] = 2 * u + 1;
  if (config.variant == ModelVariant::HBiLstmAtt)
    count.items["upper"] = 2 * lstm_cell_parameters(2 * u, u);
  count.items["output"] = 2 * u * config.classes + config.classes;
  for (const auto& [name, n] : count.items) count.total += n;
  return count;
}

long long trainable_scalars(const Model& model) {
  long long total = 0;
  for (const Parameter* p : model.parameters())
    if (p->trainable) total += p->size();
  return total;
}

}  // namespace deontic::models
