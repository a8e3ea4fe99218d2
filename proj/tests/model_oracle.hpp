#pragma once

// Straight-line reference computations written without the tape, used as
// oracles for the batched model code.

#include <cmath>
#include <vector>

#include "deontic/models.hpp"

namespace deontic::testing {

using tensor::Matrix;
using tensor::RowVector;

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One LSTM step with explicit scalar loops.
inline void scalar_lstm_step(const RowVector& x, RowVector& h, RowVector& c, const models::LstmCellParams& p) {
  const int u = p.hidden();
  const int d = p.input_dim();
  RowVector hn(u), cn(u);
  for (int j = 0; j < u; ++j) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const int col = g * u + j;
      double s = p.b.value(0, col);
      for (int k = 0; k < d; ++k) s += x(k) * p.W.value(k, col);
      for (int k = 0; k < u; ++k) s += h(k) * p.U.value(k, col);
      z[g] = s;
    }
    const double i = sigm(z[0]), f = sigm(z[1]), g = std::tanh(z[2]), o = sigm(z[3]);
    cn(j) = f * c(j) + i * g;
    hn(j) = o * std::tanh(cn(j));
  }
  h = hn;
  c = cn;
}

/// n x 2u states of a BiLSTM over the rows of `xs`.
inline Matrix reference_bilstm(const Matrix& xs, const models::LstmCellParams& fwd,
                               const models::LstmCellParams& bwd) {
  const auto n = xs.rows();
  const int u = fwd.hidden();
  Matrix out(n, 2 * u);
  RowVector h = RowVector::Zero(u), c = RowVector::Zero(u);
  for (Eigen::Index t = 0; t < n; ++t) {
    scalar_lstm_step(xs.row(t), h, c, fwd);
    out.block(t, 0, 1, u) = h;
  }
  h.setZero();
  c.setZero();
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    scalar_lstm_step(xs.row(t), h, c, bwd);
    out.block(t, u, 1, u) = h;
  }
  return out;
}

/// Attention weights over rows [begin, end) of the states.
inline RowVector reference_attention(const Matrix& states, const models::AttentionParams& a, Eigen::Index begin,
                                     Eigen::Index end) {
  RowVector logits(end - begin);
  for (Eigen::Index t = begin; t < end; ++t)
    logits(t - begin) = std::tanh((states.row(t) * a.v.value)(0, 0) + a.b.value(0, 0));
  RowVector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline RowVector reference_softmax_lr(const RowVector& h, const models::LinearParams& lr) {
  RowVector z = h * lr.W.value + lr.b.value;
  RowVector e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline Matrix reference_embed(const models::Model& m, const std::vector<const text::TokenRecord*>& toks) {
  Matrix xs(static_cast<Eigen::Index>(toks.size()), m.embeddings().dims().total());
  for (std::size_t t = 0; t < toks.size(); ++t) xs.row(static_cast<Eigen::Index>(t)) = m.embeddings().lookup(*toks[t]);
  return xs;
}

/// Sentence vector of the flat and windowed variants.
inline RowVector reference_sentence_vector(const models::Model& m, const text::Section& sec, int index) {
  const auto& cfg = m.config();
  std::vector<const text::TokenRecord*> toks;
  Eigen::Index begin = 0, end = 0;
  if (cfg.variant == models::ModelVariant::XBiLstmAtt) {
    auto [window, range] = models::context_window(sec, index, cfg.context);
    toks = window;
    begin = range.first;
    end = range.second;
  } else {
    for (const auto& t : sec.sentences[static_cast<std::size_t>(index)].tokens) toks.push_back(&t);
    end = static_cast<Eigen::Index>(toks.size());
  }
  const Matrix states = reference_bilstm(reference_embed(m, toks), m.encoder_fwd(), m.encoder_bwd());
  const int u = cfg.hidden;
  if (!m.attention()) {
    RowVector h(2 * u);
    h.head(u) = states.block(end - 1, 0, 1, u);
    h.tail(u) = states.block(begin, u, 1, u);
    return h;
  }
  const RowVector a = reference_attention(states, *m.attention(), begin, end);
  RowVector h = RowVector::Zero(2 * u);
  for (Eigen::Index t = begin; t < end; ++t) h += a(t - begin) * states.row(t);
  return h;
}

/// m x k probabilities for every sentence of a section, any variant.
inline Matrix reference_section_probs(const models::Model& m, const text::Section& sec) {
  const auto n = static_cast<Eigen::Index>(sec.sentences.size());
  Matrix vecs(n, 2 * m.config().hidden);
  for (Eigen::Index i = 0; i < n; ++i) vecs.row(i) = reference_sentence_vector(m, sec, static_cast<int>(i));
  if (m.config().variant == models::ModelVariant::HBiLstmAtt)
    vecs = reference_bilstm(vecs, *m.upper_fwd(), *m.upper_bwd());
  Matrix out(n, m.config().classes);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = reference_softmax_lr(vecs.row(i), m.output());
  return out;
}

}  // namespace deontic::testing
