#include "deontic/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "deontic/init.hpp"

namespace deontic::embed {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_header(const std::vector<std::string>& fields) {
  if (fields.size() != 2) return false;
  for (const auto& f : fields)
    if (f.empty() || !std::all_of(f.begin(), f.end(), [](char c) { return c >= '0' && c <= '9'; }))
      return false;
  return true;
}

// Fills rows of `table` from `source` by symbol name, leaving other rows.
void fill_rows(Matrix& table, const std::vector<std::string>& names, const VectorMap* source,
               const char* what) {
  if (source == nullptr) return;
  for (std::size_t r = 0; r < names.size(); ++r) {
    const auto it = source->find(names[r]);
    if (it == source->end()) continue;
    if (it->second.size() != table.cols())
      throw ConfigurationError(std::string(what) + " vector for '" + names[r] + "' has dimension " +
                               std::to_string(it->second.size()) + ", expected " +
                               std::to_string(table.cols()));
    table.row(static_cast<Eigen::Index>(r)) = it->second;
  }
}

std::vector<std::string> shape_names() {
  std::vector<std::string> out;
  for (int i = 0; i < text::kNumShapes; ++i)
    out.emplace_back(text::shape_name(static_cast<text::Shape>(i)));
  return out;
}

}  // namespace

LoadResult load_pretrained(const std::filesystem::path& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read embeddings file " + path.string());
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields_in(line);
    std::vector<std::string> fields;
    for (std::string f; fields_in >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;
    if (line_no == 1 && is_header(fields)) continue;
    const int got = static_cast<int>(fields.size()) - 1;
    if (got != expected_dim)
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected_dim) + " values, found " + std::to_string(got));
    RowVector v(expected_dim);
    for (int i = 0; i < expected_dim; ++i) {
      try {
        std::size_t used = 0;
        v(i) = std::stod(fields[static_cast<std::size_t>(i) + 1], &used);
        if (used != fields[static_cast<std::size_t>(i) + 1].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                          fields[static_cast<std::size_t>(i) + 1] + "'");
      }
    }
    auto [it, inserted] = result.vectors.insert_or_assign(fields.front(), std::move(v));
    if (!inserted) ++result.duplicates;
  }
  return result;
}

VectorMap random_table(const std::vector<std::string>& vocab, int dim, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("random_table: dim must be positive");
  Rng rng(seed);
  VectorMap out;
  for (const std::string& token : vocab) {
    RowVector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.uniform(-0.05, 0.05);
    out.insert_or_assign(token, std::move(v));
  }
  return out;
}

EmbeddingTable EmbeddingTable::create(const std::vector<std::string>& vocab,
                                      const TableOptions& options) {
  const EmbeddingDims& d = options.dims;
  if (d.word <= 0 || d.pos <= 0 || d.shape <= 0)
    throw ConfigurationError("embedding dimensions must be positive");
  std::vector<std::string> words;
  std::unordered_map<std::string, int> seen;
  for (const auto& w : vocab)
    if (seen.emplace(w, static_cast<int>(words.size())).second) words.push_back(w);

  Rng rng(options.seed);
  const VectorMap random_words = random_table(words, d.word, rng.next());
  Matrix word_values(static_cast<Eigen::Index>(words.size()), d.word);
  for (std::size_t r = 0; r < words.size(); ++r) {
    const VectorMap* src = options.pretrained_words;
    auto it = src != nullptr ? src->find(words[r]) : VectorMap::const_iterator{};
    if (src != nullptr && it != src->end()) {
      if (it->second.size() != d.word)
        throw ConfigurationError("pretrained word vector for '" + words[r] + "' has dimension " +
                                 std::to_string(it->second.size()));
      word_values.row(static_cast<Eigen::Index>(r)) = it->second;
    } else {
      word_values.row(static_cast<Eigen::Index>(r)) = random_words.at(words[r]);
    }
  }

  const auto& tags = text::pos_tags();
  const auto n_pos = static_cast<long>(tags.size());
  Matrix pos_values = train::glorot_init(n_pos, d.pos, rng);
  fill_rows(pos_values, tags, options.pretrained_pos, "POS");
  Matrix shape_values = train::glorot_init(text::kNumShapes, d.shape, rng);
  fill_rows(shape_values, shape_names(), options.pretrained_shapes, "shape");
  std::vector<std::string> unk_names;
  for (const auto& t : tags) unk_names.push_back("unk-" + t);
  Matrix unk_values(n_pos, d.word);
  for (Eigen::Index i = 0; i < unk_values.size(); ++i) unk_values.data()[i] = rng.uniform(-0.05, 0.05);
  fill_rows(unk_values, unk_names, options.pretrained_words, "unk");

  EmbeddingTable table;
  table.restore(std::move(words), d,
                tensor::Parameter("emb.word", std::move(word_values), options.train_words),
                tensor::Parameter("emb.pos", std::move(pos_values)),
                tensor::Parameter("emb.shape", std::move(shape_values)),
                tensor::Parameter("emb.unk", std::move(unk_values)));
  return table;
}

void EmbeddingTable::restore(std::vector<std::string> words, EmbeddingDims dims,
                             tensor::Parameter word_table, tensor::Parameter pos_table,
                             tensor::Parameter shape_table, tensor::Parameter unk_table) {
  const auto n_pos = static_cast<Eigen::Index>(text::pos_tags().size());
  auto check = [](const tensor::Parameter& p, Eigen::Index rows, Eigen::Index cols) {
    if (p.value.rows() != rows || p.value.cols() != cols)
      throw ConfigurationError(p.name + " has shape " + tensor::shape_string(p.value) +
                               ", expected " + tensor::shape_string(rows, cols));
  };
  check(word_table, static_cast<Eigen::Index>(words.size()), dims.word);
  check(pos_table, n_pos, dims.pos);
  check(shape_table, text::kNumShapes, dims.shape);
  check(unk_table, n_pos, dims.word);
  dims_ = dims;
  words_ = std::move(words);
  index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<int>(i));
  word_table_ = std::move(word_table);
  pos_table_ = std::move(pos_table);
  shape_table_ = std::move(shape_table);
  unk_table_ = std::move(unk_table);
}

std::optional<int> EmbeddingTable::word_row(const std::string& surface) const {
  if (auto it = index_.find(surface); it != index_.end()) return it->second;
  if (auto it = index_.find(lower(surface)); it != index_.end()) return it->second;
  return std::nullopt;
}

EmbeddingTable::RowRefs EmbeddingTable::resolve(const text::TokenRecord& token) const {
  RowRefs refs;
  refs.pos = text::pos_index(token.pos);
  if (refs.pos < 0) throw ConfigurationError("no POS embedding for tag '" + token.pos + "'");
  refs.shape = static_cast<int>(token.shape);
  if (refs.shape < 0 || refs.shape >= text::kNumShapes)
    throw ConfigurationError("no shape embedding for token '" + token.surface + "'");
  if (auto row = word_row(token.surface)) refs.word = *row;
  return refs;
}

RowVector EmbeddingTable::lookup(const text::TokenRecord& token) const {
  const RowRefs refs = resolve(token);
  RowVector out(dims_.total());
  if (refs.word >= 0) out.head(dims_.word) = word_table_.value.row(refs.word);
  else out.head(dims_.word) = unk_table_.value.row(refs.pos);
  out.segment(dims_.word, dims_.pos) = pos_table_.value.row(refs.pos);
  out.tail(dims_.shape) = shape_table_.value.row(refs.shape);
  return out;
}

tensor::Var EmbeddingTable::embed_rows(
    tensor::Tape& tape, const std::vector<std::vector<const text::TokenRecord*>>& sequences,
    std::size_t steps) const {
  const std::size_t batch = sequences.size();
  const int dw = dims_.word, dp = dims_.pos, ds = dims_.shape;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(steps * batch), dims_.total());
  std::vector<std::pair<Eigen::Index, RowRefs>> rows;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < sequences[b].size() && t < steps; ++t) {
      const RowRefs refs = resolve(*sequences[b][t]);
      const auto r = static_cast<Eigen::Index>(t * batch + b);
      if (refs.word >= 0) out.row(r).head(dw) = word_table_.value.row(refs.word);
      else out.row(r).head(dw) = unk_table_.value.row(refs.pos);
      out.row(r).segment(dw, dp) = pos_table_.value.row(refs.pos);
      out.row(r).tail(ds) = shape_table_.value.row(refs.shape);
      rows.emplace_back(r, refs);
    }
  }
  const bool needs = word_table_.trainable || pos_table_.trainable || shape_table_.trainable ||
                     unk_table_.trainable;
  return tape.record_external(std::move(out), needs,
                              [this, rows = std::move(rows), dw, dp, ds](tensor::Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (const auto& [r, refs] : rows) {
      if (refs.word >= 0) {
        if (word_table_.trainable) word_table_.grad.row(refs.word) += g.row(r).head(dw);
      } else if (unk_table_.trainable) {
        unk_table_.grad.row(refs.pos) += g.row(r).head(dw);
      }
      if (pos_table_.trainable) pos_table_.grad.row(refs.pos) += g.row(r).segment(dw, dp);
      if (shape_table_.trainable) shape_table_.grad.row(refs.shape) += g.row(r).tail(ds);
    }
  });
}

tensor::Var EmbeddingTable::embed_sentence(tensor::Tape& tape,
                                           const std::vector<text::TokenRecord>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("embed_sentence: empty sentence");
  std::vector<const text::TokenRecord*> seq;
  for (const auto& t : tokens) seq.push_back(&t);
  return embed_rows(tape, {seq}, tokens.size());
}

std::vector<tensor::Parameter*> EmbeddingTable::parameters() {
  return {&word_table_, &pos_table_, &shape_table_, &unk_table_};
}

}  // namespace deontic::embed
