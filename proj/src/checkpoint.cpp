#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deontic/io.hpp"
#include "deontic/models.hpp"

namespace deontic::models {

namespace {

using nlohmann::json;

json matrix_json(const Parameter& p) {
  json data = json::array();
  for (Eigen::Index i = 0; i < p.value.size(); ++i) data.push_back(p.value.data()[i]);
  return json{{"name", p.name},
              {"rows", p.value.rows()},
              {"cols", p.value.cols()},
              {"trainable", p.trainable},
              {"data", std::move(data)}};
}

Parameter matrix_from(const json& params, const std::string& name) {
  for (const json& p : params) {
    if (p.at("name").get<std::string>() != name) continue;
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    const json& data = p.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw std::runtime_error("checkpoint parameter " + name + " has " +
                               std::to_string(data.size()) + " values for shape " +
                               tensor::shape_string(rows, cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return Parameter(name, std::move(m), p.value("trainable", true));
  }
  throw std::runtime_error("checkpoint is missing parameter " + name);
}

LstmCellParams cell_from(const json& params, const std::string& prefix) {
  return LstmCellParams{matrix_from(params, prefix + ".W"), matrix_from(params, prefix + ".U"),
                        matrix_from(params, prefix + ".b")};
}

}  // namespace

std::string checkpoint_json(const Model& model) {
  const ModelConfig& c = model.config();
  json classes = json::array();
  for (int i = 0; i < c.classes; ++i) classes.push_back(text::label_name(text::label_from_index(i)));
  json shapes = json::array();
  for (int i = 0; i < text::kNumShapes; ++i) shapes.push_back(text::shape_name(static_cast<text::Shape>(i)));
  json params = json::array();
  for (const Parameter* p : model.parameters()) params.push_back(matrix_json(*p));
  json doc = {
      {"format", "deontic-checkpoint"},
      {"version", "1"},
      {"variant", variant_name(c.variant)},
      {"hidden", c.hidden},
      {"context", c.context},
      {"classes", std::move(classes)},
      {"dims", {{"word", c.dims.word}, {"pos", c.dims.pos}, {"shape", c.dims.shape}}},
      {"train_words", c.train_words},
      {"vocabulary", model.embeddings().vocabulary()},
      {"pos_tags", text::pos_tags()},
      {"shapes", std::move(shapes)},
      {"parameters", std::move(params)},
  };
  return doc.dump(1);
}

Model checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (doc.value("version", std::string()) != "1")
    throw std::runtime_error("unsupported checkpoint version");
  ModelConfig c;
  const auto variant = parse_variant(doc.at("variant").get<std::string>());
  if (!variant) throw std::runtime_error("unknown model variant in checkpoint");
  c.variant = *variant;
  c.hidden = doc.at("hidden").get<int>();
  c.context = doc.at("context").get<int>();
  const auto classes = doc.at("classes").get<std::vector<std::string>>();
  c.classes = static_cast<int>(classes.size());
  if (c.classes != text::kNumClasses)
    throw std::runtime_error("checkpoint class set has " + std::to_string(c.classes) +
                             " classes, expected " + std::to_string(text::kNumClasses));
  for (int i = 0; i < c.classes; ++i)
    if (classes[static_cast<std::size_t>(i)] != text::label_name(text::label_from_index(i)))
      throw std::runtime_error("checkpoint class '" + classes[static_cast<std::size_t>(i)] +
                               "' does not match the known class set");
  if (doc.at("pos_tags").get<std::vector<std::string>>() != text::pos_tags())
    throw std::runtime_error("checkpoint POS inventory differs from this build");
  c.dims.word = doc.at("dims").at("word").get<int>();
  c.dims.pos = doc.at("dims").at("pos").get<int>();
  c.dims.shape = doc.at("dims").at("shape").get<int>();
  c.train_words = doc.value("train_words", false);

  const json& params = doc.at("parameters");
  embed::EmbeddingTable table;
  table.restore(doc.at("vocabulary").get<std::vector<std::string>>(), c.dims,
                matrix_from(params, "emb.word"), matrix_from(params, "emb.pos"),
                matrix_from(params, "emb.shape"), matrix_from(params, "emb.unk"));
  std::optional<AttentionParams> att;
  if (has_attention(c.variant))
    att = AttentionParams{matrix_from(params, "attention.v"), matrix_from(params, "attention.b")};
  std::optional<LstmCellParams> up_f, up_b;
  if (c.variant == ModelVariant::HBiLstmAtt) {
    up_f = cell_from(params, "upper.fwd");
    up_b = cell_from(params, "upper.bwd");
  }
  Model model;
  model.restore(c, std::move(table), cell_from(params, "encoder.fwd"),
                cell_from(params, "encoder.bwd"), std::move(att), std::move(up_f), std::move(up_b),
                LinearParams{matrix_from(params, "output.W"), matrix_from(params, "output.b")});
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, checkpoint_json(model) + "\n");
}

Model load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(io::read_file(path));
}

}  // namespace deontic::models
