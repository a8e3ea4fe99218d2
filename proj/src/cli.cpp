#include "deontic/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "deontic/corpus.hpp"
#include "deontic/evaluation.hpp"
#include "deontic/io.hpp"
#include "deontic/training.hpp"

namespace deontic::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DEONTIC_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("DEONTIC_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  std::filesystem::path p = out;
  p += suffix;
  return p;
}

void write_manifest(const std::filesystem::path& out, const std::string& command, json config,
                    std::uint64_t seed, json inputs, json outputs, json timings) {
  json m = {{"command", command},
            {"config", std::move(config)},
            {"seed", seed},
            {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)},
            {"tool_version", kToolVersion},
            {"timings", std::move(timings)}};
  io::write_file_atomic(sibling(out, ".manifest.json"), m.dump(2) + "\n");
}

std::vector<std::string> class_names() {
  std::vector<std::string> names;
  for (int k = 0; k < text::kNumClasses; ++k)
    names.emplace_back(text::label_title(text::label_from_index(k)));
  return names;
}

models::ModelVariant variant_or_usage(const std::string& name) {
  if (auto v = models::parse_variant(name)) return *v;
  std::string valid;
  for (auto v : models::all_variants()) valid += (valid.empty() ? "" : ", ") + std::string(models::variant_name(v));
  throw UsageError("unknown model '" + name + "'; valid names: " + valid);
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// ---- synth ------------------------------------------------------------

struct SynthArgs {
  std::size_t sections = 0;
  std::uint64_t seed = 0;
  std::string out;
  double prohibition_rate = 0.4;
  std::size_t duplicates = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  corpus::SynthOptions opts;
  opts.prohibition_list_rate = a.prohibition_rate;
  corpus::SynthStats stats;
  corpus::Corpus c = corpus::generate_synthetic(a.sections, a.seed, opts, &stats);
  if (a.duplicates > 0) corpus::inject_near_duplicates(c, a.duplicates, 0.9, a.seed + 1);
  corpus::write_corpus(c, a.out);
  json counts = json::object();
  for (int k = 0; k < text::kNumClasses; ++k)
    counts[std::string(text::label_name(text::label_from_index(k)))] = stats.label_counts[static_cast<std::size_t>(k)];
  write_manifest(a.out, "synth",
                 {{"sections", a.sections}, {"prohibition_list_rate", a.prohibition_rate},
                  {"near_duplicates", a.duplicates}, {"list_items", stats.list_items},
                  {"intro_dependent_items", stats.intro_dependent_items}, {"label_counts", counts}},
                 a.seed, json::array(), {a.out}, {{"total_seconds", seconds_since(start)}});
  out << "wrote " << c.sections.size() << " sections (" << c.sentence_count() << " sentences) to "
      << a.out << "\n";
  return kOk;
}

// ---- split ------------------------------------------------------------

struct SplitArgs {
  std::string input;
  double threshold = 0.8;
  std::string ratios = "0.70,0.18,0.12";
  std::uint64_t seed = 0;
  std::string out;
  std::string level = "char";
  std::string corpus_prefix;
};

std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> r{};
  std::stringstream in(s);
  std::string part;
  int i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 3) throw UsageError("--ratios needs exactly three values");
    try {
      r[static_cast<std::size_t>(i++)] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("--ratios: not a number: " + part);
    }
  }
  if (i != 3) throw UsageError("--ratios needs exactly three values");
  const double sum = r[0] + r[1] + r[2];
  if (r[0] <= 0 || r[1] <= 0 || r[2] <= 0 || std::abs(sum - 1.0) > 1e-6)
    throw UsageError("--ratios must be positive and sum to 1");
  return r;
}

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const auto ratios = parse_ratios(a.ratios);
  const auto level = a.level == "token" ? corpus::DistanceLevel::Token : corpus::DistanceLevel::Character;
  corpus::Corpus c = corpus::read_corpus(a.input);
  std::vector<std::string> texts;
  std::vector<std::size_t> weights;
  for (const auto& s : c.sections) {
    texts.push_back(s.joined_text());
    weights.push_back(s.sentences.size());
  }
  const auto t_cluster = Clock::now();
  auto clusters = corpus::cluster_texts(texts, a.threshold, level);
  const double cluster_seconds = seconds_since(t_cluster);
  auto assignment = corpus::assign_splits(clusters, weights, ratios, a.seed);
  const auto t_leak = Clock::now();
  auto leaks = corpus::find_leaks(texts, assignment.of_section, a.threshold, level);
  const double leak_seconds = seconds_since(t_leak);
  for (const auto& w : assignment.warnings) err << "warning: " << w << "\n";

  std::ostringstream tsv;
  tsv << "doc_id\tsection_id\tsplit\n";
  std::array<std::size_t, 3> sentences{};
  for (std::size_t i = 0; i < c.sections.size(); ++i) {
    tsv << c.sections[i].doc_id << '\t' << c.sections[i].section_id << '\t'
        << corpus::split_name(assignment.of_section[i]) << '\n';
    sentences[static_cast<std::size_t>(assignment.of_section[i])] += weights[i];
  }
  io::write_file_atomic(a.out, tsv.str());
  json outputs = json::array({a.out});
  if (!a.corpus_prefix.empty()) {
    for (auto s : {corpus::Split::Train, corpus::Split::Dev, corpus::Split::Test}) {
      const std::string path = a.corpus_prefix + "." + std::string(corpus::split_name(s)) + ".jsonl";
      corpus::write_corpus(corpus::select_split(c, assignment.of_section, s), path);
      outputs.push_back(path);
    }
  }
  json leak_list = json::array();
  for (const auto& l : leaks)
    leak_list.push_back({{"a", c.sections[static_cast<std::size_t>(l.a)].section_id},
                         {"b", c.sections[static_cast<std::size_t>(l.b)].section_id},
                         {"similarity", l.similarity}});
  write_manifest(a.out, "split",
                 {{"threshold", a.threshold}, {"ratios", ratios}, {"level", a.level},
                  {"clusters", clusters.clusters.size()},
                  {"sentences", {{"train", sentences[0]}, {"dev", sentences[1]}, {"test", sentences[2]}}},
                  {"warnings", assignment.warnings},
                  {"leak_check", {{"pairs_checked", texts.size() * (texts.size() - (texts.empty() ? 0 : 1)) / 2},
                                  {"leaks", leak_list}, {"passed", leaks.empty()}}}},
                 a.seed, {a.input}, outputs,
                 {{"cluster_seconds", cluster_seconds}, {"leak_check_seconds", leak_seconds},
                  {"total_seconds", seconds_since(start)}});
  out << clusters.clusters.size() << " clusters; sentences train/dev/test = " << sentences[0] << "/"
      << sentences[1] << "/" << sentences[2] << "; leaks: " << leaks.size() << "\n";
  return leaks.empty() ? kOk : kRuntimeError;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
  std::string model;
  std::string train;
  std::string dev;
  bool grid = false;
  std::uint64_t seed = 0;
  std::string out;
  int hidden = 100;
  int batch_size = 16;
  double dropout = 0.5;
  double learning_rate = 0.001;
  int epochs = 50;
  int patience = 3;
  int context = 150;
  std::string embeddings;
  int word_dim = 200;
  bool train_words = false;
  int threads = 1;
};

json config_json(const train::TrainConfig& c) {
  return {{"model", models::variant_name(c.variant)},
          {"hidden", c.hidden},
          {"context", c.context},
          {"word_dim", c.dims.word},
          {"pos_dim", c.dims.pos},
          {"shape_dim", c.dims.shape},
          {"train_words", c.train_words},
          {"batch_size", c.batch_size},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience ? json(*c.patience) : json(nullptr)},
          {"seed", c.seed}};
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  train::TrainConfig cfg;
  cfg.variant = variant_or_usage(a.model);
  cfg.hidden = a.hidden;
  cfg.batch_size = a.batch_size;
  cfg.dropout = a.dropout;
  cfg.learning_rate = a.learning_rate;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.context = a.context;
  cfg.dims.word = a.word_dim;
  cfg.train_words = a.train_words;
  cfg.seed = a.seed;

  corpus::Corpus train_c = corpus::read_corpus(a.train);
  corpus::Corpus dev_c = corpus::read_corpus(a.dev);
  std::optional<embed::LoadResult> pretrained;
  if (!a.embeddings.empty()) pretrained = embed::load_pretrained(a.embeddings, a.word_dim);

  json grid_json = nullptr;
  if (a.grid) {
    auto gr = train::grid_search(cfg, {}, train_c, dev_c, a.threads);
    grid_json = json::array();
    for (const auto& cell : gr.cells)
      grid_json.push_back({{"hidden", cell.config.hidden}, {"batch_size", cell.config.batch_size},
                           {"dropout", cell.config.dropout}, {"seed", cell.config.seed},
                           {"dev_loss", cell.dev_loss}, {"best_epoch", cell.best_epoch}});
    cfg = gr.cells[static_cast<std::size_t>(gr.best)].config;
    out << "grid: " << gr.cells.size() << " cells, best hidden=" << cfg.hidden
        << " batch=" << cfg.batch_size << " dropout=" << cfg.dropout << "\n";
  }

  models::Model model = train::build_model(cfg, train_c, pretrained ? &pretrained->vectors : nullptr);
  train::FitHooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& r) {
    out << "epoch " << r.epoch << "  train " << std::fixed << std::setprecision(4) << r.train_loss
        << "  dev " << r.dev_loss << "  " << std::setprecision(1) << r.seconds << "s\n"
        << std::defaultfloat << std::flush;
    return false;
  };
  const auto t_fit = Clock::now();
  train::FitResult fr = train::fit(model, train_c, dev_c, cfg, hooks);
  const double fit_seconds = seconds_since(t_fit);
  models::save_checkpoint(model, a.out);

  auto counts = models::count_parameters(model.config(), static_cast<long long>(model.embeddings().vocabulary().size()));
  json epochs = json::array();
  json epoch_seconds = json::array();
  for (const auto& r : fr.history) {
    epochs.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev_loss", r.dev_loss},
                      {"seconds", r.seconds}});
    epoch_seconds.push_back(r.seconds);
  }
  json report = {{"config", config_json(cfg)},
                 {"best_epoch", fr.best_epoch},
                 {"best_dev_loss", fr.best_dev_loss},
                 {"stopped_early", fr.stopped_early},
                 {"epochs", epochs},
                 {"parameters", {{"items", counts.items}, {"total", counts.total}}},
                 {"training_seconds", fit_seconds},
                 {"grid", grid_json}};
  const auto report_path = sibling(a.out, ".report.json");
  io::write_file_atomic(report_path, report.dump(2) + "\n");
  json inputs = {a.train, a.dev};
  if (!a.embeddings.empty()) inputs.push_back(a.embeddings);
  json cfg_out = config_json(cfg);
  cfg_out["grid"] = a.grid;
  cfg_out["threads"] = a.threads;
  write_manifest(a.out, "train", cfg_out, cfg.seed, inputs, {a.out, report_path.string()},
                 {{"epoch_seconds", epoch_seconds}, {"fit_seconds", fit_seconds},
                  {"total_seconds", seconds_since(start)}});
  out << "best epoch " << fr.best_epoch << " (dev loss " << fr.best_dev_loss << "); " << counts.total
      << " trainable parameters; checkpoint " << a.out << "\n";
  return kOk;
}

// ---- eval -------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string test;
  std::string report;
  bool micro_excludes_none = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  models::Model model = models::load_checkpoint(a.model);
  if (model.config().classes != text::kNumClasses)
    throw std::runtime_error("model predicts " + std::to_string(model.config().classes) +
                             " classes but the corpus label set has " + std::to_string(text::kNumClasses));
  corpus::Corpus test = corpus::read_corpus(a.test);
  train::Predictions pred = train::predict(model, test);
  std::vector<int> rows, gold;
  for (std::size_t i = 0; i < pred.gold.size(); ++i) {
    if (pred.gold[i] < 0) continue;
    rows.push_back(static_cast<int>(i));
    gold.push_back(pred.gold[i]);
  }
  if (rows.empty()) throw std::runtime_error("test corpus has no labeled sentences");
  tensor::Matrix probs(static_cast<Eigen::Index>(rows.size()), pred.probs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) probs.row(static_cast<Eigen::Index>(i)) = pred.probs.row(rows[i]);
  eval::EvalOptions opts;
  opts.micro_includes_none = !a.micro_excludes_none;
  auto report = eval::evaluate(probs, gold, class_names(), opts);
  const std::string table =
      eval::format_table(report, std::string(models::variant_name(model.config().variant)));
  io::write_file_atomic(a.report, table);
  const auto json_path = sibling(a.report, ".json");
  io::write_file_atomic(json_path, eval::report_json(report) + "\n");
  write_manifest(a.report, "eval", {{"micro_includes_none", opts.micro_includes_none},
                                    {"sentences", rows.size()}},
                 0, {a.model, a.test}, {a.report, json_path.string()},
                 {{"total_seconds", seconds_since(start)}});
  out << table;
  return kOk;
}

// ---- heatmap ----------------------------------------------------------

struct HeatmapArgs {
  std::string model;
  std::string input;
  std::string format = "html";
  std::string out;
};

int ansi_level(double intensity) { return std::clamp(static_cast<int>(intensity * 8.0), 0, 7); }

int cmd_heatmap(const HeatmapArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  if (a.format != "html" && a.format != "ansi") throw UsageError("--format must be html or ansi");
  models::Model model = models::load_checkpoint(a.model);
  if (!models::has_attention(model.config().variant)) throw std::runtime_error("model has no attention");
  corpus::Corpus input = corpus::read_corpus(a.input);
  train::Predictions pred = train::predict(model, input);
  const auto names = class_names();

  std::ostringstream doc;
  if (a.format == "html") {
    doc << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>attention</title>\n"
        << "<style>body{font-family:sans-serif}.s{margin:.4em 0}.t{padding:1px 2px;"
           "border-radius:2px}.meta{color:#666;font-size:80%}</style></head><body>\n";
  }
  // One block per sentence; palette steps go light to dark.
  static const int kAnsiGrey[8] = {255, 253, 251, 249, 246, 243, 240, 237};
  std::size_t row = 0;
  for (const auto& sec : input.sections) {
    for (const auto& s : sec.sentences) {
      const tensor::RowVector& scores = pred.attention.at(row);
      const int predicted = eval::argmax(pred.probs.row(static_cast<Eigen::Index>(row)));
      const double peak = scores.size() > 0 ? scores.maxCoeff() : 1.0;
      if (a.format == "html") {
        doc << "<div class=\"s\" data-section=\"" << html_escape(sec.section_id) << "\" data-predicted=\""
            << html_escape(names[static_cast<std::size_t>(predicted)]) << "\"";
        if (s.gold) doc << " data-gold=\"" << html_escape(names[static_cast<std::size_t>(text::label_index(*s.gold))]) << "\"";
        doc << ">";
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
          const double score = scores(static_cast<Eigen::Index>(t));
          const double intensity = peak > 0 ? score / peak : 0.0;
          doc << "<span class=\"t\" data-score=\"" << std::setprecision(17) << score
              << "\" style=\"background:rgba(220,40,40," << std::setprecision(4) << intensity << ")\">"
              << html_escape(s.tokens[t].surface) << "</span> ";
        }
        doc << "<span class=\"meta\">[" << html_escape(names[static_cast<std::size_t>(predicted)]) << "]</span></div>\n";
      } else {
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
          const double score = scores(static_cast<Eigen::Index>(t));
          const int level = ansi_level(peak > 0 ? score / peak : 0.0);
          doc << "\x1b[48;5;" << kAnsiGrey[level] << "m\x1b[38;5;" << (level >= 5 ? 231 : 16) << "m"
              << s.tokens[t].surface << "\x1b[0m ";
        }
        doc << " [" << names[static_cast<std::size_t>(predicted)] << "]\n";
      }
      ++row;
    }
  }
  if (a.format == "html") doc << "</body></html>\n";
  io::write_file_atomic(a.out, doc.str());
  write_manifest(a.out, "heatmap", {{"format", a.format}, {"sentences", row}}, 0, {a.model, a.input},
                 {a.out}, {{"total_seconds", seconds_since(start)}});
  out << "rendered " << row << " sentences to " << a.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deontic sentence classification toolkit", "deontic"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::uint64_t seed = 0;
  bool seed_given = false;
  auto seed_opt = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) {
      seed = s;
      seed_given = true;
    }, "random seed (default: $DEONTIC_SEED or 0)");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic contract corpus");
  s_synth->add_option("--sections", synth.sections, "number of sections")->required()->check(CLI::PositiveNumber);
  s_synth->add_option("--out", synth.out, "output JSONL")->required();
  s_synth->add_option("--prohibition-rate", synth.prohibition_rate, "share of prohibitive clause lists")
      ->check(CLI::Range(0.0, 1.0));
  s_synth->add_option("--near-duplicates", synth.duplicates, "perturbed copies to append");
  seed_opt(s_synth);

  SplitArgs split;
  auto* s_split = app.add_subcommand("split", "leak-free train/dev/test split");
  s_split->add_option("--input", split.input, "corpus JSONL")->required();
  s_split->add_option("--threshold", split.threshold, "similarity threshold")->check(CLI::Range(0.0, 1.0));
  s_split->add_option("--ratios", split.ratios, "train,dev,test ratios");
  s_split->add_option("--out", split.out, "output TSV")->required();
  s_split->add_option("--level", split.level, "distance level")->check(CLI::IsMember({"char", "token"}));
  s_split->add_option("--corpus-prefix", split.corpus_prefix, "also write PREFIX.{train,dev,test}.jsonl");
  seed_opt(s_split);

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "train a model");
  s_train->add_option("--model", tr.model, "bilstm | bilstm-att | x-bilstm-att | h-bilstm-att")->required();
  s_train->add_option("--train", tr.train, "training corpus")->required();
  s_train->add_option("--dev", tr.dev, "development corpus")->required();
  s_train->add_flag("--grid", tr.grid, "grid-search hidden, batch size and dropout");
  s_train->add_option("--out", tr.out, "checkpoint path")->required();
  s_train->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
  s_train->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  s_train->add_option("--dropout", tr.dropout)->check(CLI::Range(0.0, 0.99));
  s_train->add_option("--lr", tr.learning_rate)->check(CLI::PositiveNumber);
  s_train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  s_train->add_option("--patience", tr.patience)->check(CLI::NonNegativeNumber);
  s_train->add_option("--context", tr.context, "context tokens per side (x-bilstm-att)")->check(CLI::Range(0, 150));
  s_train->add_option("--embeddings", tr.embeddings, "pretrained word vectors (text format)");
  s_train->add_option("--word-dim", tr.word_dim)->check(CLI::PositiveNumber);
  s_train->add_flag("--train-words", tr.train_words, "fine-tune word vectors");
  s_train->add_option("--threads", tr.threads, "grid worker threads")->check(CLI::PositiveNumber);
  seed_opt(s_train);

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "score a checkpoint on a labeled corpus");
  s_eval->add_option("--model", ev.model, "checkpoint")->required();
  s_eval->add_option("--test", ev.test, "test corpus")->required();
  s_eval->add_option("--report", ev.report, "report path (table; JSON at PATH.json)")->required();
  s_eval->add_flag("--micro-excludes-none", ev.micro_excludes_none, "leave None out of micro averages");

  HeatmapArgs hm;
  auto* s_heat = app.add_subcommand("heatmap", "render attention scores");
  s_heat->add_option("--model", hm.model, "checkpoint")->required();
  s_heat->add_option("--input", hm.input, "corpus")->required();
  s_heat->add_option("--format", hm.format, "html | ansi");
  s_heat->add_option("--out", hm.out, "output file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kUsageError;
  }

  try {
    if (!seed_given) seed = default_seed();
    if (s_synth->parsed()) {
      synth.seed = seed;
      return cmd_synth(synth, out);
    }
    if (s_split->parsed()) {
      split.seed = seed;
      return cmd_split(split, out, err);
    }
    if (s_train->parsed()) {
      tr.seed = seed;
      return cmd_train(tr, out);
    }
    if (s_eval->parsed()) return cmd_eval(ev, out);
    if (s_heat->parsed()) return cmd_heatmap(hm, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace deontic::cli
