#include "deontic/training.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace deontic::train {

namespace {

using models::Instance;
using models::Model;

bool is_hier(const Model& m) { return m.config().variant == models::ModelVariant::HBiLstmAtt; }

std::vector<Instance> all_instances(const corpus::Corpus& data) {
  std::vector<Instance> out;
  for (const auto& sec : data.sections)
    for (int i = 0; i < static_cast<int>(sec.sentences.size()); ++i) out.push_back({&sec, i});
  return out;
}

// Batches of instances. The hierarchical model takes whole sections (one
// instance each), packed until the batch holds batch_size sentences.
std::vector<std::vector<Instance>> make_batches(const Model& model, const corpus::Corpus& data,
                                                int batch_size, Rng* shuffle) {
  std::vector<std::vector<Instance>> batches;
  const auto cap = static_cast<std::size_t>(batch_size);
  if (is_hier(model)) {
    std::vector<Instance> units;
    for (const auto& sec : data.sections)
      if (!sec.sentences.empty()) units.push_back({&sec, 0});
    if (shuffle != nullptr) shuffle->shuffle(units);
    std::size_t filled = 0;
    for (const auto& u : units) {
      const std::size_t n = u.section->sentences.size();
      if (batches.empty() || filled + n > cap) {
        batches.emplace_back();
        filled = 0;
      }
      batches.back().push_back(u);
      filled += n;
    }
    return batches;
  }
  std::vector<Instance> units = all_instances(data);
  if (shuffle != nullptr) shuffle->shuffle(units);
  for (std::size_t i = 0; i < units.size(); i += cap)
    batches.emplace_back(units.begin() + static_cast<std::ptrdiff_t>(i),
                         units.begin() + static_cast<std::ptrdiff_t>(std::min(units.size(), i + cap)));
  return batches;
}

// Sum of cross-entropy over labeled rows, and how many there were.
std::pair<tensor::Var, int> batch_loss(tensor::Tape& tape, const models::BatchOutput& out) {
  std::vector<int> rows, gold;
  for (std::size_t i = 0; i < out.gold.size(); ++i) {
    if (out.gold[i] < 0) continue;
    rows.push_back(static_cast<int>(i));
    gold.push_back(out.gold[i]);
  }
  if (rows.empty()) return {tape.scalar(0.0), 0};
  tensor::Var picked = rows.size() == out.gold.size() ? out.probs : tensor::gather_rows(out.probs, rows);
  return {tensor::cross_entropy_rows(picked, gold), static_cast<int>(rows.size())};
}

std::vector<Matrix> snapshot(const Model& model) {
  std::vector<Matrix> out;
  for (const auto* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore_snapshot(Model& model, const std::vector<Matrix>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

models::ModelConfig TrainConfig::model_config() const {
  models::ModelConfig c;
  c.variant = variant;
  c.hidden = hidden;
  c.context = context;
  c.dims = dims;
  c.train_words = train_words;
  return c;
}

void adam_step(AdamState& state, const std::vector<Parameter*>& params,
               const std::vector<Matrix>& grads) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: one gradient per parameter");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: parameter set changed");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable || grads[i].size() == 0) continue;
    if (grads[i].rows() != p.value.rows() || grads[i].cols() != p.value.cols())
      throw tensor::DimensionError("adam_step: gradient shape differs for " + p.name);
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    p.value.array() -= state.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + state.epsilon);
  }
}

void adam_step(AdamState& state, const std::vector<Parameter*>& params) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const auto* p : params) {
    if (p->grad.rows() == p->value.rows() && p->grad.cols() == p->value.cols())
      grads.push_back(p->grad);
    else
      grads.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  adam_step(state, params, grads);
}

models::Model build_model(const TrainConfig& config, const corpus::Corpus& train,
                          const embed::VectorMap* pretrained_words) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  for (const auto& sec : train.sections)
    for (const auto& s : sec.sentences)
      for (const auto& t : s.tokens)
        if (seen.insert(t.surface).second) vocab.push_back(t.surface);
  embed::TableOptions opts;
  opts.dims = config.dims;
  opts.train_words = config.train_words;
  opts.seed = config.seed;
  opts.pretrained_words = pretrained_words;
  auto table = embed::EmbeddingTable::create(vocab, opts);
  return Model(config.model_config(), std::move(table), config.seed + 1);
}

double dataset_loss(const Model& model, const corpus::Corpus& data, int batch_size) {
  double total = 0.0;
  long long count = 0;
  for (const auto& batch : make_batches(model, data, std::max(1, batch_size), nullptr)) {
    tensor::Tape tape;
    auto out = model.forward_instances(tape, batch, {});
    auto [loss, n] = batch_loss(tape, out);
    total += loss.scalar();
    count += n;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Predictions predict(const Model& model, const corpus::Corpus& data, int batch_size) {
  Predictions out;
  std::vector<Matrix> parts;
  Eigen::Index rows = 0;
  for (const auto& batch : make_batches(model, data, std::max(1, batch_size), nullptr)) {
    tensor::Tape tape;
    auto res = model.forward_instances(tape, batch, {});
    parts.push_back(res.probs.value());
    rows += parts.back().rows();
    out.gold.insert(out.gold.end(), res.gold.begin(), res.gold.end());
    for (auto& a : res.attention) out.attention.push_back(std::move(a));
  }
  out.probs = Matrix::Zero(rows, model.config().classes);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.probs.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

FitResult fit(Model& model, const corpus::Corpus& train, const corpus::Corpus& dev,
              const TrainConfig& config, const FitHooks& hooks) {
  if (train.sections.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.sections.empty()) throw std::invalid_argument("dev corpus is empty");
  if (config.batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (config.max_epochs <= 0) throw std::invalid_argument("max epochs must be positive");
  if (config.patience && *config.patience < 0) throw std::invalid_argument("patience must be >= 0");

  Rng rng(config.seed);
  AdamState adam;
  adam.learning_rate = config.learning_rate;
  auto params = model.parameters();
  FitResult result;
  result.best_dev_loss = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best = snapshot(model);
  int since_best = 0;
  const models::RunOptions run{true, config.dropout, &rng};

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double train_total = 0.0;
    long long train_count = 0;
    for (const auto& batch : make_batches(model, train, config.batch_size, &rng)) {
      tensor::Tape tape;
      auto out = model.forward_instances(tape, batch, run);
      auto [loss, n] = batch_loss(tape, out);
      if (n == 0) continue;
      if (!std::isfinite(loss.scalar()))
        throw std::runtime_error("training loss became non-finite in epoch " + std::to_string(epoch));
      train_total += loss.scalar();
      train_count += n;
      for (auto* p : params) p->zero_grad();
      tape.backward(tensor::scale(loss, 1.0 / n));
      adam_step(adam, params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_count == 0 ? 0.0 : train_total / static_cast<double>(train_count);
    rec.dev_loss = dataset_loss(model, dev);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.dev_loss))
      throw std::runtime_error("dev loss became non-finite in epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (rec.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = rec.dev_loss;
      result.best_epoch = epoch;
      best = snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (hooks.on_epoch && hooks.on_epoch(rec)) break;
    if (config.patience && since_best >= *config.patience && epoch < config.max_epochs) {
      result.stopped_early = true;
      break;
    }
  }
  restore_snapshot(model, best);
  return result;
}

GridResult grid_search(const TrainConfig& base, const GridSpec& grid, const corpus::Corpus& train,
                       const corpus::Corpus& dev, int threads) {
  GridResult result;
  for (int h : grid.hidden)
    for (int b : grid.batch_size)
      for (double d : grid.dropout) {
        GridCell cell;
        cell.config = base;
        cell.config.hidden = h;
        cell.config.batch_size = b;
        cell.config.dropout = d;
        cell.config.seed = base.seed + result.cells.size();
        result.cells.push_back(cell);
      }
  if (result.cells.empty()) throw std::invalid_argument("empty hyper-parameter grid");

  auto run_cell = [&](GridCell& cell) {
    Model model = build_model(cell.config, train);
    FitResult fr = fit(model, train, dev, cell.config);
    cell.dev_loss = fr.best_dev_loss;
    cell.best_epoch = fr.best_epoch;
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(result.cells.size())));
  if (workers == 1) {
    for (auto& cell : result.cells) run_cell(cell);
  } else {
    std::size_t next = 0;
    std::mutex lock;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> g(lock);
            if (next >= result.cells.size() || error) return;
            i = next++;
          }
          try {
            run_cell(result.cells[i]);
          } catch (...) {
            std::lock_guard<std::mutex> g(lock);
            error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  auto better = [](const GridCell& a, const GridCell& b) {
    if (a.dev_loss != b.dev_loss) return a.dev_loss < b.dev_loss;
    if (a.config.hidden != b.config.hidden) return a.config.hidden < b.config.hidden;
    if (a.config.batch_size != b.config.batch_size) return a.config.batch_size > b.config.batch_size;
    return a.config.dropout < b.config.dropout;
  };
  for (std::size_t i = 1; i < result.cells.size(); ++i)
    if (better(result.cells[i], result.cells[static_cast<std::size_t>(result.best)]))
      result.best = static_cast<int>(i);
  return result;
}

}  // namespace deontic::train
