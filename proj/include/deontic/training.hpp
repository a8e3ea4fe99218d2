#pragma once

// Optimisation: Adam, mini-batch training with dev-loss early stopping,
// and the hyper-parameter grid.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deontic/corpus.hpp"
#include "deontic/embeddings.hpp"
#include "deontic/init.hpp"
#include "deontic/models.hpp"

namespace deontic::train {

using models::DropoutMode;
using models::dropout_apply;
using tensor::Matrix;
using tensor::Parameter;

struct TrainConfig {
  models::ModelVariant variant = models::ModelVariant::BiLstmAtt;
  int hidden = 100;
  int context = 150;
  embed::EmbeddingDims dims;
  bool train_words = false;
  /// Sentences per batch. The hierarchical model packs whole sections up
  /// to this many sentences (a longer section forms a batch of its own).
  int batch_size = 16;
  double dropout = 0.5;
  double learning_rate = 0.001;
  int max_epochs = 50;
  /// Epochs without dev-loss improvement before stopping; empty disables it.
  std::optional<int> patience = 3;
  std::uint64_t seed = 0;

  models::ModelConfig model_config() const;
};

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One bias-corrected Adam update of every trainable parameter from its
/// accumulated grad. Frozen parameters are skipped.
void adam_step(AdamState& state, const std::vector<Parameter*>& params);
/// Same update with gradients passed explicitly, one per parameter.
void adam_step(AdamState& state, const std::vector<Parameter*>& params,
               const std::vector<Matrix>& grads);

/// Builds a freshly initialised model whose vocabulary is every token
/// surface in `train`.
models::Model build_model(const TrainConfig& config, const corpus::Corpus& train,
                          const embed::VectorMap* pretrained_words = nullptr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per sentence
  double dev_loss = 0.0;    // mean per sentence, eval mode
  double seconds = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_dev_loss = 0.0;
  bool stopped_early = false;
};

struct FitHooks {
  /// Called after each epoch; returning true ends training.
  std::function<bool(const EpochRecord&)> on_epoch;
};

/// Trains in place and leaves the model at its best dev-loss epoch.
FitResult fit(models::Model& model, const corpus::Corpus& train, const corpus::Corpus& dev,
              const TrainConfig& config, const FitHooks& hooks = {});

/// Mean cross-entropy per labeled sentence, eval mode.
double dataset_loss(const models::Model& model, const corpus::Corpus& data, int batch_size = 32);

struct Predictions {
  Matrix probs;                // N x k, sentences in corpus order
  std::vector<int> gold;       // -1 where unlabeled
  std::vector<tensor::RowVector> attention;
};

Predictions predict(const models::Model& model, const corpus::Corpus& data, int batch_size = 32);

struct GridSpec {
  std::vector<int> hidden = {100, 200, 300};
  std::vector<int> batch_size = {8, 16, 32};
  std::vector<double> dropout = {0.4, 0.5, 0.6};
};

struct GridCell {
  TrainConfig config;
  double dev_loss = 0.0;
  int best_epoch = 0;
};

struct GridResult {
  std::vector<GridCell> cells;  // grid order
  int best = 0;
};

/// Trains one model per grid point (cell i seeded with base.seed + i) and
/// picks the lowest dev loss. Ties prefer smaller hidden, then larger
/// batch, then lower dropout. `threads` > 1 trains cells concurrently.
GridResult grid_search(const TrainConfig& base, const GridSpec& grid, const corpus::Corpus& train,
                       const corpus::Corpus& dev, int threads = 1);

}  // namespace deontic::train
