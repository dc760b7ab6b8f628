#pragma once

// Cross-entropy training of the fusion model, RMSE evaluation and the
// learning-rate sweep, plus the shared results-table schema.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fusionrec/fusion.hpp"

namespace fusionrec::train {

/// single: the poster slot always uses its missing token. cross: all stores.
enum class ModalityMode { single, cross };

ModalityMode parse_modality_mode(std::string_view name);
std::string_view modality_mode_name(ModalityMode m);

/// Drops the poster store in single mode.
model::ModalityStores stores_for_mode(const model::ModalityStores& stores, ModalityMode mode);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;  // 0 disables early stopping
  std::uint64_t seed = 1;
  ModalityMode mode = ModalityMode::cross;
  bool measure_train_rmse = true;  // final pass over the whole train split; NaN when off

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double mean_loss = 0.0;
  double train_rmse = 0.0;   // from the training-mode predictions of this epoch
  double val_rmse = 0.0;     // NaN when there is no validation split
  double seconds = 0.0;
};

struct EvalReport {
  double rmse_train = 0.0;
  double rmse_val = 0.0;
  double rmse_test = 0.0;
  std::vector<EpochRecord> curve;
  std::size_t epochs = 0;      // epochs actually run
  std::size_t best_epoch = 0;  // epoch whose parameters were kept
  double seconds = 0.0;
};

/// Mean of -log(max(p[rating-1], 1e-12)) over the batch; ratings must be 1..5.
template <typename T>
ad::Var<T> cross_entropy(ad::Var<T> probs, std::span<const int> ratings);

/// sqrt(mean((y - yhat)^2)).
double rmse(std::span<const double> y, std::span<const double> yhat);

/// Expected-rating predictions for `records`, in order.
template <typename T>
std::vector<double> predict(model::FusionModel<T>& model, const features::FeatureTable& table,
                            const model::ModalityStores& stores, std::span<const data::RatingRecord> records,
                            std::size_t batch_size = 256,
                            model::PredictionMode mode = model::PredictionMode::expectation);

template <typename T>
double evaluate_rmse(model::FusionModel<T>& model, const features::FeatureTable& table,
                     const model::ModalityStores& stores, std::span<const data::RatingRecord> records,
                     model::PredictionMode mode = model::PredictionMode::expectation);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on split.train with early stopping on split.val; the
/// parameters of the best validation epoch are restored before the final
/// train/val/test RMSEs are measured. Empty val disables model selection;
/// empty test reports NaN.
template <typename T>
EvalReport train(model::FusionModel<T>& model, const features::FeatureTable& table,
                 const model::ModalityStores& stores, const data::Split& split, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

/// One row of the results table.
struct ResultRow {
  std::string dataset;
  std::string modality_mode;  // single / cross, or the baseline method name
  double lr = 0.0;
  double rmse_train = 0.0;
  double rmse_val = 0.0;
  double rmse_test = 0.0;
  std::size_t epochs = 0;
  double seconds = 0.0;
};

inline constexpr const char* kResultsHeader = "dataset,modality_mode,lr,rmse_train,rmse_val,rmse_test,epochs,seconds";

std::string format_result_row(const ResultRow& row);
/// Appends rows, writing the header first when the file is new or empty.
void append_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Trains a fresh model (same seed) per learning rate; one row per rate.
template <typename T>
std::vector<ResultRow> lr_sweep(const model::ModelConfig& model_config, std::uint64_t model_seed,
                                const features::FeatureTable& table, const model::ModalityStores& stores,
                                const data::Split& split, const std::string& dataset, const TrainConfig& base,
                                std::span<const double> lrs, const EpochCallback& on_epoch = {});

inline constexpr double kSweepLearningRates[] = {0.001, 0.0005, 0.0001};

}  // namespace fusionrec::train
