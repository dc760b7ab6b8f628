#include "fusionrec/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fusionrec/adam.hpp"
#include "fusionrec/errors.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for mix_seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

}  // namespace

ModalityMode parse_modality_mode(std::string_view name) {
  if (name == "single") return ModalityMode::single;
  if (name == "cross") return ModalityMode::cross;
  throw ConfigError("unknown modality mode '" + std::string(name) + "' (expected single or cross)");
}

std::string_view modality_mode_name(ModalityMode m) { return m == ModalityMode::single ? "single" : "cross"; }

model::ModalityStores stores_for_mode(const model::ModalityStores& stores, ModalityMode mode) {
  auto out = stores;
  if (mode == ModalityMode::single) out.poster = nullptr;
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (max_epochs == 0) throw ConfigError("epochs must be at least 1");
}

template <typename T>
ad::Var<T> cross_entropy(ad::Var<T> probs, std::span<const int> ratings) {
  std::vector<std::size_t> target(ratings.size());
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i] < 1 || ratings[i] > static_cast<int>(model::kRatingClasses)) {
      throw std::invalid_argument("cross_entropy: rating " + std::to_string(ratings[i]) + " outside 1..5");
    }
    target[i] = static_cast<std::size_t>(ratings[i] - 1);
  }
  return ad::nll(probs, target, static_cast<T>(1e-12));
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw std::invalid_argument("rmse: empty input");
  if (y.size() != yhat.size()) throw std::invalid_argument("rmse: length mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sq += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(sq / static_cast<double>(y.size()));
}

template <typename T>
std::vector<double> predict(model::FusionModel<T>& model, const features::FeatureTable& table,
                            const model::ModalityStores& stores, std::span<const data::RatingRecord> records,
                            std::size_t batch_size, model::PredictionMode mode) {
  if (batch_size == 0) throw std::invalid_argument("predict: batch size must be positive");
  std::vector<double> out;
  out.reserve(records.size());
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto batch = records.subspan(start, std::min(batch_size, records.size() - start));
    ad::Tape<T> tape;
    const auto& probs = model.forward(tape, table, stores, batch).value();
    for (std::size_t r = 0; r < probs.rows(); ++r) out.push_back(model::predict_rating(probs.row(r), mode));
  }
  return out;
}

template <typename T>
double evaluate_rmse(model::FusionModel<T>& model, const features::FeatureTable& table,
                     const model::ModalityStores& stores, std::span<const data::RatingRecord> records,
                     model::PredictionMode mode) {
  if (records.empty()) throw std::invalid_argument("evaluate_rmse: empty split");
  const auto yhat = predict(model, table, stores, records, 256, mode);
  std::vector<double> y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) y[i] = records[i].rating;
  return rmse(y, yhat);
}

template <typename T>
EvalReport train(model::FusionModel<T>& model, const features::FeatureTable& table,
                 const model::ModalityStores& stores, const data::Split& split, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");
  const auto start = Clock::now();
  const auto active = stores_for_mode(stores, config.mode);
  auto params = model.parameters();
  ad::AdamState<T> adam(params, ad::AdamConfig{.lr = config.lr});
  ad::zero_grads<T>(params);

  Rng shuffle_rng(mix_seed(config.seed, kShuffleStream));
  Rng dropout_rng(mix_seed(config.seed, kDropoutStream));
  const model::ForwardContext ctx{.training = true, .rng = &dropout_rng};

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<data::RatingRecord> batch;
  std::vector<int> ratings;

  EvalReport report;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Matrix<T>> best_values;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    double sq_err = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - b0);
      batch.clear();
      ratings.clear();
      for (std::size_t i = 0; i < n; ++i) {
        batch.push_back(split.train[order[b0 + i]]);
        ratings.push_back(batch.back().rating);
      }
      try {
        ad::Tape<T> tape;
        auto probs = model.forward(tape, table, active, batch, ctx);
        auto loss = cross_entropy(probs, std::span<const int>(ratings));
        const double l = static_cast<double>(loss.value()(0, 0));
        if (!std::isfinite(l)) throw NumericError("loss is not finite");
        tape.backward(loss);
        ad::adam_step<T>(params, adam);
        ad::zero_grads<T>(params);
        loss_sum += l * static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          const double e = model::predict_rating(probs.value().row(r)) - ratings[r];
          sq_err += e * e;
        }
      } catch (const NumericError& e) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << b0 / config.batch_size + 1
            << " (lr=" << config.lr << "): " << e.what();
        throw NumericError(msg.str());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.train_rmse = std::sqrt(sq_err / static_cast<double>(order.size()));
    rec.val_rmse = split.val.empty() ? kNaN : evaluate_rmse(model, table, active, split.val);
    rec.seconds = seconds_since(epoch_start);
    report.curve.push_back(rec);
    report.epochs = epoch;
    if (on_epoch) on_epoch(rec);

    if (split.val.empty()) {
      report.best_epoch = epoch;
      continue;
    }
    if (rec.val_rmse < best_val) {
      best_val = rec.val_rmse;
      report.best_epoch = epoch;
      best_values.clear();
      for (const auto* p : params) best_values.push_back(p->value);
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }

  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(best_values[i]);
  }
  report.rmse_train = config.measure_train_rmse ? evaluate_rmse(model, table, active, split.train) : kNaN;
  report.rmse_val = split.val.empty() ? kNaN : evaluate_rmse(model, table, active, split.val);
  report.rmse_test = split.test.empty() ? kNaN : evaluate_rmse(model, table, active, split.test);
  report.seconds = seconds_since(start);
  return report;
}

std::string format_result_row(const ResultRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%g,%.6f,%.6f,%.6f,%zu,%.3f", row.dataset.c_str(), row.modality_mode.c_str(),
                row.lr, row.rmse_train, row.rmse_val, row.rmse_test, row.epochs, row.seconds);
  return buf;
}

void append_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot write results file " + path.string());
  if (fresh) out << kResultsHeader << '\n';
  for (const auto& row : rows) out << format_result_row(row) << '\n';
  if (!out) throw DataError("failed writing results file " + path.string());
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw DataError(path.string() + ": missing results header");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 8) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 8 columns");
    try {
      rows.push_back(ResultRow{cols[0], cols[1], std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4]),
                               std::stod(cols[5]), static_cast<std::size_t>(std::stoull(cols[6])),
                               std::stod(cols[7])});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

template <typename T>
std::vector<ResultRow> lr_sweep(const model::ModelConfig& model_config, std::uint64_t model_seed,
                                const features::FeatureTable& table, const model::ModalityStores& stores,
                                const data::Split& split, const std::string& dataset, const TrainConfig& base,
                                std::span<const double> lrs, const EpochCallback& on_epoch) {
  if (lrs.empty()) throw ConfigError("lr_sweep: no learning rates given");
  std::vector<ResultRow> rows;
  for (const double lr : lrs) {
    auto cfg = base;
    cfg.lr = lr;
    model::FusionModel<T> model(model_config, model_seed);
    const auto report = train(model, table, stores, split, cfg, on_epoch);
    rows.push_back(ResultRow{dataset, std::string(modality_mode_name(cfg.mode)), lr, report.rmse_train,
                             report.rmse_val, report.rmse_test, report.epochs, report.seconds});
  }
  return rows;
}

#define FUSIONREC_TRAIN_INSTANTIATE(T)                                                                          \
  template ad::Var<T> cross_entropy(ad::Var<T>, std::span<const int>);                                         \
  template std::vector<double> predict(model::FusionModel<T>&, const features::FeatureTable&,                  \
                                       const model::ModalityStores&, std::span<const data::RatingRecord>,      \
                                       std::size_t, model::PredictionMode);                                    \
  template double evaluate_rmse(model::FusionModel<T>&, const features::FeatureTable&,                         \
                                const model::ModalityStores&, std::span<const data::RatingRecord>,             \
                                model::PredictionMode);                                                        \
  template EvalReport train(model::FusionModel<T>&, const features::FeatureTable&, const model::ModalityStores&, \
                            const data::Split&, const TrainConfig&, const EpochCallback&);                     \
  template std::vector<ResultRow> lr_sweep<T>(const model::ModelConfig&, std::uint64_t,                        \
                                              const features::FeatureTable&, const model::ModalityStores&,     \
                                              const data::Split&, const std::string&, const TrainConfig&,      \
                                              std::span<const double>, const EpochCallback&);

FUSIONREC_TRAIN_INSTANTIATE(float)
FUSIONREC_TRAIN_INSTANTIATE(double)

#undef FUSIONREC_TRAIN_INSTANTIATE

}  // namespace fusionrec::train
