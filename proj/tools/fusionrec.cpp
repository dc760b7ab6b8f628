// fusionrec command-line entry point: ingest, train, eval, baseline, sweep.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fusionrec/baselines.hpp"
#include "fusionrec/checkpoint.hpp"
#include "fusionrec/embedding_store.hpp"
#include "fusionrec/errors.hpp"
#include "fusionrec/features.hpp"
#include "fusionrec/fusion.hpp"
#include "fusionrec/kernels.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/run_config.hpp"
#include "fusionrec/training.hpp"

namespace fs = std::filesystem;
using namespace fusionrec;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void apply_thread_cap() {
  const char* env = std::getenv("FUSIONREC_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("FUSIONREC_THREADS must be a positive integer, got '") + env + "'");
  kernels::set_num_threads(static_cast<int>(n));
}

void print_stats(std::ostream& out, const std::string& name, const data::DatasetStats& s) {
  out << std::left << std::setw(12) << "Dataset" << std::setw(10) << "Users" << std::setw(10) << "Items"
      << std::setw(12) << "Ratings" << "Sparsity\n"
      << std::setw(12) << name << std::setw(10) << s.n_users << std::setw(10) << s.n_items << std::setw(12) << s.n_ratings
      << std::fixed << std::setprecision(3) << s.sparsity * 100.0 << "%\n";
  out.unsetf(std::ios::fixed);
}

// Everything a train/eval/sweep command needs, resolved from a RunConfig.
struct Workspace {
  cli::RunConfig config;
  data::Dataset dataset;
  data::Split split;
  std::unique_ptr<features::FeatureTable> table;
  std::vector<std::unique_ptr<features::EmbeddingStore>> stores;  // title, intro, poster (may be null)

  explicit Workspace(cli::RunConfig cfg) : config(std::move(cfg)) {
    if (const auto missing = cli::missing_paths(config); !missing.empty()) {
      std::string msg = "missing inputs:";
      for (const auto& m : missing) msg += "\n  " + m;
      throw DataError(msg);
    }
    dataset = data::load_dataset(config.dataset_dir, config.format);
    split = config.manifest.empty() ? data::split_dataset(dataset.ratings, config.split, config.split_seed)
                                    : data::read_manifest(config.manifest);
    table = std::make_unique<features::FeatureTable>(dataset, config.zip_buckets);
    const fs::path paths[] = {config.store_title, config.store_intro, config.store_poster};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto modality = static_cast<features::Modality>(k);
      if (!paths[k].empty()) {
        stores.push_back(std::make_unique<features::EmbeddingStore>(features::load_store(paths[k])));
      } else if (config.synthetic_stores) {
        stores.push_back(std::make_unique<features::EmbeddingStore>(
            features::make_synthetic_store(modality, table->movie_ids(), mix_seed(config.store_seed, k))));
      } else {
        stores.push_back(nullptr);
      }
    }
  }

  model::ModalityStores modality_stores() const {
    return {stores[0].get(), stores[1].get(), stores[2].get()};
  }

  model::ModelConfig model_config() const {
    model::ModelConfig m;
    m.encoder = config.encoder;
    m.format = config.format;
    m.user_capacity = table->max_user_id() + std::size_t{1};
    m.movie_capacity = table->max_movie_id() + std::size_t{1};
    m.id_dim = config.id_dim;
    m.hidden_dim = config.hidden_dim;
    m.zip_buckets = config.zip_buckets;
    return m;
  }

  std::string dataset_name() const { return std::string(data::format_name(config.format)); }
  fs::path results_path() const { return config.output_dir / "results.csv"; }
};

void write_loss_curve(const fs::path& path, const train::EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,mean_loss,train_rmse,val_rmse,seconds\n";
  for (const auto& e : report.curve) {
    out << e.epoch << ',' << e.mean_loss << ',' << e.train_rmse << ',' << e.val_rmse << ',' << e.seconds << '\n';
  }
}

void log_epoch(const train::EpochRecord& e) {
  std::cerr << "epoch " << e.epoch << "  loss " << e.mean_loss << "  train_rmse " << e.train_rmse << "  val_rmse "
            << e.val_rmse << "  (" << e.seconds << " s)\n";
}

cli::KeyValues collect_overrides(const std::vector<std::string>& sets) {
  cli::KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string data_dir, format = "ml100k", out_dir;
  std::uint64_t seed = data::kDefaultSplitSeed;
};

int run_ingest(const IngestArgs& a) {
  const auto format = data::parse_format(a.format);
  const auto dataset = data::load_dataset(a.data_dir, format);
  const auto stats = dataset.stats();
  const auto split = data::split_dataset(dataset.ratings, {}, a.seed);
  fs::create_directories(a.out_dir);
  data::write_manifest(fs::path(a.out_dir) / "manifest.csv", split);
  std::ofstream stats_out(fs::path(a.out_dir) / "stats.txt");
  print_stats(stats_out, std::string(data::format_name(format)), stats);
  stats_out << "split train=" << split.train.size() << " val=" << split.val.size() << " test=" << split.test.size()
            << " seed=" << a.seed << '\n';
  if (!stats_out) throw DataError("cannot write stats to " + a.out_dir);
  print_stats(std::cout, std::string(data::format_name(format)), stats);
  std::cout << "split train=" << split.train.size() << " val=" << split.val.size() << " test=" << split.test.size()
            << '\n';
  return 0;
}

struct RunArgs {
  std::string config_path;
  std::vector<std::string> sets;
};

int run_train(const RunArgs& a) {
  Workspace ws(cli::load_run_config(a.config_path, collect_overrides(a.sets)));
  cli::write_run_record(ws.config.output_dir, ws.config);
  model::FusionModel<float> model(ws.model_config(), ws.config.model_seed);
  std::cerr << "parameters: " << model.parameter_count() << ", train/val/test " << ws.split.train.size() << '/'
            << ws.split.val.size() << '/' << ws.split.test.size() << '\n';
  const auto report = train::train(model, *ws.table, ws.modality_stores(), ws.split, ws.config.trainer, log_epoch);
  save_checkpoint(ws.config.output_dir / "model.frwt", model.parameters());
  write_loss_curve(ws.config.output_dir / "loss_curve.csv", report);
  const train::ResultRow row{ws.dataset_name(), std::string(train::modality_mode_name(ws.config.trainer.mode)),
                             ws.config.trainer.lr, report.rmse_train, report.rmse_val, report.rmse_test,
                             report.epochs, report.seconds};
  train::append_results_csv(ws.results_path(), std::span(&row, 1));
  std::cout << train::kResultsHeader << '\n' << train::format_result_row(row) << '\n';
  if (ws.stores[2]) std::cerr << "poster store accesses: " << ws.stores[2]->access_count() << '\n';
  return 0;
}

struct EvalArgs : RunArgs {
  std::string checkpoint, split_name = "test";
  bool argmax = false;
};

int run_eval(const EvalArgs& a) {
  Workspace ws(cli::load_run_config(a.config_path, collect_overrides(a.sets)));
  const std::vector<data::RatingRecord>* records = nullptr;
  if (a.split_name == "train") records = &ws.split.train;
  if (a.split_name == "val") records = &ws.split.val;
  if (a.split_name == "test") records = &ws.split.test;
  if (records == nullptr) throw ConfigError("--split must be train, val or test");
  model::FusionModel<float> model(ws.model_config(), ws.config.model_seed);
  load_checkpoint(a.checkpoint, model.parameters());
  const auto stores = train::stores_for_mode(ws.modality_stores(), ws.config.trainer.mode);
  const double value = train::evaluate_rmse(model, *ws.table, stores, *records,
                                            a.argmax ? model::PredictionMode::argmax : model::PredictionMode::expectation);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  train::ResultRow row{ws.dataset_name(), std::string(train::modality_mode_name(ws.config.trainer.mode)),
                       ws.config.trainer.lr, nan, nan, nan, 0, 0.0};
  (a.split_name == "train" ? row.rmse_train : a.split_name == "val" ? row.rmse_val : row.rmse_test) = value;
  cli::write_run_record(ws.config.output_dir, ws.config);
  train::append_results_csv(ws.results_path(), std::span(&row, 1));
  std::cout << "rmse_" << a.split_name << ' ' << value << '\n';
  return 0;
}

struct BaselineArgs : RunArgs {
  std::string method;
  baselines::BaselineConfig params;
};

int run_baseline(const BaselineArgs& a) {
  const auto method = baselines::parse_method(a.method);
  const auto config = cli::load_run_config(a.config_path, collect_overrides(a.sets));
  if (const auto missing = cli::missing_paths(config); !missing.empty()) throw DataError(missing.front());
  const auto dataset = data::load_dataset(config.dataset_dir, config.format);
  const auto split = config.manifest.empty() ? data::split_dataset(dataset.ratings, config.split, config.split_seed)
                                             : data::read_manifest(config.manifest);
  cli::write_run_record(config.output_dir, config);
  const auto row = baselines::baseline_report(split, method, std::string(data::format_name(config.format)), a.params);
  train::append_results_csv(config.output_dir / "results.csv", std::span(&row, 1));
  std::cout << train::kResultsHeader << '\n' << train::format_result_row(row) << '\n';
  return 0;
}

int run_sweep(const RunArgs& a) {
  Workspace ws(cli::load_run_config(a.config_path, collect_overrides(a.sets)));
  cli::write_run_record(ws.config.output_dir, ws.config);
  const auto rows = train::lr_sweep<float>(ws.model_config(), ws.config.model_seed, *ws.table, ws.modality_stores(),
                                           ws.split, ws.dataset_name(), ws.config.trainer,
                                           train::kSweepLearningRates, log_epoch);
  train::append_results_csv(ws.results_path(), rows);
  std::cout << train::kResultsHeader << '\n';
  for (const auto& row : rows) std::cout << train::format_result_row(row) << '\n';
  return 0;
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config_path, "key=value run config file");
  cmd->add_option("--set", a.sets, "override a config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusionrec: multi-modal transformer rating prediction"};
  app.set_version_flag("--version", std::string(cli::version()));
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "parse a MovieLens directory, print stats, write the split manifest");
  c_ingest->add_option("--data", ingest.data_dir, "dataset directory")->required();
  c_ingest->add_option("--format", ingest.format, "ml100k or ml1m");
  c_ingest->add_option("--out", ingest.out_dir, "output directory")->required();
  c_ingest->add_option("--seed", ingest.seed, "split seed");

  RunArgs train_args;
  auto* c_train = app.add_subcommand("train", "train the fusion model");
  add_run_options(c_train, train_args);

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand("eval", "RMSE of a checkpoint on one split");
  add_run_options(c_eval, eval_args);
  c_eval->add_option("--checkpoint", eval_args.checkpoint, "FRWT checkpoint")->required();
  c_eval->add_option("--split", eval_args.split_name, "train, val or test");
  c_eval->add_flag("--argmax", eval_args.argmax, "predict the most likely class instead of the expectation");

  BaselineArgs base_args;
  auto* c_base = app.add_subcommand("baseline", "fit and score a traditional baseline");
  add_run_options(c_base, base_args);
  c_base->add_option("--method", base_args.method, "user_cf, item_cf, svd or global_mean")->required();
  c_base->add_option("--k", base_args.params.neighbors.k, "neighbourhood size");
  c_base->add_option("--min-overlap", base_args.params.neighbors.min_overlap, "minimum co-ratings for a similarity");
  c_base->add_option("--factors", base_args.params.svd.factors, "SVD factors");
  c_base->add_option("--svd-lr", base_args.params.svd.lr, "SVD learning rate");
  c_base->add_option("--svd-reg", base_args.params.svd.reg, "SVD regularisation");
  c_base->add_option("--svd-epochs", base_args.params.svd.epochs, "SVD epochs");
  c_base->add_option("--svd-seed", base_args.params.svd.seed, "SVD seed");

  RunArgs sweep_args;
  auto* c_sweep = app.add_subcommand("sweep", "train at lr 0.001, 0.0005 and 0.0001");
  add_run_options(c_sweep, sweep_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    apply_thread_cap();
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_train->parsed()) return run_train(train_args);
    if (c_eval->parsed()) return run_eval(eval_args);
    if (c_base->parsed()) return run_baseline(base_args);
    if (c_sweep->parsed()) return run_sweep(sweep_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
