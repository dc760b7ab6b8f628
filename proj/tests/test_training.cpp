#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "fusionrec/adam.hpp"
#include "fusionrec/grad_check.hpp"
#include "fusionrec/training.hpp"
#include "test_util.hpp"
#include "toy_data.hpp"

using namespace fusionrec;
using namespace fusionrec::train;
using ad::Tape;
using testutil::random_matrix;

namespace {

std::vector<int> ratings_of(std::span<const data::RatingRecord> recs) {
  std::vector<int> out;
  for (const auto& r : recs) out.push_back(r.rating);
  return out;
}

struct ToyWorld {
  data::Dataset ds;
  features::FeatureTable table;
  features::EmbeddingStore title, intro, poster;
  model::ModelConfig cfg;

  ToyWorld(std::size_t users, std::size_t movies, std::size_t ratings, std::uint64_t seed, std::size_t d = 8)
      : ds(toy::make_dataset(users, movies, ratings, seed)),
        table(ds, 7),
        title(features::make_synthetic_store(features::Modality::title, table.movie_ids(), 1, 6)),
        intro(features::make_synthetic_store(features::Modality::intro, table.movie_ids(), 2, 6)),
        poster(features::make_synthetic_store(features::Modality::poster, table.movie_ids(), 3, 6)),
        cfg(toy::tiny_config(ds, d, 1, 2, 6)) {}

  model::ModalityStores stores() const { return {&title, &intro, &poster}; }
};

}  // namespace

TEST_CASE("cross entropy examples") {
  Tape<double> t;
  const std::vector<int> r{1, 5};
  const auto uniform = cross_entropy(t.constant(Matrix<double>(2, 5, 0.2)), std::span<const int>(r));
  CHECK(uniform.value()(0, 0) == doctest::Approx(std::log(5.0)).epsilon(1e-14));

  Matrix<double> exact(2, 5);
  exact(0, 0) = 1.0;
  exact(1, 4) = 1.0;
  CHECK(cross_entropy(t.constant(exact), std::span<const int>(r)).value()(0, 0) == 0.0);

  Matrix<double> wrong(1, 5);
  wrong(0, 2) = 1.0;
  const std::vector<int> one{1};
  CHECK(cross_entropy(t.constant(wrong), std::span<const int>(one)).value()(0, 0) ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-12));

  const std::vector<int> bad{0};
  CHECK_THROWS_AS(cross_entropy(t.constant(Matrix<double>(1, 5, 0.2)), std::span<const int>(bad)),
                  std::invalid_argument);
  const std::vector<int> six{6};
  CHECK_THROWS_AS(cross_entropy(t.constant(Matrix<double>(1, 5, 0.2)), std::span<const int>(six)),
                  std::invalid_argument);
}

TEST_CASE("cross entropy gradient through softmax") {
  Rng rng(1);
  const std::vector<int> r{2, 3, 5};
  const double err = ad::grad_check(
      [&](Tape<double>&, ad::Var<double> x) { return cross_entropy(ad::softmax_rows(x), std::span<const int>(r)); },
      random_matrix(3, 5, rng, 2.0));
  CHECK(err < 1e-8);
}

TEST_CASE("rmse") {
  const std::vector<double> y{1, 2}, yhat{2, 4};
  CHECK(rmse(y, yhat) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-15));
  CHECK(rmse(y, y) == 0.0);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(rmse(y, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_modality_mode("single") == ModalityMode::single);
  CHECK(modality_mode_name(ModalityMode::cross) == "cross");
  CHECK_THROWS_AS(parse_modality_mode("both"), ConfigError);
}

TEST_CASE("predictions are expected ratings of the forward probabilities") {
  ToyWorld w(6, 8, 30, 2);
  model::FusionModel<double> m(w.cfg, 3);
  Rng rng(4);
  for (auto* p : m.parameters()) features::init_uniform(p->value, rng, 0.4);
  const auto recs = std::span<const data::RatingRecord>(w.ds.ratings);
  const auto preds = predict(m, w.table, w.stores(), recs, 7);
  Tape<double> t;
  const auto probs = m.forward(t, w.table, w.stores(), recs).value();
  std::vector<double> y;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    double e = 0.0;
    for (std::size_t c = 0; c < 5; ++c) e += static_cast<double>(c + 1) * probs(i, c);
    CHECK(preds[i] == doctest::Approx(e).epsilon(1e-12));
    y.push_back(recs[i].rating);
  }
  CHECK(evaluate_rmse(m, w.table, w.stores(), recs) == doctest::Approx(rmse(y, preds)).epsilon(1e-12));

  auto shuffled = w.ds.ratings;
  shuffle(shuffled, rng);
  CHECK(evaluate_rmse(m, w.table, w.stores(), std::span<const data::RatingRecord>(shuffled)) ==
        doctest::Approx(rmse(y, preds)).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_rmse(m, w.table, w.stores(), std::span<const data::RatingRecord>{}),
                  std::invalid_argument);
}

TEST_CASE("one small Adam step lowers the batch loss") {
  ToyWorld w(8, 10, 60, 5);
  const auto batch = std::span<const data::RatingRecord>(w.ds.ratings).first(16);
  const auto target = ratings_of(batch);
  int failures = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    model::FusionModel<double> m(w.cfg, seed);
    auto params = m.parameters();
    ad::AdamState<double> adam(std::span<ad::Parameter<double>* const>(params), {.lr = 1e-4});
    ad::zero_grads(std::span<ad::Parameter<double>* const>(params));
    double before = 0.0;
    {
      Tape<double> t;
      auto loss = cross_entropy(m.forward(t, w.table, w.stores(), batch), std::span<const int>(target));
      before = loss.value()(0, 0);
      t.backward(loss);
    }
    ad::adam_step(std::span<ad::Parameter<double>* const>(params), adam);
    Tape<double> t;
    const double after =
        cross_entropy(m.forward(t, w.table, w.stores(), batch), std::span<const int>(target)).value()(0, 0);
    failures += after < before ? 0 : 1;
  }
  CHECK(failures <= 1);
}

TEST_CASE("training is deterministic under a fixed seed") {
  ToyWorld w(10, 12, 100, 6);
  const auto split = data::split_dataset(w.ds.ratings, {0.8, 0.1, 0.1}, 3);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.lr = 0.01;
  auto run = [&] {
    auto c = w.cfg;
    c.encoder.dropout = 0.1;
    model::FusionModel<double> m(c, 9);
    return train::train(m, w.table, w.stores(), split, cfg);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t e = 0; e < a.curve.size(); ++e) {
    CHECK(a.curve[e].mean_loss == b.curve[e].mean_loss);
    CHECK(a.curve[e].val_rmse == b.curve[e].val_rmse);
  }
  CHECK(a.rmse_test == b.rmse_test);
  CHECK(a.rmse_train == b.rmse_train);
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("modality modes gate the poster store") {
  ToyWorld w(6, 8, 40, 7);
  const auto split = data::split_dataset(w.ds.ratings, {0.8, 0.1, 0.1}, 3);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 8;
  const auto before = w.poster.access_count();
  {
    cfg.mode = ModalityMode::single;
    model::FusionModel<double> m(w.cfg, 1);
    train::train(m, w.table, stores_for_mode(w.stores(), cfg.mode), split, cfg);
  }
  CHECK(w.poster.access_count() == before);
  CHECK(w.title.access_count() > 0);
  {
    cfg.mode = ModalityMode::cross;
    model::FusionModel<double> m(w.cfg, 1);
    train::train(m, w.table, stores_for_mode(w.stores(), cfg.mode), split, cfg);
  }
  CHECK(w.poster.access_count() > before);
  CHECK(stores_for_mode(w.stores(), ModalityMode::single).poster == nullptr);
  CHECK(stores_for_mode(w.stores(), ModalityMode::single).title == &w.title);
}

TEST_CASE("early stopping bookkeeping") {
  ToyWorld w(10, 12, 120, 8);
  const auto split = data::split_dataset(w.ds.ratings, {0.8, 0.1, 0.1}, 5);
  TrainConfig cfg;
  cfg.max_epochs = 25;
  cfg.patience = 2;
  cfg.batch_size = 8;
  cfg.lr = 0.02;
  model::FusionModel<double> m(w.cfg, 2);
  std::size_t callbacks = 0;
  const auto rep = train::train(m, w.table, w.stores(), split, cfg, [&](const EpochRecord&) { ++callbacks; });
  CHECK(callbacks == rep.epochs);
  CHECK(rep.curve.size() == rep.epochs);
  REQUIRE(rep.best_epoch >= 1);
  REQUIRE(rep.best_epoch <= rep.epochs);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : rep.curve) best = std::min(best, e.val_rmse);
  CHECK(rep.curve[rep.best_epoch - 1].val_rmse == best);
  if (rep.epochs < cfg.max_epochs) CHECK(rep.epochs - rep.best_epoch == cfg.patience);
  // the restored parameters reproduce the best validation RMSE
  CHECK(rep.rmse_val == doctest::Approx(best).epsilon(1e-9));
  CHECK(evaluate_rmse(m, w.table, w.stores(), std::span<const data::RatingRecord>(split.val)) ==
        doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("empty test split reports NaN") {
  ToyWorld w(5, 5, 20, 9);
  data::Split split;
  split.train = w.ds.ratings;
  TrainConfig cfg;
  cfg.max_epochs = 2;
  model::FusionModel<double> m(w.cfg, 1);
  const auto rep = train::train(m, w.table, w.stores(), split, cfg);
  CHECK(std::isnan(rep.rmse_test));
  CHECK(std::isnan(rep.rmse_val));
  CHECK(rep.epochs == 2);
  CHECK(rep.best_epoch == 2);
}

TEST_CASE("a ten-interaction set is memorised") {
  ToyWorld w(5, 5, 10, 10, 16);
  data::Split split;
  split.train = w.ds.ratings;
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 0;
  cfg.batch_size = 10;
  cfg.lr = 0.01;
  model::FusionModel<double> m(w.cfg, 1);
  const auto rep = train::train(m, w.table, w.stores(), split, cfg);
  CHECK(rep.rmse_train < 0.3);
}

TEST_CASE("results CSV") {
  testutil::TempDir dir;
  const ResultRow a{"ml-100k", "single", 0.0005, 0.91, 0.95, 0.96, 10, 12.5};
  const ResultRow b{"ml-100k", "user_cf", 0.0, 0.8, std::nan(""), 0.93, 0, 1.0};
  CHECK(format_result_row(a) == "ml-100k,single,0.0005,0.910000,0.950000,0.960000,10,12.500");
  append_results_csv(dir / "r.csv", std::vector<ResultRow>{a});
  append_results_csv(dir / "r.csv", std::vector<ResultRow>{b});
  std::ifstream in(dir / "r.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == kResultsHeader);
  std::size_t headers = 0;
  for (std::string line; std::getline(in, line);) headers += line == kResultsHeader;
  CHECK(headers == 0);
  const auto rows = read_results_csv(dir / "r.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dataset == "ml-100k");
  CHECK(rows[0].lr == 0.0005);
  CHECK(rows[0].rmse_test == doctest::Approx(0.96));
  CHECK(rows[0].epochs == 10);
  CHECK(rows[1].modality_mode == "user_cf");
  CHECK(std::isnan(rows[1].rmse_val));
}

TEST_CASE("learning-rate sweep gives one row per rate") {
  ToyWorld w(8, 8, 60, 11);
  const auto split = data::split_dataset(w.ds.ratings, {0.8, 0.1, 0.1}, 2);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.batch_size = 16;
  cfg.mode = ModalityMode::single;
  const std::vector<double> lrs{0.01, 0.001};
  const auto rows = lr_sweep<double>(w.cfg, 4, w.table, w.stores(), split, "toy", cfg, lrs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].lr == 0.01);
  CHECK(rows[1].lr == 0.001);
  CHECK(rows[0].dataset == "toy");
  CHECK(rows[0].modality_mode == "single");
  CHECK(rows[0].rmse_test != rows[1].rmse_test);
  // a fresh model per rate: the second row equals a standalone run
  model::FusionModel<double> m(w.cfg, 4);
  cfg.lr = 0.001;
  const auto rep = train::train(m, w.table, w.stores(), split, cfg);
  CHECK(rep.rmse_test == rows[1].rmse_test);
  CHECK_THROWS_AS(lr_sweep<double>(w.cfg, 4, w.table, w.stores(), split, "toy", cfg, std::vector<double>{}),
                  ConfigError);
}
