#include "fusionrec/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "fusionrec/errors.hpp"
#include "fusionrec/kernels.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::baselines {

namespace {

double clamp_rating(double r) { return std::clamp(r, 1.0, 5.0); }

struct Neighbor {
  double sim;
  std::uint32_t id;
};

// Keeps the k largest similarities; ties go to the lower id.
void keep_top_k(std::vector<Neighbor>& nb, std::size_t k) {
  const auto better = [](const Neighbor& a, const Neighbor& b) { return a.sim > b.sim || (a.sim == b.sim && a.id < b.id); };
  if (nb.size() > k) {
    std::partial_sort(nb.begin(), nb.begin() + static_cast<std::ptrdiff_t>(k), nb.end(), better);
    nb.resize(k);
  }
}

void compute_similarity(const Matrix<double>& centered, const Matrix<double>& mask, const NeighborConfig& cfg,
                Matrix<double>& sim, Matrix<double>& overlap) {
  if (cfg.parallel) {
    kernels::parallel::co_rated_cosine(centered, mask, cfg.min_overlap, sim, overlap);
  } else {
    kernels::serial::co_rated_cosine(centered, mask, cfg.min_overlap, sim, overlap);
  }
}

void check_neighbor_config(const NeighborConfig& cfg) {
  if (cfg.k == 0) throw ConfigError("neighbourhood size k must be at least 1");
}

}  // namespace

RatingsMatrix::RatingsMatrix(std::span<const data::RatingRecord> train) {
  std::uint32_t max_user = 0, max_item = 0;
  for (const auto& r : train) {
    max_user = std::max(max_user, r.user_id);
    max_item = std::max(max_item, r.movie_id);
  }
  const std::size_t nu = train.empty() ? 0 : max_user + std::size_t{1};
  const std::size_t ni = train.empty() ? 0 : max_item + std::size_t{1};
  ratings_ = Matrix<double>(nu, ni);
  mask_ = Matrix<double>(nu, ni);
  user_count_.assign(nu, 0);
  item_count_.assign(ni, 0);
  user_mean_.assign(nu, 0.0);
  item_mean_.assign(ni, 0.0);
  raters_.assign(ni, {});
  rated_.assign(nu, {});
  double total = 0.0;
  for (const auto& r : train) {
    if (r.rating < 1 || r.rating > 5) {
      throw DataError("rating " + std::to_string(r.rating) + " outside [1,5] for user " + std::to_string(r.user_id));
    }
    if (mask_(r.user_id, r.movie_id) != 0.0) {
      throw DataError("duplicate rating for user " + std::to_string(r.user_id) + ", item " + std::to_string(r.movie_id));
    }
    ratings_(r.user_id, r.movie_id) = r.rating;
    mask_(r.user_id, r.movie_id) = 1.0;
    ++user_count_[r.user_id];
    ++item_count_[r.movie_id];
    user_mean_[r.user_id] += r.rating;
    item_mean_[r.movie_id] += r.rating;
    total += r.rating;
  }
  count_ = train.size();
  global_mean_ = count_ ? total / static_cast<double>(count_) : 0.0;
  for (std::size_t u = 0; u < nu; ++u) {
    if (user_count_[u]) user_mean_[u] /= static_cast<double>(user_count_[u]);
  }
  for (std::size_t i = 0; i < ni; ++i) {
    if (item_count_[i]) item_mean_[i] /= static_cast<double>(item_count_[i]);
  }
  for (std::size_t u = 0; u < nu; ++u) {
    for (std::size_t i = 0; i < ni; ++i) {
      if (mask_(u, i) != 0.0) {
        raters_[i].push_back(static_cast<std::uint32_t>(u));
        rated_[u].push_back(static_cast<std::uint32_t>(i));
      }
    }
  }
}

bool RatingsMatrix::observed(std::uint32_t user, std::uint32_t item) const {
  return user < user_slots() && item < item_slots() && mask_(user, item) != 0.0;
}

// ---------------------------------------------------------------------------

UserCF::UserCF(const RatingsMatrix& matrix, NeighborConfig config) : matrix_(&matrix), config_(config) {
  check_neighbor_config(config_);
  Matrix<double> centered(matrix.user_slots(), matrix.item_slots());
  for (std::size_t u = 0; u < centered.rows(); ++u) {
    for (const auto i : matrix.rated(static_cast<std::uint32_t>(u))) {
      centered(u, i) = matrix.rating(static_cast<std::uint32_t>(u), i) - matrix.user_mean(static_cast<std::uint32_t>(u));
    }
  }
  compute_similarity(centered, matrix.mask(), config_, sim_, overlap_);
}

double UserCF::predict(std::uint32_t user, std::uint32_t item) const {
  const auto& m = *matrix_;
  if (!m.has_item(item)) return clamp_rating(m.global_mean());
  if (!m.has_user(user)) return clamp_rating(m.item_mean(item));
  std::vector<Neighbor> nb;
  for (const auto v : m.raters(item)) {
    if (v != user && sim_(user, v) > 0.0) nb.push_back({sim_(user, v), v});
  }
  if (nb.empty()) return clamp_rating(m.item_mean(item));
  keep_top_k(nb, config_.k);
  double num = 0.0, den = 0.0;
  for (const auto& n : nb) {
    num += n.sim * (m.rating(n.id, item) - m.user_mean(n.id));
    den += std::abs(n.sim);
  }
  return clamp_rating(m.user_mean(user) + num / den);
}

ItemCF::ItemCF(const RatingsMatrix& matrix, NeighborConfig config) : matrix_(&matrix), config_(config) {
  check_neighbor_config(config_);
  Matrix<double> centered(matrix.item_slots(), matrix.user_slots());
  Matrix<double> mask(matrix.item_slots(), matrix.user_slots());
  for (std::size_t u = 0; u < matrix.user_slots(); ++u) {
    const auto uid = static_cast<std::uint32_t>(u);
    for (const auto i : matrix.rated(uid)) {
      centered(i, u) = matrix.rating(uid, i) - matrix.user_mean(uid);
      mask(i, u) = 1.0;
    }
  }
  compute_similarity(centered, mask, config_, sim_, overlap_);
}

double ItemCF::predict(std::uint32_t user, std::uint32_t item) const {
  const auto& m = *matrix_;
  if (!m.has_user(user)) return clamp_rating(m.global_mean());
  if (!m.has_item(item)) return clamp_rating(m.user_mean(user));
  std::vector<Neighbor> nb;
  for (const auto j : m.rated(user)) {
    if (j != item && sim_(item, j) > 0.0) nb.push_back({sim_(item, j), j});
  }
  if (nb.empty()) return clamp_rating(m.user_mean(user));
  keep_top_k(nb, config_.k);
  double num = 0.0, den = 0.0;
  for (const auto& n : nb) {
    num += n.sim * (m.rating(user, n.id) - m.item_mean(n.id));
    den += std::abs(n.sim);
  }
  return clamp_rating(m.item_mean(item) + num / den);
}

// ---------------------------------------------------------------------------

double FactorModel::raw(std::uint32_t user, std::uint32_t item) const {
  double y = global_mean;
  const bool has_u = user < user_bias.size();
  const bool has_i = item < item_bias.size();
  if (has_u) y += user_bias[user];
  if (has_i) y += item_bias[item];
  if (has_u && has_i) {
    const auto p = user_factors.row(user);
    const auto q = item_factors.row(item);
    for (std::size_t f = 0; f < p.size(); ++f) y += p[f] * q[f];
  }
  return y;
}

double FactorModel::predict(std::uint32_t user, std::uint32_t item) const { return clamp_rating(raw(user, item)); }

double svd_objective(const FactorModel& model, const RatingsMatrix& matrix, double reg) {
  double total = 0.0;
  for (std::size_t u = 0; u < matrix.user_slots(); ++u) {
    const auto uid = static_cast<std::uint32_t>(u);
    for (const auto i : matrix.rated(uid)) {
      const double e = matrix.rating(uid, i) - model.raw(uid, i);
      double norm = model.user_bias[u] * model.user_bias[u] + model.item_bias[i] * model.item_bias[i];
      for (const double v : model.user_factors.row(u)) norm += v * v;
      for (const double v : model.item_factors.row(i)) norm += v * v;
      total += e * e + reg * norm;
    }
  }
  return total;
}

FactorModel svd_train(const RatingsMatrix& matrix, const SvdConfig& config, std::vector<double>* objective_per_epoch) {
  std::size_t users = 0, items = 0;
  for (std::size_t u = 0; u < matrix.user_slots(); ++u) users += matrix.has_user(static_cast<std::uint32_t>(u));
  for (std::size_t i = 0; i < matrix.item_slots(); ++i) items += matrix.has_item(static_cast<std::uint32_t>(i));
  if (config.factors == 0) throw ConfigError("SVD needs at least one factor");
  if (config.factors > std::min(users, items)) {
    throw ConfigError("SVD factors " + std::to_string(config.factors) + " exceed min(users, items) = " +
                      std::to_string(std::min(users, items)));
  }
  if (!(config.lr > 0.0) || config.reg < 0.0 || config.epochs == 0 || config.init_std < 0.0) {
    throw ConfigError("SVD needs lr > 0, reg >= 0, epochs >= 1 and init_std >= 0");
  }

  const std::size_t k = config.factors;
  FactorModel model;
  model.global_mean = matrix.global_mean();
  model.user_bias.assign(matrix.user_slots(), 0.0);
  model.item_bias.assign(matrix.item_slots(), 0.0);
  model.user_factors = Matrix<double>(matrix.user_slots(), k);
  model.item_factors = Matrix<double>(matrix.item_slots(), k);
  Rng init(mix_seed(config.seed, 0));
  for (auto& v : model.user_factors.values()) v = config.init_std * standard_normal(init);
  for (auto& v : model.item_factors.values()) v = config.init_std * standard_normal(init);

  struct Entry {
    std::uint32_t user, item;
    double rating;
  };
  std::vector<Entry> entries;
  entries.reserve(matrix.size());
  for (std::size_t u = 0; u < matrix.user_slots(); ++u) {
    const auto uid = static_cast<std::uint32_t>(u);
    for (const auto i : matrix.rated(uid)) entries.push_back({uid, i, matrix.rating(uid, i)});
  }

  Rng order_rng(mix_seed(config.seed, 1));
  const double lr = config.lr, reg = config.reg;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(entries, order_rng);
    for (const auto& e : entries) {
      const double err = e.rating - model.raw(e.user, e.item);
      double& bu = model.user_bias[e.user];
      double& bi = model.item_bias[e.item];
      bu += lr * (err - reg * bu);
      bi += lr * (err - reg * bi);
      auto p = model.user_factors.row(e.user);
      auto q = model.item_factors.row(e.item);
      for (std::size_t f = 0; f < k; ++f) {
        const double pf = p[f], qf = q[f];
        p[f] += lr * (err * qf - reg * pf);
        q[f] += lr * (err * pf - reg * qf);
      }
    }
    if (!model.user_factors.all_finite() || !model.item_factors.all_finite() ||
        !std::all_of(model.user_bias.begin(), model.user_bias.end(), [](double v) { return std::isfinite(v); }) ||
        !std::all_of(model.item_bias.begin(), model.item_bias.end(), [](double v) { return std::isfinite(v); })) {
      std::ostringstream msg;
      msg << "SVD diverged at epoch " << epoch << " with lr=" << lr << "; lower the learning rate";
      throw NumericError(msg.str());
    }
    if (objective_per_epoch) objective_per_epoch->push_back(svd_objective(model, matrix, reg));
  }
  return model;
}

// ---------------------------------------------------------------------------

Method parse_method(std::string_view name) {
  if (name == "user_cf") return Method::user_cf;
  if (name == "item_cf") return Method::item_cf;
  if (name == "svd") return Method::svd;
  if (name == "global_mean") return Method::global_mean;
  throw ConfigError("unknown baseline method '" + std::string(name) +
                    "' (expected user_cf, item_cf, svd or global_mean)");
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::user_cf: return "user_cf";
    case Method::item_cf: return "item_cf";
    case Method::svd: return "svd";
    case Method::global_mean: return "global_mean";
  }
  return "?";
}

namespace {

template <typename Predict>
double split_rmse(std::span<const data::RatingRecord> records, const Predict& predict) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sq = 0.0;
  for (const auto& r : records) {
    const double e = predict(r.user_id, r.movie_id) - r.rating;
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(records.size()));
}

}  // namespace

train::ResultRow baseline_report(const data::Split& split, Method method, const std::string& dataset,
                                 const BaselineConfig& config) {
  if (split.train.empty()) throw std::invalid_argument("baseline_report: empty training split");
  if (split.test.empty()) throw std::invalid_argument("baseline_report: empty test split");
  const auto start = std::chrono::steady_clock::now();
  const RatingsMatrix matrix(split.train);
  train::ResultRow row;
  row.dataset = dataset;
  row.modality_mode = std::string(method_name(method));
  const auto fill = [&](const auto& predict) {
    row.rmse_train = split_rmse(split.train, predict);
    row.rmse_val = split_rmse(split.val, predict);
    row.rmse_test = split_rmse(split.test, predict);
  };
  switch (method) {
    case Method::user_cf: {
      const UserCF cf(matrix, config.neighbors);
      fill([&](std::uint32_t u, std::uint32_t i) { return cf.predict(u, i); });
      break;
    }
    case Method::item_cf: {
      const ItemCF cf(matrix, config.neighbors);
      fill([&](std::uint32_t u, std::uint32_t i) { return cf.predict(u, i); });
      break;
    }
    case Method::svd: {
      const auto model = svd_train(matrix, config.svd);
      fill([&](std::uint32_t u, std::uint32_t i) { return model.predict(u, i); });
      row.lr = config.svd.lr;
      row.epochs = config.svd.epochs;
      break;
    }
    case Method::global_mean: {
      const double mu = matrix.global_mean();
      fill([&](std::uint32_t, std::uint32_t) { return mu; });
      break;
    }
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace fusionrec::baselines
