#pragma once

// Neighbourhood collaborative filtering, biased matrix factorisation and the
// global-mean reference, all fitted on a training split.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusionrec/matrix.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/training.hpp"

namespace fusionrec::baselines {

/// Observed train ratings indexed directly by id (0..max id).
class RatingsMatrix {
 public:
  explicit RatingsMatrix(std::span<const data::RatingRecord> train);

  std::size_t user_slots() const { return ratings_.rows(); }
  std::size_t item_slots() const { return ratings_.cols(); }
  std::size_t size() const { return count_; }

  bool observed(std::uint32_t user, std::uint32_t item) const;
  double rating(std::uint32_t user, std::uint32_t item) const { return ratings_(user, item); }
  const Matrix<double>& ratings() const { return ratings_; }
  const Matrix<double>& mask() const { return mask_; }

  bool has_user(std::uint32_t user) const { return user < user_slots() && user_count_[user] > 0; }
  bool has_item(std::uint32_t item) const { return item < item_slots() && item_count_[item] > 0; }
  std::size_t user_count(std::uint32_t user) const { return has_user(user) ? user_count_[user] : 0; }
  std::size_t item_count(std::uint32_t item) const { return has_item(item) ? item_count_[item] : 0; }
  double user_mean(std::uint32_t user) const { return user_mean_[user]; }
  double item_mean(std::uint32_t item) const { return item_mean_[item]; }
  double global_mean() const { return global_mean_; }

  /// Users who rated `item`, ascending.
  const std::vector<std::uint32_t>& raters(std::uint32_t item) const { return raters_[item]; }
  /// Items rated by `user`, ascending.
  const std::vector<std::uint32_t>& rated(std::uint32_t user) const { return rated_[user]; }

 private:
  Matrix<double> ratings_, mask_;
  std::vector<std::size_t> user_count_, item_count_;
  std::vector<double> user_mean_, item_mean_;
  std::vector<std::vector<std::uint32_t>> raters_, rated_;
  double global_mean_ = 0.0;
  std::size_t count_ = 0;
};

struct NeighborConfig {
  std::size_t k = 40;
  std::size_t min_overlap = 2;
  bool parallel = true;  // similarity via the parallel kernels
};

/// k nearest users by cosine on mean-centred co-rated ratings.
class UserCF {
 public:
  UserCF(const RatingsMatrix& matrix, NeighborConfig config = {});
  /// mean_u + sum sim (r_vi - mean_v) / sum |sim| over the k most similar
  /// positive-similarity raters of `item`; falls back to the item mean, then
  /// the global mean. Clamped to [1, 5].
  double predict(std::uint32_t user, std::uint32_t item) const;
  double similarity(std::uint32_t a, std::uint32_t b) const { return sim_(a, b); }
  const Matrix<double>& similarities() const { return sim_; }

 private:
  const RatingsMatrix* matrix_;
  NeighborConfig config_;
  Matrix<double> sim_, overlap_;
};

/// k nearest items by adjusted cosine (ratings centred on user means).
class ItemCF {
 public:
  ItemCF(const RatingsMatrix& matrix, NeighborConfig config = {});
  /// mean_i + sum sim (r_uj - mean_j) / sum |sim| over the user's k most
  /// similar positive-similarity items; falls back to the user mean, then
  /// the global mean. Clamped to [1, 5].
  double predict(std::uint32_t user, std::uint32_t item) const;
  double similarity(std::uint32_t a, std::uint32_t b) const { return sim_(a, b); }
  const Matrix<double>& similarities() const { return sim_; }

 private:
  const RatingsMatrix* matrix_;
  NeighborConfig config_;
  Matrix<double> sim_, overlap_;
};

struct SvdConfig {
  std::size_t factors = 50;
  double lr = 0.005;
  double reg = 0.02;
  std::size_t epochs = 30;
  double init_std = 0.1;
  std::uint64_t seed = 1;
};

/// y = mu + b_u + b_i + p_u . q_i
struct FactorModel {
  double global_mean = 0.0;
  std::vector<double> user_bias, item_bias;
  Matrix<double> user_factors, item_factors;  // slots x k

  double raw(std::uint32_t user, std::uint32_t item) const;
  /// Unknown users or items contribute nothing; clamped to [1, 5].
  double predict(std::uint32_t user, std::uint32_t item) const;
};

/// Biased MF by SGD over shuffled observed entries.
FactorModel svd_train(const RatingsMatrix& matrix, const SvdConfig& config,
                      std::vector<double>* objective_per_epoch = nullptr);

/// sum over observed (r - y)^2 + reg (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2).
double svd_objective(const FactorModel& model, const RatingsMatrix& matrix, double reg);

enum class Method { user_cf, item_cf, svd, global_mean };
Method parse_method(std::string_view name);
std::string_view method_name(Method m);

struct BaselineConfig {
  NeighborConfig neighbors;
  SvdConfig svd;
};

/// One results row for `method` fitted on split.train; test must be non-empty.
train::ResultRow baseline_report(const data::Split& split, Method method, const std::string& dataset,
                                 const BaselineConfig& config = {});

}  // namespace fusionrec::baselines
