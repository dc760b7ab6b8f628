#pragma once

// Small synthetic MovieLens-shaped datasets for model tests.

#include <string>
#include <vector>

#include "fusionrec/fusion.hpp"
#include "fusionrec/movielens.hpp"
#include "fusionrec/rng.hpp"

namespace toy {

inline fusionrec::data::Dataset make_dataset(std::size_t users, std::size_t movies, std::size_t ratings,
                                             std::uint64_t seed) {
  using namespace fusionrec;
  static const char* kOccupations[] = {"student", "engineer", "writer", "technician", "artist"};
  Rng rng(seed);
  data::Dataset ds;
  ds.format = data::Format::ml100k;
  for (std::size_t u = 1; u <= users; ++u) {
    ds.users.push_back({static_cast<std::uint32_t>(u), static_cast<int>(15 + bounded(rng, 50)),
                        bounded(rng, 2) ? 'F' : 'M', kOccupations[bounded(rng, 5)],
                        std::to_string(10000 + bounded(rng, 89999))});
  }
  for (std::size_t m = 1; m <= movies; ++m) {
    data::MovieMeta meta;
    meta.movie_id = static_cast<std::uint32_t>(m);
    meta.title = "Movie " + std::to_string(m) + " (1990)";
    meta.genres = {static_cast<int>(1 + bounded(rng, 18))};
    ds.movies.push_back(meta);
  }
  // distinct (user, movie) pairs
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::size_t u = 1; u <= users; ++u)
    for (std::size_t m = 1; m <= movies; ++m) pairs.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(m));
  shuffle(pairs, rng);
  for (std::size_t i = 0; i < ratings && i < pairs.size(); ++i) {
    ds.ratings.push_back({pairs[i].first, pairs[i].second, static_cast<std::uint8_t>(1 + bounded(rng, 5)),
                          static_cast<std::int64_t>(i)});
  }
  return ds;
}

/// Model config sized for a toy dataset with tiny widths.
inline fusionrec::model::ModelConfig tiny_config(const fusionrec::data::Dataset& ds, std::size_t d, std::size_t layers,
                                                 std::size_t heads, std::size_t store_dim) {
  fusionrec::model::ModelConfig c;
  c.encoder.d_model = d;
  c.encoder.n_layers = layers;
  c.encoder.n_heads = heads;
  c.encoder.ffn_dim = 2 * d;
  c.encoder.dropout = 0.0;
  c.format = ds.format;
  c.user_capacity = ds.users.size() + 1;
  c.movie_capacity = ds.movies.size() + 1;
  c.id_dim = 4;
  c.hidden_dim = 6;
  c.zip_buckets = 7;
  c.store_dim = store_dim;
  return c;
}

}  // namespace toy
