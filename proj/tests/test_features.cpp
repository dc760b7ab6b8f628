#include <doctest.h>

#include <cstring>
#include <fstream>
#include <set>

#include "fusionrec/binary_io.hpp"
#include "fusionrec/embedding_store.hpp"
#include "fusionrec/errors.hpp"
#include "fusionrec/features.hpp"
#include "test_util.hpp"

using namespace fusionrec;
using namespace fusionrec::features;
using testutil::random_matrix;

namespace {

const FeatureSpec& spec_named(const std::vector<FeatureSpec>& specs, const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return s;
  FAIL("no spec " << name);
  return specs.front();
}

std::vector<float> ramp(std::size_t n, float offset) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = offset + 0.001f * static_cast<float>(i);
  return v;
}

}  // namespace

TEST_CASE("feature specs use each slot exactly once") {
  for (const auto f : {data::Format::ml100k, data::Format::ml1m}) {
    const auto specs = feature_specs(f, 944, 1683, 1000);
    REQUIRE(specs.size() == kFeatureSlots);
    std::set<std::size_t> slots;
    for (const auto& s : specs) slots.insert(s.slot);
    CHECK(slots.size() == 10);
    CHECK(*slots.begin() == 1);
    CHECK(*slots.rbegin() == 10);
  }
  const auto m1 = feature_specs(data::Format::ml1m, 10, 10, 1000);
  CHECK(spec_named(m1, "age").kind == FeatureKind::one_hot);
  CHECK(spec_named(m1, "age").cardinality == 7);
  CHECK(spec_named(m1, "genres").cardinality == 18);
}

TEST_CASE("encode_low") {
  const auto specs = feature_specs(data::Format::ml100k, 944, 1683, 1000);
  const auto& occ = spec_named(specs, "occupation");
  data::UserProfile tech{1, 24, 'M', "technician", "85711"};
  const auto idx = occupation_index(tech, data::Format::ml100k);
  CHECK(idx == 19);
  const auto v = encode_low(occ, static_cast<std::int64_t>(idx));
  CHECK(v.size() == 21);
  CHECK(v[19] == 1.0);
  CHECK(std::count(v.begin(), v.end(), 1.0) == 1);
  CHECK_THROWS_AS(encode_low(occ, std::int64_t{21}), std::out_of_range);

  const auto& genres = spec_named(specs, "genres");
  const auto g = encode_low(genres, std::vector<int>{3, 5});  // Animation, Comedy
  CHECK(std::count(g.begin(), g.end(), 1.0) == 2);
  CHECK(g[3] == 1.0);
  CHECK(g[5] == 1.0);
  CHECK_THROWS_AS(encode_low(genres, std::vector<int>{}), std::invalid_argument);

  const auto& zip = spec_named(specs, "zip");
  const auto z1 = encode_low(zip, std::string("85711"));
  const auto z2 = encode_low(zip, std::string("85711"));
  CHECK(z1 == z2);
  CHECK(std::count(z1.begin(), z1.end(), 1.0) == 1);
  CHECK(z1[fnv1a64("85711") % 1000] == 1.0);

  const auto& age = spec_named(specs, "age");
  CHECK(encode_low(age, 0.25) == std::vector<double>{0.25});
  CHECK_THROWS_AS(encode_low(age, std::string("x")), std::invalid_argument);
  CHECK_THROWS_AS(encode_low(spec_named(specs, "title"), 1.0), std::invalid_argument);
}

TEST_CASE("FNV-1a 64 reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("upsample") {
  Rng rng(4);
  Upsampler<double> up("u", 5, 7, 9);
  SUBCASE("zero input with zero biases gives zero") {
    init_uniform(up.first.weight.value, rng, 0.5);
    init_uniform(up.second.weight.value, rng, 0.5);
    ad::Tape<double> t;
    const auto y = upsample(t, t.constant(Matrix<double>(2, 5)), up).value();
    for (const double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("one-hot input selects a weight row") {
    up.first.weight.value = random_matrix(5, 7, rng);
    up.first.bias.value = random_matrix(1, 7, rng);
    up.second.weight.value = random_matrix(7, 9, rng);
    up.second.bias.value = random_matrix(1, 9, rng);
    Matrix<double> x(1, 5);
    x(0, 2) = 1.0;
    ad::Tape<double> t;
    const auto y = upsample(t, t.constant(x), up).value();
    std::vector<double> h(7);
    for (std::size_t j = 0; j < 7; ++j) h[j] = std::max(0.0, up.first.weight.value(2, j) + up.first.bias.value(0, j));
    for (std::size_t k = 0; k < 9; ++k) {
      double s = up.second.bias.value(0, k);
      for (std::size_t j = 0; j < 7; ++j) s += h[j] * up.second.weight.value(j, k);
      CHECK(y(0, k) == doctest::Approx(std::max(0.0, s)).epsilon(1e-13));
    }
  }
  SUBCASE("random input matches a straight-line two-layer forward") {
    up.first.weight.value = random_matrix(5, 7, rng);
    up.first.bias.value = random_matrix(1, 7, rng, 0.1);
    up.second.weight.value = random_matrix(7, 9, rng);
    up.second.bias.value = random_matrix(1, 9, rng, 0.1);
    const auto x = random_matrix(4, 5, rng);
    ad::Tape<double> t;
    const auto y = upsample(t, t.constant(x), up).value();
    REQUIRE(y.rows() == 4);
    REQUIRE(y.cols() == 9);
    for (std::size_t r = 0; r < 4; ++r) {
      double hidden[7];
      for (std::size_t j = 0; j < 7; ++j) {
        double s = up.first.bias.value(0, j);
        for (std::size_t i = 0; i < 5; ++i) s += x(r, i) * up.first.weight.value(i, j);
        hidden[j] = s > 0.0 ? s : 0.0;
      }
      for (std::size_t k = 0; k < 9; ++k) {
        double s = up.second.bias.value(0, k);
        for (std::size_t j = 0; j < 7; ++j) s += hidden[j] * up.second.weight.value(j, k);
        CHECK(y(r, k) == doctest::Approx(s > 0.0 ? s : 0.0).epsilon(1e-13));
      }
    }
  }
  SUBCASE("width mismatch") {
    ad::Tape<double> t;
    CHECK_THROWS_AS(upsample(t, t.constant(Matrix<double>(1, 4)), up), ShapeError);
  }
}

TEST_CASE("id_embed") {
  Rng rng(2);
  ad::Parameter<double> table("t", Matrix<double>(10, 64));
  init_uniform(table.value, rng, 0.02);
  for (const double v : table.value.values()) {
    CHECK(std::abs(v) <= 0.02);
    CHECK(std::isfinite(v));
  }
  ad::Tape<double> t;
  const auto e = id_embed(t, table, {3, 3, 9}).value();
  for (std::size_t j = 0; j < 64; ++j) {
    CHECK(e(0, j) == e(1, j));
    CHECK(e(2, j) == table.value(9, j));
  }
  CHECK_THROWS_AS(id_embed(t, table, {10}), std::out_of_range);
}

TEST_CASE("embedding store insert, write and load") {
  testutil::TempDir dir;
  EmbeddingStore s(Modality::intro);
  s.insert(5, ramp(kStoreDim, 1.0f));
  s.insert(2, ramp(kStoreDim, -1.0f));
  CHECK(s.size() == 2);
  CHECK_THROWS_WITH_AS(s.insert(7, ramp(10, 0.0f)), doctest::Contains("dim mismatch"), DataError);
  CHECK_THROWS_AS(s.insert(5, ramp(kStoreDim, 0.0f)), DataError);
  auto bad = ramp(kStoreDim, 0.0f);
  bad[3] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(s.insert(8, bad), DataError);

  write_store(dir / "s.mmeb", s);
  const auto back = load_store(dir / "s.mmeb");
  CHECK(back.modality() == Modality::intro);
  CHECK(back.size() == 2);
  CHECK(back.ids() == std::vector<std::uint32_t>{2, 5});
  const auto* v = back.find(5);
  REQUIRE(v != nullptr);
  CHECK(std::memcmp(v->data(), ramp(kStoreDim, 1.0f).data(), kStoreDim * sizeof(float)) == 0);
  CHECK(back.find(6) == nullptr);
  CHECK(back.access_count() == 2);
}

TEST_CASE("MMEB byte layout written by hand is read bit-exactly") {
  testutil::TempDir dir;
  const std::vector<float> vec = ramp(kStoreDim, 0.5f);
  {
    std::ofstream out(dir / "hand.mmeb", std::ios::binary);
    out.write("MMEB", 4);
    const unsigned char header[] = {1, 0, 0, 0, /*tag*/ 2, /*count*/ 1, 0, 0, 0, /*dim*/ 0x00, 0x03, 0, 0};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const unsigned char id[] = {0x2a, 0x01, 0, 0};  // 298
    out.write(reinterpret_cast<const char*>(id), sizeof id);
    for (const float f : vec) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      const unsigned char le[] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(le), 4);
    }
  }
  const auto s = load_store(dir / "hand.mmeb");
  CHECK(s.modality() == Modality::poster);
  REQUIRE(s.find(298) != nullptr);
  CHECK(*s.find(298) == vec);

  // and the writer produces exactly these bytes
  write_store(dir / "again.mmeb", s);
  std::ifstream a(dir / "hand.mmeb", std::ios::binary), b(dir / "again.mmeb", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ba == bb);
}

TEST_CASE("store load errors") {
  testutil::TempDir dir;
  EmbeddingStore small(Modality::title, 512);
  small.insert(1, ramp(512, 0.0f));
  write_store(dir / "d512.mmeb", small);
  CHECK_THROWS_WITH_AS(load_store(dir / "d512.mmeb"), doctest::Contains("dim mismatch"), DataError);

  {
    std::ofstream out(dir / "magic.mmeb", std::ios::binary);
    out << "MMEX0000000000000";
  }
  CHECK_THROWS_WITH_AS(load_store(dir / "magic.mmeb"), doctest::Contains("magic"), DataError);

  EmbeddingStore s(Modality::title);
  s.insert(1, ramp(kStoreDim, 0.0f));
  s.insert(2, ramp(kStoreDim, 1.0f));
  write_store(dir / "full.mmeb", s);
  std::ifstream in(dir / "full.mmeb", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  {
    std::ofstream out(dir / "trunc.mmeb", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
  }
  CHECK_THROWS_WITH_AS(load_store(dir / "trunc.mmeb"), doctest::Contains("truncated"), DataError);
  {
    // second record re-labelled with the first id
    std::string dup = bytes;
    const std::size_t second = 4 + 4 + 1 + 4 + 4 + (4 + kStoreDim * 4);
    dup[second] = 1;
    std::ofstream out(dir / "dup.mmeb", std::ios::binary);
    out.write(dup.data(), static_cast<std::streamsize>(dup.size()));
  }
  CHECK_THROWS_WITH_AS(load_store(dir / "dup.mmeb"), doctest::Contains("duplicate"), DataError);
}

TEST_CASE("lookup: stored vectors, shared missing token, no store access without a store") {
  EmbeddingStore s(Modality::title, 4);
  s.insert(1, {1, 2, 3, 4});
  ad::Parameter<double> missing("m", Matrix<double>(1, 4, std::vector<double>{9, 8, 7, 6}));
  ad::Tape<double> t;
  auto out = lookup(t, &s, missing, {1, 5, 1, 6});
  const auto& v = out.value();
  CHECK(v(0, 0) == 1.0);
  CHECK(v(2, 3) == 4.0);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(v(1, j) == missing.value(0, j));
    CHECK(v(3, j) == missing.value(0, j));
  }
  t.backward(ad::sum(out));
  for (const double g : missing.grad.values()) CHECK(g == 2.0);  // two misses accumulate

  const auto before = s.access_count();
  ad::Tape<double> t2;
  ad::Parameter<double> m2("m2", Matrix<double>(1, 4, 0.5));
  const auto all_missing = lookup<double>(t2, nullptr, m2, {1, 2}).value();
  CHECK(all_missing(0, 0) == 0.5);
  CHECK(s.access_count() == before);
}

TEST_CASE("synthetic stores are seeded") {
  const auto a = make_synthetic_store(Modality::title, {1, 2, 3}, 7);
  const auto b = make_synthetic_store(Modality::title, {1, 2, 3}, 7);
  const auto c = make_synthetic_store(Modality::title, {1, 2, 3}, 8);
  CHECK(*a.find(2) == *b.find(2));
  CHECK(*a.find(2) != *c.find(2));
  CHECK(a.find(2)->size() == kStoreDim);
}

TEST_CASE("feature table on MovieLens 100K") {
  if (!testutil::have_ml100k()) {
    MESSAGE("MovieLens 100K not found; skipped");
    return;
  }
  const auto ds = data::load_dataset(testutil::kDataDir, data::Format::ml100k);
  const FeatureTable table(ds, 1000);
  const auto& u = table.user(1);
  CHECK(u.occupation == 19);
  CHECK(u.gender == 0);
  CHECK(u.zip_bucket == fnv1a64("85711") % 1000);
  CHECK(u.age_scalar >= 0.0);
  CHECK(u.age_scalar <= 1.0);
  CHECK(table.max_user_id() == 943);
  CHECK(table.max_movie_id() == 1682);
  CHECK_THROWS_AS(table.user(944), DataError);
}
