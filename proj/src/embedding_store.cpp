#include "fusionrec/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fusionrec/binary_io.hpp"
#include "fusionrec/errors.hpp"
#include "fusionrec/rng.hpp"

namespace fusionrec::features {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::title: return "title";
    case Modality::intro: return "intro";
    case Modality::poster: return "poster";
  }
  return "?";
}

EmbeddingStore::EmbeddingStore(Modality modality, std::size_t dim) : modality_(modality), dim_(dim) {}

EmbeddingStore::EmbeddingStore(EmbeddingStore&& other) noexcept
    : modality_(other.modality_),
      dim_(other.dim_),
      vectors_(std::move(other.vectors_)),
      accesses_(other.accesses_.load()) {}

EmbeddingStore& EmbeddingStore::operator=(EmbeddingStore&& other) noexcept {
  modality_ = other.modality_;
  dim_ = other.dim_;
  vectors_ = std::move(other.vectors_);
  accesses_.store(other.accesses_.load());
  return *this;
}

void EmbeddingStore::insert(std::uint32_t id, std::vector<float> vector) {
  if (vector.size() != dim_) {
    throw DataError("dim mismatch: vector for id " + std::to_string(id) + " has " + std::to_string(vector.size()) +
                    " values, store dim is " + std::to_string(dim_));
  }
  if (!std::all_of(vector.begin(), vector.end(), [](float v) { return std::isfinite(v); })) {
    throw DataError("non-finite embedding for id " + std::to_string(id));
  }
  if (!vectors_.emplace(id, std::move(vector)).second) throw DataError("duplicate id " + std::to_string(id));
}

const std::vector<float>* EmbeddingStore::find(std::uint32_t id) const {
  accesses_.fetch_add(1, std::memory_order_relaxed);
  const auto it = vectors_.find(id);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<std::uint32_t> EmbeddingStore::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(vectors_.size());
  for (const auto& [id, v] : vectors_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write store " + path.string());
  out.write("MMEB", 4);
  binary::write_le<std::uint32_t>(out, kStoreVersion);
  binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(store.modality()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  for (const auto id : store.ids()) {
    binary::write_le<std::uint32_t>(out, id);
    for (const float v : *store.find(id)) binary::write_f32(out, v);
  }
  if (!out) throw DataError("write failed for store " + path.string());
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "MMEB") throw DataError("bad magic in store " + path.string());
  const auto version = binary::read_le<std::uint32_t>(in, "store version");
  if (version != kStoreVersion) throw DataError("unsupported store version " + std::to_string(version));
  const auto tag = binary::read_le<std::uint8_t>(in, "modality tag");
  if (tag > 2) throw DataError("unknown modality tag " + std::to_string(tag));
  const auto count = binary::read_le<std::uint32_t>(in, "record count");
  const auto dim = binary::read_le<std::uint32_t>(in, "dim");
  if (dim != kStoreDim) {
    throw DataError("dim mismatch: store " + path.string() + " has dim " + std::to_string(dim) + ", expected " +
                    std::to_string(kStoreDim));
  }
  EmbeddingStore store(static_cast<Modality>(tag), dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto id = binary::read_le<std::uint32_t>(in, "record id");
    std::vector<float> v(dim);
    for (auto& x : v) x = binary::read_f32(in, "record values");
    store.insert(id, std::move(v));
  }
  return store;
}

EmbeddingStore make_synthetic_store(Modality modality, const std::vector<std::uint32_t>& ids, std::uint64_t seed,
                                    std::size_t dim) {
  EmbeddingStore store(modality, dim);
  auto sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const auto id : sorted) {
    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(modality)), id));
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(standard_normal(rng));
    store.insert(id, std::move(v));
  }
  return store;
}

}  // namespace fusionrec::features
