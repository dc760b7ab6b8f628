#pragma once

// MMEB embedding stores: precomputed 768-dim vectors per movie for one
// modality, produced by the offline extractor.
//
// File layout (little-endian):
//   "MMEB" | version u32 = 1 | modality u8 | count u32 | dim u32 = 768
//   | count x (id u32, dim x f32)

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fusionrec::features {

enum class Modality : std::uint8_t { title = 0, intro = 1, poster = 2 };

std::string_view modality_name(Modality m);

inline constexpr std::size_t kStoreDim = 768;
inline constexpr std::uint32_t kStoreVersion = 1;

class EmbeddingStore {
 public:
  explicit EmbeddingStore(Modality modality, std::size_t dim = kStoreDim);
  EmbeddingStore(EmbeddingStore&& other) noexcept;
  EmbeddingStore& operator=(EmbeddingStore&& other) noexcept;
  EmbeddingStore(const EmbeddingStore&) = delete;
  EmbeddingStore& operator=(const EmbeddingStore&) = delete;

  Modality modality() const { return modality_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  /// Rejects wrong length, non-finite entries and duplicate ids.
  void insert(std::uint32_t id, std::vector<float> vector);

  /// Stored vector or nullptr. Every call counts as one access.
  const std::vector<float>* find(std::uint32_t id) const;

  std::size_t access_count() const { return accesses_.load(std::memory_order_relaxed); }
  std::vector<std::uint32_t> ids() const;  // ascending

 private:
  Modality modality_;
  std::size_t dim_;
  std::unordered_map<std::uint32_t, std::vector<float>> vectors_;
  mutable std::atomic<std::size_t> accesses_{0};
};

/// Records are written in ascending id order.
void write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore load_store(const std::filesystem::path& path);

/// Seeded N(0, 1) vectors for `ids`, standing in for extractor output.
EmbeddingStore make_synthetic_store(Modality modality, const std::vector<std::uint32_t>& ids,
                                    std::uint64_t seed, std::size_t dim = kStoreDim);

}  // namespace fusionrec::features
