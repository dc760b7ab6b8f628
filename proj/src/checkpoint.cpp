#include "fusionrec/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "fusionrec/binary_io.hpp"

namespace fusionrec {

namespace {
constexpr char kMagic[4] = {'F', 'R', 'W', 'T'};
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const std::vector<ad::Parameter<T>*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto* p : params) {
    if (p->name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("parameter name too long: " + p->name);
    }
    binary::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    for (const T v : p->value.values()) binary::write_f32(out, static_cast<float>(v));
  }
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "FRWT") throw DataError("bad checkpoint magic in " + path.string());
  const auto version = binary::read_le<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  std::vector<NamedMatrix> out;
  std::uint16_t name_len = 0;
  while (binary::try_read_le(in, name_len, "parameter name length")) {
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len) throw DataError("truncated checkpoint in parameter name");
    const auto rows = binary::read_le<std::uint32_t>(in, name + " rows");
    const auto cols = binary::read_le<std::uint32_t>(in, name + " cols");
    std::vector<float> values(static_cast<std::size_t>(rows) * cols);
    for (auto& v : values) v = binary::read_f32(in, name + " values");
    out.push_back({std::move(name), Matrix<float>(rows, cols, std::move(values))});
  }
  return out;
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, const std::vector<ad::Parameter<T>*>& params) {
  auto records = read_checkpoint(path);
  if (records.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(records.size()) + " parameters, model expects " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& r = records[i];
    if (r.name != p.name) throw DataError("checkpoint parameter " + std::to_string(i) + " is '" + r.name + "', expected '" + p.name + "'");
    if (r.value.rows() != p.value.rows() || r.value.cols() != p.value.cols()) {
      throw DataError("checkpoint shape mismatch for '" + p.name + "': " + shape_str(r.value) + " vs " +
                      shape_str(p.value));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = records[i].value.template cast<T>();
    params[i]->zero_grad();
  }
}

template void save_checkpoint(const std::filesystem::path&, const std::vector<ad::Parameter<float>*>&);
template void save_checkpoint(const std::filesystem::path&, const std::vector<ad::Parameter<double>*>&);
template void load_checkpoint(const std::filesystem::path&, const std::vector<ad::Parameter<float>*>&);
template void load_checkpoint(const std::filesystem::path&, const std::vector<ad::Parameter<double>*>&);

}  // namespace fusionrec
