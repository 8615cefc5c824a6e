#include "sgmi/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "sgmi/core/error.hpp"

namespace sgmi::ad {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw LoadError(std::string("checkpoint: truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

// Guards against absurd sizes from corrupt files before allocating.
constexpr std::uint64_t kMaxNameLength = 1 << 16;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

void write_tensor_records(std::ostream& out, std::span<const NamedTensor> records) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& rec : records) {
    put_le<std::uint64_t>(out, rec.name.size());
    out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
    put_le<std::uint64_t>(out, rec.value.rank());
    for (std::size_t d : rec.value.shape()) put_le<std::uint64_t>(out, d);
    for (double x : rec.value.data()) put_le<double>(out, x);
  }
}

std::vector<NamedTensor> read_tensor_records(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw LoadError("checkpoint: bad magic bytes (not an SGMI container)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint: unsupported format version " + std::to_string(version));
  }
  std::vector<NamedTensor> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_len = get_le<std::uint64_t>(in, "name length");
    if (name_len > kMaxNameLength) throw LoadError("checkpoint: corrupt name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw LoadError("checkpoint: truncated while reading name");
    }
    const auto rank = get_le<std::uint64_t>(in, "rank");
    if (rank > kMaxRank) throw LoadError("checkpoint: corrupt rank for '" + name + "'");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const auto d = get_le<std::uint64_t>(in, "dims");
      shape.push_back(static_cast<std::size_t>(d));
      numel *= d;
      if (numel > kMaxElements) throw LoadError("checkpoint: corrupt dims for '" + name + "'");
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& x : data) x = get_le<double>(in, "values");
    records.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return records;
}

void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("checkpoint: cannot open '" + path.string() + "' for writing");
  write_tensor_records(out, records);
  if (!out) throw LoadError("checkpoint: write failed for '" + path.string() + "'");
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("checkpoint: cannot open '" + path.string() + "'");
  return read_tensor_records(in);
}

}  // namespace sgmi::ad
