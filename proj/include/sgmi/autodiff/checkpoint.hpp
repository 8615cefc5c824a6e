#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sgmi/autodiff/parameter.hpp"

// Binary tensor container:
//   "SGMI" | u32 version | records...
//   record = u64 name_len | name bytes | u64 rank | u64 dims[rank] | f64 values[prod(dims)]
// All integers and floats little-endian. Records run to end of file.
namespace sgmi::ad {

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'M', 'I'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensor_records(std::ostream& out, std::span<const NamedTensor> records);
std::vector<NamedTensor> read_tensor_records(std::istream& in);

void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> records);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

}  // namespace sgmi::ad
