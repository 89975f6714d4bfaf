#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "perminv/mat.hpp"
#include "perminv/mlp.hpp"

namespace perminv {

/// Named entry of a parameter file: either a whole network (spec, init seed,
/// weights) or a bare tensor such as a log-std row.
struct ParamSection {
  std::string name;
  std::variant<Mlp, Mat> content;

  friend bool operator==(const ParamSection&, const ParamSection&) = default;
};

struct ParamBundle {
  std::vector<ParamSection> sections;

  const ParamSection& find(const std::string& name) const;
  friend bool operator==(const ParamBundle&, const ParamBundle&) = default;
};

/// Current on-disk format version.
inline constexpr std::uint32_t kParamFormatVersion = 1;

/// Binary layout (little-endian): magic "PERMINV\0", u32 version,
/// u32 section count, then per section a u8 kind (1 = network, 2 = tensor),
/// u32-length-prefixed name and the payload. Network payload: u32 width
/// count, u64 widths, u8 activation, f64 slope, u64 seed, then W and b per
/// layer as raw f64 in row-major order. Tensor payload: u64 rows, u64 cols,
/// raw f64.
void save_params(const ParamBundle& bundle, std::ostream& out);
ParamBundle load_params(std::istream& in);

void save_params(const ParamBundle& bundle, const std::filesystem::path& path);
ParamBundle load_params(const std::filesystem::path& path);

}  // namespace perminv
