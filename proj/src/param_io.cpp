#include "perminv/param_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace perminv {

static_assert(std::endian::native == std::endian::little,
              "parameter files are written in host order; only little-endian hosts supported");

namespace {

constexpr char kMagic[8] = {'P', 'E', 'R', 'M', 'I', 'N', 'V', '\0'};
constexpr std::uint8_t kNetwork = 1;
constexpr std::uint8_t kTensor = 2;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("parameter file truncated");
  }
  return value;
}

void put_doubles(std::ostream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_doubles(std::istream& in, Mat& m) {
  if (!in.read(reinterpret_cast<char*>(m.data().data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw std::runtime_error("parameter file truncated");
  }
}

}  // namespace

const ParamSection& ParamBundle::find(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("parameter section '" + name + "' not found");
}

void save_params(const ParamBundle& bundle, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kParamFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.sections.size()));
  for (const auto& section : bundle.sections) {
    const bool is_net = std::holds_alternative<Mlp>(section.content);
    put<std::uint8_t>(out, is_net ? kNetwork : kTensor);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(section.name.size()));
    out.write(section.name.data(), static_cast<std::streamsize>(section.name.size()));
    if (is_net) {
      const Mlp& net = std::get<Mlp>(section.content);
      const MlpSpec& spec = net.spec();
      put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.widths.size()));
      for (std::size_t w : spec.widths) put<std::uint64_t>(out, w);
      put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.activation));
      put<double>(out, spec.slope);
      put<std::uint64_t>(out, net.seed());
      for (const Mat* p : net.parameters()) put_doubles(out, *p);
    } else {
      const Mat& m = std::get<Mat>(section.content);
      put<std::uint64_t>(out, m.rows());
      put<std::uint64_t>(out, m.cols());
      put_doubles(out, m);
    }
  }
  if (!out) throw std::runtime_error("failed writing parameter file");
}

ParamBundle load_params(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a parameter file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kParamFormatVersion) {
    throw std::runtime_error("unsupported parameter file version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  ParamBundle bundle;
  for (std::uint32_t s = 0; s < count; ++s) {
    const auto kind = get<std::uint8_t>(in);
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("parameter file truncated");
    if (kind == kNetwork) {
      MlpSpec spec;
      const auto n_widths = get<std::uint32_t>(in);
      for (std::uint32_t i = 0; i < n_widths; ++i) {
        spec.widths.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
      }
      const auto act = get<std::uint8_t>(in);
      if (act > static_cast<std::uint8_t>(Activation::identity)) {
        throw std::runtime_error("parameter file: bad activation code");
      }
      spec.activation = static_cast<Activation>(act);
      spec.slope = get<double>(in);
      const auto seed = get<std::uint64_t>(in);
      // The seeded draw is overwritten; it only restores the recorded seed.
      Mlp net(spec, seed);
      for (Mat* p : net.parameters()) get_doubles(in, *p);
      bundle.sections.push_back({std::move(name), std::move(net)});
    } else if (kind == kTensor) {
      const auto rows = get<std::uint64_t>(in);
      const auto cols = get<std::uint64_t>(in);
      Mat m(rows, cols);
      get_doubles(in, m);
      bundle.sections.push_back({std::move(name), std::move(m)});
    } else {
      throw std::runtime_error("parameter file: unknown section kind");
    }
  }
  return bundle;
}

void save_params(const ParamBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_params(bundle, out);
}

ParamBundle load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_params(in);
}

}  // namespace perminv
