#include "porogen/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "porogen/error.hpp"

namespace porogen {

namespace {

constexpr char kMagic[16] = "POROGEN-VOL";
constexpr std::uint8_t kDtypeBits = 0;
constexpr std::uint8_t kDtypeF32 = 1;

void check_voxel_size(VoxelSize const& vs) {
  for (double d : vs) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("voxel_size must be strictly positive");
  }
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char const*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("volume: truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_header(std::ostream& os, Dims const& d, std::uint8_t dtype) {
  os.write(kMagic, 16);
  for (auto n : d) {
    if (n > 0xffffffffu) throw DimensionError("volume: dimension exceeds u32");
    put_u32(os, static_cast<std::uint32_t>(n));
  }
  os.put(static_cast<char>(dtype));
}

std::ofstream open_out(std::filesystem::path const& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

void write_sidecar(std::filesystem::path const& path, VoxelSize const& vs,
                   nlohmann::json const& provenance) {
  nlohmann::json j;
  j["voxel_size"] = vs;
  j["provenance"] = provenance;
  auto os = open_out(sidecar_path(path));
  os << j.dump(2) << '\n';
}

struct Header {
  Dims dims;
  std::uint8_t dtype;
};

Header read_header(std::istream& is, std::filesystem::path const& path) {
  char magic[16];
  if (!is.read(magic, 16) || std::memcmp(magic, kMagic, 16) != 0) {
    throw IoError("not a volume file (bad magic): " + path.string());
  }
  Header h{};
  for (auto& n : h.dims) n = get_u32(is);
  int const t = is.get();
  if (t == std::char_traits<char>::eof()) throw IoError("volume: truncated header");
  h.dtype = static_cast<std::uint8_t>(t);
  return h;
}

VoxelSize sidecar_voxel_size(std::filesystem::path const& path) {
  auto const j = read_sidecar(path);
  if (!j.contains("voxel_size")) {
    throw ConfigError("metadata " + sidecar_path(path).string() + " lacks field 'voxel_size'");
  }
  VoxelSize vs{};
  try {
    vs = j.at("voxel_size").get<VoxelSize>();
  } catch (nlohmann::json::exception const&) {
    throw ConfigError("metadata field 'voxel_size' must be an array of three numbers");
  }
  check_voxel_size(vs);
  return vs;
}

}  // namespace

template <class T>
Volume<T>::Volume(Dims dims, T fill, VoxelSize voxel_size)
    : dims_(dims), voxel_size_(voxel_size), data_(voxel_count(dims), fill) {
  check_voxel_size(voxel_size_);
}

template <class T>
Volume<T>::Volume(Dims dims, std::vector<T> data, VoxelSize voxel_size)
    : dims_(dims), voxel_size_(voxel_size), data_(std::move(data)) {
  if (data_.size() != voxel_count(dims_)) throw DimensionError("Volume: data length does not match dims");
  check_voxel_size(voxel_size_);
}

template <class T>
void Volume<T>::set_voxel_size(VoxelSize vs) {
  check_voxel_size(vs);
  voxel_size_ = vs;
}

template class Volume<std::uint8_t>;
template class Volume<double>;

std::size_t count_ones(BinaryVolume const& v) {
  return static_cast<std::size_t>(std::count_if(v.data().begin(), v.data().end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

std::filesystem::path sidecar_path(std::filesystem::path const& path) {
  auto p = path;
  p += ".json";
  return p;
}

nlohmann::json read_sidecar(std::filesystem::path const& path) {
  auto const sp = sidecar_path(path);
  std::ifstream is(sp);
  if (!is) throw ConfigError("missing metadata file " + sp.string() + " (required field 'voxel_size')");
  try {
    return nlohmann::json::parse(is);
  } catch (nlohmann::json::parse_error const& e) {
    throw ConfigError("malformed metadata file " + sp.string() + ": " + e.what());
  }
}

void write_volume(std::filesystem::path const& path, BinaryVolume const& v,
                  nlohmann::json const& provenance) {
  auto os = open_out(path);
  write_header(os, v.dims(), kDtypeBits);
  std::vector<unsigned char> packed((v.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i]) packed[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
  }
  os.write(reinterpret_cast<char const*>(packed.data()), std::streamsize(packed.size()));
  if (!os) throw IoError("write failed: " + path.string());
  write_sidecar(path, v.voxel_size(), provenance);
}

void write_volume(std::filesystem::path const& path, GrayVolume const& v,
                  nlohmann::json const& provenance) {
  auto os = open_out(path);
  write_header(os, v.dims(), kDtypeF32);
  std::vector<unsigned char> buf(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto const bits = std::bit_cast<std::uint32_t>(static_cast<float>(v[i]));
    for (int k = 0; k < 4; ++k) buf[i * 4 + k] = static_cast<unsigned char>(bits >> (8 * k));
  }
  os.write(reinterpret_cast<char const*>(buf.data()), std::streamsize(buf.size()));
  if (!os) throw IoError("write failed: " + path.string());
  write_sidecar(path, v.voxel_size(), provenance);
}

BinaryVolume read_binary_volume(std::filesystem::path const& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open volume: " + path.string());
  auto const h = read_header(is, path);
  if (h.dtype != kDtypeBits) throw IoError("expected a bit-packed binary volume: " + path.string());
  std::size_t const n = voxel_count(h.dims);
  std::vector<unsigned char> packed((n + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(packed.data()), std::streamsize(packed.size()))) {
    throw IoError("volume payload truncated: " + path.string());
  }
  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return BinaryVolume(h.dims, std::move(data), sidecar_voxel_size(path));
}

GrayVolume read_gray_volume(std::filesystem::path const& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open volume: " + path.string());
  auto const h = read_header(is, path);
  if (h.dtype != kDtypeF32) throw IoError("expected a float32 volume: " + path.string());
  std::size_t const n = voxel_count(h.dims);
  std::vector<unsigned char> buf(n * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()))) {
    throw IoError("volume payload truncated: " + path.string());
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= std::uint32_t(buf[i * 4 + k]) << (8 * k);
    float const f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) throw IoError("non-finite intensity in " + path.string());
    data[i] = f;
  }
  return GrayVolume(h.dims, std::move(data), sidecar_voxel_size(path));
}

}  // namespace porogen
