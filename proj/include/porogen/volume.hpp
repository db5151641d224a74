#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

namespace porogen {

using Dims = std::array<std::size_t, 3>;
using VoxelSize = std::array<double, 3>;

inline std::size_t voxel_count(Dims const& d) { return d[0] * d[1] * d[2]; }

// Voxels are stored x fastest: index = x + nx * (y + ny * z).
template <class T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Dims dims, T fill = T{}, VoxelSize voxel_size = {1.0, 1.0, 1.0});
  Volume(Dims dims, std::vector<T> data, VoxelSize voxel_size = {1.0, 1.0, 1.0});

  Dims const& dims() const { return dims_; }
  std::size_t nx() const { return dims_[0]; }
  std::size_t ny() const { return dims_[1]; }
  std::size_t nz() const { return dims_[2]; }
  std::size_t size() const { return data_.size(); }
  VoxelSize const& voxel_size() const { return voxel_size_; }
  void set_voxel_size(VoxelSize vs);

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_[0] * (y + dims_[1] * z);
  }
  T operator()(std::size_t x, std::size_t y, std::size_t z) const { return data_[index(x, y, z)]; }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  std::vector<T> const& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(Volume const&) const = default;

 private:
  Dims dims_{0, 0, 0};
  VoxelSize voxel_size_{1.0, 1.0, 1.0};
  std::vector<T> data_;
};

// 1 = pore, 0 = matrix.
using BinaryVolume = Volume<std::uint8_t>;
using GrayVolume = Volume<double>;

std::size_t count_ones(BinaryVolume const& v);

// Raw format: 16-byte magic, little-endian u32 nx, ny, nz, u8 dtype
// (0 = bit-packed LSB first, 1 = f32), then the payload. A sidecar
// "<path>.json" carries voxel_size and provenance.
void write_volume(std::filesystem::path const& path, BinaryVolume const& v,
                  nlohmann::json const& provenance = nlohmann::json::object());
void write_volume(std::filesystem::path const& path, GrayVolume const& v,
                  nlohmann::json const& provenance = nlohmann::json::object());
BinaryVolume read_binary_volume(std::filesystem::path const& path);
GrayVolume read_gray_volume(std::filesystem::path const& path);
nlohmann::json read_sidecar(std::filesystem::path const& path);
std::filesystem::path sidecar_path(std::filesystem::path const& path);

}  // namespace porogen
