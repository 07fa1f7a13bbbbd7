#pragma once

// .hsc cube container:
//   "HSC1" | u16 version | u32 H, W, D, C | H*W*D f32 LE (row-major, band
//   fastest) | H*W u16 labels | u32 CRC-32 of all preceding bytes
//
// Class maps are written as binary PPM (P6).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hsia/binary_io.hpp"
#include "hsia/scene.hpp"

namespace hsia {

inline constexpr std::uint16_t kCubeFormatVersion = 1;

/// Raw cube contents without the [0,1] scene invariants; also used to
/// persist signed perturbation tensors.
struct CubeFile {
  std::size_t height = 0, width = 0, bands = 0, classes = 0;
  std::vector<float> values;
  std::vector<std::uint16_t> labels;

  friend bool operator==(const CubeFile&, const CubeFile&) = default;
};

inline std::vector<std::uint8_t> encode_cube(const CubeFile& cube) {
  if (cube.values.size() != cube.height * cube.width * cube.bands || cube.labels.size() != cube.height * cube.width) {
    throw ArgumentError("cube payload does not match its declared extents");
  }
  ByteWriter w;
  w.put_bytes("HSC1", 4);
  w.put_u16(kCubeFormatVersion);
  for (auto v : {cube.height, cube.width, cube.bands, cube.classes}) w.put_u32(static_cast<std::uint32_t>(v));
  w.put_f32s(cube.values);
  w.put_u16s(cube.labels);
  w.put_checksum();
  return w.bytes();
}

inline CubeFile decode_cube(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HSC1");
  const std::size_t version_at = r.offset();
  if (r.get_u16("version") != kCubeFormatVersion) throw FormatError("unsupported cube version", version_at);
  CubeFile cube;
  cube.height = r.get_u32("height");
  cube.width = r.get_u32("width");
  cube.bands = r.get_u32("bands");
  cube.classes = r.get_u32("classes");
  const std::uint64_t pixels = static_cast<std::uint64_t>(cube.height) * cube.width;
  const std::uint64_t needed = pixels * cube.bands * 4 + pixels * 2 + 4;
  if (needed > r.remaining()) throw FormatError("truncated file: payload shorter than header declares", r.offset());
  cube.values.resize(pixels * cube.bands);
  r.get_f32s(cube.values, "cube values");
  cube.labels.resize(pixels);
  r.get_u16s(cube.labels, "labels");
  r.expect_checksum();
  return cube;
}

inline CubeFile to_cube_file(const HsiScene& scene) {
  return {scene.height(), scene.width(), scene.bands(), scene.num_classes(), scene.cube.storage(),
          scene.labels.labels};
}

inline std::vector<std::string> default_class_names(std::size_t classes) {
  if (classes == 4) return {"normal", "tumor", "vessel", "background"};
  if (classes == 2) return {"normal", "cancer"};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

inline void write_cube_file(const CubeFile& cube, const std::string& path) { write_file_bytes(path, encode_cube(cube)); }

inline CubeFile read_cube_file(const std::string& path) { return decode_cube(read_file_bytes(path)); }

inline void write_cube(const HsiScene& scene, const std::string& path) {
  scene.validate();
  write_cube_file(to_cube_file(scene), path);
}

/// Reads a scene; class names are not stored and come back as defaults.
inline HsiScene read_cube(const std::string& path) {
  CubeFile f = read_cube_file(path);
  if (f.height == 0 || f.width == 0 || f.bands == 0) throw FormatError("cube has a zero extent", 6);
  HsiScene scene;
  scene.cube = Tensor(Shape{f.height, f.width, f.bands}, std::move(f.values));
  scene.labels.height = f.height;
  scene.labels.width = f.width;
  scene.labels.labels = std::move(f.labels);
  scene.class_names = default_class_names(f.classes);
  scene.validate();
  return scene;
}

using Rgb = std::array<std::uint8_t, 3>;

inline std::vector<Rgb> default_palette(std::size_t classes) {
  if (classes == 4) return {Rgb{46, 160, 67}, Rgb{214, 39, 40}, Rgb{31, 119, 180}, Rgb{150, 150, 150}};
  if (classes == 2) return {Rgb{46, 160, 67}, Rgb{214, 39, 40}};
  std::vector<Rgb> out;
  for (std::size_t c = 0; c < classes; ++c) {
    out.push_back(Rgb{static_cast<std::uint8_t>((c * 97 + 40) % 256), static_cast<std::uint8_t>((c * 57 + 90) % 256),
                      static_cast<std::uint8_t>((c * 151 + 20) % 256)});
  }
  return out;
}

/// Binary P6 image with one pixel per label. An optional comment line goes
/// into the header.
inline std::vector<std::uint8_t> render_class_map(const LabelMap& map, const std::vector<Rgb>& palette,
                                                  const std::string& comment = {}) {
  for (ClassId l : map.labels) {
    if (l != kUnassessed && l >= palette.size()) {
      throw ArgumentError("palette has no entry for class " + std::to_string(l));
    }
  }
  std::string header = "P6\n";
  if (!comment.empty()) header += "# " + comment + "\n";
  header += std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + map.size() * 3);
  for (ClassId l : map.labels) {
    const Rgb c = l == kUnassessed ? Rgb{0, 0, 0} : palette[l];
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

inline void write_class_map(const LabelMap& map, const std::vector<Rgb>& palette, const std::string& path,
                            const std::string& comment = {}) {
  write_file_bytes(path, render_class_map(map, palette, comment));
}

}  // namespace hsia
