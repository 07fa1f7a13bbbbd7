#pragma once

// HSAM model container:
//   "HSAM" | u16 version | u32 components, height, width | u32 num_classes
//   | u32 layer_count | per layer: u8 kind + u32 hyperparameters
//   | per parameterised layer: weight then bias as f32 LE
//   | u32 CRC-32 of all preceding bytes

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsia/binary_io.hpp"
#include "hsia/model.hpp"

namespace hsia {

inline constexpr std::uint16_t kModelFormatVersion = 1;

inline std::vector<std::uint8_t> encode_model(const PatchClassifier& model) {
  ByteWriter w;
  w.put_bytes("HSAM", 4);
  w.put_u16(kModelFormatVersion);
  const auto& c = model.contract();
  w.put_u32(static_cast<std::uint32_t>(c.components));
  w.put_u32(static_cast<std::uint32_t>(c.height));
  w.put_u32(static_cast<std::uint32_t>(c.width));
  w.put_u32(static_cast<std::uint32_t>(model.num_classes()));
  w.put_u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& layer : model.layers()) {
    w.put_u8(static_cast<std::uint8_t>(layer.spec.index()));
    if (auto s = std::get_if<Conv2DSpec>(&layer.spec)) {
      for (auto v : {s->in_channels, s->out_channels, s->kernel_h, s->kernel_w, s->stride})
        w.put_u32(static_cast<std::uint32_t>(v));
    } else if (auto p = std::get_if<MaxPool2DSpec>(&layer.spec)) {
      w.put_u32(static_cast<std::uint32_t>(p->kernel));
      w.put_u32(static_cast<std::uint32_t>(p->stride));
    } else if (auto d = std::get_if<DenseSpec>(&layer.spec)) {
      w.put_u32(static_cast<std::uint32_t>(d->in_features));
      w.put_u32(static_cast<std::uint32_t>(d->out_features));
    }
  }
  for (const auto& layer : model.layers()) {
    if (!has_parameters(layer.spec)) continue;
    w.put_f32s(layer.weight.values());
    w.put_f32s(layer.bias.values());
  }
  w.put_checksum();
  return w.bytes();
}

/// Parses an HSAM buffer. When `expected` / `expected_classes` are given, a
/// model with a different contract raises ConfigError.
inline PatchClassifier decode_model(std::span<const std::uint8_t> bytes,
                                    std::optional<ModelContract> expected = std::nullopt,
                                    std::optional<std::size_t> expected_classes = std::nullopt) {
  ByteReader r(bytes);
  r.expect_magic("HSAM");
  const std::size_t version_at = r.offset();
  if (r.get_u16("version") != kModelFormatVersion) throw FormatError("unsupported model version", version_at);
  ModelContract contract;
  contract.components = r.get_u32("components");
  contract.height = r.get_u32("height");
  contract.width = r.get_u32("width");
  const std::size_t classes = r.get_u32("num_classes");
  const std::size_t count_at = r.offset();
  const std::size_t layer_count = r.get_u32("layer count");
  if (layer_count > 1024) throw FormatError("implausible layer count", count_at);

  std::vector<Layer<float>> layers;
  for (std::size_t i = 0; i < layer_count; ++i) {
    const std::size_t kind_at = r.offset();
    const auto kind = r.get_u8("layer kind");
    LayerSpec spec;
    switch (kind) {
      case 0: {
        Conv2DSpec s;
        s.in_channels = r.get_u32("conv in_channels");
        s.out_channels = r.get_u32("conv out_channels");
        s.kernel_h = r.get_u32("conv kernel_h");
        s.kernel_w = r.get_u32("conv kernel_w");
        s.stride = r.get_u32("conv stride");
        spec = s;
        break;
      }
      case 1: spec = ReluSpec{}; break;
      case 2: {
        MaxPool2DSpec s;
        s.kernel = r.get_u32("pool kernel");
        s.stride = r.get_u32("pool stride");
        spec = s;
        break;
      }
      case 3: spec = FlattenSpec{}; break;
      case 4: {
        DenseSpec s;
        s.in_features = r.get_u32("dense in_features");
        s.out_features = r.get_u32("dense out_features");
        spec = s;
        break;
      }
      default: throw FormatError("unknown layer kind " + std::to_string(kind), kind_at);
    }
    layers.push_back(Layer<float>{spec, {}, {}});
  }
  for (auto& layer : layers) {
    if (!has_parameters(layer.spec)) continue;
    auto [ws, bs] = parameter_shapes(layer.spec);
    if (ws.count() > r.remaining() / sizeof(float)) throw FormatError("truncated file while reading weights", r.offset());
    layer.weight = Tensor(ws);
    r.get_f32s(layer.weight.values(), "weights");
    layer.bias = Tensor(bs);
    r.get_f32s(layer.bias.values(), "biases");
  }
  r.expect_checksum();

  if (expected && *expected != contract) {
    throw ConfigError("model contract " + contract.patch_shape().to_string() + " does not match expected " +
                      expected->patch_shape().to_string());
  }
  if (expected_classes && *expected_classes != classes) {
    throw ConfigError("model has " + std::to_string(classes) + " classes, expected " +
                      std::to_string(*expected_classes));
  }
  return PatchClassifier(contract, classes, std::move(layers));
}

inline void save_model(const PatchClassifier& model, const std::string& path) {
  write_file_bytes(path, encode_model(model));
}

inline PatchClassifier load_model(const std::string& path, std::optional<ModelContract> expected = std::nullopt,
                                  std::optional<std::size_t> expected_classes = std::nullopt) {
  const auto bytes = read_file_bytes(path);
  return decode_model(bytes, expected, expected_classes);
}

}  // namespace hsia
