#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edt/factors.hpp"

namespace edt::scenes {

using factors::CellId;
using factors::FactorTuple;
using factors::ProductLabelSpace;

inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kHeight = 16;
inline constexpr std::size_t kWidth = 16;
inline constexpr std::size_t kImageSize = kChannels * kHeight * kWidth;

/// 3x16x16 image, channel-major (c, row, col), intensities in [0, 1].
struct SceneImage {
  std::array<float, kImageSize> pixels{};

  float at(std::size_t c, std::size_t row, std::size_t col) const {
    return pixels[(c * kHeight + row) * kWidth + col];
  }
  bool operator==(const SceneImage&) const = default;
};

std::uint64_t digest(const SceneImage& img);

enum class Shape : std::uint8_t { Square = 0, Plus = 1, Triangle = 2 };

struct Rgb {
  float r, g, b;
  bool operator==(const Rgb&) const = default;
};

struct RenderParams {
  // red, yellow, green, blue, purple
  std::array<Rgb, 5> palette{{{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}}};
  std::array<Shape, 3> shapes{Shape::Square, Shape::Plus, Shape::Triangle};
  std::array<std::uint32_t, 3> sizes{4, 6, 8};
};

bool shape_mask(Shape shape, std::uint32_t size, std::uint32_t row, std::uint32_t col);

/// Raised when a roster cannot be rendered with the given parameters.
class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks that every factor is one the renderer understands (color, shape,
/// scale, pos_x, pos_y) and that every valid tuple stays inside the canvas.
void validate_renderable(const ProductLabelSpace& space, const RenderParams& params);

/// Black background; the shape mask of the chosen size, anchored at
/// (pos_x, pos_y), filled with the palette colour. Absent factors take value 0.
SceneImage render(const ProductLabelSpace& space, const RenderParams& params,
                  const FactorTuple& y);

class LabelingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabeledImage {
  FactorTuple labels;
  SceneImage image;
};

/// Exact action on images: render(act_tuple(elems, y)). Throws LabelingError
/// when the image is not the rendering of its labels.
SceneImage oracle_augment(const ProductLabelSpace& space, const RenderParams& params,
                          std::span<const factors::Element> elems, const LabeledImage& x);

struct InjectivityResult {
  bool injective = true;
  std::optional<std::pair<CellId, CellId>> collision;
};

InjectivityResult injectivity_check(const ProductLabelSpace& space, const RenderParams& params);

/// Labelled images. The full rendered grid stores instance k = cell k, but
/// loaded files may list instances in any order.
class Dataset {
 public:
  Dataset(ProductLabelSpace space, std::vector<FactorTuple> labels, std::vector<float> pixels);

  const ProductLabelSpace& space() const { return space_; }
  std::size_t size() const { return labels_.size(); }
  const FactorTuple& labels(std::size_t k) const { return labels_[k]; }
  const std::vector<FactorTuple>& all_labels() const { return labels_; }
  std::span<const float> image(std::size_t k) const {
    return {pixels_.data() + k * kImageSize, kImageSize};
  }
  const std::vector<float>& pixels() const { return pixels_; }

  /// Instance holding the given cell, if present.
  std::optional<std::size_t> instance_of(CellId cell) const;

 private:
  ProductLabelSpace space_;
  std::vector<FactorTuple> labels_;
  std::vector<float> pixels_;
  std::unordered_map<CellId, std::size_t> by_cell_;
};

Dataset render_grid(const ProductLabelSpace& space, const RenderParams& params);

/// Exhaustive nearest-image lookup over the rendered grid (squared L2).
class NearestDecoder {
 public:
  NearestDecoder(const ProductLabelSpace& space, const RenderParams& params);

  CellId decode(std::span<const float> image) const;
  /// Exact match only; nullopt if the image is not a rendering.
  std::optional<CellId> lookup(std::span<const float> image) const;
  std::span<const float> image_of(CellId c) const {
    return {grid_.data() + c * kImageSize, kImageSize};
  }

 private:
  std::vector<float> grid_;
  std::unordered_map<std::uint64_t, std::vector<CellId>> by_digest_;
};

}  // namespace edt::scenes
