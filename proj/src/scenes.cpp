#include "edt/scenes.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "edt/hash.hpp"

namespace edt::scenes {

namespace {

struct Roles {
  std::size_t color, shape, scale, pos_x, pos_y;
};

Roles roles_of(const ProductLabelSpace& space) {
  return {space.find("color"), space.find("shape"), space.find("scale"),
          space.find("pos_x"), space.find("pos_y")};
}

std::uint32_t value_or_zero(const FactorTuple& y, std::size_t idx) {
  return idx < y.size() ? y[idx] : 0;
}

std::uint32_t cardinality_or_one(const ProductLabelSpace& space, std::size_t idx) {
  return idx < space.num_factors() ? space.factor(idx).cardinality : 1;
}

}  // namespace

std::uint64_t digest(const SceneImage& img) { return fnv1a(img.pixels); }

bool shape_mask(Shape shape, std::uint32_t size, std::uint32_t row, std::uint32_t col) {
  if (row >= size || col >= size) return false;
  switch (shape) {
    case Shape::Square:
      return true;
    case Shape::Plus: {
      const std::uint32_t band = size / 2;
      const std::uint32_t lo = (size - band) / 2;
      return (row >= lo && row < lo + band) || (col >= lo && col < lo + band);
    }
    case Shape::Triangle:
      return col <= row;
  }
  return false;
}

void validate_renderable(const ProductLabelSpace& space, const RenderParams& params) {
  const Roles r = roles_of(space);
  std::size_t known = 0;
  for (std::size_t idx : {r.color, r.shape, r.scale, r.pos_x, r.pos_y})
    if (idx < space.num_factors()) ++known;
  if (known != space.num_factors()) {
    throw RenderError("roster has factors the renderer does not know; expected a subset of "
                      "color, shape, scale, pos_x, pos_y");
  }
  if (cardinality_or_one(space, r.color) > params.palette.size())
    throw RenderError("color cardinality exceeds the palette");
  if (cardinality_or_one(space, r.shape) > params.shapes.size())
    throw RenderError("shape cardinality exceeds the available masks");
  const std::uint32_t scales = cardinality_or_one(space, r.scale);
  if (scales > params.sizes.size()) throw RenderError("scale cardinality exceeds the size table");
  std::uint32_t max_size = 0;
  for (std::uint32_t s = 0; s < scales; ++s) max_size = std::max(max_size, params.sizes[s]);
  const std::uint32_t max_x = cardinality_or_one(space, r.pos_x) - 1;
  const std::uint32_t max_y = cardinality_or_one(space, r.pos_y) - 1;
  if (max_x + max_size > kWidth || max_y + max_size > kHeight) {
    throw RenderError("position range plus sprite size exceeds the 16x16 canvas");
  }
}

SceneImage render(const ProductLabelSpace& space, const RenderParams& params,
                  const FactorTuple& y) {
  if (!space.valid(y)) throw std::out_of_range("render: invalid tuple " + factors::to_string(y));
  const Roles r = roles_of(space);
  const Rgb color = params.palette.at(value_or_zero(y, r.color));
  const Shape shape = params.shapes.at(value_or_zero(y, r.shape));
  const std::uint32_t size = params.sizes.at(value_or_zero(y, r.scale));
  const std::uint32_t x0 = value_or_zero(y, r.pos_x);
  const std::uint32_t y0 = value_or_zero(y, r.pos_y);
  if (x0 + size > kWidth || y0 + size > kHeight) {
    throw RenderError("sprite at " + factors::to_string(y) + " leaves the canvas");
  }

  SceneImage img;
  const float channel[3] = {color.r, color.g, color.b};
  for (std::uint32_t row = 0; row < size; ++row) {
    for (std::uint32_t col = 0; col < size; ++col) {
      if (!shape_mask(shape, size, row, col)) continue;
      for (std::size_t c = 0; c < kChannels; ++c) {
        img.pixels[(c * kHeight + (y0 + row)) * kWidth + (x0 + col)] = channel[c];
      }
    }
  }
  return img;
}

SceneImage oracle_augment(const ProductLabelSpace& space, const RenderParams& params,
                          std::span<const factors::Element> elems, const LabeledImage& x) {
  if (render(space, params, x.labels) != x.image) {
    throw LabelingError("image is not the rendering of " + factors::to_string(x.labels));
  }
  return render(space, params, factors::act_tuple(space, elems, x.labels));
}

InjectivityResult injectivity_check(const ProductLabelSpace& space, const RenderParams& params) {
  std::unordered_map<std::uint64_t, std::vector<std::pair<CellId, SceneImage>>> buckets;
  for (CellId c = 0; c < space.grid_size(); ++c) {
    SceneImage img = render(space, params, space.tuple_of(c));
    auto& bucket = buckets[digest(img)];
    for (const auto& [other, other_img] : bucket) {
      if (other_img == img) return {false, std::make_pair(other, c)};
    }
    bucket.emplace_back(c, std::move(img));
  }
  return {true, std::nullopt};
}

Dataset::Dataset(ProductLabelSpace space, std::vector<FactorTuple> labels, std::vector<float> pixels)
    : space_(std::move(space)), labels_(std::move(labels)), pixels_(std::move(pixels)) {
  if (pixels_.size() != labels_.size() * kImageSize) {
    throw std::invalid_argument("dataset pixel count does not match instance count");
  }
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    const CellId c = space_.cell_of(labels_[k]);
    if (!by_cell_.emplace(c, k).second) {
      throw std::invalid_argument("dataset holds cell " + std::to_string(c) + " twice");
    }
  }
}

std::optional<std::size_t> Dataset::instance_of(CellId cell) const {
  auto it = by_cell_.find(cell);
  if (it == by_cell_.end()) return std::nullopt;
  return it->second;
}

Dataset render_grid(const ProductLabelSpace& space, const RenderParams& params) {
  validate_renderable(space, params);
  std::vector<FactorTuple> labels;
  std::vector<float> pixels;
  labels.reserve(space.grid_size());
  pixels.reserve(space.grid_size() * kImageSize);
  for (CellId c = 0; c < space.grid_size(); ++c) {
    labels.push_back(space.tuple_of(c));
    const SceneImage img = render(space, params, labels.back());
    pixels.insert(pixels.end(), img.pixels.begin(), img.pixels.end());
  }
  return Dataset(space, std::move(labels), std::move(pixels));
}

NearestDecoder::NearestDecoder(const ProductLabelSpace& space, const RenderParams& params) {
  grid_.reserve(space.grid_size() * kImageSize);
  for (CellId c = 0; c < space.grid_size(); ++c) {
    const SceneImage img = render(space, params, space.tuple_of(c));
    grid_.insert(grid_.end(), img.pixels.begin(), img.pixels.end());
    by_digest_[digest(img)].push_back(c);
  }
}

CellId NearestDecoder::decode(std::span<const float> image) const {
  if (image.size() != kImageSize) throw std::invalid_argument("decode: wrong image size");
  const std::size_t n = grid_.size() / kImageSize;
  CellId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (CellId c = 0; c < n; ++c) {
    const float* g = grid_.data() + c * kImageSize;
    double d = 0;
    for (std::size_t k = 0; k < kImageSize; ++k) {
      const double diff = static_cast<double>(image[k]) - g[k];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::optional<CellId> NearestDecoder::lookup(std::span<const float> image) const {
  auto it = by_digest_.find(fnv1a(image));
  if (it == by_digest_.end()) return std::nullopt;
  for (CellId c : it->second) {
    auto g = image_of(c);
    if (std::equal(g.begin(), g.end(), image.begin(), image.end())) return c;
  }
  return std::nullopt;
}

}  // namespace edt::scenes
