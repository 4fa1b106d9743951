#include "ensnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ensnet/errors.hpp"

namespace ensnet {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr int kMaxLabel = 10;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string(), DataError::Kind::missing_file);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw DataError(path.string() + ": truncated header at byte " + std::to_string(offset), DataError::Kind::truncated);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

int checked_label(std::uint8_t byte, std::size_t index, const std::filesystem::path& path) {
  if (byte >= kMaxLabel) {
    throw DataError(path.string() + ": label " + std::to_string(byte) + " of sample " + std::to_string(index) +
                        " outside [0,10)",
                    DataError::Kind::bad_label);
  }
  return static_cast<int>(byte);
}

}  // namespace

Shape Dataset::image_shape() const {
  const Shape& s = images.shape();
  return Shape(s.begin() + 1, s.end());
}

Dataset Dataset::head(std::size_t count) const {
  if (count == 0 || count >= size()) return *this;
  std::vector<std::size_t> indices(count);
  for (std::size_t i = 0; i < count; ++i) indices[i] = i;
  return gather(indices);
}

Dataset Dataset::gather(std::span<const std::size_t> indices) const {
  if (size() == 0) throw ContractError("Dataset::gather: empty dataset");
  if (indices.empty()) throw ContractError("Dataset::gather: no indices");
  const std::size_t per = images.size() / size();
  Shape shape = images.shape();
  shape[0] = indices.size();
  Dataset out;
  out.split = split;
  out.images = Tensor<float>(shape);
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) throw ContractError("Dataset::gather: index " + std::to_string(src) + " out of range");
    std::memcpy(out.images.ptr() + i * per, images.ptr() + src * per, per * sizeof(float));
    out.labels.push_back(labels[src]);
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, Split split) {
  const std::vector<std::uint8_t> image_bytes = read_file(images_path);
  const std::vector<std::uint8_t> label_bytes = read_file(labels_path);

  const std::uint32_t image_magic = read_be32(image_bytes, 0, images_path);
  if (image_magic != kIdxImagesMagic) {
    throw DataError(images_path.string() + ": bad IDX image magic " + std::to_string(image_magic),
                    DataError::Kind::bad_magic);
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels_path);
  if (label_magic != kIdxLabelsMagic) {
    throw DataError(labels_path.string() + ": bad IDX label magic " + std::to_string(label_magic),
                    DataError::Kind::bad_magic);
  }

  const std::size_t count = read_be32(image_bytes, 4, images_path);
  const std::size_t rows = read_be32(image_bytes, 8, images_path);
  const std::size_t cols = read_be32(image_bytes, 12, images_path);
  const std::size_t label_count = read_be32(label_bytes, 4, labels_path);
  if (count == 0 || rows == 0 || cols == 0) {
    throw DataError(images_path.string() + ": empty IDX image set", DataError::Kind::count_mismatch);
  }
  const std::size_t pixels = count * rows * cols;
  if (image_bytes.size() < 16 + pixels) {
    throw DataError(images_path.string() + ": truncated, expected " + std::to_string(16 + pixels) + " bytes, found " +
                        std::to_string(image_bytes.size()),
                    DataError::Kind::truncated);
  }
  if (label_bytes.size() < 8 + label_count) {
    throw DataError(labels_path.string() + ": truncated, expected " + std::to_string(8 + label_count) +
                        " bytes, found " + std::to_string(label_bytes.size()),
                    DataError::Kind::truncated);
  }
  if (label_count != count) {
    throw DataError(images_path.string() + " holds " + std::to_string(count) + " images but " + labels_path.string() +
                        " holds " + std::to_string(label_count) + " labels",
                    DataError::Kind::count_mismatch);
  }

  Dataset out;
  out.split = split;
  out.images = Tensor<float>({count, 1, rows, cols});
  for (std::size_t i = 0; i < pixels; ++i) out.images[i] = static_cast<float>(image_bytes[16 + i]) / 255.0f;
  out.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.labels.push_back(checked_label(label_bytes[8 + i], i, labels_path));
  return out;
}

Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths, Split split) {
  if (batch_paths.empty()) throw DataError("load_cifar10: no batch files given", DataError::Kind::missing_file);
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t records = 0;
  for (const auto& path : batch_paths) {
    files.push_back(read_file(path));
    const std::size_t bytes = files.back().size();
    if (bytes == 0 || bytes % kCifarRecord != 0) {
      throw DataError(path.string() + ": length " + std::to_string(bytes) + " is not a multiple of 3073",
                      DataError::Kind::bad_length);
    }
    records += bytes / kCifarRecord;
  }

  Dataset out;
  out.split = split;
  out.images = Tensor<float>({records, 3, 32, 32});
  out.labels.reserve(records);
  std::size_t index = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const std::vector<std::uint8_t>& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord, ++index) {
      out.labels.push_back(checked_label(bytes[off], index, batch_paths[f]));
      float* dst = out.images.ptr() + index * 3072;
      for (std::size_t p = 0; p < 3072; ++p) dst[p] = static_cast<float>(bytes[off + 1 + p]) / 255.0f;
    }
  }
  return out;
}

bool AugmentSpec::is_identity() const {
  return rotate_deg == Range{0, 0} && scale == Range{1, 1} && shift_frac == Range{0, 0} && shear_deg == Range{0, 0};
}

void AugmentSpec::validate() const {
  for (const Range* r : {&rotate_deg, &scale, &shift_frac, &shear_deg}) {
    if (!(r->lo <= r->hi) || !std::isfinite(r->lo) || !std::isfinite(r->hi)) {
      throw ConfigError("augmentation range [" + std::to_string(r->lo) + "," + std::to_string(r->hi) + "] is invalid");
    }
  }
  if (scale.lo <= 0.0) throw ConfigError("augmentation scale must be positive");
  if (shear_deg.lo <= -90.0 || shear_deg.hi >= 90.0) throw ConfigError("augmentation shear must lie in (-90,90) degrees");
}

AffineParams sample_affine(const AugmentSpec& spec, Rng& rng) {
  auto draw = [&rng](const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); };
  AffineParams p;
  p.rotate_deg = draw(spec.rotate_deg);
  p.scale = draw(spec.scale);
  p.shift_x = draw(spec.shift_frac);
  p.shift_y = draw(spec.shift_frac);
  p.shear_deg = draw(spec.shear_deg);
  return p;
}

Tensor<float> warp_affine(const Tensor<float>& image, const AffineParams& params) {
  if (image.rank() != 3) throw DimensionError("warp_affine: image must be [C,H,W], got " + to_string(image.shape()));
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const double deg = std::numbers::pi / 180.0;
  const double c = std::cos(params.rotate_deg * deg);
  const double s = std::sin(params.rotate_deg * deg);
  const double k = std::tan(params.shear_deg * deg);
  const double inv_scale = 1.0 / params.scale;
  // Inverse of R * Sh * S is S^-1 * Sh^-1 * R^T.
  //   R^T = [[c, s], [-s, c]], Sh^-1 = [[1, -k], [0, 1]]
  const double i00 = inv_scale * (c + k * s);
  const double i01 = inv_scale * (s - k * c);
  const double i10 = inv_scale * (-s);
  const double i11 = inv_scale * c;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double tx = params.shift_x * static_cast<double>(width);
  const double ty = params.shift_y * static_cast<double>(height);

  Tensor<float> out(image.shape());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx - tx;
      const double dy = static_cast<double>(y) - cy - ty;
      const double sx = i00 * dx + i01 * dy + cx;
      const double sy = i10 * dx + i11 * dy + cy;
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const double ax = sx - fx0;
      const double ay = sy - fy0;
      const auto x0 = static_cast<std::ptrdiff_t>(fx0);
      const auto y0 = static_cast<std::ptrdiff_t>(fy0);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const float* plane = image.ptr() + ch * height * width;
        auto at = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(height) || xx >= static_cast<std::ptrdiff_t>(width)) {
            return 0.0;
          }
          return plane[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
        };
        const double v = (1.0 - ay) * ((1.0 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                         ay * ((1.0 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
        out[(ch * height + y) * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Tensor<float> augment(const Tensor<float>& image, const AugmentSpec& spec, Rng& rng) {
  if (spec.is_identity()) return image;
  return warp_affine(image, sample_affine(spec, rng));
}

void augment_batch(Tensor<float>& images, std::span<const std::size_t> sample_ids, const AugmentSpec& spec,
                   std::uint64_t seed, std::uint64_t epoch) {
  if (images.rank() != 4 || images.dim(0) != sample_ids.size()) {
    throw DimensionError("augment_batch: " + std::to_string(sample_ids.size()) + " ids for batch " +
                         to_string(images.shape()));
  }
  if (spec.is_identity()) return;
  const Shape image_shape(images.shape().begin() + 1, images.shape().end());
  const std::size_t per = numel(image_shape);
  for (std::size_t r = 0; r < sample_ids.size(); ++r) {
    Rng rng(seed, StreamPurpose::augment, {epoch, sample_ids[r]});
    std::vector<float> pixels(images.ptr() + r * per, images.ptr() + (r + 1) * per);
    const Tensor<float> warped = warp_affine(Tensor<float>(image_shape, std::move(pixels)), sample_affine(spec, rng));
    std::memcpy(images.ptr() + r * per, warped.ptr(), per * sizeof(float));
  }
}

Dataset expand_static(const Dataset& source, const AugmentSpec& spec, std::size_t copies, std::uint64_t seed) {
  const std::size_t n = source.size();
  if (n == 0) throw ContractError("expand_static: empty dataset");
  spec.validate();
  Shape shape = source.images.shape();
  shape[0] = n * (copies + 1);
  Dataset out;
  out.split = source.split;
  out.images = Tensor<float>(shape);
  std::memcpy(out.images.ptr(), source.images.ptr(), source.images.size() * sizeof(float));
  out.labels = source.labels;
  const std::size_t per = source.images.size() / n;
  const Shape image_shape = source.image_shape();
  for (std::size_t copy = 1; copy <= copies; ++copy) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(seed, StreamPurpose::static_augment, {copy, i});
      std::vector<float> pixels(source.images.ptr() + i * per, source.images.ptr() + (i + 1) * per);
      const Tensor<float> warped = augment(Tensor<float>(image_shape, std::move(pixels)), spec, rng);
      std::memcpy(out.images.ptr() + (copy * n + i) * per, warped.ptr(), per * sizeof(float));
      out.labels.push_back(source.labels[i]);
    }
  }
  return out;
}

}  // namespace ensnet
