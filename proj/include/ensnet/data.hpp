#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ensnet/rng.hpp"
#include "ensnet/tensor.hpp"

namespace ensnet {

enum class Split { train, test };

struct Dataset {
  Tensor<float> images;  // [N,C,H,W], values in [0,1]
  std::vector<int> labels;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  Shape image_shape() const;  // [C,H,W]

  // First `count` samples (all when count is 0 or exceeds the size).
  Dataset head(std::size_t count) const;
  // Samples at `indices`, in that order.
  Dataset gather(std::span<const std::size_t> indices) const;
};

// MNIST-style IDX pair: big-endian, images magic 0x00000803 with dims
// (N, rows, cols), labels magic 0x00000801 with dim N; pixel byte b -> b/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::train);

// CIFAR-10 binary batches: 3073-byte records, one label byte then
// 1024 R, 1024 G, 1024 B bytes.
Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths, Split split = Split::train);

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Range&) const = default;
};

// Uniform ranges for one random affine transform per image.
struct AugmentSpec {
  Range rotate_deg{0.0, 0.0};
  Range scale{1.0, 1.0};
  Range shift_frac{0.0, 0.0};  // fraction of width (x) or height (y), drawn independently
  Range shear_deg{0.0, 0.0};

  bool is_identity() const;
  void validate() const;

  bool operator==(const AugmentSpec&) const = default;
};

struct AffineParams {
  double rotate_deg = 0.0;
  double scale = 1.0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double shear_deg = 0.0;
};

AffineParams sample_affine(const AugmentSpec& spec, Rng& rng);

// Warps a [C,H,W] image. Source points map to
//   rotate(theta) * shear_x(phi) * scale(s) * (p - center) + center + shift
// with x to the right and y down; output pixels are bilinear samples of the
// inverse map, zero outside the source, clamped to [0,1].
Tensor<float> warp_affine(const Tensor<float>& image, const AffineParams& params);

Tensor<float> augment(const Tensor<float>& image, const AugmentSpec& spec, Rng& rng);

// Augments rows of a [N,C,H,W] batch in place. Row r uses the stream keyed
// by (seed, epoch, sample_ids[r]), so the result is independent of batching.
void augment_batch(Tensor<float>& images, std::span<const std::size_t> sample_ids, const AugmentSpec& spec,
                   std::uint64_t seed, std::uint64_t epoch);

// Original samples followed by `copies` augmented copies.
Dataset expand_static(const Dataset& source, const AugmentSpec& spec, std::size_t copies, std::uint64_t seed);

}  // namespace ensnet
