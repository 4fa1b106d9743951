#pragma once

// Small models and synthetic datasets for fast tests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ensnet/data.hpp"
#include "ensnet/model.hpp"
#include "ensnet/rng.hpp"

namespace ensnet::testing {

// 1x8x8 input -> 8x4x4 feature-maps, split into `k` blocks.
inline ModelConfig micro_config(std::size_t k = 2) {
  ModelConfig c;
  c.name = "micro";
  c.input_shape = {1, 8, 8};
  c.trunk = {TrunkEntry::conv(4, true), TrunkEntry::dropout(0.1), TrunkEntry::maxpool(), TrunkEntry::conv(8, true)};
  c.split_count = k;
  c.base_head = HeadConfig{16, 16, true, 0.2, 0.2};
  c.subnet_head = HeadConfig{8, 8, true, 0.2, 0.2};
  c.num_classes = 4;
  return c;
}

// Class c lights up quadrant c of an 8x8 image, plus noise.
inline Dataset quadrant_dataset(std::size_t n, std::uint64_t seed, Split split = Split::train) {
  Rng rng(seed, StreamPurpose::test, {n});
  Dataset d;
  d.split = split;
  d.images = TensorF({n, 1, 8, 8});
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.engine()() % 4);
    d.labels.push_back(label);
    float* img = d.images.ptr() + i * 64;
    for (std::size_t p = 0; p < 64; ++p) img[p] = static_cast<float>(rng.uniform(0.0, 0.3));
    const std::size_t r0 = (label / 2) * 4, c0 = (label % 2) * 4;
    for (std::size_t r = r0; r < r0 + 4; ++r) {
      for (std::size_t c = c0; c < c0 + 4; ++c) img[r * 8 + c] += 0.6f;
    }
  }
  return d;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ensnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

// IDX image and label files for `count` images of rows x cols.
inline void write_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                           std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                           const std::vector<unsigned char>& pixels, const std::vector<unsigned char>& label_bytes) {
  std::vector<unsigned char> img;
  put_u32_be(img, 0x00000803);
  put_u32_be(img, count);
  put_u32_be(img, rows);
  put_u32_be(img, cols);
  img.insert(img.end(), pixels.begin(), pixels.end());
  write_bytes(images, img);
  std::vector<unsigned char> lab;
  put_u32_be(lab, 0x00000801);
  put_u32_be(lab, count);
  lab.insert(lab.end(), label_bytes.begin(), label_bytes.end());
  write_bytes(labels, lab);
}

}  // namespace ensnet::testing
