#include <cmath>

#include "doctest.h"
#include "ensnet/config.hpp"
#include "ensnet/data.hpp"
#include "ensnet/errors.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;
namespace fs = std::filesystem;

namespace {

DataError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("no DataError thrown");
  return DataError::Kind::other;
}

}  // namespace

TEST_CASE("IDX golden file decodes bit-exactly") {
  const fs::path dir = testing::scratch_dir("idx_golden");
  const std::vector<unsigned char> pixels = {0, 255, 128, 1, 10, 20, 30, 40, 7, 7, 7, 7};
  testing::write_idx_pair(dir / "img", dir / "lab", 3, 2, 2, pixels, {3, 0, 9});
  const Dataset d = load_idx(dir / "img", dir / "lab", Split::test);
  CHECK(d.size() == 3);
  CHECK(d.images.shape() == Shape{3, 1, 2, 2});
  CHECK(d.labels == std::vector<int>{3, 0, 9});
  CHECK(d.split == Split::test);
  for (std::size_t i = 0; i < pixels.size(); ++i) CHECK(d.images[i] == static_cast<float>(pixels[i]) / 255.0f);
}

TEST_CASE("IDX error kinds") {
  const fs::path dir = testing::scratch_dir("idx_errors");
  const std::vector<unsigned char> px(8, 1);
  testing::write_idx_pair(dir / "img", dir / "lab", 2, 2, 2, px, {1, 2});

  CHECK(kind_of([&] { load_idx(dir / "missing", dir / "lab"); }) == DataError::Kind::missing_file);
  CHECK(kind_of([&] { load_idx(dir / "lab", dir / "lab"); }) == DataError::Kind::bad_magic);
  CHECK(kind_of([&] { load_idx(dir / "img", dir / "img"); }) == DataError::Kind::bad_magic);

  testing::write_idx_pair(dir / "short", dir / "lab2", 2, 2, 2, std::vector<unsigned char>(7, 1), {1, 2});
  CHECK(kind_of([&] { load_idx(dir / "short", dir / "lab2"); }) == DataError::Kind::truncated);

  testing::write_idx_pair(dir / "img3", dir / "lab3", 2, 2, 2, px, {1, 2});
  testing::write_idx_pair(dir / "unused", dir / "lab3", 3, 2, 2, std::vector<unsigned char>(12, 1), {1, 2, 3});
  CHECK(kind_of([&] { load_idx(dir / "img3", dir / "lab3"); }) == DataError::Kind::count_mismatch);

  testing::write_idx_pair(dir / "img4", dir / "lab4", 2, 2, 2, px, {1, 12});
  CHECK(kind_of([&] { load_idx(dir / "img4", dir / "lab4"); }) == DataError::Kind::bad_label);
}

TEST_CASE("CIFAR-10 golden records decode bit-exactly") {
  const fs::path dir = testing::scratch_dir("cifar_golden");
  std::vector<unsigned char> bytes;
  for (int rec = 0; rec < 2; ++rec) {
    bytes.push_back(static_cast<unsigned char>(rec == 0 ? 6 : 9));
    for (int i = 0; i < 3072; ++i) bytes.push_back(static_cast<unsigned char>((i * 7 + rec) % 256));
  }
  testing::write_bytes(dir / "batch.bin", bytes);
  const std::vector<fs::path> files{dir / "batch.bin"};
  const Dataset d = load_cifar10(files);
  CHECK(d.images.shape() == Shape{2, 3, 32, 32});
  CHECK(d.labels == std::vector<int>{6, 9});
  // red plane first, then green, then blue, row-major within each
  CHECK(d.images[0] == 0.0f);
  CHECK(d.images[1024] == static_cast<float>((1024 * 7) % 256) / 255.0f);
  CHECK(d.images[3072 + 5] == static_cast<float>((5 * 7 + 1) % 256) / 255.0f);
  for (std::size_t i = 0; i < 3072; ++i) {
    REQUIRE(d.images[3072 + i] == static_cast<float>((i * 7 + 1) % 256) / 255.0f);
  }

  bytes.pop_back();
  testing::write_bytes(dir / "bad.bin", bytes);
  const std::vector<fs::path> bad{dir / "bad.bin"};
  CHECK(kind_of([&] { load_cifar10(bad); }) == DataError::Kind::bad_length);
  const std::vector<fs::path> missing{dir / "nope.bin"};
  CHECK(kind_of([&] { load_cifar10(missing); }) == DataError::Kind::missing_file);
}

TEST_CASE("real MNIST files have the published counts") {
  const char* dir = std::getenv("ENSNET_DATA_DIR");
  if (dir == nullptr || !fs::exists(fs::path(dir) / "train-images-idx3-ubyte")) {
    MESSAGE("ENSNET_DATA_DIR not set or without MNIST; skipped");
    return;
  }
  DatasetConfig cfg;
  cfg.dir = dir;
  const Dataset train = load_dataset(cfg, Split::train);
  const Dataset test = load_dataset(cfg, Split::test);
  CHECK(train.images.shape() == Shape{60000, 1, 28, 28});
  CHECK(test.images.shape() == Shape{10000, 1, 28, 28});
}

TEST_CASE("head and gather") {
  const Dataset d = testing::quadrant_dataset(10, 3);
  const Dataset h = d.head(4);
  CHECK(h.size() == 4);
  CHECK(h.labels[3] == d.labels[3]);
  CHECK(d.head(0).size() == 10);
  const std::vector<std::size_t> idx{9, 0};
  const Dataset g = d.gather(idx);
  CHECK(g.labels == std::vector<int>{d.labels[9], d.labels[0]});
  CHECK(g.images[0] == d.images[9 * 64]);
  const std::vector<std::size_t> bad{10};
  CHECK_THROWS_AS(d.gather(bad), ContractError);
  CHECK_THROWS_AS(Dataset{}.gather(idx), ContractError);
}

TEST_CASE("rotation by 90 degrees permutes a 4x4 grid") {
  TensorF img({1, 4, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) img[i * 4 + j] = static_cast<float>(4 * i + j) / 16.0f;
  }
  AffineParams p;
  p.rotate_deg = 90.0;
  const TensorF out = warp_affine(img, p);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(out[r * 4 + c] == doctest::Approx(img[(3 - c) * 4 + r]).epsilon(1e-6));
  }
}

TEST_CASE("identity parameters reproduce the image; shifts move it") {
  const Dataset d = testing::quadrant_dataset(1, 5);
  const TensorF img = d.images.reshaped({1, 8, 8});
  CHECK(warp_affine(img, AffineParams{}) == img);
  AffineParams right;
  right.shift_x = 0.125;  // one pixel of 8
  const TensorF moved = warp_affine(img, right);
  for (std::size_t r = 0; r < 8; ++r) {
    CHECK(moved[r * 8] == 0.0f);
    for (std::size_t c = 1; c < 8; ++c) CHECK(moved[r * 8 + c] == doctest::Approx(img[r * 8 + c - 1]));
  }
}

TEST_CASE("augmentation is seed-determined and per-sample") {
  AugmentSpec spec;
  spec.rotate_deg = {-10, 10};
  spec.scale = {0.8, 1.2};
  spec.shift_frac = {-0.08, 0.08};
  spec.shear_deg = {-0.3, 0.3};
  const Dataset d = testing::quadrant_dataset(6, 8);
  TensorF a = d.images, b = d.images;
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5};
  augment_batch(a, ids, spec, 42, 3);
  augment_batch(b, ids, spec, 42, 3);
  CHECK(a == b);
  CHECK_FALSE(a == d.images);
  for (float v : a.data()) CHECK((v >= 0.0f && v <= 1.0f));

  // Sample 4 alone gets the same transform as inside the batch.
  const std::vector<std::size_t> one{4};
  const std::vector<std::size_t> pick{4};
  TensorF single = d.gather(pick).images;
  augment_batch(single, one, spec, 42, 3);
  for (std::size_t i = 0; i < 64; ++i) CHECK(single[i] == a[4 * 64 + i]);

  TensorF c = d.images;
  augment_batch(c, ids, spec, 42, 4);
  CHECK_FALSE(c == a);
}

TEST_CASE("static expansion and augmentation range checks") {
  AugmentSpec spec;
  spec.rotate_deg = {-5, 5};
  const Dataset d = testing::quadrant_dataset(5, 9);
  const Dataset e = expand_static(d, spec, 2, 1);
  CHECK(e.size() == 15);
  CHECK(e.labels[12] == d.labels[2]);
  for (std::size_t i = 0; i < 5 * 64; ++i) REQUIRE(e.images[i] == d.images[i]);
  AugmentSpec bad;
  bad.scale = {0.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AugmentSpec{};
  bad.rotate_deg = {5, -5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("load_dataset finds files and reports missing ones") {
  const fs::path dir = testing::scratch_dir("dataset_dir");
  DatasetConfig cfg;
  cfg.dir = dir;
  CHECK(kind_of([&] { load_dataset(cfg, Split::test); }) == DataError::Kind::missing_file);
  testing::write_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", 3, 28, 28,
                          std::vector<unsigned char>(3 * 784, 9), {1, 2, 3});
  cfg.test_limit = 2;
  const Dataset d = load_dataset(cfg, Split::test);
  CHECK(d.size() == 2);
}
