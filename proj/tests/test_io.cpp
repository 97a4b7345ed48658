// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "ladd/checkpoint.hpp"
#include "ladd/errors.hpp"
#include "ladd/fixtures.hpp"
#include "ladd/io.hpp"
#include "ladd/zip.hpp"
#include "support/oracles.hpp"

using namespace ladd;
namespace fs = std::filesystem;

namespace {

std::string cifar_record(std::uint8_t label, std::uint8_t seed) {
  std::string rec(3073, '\0');
  rec[0] = static_cast<char>(label);
  for (std::size_t i = 1; i < rec.size(); ++i) rec[i] = static_cast<char>((i * 7 + seed) & 0xff);
  return rec;
}

LabelAugmentedDataset small_la(std::uint64_t seed, std::size_t classes = 3, std::size_t ipc = 2,
                               std::size_t n = 2) {
  Rng rng(seed);
  LabelAugmentedDataset d;
  d.base.classes = classes;
  d.base.ipc = ipc;
  const std::size_t m = classes * ipc;
  d.base.images = TensorF(Shape{m, 3, 8, 8});
  for (auto& v : d.base.images.storage()) v = static_cast<float>(rng.uniform(-0.5, 1.5));
  for (std::size_t i = 0; i < m; ++i) d.base.hard_labels.push_back(static_cast<std::uint16_t>(i / ipc));
  d.sampler = {n, 0.625};
  d.dense_labels = softmax_rows(oracle::random_tensor(rng, {m * n * n, classes})).cast<float>().reshaped(Shape{m, n * n, classes});
  d.full_labels = softmax_rows(oracle::random_tensor(rng, {m, classes})).cast<float>();
  d.labeler = {"ConvNetD3@test", 10};
  return d;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ladd_test_" + name + "_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("single synthetic CIFAR record") {
  const auto rec = cifar_record(7, 3);
  const auto d = parse_cifar10_records(rec, "synthetic", Split::train);
  REQUIRE(d.size() == 1);
  CHECK(d.labels[0] == 7);
  CHECK(d.images.shape() == Shape{1, 3, 32, 32});
  CHECK(d.images[0] == static_cast<std::uint8_t>(rec[1]));
  // channel-major: green plane starts at byte 1 + 1024
  CHECK(d.images[1024] == static_cast<std::uint8_t>(rec[1025]));
  CHECK(d.images[3071] == static_cast<std::uint8_t>(rec[3072]));
}

TEST_CASE("malformed CIFAR batches report a byte offset") {
  CHECK_THROWS_AS(parse_cifar10_records("", "empty", Split::train), FormatError);
  auto two = cifar_record(1, 0) + cifar_record(2, 1);
  two.resize(two.size() - 5);
  try {
    parse_cifar10_records(two, "cut", Split::train);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset 3073") != std::string::npos);
  }
  auto bad = cifar_record(12, 0);
  CHECK_THROWS_AS(parse_cifar10_records(bad, "label", Split::train), FormatError);
}

TEST_CASE("CIFAR directory loader") {
  const auto dir = temp_dir("cifar");
  for (int b = 1; b <= 5; ++b) write_file_atomic(dir / ("data_batch_" + std::to_string(b) + ".bin"), cifar_record(b, b) + cifar_record(0, 9));
  write_file_atomic(dir / "test_batch.bin", cifar_record(9, 1));
  const auto s = load_cifar10(dir);
  CHECK(s.train.size() == 10);
  CHECK(s.val.size() == 1);
  CHECK(s.train.labels[0] == 1);
  CHECK(s.val.labels[0] == 9);
  CHECK(s.train.classes == 10);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_cifar10(dir), MissingInputError);
}

TEST_CASE("MNIST IDX round trip and validation") {
  const auto d = glyph_digits(1, 3, Split::train);
  const auto img = encode_idx_images(d), lab = encode_idx_labels(d);
  CHECK(static_cast<unsigned char>(img[2]) == 0x08);
  CHECK(static_cast<unsigned char>(img[3]) == 0x03);
  const auto back = parse_mnist_idx(img, lab, Split::train);
  CHECK(back.images == d.images);
  CHECK(back.labels == d.labels);
  CHECK(back.image_shape() == Shape{1, 28, 28});
  auto bad = img;
  bad[3] = 0x02;
  CHECK_THROWS_AS(parse_mnist_idx(bad, lab, Split::train), FormatError);
  CHECK_THROWS_AS(parse_mnist_idx(img.substr(0, img.size() - 1), lab, Split::train), FormatError);
  CHECK_THROWS_AS(parse_mnist_idx(img, lab.substr(0, lab.size() - 1), Split::train), FormatError);
}

TEST_CASE("zip container") {
  std::vector<ZipEntry> entries{{"a.txt", "hello hello hello hello"}, {"b.bin", std::string(1000, '\x07')}, {"empty", ""}};
  const auto bytes = zip_encode(entries);
  CHECK(bytes.substr(0, 4) == std::string("PK\x03\x04", 4));
  const auto back = zip_decode(bytes);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(back[i].data == entries[i].data);
  }
  CHECK(zip_encode(entries) == bytes);
  auto corrupt = bytes;
  corrupt[40] = static_cast<char>(corrupt[40] ^ 0x5a);
  CHECK_THROWS_AS(zip_decode(corrupt), Error);
  CHECK_THROWS_AS(zip_decode("PK"), FormatError);
}

TEST_CASE("zip container is readable by Python's zipfile" * doctest::skip(std::system("python3 -c 'import zipfile' >/dev/null 2>&1") != 0)) {
  const auto dir = temp_dir("pyzip");
  write_file_atomic(dir / "t.zip", zip_encode({{"x.bin", std::string(5000, 'q') + "tail"}, {"m.json", "{}"}}));
  const std::string cmd = "python3 -c \"import zipfile,sys; z=zipfile.ZipFile(sys.argv[1]); "
                          "assert z.testzip() is None; assert z.read('x.bin').endswith(b'tail'); "
                          "assert z.read('m.json')==b'{}'\" " + (dir / "t.zip").string();
  CHECK(std::system(cmd.c_str()) == 0);
  fs::remove_all(dir);
}

TEST_CASE("archive round trip reproduces every tensor bitwise") {
  const auto d = small_la(4);
  ArchiveManifest m1;
  const auto bytes = encode_archive(d, 99, &m1);
  ArchiveManifest m2;
  const auto back = decode_archive(bytes, &m2);
  CHECK(m1 == m2);
  CHECK(m2.creation_seed == 99);
  CHECK(m2.labeler_epoch == 10);
  CHECK(back.base.images == quantize_images(d.base.images));
  CHECK(back.base.hard_labels == d.base.hard_labels);
  CHECK(back.dense_labels == d.dense_labels);
  CHECK(back.full_labels == d.full_labels);
  CHECK(back.sampler.n == 2);
  // a second round trip is the identity on the quantized images
  const auto again = decode_archive(encode_archive(back, 99));
  CHECK(again.base.images == back.base.images);
  CHECK(ArchiveManifest::from_json(m1.to_json()) == m1);

  const auto dir = temp_dir("archive");
  save_archive(dir / "a.zip", d, 99);
  CHECK(load_archive(dir / "a.zip").dense_labels == d.dense_labels);
  save_archive(dir / "b.zip", d.base, 5);
  const auto plain = load_archive(dir / "b.zip");
  CHECK_FALSE(plain.has_dense());
  CHECK(plain.base.hard_labels == d.base.hard_labels);
  fs::remove_all(dir);
}

TEST_CASE("archive with a dense row scaled by two is rejected") {
  const auto d = small_la(5);
  auto entries = zip_decode(encode_archive(d, 1));
  bool found = false;
  for (auto& e : entries) {
    if (e.name != "dense_labels.bin") continue;
    found = true;
    for (std::size_t c = 0; c < d.base.classes; ++c) {
      float v;
      std::memcpy(&v, e.data.data() + 4 * c, 4);
      v *= 2;
      std::memcpy(e.data.data() + 4 * c, &v, 4);
    }
  }
  REQUIRE(found);
  CHECK_THROWS_AS(decode_archive(zip_encode(entries)), IntegrityError);
}

TEST_CASE("manifest and payload disagreement is an integrity error") {
  const auto d = small_la(6);
  auto entries = zip_decode(encode_archive(d, 1));
  for (auto& e : entries)
    if (e.name == "images.bin") e.data.resize(e.data.size() - 1);
  CHECK_THROWS_AS(decode_archive(zip_encode(entries)), IntegrityError);
}

TEST_CASE("storage accounting") {
  SUBCASE("raw ratio for 10 classes, 5 IPC, 128 px, N=5") {
    StorageFixtureOptions opt;
    const auto d = storage_fixture(opt);
    CHECK(d.dense_labels.shape() == Shape{50, 25, 10});
    const auto r = measure_storage(d);
    CHECK(r.raw_label_bytes == 50u * 25 * 10 * 4);
    CHECK(r.raw_image_bytes == 50u * 128 * 128 * 3);
    CHECK(r.raw_ratio_percent == doctest::Approx(100.0 * 50000 / 2457600));
    CHECK(r.overhead_percent ==
          doctest::Approx(100.0 * r.compressed_label_bytes / (r.compressed_image_bytes + r.compressed_hard_label_bytes)));
  }
  SUBCASE("all-zero images and uniform labels compress below raw size") {
    auto d = small_la(7);
    d.base.images = TensorF(d.base.images.shape());
    d.dense_labels = TensorF(d.dense_labels.shape(), 1.0f / 3.0f);
    const auto r = measure_storage(d);
    CHECK(r.compressed_image_bytes < r.raw_image_bytes);
    CHECK(r.compressed_label_bytes < r.raw_label_bytes);
  }
  SUBCASE("permuting images within a class leaves the figure unchanged") {
    const auto d = small_la(8, 3, 4, 3);
    auto p = d;
    const std::size_t per = 3 * 8 * 8, rows = 9 * 3;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t a = c * 4, b = c * 4 + 3;
      std::swap_ranges(p.base.images.data() + a * per, p.base.images.data() + (a + 1) * per, p.base.images.data() + b * per);
      std::swap_ranges(p.dense_labels.data() + a * rows, p.dense_labels.data() + (a + 1) * rows, p.dense_labels.data() + b * rows);
    }
    const auto r1 = measure_storage(d), r2 = measure_storage(p);
    CHECK(r1.compressed_image_bytes == r2.compressed_image_bytes);
    CHECK(r1.compressed_label_bytes == r2.compressed_label_bytes);
    CHECK(r1.overhead_percent == r2.overhead_percent);
  }
}
