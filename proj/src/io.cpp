// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "json.hpp"
#include "ladd/binio.hpp"
#include "ladd/checkpoint.hpp"
#include "ladd/zip.hpp"

namespace ladd {

namespace {

using nlohmann::json;

constexpr std::size_t kCifarClasses = 10;
constexpr std::size_t kCifarSide = 32;

std::uint32_t be32(std::string_view bytes, std::size_t off, const std::string& what) {
  if (bytes.size() < off + 4) {
    throw FormatError(what + ": truncated at byte offset " + std::to_string(bytes.size()));
  }
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

SourceDataset concat(std::vector<SourceDataset> parts) {
  SourceDataset out;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  const Shape s = parts.front().images.shape();
  out.images = Tensor<std::uint8_t>(Shape{total, s[1], s[2], s[3]});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(out.images.data() + off, p.images.data(), p.images.numel());
    off += p.images.numel();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  out.classes = parts.front().classes;
  out.split = parts.front().split;
  return out;
}

std::string tensor_bytes(const TensorF& t) {
  std::string s;
  binio::put_array(s, t.data(), t.numel());
  return s;
}

TensorF tensor_from(std::string_view bytes, Shape shape, const std::string& what) {
  const std::size_t n = numel_of(shape);
  if (bytes.size() != n * sizeof(float)) {
    throw IntegrityError(what + " holds " + std::to_string(bytes.size()) + " bytes, manifest shape " +
                         shape_str(shape) + " needs " + std::to_string(n * sizeof(float)));
  }
  TensorF t(std::move(shape));
  binio::Reader r(bytes, what);
  r.get_array(t.data(), n);
  return t;
}

std::string hard_label_bytes(std::span<const std::uint16_t> labels) {
  std::string s;
  binio::put_array(s, labels.data(), labels.size());
  return s;
}

struct Quantized {
  std::string bytes;
  float lo = 0, hi = 0;
};

Quantized quantize(const TensorF& images) {
  Quantized q;
  const auto [mn, mx] = std::minmax_element(images.storage().begin(), images.storage().end());
  q.lo = *mn;
  q.hi = *mx;
  q.bytes.resize(images.numel());
  const double lo = q.lo, span = static_cast<double>(q.hi) - lo;
  for (std::size_t i = 0; i < images.numel(); ++i) {
    double v = span > 0 ? (static_cast<double>(images[i]) - lo) / span * 255.0 : 0.0;
    v = std::clamp(std::floor(v + 0.5), 0.0, 255.0);
    q.bytes[i] = static_cast<char>(static_cast<std::uint8_t>(v));
  }
  return q;
}

TensorF dequantize(std::string_view bytes, Shape shape, float lo, float hi) {
  TensorF t(std::move(shape));
  if (bytes.size() != t.numel()) {
    throw IntegrityError("images.bin holds " + std::to_string(bytes.size()) +
                         " bytes, manifest shape " + shape_str(t.shape()) + " needs " +
                         std::to_string(t.numel()));
  }
  const double step = (static_cast<double>(hi) - lo) / 255.0;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<float>(lo + static_cast<unsigned char>(bytes[i]) * step);
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------- loaders

SourceDataset parse_cifar10_records(std::string_view bytes, const std::string& origin,
                                    Split split) {
  if (bytes.empty()) throw FormatError(origin + ": empty file");
  const std::size_t whole = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(origin + ": truncated record at byte offset " +
                      std::to_string(whole * kCifarRecordBytes) + " (file size " +
                      std::to_string(bytes.size()) + " is not a multiple of 3073)");
  }
  SourceDataset d;
  d.classes = kCifarClasses;
  d.split = split;
  d.images = Tensor<std::uint8_t>(Shape{whole, 3, kCifarSide, kCifarSide});
  d.labels.resize(whole);
  const std::size_t px = kCifarRecordBytes - 1;
  for (std::size_t i = 0; i < whole; ++i) {
    const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data() + i * kCifarRecordBytes);
    if (rec[0] >= kCifarClasses) {
      throw FormatError(origin + ": label " + std::to_string(rec[0]) + " at byte offset " +
                        std::to_string(i * kCifarRecordBytes) + " is not a CIFAR-10 class");
    }
    d.labels[i] = rec[0];
    std::memcpy(d.images.data() + i * px, rec + 1, px);
  }
  return d;
}

SourceSplits load_cifar10(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw MissingInputError("CIFAR-10 directory not found: " + dir.string());
  }
  std::vector<SourceDataset> parts;
  for (int b = 1; b <= 5; ++b) {
    const auto p = dir / ("data_batch_" + std::to_string(b) + ".bin");
    parts.push_back(parse_cifar10_records(read_file(p), p.string(), Split::train));
  }
  SourceSplits s;
  s.train = concat(std::move(parts));
  const auto tp = dir / "test_batch.bin";
  s.val = parse_cifar10_records(read_file(tp), tp.string(), Split::val);
  return s;
}

SourceDataset parse_mnist_idx(std::string_view image_bytes, std::string_view label_bytes,
                              Split split) {
  const std::uint32_t im = be32(image_bytes, 0, "IDX images");
  if (im != 0x00000803) {
    throw FormatError("IDX images: bad magic at byte offset 0 (0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", im);
      return std::string(buf);
    }() + ")");
  }
  const std::uint32_t lm = be32(label_bytes, 0, "IDX labels");
  if (lm != 0x00000801) throw FormatError("IDX labels: bad magic at byte offset 0");
  const std::size_t n = be32(image_bytes, 4, "IDX images");
  const std::size_t rows = be32(image_bytes, 8, "IDX images");
  const std::size_t cols = be32(image_bytes, 12, "IDX images");
  const std::size_t nl = be32(label_bytes, 4, "IDX labels");
  if (n != nl) {
    throw FormatError("IDX: " + std::to_string(n) + " images but " + std::to_string(nl) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX: empty dataset");
  if (image_bytes.size() != 16 + n * rows * cols) {
    throw FormatError("IDX images: truncated at byte offset " + std::to_string(image_bytes.size()) +
                      " (expected " + std::to_string(16 + n * rows * cols) + " bytes)");
  }
  if (label_bytes.size() != 8 + n) {
    throw FormatError("IDX labels: truncated at byte offset " + std::to_string(label_bytes.size()) +
                      " (expected " + std::to_string(8 + n) + " bytes)");
  }
  SourceDataset d;
  d.split = split;
  d.images = Tensor<std::uint8_t>(Shape{n, 1, rows, cols});
  std::memcpy(d.images.data(), image_bytes.data() + 16, n * rows * cols);
  d.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = static_cast<std::uint8_t>(label_bytes[8 + i]);
    max_label = std::max<std::size_t>(max_label, d.labels[i]);
  }
  d.classes = std::max<std::size_t>(10, max_label + 1);
  return d;
}

SourceSplits load_mnist(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw MissingInputError("MNIST directory not found: " + dir.string());
  }
  SourceSplits s;
  s.train = parse_mnist_idx(read_file(dir / "train-images-idx3-ubyte"),
                            read_file(dir / "train-labels-idx1-ubyte"), Split::train);
  s.val = parse_mnist_idx(read_file(dir / "t10k-images-idx3-ubyte"),
                          read_file(dir / "t10k-labels-idx1-ubyte"), Split::val);
  return s;
}

// ---------------------------------------------------------------- archives

std::string ArchiveManifest::to_json() const {
  json j;
  j["classes"] = classes;
  j["ipc"] = ipc;
  j["image_dims"] = {channels, height, width};
  j["n"] = n;
  j["r"] = r;
  j["has_dense"] = has_dense;
  j["has_full_soft"] = has_full_soft;
  j["value_lo"] = value_lo;
  j["value_hi"] = value_hi;
  j["image_dtype"] = image_dtype;
  j["hard_label_dtype"] = hard_label_dtype;
  j["label_dtype"] = label_dtype;
  j["labeler_id"] = labeler_id;
  j["labeler_epoch"] = labeler_epoch;
  j["creation_seed"] = creation_seed;
  return j.dump(2) + "\n";
}

ArchiveManifest ArchiveManifest::from_json(std::string_view text) {
  ArchiveManifest m;
  try {
    const json j = json::parse(text);
    m.classes = j.at("classes").get<std::size_t>();
    m.ipc = j.at("ipc").get<std::size_t>();
    const auto dims = j.at("image_dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw IntegrityError("manifest: image_dims must have 3 entries");
    m.channels = dims[0];
    m.height = dims[1];
    m.width = dims[2];
    m.n = j.at("n").get<std::size_t>();
    m.r = j.at("r").get<double>();
    m.has_dense = j.at("has_dense").get<bool>();
    m.has_full_soft = j.at("has_full_soft").get<bool>();
    m.value_lo = j.at("value_lo").get<float>();
    m.value_hi = j.at("value_hi").get<float>();
    m.image_dtype = j.at("image_dtype").get<std::string>();
    m.hard_label_dtype = j.at("hard_label_dtype").get<std::string>();
    m.label_dtype = j.at("label_dtype").get<std::string>();
    m.labeler_id = j.at("labeler_id").get<std::string>();
    m.labeler_epoch = j.at("labeler_epoch").get<std::size_t>();
    m.creation_seed = j.at("creation_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  if (m.image_dtype != "u8" || m.hard_label_dtype != "u16" || m.label_dtype != "f32") {
    throw FormatError("manifest.json: unsupported dtype tags");
  }
  return m;
}

TensorF quantize_images(const TensorF& images) {
  const Quantized q = quantize(images);
  return dequantize(q.bytes, images.shape(), q.lo, q.hi);
}

std::string encode_archive(const LabelAugmentedDataset& d, std::uint64_t creation_seed,
                           ArchiveManifest* manifest) {
  d.validate();
  const auto& b = d.base;
  ArchiveManifest m;
  m.classes = b.classes;
  m.ipc = b.ipc;
  m.channels = b.images.dim(1);
  m.height = b.images.dim(2);
  m.width = b.images.dim(3);
  m.has_dense = d.has_dense();
  m.has_full_soft = d.has_full_soft();
  if (m.has_dense) {
    m.n = d.sampler.n;
    m.r = d.sampler.r;
  }
  m.labeler_id = d.labeler.checkpoint_id;
  m.labeler_epoch = d.labeler.epoch;
  m.creation_seed = creation_seed;
  Quantized q = quantize(b.images);
  m.value_lo = q.lo;
  m.value_hi = q.hi;

  std::vector<ZipEntry> entries;
  entries.push_back({"manifest.json", m.to_json()});
  entries.push_back({"images.bin", std::move(q.bytes)});
  entries.push_back({"hard_labels.bin", hard_label_bytes(b.hard_labels)});
  if (m.has_dense) entries.push_back({"dense_labels.bin", tensor_bytes(d.dense_labels)});
  if (m.has_full_soft) entries.push_back({"full_labels.bin", tensor_bytes(d.full_labels)});
  if (manifest) *manifest = m;
  return zip_encode(entries);
}

LabelAugmentedDataset decode_archive(std::string_view bytes, ArchiveManifest* manifest) {
  auto entries = zip_decode(bytes);
  auto find = [&](const std::string& name) -> const ZipEntry* {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  };
  const ZipEntry* me = find("manifest.json");
  if (!me) throw IntegrityError("archive has no manifest.json");
  const ArchiveManifest m = ArchiveManifest::from_json(me->data);
  const ZipEntry* ie = find("images.bin");
  const ZipEntry* he = find("hard_labels.bin");
  if (!ie || !he) throw IntegrityError("archive lacks images.bin or hard_labels.bin");
  const std::size_t count = m.classes * m.ipc;
  if (count == 0) throw IntegrityError("manifest declares an empty dataset");

  LabelAugmentedDataset d;
  d.base.classes = m.classes;
  d.base.ipc = m.ipc;
  d.base.images =
      dequantize(ie->data, Shape{count, m.channels, m.height, m.width}, m.value_lo, m.value_hi);
  if (he->data.size() != count * 2) {
    throw IntegrityError("hard_labels.bin holds " + std::to_string(he->data.size()) +
                         " bytes, manifest needs " + std::to_string(count * 2));
  }
  d.base.hard_labels.resize(count);
  binio::Reader hr(he->data, "hard_labels.bin");
  hr.get_array(d.base.hard_labels.data(), count);

  const ZipEntry* de = find("dense_labels.bin");
  if (m.has_dense != (de != nullptr)) throw IntegrityError("manifest has_dense disagrees with contents");
  if (de) {
    d.sampler = {m.n, m.r};
    d.dense_labels = tensor_from(de->data, Shape{count, m.n * m.n, m.classes}, "dense_labels.bin");
  }
  const ZipEntry* fe = find("full_labels.bin");
  if (m.has_full_soft != (fe != nullptr)) {
    throw IntegrityError("manifest has_full_soft disagrees with contents");
  }
  if (fe) d.full_labels = tensor_from(fe->data, Shape{count, m.classes}, "full_labels.bin");
  d.labeler = {m.labeler_id, m.labeler_epoch};
  d.validate();
  if (manifest) *manifest = m;
  return d;
}

ArchiveManifest save_archive(const std::filesystem::path& path, const LabelAugmentedDataset& d,
                             std::uint64_t creation_seed) {
  ArchiveManifest m;
  write_file_atomic(path, encode_archive(d, creation_seed, &m));
  return m;
}

ArchiveManifest save_archive(const std::filesystem::path& path, const DistilledDataset& d,
                             std::uint64_t creation_seed) {
  LabelAugmentedDataset la;
  la.base = d;
  return save_archive(path, la, creation_seed);
}

LabelAugmentedDataset load_archive(const std::filesystem::path& path, ArchiveManifest* manifest) {
  return decode_archive(read_file(path), manifest);
}

// ---------------------------------------------------------------- storage

StorageReport measure_storage(const LabelAugmentedDataset& d, int level) {
  const auto& b = d.base;
  const std::size_t m = b.size();
  const Quantized q = quantize(b.images);
  const std::size_t per = b.images.numel() / m;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (b.hard_labels[x] != b.hard_labels[y]) return b.hard_labels[x] < b.hard_labels[y];
    return std::memcmp(q.bytes.data() + x * per, q.bytes.data() + y * per, per) < 0;
  });

  std::string images, dense;
  std::vector<std::uint16_t> hard;
  images.reserve(q.bytes.size());
  const std::size_t dense_per = d.has_dense() ? d.dense_labels.numel() / m : 0;
  for (auto i : order) {
    images.append(q.bytes.data() + i * per, per);
    hard.push_back(b.hard_labels[i]);
    if (dense_per) binio::put_array(dense, d.dense_labels.data() + i * dense_per, dense_per);
  }
  const std::string hard_bytes = hard_label_bytes(hard);

  StorageReport r;
  r.raw_image_bytes = images.size();
  r.raw_hard_label_bytes = hard_bytes.size();
  r.raw_label_bytes = dense.size();
  r.compressed_image_bytes = deflate_raw(images, level).size();
  r.compressed_hard_label_bytes = deflate_raw(hard_bytes, level).size();
  r.compressed_label_bytes = dense.empty() ? 0 : deflate_raw(dense, level).size();
  r.overhead_percent = 100.0 * static_cast<double>(r.compressed_label_bytes) /
                       static_cast<double>(r.compressed_image_bytes + r.compressed_hard_label_bytes);
  r.raw_ratio_percent =
      100.0 * static_cast<double>(r.raw_label_bytes) / static_cast<double>(r.raw_image_bytes);
  return r;
}

}  // namespace ladd
