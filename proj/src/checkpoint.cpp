// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
#include "ladd/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ladd/binio.hpp"

namespace ladd {

namespace {
constexpr std::string_view kMagic = "LADDCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
std::string encode_checkpoint(const Model<T>& model, const std::string& metadata) {
  std::string out(kMagic);
  binio::put<std::uint32_t>(out, kVersion);
  binio::put<std::uint32_t>(out, sizeof(T));
  const std::string arch = model.arch().str();
  binio::put<std::uint64_t>(out, arch.size());
  out += arch;
  binio::put<std::uint64_t>(out, metadata.size());
  out += metadata;
  binio::put<std::uint64_t>(out, model.params().size());
  for (const auto& p : model.params()) {
    binio::put<std::uint64_t>(out, p.name.size());
    out += p.name;
    binio::put<std::uint64_t>(out, p.value.rank());
    for (auto e : p.value.shape()) binio::put<std::uint64_t>(out, e);
    binio::put_array(out, p.value.data(), p.value.numel());
  }
  return out;
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes) {
  binio::Reader r(bytes, "checkpoint");
  if (r.get_string(kMagic.size()) != kMagic) throw FormatError("checkpoint: bad magic");
  if (r.get<std::uint32_t>() != kVersion) throw FormatError("checkpoint: unsupported version");
  const auto width = r.get<std::uint32_t>();
  if (width != sizeof(T)) {
    throw FormatError("checkpoint holds " + std::to_string(width * 8) + "-bit elements, expected " +
                      std::to_string(sizeof(T) * 8));
  }
  const ArchSpec arch = ArchSpec::parse(r.get_string(r.get<std::uint64_t>()));
  std::string meta = r.get_string(r.get<std::uint64_t>());
  const auto count = r.get<std::uint64_t>();
  std::vector<Param<T>> params;
  for (std::uint64_t i = 0; i < count; ++i) {
    Param<T> p;
    p.name = r.get_string(r.get<std::uint64_t>());
    const auto rank = r.get<std::uint64_t>();
    if (rank > 8) throw FormatError("checkpoint: implausible rank for '" + p.name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = r.get<std::uint64_t>();
    p.value = Tensor<T>(shape);
    r.get_array(p.value.data(), p.value.numel());
    params.push_back(std::move(p));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes at offset " +
                      std::to_string(r.offset()));
  }
  return {Model<T>(arch, std::move(params)), std::move(meta)};
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const std::string& metadata) {
  write_file_atomic(path, encode_checkpoint(model, metadata));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file(path));
}

template std::string encode_checkpoint(const Model<float>&, const std::string&);
template std::string encode_checkpoint(const Model<double>&, const std::string&);
template Checkpoint<float> decode_checkpoint(std::string_view);
template Checkpoint<double> decode_checkpoint(std::string_view);
template void save_checkpoint(const std::filesystem::path&, const Model<float>&,
                              const std::string&);
template void save_checkpoint(const std::filesystem::path&, const Model<double>&,
                              const std::string&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace ladd
