// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat binary parameter checkpoints, all integers little-endian:
//
//   "LADDCKPT"  u32 version=1  u32 element_bytes (4 | 8)
//   u64 arch_len, arch descriptor bytes (ArchSpec::str())
//   u64 meta_len, metadata bytes (UTF-8 JSON, may be empty)
//   u64 param_count
//   per param: u64 name_len, name bytes, u64 rank, rank x u64 extents,
//              elements as IEEE floats of element_bytes width
#pragma once

#include <filesystem>
#include <string>

#include "ladd/model.hpp"

namespace ladd {

template <typename T>
struct Checkpoint {
  Model<T> model;
  std::string metadata;
};

template <typename T>
std::string encode_checkpoint(const Model<T>& model, const std::string& metadata = {});
template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model,
                     const std::string& metadata = {});
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

/// Whole-file read; throws MissingInputError when the file is absent.
std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ladd
