// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvp/tensor.hpp"

namespace mvp {

// Flat key -> array weight file.
//
//   bytes 0..7    magic "MVPWGT01"
//   bytes 8..15   header length L, unsigned 64-bit little endian
//   bytes 16..    L bytes of UTF-8 JSON:
//                   { "metadata": {...},
//                     "tensors": [ {"name", "shape", "dtype", "offset", "nbytes"}, ... ] }
//   then          the data section; each tensor's bytes start at `offset` from the
//                 first byte after the header. dtype is "f64" or "f32", little endian.
//
// The "tensors" array is the manifest. Loaders compare it against the names and
// shapes a model expects before touching any data.

enum class Dtype { f32, f64 };

struct ManifestEntry {
  std::string name;
  Shape shape;
  Dtype dtype = Dtype::f64;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
};

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct WeightFile {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const;
};

void write_weight_file(const std::filesystem::path& path, const WeightFile& file,
                       Dtype dtype = Dtype::f64);
WeightFile read_weight_file(const std::filesystem::path& path);

/// Reads only the header.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace mvp
