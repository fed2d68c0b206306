// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/weights.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'V', 'P', 'W', 'G', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "weight files are little endian; add byte swapping for this target");

std::string dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

Dtype parse_dtype(const std::string& s, const std::filesystem::path& path) {
  if (s == "f32") return Dtype::f32;
  if (s == "f64") return Dtype::f64;
  throw LoadError(path.string() + ": unsupported dtype '" + s + "'");
}

std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

struct Header {
  nlohmann::json metadata;
  std::vector<ManifestEntry> entries;
  std::uint64_t data_start = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw LoadError(path.string() + ": not a weight file (bad magic)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 31)) throw LoadError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw LoadError(path.string() + ": truncated header");

  Header h;
  h.data_start = 16 + len;
  try {
    auto j = nlohmann::json::parse(text);
    h.metadata = j.value("metadata", nlohmann::json::object());
    for (const auto& t : j.at("tensors")) {
      ManifestEntry e;
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<Shape>();
      e.dtype = parse_dtype(t.at("dtype").get<std::string>(), path);
      e.offset = t.at("offset").get<std::uint64_t>();
      e.nbytes = t.at("nbytes").get<std::uint64_t>();
      if (e.nbytes != shape_numel(e.shape) * dtype_size(e.dtype)) {
        throw LoadError(path.string() + ": tensor '" + e.name + "' byte count does not match shape");
      }
      h.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(path.string() + ": malformed header: " + ex.what());
  }
  return h;
}

}  // namespace

const TensorRecord* WeightFile::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_weight_file(const std::filesystem::path& path, const WeightFile& file, Dtype dtype) {
  nlohmann::json header;
  header["metadata"] = file.metadata;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : file.tensors) {
    if (t.values.size() != shape_numel(t.shape)) {
      throw ValidationError("weight file: tensor '" + t.name + "' size does not match its shape");
    }
    const std::uint64_t nbytes = t.values.size() * dtype_size(dtype);
    header["tensors"].push_back({{"name", t.name},
                                 {"shape", t.shape},
                                 {"dtype", dtype_name(dtype)},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic.data(), kMagic.size());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : file.tensors) {
    if (dtype == Dtype::f64) {
      out.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    } else {
      std::vector<float> narrow(t.values.begin(), t.values.end());
      out.write(reinterpret_cast<const char*>(narrow.data()),
                static_cast<std::streamsize>(narrow.size() * sizeof(float)));
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weight file '" + path.string() + "'");
  return read_header(in, path).entries;
}

WeightFile read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weight file '" + path.string() + "'");
  Header h = read_header(in, path);
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());

  WeightFile wf;
  wf.metadata = std::move(h.metadata);
  for (const auto& e : h.entries) {
    if (h.data_start + e.offset + e.nbytes > file_size) {
      throw LoadError(path.string() + ": tensor '" + e.name + "' runs past end of file");
    }
    in.seekg(static_cast<std::streamoff>(h.data_start + e.offset));
    TensorRecord rec{e.name, e.shape, std::vector<double>(shape_numel(e.shape))};
    if (e.dtype == Dtype::f64) {
      in.read(reinterpret_cast<char*>(rec.values.data()), static_cast<std::streamsize>(e.nbytes));
    } else {
      std::vector<float> narrow(rec.values.size());
      in.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(e.nbytes));
      std::copy(narrow.begin(), narrow.end(), rec.values.begin());
    }
    if (!in) throw LoadError(path.string() + ": failed reading tensor '" + e.name + "'");
    wf.tensors.push_back(std::move(rec));
  }
  return wf;
}

}  // namespace mvp
