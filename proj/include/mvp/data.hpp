// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mvp/geometry.hpp"

namespace mvp {

enum class DatasetKind { modelnet40, scanobjectnn_pb_t50_rs, shapenet16, synthetic };
enum class Split { train, test };

DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

/// Labeled clouds with train/test tags. Clouds are normalized on load.
struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<Split> splits;
  std::vector<std::string> class_names;

  std::size_t size() const { return clouds.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> indices(Split split) const;
  int label(std::size_t i) const { return *clouds[i].label; }
  /// Checks labels, tags, and that every cloud has at least `min_points` points.
  void validate(std::size_t min_points = 1) const;
};

/// K labeled training objects per class plus every test object.
struct FewShotSplit {
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> per_class;  // dataset indices, per class
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;

  /// All selected training indices, class by class.
  std::vector<std::size_t> train_indices() const;
};

struct SyntheticOptions {
  std::size_t classes = 8;
  std::size_t per_class = 40;
  double test_fraction = 0.25;
  double jitter = 0.01;
};

constexpr std::size_t kMinLoadedPoints = 128;

/// Loads a dataset and resamples every cloud to exactly `n_points`
/// (subsample without replacement or pad by repetition, seeded per object).
///
/// On-disk layouts:
///   modelnet40              <root>[/modelnet40_ply_hdf5_2048]/{train,test}_files.txt listing
///                           HDF5 files with "data" [N,P,3] and "label" [N] or [N,1];
///                           class names from shape_names.txt
///   scanobjectnn_pb_t50_rs  <root>[/main_split]/{training,test}_objectdataset_augmentedrot_scale75.h5
///   shapenet16              <root>/synsetoffset2category.txt, per-synset text point files
///                           "x y z ...", split lists in train_test_split/shuffled_*_file_list.json
///   synthetic               generated; `root` is ignored
Dataset load_dataset(DatasetKind kind, const std::filesystem::path& root, std::size_t n_points,
                     std::uint64_t seed, const SyntheticOptions& synthetic = {});

/// Samples min(k, class size) training objects per class without replacement.
/// Classes smaller than k contribute all members and add a warning.
FewShotSplit kshot_split(const Dataset& ds, std::size_t k, std::uint64_t seed);

enum class Primitive { sphere, cube, cylinder, cone, torus, pyramid, ellipsoid, plane_cross };
constexpr std::size_t kPrimitiveCount = 8;
std::string to_string(Primitive p);

/// Points on the surface of a canonical primitive (sphere: unit radius).
Coords sample_primitive(Primitive p, std::size_t n_points, Rng& rng);

/// One class per primitive, each instance with random scale, pose, and
/// Gaussian jitter. The last `test_fraction` of every class is tagged test.
Dataset make_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t n_points,
                       std::uint64_t seed, double test_fraction = 0.25, double jitter = 0.01);

/// Writes `ds` in the modelnet40 HDF5 layout so it can be reloaded with load_dataset.
void write_modelnet_archive(const Dataset& ds, const std::filesystem::path& root);

/// Seeded subsample/pad to exactly `n_points` rows.
Coords resample_points(const Coords& pts, std::size_t n_points, Rng& rng);

}  // namespace mvp
