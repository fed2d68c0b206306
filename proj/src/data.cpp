// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/data.hpp"

#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvp/errors.hpp"

namespace fs = std::filesystem;

namespace mvp {

namespace {

// ---------------------------------------------------------------- HDF5 ----

struct H5Clouds {
  std::vector<float> data;  // [count, points, 3]
  std::size_t count = 0;
  std::size_t points = 0;
  std::vector<int> labels;
};

// Closes an HDF5 handle on scope exit.
class H5Handle {
 public:
  H5Handle(hid_t id, herr_t (*closer)(hid_t)) : id_(id), closer_(closer) {}
  ~H5Handle() {
    if (id_ >= 0) closer_(id_);
  }
  H5Handle(const H5Handle&) = delete;
  H5Handle& operator=(const H5Handle&) = delete;
  hid_t get() const { return id_; }
  bool ok() const { return id_ >= 0; }

 private:
  hid_t id_;
  herr_t (*closer_)(hid_t);
};

void silence_hdf5() { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); }

std::vector<hsize_t> dataset_dims(hid_t dset) {
  H5Handle space(H5Dget_space(dset), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  std::vector<hsize_t> dims(static_cast<std::size_t>(std::max(rank, 0)));
  if (rank > 0) H5Sget_simple_extent_dims(space.get(), dims.data(), nullptr);
  return dims;
}

H5Clouds read_h5_clouds(const fs::path& path) {
  silence_hdf5();
  if (!fs::exists(path)) throw LoadError("missing dataset file '" + path.string() + "'");
  H5Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.ok()) throw LoadError("cannot open HDF5 file '" + path.string() + "'");

  H5Clouds out;
  {
    H5Handle dset(H5Dopen2(file.get(), "data", H5P_DEFAULT), H5Dclose);
    if (!dset.ok()) throw LoadError("'" + path.string() + "' has no 'data' dataset");
    const auto dims = dataset_dims(dset.get());
    if (dims.size() != 3 || dims[2] < 3) {
      throw LoadError("'" + path.string() + "': 'data' must be [N, P, >=3]");
    }
    std::vector<float> raw(dims[0] * dims[1] * dims[2]);
    if (H5Dread(dset.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0) {
      throw LoadError("failed to read 'data' from '" + path.string() + "'");
    }
    out.count = dims[0];
    out.points = dims[1];
    out.data.resize(out.count * out.points * 3);
    for (std::size_t i = 0; i < out.count * out.points; ++i) {
      std::copy_n(raw.data() + i * dims[2], 3, out.data.data() + i * 3);
    }
  }
  {
    H5Handle dset(H5Dopen2(file.get(), "label", H5P_DEFAULT), H5Dclose);
    if (!dset.ok()) throw LoadError("'" + path.string() + "' has no 'label' dataset");
    const auto dims = dataset_dims(dset.get());
    hsize_t n = 1;
    for (auto d : dims) n *= d;
    if (dims.empty() || dims[0] != out.count || n != out.count) {
      throw LoadError("'" + path.string() + "': 'label' does not have one entry per cloud");
    }
    out.labels.resize(out.count);
    if (H5Dread(dset.get(), H5T_NATIVE_INT, H5S_ALL, H5S_ALL, H5P_DEFAULT, out.labels.data()) < 0) {
      throw LoadError("failed to read 'label' from '" + path.string() + "'");
    }
  }
  return out;
}

void write_h5_clouds(const fs::path& path, const std::vector<float>& data, std::size_t count,
                     std::size_t points, const std::vector<std::uint8_t>& labels) {
  silence_hdf5();
  H5Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
  if (!file.ok()) throw IoError("cannot create HDF5 file '" + path.string() + "'");
  {
    const hsize_t dims[3] = {count, points, 3};
    H5Handle space(H5Screate_simple(3, dims, nullptr), H5Sclose);
    H5Handle dset(H5Dcreate2(file.get(), "data", H5T_IEEE_F32LE, space.get(), H5P_DEFAULT,
                             H5P_DEFAULT, H5P_DEFAULT),
                  H5Dclose);
    if (!dset.ok() ||
        H5Dwrite(dset.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, data.data()) < 0) {
      throw IoError("failed writing 'data' to '" + path.string() + "'");
    }
  }
  {
    const hsize_t dims[2] = {count, 1};
    H5Handle space(H5Screate_simple(2, dims, nullptr), H5Sclose);
    H5Handle dset(H5Dcreate2(file.get(), "label", H5T_STD_U8LE, space.get(), H5P_DEFAULT,
                             H5P_DEFAULT, H5P_DEFAULT),
                  H5Dclose);
    if (!dset.ok() ||
        H5Dwrite(dset.get(), H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, labels.data()) < 0) {
      throw IoError("failed writing 'label' to '" + path.string() + "'");
    }
  }
}

// ------------------------------------------------------------- helpers ----

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing dataset file '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Adds one cloud, resampled and normalized with a per-object seed.
void add_cloud(Dataset& ds, Coords pts, int label, Split split, std::size_t n_points,
               std::uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ull + ds.clouds.size());
  PointCloud pc{resample_points(pts, n_points, rng), label};
  ds.clouds.push_back(normalize_cloud(pc));
  ds.splits.push_back(split);
}

void add_h5(Dataset& ds, const fs::path& file, Split split, std::size_t n_points, std::uint64_t seed) {
  H5Clouds h = read_h5_clouds(file);
  for (std::size_t i = 0; i < h.count; ++i) {
    Coords pts(static_cast<Eigen::Index>(h.points), 3);
    for (std::size_t p = 0; p < h.points; ++p) {
      for (int c = 0; c < 3; ++c) {
        pts(static_cast<Eigen::Index>(p), c) = h.data[(i * h.points + p) * 3 + static_cast<std::size_t>(c)];
      }
    }
    if (!pts.allFinite()) {
      throw LoadError("'" + file.string() + "': cloud " + std::to_string(i) + " has non-finite points");
    }
    add_cloud(ds, std::move(pts), h.labels[i], split, n_points, seed);
  }
}

Dataset load_modelnet(const fs::path& root, std::size_t n_points, std::uint64_t seed) {
  fs::path dir = root;
  if (!fs::exists(dir / "train_files.txt") && fs::exists(root / "modelnet40_ply_hdf5_2048")) {
    dir = root / "modelnet40_ply_hdf5_2048";
  }
  Dataset ds;
  for (auto [list, split] : {std::pair{"train_files.txt", Split::train}, {"test_files.txt", Split::test}}) {
    for (const auto& entry : read_lines(dir / list)) {
      add_h5(ds, dir / fs::path(entry).filename(), split, n_points, seed);
    }
  }
  int max_label = -1;
  for (const auto& c : ds.clouds) max_label = std::max(max_label, *c.label);
  if (fs::exists(dir / "shape_names.txt")) {
    ds.class_names = read_lines(dir / "shape_names.txt");
  } else {
    for (int i = 0; i <= max_label; ++i) ds.class_names.push_back("class_" + std::to_string(i));
  }
  return ds;
}

Dataset load_scanobjectnn(const fs::path& root, std::size_t n_points, std::uint64_t seed) {
  fs::path dir = root;
  if (fs::exists(root / "main_split")) dir = root / "main_split";
  Dataset ds;
  add_h5(ds, dir / "training_objectdataset_augmentedrot_scale75.h5", Split::train, n_points, seed);
  add_h5(ds, dir / "test_objectdataset_augmentedrot_scale75.h5", Split::test, n_points, seed);
  ds.class_names = {"bag", "bin", "box", "cabinet", "chair", "desk", "display", "door",
                    "shelf", "table", "bed", "pillow", "sink", "sofa", "toilet"};
  return ds;
}

Coords read_point_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing dataset file '" + path.string() + "'");
  std::vector<double> xyz;
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw LoadError("'" + path.string() + "': malformed point line '" + line + "'");
    }
    xyz.insert(xyz.end(), {x, y, z});
  }
  if (xyz.empty()) throw LoadError("'" + path.string() + "' contains no points");
  Coords pts(static_cast<Eigen::Index>(xyz.size() / 3), 3);
  std::copy(xyz.begin(), xyz.end(), pts.data());
  return pts;
}

Dataset load_shapenet(const fs::path& root, std::size_t n_points, std::uint64_t seed) {
  Dataset ds;
  std::map<std::string, int> synset_to_label;
  std::vector<std::pair<std::string, std::string>> cats;  // (name, synset)
  for (const auto& line : read_lines(root / "synsetoffset2category.txt")) {
    std::istringstream ls(line);
    std::string name, synset;
    if (!(ls >> name >> synset)) throw LoadError("malformed line in synsetoffset2category.txt: " + line);
    cats.emplace_back(name, synset);
  }
  std::sort(cats.begin(), cats.end());
  for (const auto& [name, synset] : cats) {
    synset_to_label[synset] = static_cast<int>(ds.class_names.size());
    ds.class_names.push_back(name);
  }

  auto load_list = [&](const char* list, Split split) {
    const fs::path path = root / "train_test_split" / list;
    std::ifstream in(path);
    if (!in) throw LoadError("missing dataset file '" + path.string() + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("'" + path.string() + "': " + e.what());
    }
    for (const auto& entry : j) {
      // entries look like "shape_data/<synset>/<object id>"
      const fs::path rel(entry.get<std::string>());
      const std::string synset = rel.parent_path().filename().string();
      auto it = synset_to_label.find(synset);
      if (it == synset_to_label.end()) throw LoadError("'" + path.string() + "': unknown synset " + synset);
      const fs::path file = root / synset / (rel.filename().string() + ".txt");
      add_cloud(ds, read_point_text(file), it->second, split, n_points, seed);
    }
  };
  load_list("shuffled_train_file_list.json", Split::train);
  if (fs::exists(root / "train_test_split" / "shuffled_val_file_list.json")) {
    load_list("shuffled_val_file_list.json", Split::train);
  }
  load_list("shuffled_test_file_list.json", Split::test);
  return ds;
}

// ----------------------------------------------------------- synthetic ----

Eigen::RowVector3d uniform_in_triangle(const Eigen::RowVector3d& a, const Eigen::RowVector3d& b,
                                       const Eigen::RowVector3d& c, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r1 = std::sqrt(u(rng)), r2 = u(rng);
  return (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c;
}

// Picks an index with probability proportional to `weights`.
std::size_t pick_part(const std::vector<double>& weights, Rng& rng) {
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
}

}  // namespace

// ------------------------------------------------------------------ API ----

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "modelnet40") return DatasetKind::modelnet40;
  if (name == "scanobjectnn_pb_t50_rs" || name == "scanobjectnn") return DatasetKind::scanobjectnn_pb_t50_rs;
  if (name == "shapenet16" || name == "shapenet") return DatasetKind::shapenet16;
  if (name == "synthetic") return DatasetKind::synthetic;
  throw ValidationError("unknown dataset kind '" + std::string(name) +
                        "' (expected modelnet40, scanobjectnn_pb_t50_rs, shapenet16, or synthetic)");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::modelnet40: return "modelnet40";
    case DatasetKind::scanobjectnn_pb_t50_rs: return "scanobjectnn_pb_t50_rs";
    case DatasetKind::shapenet16: return "shapenet16";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "synthetic";
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

void Dataset::validate(std::size_t min_points) const {
  if (clouds.size() != splits.size()) throw ValidationError("dataset: split tags do not match clouds");
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const auto& c = clouds[i];
    if (!c.label || *c.label < 0 || static_cast<std::size_t>(*c.label) >= num_classes()) {
      throw ValidationError("dataset: cloud " + std::to_string(i) + " has a label outside [0, " +
                            std::to_string(num_classes()) + ")");
    }
    if (c.size() < min_points) {
      throw ValidationError("dataset: cloud " + std::to_string(i) + " has " + std::to_string(c.size()) +
                            " points, need at least " + std::to_string(min_points));
    }
    c.validate();
  }
}

std::vector<std::size_t> FewShotSplit::train_indices() const {
  std::vector<std::size_t> out;
  for (const auto& cls : per_class) out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

Coords resample_points(const Coords& pts, std::size_t n_points, Rng& rng) {
  const auto have = static_cast<std::size_t>(pts.rows());
  if (have == 0 || n_points == 0) throw ValidationError("resample_points: empty input or target");
  std::vector<std::size_t> order(have);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> pick(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    pick[i] = i < have ? order[i] : order[std::uniform_int_distribution<std::size_t>(0, have - 1)(rng)];
  }
  Coords out(static_cast<Eigen::Index>(n_points), 3);
  for (std::size_t i = 0; i < n_points; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(pick[i]));
  }
  return out;
}

Dataset load_dataset(DatasetKind kind, const fs::path& root, std::size_t n_points, std::uint64_t seed,
                     const SyntheticOptions& synthetic) {
  if (n_points < kMinLoadedPoints) {
    throw ValidationError("n_points must be at least " + std::to_string(kMinLoadedPoints) + ", got " +
                          std::to_string(n_points));
  }
  if (kind != DatasetKind::synthetic && !fs::exists(root)) {
    throw LoadError("dataset root '" + root.string() + "' does not exist");
  }
  Dataset ds;
  switch (kind) {
    case DatasetKind::modelnet40: ds = load_modelnet(root, n_points, seed); break;
    case DatasetKind::scanobjectnn_pb_t50_rs: ds = load_scanobjectnn(root, n_points, seed); break;
    case DatasetKind::shapenet16: ds = load_shapenet(root, n_points, seed); break;
    case DatasetKind::synthetic:
      ds = make_synthetic(synthetic.classes, synthetic.per_class, n_points, seed,
                          synthetic.test_fraction, synthetic.jitter);
      break;
  }
  try {
    ds.validate(kMinLoadedPoints);
  } catch (const ValidationError& e) {
    throw LoadError(root.string() + ": " + e.what());
  }
  return ds;
}

FewShotSplit kshot_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("kshot_split: k must be at least 1");
  FewShotSplit split;
  split.shots = k;
  split.seed = seed;
  split.per_class.resize(ds.num_classes());
  std::vector<std::vector<std::size_t>> members(ds.num_classes());
  for (std::size_t i : ds.indices(Split::train)) members[static_cast<std::size_t>(ds.label(i))].push_back(i);

  Rng rng(seed);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto pool = members[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() < k) {
      split.warnings.push_back("class " + ds.class_names[c] + " has only " + std::to_string(pool.size()) +
                               " training objects; using all of them for " + std::to_string(k) + "-shot");
    }
    pool.resize(std::min(k, pool.size()));
    std::sort(pool.begin(), pool.end());
    split.per_class[c] = std::move(pool);
  }
  split.test = ds.indices(Split::test);
  return split;
}

std::string to_string(Primitive p) {
  static const char* names[] = {"sphere", "cube", "cylinder", "cone", "torus", "pyramid", "ellipsoid", "plane_cross"};
  return names[static_cast<std::size_t>(p)];
}

Coords sample_primitive(Primitive p, std::size_t n_points, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  Coords out(static_cast<Eigen::Index>(n_points), 3);

  for (std::size_t i = 0; i < n_points; ++i) {
    Eigen::RowVector3d q;
    switch (p) {
      case Primitive::sphere:
      case Primitive::ellipsoid: {
        Eigen::RowVector3d g(gauss(rng), gauss(rng), gauss(rng));
        while (g.norm() < 1e-12) g = {gauss(rng), gauss(rng), gauss(rng)};
        q = g.normalized();
        if (p == Primitive::ellipsoid) q = q.cwiseProduct(Eigen::RowVector3d(1.0, 0.55, 0.3));
        break;
      }
      case Primitive::cube: {
        const auto face = std::uniform_int_distribution<int>(0, 5)(rng);
        q = {u11(rng), u11(rng), u11(rng)};
        q(face / 2) = face % 2 ? 1.0 : -1.0;
        break;
      }
      case Primitive::cylinder: {
        const double r = 0.6, h = 1.0;  // axis along y, y in [-h, h]
        const std::size_t part = pick_part({two_pi * r * 2 * h, std::numbers::pi * r * r, std::numbers::pi * r * r}, rng);
        const double t = two_pi * u01(rng);
        if (part == 0) {
          q = {r * std::cos(t), u11(rng) * h, r * std::sin(t)};
        } else {
          const double rr = r * std::sqrt(u01(rng));
          q = {rr * std::cos(t), part == 1 ? h : -h, rr * std::sin(t)};
        }
        break;
      }
      case Primitive::cone: {
        const double r = 0.8, top = 0.8, bottom = -0.8, slant = std::hypot(r, top - bottom);
        const std::size_t part = pick_part({std::numbers::pi * r * slant, std::numbers::pi * r * r}, rng);
        const double t = two_pi * u01(rng);
        if (part == 0) {
          const double s = std::sqrt(u01(rng));  // fraction of the way from apex to rim
          q = {s * r * std::cos(t), top - s * (top - bottom), s * r * std::sin(t)};
        } else {
          const double rr = r * std::sqrt(u01(rng));
          q = {rr * std::cos(t), bottom, rr * std::sin(t)};
        }
        break;
      }
      case Primitive::torus: {
        const double big = 0.75, small = 0.25;
        double phi = 0.0;
        do {
          phi = two_pi * u01(rng);
        } while (u01(rng) > (big + small * std::cos(phi)) / (big + small));
        const double theta = two_pi * u01(rng);
        const double ring = big + small * std::cos(phi);
        q = {ring * std::cos(theta), small * std::sin(phi), ring * std::sin(theta)};
        break;
      }
      case Primitive::pyramid: {
        const double half = 0.8, base = -0.6;
        const Eigen::RowVector3d apex(0.0, 0.8, 0.0);
        const Eigen::RowVector3d c[4] = {{-half, base, -half}, {half, base, -half}, {half, base, half}, {-half, base, half}};
        const double side_area = 0.5 * 2 * half * std::hypot(half, apex(1) - base);
        const std::size_t part = pick_part({4 * half * half, side_area, side_area, side_area, side_area}, rng);
        if (part == 0) {
          q = {u11(rng) * half, base, u11(rng) * half};
        } else {
          q = uniform_in_triangle(apex, c[part - 1], c[part % 4], rng);
        }
        break;
      }
      case Primitive::plane_cross: {
        const double a = u11(rng), b = u11(rng);
        q = u01(rng) < 0.5 ? Eigen::RowVector3d(a, b, 0.0) : Eigen::RowVector3d(0.0, b, a);
        break;
      }
    }
    out.row(static_cast<Eigen::Index>(i)) = q;
  }
  return out;
}

Dataset make_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t n_points,
                       std::uint64_t seed, double test_fraction, double jitter) {
  if (n_classes < 2) throw ValidationError("synthetic dataset needs at least 2 classes");
  if (n_classes > kPrimitiveCount) {
    throw ValidationError("synthetic dataset supports at most " + std::to_string(kPrimitiveCount) +
                          " classes, got " + std::to_string(n_classes));
  }
  if (per_class < 1 || n_points < 1) throw ValidationError("synthetic dataset needs objects and points");
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw ValidationError("test_fraction must be in [0, 1)");

  Dataset ds;
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, jitter > 0.0 ? jitter : 1.0);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(per_class)));
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto prim = static_cast<Primitive>(c);
    ds.class_names.push_back(to_string(prim));
    for (std::size_t i = 0; i < per_class; ++i) {
      Coords pts = sample_primitive(prim, n_points, rng);
      const double s = 0.8 + 0.4 * u01(rng);
      const Eigen::RowVector3d stretch(s * (0.9 + 0.2 * u01(rng)), s * (0.9 + 0.2 * u01(rng)),
                                       s * (0.9 + 0.2 * u01(rng)));
      pts = pts.array().rowwise() * stretch.array();
      const double azimuth = 2.0 * std::numbers::pi * u01(rng);
      const double tilt = (u01(rng) - 0.5) * 0.2 * std::numbers::pi;
      const Eigen::Matrix3d pose =
          Eigen::AngleAxisd(tilt, Eigen::Vector3d::UnitX()).toRotationMatrix() *
          Eigen::AngleAxisd(azimuth, Eigen::Vector3d::UnitY()).toRotationMatrix();
      pts = pts * pose.transpose();
      if (jitter > 0.0) {
        for (Eigen::Index r = 0; r < pts.rows(); ++r) {
          for (int k = 0; k < 3; ++k) pts(r, k) += noise(rng);
        }
      }
      ds.clouds.push_back(normalize_cloud({pts, static_cast<int>(c)}));
      ds.splits.push_back(i + n_test >= per_class ? Split::test : Split::train);
    }
  }
  return ds;
}

void write_modelnet_archive(const Dataset& ds, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create '" + root.string() + "': " + ec.message());
  for (auto [split, stem] : {std::pair{Split::train, "ply_data_train0"}, {Split::test, "ply_data_test0"}}) {
    const auto idx = ds.indices(split);
    const std::size_t points = idx.empty() ? 0 : ds.clouds[idx.front()].size();
    std::vector<float> data;
    std::vector<std::uint8_t> labels;
    for (std::size_t i : idx) {
      const auto& c = ds.clouds[i];
      if (c.size() != points) throw ValidationError("write_modelnet_archive: clouds differ in size");
      for (Eigen::Index r = 0; r < c.coords.rows(); ++r) {
        for (int k = 0; k < 3; ++k) data.push_back(static_cast<float>(c.coords(r, k)));
      }
      labels.push_back(static_cast<std::uint8_t>(*c.label));
    }
    const std::string file = std::string(stem) + ".h5";
    write_h5_clouds(root / file, data, idx.size(), points, labels);
    std::ofstream list(root / (split == Split::train ? "train_files.txt" : "test_files.txt"));
    list << "data/modelnet40_ply_hdf5_2048/" << file << '\n';
  }
  std::ofstream names(root / "shape_names.txt");
  for (const auto& n : ds.class_names) names << n << '\n';
  if (!names) throw IoError("failed writing shape_names.txt under '" + root.string() + "'");
}

}  // namespace mvp
