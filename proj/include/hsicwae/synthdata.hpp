#pragma once

// Grayscale elliptical blobs whose semi-major axis grows with the side
// information level s, r(s) = r0 + slope * s; rotation, eccentricity and a
// small center jitter are independent nuisance factors.

#include "hsicwae/common.hpp"
#include "hsicwae/csv.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <tuple>
#include <map>
#include <string>
#include <vector>

namespace hsicwae::synth {

struct SyntheticSpec {
  int side = 16;
  int levels = 5;
  int samples_per_level = 1000;
  double r0 = 2.0;
  double radius_slope = 0.8;
  double rotation_min = 0.0;
  double rotation_max = M_PI;
  double ecc_min = 0.5;
  double ecc_max = 1.0;
  double jitter = 1.0;  // center offset drawn from [-jitter, jitter] per axis
  double noise_sigma = 0.02;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  double radius(int level) const { return r0 + radius_slope * level; }

  void validate() const {
    if (levels < 2) throw ConfigError("levels must be >= 2, got " + std::to_string(levels));
    if (side < 4) throw ConfigError("image side must be >= 4");
    if (samples_per_level < 1) throw ConfigError("samples_per_level must be >= 1");
    if (rotation_max < rotation_min) throw ConfigError("rotation range is empty");
    if (!(ecc_min > 0.0) || ecc_max > 1.0 || ecc_max < ecc_min) throw ConfigError("eccentricity range must lie in (0, 1]");
    if (jitter < 0.0) throw ConfigError("jitter must be >= 0");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
    // Half a pixel of margin around the jittered ellipse.
    const double room = 0.5 * side - 0.5;
    for (int s = 1; s <= levels; ++s) {
      const double r = radius(s);
      if (!(r > 0.0)) throw ConfigError("level " + std::to_string(s) + " has non-positive radius");
      if (r + jitter > room) {
        throw ConfigError("level " + std::to_string(s) + ": ellipse radius " + csv::fmt(r) + " plus jitter " +
                          csv::fmt(jitter) + " exceeds the " + std::to_string(side) + "px frame");
      }
    }
  }
};

struct Nuisance {
  double rotation = 0.0;
  double eccentricity = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
};

struct LabeledDataset {
  int side = 0;
  Matrix images;  // n x side^2, row-major pixels in [0, 1]
  Matrix levels;  // n x 1
  std::vector<Nuisance> nuisance;  // empty for imported data
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;

  Eigen::Index size() const { return images.rows(); }
  Matrix train_images() const { return permute_rows(images, train); }
  Matrix train_levels() const { return permute_rows(levels, train); }
  Matrix test_images() const { return permute_rows(images, test); }
  Matrix test_levels() const { return permute_rows(levels, test); }
};

// Filled ellipse with 4x4 subpixel coverage. Pixel (row, col) spans
// [col, col+1] x [row, row+1]; returns side*side values, row-major.
inline Vector render_ellipse(int side, double cx, double cy, double semi_major, double semi_minor, double theta) {
  Vector img(side * side);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double inv_a2 = 1.0 / (semi_major * semi_major);
  const double inv_b2 = 1.0 / (semi_minor * semi_minor);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      int inside = 0;
      for (int sy = 0; sy < 4; ++sy) {
        const double dy = row + (sy + 0.5) / 4.0 - cy;
        for (int sx = 0; sx < 4; ++sx) {
          const double dx = col + (sx + 0.5) / 4.0 - cx;
          const double u = dx * c + dy * s;
          const double v = -dx * s + dy * c;
          if (u * u * inv_a2 + v * v * inv_b2 <= 1.0) ++inside;
        }
      }
      img(row * side + col) = inside / 16.0;
    }
  }
  return img;
}

inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(Eigen::Index n,
                                                                                     double test_fraction,
                                                                                     std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x5eed5eedULL));
  auto perm = rng.permutation(n);
  const auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> train(perm.begin(), perm.end() - n_test);
  std::vector<Eigen::Index> test(perm.end() - n_test, perm.end());
  return {std::move(train), std::move(test)};
}

// samples_per_level images per level s = 1..levels; sample i draws from its
// own stream seeded with seed + i.
inline LabeledDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(spec.levels) * spec.samples_per_level;
  LabeledDataset ds;
  ds.side = spec.side;
  ds.images.resize(n, spec.side * spec.side);
  ds.levels.resize(n, 1);
  ds.nuisance.resize(static_cast<std::size_t>(n));
  const double center = 0.5 * spec.side;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int level = 1 + static_cast<int>(i / spec.samples_per_level);
    Rng rng(spec.seed + static_cast<std::uint64_t>(i));
    Nuisance& nz = ds.nuisance[static_cast<std::size_t>(i)];
    nz.rotation = rng.uniform(spec.rotation_min, spec.rotation_max);
    nz.eccentricity = rng.uniform(spec.ecc_min, spec.ecc_max);
    nz.center_x = center + rng.uniform(-spec.jitter, spec.jitter);
    nz.center_y = center + rng.uniform(-spec.jitter, spec.jitter);
    const double r = spec.radius(level);
    Vector img = render_ellipse(spec.side, nz.center_x, nz.center_y, r, r * nz.eccentricity, nz.rotation);
    if (spec.noise_sigma > 0.0) {
      for (Eigen::Index p = 0; p < img.size(); ++p) img(p) += spec.noise_sigma * rng.normal();
    }
    ds.images.row(i) = img.cwiseMax(0.0).cwiseMin(1.0).transpose();
    ds.levels(i, 0) = level;
  }
  std::tie(ds.train, ds.test) = split_indices(n, spec.test_fraction, spec.seed);
  return ds;
}

// ---- on-disk format: manifest.csv (filename,level,split) + P5 PGM images ----

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void write_pgm(const std::filesystem::path& path, int width, int height, const Vector& pixels) {
  auto out = csv::open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::string bytes(static_cast<std::size_t>(pixels.size()), '\0');
  for (Eigen::Index i = 0; i < pixels.size(); ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>(quantize(pixels(i)));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

struct PgmImage {
  int width = 0;
  int height = 0;
  Vector pixels;  // in [0, 1]
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
  auto in = csv::open_in(path);
  const auto token = [&]() {
    std::string t;
    while (in) {
      const int c = in.get();
      if (c == EOF) break;
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        if (!t.empty()) break;
        continue;
      }
      if (std::isspace(c)) {
        if (!t.empty()) break;
        continue;
      }
      t += static_cast<char>(c);
    }
    return t;
  };
  if (token() != "P5") throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
  PgmImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw IoError("'" + path.string() + "': only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw IoError("'" + path.string() + "': malformed PGM header");
  }
  std::string bytes(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("'" + path.string() + "': truncated pixel data");
  img.pixels.resize(static_cast<Eigen::Index>(bytes.size()));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels(static_cast<Eigen::Index>(i)) = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return img;
}

inline std::string image_name(Eigen::Index i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06ld.pgm", static_cast<long>(i));
  return std::string("images/") + buf;
}

// Writes dir/manifest.csv and dir/images/*.pgm. Pixels are quantized to 8 bits.
inline void export_dataset(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create '" + (dir / "images").string() + "': " + ec.message());
  std::vector<const char*> split(static_cast<std::size_t>(ds.size()), "train");
  for (Eigen::Index i : ds.test) split[static_cast<std::size_t>(i)] = "test";
  auto manifest = csv::open_out(dir / "manifest.csv");
  manifest << "filename,level,split\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    write_pgm(dir / image_name(i), ds.side, ds.side, ds.images.row(i).transpose());
    manifest << image_name(i) << ',' << csv::fmt(ds.levels(i, 0)) << ',' << split[static_cast<std::size_t>(i)] << '\n';
  }
  if (!manifest) throw IoError("failed writing manifest in '" + dir.string() + "'");
}

inline LabeledDataset import_dataset(const std::filesystem::path& dir) {
  auto in = csv::open_in(dir / "manifest.csv");
  std::string line;
  if (!std::getline(in, line) || csv::split_line(line) != std::vector<std::string>{"filename", "level", "split"}) {
    throw IoError("'" + (dir / "manifest.csv").string() + "': expected header filename,level,split");
  }
  LabeledDataset ds;
  std::vector<Vector> images;
  std::vector<double> levels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv::split_line(line);
    double level = 0.0;
    if (fields.size() != 3 || !csv::parse_double(fields[1], level) || (fields[2] != "train" && fields[2] != "test")) {
      throw IoError("manifest line " + std::to_string(line_no) + " is malformed");
    }
    const PgmImage img = read_pgm(dir / fields[0]);
    if (img.width != img.height) throw IoError("'" + fields[0] + "' is not square");
    if (ds.side == 0) ds.side = img.width;
    if (img.width != ds.side) throw IoError("'" + fields[0] + "' has a different size from earlier images");
    const auto idx = static_cast<Eigen::Index>(images.size());
    (fields[2] == "test" ? ds.test : ds.train).push_back(idx);
    images.push_back(img.pixels);
    levels.push_back(level);
  }
  if (images.empty()) throw IoError("manifest in '" + dir.string() + "' lists no images");
  ds.images.resize(static_cast<Eigen::Index>(images.size()), ds.side * ds.side);
  ds.levels.resize(static_cast<Eigen::Index>(images.size()), 1);
  for (std::size_t i = 0; i < images.size(); ++i) {
    ds.images.row(static_cast<Eigen::Index>(i)) = images[i].transpose();
    ds.levels(static_cast<Eigen::Index>(i), 0) = levels[i];
  }
  return ds;
}

inline std::map<double, Eigen::Index> level_counts(const LabeledDataset& ds) {
  std::map<double, Eigen::Index> counts;
  for (Eigen::Index i = 0; i < ds.size(); ++i) ++counts[ds.levels(i, 0)];
  return counts;
}

}  // namespace hsicwae::synth
