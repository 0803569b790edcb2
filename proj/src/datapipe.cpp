#include "procan/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "procan/errors.hpp"

namespace procan {

namespace {

void require_3d(const Tensor& t, const char* what) {
  if (t.rank() != 3) throw DimensionError(std::string(what) + " must be 3-D, got " + shape_str(t.shape()));
}

std::size_t offset(const Shape& s, std::size_t z, std::size_t y, std::size_t x) { return (z * s[1] + y) * s[2] + x; }

// Source taps along one axis for trilinear resampling.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps axis_taps(std::size_t in_dim, double in_spacing, double target, std::size_t out_dim) {
  Taps t;
  for (std::size_t k = 0; k < out_dim; ++k) {
    const double pos = static_cast<double>(k) * target / in_spacing;
    auto i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= in_dim - 1) {
      t.lo.push_back(in_dim - 1);
      t.hi.push_back(in_dim - 1);
      t.frac.push_back(0.0);
      continue;
    }
    t.lo.push_back(i0);
    t.hi.push_back(i0 + 1);
    t.frac.push_back(pos - static_cast<double>(i0));
  }
  return t;
}

double lerp(double a, double b, double f) { return a * (1.0 - f) + b * f; }

struct Moments {
  double mean = 0.0, sd = 0.0;
};

Moments moments(const Tensor& t) {
  Moments m;
  for (double v : t.data()) m.mean += v;
  m.mean /= static_cast<double>(t.size());
  double ss = 0.0;
  for (double v : t.data()) ss += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(t.size()));
  return m;
}

constexpr double kStdEps = 1e-8;

// The two in-plane axes for a rotation about `axis`.
std::pair<std::size_t, std::size_t> plane_of(std::size_t axis) {
  if (axis == 0) return {1, 2};
  if (axis == 1) return {0, 2};
  return {0, 1};
}

Tensor quarter_turns(const Tensor& cube, std::size_t axis, std::size_t q) {
  const std::size_t n = cube.dim(0), last = n - 1;
  const auto [pa, pb] = plane_of(axis);
  Tensor out(cube.shape());
  std::size_t idx[3], src[3];
  for (idx[0] = 0; idx[0] < n; ++idx[0])
    for (idx[1] = 0; idx[1] < n; ++idx[1])
      for (idx[2] = 0; idx[2] < n; ++idx[2]) {
        const std::size_t u = idx[pa], v = idx[pb];
        src[axis] = idx[axis];
        switch (q) {
          case 0: src[pa] = u, src[pb] = v; break;
          case 1: src[pa] = v, src[pb] = last - u; break;
          case 2: src[pa] = last - u, src[pb] = last - v; break;
          default: src[pa] = last - v, src[pb] = u; break;
        }
        out.at(idx[0], idx[1], idx[2]) = cube.at(src[0], src[1], src[2]);
      }
  return out;
}

Tensor oblique_turn(const Tensor& cube, std::size_t axis, double c, double s, double fill) {
  const std::size_t n = cube.dim(0);
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const auto [pa, pb] = plane_of(axis);
  Tensor out(cube.shape());
  auto sample = [&](std::size_t fixed, long a, long b) {
    if (a < 0 || b < 0 || a >= static_cast<long>(n) || b >= static_cast<long>(n)) return fill;
    std::size_t at[3];
    at[axis] = fixed;
    at[pa] = static_cast<std::size_t>(a);
    at[pb] = static_cast<std::size_t>(b);
    return cube.at(at[0], at[1], at[2]);
  };
  std::size_t idx[3];
  for (idx[0] = 0; idx[0] < n; ++idx[0])
    for (idx[1] = 0; idx[1] < n; ++idx[1])
      for (idx[2] = 0; idx[2] < n; ++idx[2]) {
        const double du = static_cast<double>(idx[pa]) - centre, dv = static_cast<double>(idx[pb]) - centre;
        const double su = centre + c * du + s * dv;
        const double sv = centre - s * du + c * dv;
        const double fu = std::floor(su), fv = std::floor(sv);
        const double tu = su - fu, tv = sv - fv;
        const long a = static_cast<long>(fu), b = static_cast<long>(fv);
        const std::size_t f = idx[axis];
        const double top = lerp(sample(f, a, b), sample(f, a, b + 1), tv);
        const double bottom = lerp(sample(f, a + 1, b), sample(f, a + 1, b + 1), tv);
        out.at(idx[0], idx[1], idx[2]) = lerp(top, bottom, tu);
      }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError(where + ": '" + s + "' is not a number");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(where + ": '" + s + "' is not an integer");
  return v;
}

}  // namespace

std::string to_string(Label label) { return label == Label::Malignant ? "malignant" : "benign"; }

Label parse_label(const std::string& s) {
  if (s == "benign") return Label::Benign;
  if (s == "malignant") return Label::Malignant;
  throw DataError("label must be benign or malignant, got '" + s + "'");
}

void NoduleRecord::validate() const {
  const std::string who = "record '" + id + "'";
  if (id.empty()) throw DataError("record id is empty");
  if (id.find(',') != std::string::npos || volume_file.find(',') != std::string::npos)
    throw DataError(who + " contains a comma");
  if (volume_file.empty()) throw DataError(who + " has no volume file");
  if (!(diameter_mm > 0.0 && diameter_mm <= 30.0))
    throw DataError(who + " diameter " + format_double(diameter_mm) + " mm outside (0, 30]");
  for (double c : center_mm)
    if (!std::isfinite(c)) throw DataError(who + " has a non-finite centre");
  if (median_rating) {
    const int r = *median_rating;
    if (r < 1 || r > 5) throw DataError(who + " rating " + std::to_string(r) + " outside 1..5");
    if (r <= 2 && label != Label::Benign) throw DataError(who + " has rating " + std::to_string(r) + " but is malignant");
    if (r >= 4 && label != Label::Malignant) throw DataError(who + " has rating " + std::to_string(r) + " but is benign");
  }
}

CtVolume resample_isotropic(const CtVolume& vol, double target_mm) {
  if (!(target_mm > 0.0)) throw ConfigError("resampling target spacing must be positive");
  require_3d(vol.voxels, "volume");
  const Shape& in = vol.voxels.shape();
  for (std::size_t a = 0; a < 3; ++a) {
    if (in[a] == 0) throw DataError("volume has an empty axis: " + shape_str(in));
    if (!(vol.spacing[a] > 0.0)) throw DataError("volume spacing must be positive");
  }
  Shape out_shape(3);
  Taps taps[3];
  for (std::size_t a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(in[a] - 1) * vol.spacing[a];
    out_shape[a] = static_cast<std::size_t>(std::floor(extent / target_mm + 1e-9)) + 1;
    taps[a] = axis_taps(in[a], vol.spacing[a], target_mm, out_shape[a]);
  }
  const Tensor& v = vol.voxels;
  Tensor out(out_shape);
  for (std::size_t z = 0; z < out_shape[0]; ++z) {
    const std::size_t z0 = taps[0].lo[z], z1 = taps[0].hi[z];
    const double fz = taps[0].frac[z];
    for (std::size_t y = 0; y < out_shape[1]; ++y) {
      const std::size_t y0 = taps[1].lo[y], y1 = taps[1].hi[y];
      const double fy = taps[1].frac[y];
      for (std::size_t x = 0; x < out_shape[2]; ++x) {
        const std::size_t x0 = taps[2].lo[x], x1 = taps[2].hi[x];
        const double fx = taps[2].frac[x];
        const double c00 = lerp(v[offset(in, z0, y0, x0)], v[offset(in, z0, y0, x1)], fx);
        const double c01 = lerp(v[offset(in, z0, y1, x0)], v[offset(in, z0, y1, x1)], fx);
        const double c10 = lerp(v[offset(in, z1, y0, x0)], v[offset(in, z1, y0, x1)], fx);
        const double c11 = lerp(v[offset(in, z1, y1, x0)], v[offset(in, z1, y1, x1)], fx);
        out[offset(out_shape, z, y, x)] = lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fz);
      }
    }
  }
  return CtVolume{std::move(out), {target_mm, target_mm, target_mm}};
}

Tensor crop_cube(const CtVolume& vol, const Vec3& center_mm, std::size_t side) {
  require_3d(vol.voxels, "volume");
  if (side == 0) throw ConfigError("crop side must be positive");
  const double t = vol.spacing[0];
  if (vol.spacing[1] != t || vol.spacing[2] != t) throw DataError("crop_cube needs an isotropic volume");
  const Shape& in = vol.voxels.shape();
  long start[3];
  for (std::size_t a = 0; a < 3; ++a) {
    const long c = std::lround(center_mm[a] / t);
    if (c < 0 || c >= static_cast<long>(in[a]))
      throw DataError("nodule centre " + format_double(center_mm[a]) + " mm lies outside the volume on axis " +
                      std::to_string(a));
    start[a] = c - static_cast<long>(side / 2);
  }
  Tensor out({side, side, side}, kAirHu);
  for (std::size_t z = 0; z < side; ++z) {
    const long sz = start[0] + static_cast<long>(z);
    if (sz < 0 || sz >= static_cast<long>(in[0])) continue;
    for (std::size_t y = 0; y < side; ++y) {
      const long sy = start[1] + static_cast<long>(y);
      if (sy < 0 || sy >= static_cast<long>(in[1])) continue;
      for (std::size_t x = 0; x < side; ++x) {
        const long sx = start[2] + static_cast<long>(x);
        if (sx < 0 || sx >= static_cast<long>(in[2])) continue;
        out.at(z, y, x) = vol.voxels.at(static_cast<std::size_t>(sz), static_cast<std::size_t>(sy),
                                        static_cast<std::size_t>(sx));
      }
    }
  }
  return out;
}

Tensor clamp_hu(Tensor x) {
  for (auto& v : x.data()) v = std::min(std::max(v, kAirHu), kBoneHu);
  return x;
}

Tensor standardize(const Tensor& cube) {
  if (cube.empty()) return cube;
  const Moments m = moments(cube);
  const double sd = std::max(m.sd, kStdEps);
  Tensor out(cube.shape());
  for (std::size_t i = 0; i < cube.size(); ++i) out[i] = (cube[i] - m.mean) / sd;
  return out;
}

Sample preprocess(const NoduleRecord& record, const CtVolume& vol, std::size_t side) {
  const CtVolume iso = resample_isotropic(vol, 32.0 / static_cast<double>(side));
  const Tensor cube = clamp_hu(crop_cube(iso, record.center_mm, side));
  const Moments m = moments(cube);
  const double sd = std::max(m.sd, kStdEps);
  return Sample{record, standardize(cube), (kAirHu - m.mean) / sd};
}

Tensor rotate(const Tensor& cube, std::size_t index, double fill) {
  require_3d(cube, "augmentation input");
  if (cube.dim(0) != cube.dim(1) || cube.dim(0) != cube.dim(2))
    throw DimensionError("augmentation needs a cubic input, got " + shape_str(cube.shape()));
  if (index >= kAugmentCount) throw UsageError("rotation index " + std::to_string(index) + " outside [0, 21)");
  const std::size_t axis = index / kAugmentAngles, k = index % kAugmentAngles;
  if (k % 2 == 0) return quarter_turns(cube, axis, k / 2);
  const double r = std::sqrt(0.5);
  // 45°, 135°, 225°
  const double c = k == 1 ? r : -r;
  const double s = k == 5 ? -r : r;
  return oblique_turn(cube, axis, c, s, fill);
}

std::vector<Tensor> augment(const Tensor& cube, double fill, bool keep_identity_copies) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < kAugmentCount; ++i) {
    if (!keep_identity_copies && i % kAugmentAngles == 0 && i > 0) continue;
    out.push_back(rotate(cube, i, fill));
  }
  return out;
}

void write_volume(const std::filesystem::path& path, const CtVolume& vol) {
  require_3d(vol.voxels, "volume");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write volume " + path.string());
  const Shape& s = vol.voxels.shape();
  f << "PROCANVOL 1\n"
    << "dims " << s[0] << ' ' << s[1] << ' ' << s[2] << '\n'
    << "spacing " << format_double(vol.spacing[0]) << ' ' << format_double(vol.spacing[1]) << ' '
    << format_double(vol.spacing[2]) << '\n'
    << "type int16le\n"
    << "end\n";
  std::vector<char> bytes;
  bytes.reserve(2 * vol.voxels.size());
  for (double v : vol.voxels.data()) {
    if (v != std::round(v) || v < std::numeric_limits<std::int16_t>::min() ||
        v > std::numeric_limits<std::int16_t>::max())
      throw DataError("volume value " + format_double(v) + " is not representable as int16");
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
    bytes.push_back(static_cast<char>(u & 0xFF));
    bytes.push_back(static_cast<char>(u >> 8));
  }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing volume " + path.string());
}

CtVolume read_volume(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open volume " + path.string());
  const std::string where = "volume " + path.string();
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(f, line)) throw DataError(where + ": truncated header");
    std::istringstream is(line);
    std::string k;
    is >> k;
    if (k != key) throw DataError(where + ": expected '" + key + "' header line, got '" + line + "'");
    return is;
  };
  {
    auto is = next("PROCANVOL");
    int version = 0;
    is >> version;
    if (version != 1) throw DataError(where + ": unsupported version");
  }
  Shape dims(3);
  {
    auto is = next("dims");
    for (auto& d : dims) is >> d;
    if (!is || dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw DataError(where + ": bad dims line");
  }
  Vec3 spacing{};
  {
    auto is = next("spacing");
    std::string tok;
    for (auto& s : spacing) {
      is >> tok;
      s = parse_double(tok, where + " spacing");
      if (!(s > 0.0)) throw DataError(where + ": spacing must be positive");
    }
  }
  {
    auto is = next("type");
    std::string t;
    is >> t;
    if (t != "int16le") throw DataError(where + ": unsupported value type '" + t + "'");
  }
  next("end");
  const std::size_t n = shape_numel(dims);
  std::vector<unsigned char> bytes(2 * n);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(f.gcount()) != bytes.size())
    throw DataError(where + ": expected " + std::to_string(n) + " voxels");
  Tensor voxels(dims);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    voxels[i] = static_cast<std::int16_t>(u);
  }
  return CtVolume{std::move(voxels), spacing};
}

LoadedIndex load_index(const std::filesystem::path& index_path, const std::filesystem::path& volumes_dir,
                       std::ostream* log) {
  std::ifstream f(index_path);
  if (!f) throw DataError("cannot open index " + index_path.string());
  std::string line;
  if (!std::getline(f, line)) throw DataError("index " + index_path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kIndexHeader) throw DataError("index header must be '" + std::string(kIndexHeader) + "'");

  LoadedIndex out;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "index row " + std::to_string(row);
    const auto fields = split_csv(line);
    if (fields.size() != 8)
      throw DataError(where + ": expected 8 fields, got " + std::to_string(fields.size()));
    NoduleRecord r;
    r.id = fields[0];
    r.volume_file = fields[1];
    for (std::size_t a = 0; a < 3; ++a) r.center_mm[a] = parse_double(fields[2 + a], where + " centre");
    r.diameter_mm = parse_double(fields[5], where + " diameter");
    if (!fields[6].empty()) r.median_rating = parse_int(fields[6], where + " median_rating");
    try {
      r.label = parse_label(fields[7]);
    } catch (const DataError&) {
      throw DataError(where + ": label must be benign or malignant, got '" + fields[7] + "'");
    }
    if (r.median_rating == 3) {
      ++out.excluded_rating3;
      continue;
    }
    try {
      r.validate();
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!std::filesystem::exists(volumes_dir / r.volume_file))
      throw DataError("volume file for '" + r.id + "' not found: " + (volumes_dir / r.volume_file).string());
    out.records.push_back(std::move(r));
  }
  if (log)
    *log << "loaded " << out.records.size() << " records; excluded " << out.excluded_rating3
         << " with median rating 3\n";
  return out;
}

void write_index(const std::filesystem::path& index_path, const std::vector<NoduleRecord>& records) {
  std::ofstream f(index_path);
  if (!f) throw DataError("cannot write index " + index_path.string());
  f << kIndexHeader << '\n';
  for (const auto& r : records) {
    f << r.id << ',' << r.volume_file << ',' << format_double(r.center_mm[0]) << ',' << format_double(r.center_mm[1])
      << ',' << format_double(r.center_mm[2]) << ',' << format_double(r.diameter_mm) << ',';
    if (r.median_rating) f << *r.median_rating;
    f << ',' << to_string(r.label) << '\n';
  }
  if (!f) throw DataError("failed writing index " + index_path.string());
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  if (data.records.size() != data.volumes.size()) throw UsageError("dataset records and volumes differ in count");
  std::filesystem::create_directories(dir / "volumes");
  for (std::size_t i = 0; i < data.records.size(); ++i)
    write_volume(dir / "volumes" / data.records[i].volume_file, data.volumes[i]);
  write_index(dir / "index.csv", data.records);
}

Dataset load_dataset(const std::filesystem::path& dir, std::ostream* log) {
  LoadedIndex idx = load_index(dir / "index.csv", dir / "volumes", log);
  Dataset d;
  for (auto& r : idx.records) {
    d.volumes.push_back(read_volume(dir / "volumes" / r.volume_file));
    d.records.push_back(std::move(r));
  }
  return d;
}

std::vector<Sample> preprocess_all(const Dataset& data, std::size_t side) {
  std::vector<Sample> out;
  out.reserve(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) out.push_back(preprocess(data.records[i], data.volumes[i], side));
  return out;
}

namespace {

constexpr double kExtentMm = 56.0;
constexpr double kLungHu = -850.0;

struct Harmonic {
  Vec3 dir;
  double freq, phase;
};

CtVolume render_nodule(const Vec3& centre, double diameter, bool malignant, Rng& rng) {
  const double axial = rng.uniform(1.5, 2.5), inplane = rng.uniform(0.8, 1.2);
  const Vec3 sp{axial, inplane, inplane};
  Shape dims(3);
  for (std::size_t a = 0; a < 3; ++a) dims[a] = static_cast<std::size_t>(std::floor(kExtentMm / sp[a])) + 1;

  // Outline roughness and interior heterogeneity carry the label signal beyond size.
  const double roughness = malignant ? rng.uniform(0.15, 0.35) : rng.uniform(0.0, 0.08);
  const double hetero = malignant ? rng.uniform(40.0, 80.0) : rng.uniform(5.0, 20.0);
  const double solid = rng.uniform(-40.0, 60.0);
  std::vector<Harmonic> harmonics;
  for (int k = 0; k < 3; ++k) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) + 1e-12;
    for (auto& c : d) c /= norm;
    const double freq = malignant ? static_cast<double>(4 + rng.below(4)) : static_cast<double>(2 + rng.below(2));
    harmonics.push_back({d, freq, rng.uniform(0.0, 2.0 * M_PI)});
  }

  const double radius = diameter / 2.0;
  // Beyond this distance the soft edge is below 1e-7 and the voxel is background.
  const double reach = radius * (1.0 + roughness) + 10.0;
  Tensor vox(dims);
  for (std::size_t z = 0; z < dims[0]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[2]; ++x) {
        const Vec3 d{static_cast<double>(z) * sp[0] - centre[0], static_cast<double>(y) * sp[1] - centre[1],
                     static_cast<double>(x) * sp[2] - centre[2]};
        const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        const double background = kLungHu + rng.normal(0.0, 40.0);
        if (r > reach) {
          vox.at(z, y, x) = std::round(background);
          continue;
        }
        double shape = 0.0;
        if (r > 1e-9)
          for (const auto& h : harmonics)
            shape += std::sin(h.freq * (d[0] * h.dir[0] + d[1] * h.dir[1] + d[2] * h.dir[2]) / r + h.phase);
        const double edge = radius * (1.0 + roughness * shape / 3.0);
        const double inside = 1.0 / (1.0 + std::exp(-(edge - r) / 0.6));
        const double tissue = solid + rng.normal(0.0, hetero);
        const double hu = background * (1.0 - inside) + tissue * inside;
        vox.at(z, y, x) = std::clamp(std::round(hu), -32768.0, 32767.0);
      }
  return CtVolume{std::move(vox), sp};
}

}  // namespace

Dataset gen_synthetic(std::size_t n, std::uint64_t seed, std::size_t size) {
  if (n < 20) throw ConfigError("synthetic dataset needs at least 20 records for a stratified split");
  if (size != 16 && size != 32) throw ConfigError("synthetic cube size must be 16 or 32");
  Rng master(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(master.next_u64());
    NoduleRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04zu", i);
    r.id = id;
    r.volume_file = r.id + ".vol";
    r.diameter_mm = std::exp(rng.uniform(std::log(3.0), std::log(30.0)));
    const bool malignant = r.diameter_mm + rng.normal(0.0, 1.5) > 10.0;
    r.label = malignant ? Label::Malignant : Label::Benign;
    // Clear-cut calls are likelier far from the size threshold.
    const double clear = std::clamp(std::abs(r.diameter_mm - 10.0) / 10.0, 0.1, 0.9);
    const bool extreme = rng.bernoulli(clear);
    r.median_rating = malignant ? (extreme ? 5 : 4) : (extreme ? 1 : 2);
    for (std::size_t a = 0; a < 3; ++a) r.center_mm[a] = kExtentMm / 2.0 + rng.uniform(-4.0, 4.0);
    d.volumes.push_back(render_nodule(r.center_mm, r.diameter_mm, malignant, rng));
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace procan
