#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "procan/rng.hpp"
#include "procan/tensor.hpp"

namespace procan {

inline constexpr double kAirHu = -1000.0;
inline constexpr double kBoneHu = 400.0;

/// (z, y, x), in millimetres or voxels depending on context.
using Vec3 = std::array<double, 3>;

struct CtVolume {
  Tensor voxels;  // [D×H×W] Hounsfield units
  Vec3 spacing{1.0, 1.0, 1.0};
};

enum class Label { Benign = 0, Malignant = 1 };

std::string to_string(Label label);
Label parse_label(const std::string& s);

struct NoduleRecord {
  std::string id;
  std::string volume_file;
  Vec3 center_mm{};
  double diameter_mm = 0.0;
  std::optional<int> median_rating;
  Label label = Label::Benign;

  /// Diameter in (0, 30] mm, rating in 1..5, and label agreeing with the rating.
  void validate() const;
  friend bool operator==(const NoduleRecord&, const NoduleRecord&) = default;
};

/// A preprocessed nodule ready for the network.
struct Sample {
  NoduleRecord record;
  Tensor cube;        // [S×S×S], standardized
  double air = 0.0;   // standardized image of -1000 HU, used as rotation fill
  double label() const { return record.label == Label::Malignant ? 1.0 : 0.0; }
};

/// Trilinear resampling onto a grid of spacing `target_mm` on every axis.
/// Output voxel k sits at k·target_mm from the first input voxel; the grid
/// covers the input extent.
CtVolume resample_isotropic(const CtVolume& vol, double target_mm);

/// side³ voxels around the voxel nearest to `center_mm`; voxels outside the
/// volume are -1000 HU. The volume must be isotropic.
Tensor crop_cube(const CtVolume& vol, const Vec3& center_mm, std::size_t side);

/// Elementwise clamp to [-1000, 400] HU.
Tensor clamp_hu(Tensor x);

/// Zero mean, unit standard deviation (population form). A constant cube maps to zeros.
Tensor standardize(const Tensor& cube);

/// resample → crop → clamp → standardize. The cube spans 32 mm with `side` voxels.
Sample preprocess(const NoduleRecord& record, const CtVolume& vol, std::size_t side);

/// 21 rotations of a cube: axes z, y, x (major), angles 0°, 45°, …, 270° (minor).
/// Multiples of 90° are exact index permutations; the others are bilinear in the
/// rotated plane about the cube centre, with `fill` outside. Dropping the
/// duplicate identities leaves 19.
std::vector<Tensor> augment(const Tensor& cube, double fill, bool keep_identity_copies = true);
inline constexpr std::size_t kAugmentCount = 21;
inline constexpr std::size_t kAugmentAngles = 7;
/// One rotation by index in [0, 21).
Tensor rotate(const Tensor& cube, std::size_t index, double fill);

/// Volume container: text header then little-endian int16 HU in z, y, x order.
void write_volume(const std::filesystem::path& path, const CtVolume& vol);
CtVolume read_volume(const std::filesystem::path& path);

struct LoadedIndex {
  std::vector<NoduleRecord> records;
  std::size_t excluded_rating3 = 0;
};

inline constexpr const char* kIndexHeader =
    "id,volume_file,center_z_mm,center_y_mm,center_x_mm,diameter_mm,median_rating,label";

/// Parses the index CSV, drops median-rating-3 rows, validates every record and
/// checks that each volume file exists under `volumes_dir`.
LoadedIndex load_index(const std::filesystem::path& index_path, const std::filesystem::path& volumes_dir,
                       std::ostream* log = nullptr);
void write_index(const std::filesystem::path& index_path, const std::vector<NoduleRecord>& records);

struct Dataset {
  std::vector<NoduleRecord> records;
  std::vector<CtVolume> volumes;  // parallel to records
};

/// Writes `dir/index.csv` and one volume file per record under `dir/volumes`.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
/// Reads a directory written by write_dataset (or laid out the same way).
Dataset load_dataset(const std::filesystem::path& dir, std::ostream* log = nullptr);

/// Loads and preprocesses every record.
std::vector<Sample> preprocess_all(const Dataset& data, std::size_t side);

/// Synthetic nodules on noisy lung background. Diameters are log-uniform on
/// [3, 30] mm; malignant iff diameter + N(0, 1.5) > 10 mm; malignant nodules
/// also get rougher outlines and more heterogeneous interiors.
Dataset gen_synthetic(std::size_t n, std::uint64_t seed, std::size_t size);

}  // namespace procan
