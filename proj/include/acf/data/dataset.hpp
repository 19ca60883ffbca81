#ifndef ACF_DATA_DATASET_HPP_
#define ACF_DATA_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acf/data/stereogram.hpp"

namespace acf {

// Everything needed to regenerate a dataset bit-for-bit.
struct DatasetSpec {
  StereogramParams stereo;
  std::size_t count = 0;
  std::uint64_t seed = 1;
  // When set, each sample uses the shape count in [0, max_shapes] whose
  // occluded fraction is closest to the target (ties: fewer shapes).
  std::optional<double> target_occlusion;
  std::size_t max_shapes = 12;

  void validate() const;
};

struct ManifestEntry {
  std::size_t index = 0;
  std::filesystem::path left, right, dgt, occ;  // relative to the manifest directory
};

/**
 * Line-oriented dataset index. Generation parameters come first as
 * "# key=value" lines, then one row per sample:
 *   index<TAB>left<TAB>right<TAB>dgt<TAB>occ
 * A right-view disparity map, when present, sits next to the dgt file with
 * "_right" before the extension.
 */
struct Manifest {
  DatasetSpec spec;
  std::vector<ManifestEntry> entries;
};

inline constexpr const char* kManifestName = "manifest.tsv";

std::string manifest_text(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);

// Accepts the manifest file itself or the directory holding it.
std::filesystem::path manifest_path(const std::filesystem::path& dataset);
Manifest read_manifest(const std::filesystem::path& dataset);

StereoSample generate_dataset_sample(const DatasetSpec& spec, std::size_t index);

struct GenerationSummary {
  std::size_t count = 0;
  double occluded_fraction = 0.0;  // over all pixels of all samples
  std::filesystem::path manifest;
};

// Writes PGM images, PFM disparities, PGM occlusion masks and the manifest.
// A non-empty `dir` is rejected unless `force`, which clears it first.
GenerationSummary write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir, bool force);

// Regenerates the dataset described by an existing manifest into `dir`.
GenerationSummary regenerate_dataset(const std::filesystem::path& dataset, const std::filesystem::path& dir,
                                     bool force);

std::filesystem::path right_disparity_path(const std::filesystem::path& dgt);

// Loads samples in manifest order; validity is re-derived from the stored
// disparity and the manifest's max disparity.
std::vector<StereoSample> load_dataset(const std::filesystem::path& dataset);

}  // namespace acf

#endif  // ACF_DATA_DATASET_HPP_
