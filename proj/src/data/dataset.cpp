#include "acf/data/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "acf/data/image_io.hpp"
#include "acf/error.hpp"
#include "acf/model/config.hpp"

namespace fs = std::filesystem;

namespace acf {
namespace {

constexpr const char* kManifestMagic = "acf-stereo-dataset 1";

std::string range_value(const DisparityRange& r) { return format_double(r.lo) + ":" + format_double(r.hi); }

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || value.front() == '-') {
    throw Error(errc::kFormat, "manifest: bad integer for '" + key + "': '" + value + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw Error(errc::kFormat, "manifest: bad number for '" + key + "': '" + value + "'");
  }
  return v;
}

DisparityRange parse_range(const std::string& key, const std::string& value) {
  const std::size_t colon = value.find(':');
  if (colon == std::string::npos) throw Error(errc::kFormat, "manifest: bad range for '" + key + "': '" + value + "'");
  return DisparityRange{parse_real(key, value.substr(0, colon)), parse_real(key, value.substr(colon + 1))};
}

std::string sample_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

ManifestEntry entry_for(std::size_t index) {
  const std::string stem = sample_stem(index);
  return ManifestEntry{index, stem + "_left.pgm", stem + "_right.pgm", stem + "_disp.pfm", stem + "_occ.pgm"};
}

void prepare_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(errc::kIo, "'" + dir.string() + "' exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw Error(errc::kUsage, "output directory '" + dir.string() + "' is not empty (use --force to replace it)");
      }
      for (const auto& item : fs::directory_iterator(dir)) fs::remove_all(item.path());
    }
  } else {
    fs::create_directories(dir);
  }
}

}  // namespace

void DatasetSpec::validate() const {
  stereo.validate();
  if (count == 0) throw Error(errc::kDomain, "dataset count must be positive");
  if (target_occlusion && !(*target_occlusion >= 0.0 && *target_occlusion <= 1.0)) {
    throw Error(errc::kDomain, "target occlusion must lie in [0, 1]");
  }
}

std::string manifest_text(const Manifest& manifest) {
  const DatasetSpec& s = manifest.spec;
  const StereogramParams p = s.stereo.resolved();
  std::ostringstream out;
  out << "# " << kManifestMagic << "\n";
  out << "# height=" << p.height << "\n";
  out << "# width=" << p.width << "\n";
  out << "# max_disp=" << p.max_disp << "\n";
  out << "# count=" << s.count << "\n";
  out << "# seed=" << s.seed << "\n";
  out << "# shapes=" << p.num_shapes << "\n";
  out << "# background_disparity=" << range_value(*p.background) << "\n";
  out << "# shape_disparity=" << range_value(*p.shapes) << "\n";
  out << "# slant=" << (p.slant ? 1 : 0) << "\n";
  out << "# target_occlusion=" << (s.target_occlusion ? format_double(*s.target_occlusion) : "none") << "\n";
  out << "# max_shapes=" << s.max_shapes << "\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.index << '\t' << e.left.generic_string() << '\t' << e.right.generic_string() << '\t'
        << e.dgt.generic_string() << '\t' << e.occ.generic_string() << '\n';
  }
  return out.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool saw_magic = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    if (line.front() == '#') {
      std::string body = line.substr(1);
      const std::size_t start = body.find_first_not_of(' ');
      body = start == std::string::npos ? "" : body.substr(start);
      if (body == kManifestMagic) {
        saw_magic = true;
        continue;
      }
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string value = body.substr(eq + 1);
      StereogramParams& p = m.spec.stereo;
      if (key == "height") {
        p.height = parse_size(key, value);
      } else if (key == "width") {
        p.width = parse_size(key, value);
      } else if (key == "max_disp") {
        p.max_disp = parse_size(key, value);
      } else if (key == "count") {
        m.spec.count = parse_size(key, value);
      } else if (key == "seed") {
        m.spec.seed = parse_size(key, value);
      } else if (key == "shapes") {
        p.num_shapes = parse_size(key, value);
      } else if (key == "background_disparity") {
        p.background = parse_range(key, value);
      } else if (key == "shape_disparity") {
        p.shapes = parse_range(key, value);
      } else if (key == "slant") {
        p.slant = parse_size(key, value) != 0;
      } else if (key == "target_occlusion") {
        if (value == "none") {
          m.spec.target_occlusion.reset();
        } else {
          m.spec.target_occlusion = parse_real(key, value);
        }
      } else if (key == "max_shapes") {
        m.spec.max_shapes = parse_size(key, value);
      } else {
        throw Error(errc::kFormat, where + "unknown parameter '" + key + "'");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 5) {
      throw Error(errc::kFormat, where + "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    }
    m.entries.push_back(ManifestEntry{parse_size("index", fields[0]), fields[1], fields[2], fields[3], fields[4]});
  }
  if (!saw_magic) throw Error(errc::kFormat, "manifest: missing '# " + std::string(kManifestMagic) + "' header");
  return m;
}

fs::path manifest_path(const fs::path& dataset) {
  if (fs::is_directory(dataset)) return dataset / kManifestName;
  return dataset;
}

Manifest read_manifest(const fs::path& dataset) { return parse_manifest(read_file(manifest_path(dataset))); }

StereoSample generate_dataset_sample(const DatasetSpec& spec, std::size_t index) {
  const std::uint64_t seed = sample_seed(spec.seed, index);
  if (!spec.target_occlusion) return generate_stereogram(spec.stereo, seed).sample;
  StereogramParams params = spec.stereo;
  StereoSample best;
  double best_gap = 0.0;
  for (std::size_t k = 0; k <= spec.max_shapes; ++k) {
    params.num_shapes = k;
    StereoSample candidate = generate_stereogram(params, sample_seed(seed, k)).sample;
    const double gap = std::abs(occluded_fraction(candidate) - *spec.target_occlusion);
    if (k == 0 || gap < best_gap) {
      best = std::move(candidate);
      best_gap = gap;
    }
  }
  return best;
}

GenerationSummary write_dataset(const DatasetSpec& spec, const fs::path& dir, bool force) {
  spec.validate();
  prepare_directory(dir, force);
  Manifest manifest;
  manifest.spec = spec;
  std::size_t occluded = 0;
  std::size_t pixels = 0;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const StereoSample s = generate_dataset_sample(spec, i);
    const ManifestEntry e = entry_for(i);
    write_pgm(s.left, dir / e.left);
    write_pgm(s.right, dir / e.right);
    write_pfm(s.dgt, dir / e.dgt);
    write_pfm(s.dgt_right, dir / right_disparity_path(e.dgt));
    write_mask_pgm(s.occluded, dir / e.occ);
    manifest.entries.push_back(e);
    occluded += s.occluded.count();
    pixels += s.occluded.size();
  }
  GenerationSummary summary;
  summary.count = spec.count;
  summary.occluded_fraction = pixels == 0 ? 0.0 : static_cast<double>(occluded) / static_cast<double>(pixels);
  summary.manifest = dir / kManifestName;
  write_file(summary.manifest, manifest_text(manifest));
  return summary;
}

GenerationSummary regenerate_dataset(const fs::path& dataset, const fs::path& dir, bool force) {
  return write_dataset(read_manifest(dataset).spec, dir, force);
}

fs::path right_disparity_path(const fs::path& dgt) {
  fs::path out = dgt;
  out.replace_filename(dgt.stem().string() + "_right" + dgt.extension().string());
  return out;
}

std::vector<StereoSample> load_dataset(const fs::path& dataset) {
  const fs::path file = manifest_path(dataset);
  const Manifest manifest = read_manifest(file);
  const fs::path root = file.parent_path();
  const std::size_t max_disp = manifest.spec.stereo.max_disp;
  std::vector<StereoSample> samples;
  samples.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    StereoSample s;
    s.left = read_pgm(root / e.left);
    s.right = read_pgm(root / e.right);
    s.dgt = read_pfm(root / e.dgt);
    s.occluded = read_mask_pgm(root / e.occ);
    const fs::path right_dgt = root / right_disparity_path(e.dgt);
    if (fs::exists(right_dgt)) s.dgt_right = read_pfm(right_dgt);
    const std::size_t h = s.left.dim(0);
    const std::size_t w = s.left.dim(1);
    const bool consistent = s.right.shape() == s.left.shape() && s.dgt.dim(0) == h && s.dgt.dim(1) == w &&
                            s.occluded.height() == h && s.occluded.width() == w &&
                            (s.dgt_right.empty() || s.dgt_right.shape() == s.dgt.shape());
    if (!consistent) throw Error(errc::kShape, "sample " + std::to_string(e.index) + " has mismatched file sizes");
    s.valid = validity_from_disparity(s.dgt, max_disp);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace acf
