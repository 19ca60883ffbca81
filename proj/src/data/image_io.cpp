#include "acf/data/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "acf/error.hpp"

namespace acf {
namespace {

// Header tokenizer shared by PFM and PGM. Tracks the byte offset for diagnostics.
class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, const char* format) : bytes_(bytes), format_(format) {}

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(errc::kFormat, std::string(format_) + ": " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (start == pos_) fail(std::string("missing ") + what);
    return std::string(bytes_.substr(start, pos_ - start));
  }

  std::size_t dimension(const char* what) {
    const std::size_t at = pos_;
    const std::string t = token(what);
    std::size_t value = 0;
    for (const char c : t) {
      if (c < '0' || c > '9' || value > (std::size_t{1} << 32)) {
        pos_ = at;
        fail(std::string("malformed ") + what + " '" + t + "'");
      }
      value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    if (value == 0) {
      pos_ = at;
      fail(std::string("zero ") + what);
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_header() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail("missing whitespace after header");
    ++pos_;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

  std::string_view bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

void require_payload(std::string_view bytes, std::size_t offset, std::size_t needed, const char* format) {
  if (bytes.size() - offset < needed) {
    throw Error(errc::kFormat, std::string(format) + ": truncated payload at byte " + std::to_string(bytes.size()) +
                                   " (expected " + std::to_string(offset + needed) + " bytes)");
  }
  if (bytes.size() - offset > needed) {
    throw Error(errc::kFormat, std::string(format) + ": trailing data at byte " + std::to_string(offset + needed));
  }
}

std::size_t image_height(const Tensor<double>& t) { return t.dim(0); }
std::size_t image_width(const Tensor<double>& t) { return t.dim(1); }

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot open '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(errc::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(errc::kIo, "failed writing '" + path.string() + "'");
}

Tensor<double> decode_pfm(std::string_view bytes) {
  HeaderReader h(bytes, "PFM");
  const std::string magic = h.token("magic");
  if (magic == "PF") h.fail("three-channel PFM is not supported");
  if (magic != "Pf") h.fail("bad magic '" + magic + "'");
  const std::size_t width = h.dimension("width");
  const std::size_t height = h.dimension("height");
  const std::size_t scale_at = h.pos();
  const std::string scale_text = h.token("scale");
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_text, &used);
    if (used != scale_text.size()) scale = 0.0;
  } catch (const std::exception&) {
    scale = 0.0;
  }
  if (scale == 0.0 || !std::isfinite(scale)) {
    throw Error(errc::kFormat, "PFM: malformed scale '" + scale_text + "' at byte " + std::to_string(scale_at));
  }
  h.end_header();
  const bool little = scale < 0.0;
  const std::size_t offset = h.pos();
  require_payload(bytes, offset, width * height * 4, "PFM");

  Tensor<double> out(Shape{height, width});
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t y = height - 1 - row;
    for (std::size_t x = 0; x < width; ++x) {
      const unsigned char* b = p + 4 * (row * width + x);
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) {
        const int shift = little ? 8 * k : 8 * (3 - k);
        bits |= static_cast<std::uint32_t>(b[k]) << shift;
      }
      out.at(y, x) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return out;
}

std::string encode_pfm(const Tensor<double>& map) {
  if (map.rank() != 2 && !(map.rank() == 3 && map.dim(2) == 1)) {
    throw Error(errc::kShape, "PFM: expected an H x W map, got " + shape_string(map.shape()));
  }
  const std::size_t height = image_height(map);
  const std::size_t width = image_width(map);
  if (height == 0 || width == 0) throw Error(errc::kShape, "PFM: zero-size map");
  std::string out = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + 4 * width * height);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t y = height - 1 - row;
    for (std::size_t x = 0; x < width; ++x) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map[y * width + x]));
      char* b = out.data() + header + 4 * (row * width + x);
      for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    }
  }
  return out;
}

Tensor<double> read_pfm(const std::filesystem::path& path) {
  try {
    return decode_pfm(read_file(path));
  } catch (const Error& e) {
    if (e.code() != errc::kFormat) throw;
    throw Error(errc::kFormat, path.string() + ": " + e.what());
  }
}

void write_pfm(const Tensor<double>& map, const std::filesystem::path& path) { write_file(path, encode_pfm(map)); }

Tensor<double> decode_pgm(std::string_view bytes) {
  HeaderReader h(bytes, "PGM");
  const std::string magic = h.token("magic");
  if (magic != "P5") h.fail("expected P5 magic, got '" + magic + "'");
  const std::size_t width = h.dimension("width");
  const std::size_t height = h.dimension("height");
  const std::size_t maxval = h.dimension("maxval");
  if (maxval != 255) h.fail("unsupported maxval " + std::to_string(maxval));
  h.end_header();
  const std::size_t offset = h.pos();
  require_payload(bytes, offset, width * height, "PGM");
  Tensor<double> out(Shape{height, width, 1});
  for (std::size_t i = 0; i < width * height; ++i) {
    out[i] = static_cast<double>(static_cast<unsigned char>(bytes[offset + i])) / 255.0;
  }
  return out;
}

std::string encode_pgm(const Tensor<double>& image) {
  if (image.rank() != 2 && !(image.rank() == 3 && image.dim(2) == 1)) {
    throw Error(errc::kShape, "PGM: expected a single-channel image, got " + shape_string(image.shape()));
  }
  const std::size_t height = image_height(image);
  const std::size_t width = image_width(image);
  if (height == 0 || width == 0) throw Error(errc::kShape, "PGM: zero-size image");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + width * height);
  for (std::size_t i = 0; i < width * height; ++i) {
    const double v = image[i];
    if (!std::isfinite(v)) throw Error(errc::kDomain, "PGM: non-finite pixel at index " + std::to_string(i));
    const double level = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    out[header + i] = static_cast<char>(static_cast<unsigned char>(level));
  }
  return out;
}

Tensor<double> read_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const Error& e) {
    if (e.code() != errc::kFormat) throw;
    throw Error(errc::kFormat, path.string() + ": " + e.what());
  }
}

void write_pgm(const Tensor<double>& image, const std::filesystem::path& path) {
  write_file(path, encode_pgm(image));
}

Mask read_mask_pgm(const std::filesystem::path& path) {
  const Tensor<double> image = read_pgm(path);
  Mask mask(image.dim(0), image.dim(1));
  for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, image[i] > 0.0);
  return mask;
}

void write_mask_pgm(const Mask& mask, const std::filesystem::path& path) {
  Tensor<double> image(Shape{mask.height(), mask.width(), 1});
  for (std::size_t i = 0; i < mask.size(); ++i) image[i] = mask[i] ? 1.0 : 0.0;
  write_pgm(image, path);
}

}  // namespace acf
