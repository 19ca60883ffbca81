#ifndef ACF_DATA_IMAGE_IO_HPP_
#define ACF_DATA_IMAGE_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "acf/mask.hpp"
#include "acf/numerics/tensor.hpp"

namespace acf {

/**
 * Single-channel PFM ("Pf"). Rows are stored bottom-to-top as float32; the
 * sign of the scale line selects the byte order (negative = little-endian).
 * Writing always emits scale -1.0. Values pass through float32.
 */
Tensor<double> decode_pfm(std::string_view bytes);
std::string encode_pfm(const Tensor<double>& map);
Tensor<double> read_pfm(const std::filesystem::path& path);
void write_pfm(const Tensor<double>& map, const std::filesystem::path& path);

/// Binary P5 greymap with maxval 255, mapped to H x W x 1 values in [0, 1].
/// Writing rounds to the nearest level after clamping to [0, 1].
Tensor<double> decode_pgm(std::string_view bytes);
std::string encode_pgm(const Tensor<double>& image);
Tensor<double> read_pgm(const std::filesystem::path& path);
void write_pgm(const Tensor<double>& image, const std::filesystem::path& path);

// Masks travel as P5 images: 255 inside, 0 outside; any nonzero level reads as set.
Mask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const Mask& mask, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace acf

#endif  // ACF_DATA_IMAGE_IO_HPP_
