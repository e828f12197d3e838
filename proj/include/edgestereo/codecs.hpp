#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgestereo/data_gen.hpp"

namespace edgestereo {

// PFM, grayscale "Pf": width/height line, scale line whose sign encodes
// endianness (negative = little-endian), rows stored bottom to top.
// Color "PF" files are rejected.
std::vector<std::uint8_t> pfm_encode(const Tensor& map);  // [1,H,W]
Tensor pfm_decode(const std::uint8_t* data, std::size_t size);
void pfm_write(const std::string& path, const Tensor& map);
Tensor pfm_read(const std::string& path);

// 8-bit PNGs; tensor values in [0,1] quantized as round(255*v).
void png_write_gray8(const std::string& path, const Tensor& img);  // [1,H,W]
void png_write_rgb8(const std::string& path, const Tensor& img);   // [3,H,W]
Tensor png_read_gray8(const std::string& path);
Tensor png_read_rgb8(const std::string& path);

// 16-bit grayscale disparity: stored value = round(256*d), 0 marks invalid;
// decoding divides by 256 and flags zeros invalid. Requires d in [0, 255].
void png16_disparity_write(const std::string& path, const Tensor& d,
                           const Tensor* valid = nullptr);
struct DisparityImage {
  Tensor disparity;  // [1,H,W]
  Tensor valid;      // [1,H,W], 0 where the stored value was 0
};
DisparityImage png16_disparity_read(const std::string& path);

// Dataset manifest: plain text, one sample per line with five paths
// (left right disparity mask edges) relative to the manifest's directory.
struct ManifestEntry {
  std::string left, right, disparity, mask, edges;
};
void manifest_write(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> manifest_read(const std::string& path);

class ManifestSource final : public DataSource {
 public:
  explicit ManifestSource(const std::string& manifest_path);
  std::int64_t size() const override { return static_cast<std::int64_t>(entries_.size()); }
  StereoSample sample(std::int64_t index) const override;

 private:
  std::string dir_;
  std::vector<ManifestEntry> entries_;
};

}  // namespace edgestereo
