#pragma once

#include <string>

#include "hct/types.hpp"

namespace hct {

// Binary raster formats: 16-byte magic+version header ("HCTVOL01" /
// "HCTSIN01", zero padded), little-endian u32 dims in layout order, then
// little-endian f32 payload in row-major layout order. Physical metadata
// lives in a JSON sidecar at <path>.json.
void write_volume(const std::string& path, const Volume& vol);
Volume read_volume(const std::string& path);

void write_sinogram(const std::string& path, const Sinogram& sino);
Sinogram read_sinogram(const std::string& path);

// FNV-1a digest of a file's bytes, hex string.
std::string file_digest(const std::string& path);

}  // namespace hct
