#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "capx/image.hpp"

namespace capx {

// Decodes PNG or binary PGM/PPM (P5/P6, maxval 255). The frame id is the
// file stem. Throws IoError if the file cannot be opened, FormatError if it
// cannot be decoded.
Frame load_frame(const std::filesystem::path& path);

// PNG output, RGB for 3-channel frames and 8-bit gray otherwise.
void save_png(const Frame& frame, const std::filesystem::path& path);

// Binary PGM (1 channel) or PPM (3 channels), maxval 255.
void save_pnm(const Frame& frame, const std::filesystem::path& path);

// annotate() + save_png.
void save_annotated(const Frame& frame, const DensityResult& result,
                    const std::filesystem::path& path);

// Supported input files in `dir`, sorted by (stem, full path) so batch order
// is stable. Non-image files are ignored.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

}  // namespace capx
