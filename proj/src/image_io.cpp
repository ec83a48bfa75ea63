#include "capx/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <utility>

#include "capx/errors.hpp"

namespace fs = std::filesystem;

namespace capx {

namespace {

std::vector<std::uint8_t> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Skips PNM whitespace and '#' comments, then parses one decimal token.
int parse_pnm_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
    throw FormatError("pnm: expected integer token");
  }
  long v = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    v = v * 10 + (bytes[pos] - '0');
    if (v > 1 << 30) throw FormatError("pnm: integer out of range");
    ++pos;
  }
  return static_cast<int>(v);
}

Frame load_pnm(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const int width = parse_pnm_int(bytes, pos);
  const int height = parse_pnm_int(bytes, pos);
  const int maxval = parse_pnm_int(bytes, pos);
  if (width < 1 || height < 1) throw FormatError("pnm: bad dimensions");
  if (maxval != 255) throw FormatError("pnm: only maxval 255 is supported");
  ++pos;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < pos + need) throw FormatError("pnm: truncated pixel data");
  Frame f = Frame::make(path.stem().string(), width, height, channels);
  std::copy_n(bytes.begin() + pos, need, f.data.begin());
  return f;
}

Frame load_png_file(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError("png: " + std::string(image.message));
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0 &&
                    (image.format & PNG_FORMAT_FLAG_ALPHA) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Frame f = Frame::make(path.stem().string(), static_cast<int>(image.width),
                        static_cast<int>(image.height), gray ? 1 : 3);
  if (!png_image_finish_read(&image, nullptr, f.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("png: " + msg);
  }
  return f;
}

bool has_magic(const std::vector<std::uint8_t>& bytes, const char* magic, std::size_t n) {
  return bytes.size() >= n && std::equal(magic, magic + n, bytes.begin());
}

}  // namespace

Frame load_frame(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec) || ec) throw IoError("no such file: " + path.string());
  const std::vector<std::uint8_t> bytes = read_all(path);
  if (has_magic(bytes, "P5", 2) || has_magic(bytes, "P6", 2)) return load_pnm(path, bytes);
  if (has_magic(bytes, "\x89PNG", 4)) return load_png_file(path);
  throw FormatError("unsupported image format: " + path.string());
}

void save_png(const Frame& frame, const fs::path& path) {
  if (!frame.valid()) throw FormatError("save_png: invalid frame");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = frame.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, frame.data.data(), 0,
                               nullptr)) {
    throw IoError("png write failed: " + path.string() + ": " + image.message);
  }
}

void save_pnm(const Frame& frame, const fs::path& path) {
  if (!frame.valid()) throw FormatError("save_pnm: invalid frame");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << (frame.channels == 1 ? "P5" : "P6") << "\n"
      << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.data.data()),
            static_cast<std::streamsize>(frame.data.size()));
  if (!out) throw IoError("short write: " + path.string());
}

void save_annotated(const Frame& frame, const DensityResult& result, const fs::path& path) {
  save_png(annotate(frame, result), path);
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const auto ka = std::make_pair(a.stem().string(), a.string());
    const auto kb = std::make_pair(b.stem().string(), b.string());
    return ka < kb;
  });
  return files;
}

}  // namespace capx
