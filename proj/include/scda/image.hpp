#pragma once

// 8-bit RGB images with bit-exact binary PPM (P6, maxval 255) I/O.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scda/io.hpp"

namespace scda {

struct RGBImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  static RGBImage filled(int width, int height, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
    RGBImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = r;
      img.pixels[i + 1] = g;
      img.pixels[i + 2] = b;
    }
    return img;
  }

  std::size_t n_pixels() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  void validate() const {
    require(width >= 1 && height >= 1, ErrorCode::BadDimension,
            "image must contain at least one pixel");
    require(pixels.size() == n_pixels() * 3, ErrorCode::ShapeMismatch,
            "pixel buffer does not match image dimensions");
  }
};

inline void save_ppm(const std::filesystem::path& path, const RGBImage& img) {
  img.validate();
  std::string buf = "P6\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  buf.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  detail::write_file(path, buf);
}

inline RGBImage load_ppm(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_int = [&]() -> long {
    skip_space();
    std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) ++pos;
    require(pos > start, ErrorCode::TruncatedFile,
            "'" + path.string() + "': malformed PPM header");
    return std::stol(data.substr(start, pos - start));
  };

  require(data.size() >= 2 && data[0] == 'P' && data[1] == '6', ErrorCode::BadMagic,
          "'" + path.string() + "' is not a binary PPM (P6) file");
  pos = 2;
  RGBImage img;
  img.width = static_cast<int>(read_int());
  img.height = static_cast<int>(read_int());
  const long maxval = read_int();
  require(maxval == 255, ErrorCode::VersionMismatch,
          "'" + path.string() + "': only maxval 255 is supported");
  require(pos < data.size() &&
              std::isspace(static_cast<unsigned char>(data[pos])),
          ErrorCode::TruncatedFile, "'" + path.string() + "': missing header terminator");
  ++pos;  // single whitespace byte separates header from payload
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  require(data.size() - pos == need, ErrorCode::TruncatedFile,
          "'" + path.string() + "': payload does not match dimensions");
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
  img.validate();
  return img;
}

}  // namespace scda
