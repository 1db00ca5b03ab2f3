#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <system_error>

#include "core/error.hpp"
#include "core/image.hpp"

namespace facebb {

namespace {

struct Header {
  int bit_depth = 0;
  int color_type = 0;
};

// Signature plus the fixed-position IHDR chunk: 8 + 4 (len) + 4 ("IHDR") +
// 4 (width) + 4 (height) + 1 (bit depth) + 1 (color type).
Header read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open image: " + path.string());
  std::array<unsigned char, 26> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size()) ||
      png_sig_cmp(buf.data(), 0, 8) != 0 || std::memcmp(buf.data() + 12, "IHDR", 4) != 0)
    fail(ErrorCode::Decode, "not a PNG file: " + path.string());
  return {buf[24], buf[25]};
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    fail(ErrorCode::FileNotFound, "image not found: " + path.string());

  const Header hdr = read_header(path);
  if (hdr.bit_depth != 8)
    fail(ErrorCode::Unsupported, "unsupported PNG bit depth " + std::to_string(hdr.bit_depth) +
                                     " (8-bit only): " + path.string());
  int channels = 0;
  if (hdr.color_type == PNG_COLOR_TYPE_GRAY)
    channels = 1;
  else if (hdr.color_type == PNG_COLOR_TYPE_RGB)
    channels = 3;
  else
    fail(ErrorCode::Unsupported,
         "unsupported PNG color type (grayscale or RGB only): " + path.string());

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    fail(ErrorCode::Decode, std::string("png: ") + img.message + ": " + path.string());
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  std::vector<png_byte> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::Decode, "png: " + msg + ": " + path.string());
  }

  std::vector<double> data(raw.size());
  std::transform(raw.begin(), raw.end(), data.begin(), [](png_byte b) { return b / 255.0; });
  return Image(static_cast<int>(img.height), static_cast<int>(img.width), channels,
               std::move(data));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) fail(ErrorCode::InvalidArgument, "cannot save an empty image");

  std::vector<png_byte> raw(img.size());
  auto src = img.data();
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<png_byte>(std::lround(std::clamp(src[i], 0.0, 1.0) * 255.0));

  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width());
  out.height = static_cast<png_uint_32>(img.height());
  out.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, raw.data(), 0, nullptr))
    fail(ErrorCode::Io, std::string("cannot write image: ") + out.message + ": " + path.string());
}

}  // namespace facebb
