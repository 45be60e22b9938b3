#include <png.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>

#include "revfilt/image.hpp"

namespace revfilt {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

bool has_extension(const std::filesystem::path& path, const char* ext) {
  std::string e = path.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

class PnmReader {
 public:
  explicit PnmReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  // Reads the next whitespace-delimited header token, skipping comments.
  std::string token() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) throw FormatError("malformed PNM header: unexpected end of data");
    return out;
  }

  std::size_t number() {
    const std::string t = token();
    std::size_t v = 0;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw FormatError("malformed PNM header: expected a number, got '" + t + "'");
      v = v * 10 + static_cast<std::size_t>(c - '0');
      if (v > (1u << 24)) throw FormatError("malformed PNM header: value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw FormatError("malformed PNM header: missing raster separator");
    ++pos_;
  }

  std::span<const unsigned char> rest() const { return bytes_.subspan(pos_); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image load_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw FormatError("cannot read PNG '" + path.string() + "': " + png.message);
  }
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = colour ? 3 : 1;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError("cannot decode PNG '" + path.string() + "': " + png.message);
  }
  const std::size_t w = png.width, h = png.height;
  std::vector<double> px(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (colour) {
      const unsigned char* p = &buf[i * channels];
      px[i] = (kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]) / 255.0;
    } else {
      px[i] = buf[i] / 255.0;
    }
  }
  return Image(w, h, std::move(px));
}

void save_png(const Image& img, const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) buf[i] = quantize_pixel(img[i]);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error("cannot write PNG '" + path.string() + "': " + png.message);
  }
}

}  // namespace

std::uint8_t quantize_pixel(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.pixels()) out.push_back(static_cast<char>(quantize_pixel(v)));
  return out;
}

Image decode_pgm(std::span<const unsigned char> bytes) {
  PnmReader reader(bytes);
  const std::string magic = reader.token();
  if (magic != "P5" && magic != "P6") {
    throw FormatError("unsupported PNM variant '" + magic + "' (expected P5 or P6)");
  }
  const std::size_t w = reader.number();
  const std::size_t h = reader.number();
  const std::size_t maxval = reader.number();
  if (w == 0 || h == 0) throw FormatError("malformed PNM header: zero dimension");
  if (maxval == 0 || maxval > 255) {
    throw FormatError("unsupported PNM maxval " + std::to_string(maxval) + " (8-bit only)");
  }
  reader.end_header();
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const auto raster = reader.rest();
  if (raster.size() < w * h * channels) {
    throw FormatError("malformed PNM: raster truncated (" + std::to_string(raster.size()) +
                      " of " + std::to_string(w * h * channels) + " bytes)");
  }
  const double denom = static_cast<double>(maxval);
  std::vector<double> px(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (channels == 3) {
      const unsigned char* p = &raster[i * 3];
      px[i] = (kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]) / denom;
    } else {
      px[i] = raster[i] / denom;
    }
  }
  return Image(w, h, std::move(px));
}

Image load_image(const std::filesystem::path& path) {
  if (has_extension(path, ".png")) return load_png(path);
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
      bytes[3] == 'G') {
    return load_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pgm(bytes);
  throw FormatError("unsupported image format: '" + path.string() + "'");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (has_extension(path, ".png")) {
    save_png(img, path);
    return;
  }
  if (!has_extension(path, ".pgm")) {
    throw FormatError("unsupported output extension for '" + path.string() +
                      "' (use .pgm or .png)");
  }
  const std::string data = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace revfilt
