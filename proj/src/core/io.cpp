#include "ice/core/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ice/core/error.hpp"

namespace ice::io {

namespace {

void ensure_exists(const fs::path& path) {
  if (!fs::exists(path))
    fail(ErrorCode::input_not_found, "file not found: " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png_bytes(const fs::path& path, int height, int width, bool rgb,
                     const std::vector<std::uint8_t>& bytes) {
  ensure_parent(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    fail(ErrorCode::invalid_input, "cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::vector<std::uint8_t> read_png_bytes(const fs::path& path, bool rgb, int& height,
                                         int& width) {
  ensure_exists(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    fail(ErrorCode::invalid_input, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::invalid_input, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return bytes;
}

}  // namespace

double quantize8(double v) { return static_cast<double>(to_byte(v)) / 255.0; }

void write_png(const fs::path& path, const ImageTensor& image) {
  require(image.space() == Space::pixel, "write_png expects a pixel-space image");
  std::vector<std::uint8_t> bytes(image.size());
  const auto data = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(data[i]);
  write_png_bytes(path, image.height(), image.width(), image.channels() == 3, bytes);
}

ImageTensor read_png(const fs::path& path) {
  int h = 0, w = 0;
  const auto bytes = read_png_bytes(path, true, h, w);
  std::vector<double> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
  return ImageTensor(h, w, 3, Space::pixel, std::move(data));
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.pixel_count());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  write_png_bytes(path, mask.height(), mask.width(), false, bytes);
}

BinaryMask read_mask_png(const fs::path& path) {
  int h = 0, w = 0;
  auto bytes = read_png_bytes(path, false, h, w);
  for (auto& b : bytes) b = b > 127 ? 1 : 0;
  return BinaryMask(h, w, std::move(bytes));
}

void write_label_png(const fs::path& path, int height, int width,
                     const std::vector<int>& labels) {
  require(labels.size() == static_cast<std::size_t>(height) * width,
          "label grid size mismatch");
  std::vector<std::uint8_t> bytes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] <= 255, "label ids must fit in 8 bits");
    bytes[i] = static_cast<std::uint8_t>(labels[i]);
  }
  write_png_bytes(path, height, width, false, bytes);
}

std::vector<int> read_label_png(const fs::path& path, int& height, int& width) {
  const auto bytes = read_png_bytes(path, false, height, width);
  return std::vector<int>(bytes.begin(), bytes.end());
}

void write_raw_tensor(const fs::path& path, const ImageTensor& image) {
  static_assert(std::endian::native == std::endian::little,
                "raw tensor format is little-endian");
  ensure_parent(path);
  std::vector<float> values(image.data().begin(), image.data().end());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  nlohmann::json header = {{"height", image.height()},
                           {"width", image.width()},
                           {"channels", image.channels()},
                           {"space", image.space() == Space::pixel ? "pixel" : "latent"}};
  write_text(fs::path(path.string() + ".json"), header.dump(2) + "\n");
}

ImageTensor read_raw_tensor(const fs::path& path) {
  const auto header = nlohmann::json::parse(read_text(fs::path(path.string() + ".json")));
  const int h = header.at("height").get<int>();
  const int w = header.at("width").get<int>();
  const int c = header.at("channels").get<int>();
  const Space space = header.at("space").get<std::string>() == "pixel" ? Space::pixel
                                                                       : Space::latent;
  const auto bytes = read_bytes(path);
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != n * sizeof(float))
    fail(ErrorCode::invalid_input, "raw tensor size does not match its header");
  std::vector<float> values(n);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return ImageTensor(h, w, c, space, std::vector<double>(values.begin(), values.end()));
}

std::string read_text(const fs::path& path) {
  ensure_exists(path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCode::invalid_input, "cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  ensure_exists(path);
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::invalid_input, "cannot write " + path.string());
}

}  // namespace ice::io
