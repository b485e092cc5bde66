#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"

namespace ice::io {

namespace fs = std::filesystem;

// 8-bit PNG; values are quantized to k/255.
void write_png(const fs::path& path, const ImageTensor& image);
ImageTensor read_png(const fs::path& path);

// Single-channel PNG, 0 = background, 255 = foreground.
void write_mask_png(const fs::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const fs::path& path);

// Single-channel 8-bit PNG whose values are integer label ids.
void write_label_png(const fs::path& path, int height, int width,
                     const std::vector<int>& labels);
std::vector<int> read_label_png(const fs::path& path, int& height, int& width);

// Latent tensors: raw little-endian float32 plus "<path>.json" sidecar
// {height, width, channels, space}.
void write_raw_tensor(const fs::path& path, const ImageTensor& image);
ImageTensor read_raw_tensor(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);

// Pixel value quantized the way an 8-bit PNG stores it.
double quantize8(double v);

}  // namespace ice::io
