#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ice/core/image.hpp"
#include "ice/core/mask.hpp"

namespace ice::synthetic {

enum class Axis { category, colour, material };

struct Category {
  std::string name;
  int pattern;  // index into the texture table, see dark_texel()
};

struct Colour {
  std::string name;
  std::array<double, 3> rgb;
};

struct Material {
  std::string name;
  double level;
};

const std::vector<Category>& categories();
const std::vector<Colour>& colours();
const std::vector<Material>& materials();

// Concept words of one attribute axis in catalogue order.
const std::vector<std::string>& axis_words(Axis axis);
std::vector<std::string> catalogue_words();
int word_index(Axis axis, const std::string& word);  // -1 when absent

// Whether category `category_index` darkens pixel (y, x); coordinates are absolute.
bool dark_texel(int category_index, int y, int x);
inline constexpr double dark_factor = 0.5;

// Pixel value of a shape texel before any quantization.
std::array<double, 3> texel(int category, int colour, int material, int y, int x);

struct Shape {
  std::string category;
  std::string colour;
  std::string material;
  BinaryMask region;
};

struct SyntheticWorld {
  int height = 32;
  int width = 32;
  std::vector<Shape> shapes;
  std::vector<std::string> vocabulary;

  // Checks disjoint regions, known catalogue words, unique categories and
  // that every category appears in the vocabulary.
  void validate() const;

  // 8-bit-exact rendering so the PNG round trip is lossless.
  ImageTensor render() const;

  const Shape* find(const std::string& category) const;
  double coverage() const;
};

// Guillotine partition of rows 1..H-1 into `count` rectangles, each at least
// 4x4, with categories, colours and materials drawn without replacement.
SyntheticWorld synthesize_world(int count, std::uint64_t seed, int height = 32, int width = 32);

// JSON {canvas: [H, W], shapes: [{category, colour, material, region_png}], vocabulary}.
// Region PNG paths are relative to the JSON file.
void save_world(const std::filesystem::path& path, const SyntheticWorld& world);
SyntheticWorld load_world(const std::filesystem::path& path);

}  // namespace ice::synthetic
