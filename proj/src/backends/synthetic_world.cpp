#include "ice/backends/synthetic_world.hpp"

#include <algorithm>

#include "json.hpp"

#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "ice/core/rng.hpp"

namespace ice::synthetic {

using nlohmann::json;

const std::vector<Category>& categories() {
  static const std::vector<Category> table = {
      {"cube", 0},    {"sphere", 1},  {"cone", 2}, {"cylinder", 3},
      {"torus", 4},   {"pyramid", 5}, {"vase", 6}, {"bust", 7},
  };
  return table;
}

const std::vector<Colour>& colours() {
  static const std::vector<Colour> table = {
      {"red", {1.0, 0.15, 0.15}},    {"green", {0.15, 1.0, 0.15}},
      {"blue", {0.15, 0.15, 1.0}},   {"yellow", {1.0, 1.0, 0.15}},
      {"cyan", {0.15, 1.0, 1.0}},    {"magenta", {1.0, 0.15, 1.0}},
      {"orange", {1.0, 0.55, 0.15}}, {"purple", {0.55, 0.15, 1.0}},
  };
  return table;
}

const std::vector<Material>& materials() {
  static const std::vector<Material> table = {
      {"matte", 1.0}, {"metal", 0.9}, {"wood", 0.8}, {"stone", 0.7}, {"glass", 0.6},
  };
  return table;
}

const std::vector<std::string>& axis_words(Axis axis) {
  static const auto build = [](auto const& table) {
    std::vector<std::string> out;
    for (const auto& e : table) out.push_back(e.name);
    return out;
  };
  static const std::vector<std::string> cat = build(categories());
  static const std::vector<std::string> col = build(colours());
  static const std::vector<std::string> mat = build(materials());
  switch (axis) {
    case Axis::category: return cat;
    case Axis::colour: return col;
    case Axis::material: return mat;
  }
  return cat;
}

std::vector<std::string> catalogue_words() {
  std::vector<std::string> out;
  for (Axis a : {Axis::category, Axis::colour, Axis::material})
    for (const auto& w : axis_words(a)) out.push_back(w);
  return out;
}

int word_index(Axis axis, const std::string& word) {
  const auto& words = axis_words(axis);
  const auto it = std::find(words.begin(), words.end(), word);
  return it == words.end() ? -1 : static_cast<int>(it - words.begin());
}

bool dark_texel(int category_index, int y, int x) {
  switch (categories()[static_cast<std::size_t>(category_index)].pattern) {
    case 0: return false;                    // solid
    case 1: return (x + y) % 2 == 1;         // checker
    case 2: return y % 2 == 1;               // row stripes
    case 3: return x % 2 == 1;               // column stripes
    case 4: return x % 2 == 1 && y % 2 == 1; // dots
    case 5: return y % 3 == 0;
    case 6: return x % 3 == 0;
    default: return (x + y) % 3 == 0;        // diagonals
  }
}

std::array<double, 3> texel(int category, int colour, int material, int y, int x) {
  const double scale = materials()[static_cast<std::size_t>(material)].level *
                       (dark_texel(category, y, x) ? dark_factor : 1.0);
  const auto& rgb = colours()[static_cast<std::size_t>(colour)].rgb;
  return {rgb[0] * scale, rgb[1] * scale, rgb[2] * scale};
}

void SyntheticWorld::validate() const {
  if (height < 1 || width < 1) fail(ErrorCode::schema_violation, "world canvas must be nonempty");
  BinaryMask used(height, width);
  std::vector<std::string> seen;
  for (const auto& s : shapes) {
    if (word_index(Axis::category, s.category) < 0)
      fail(ErrorCode::schema_violation, "unknown category in world: " + s.category);
    if (word_index(Axis::colour, s.colour) < 0)
      fail(ErrorCode::schema_violation, "unknown colour in world: " + s.colour);
    if (word_index(Axis::material, s.material) < 0)
      fail(ErrorCode::schema_violation, "unknown material in world: " + s.material);
    if (s.region.height() != height || s.region.width() != width)
      fail(ErrorCode::schema_violation, "shape region does not match the canvas");
    if (std::find(seen.begin(), seen.end(), s.category) != seen.end())
      fail(ErrorCode::schema_violation, "category appears twice in world: " + s.category);
    if (std::find(vocabulary.begin(), vocabulary.end(), s.category) == vocabulary.end())
      fail(ErrorCode::schema_violation, "shape category missing from vocabulary: " + s.category);
    if (!(used & s.region).empty())
      fail(ErrorCode::schema_violation, "shape regions overlap");
    used = used | s.region;
    seen.push_back(s.category);
  }
}

ImageTensor SyntheticWorld::render() const {
  auto image = ImageTensor::zeros(height, width, 3, Space::pixel);
  for (const auto& s : shapes) {
    const int c = word_index(Axis::category, s.category);
    const int k = word_index(Axis::colour, s.colour);
    const int m = word_index(Axis::material, s.material);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        if (!s.region.at(y, x)) continue;
        const auto v = texel(c, k, m, y, x);
        for (int ch = 0; ch < 3; ++ch) image.at(y, x, ch) = io::quantize8(v[ch]);
      }
  }
  return image;
}

const Shape* SyntheticWorld::find(const std::string& category) const {
  for (const auto& s : shapes)
    if (s.category == category) return &s;
  return nullptr;
}

double SyntheticWorld::coverage() const {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.region.count();
  return static_cast<double>(n) / (static_cast<double>(height) * width);
}

namespace {

struct Rect {
  int y0, x0, h, w;
};

template <typename T>
std::vector<T> draw_without_replacement(const std::vector<T>& pool, int count, Rng& rng) {
  std::vector<T> items = pool;
  std::vector<T> out;
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(items.size()) - 1));
    out.push_back(items[j]);
    items.erase(items.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return out;
}

}  // namespace

SyntheticWorld synthesize_world(int count, std::uint64_t seed, int height, int width) {
  // Quarter-canvas sides keep every shape above 5% of the canvas, so a
  // localization pass at the default threshold never stops one shape early.
  const int min_side = std::max(4, std::min(height, width) / 4);
  const int max_count = static_cast<int>(materials().size());
  if (count < 1 || count > max_count)
    fail(ErrorCode::invalid_input,
         "world synth supports 1.." + std::to_string(max_count) + " shapes");
  if (height < min_side + 1 || width < min_side)
    fail(ErrorCode::invalid_input, "canvas too small for world synth");

  Rng rng(seed);
  std::vector<Rect> pieces = {{1, 0, height - 1, width}};
  while (static_cast<int>(pieces.size()) < count) {
    std::vector<std::size_t> splittable;
    for (std::size_t i = 0; i < pieces.size(); ++i)
      if (pieces[i].h >= 2 * min_side || pieces[i].w >= 2 * min_side) splittable.push_back(i);
    if (splittable.empty()) fail(ErrorCode::invalid_input, "canvas too small for that many shapes");
    const std::size_t pick = splittable[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(splittable.size()) - 1))];
    const Rect r = pieces[pick];
    bool horizontal = r.h >= 2 * min_side;
    if (r.h >= 2 * min_side && r.w >= 2 * min_side) horizontal = rng.uniform_int(0, 1) == 0;
    Rect a = r, b = r;
    if (horizontal) {
      const int cut = static_cast<int>(rng.uniform_int(min_side, r.h - min_side));
      a.h = cut;
      b.y0 = r.y0 + cut;
      b.h = r.h - cut;
    } else {
      const int cut = static_cast<int>(rng.uniform_int(min_side, r.w - min_side));
      a.w = cut;
      b.x0 = r.x0 + cut;
      b.w = r.w - cut;
    }
    pieces[pick] = a;
    pieces.push_back(b);
  }

  const auto cats = draw_without_replacement(axis_words(Axis::category), count, rng);
  const auto cols = draw_without_replacement(axis_words(Axis::colour), count, rng);
  const auto mats = draw_without_replacement(axis_words(Axis::material), count, rng);

  SyntheticWorld world;
  world.height = height;
  world.width = width;
  world.vocabulary = catalogue_words();
  for (int i = 0; i < count; ++i) {
    const Rect& r = pieces[static_cast<std::size_t>(i)];
    BinaryMask region(height, width);
    for (int y = r.y0; y < r.y0 + r.h; ++y)
      for (int x = r.x0; x < r.x0 + r.w; ++x) region.set(y, x, true);
    world.shapes.push_back({cats[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(i)],
                            mats[static_cast<std::size_t>(i)], std::move(region)});
  }
  world.validate();
  return world;
}

void save_world(const std::filesystem::path& path, const SyntheticWorld& world) {
  world.validate();
  json shapes = json::array();
  for (std::size_t i = 0; i < world.shapes.size(); ++i) {
    const auto& s = world.shapes[i];
    const std::string png = "region_" + std::to_string(i) + ".png";
    io::write_mask_png(path.parent_path() / png, s.region);
    shapes.push_back({{"category", s.category},
                      {"colour", s.colour},
                      {"material", s.material},
                      {"region_png", png}});
  }
  const json doc = {{"canvas", {world.height, world.width}},
                    {"shapes", shapes},
                    {"vocabulary", world.vocabulary}};
  io::write_text(path, doc.dump(2) + "\n");
}

SyntheticWorld load_world(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, "world file is not valid JSON: " + std::string(e.what()));
  }
  SyntheticWorld world;
  try {
    const auto canvas = doc.at("canvas").get<std::vector<int>>();
    if (canvas.size() != 2) fail(ErrorCode::schema_violation, "canvas must be [H, W]");
    world.height = canvas[0];
    world.width = canvas[1];
    world.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& s : doc.at("shapes")) {
      auto region = io::read_mask_png(path.parent_path() / s.at("region_png").get<std::string>());
      world.shapes.push_back({s.at("category").get<std::string>(),
                              s.at("colour").get<std::string>(),
                              s.at("material").get<std::string>(), std::move(region)});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, "malformed world file: " + std::string(e.what()));
  }
  world.validate();
  return world;
}

}  // namespace ice::synthetic
