#include "ice/backends/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "ice/core/error.hpp"
#include "ice/core/rng.hpp"

namespace ice::synthetic {

namespace {

constexpr double kMatchTolerance = 0.5 / 255.0;

Vector random_unit(std::uint64_t seed, int dim) {
  Rng rng(seed);
  Vector v(static_cast<std::size_t>(dim));
  for (double& x : v) x = rng.normal();
  return normalized(std::move(v));
}

std::uint64_t word_seed(std::string_view tag, std::string_view word, std::uint64_t base) {
  return fnv1a(std::string(tag) + ":" + std::string(word)) ^ (base * 0x9E3779B97F4A7C15ULL);
}

std::string_view axis_tag(Axis axis) {
  switch (axis) {
    case Axis::category: return "category";
    case Axis::colour: return "colour";
    case Axis::material: return "material";
  }
  return "category";
}

// Words that name an attribute axis; they lean toward that axis's direction.
int axis_name(const std::string& word) {
  if (word == "category" || word == "object") return 0;
  if (word == "colour" || word == "color") return 1;
  if (word == "material") return 2;
  return -1;
}

bool is_token_id(const std::string& s) {
  return s.size() > 2 && s.front() == '<' && s.back() == '>';
}

std::string clean_word(std::string w) {
  if (is_token_id(w)) return w;
  const auto punct = [](unsigned char c) { return std::ispunct(c) && c != '<' && c != '>' && c != '_'; };
  while (!w.empty() && punct(static_cast<unsigned char>(w.back()))) w.pop_back();
  std::size_t i = 0;
  while (i < w.size() && punct(static_cast<unsigned char>(w[i]))) ++i;
  w = w.substr(i);
  if (is_token_id(w)) return w;
  for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return w;
}

// Numerically stable pieces of the grouped softmax.
struct SoftmaxTerms {
  std::vector<std::vector<double>> q;  // q[s][w] = exp(z_sw) / Z
  std::vector<double> p;               // p[w] = Σ_s q[s][w]
};

SoftmaxTerms grouped_softmax(const std::vector<Vector>& words,
                             const std::vector<const Vector*>& tokens, double beta) {
  SoftmaxTerms out;
  out.p.assign(words.size(), 0.0);
  if (tokens.empty()) {
    for (double& x : out.p) x = 1.0 / static_cast<double>(words.size());
    return out;
  }
  double zmax = -std::numeric_limits<double>::infinity();
  out.q.assign(tokens.size(), std::vector<double>(words.size()));
  for (std::size_t s = 0; s < tokens.size(); ++s)
    for (std::size_t w = 0; w < words.size(); ++w) {
      out.q[s][w] = beta * dot(*tokens[s], words[w]);
      zmax = std::max(zmax, out.q[s][w]);
    }
  double z = 0.0;
  for (auto& row : out.q)
    for (double& x : row) {
      x = std::exp(x - zmax);
      z += x;
    }
  for (auto& row : out.q)
    for (std::size_t w = 0; w < words.size(); ++w) {
      row[w] /= z;
      out.p[w] += row[w];
    }
  return out;
}

// dL/dτ_s = β Σ_w q_sw (g_w − ḡ) E(w).
void grouped_softmax_backward(const SoftmaxTerms& terms, const std::vector<Vector>& words,
                              const std::vector<double>& g, double beta,
                              std::vector<Vector>& token_grads) {
  double gbar = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) gbar += terms.p[w] * g[w];
  for (std::size_t s = 0; s < terms.q.size(); ++s)
    for (std::size_t w = 0; w < words.size(); ++w)
      axpy(beta * terms.q[s][w] * (g[w] - gbar), words[w], token_grads[s]);
}

std::size_t argmax_lowest(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

SyntheticBackend::SyntheticBackend(SyntheticWorld world, SyntheticOptions options)
    : world_(std::move(world)),
      options_(std::move(options)),
      schedule_(NoiseSchedule::linear(options_.timesteps, options_.beta_start, options_.beta_end)),
      encoder_(*this) {
  world_.validate();
  require(options_.embedding_dim >= 2, "synthetic backend: embedding_dim must be >= 2");
  require(options_.attention_grid >= 1, "synthetic backend: attention_grid must be >= 1");
  require(options_.decode_beta > 0.0, "synthetic backend: decode_beta must be positive");
  require(options_.function_word_scale > 0.0, "synthetic backend: function_word_scale must be > 0");
  require(options_.attribute_scale >= 0.0, "synthetic backend: attribute_scale must be >= 0");
  require(options_.attention_floor >= 0.0 && options_.attention_floor < 1.0,
          "synthetic backend: attention_floor must lie in [0,1)");
  require(!options_.placeholder.empty() && !is_token_id(options_.placeholder),
          "synthetic backend: placeholder must be a plain word");
  world_image_ = world_.render();

  const int h = world_.height, w = world_.width, g = options_.attention_grid;
  const int side = std::max(4, std::min(h, w) * 3 / 8);
  for (std::size_t c = 0; c < categories().size(); ++c) {
    const Shape* shape = world_.find(categories()[c].name);
    BinaryMask region(h, w);
    if (shape) {
      region = shape->region;
    } else {
      const int y0 = (h - side) / 2, x0 = (w - side) / 2;
      for (int y = std::max(0, y0); y < std::min(h, y0 + side); ++y)
        for (int x = std::max(0, x0); x < std::min(w, x0 + side); ++x) region.set(y, x, true);
    }
    std::vector<double> field(static_cast<std::size_t>(h) * w, 0.0);
    std::vector<double> support(field.size(), 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (region.at(y, x)) {
          field[static_cast<std::size_t>(y) * w + x] =
              dark_texel(static_cast<int>(c), y, x) ? dark_factor : 1.0;
          support[static_cast<std::size_t>(y) * w + x] = 1.0;
        }
    const BinaryMask coarse = region.resampled(g, g);
    std::vector<double> cells(coarse.pixel_count());
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = coarse[i] ? 1.0 : 0.0;
    regions_.push_back(std::move(region));
    fields_.push_back(std::move(field));
    supports_.push_back(std::move(support));
    grid_regions_.push_back(std::move(cells));
  }

  for (Axis a : {Axis::category, Axis::colour, Axis::material}) {
    auto& dst = a == Axis::category ? words_.category
                : a == Axis::colour ? words_.colour
                                    : words_.material;
    for (const auto& word : axis_words(a)) dst.push_back(word_embedding(word));
  }
}

const std::vector<Vector>& SyntheticBackend::axis_embeddings(Axis axis) const {
  switch (axis) {
    case Axis::category: return words_.category;
    case Axis::colour: return words_.colour;
    case Axis::material: return words_.material;
  }
  return words_.category;
}

Vector SyntheticBackend::word_embedding(const std::string& word) const {
  require(!word.empty(), "word_embedding: empty word");
  if (is_token_id(word)) return token(word).as_vector();
  const int dim = options_.embedding_dim;
  const std::uint64_t base = options_.embedding_seed;
  const Vector own = random_unit(word_seed("word", word, base), dim);
  for (Axis a : {Axis::category, Axis::colour, Axis::material}) {
    if (word_index(a, word) >= 0) {
      Vector u = random_unit(word_seed("axis", axis_tag(a), base), dim);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = 0.8 * u[i] + own[i];
      return normalized(std::move(u));
    }
  }
  if (const int a = axis_name(word); a >= 0) {
    Vector u = random_unit(word_seed("axis", axis_tag(static_cast<Axis>(a)), base), dim);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.6 * own[i];
    return normalized(std::move(u));
  }
  Vector scaled = own;
  for (double& v : scaled) v *= options_.function_word_scale;
  return scaled;
}

bool SyntheticBackend::in_vocabulary(const std::string& word) const {
  return std::find(world_.vocabulary.begin(), world_.vocabulary.end(), word) !=
         world_.vocabulary.end();
}

void SyntheticBackend::register_token(const TokenEmbedding& token) {
  if (!is_token_id(token.token_id))
    fail(ErrorCode::contract_violation, "token ids must look like <name>: " + token.token_id);
  require(token.dim() == embedding_dim(), "token " + token.token_id + " has the wrong dimension");
  for (float v : token.values)
    require(std::isfinite(v), "token " + token.token_id + " has non-finite values");
  tokens_[token.token_id] = token;
}

void SyntheticBackend::set_token(const std::string& token_id, std::span<const float> values) {
  auto it = tokens_.find(token_id);
  if (it == tokens_.end()) fail(ErrorCode::unknown_token, "unregistered token " + token_id);
  require(values.size() == embedding_dim(), "set_token: dimension change for " + token_id);
  for (float v : values) require(std::isfinite(v), "set_token: non-finite value for " + token_id);
  it->second.values.assign(values.begin(), values.end());
}

const TokenEmbedding& SyntheticBackend::token(const std::string& token_id) const {
  auto it = tokens_.find(token_id);
  if (it == tokens_.end()) fail(ErrorCode::unknown_token, "unregistered token " + token_id);
  return it->second;
}

bool SyntheticBackend::has_token(const std::string& token_id) const {
  return tokens_.count(token_id) != 0;
}

std::vector<std::string> SyntheticBackend::token_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : tokens_) out.push_back(id);
  return out;
}

Conditioning SyntheticBackend::encode(const std::string& prompt) const {
  Conditioning c;
  c.prompt = prompt;
  std::istringstream in(prompt);
  std::string raw;
  while (in >> raw) {
    std::string word = clean_word(raw);
    if (word.empty() || word == "&") continue;
    EncodedToken t;
    t.learnable = is_token_id(word);
    t.embedding = word_embedding(word);
    t.text = std::move(word);
    c.tokens.push_back(std::move(t));
  }
  if (c.tokens.empty()) fail(ErrorCode::invalid_input, "prompt has no tokens: '" + prompt + "'");
  c.pooled.assign(embedding_dim(), 0.0);
  for (const auto& t : c.tokens) axpy(1.0 / static_cast<double>(c.tokens.size()), t.embedding, c.pooled);
  if (norm(c.pooled) > 0.0) c.pooled = normalized(std::move(c.pooled));
  return c;
}

std::vector<std::vector<const EncodedToken*>> SyntheticBackend::subject_groups(
    const Conditioning& c) const {
  std::vector<std::vector<const EncodedToken*>> groups(1);
  for (const auto& t : c.tokens) {
    if (t.text == "and") {
      if (!groups.back().empty()) groups.emplace_back();
      continue;
    }
    bool subject = t.learnable;
    for (Axis a : {Axis::category, Axis::colour, Axis::material})
      subject = subject || word_index(a, t.text) >= 0;
    if (subject) groups.back().push_back(&t);
  }
  if (groups.back().empty()) groups.pop_back();
  return groups;
}

std::vector<double> SyntheticBackend::soft_decode(Axis axis,
                                                  const std::vector<const Vector*>& tokens) const {
  return grouped_softmax(axis_embeddings(axis), tokens, options_.decode_beta).p;
}

Decoded SyntheticBackend::decode(const std::vector<const EncodedToken*>& group) const {
  std::vector<const Vector*> emb;
  for (const auto* t : group) emb.push_back(&t->embedding);
  return {soft_decode(Axis::category, emb), soft_decode(Axis::colour, emb),
          soft_decode(Axis::material, emb)};
}

int SyntheticBackend::latent_channels() const {
  return 3 + static_cast<int>(colours().size() + materials().size());
}

void SyntheticBackend::check_latent(const ImageTensor& x_t) const {
  if (x_t.height() != world_.height || x_t.width() != world_.width ||
      x_t.channels() != latent_channels())
    fail(ErrorCode::contract_violation, "synthetic backend expects a " +
                                            std::to_string(world_.height) + "x" +
                                            std::to_string(world_.width) + "x" +
                                            std::to_string(latent_channels()) + " latent");
}

void SyntheticBackend::check_pixels(const ImageTensor& x) const {
  if (x.height() != world_.height || x.width() != world_.width || x.channels() != 3)
    fail(ErrorCode::contract_violation, "synthetic backend expects a " +
                                            std::to_string(world_.height) + "x" +
                                            std::to_string(world_.width) + "x3 image");
}

bool classify_pixel(double r, double g, double b, PixelAttributes& out) {
  const double v = std::max({r, g, b});
  if (v <= kMatchTolerance) return false;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < colours().size(); ++k) {
    const auto& p = colours()[k].rgb;
    const double d = (r / v - p[0]) * (r / v - p[0]) + (g / v - p[1]) * (g / v - p[1]) +
                     (b / v - p[2]) * (b / v - p[2]);
    if (d < best) best = d, out.colour = static_cast<int>(k);
  }
  best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < materials().size(); ++m)
    for (bool dk : {false, true}) {
      const double d = std::abs(v - materials()[m].level * (dk ? dark_factor : 1.0));
      if (d < best) best = d, out.material = static_cast<int>(m), out.dark = dk;
    }
  return true;
}

ImageTensor SyntheticBackend::to_latent(const ImageTensor& pixels) const {
  check_pixels(pixels);
  const int L = latent_channels();
  const int nk = static_cast<int>(colours().size());
  ImageTensor out = ImageTensor::zeros(pixels.height(), pixels.width(), L, Space::latent);
  for (int y = 0; y < pixels.height(); ++y)
    for (int x = 0; x < pixels.width(); ++x) {
      const double r = pixels.at(y, x, 0), g = pixels.at(y, x, 1), b = pixels.at(y, x, 2);
      out.at(y, x, 0) = r;
      out.at(y, x, 1) = g;
      out.at(y, x, 2) = b;
      PixelAttributes a;
      if (!classify_pixel(r, g, b, a)) continue;
      out.at(y, x, 3 + a.colour) = options_.attribute_scale;
      out.at(y, x, 3 + nk + a.material) = options_.attribute_scale;
    }
  return out;
}

ImageTensor SyntheticBackend::render(const Conditioning& condition) const {
  const int h = world_.height, w = world_.width, L = latent_channels();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::size_t nk = colours().size();
  const double sa = options_.attribute_scale;
  std::vector<double> base(n * static_cast<std::size_t>(L), 0.0);
  for (const auto& group : subject_groups(condition)) {
    const Decoded d = decode(group);
    double level = 0.0;
    for (std::size_t m = 0; m < d.material.size(); ++m) level += d.material[m] * materials()[m].level;
    std::array<double, 3> rgb{};
    for (std::size_t k = 0; k < d.colour.size(); ++k)
      for (int ch = 0; ch < 3; ++ch) rgb[ch] += d.colour[k] * colours()[k].rgb[ch];
    for (std::size_t c = 0; c < d.category.size(); ++c) {
      const double pc = d.category[c];
      const auto& field = fields_[c];
      for (std::size_t i = 0; i < n; ++i) {
        if (field[i] == 0.0) continue;
        double* px = &base[i * L];
        const double f = pc * field[i] * level;
        for (int ch = 0; ch < 3; ++ch) px[ch] += f * rgb[ch];
        const double sp = pc * supports_[c][i] * sa;
        for (std::size_t k = 0; k < nk; ++k) px[3 + k] += sp * d.colour[k];
        for (std::size_t m = 0; m < d.material.size(); ++m) px[3 + nk + m] += sp * d.material[m];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < 3; ++ch) base[i * L + ch] = gain_[ch] * base[i * L + ch] + bias_[ch];
  return ImageTensor(h, w, L, Space::latent, std::move(base));
}

std::vector<double> SyntheticBackend::attention_field(const Vector& token) const {
  const std::vector<const Vector*> one = {&token};
  const auto p = soft_decode(Axis::category, one);
  std::vector<double> s(grid_regions_.front().size(), 0.0);
  for (std::size_t c = 0; c < p.size(); ++c)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += p[c] * grid_regions_[c][i];
  return s;
}

DenoisePrediction SyntheticBackend::predict_noise(const ImageTensor& x_t, int t,
                                                  const Conditioning& condition) const {
  check_latent(x_t);
  const double abar = schedule_.cumulative_alpha(t);
  const double a = std::sqrt(abar), s = std::sqrt(1.0 - abar);
  const ImageTensor r = render(condition);
  std::vector<double> eps(x_t.size());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (x_t.data()[i] - a * r.data()[i]) / s;

  DenoisePrediction out{ImageTensor(x_t.height(), x_t.width(), latent_channels(), Space::latent, std::move(eps)), {}};
  const int g = options_.attention_grid;
  const double cells = static_cast<double>(g) * g;
  const double floor = options_.attention_floor;
  for (const auto& group : subject_groups(condition))
    for (const auto* tok : group) {
      if (out.attention.count(tok->text)) continue;
      auto sfield = attention_field(tok->embedding);
      double total = 0.0;
      for (double v : sfield) total += v;
      for (double& v : sfield) v = total > 0.0 ? (1.0 - floor) * v / total + floor / cells : 1.0 / cells;
      out.attention.emplace(tok->text, AttentionMap(g, g, std::move(sfield)));
    }
  return out;
}

DenoiseGradient SyntheticBackend::predict_noise_vjp(const ImageTensor& x_t, int t,
                                                    const Conditioning& condition,
                                                    const DenoiseCotangent& cot) const {
  check_latent(x_t);
  const int h = world_.height, w = world_.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double beta = options_.decode_beta;
  DenoiseGradient out;
  out.parameters.assign(6, 0.0);

  const auto groups = subject_groups(condition);
  const auto add_token_grad = [&](const EncodedToken* tok, const Vector& grad) {
    if (!tok->learnable) return;
    auto [it, inserted] = out.tokens.try_emplace(tok->text, Vector(embedding_dim(), 0.0));
    axpy(1.0, grad, it->second);
  };

  if (!cot.noise_estimate.empty()) {
    const std::size_t L = static_cast<std::size_t>(latent_channels());
    const std::size_t nk = colours().size();
    const double sa = options_.attribute_scale;
    require(cot.noise_estimate.size() == n * L, "vjp: noise cotangent has the wrong size");
    const double abar = schedule_.cumulative_alpha(t);
    const double k = -std::sqrt(abar) / std::sqrt(1.0 - abar);
    std::vector<double> gr(n * L);  // dL/d(render)
    for (std::size_t i = 0; i < gr.size(); ++i) gr[i] = k * cot.noise_estimate[i];

    // Recompute the un-headed base image to get head gradients.
    std::vector<double> base(n * 3, 0.0);
    for (const auto& group : groups) {
      const Decoded d = decode(group);
      double level = 0.0;
      for (std::size_t m = 0; m < d.material.size(); ++m) level += d.material[m] * materials()[m].level;
      std::array<double, 3> rgb{};
      for (std::size_t kk = 0; kk < d.colour.size(); ++kk)
        for (int ch = 0; ch < 3; ++ch) rgb[ch] += d.colour[kk] * colours()[kk].rgb[ch];

      std::vector<double> shape(n, 0.0), support(n, 0.0);  // F(y,x), S(y,x)
      for (std::size_t c = 0; c < d.category.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) {
          shape[i] += d.category[c] * fields_[c][i];
          support[i] += d.category[c] * supports_[c][i];
        }

      // hg(i, ch) = dL/dr · gain; hr(i) = Σ_ch hg · rgb_ch; ha(i) = Σ_a gr(i, a) · p_a.
      std::vector<double> hr(n, 0.0), ha(n, 0.0);
      std::array<double, 3> fh{};  // Σ_i F · hg(i, ch)
      std::vector<double> g_col(d.colour.size(), 0.0), g_mat(d.material.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* gi = &gr[i * L];
        for (int ch = 0; ch < 3; ++ch) {
          const double hg = gi[ch] * gain_[ch];
          hr[i] += hg * rgb[ch];
          fh[ch] += shape[i] * hg;
          base[i * 3 + ch] += shape[i] * level * rgb[ch];
        }
        for (std::size_t kk = 0; kk < nk; ++kk) {
          ha[i] += gi[3 + kk] * d.colour[kk];
          g_col[kk] += sa * support[i] * gi[3 + kk];
        }
        for (std::size_t m = 0; m < g_mat.size(); ++m) {
          ha[i] += gi[3 + nk + m] * d.material[m];
          g_mat[m] += sa * support[i] * gi[3 + nk + m];
        }
      }

      std::vector<double> g_cat(d.category.size(), 0.0);
      for (std::size_t c = 0; c < g_cat.size(); ++c) {
        double acc = 0.0, acc_a = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += fields_[c][i] * hr[i];
          acc_a += supports_[c][i] * ha[i];
        }
        g_cat[c] = level * acc + sa * acc_a;
      }
      double fhr = 0.0;
      for (std::size_t i = 0; i < n; ++i) fhr += shape[i] * hr[i];
      for (std::size_t m = 0; m < g_mat.size(); ++m) g_mat[m] += materials()[m].level * fhr;
      for (std::size_t kk = 0; kk < g_col.size(); ++kk) {
        double acc = 0.0;
        for (int ch = 0; ch < 3; ++ch) acc += fh[ch] * colours()[kk].rgb[ch];
        g_col[kk] += level * acc;
      }

      std::vector<const Vector*> emb;
      for (const auto* tok : group) emb.push_back(&tok->embedding);
      std::vector<Vector> tg(group.size(), Vector(embedding_dim(), 0.0));
      grouped_softmax_backward(grouped_softmax(words_.category, emb, beta), words_.category, g_cat, beta, tg);
      grouped_softmax_backward(grouped_softmax(words_.colour, emb, beta), words_.colour, g_col, beta, tg);
      grouped_softmax_backward(grouped_softmax(words_.material, emb, beta), words_.material, g_mat, beta, tg);
      for (std::size_t s = 0; s < group.size(); ++s) add_token_grad(group[s], tg[s]);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (int ch = 0; ch < 3; ++ch) {
        out.parameters[static_cast<std::size_t>(ch)] += gr[i * L + ch] * base[i * 3 + ch];
        out.parameters[3 + static_cast<std::size_t>(ch)] += gr[i * L + ch];
      }
  }

  const double floor = options_.attention_floor;
  for (const auto& [text, ga] : cot.attention) {
    const EncodedToken* tok = nullptr;
    for (const auto& group : groups)
      for (const auto* cand : group)
        if (cand->text == text) tok = cand;
    if (!tok) fail(ErrorCode::unknown_token, "vjp: no attention map for " + text);
    const auto s = attention_field(tok->embedding);
    require(ga.size() == s.size(), "vjp: attention cotangent has the wrong size");
    double total = 0.0, gs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      total += s[i];
      gs += ga[i] * s[i];
    }
    if (!(total > 0.0)) continue;  // uniform fallback has no dependence on the token
    std::vector<double> g_cat(grid_regions_.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double ds = (1.0 - floor) * (ga[i] - gs / total) / total;
      for (std::size_t c = 0; c < g_cat.size(); ++c) g_cat[c] += ds * grid_regions_[c][i];
    }
    const std::vector<const Vector*> one = {&tok->embedding};
    std::vector<Vector> tg(1, Vector(embedding_dim(), 0.0));
    grouped_softmax_backward(grouped_softmax(words_.category, one, beta), words_.category, g_cat, beta, tg);
    add_token_grad(tok, tg[0]);
  }
  return out;
}

std::pair<int, int> SyntheticBackend::jitter(std::uint64_t seed) {
  const int idx = static_cast<int>(seed % 25);
  return {(idx / 5 + 2) % 5 - 2, (idx % 5 + 2) % 5 - 2};
}

ImageTensor SyntheticBackend::generate(const Conditioning& condition, std::uint64_t seed) const {
  const int h = world_.height, w = world_.width;
  const auto [dy, dx] = jitter(seed);
  std::vector<double> base(static_cast<std::size_t>(h) * w * 3, 0.0);
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(h) * w, 0);
  for (const auto& group : subject_groups(condition)) {
    const Decoded d = decode(group);
    const int c = static_cast<int>(argmax_lowest(d.category));
    const int k = static_cast<int>(argmax_lowest(d.colour));
    const int m = static_cast<int>(argmax_lowest(d.material));
    const BinaryMask region = regions_[static_cast<std::size_t>(c)].shifted(dy, dx);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!region.at(y, x)) continue;
        const auto v = texel(c, k, m, y, x);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        covered[i] = 1;
        for (int ch = 0; ch < 3; ++ch) base[i * 3 + ch] += v[ch];
      }
  }
  for (std::size_t i = 0; i < covered.size(); ++i)
    for (int ch = 0; ch < 3; ++ch) {
      const double v = gain_[ch] * base[i * 3 + ch] + bias_[ch];
      base[i * 3 + ch] = covered[i] ? std::clamp(v, 0.0, 1.0) : 0.0;
    }
  return ImageTensor(h, w, 3, Space::pixel, std::move(base));
}

std::vector<double> SyntheticBackend::trainable_parameters() const {
  return {gain_[0], gain_[1], gain_[2], bias_[0], bias_[1], bias_[2]};
}

void SyntheticBackend::set_trainable_parameters(std::span<const double> values) {
  require(values.size() == 6, "synthetic backend has 6 trainable parameters");
  for (double v : values) require(std::isfinite(v), "trainable parameters must be finite");
  for (int ch = 0; ch < 3; ++ch) {
    gain_[ch] = values[static_cast<std::size_t>(ch)];
    bias_[ch] = values[3 + static_cast<std::size_t>(ch)];
  }
}

std::vector<TextConcept> SyntheticBackend::retrieve_concepts(const ImageTensor& x, int k) const {
  require(k >= 1, "retrieve_concepts: k must be >= 1");
  check_pixels(x);
  std::vector<TextConcept> found;
  const double total = static_cast<double>(x.pixel_count());
  for (const auto& shape : world_.shapes) {
    const auto visible = segment(x, TextConcept{shape.category, 0.0});
    const std::size_t n = visible.count();
    if (n >= 1) found.push_back({shape.category, static_cast<double>(n) / total});
  }
  std::sort(found.begin(), found.end(), [](const TextConcept& a, const TextConcept& b) {
    return a.score != b.score ? a.score > b.score : a.label < b.label;
  });
  if (found.size() > static_cast<std::size_t>(k)) found.resize(static_cast<std::size_t>(k));
  return found;
}

BinaryMask SyntheticBackend::segment(const ImageTensor& x, const TextConcept& c) const {
  check_pixels(x);
  if (!in_vocabulary(c.label))
    fail(ErrorCode::unknown_concept, "segmentor does not know concept '" + c.label + "'");
  BinaryMask out(x.height(), x.width());
  const Shape* shape = world_.find(c.label);
  if (!shape) return out;
  for (int y = 0; y < x.height(); ++y)
    for (int xx = 0; xx < x.width(); ++xx) {
      if (!shape->region.at(y, xx)) continue;
      bool match = true;
      for (int ch = 0; ch < 3; ++ch)
        match = match && std::abs(x.at(y, xx, ch) - world_image_.at(y, xx, ch)) <= kMatchTolerance;
      if (match) out.set(y, xx, true);
    }
  return out;
}

Vector SyntheticEncoder::embed_image(const ImageTensor& image) const {
  require(image.channels() == 3, "synthetic encoder expects RGB images");
  const std::size_t nc = categories().size(), nk = colours().size(), nm = materials().size();
  std::vector<double> agree(nc, 0.0), col(nk, 0.0), mat(nm, 0.0);
  std::size_t fg = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      PixelAttributes a;
      if (!classify_pixel(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2), a)) continue;
      ++fg;
      col[static_cast<std::size_t>(a.colour)] += 1.0;
      mat[static_cast<std::size_t>(a.material)] += 1.0;
      const bool dark = a.dark;
      for (std::size_t c = 0; c < nc; ++c)
        if (dark_texel(static_cast<int>(c), y, x) == dark) agree[c] += 1.0;
    }
  Vector out;
  if (fg == 0) {
    for (std::size_t i = 0; i < nc; ++i) out.push_back(1.0 / nc);
    for (std::size_t i = 0; i < nk; ++i) out.push_back(1.0 / nk);
    for (std::size_t i = 0; i < nm; ++i) out.push_back(1.0 / nm);
    return out;
  }
  double zmax = 0.0, z = 0.0;
  for (double& a : agree) zmax = std::max(zmax, a /= static_cast<double>(fg));
  std::vector<double> cat(nc);
  for (std::size_t c = 0; c < nc; ++c) z += cat[c] = std::exp(20.0 * (agree[c] - zmax));
  for (double p : cat) out.push_back(p / z);
  for (double k : col) out.push_back(k / static_cast<double>(fg));
  for (double m : mat) out.push_back(m / static_cast<double>(fg));
  return out;
}

Vector SyntheticEncoder::embed_text(const std::string& text) const {
  const Conditioning c = backend_.encode(text);
  std::vector<const Vector*> emb;
  for (const auto& group : backend_.subject_groups(c))
    for (const auto* t : group) emb.push_back(&t->embedding);
  Vector out;
  for (Axis a : {Axis::category, Axis::colour, Axis::material}) {
    const auto p = backend_.soft_decode(a, emb);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace ice::synthetic
