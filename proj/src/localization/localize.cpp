#include "ice/localization/localize.hpp"

#include <algorithm>
#include <cmath>

#include "ice/core/checksum.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "json.hpp"

namespace ice {

using json = nlohmann::ordered_json;

void LocalizationConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorCode::schema_violation, "localization.tau must be in (0,1)");
  if (max_iterations < 1) fail(ErrorCode::schema_violation, "localization.max_iterations must be >= 1");
  if (!(min_mask_coverage >= 0.0 && min_mask_coverage <= 1.0))
    fail(ErrorCode::schema_violation, "localization.min_mask_coverage must be in [0,1]");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::below_threshold: return "below_threshold";
    case Termination::max_iterations: return "max_iterations";
    case Termination::empty_retrieval: return "empty_retrieval";
    case Termination::degenerate_mask: return "degenerate_mask";
  }
  return "below_threshold";
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::below_threshold, Termination::max_iterations,
                 Termination::empty_retrieval, Termination::degenerate_mask})
    if (to_string(t) == s) return t;
  fail(ErrorCode::schema_violation, "unknown termination '" + std::string(s) + "'");
}

double pixel_proportion(const ImageTensor& x, const BinaryMask& masked_so_far) {
  require(masked_so_far.height() == x.height() && masked_so_far.width() == x.width(),
          "pixel_proportion: mask and image dimensions differ");
  if (x.pixel_count() == 0) return 0.0;
  return 1.0 - static_cast<double>(masked_so_far.count()) / static_cast<double>(x.pixel_count());
}

LocalizationResult localize(const ImageTensor& x, const Retriever& retriever,
                            const Segmentor& segmentor, const LocalizationConfig& cfg) {
  cfg.validate();
  if (x.space() != Space::pixel) fail(ErrorCode::invalid_input, "localize expects a pixel-space image");

  LocalizationResult out;
  ImageTensor current = x;
  BinaryMask masked(x.height(), x.width());
  out.final_proportion = pixel_proportion(x, masked);

  for (int iter = 0;; ++iter) {
    if (out.final_proportion <= cfg.tau) {
      out.termination = Termination::below_threshold;
      break;
    }
    if (iter == cfg.max_iterations) {
      out.termination = Termination::max_iterations;
      break;
    }
    std::vector<TextConcept> top;
    BinaryMask m;
    try {
      top = retriever.retrieve_concepts(current, 1);
      if (!top.empty()) m = segmentor.segment(current, top.front());
    } catch (const Error& e) {
      throw Error(e.code(), "localize iteration " + std::to_string(iter) + ": " + e.what());
    }
    if (top.empty()) {
      out.termination = Termination::empty_retrieval;
      break;
    }
    if (m.height() != x.height() || m.width() != x.width())
      fail(ErrorCode::contract_violation, "localize iteration " + std::to_string(iter) +
                                              ": segmentor returned a mask of the wrong size");
    m = m.minus(masked);
    if (mask_coverage(m) < cfg.min_mask_coverage || m.empty()) {
      out.termination = Termination::degenerate_mask;
      break;
    }
    ConceptRecord rec;
    rec.text_concept = top.front();
    rec.mask = m;
    rec.order = iter;
    rec.coverage = mask_coverage(m);
    out.records.push_back(std::move(rec));
    current = apply_mask(current, m);
    masked = masked | m;
    out.final_proportion = pixel_proportion(x, masked);
  }
  return out;
}

void write_localization(const std::filesystem::path& dir, const LocalizationResult& result,
                        const std::string& source_image, const ImageTensor& image,
                        const ManifestProvenance& provenance) {
  if (image.space() != Space::pixel) fail(ErrorCode::invalid_input, "manifest image must be in pixel space");
  std::filesystem::create_directories(dir);
  json checksums = json::object();
  io::write_png(dir / "image.png", image);
  checksums["image.png"] = sha256_hex(std::span<const std::uint8_t>(io::read_bytes(dir / "image.png")));
  json records = json::array();
  for (const auto& r : result.records) {
    if (r.mask.height() != image.height() || r.mask.width() != image.width())
      fail(ErrorCode::invalid_input, "record mask and image sizes differ");
    const std::string name = "mask_" + std::to_string(r.order) + ".png";
    io::write_mask_png(dir / name, r.mask);
    checksums[name] = sha256_hex(std::span<const std::uint8_t>(io::read_bytes(dir / name)));
    records.push_back({{"order", r.order},
                       {"label", r.text_concept.label},
                       {"score", r.text_concept.score},
                       {"coverage", r.coverage},
                       {"mask", name},
                       {"termination", to_string(result.termination)}});
  }
  for (const auto& f : provenance.extra_files)
    checksums[f] = sha256_hex(std::span<const std::uint8_t>(io::read_bytes(dir / f)));
  json doc = {{"version", 1},
              {"source_image", source_image},
              {"image", "image.png"},
              {"height", image.height()},
              {"width", image.width()},
              {"termination", to_string(result.termination)},
              {"final_proportion", result.final_proportion},
              {"records", records},
              {"config_sha256", provenance.config_sha256},
              {"checksums", checksums}};
  doc["content_sha256"] = sha256_hex(doc.dump());
  io::write_text(dir / "concepts.json", doc.dump(2) + "\n");
}

LocalizationManifest read_localization(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / "concepts.json" : dir;
  const auto base = path.parent_path();
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, path.string() + ": " + e.what());
  }
  LocalizationManifest out;
  out.dir = base;
  try {
    if (doc.at("version").get<int>() != 1)
      fail(ErrorCode::version_mismatch, path.string() + ": unsupported manifest version");
    json body = doc;
    const std::string claimed = body.at("content_sha256").get<std::string>();
    body.erase("content_sha256");
    if (sha256_hex(body.dump()) != claimed)
      fail(ErrorCode::checksum_mismatch, path.string() + ": content checksum mismatch");
    for (const auto& [name, sha] : doc.at("checksums").items())
      if (sha256_hex(std::span<const std::uint8_t>(io::read_bytes(base / name))) != sha.get<std::string>())
        fail(ErrorCode::checksum_mismatch, (base / name).string() + ": checksum mismatch");
    out.source_image = doc.at("source_image").get<std::string>();
    out.config_sha256 = doc.at("config_sha256").get<std::string>();
    out.height = doc.at("height").get<int>();
    out.width = doc.at("width").get<int>();
    out.image = io::read_png(base / doc.at("image").get<std::string>());
    out.result.termination = termination_from_string(doc.at("termination").get<std::string>());
    out.result.final_proportion = doc.at("final_proportion").get<double>();
    for (const auto& r : doc.at("records")) {
      ConceptRecord rec;
      rec.order = r.at("order").get<int>();
      rec.text_concept.label = r.at("label").get<std::string>();
      rec.text_concept.score = r.at("score").get<double>();
      rec.coverage = r.at("coverage").get<double>();
      rec.mask = io::read_mask_png(base / r.at("mask").get<std::string>());
      out.result.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace ice
