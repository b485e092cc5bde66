#include "ice/evaluation/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "ice/core/checksum.hpp"
#include "ice/core/io.hpp"

namespace ice {

using json = nlohmann::ordered_json;

namespace {

json scores(const PairScore& s) { return {{"iou", s.iou}, {"recall", s.recall}, {"precision", s.precision}}; }

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
    return;
  }
  std::string v;
  if (j.is_string()) {
    v = j.get<std::string>();
  } else if (j.is_number_float()) {
    std::ostringstream s;
    s << std::setprecision(17) << j.get<double>();
    v = s.str();
  } else if (!j.is_null()) {
    v = j.dump();
  }
  if (v.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    v = q + "\"";
  }
  out.emplace_back(prefix, v);
}

}  // namespace

Report mask_report(const std::string& image, const MatchReport& r) {
  Report out;
  out.kind = "masks";
  out.protocol = {{"similarity", "iou"}, {"matching", "hungarian, lowest-index ties"},
                  {"aggregate", "mean over matched pairs; unmatched counted, excluded"}};
  json pairs = json::array();
  for (std::size_t i = 0; i < r.assignment.size(); ++i) {
    json p = {{"pred", r.assignment[i].first}, {"gt", r.assignment[i].second}};
    p.update(scores(r.per_pair[i]));
    pairs.push_back(p);
  }
  out.per_image.push_back({{"image", image},
                           {"pairs", pairs},
                           {"unmatched_pred", r.unmatched_pred},
                           {"unmatched_gt", r.unmatched_gt}});
  out.aggregate = {{"mIoU", r.aggregate.iou},
                   {"recall", r.aggregate.recall},
                   {"precision", r.aggregate.precision},
                   {"unmatched_pred", r.unmatched_pred},
                   {"unmatched_gt", r.unmatched_gt}};
  return out;
}

Report uce_report(const std::string& image, const SimilarityReport& r, const UceProtocol& protocol) {
  Report out;
  out.kind = "uce";
  out.encoder_id = r.encoder_id;
  out.protocol = {{"images_per_concept", protocol.images_per_concept},
                  {"seeds", "0.." + std::to_string(protocol.images_per_concept - 1)},
                  {"prompt_template", protocol.prompt_template},
                  {"concept_filler", "<intrinsic_1> & ... & <intrinsic_J> & <conspec>"},
                  {"composition_joiner", protocol.composition_joiner},
                  {"ground_truth", "image masked to the concept region"},
                  {"similarity_mode", to_string(r.mode)}};
  json concepts = json::array();
  for (const auto& c : r.per_concept)
    concepts.push_back({{"label", c.label}, {"prompt", c.prompt}, {"sim_identity", c.sim_identity}});
  out.per_image.push_back({{"image", image}, {"composition_prompt", r.composition_prompt}, {"concepts", concepts}});
  out.aggregate = {{"sim_identity", r.sim_identity},
                   {"sim_composition", r.sim_composition},
                   {"acc_top1", r.acc_top1},
                   {"acc_top3", r.acc_top3 ? json(*r.acc_top3) : json(nullptr)}};
  return out;
}

Report icbench_report(const std::string& image, const IcbenchReport& r, const std::string& encoder_id) {
  Report out;
  out.kind = "icbench";
  out.encoder_id = encoder_id;
  out.protocol = {{"sim_tt", "description vs \"" + icbench_prompt("<token>") + "\""},
                  {"sim_tv", "description vs images generated from that prompt"},
                  {"images", icbench_images},
                  {"seeds", "0.." + std::to_string(icbench_images - 1)},
                  {"similarity_mode", to_string(r.mode)}};
  json rows = json::array();
  for (const auto& s : r.per_concept)
    rows.push_back({{"label", s.label}, {"axis", s.axis}, {"token", s.token_id},
                    {"sim_tt", s.sim_tt}, {"sim_tv", s.sim_tv}});
  out.per_image.push_back({{"image", image}, {"scores", rows}});
  for (const auto& [axis, v] : r.per_axis) out.aggregate[axis] = {{"sim_tt", v.first}, {"sim_tv", v.second}};
  return out;
}

Report pixel_report(const std::string& image, const PixelMetrics& m, bool aligned) {
  Report out;
  out.kind = "pixels";
  out.protocol = {{"label_alignment", aligned ? "hungarian on pixel overlap" : "none"},
                  {"miou_classes", "labels present in either grid"}};
  json iou = json::object();
  for (const auto& [label, v] : m.class_iou) iou[std::to_string(label)] = v;
  out.per_image.push_back({{"image", image}, {"acc", m.acc}, {"miou", m.miou}, {"class_iou", iou}});
  out.aggregate = {{"acc", m.acc}, {"miou", m.miou}};
  return out;
}

std::string report_csv(const Report& r) {
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  for (const auto& img : r.per_image) {
    rows.emplace_back();
    rows.back().emplace_back("scope", "per_image");
    flatten(img, "", rows.back());
  }
  rows.emplace_back();
  rows.back().emplace_back("scope", "aggregate");
  flatten(r.aggregate, "", rows.back());

  std::vector<std::string> columns;
  for (const auto& row : rows)
    for (const auto& [k, v] : row)
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out << ',';
      for (const auto& [k, v] : row)
        if (k == columns[i]) {
          out << v;
          break;
        }
    }
    out << '\n';
  }
  return out.str();
}

void write_report(const std::filesystem::path& dir, const std::string& stem, const Report& r,
                  const std::string& config_sha256, const std::vector<std::string>& extra_files) {
  std::filesystem::create_directories(dir);
  const std::string csv = report_csv(r);
  io::write_text(dir / (stem + ".csv"), csv);
  json doc = {{"kind", r.kind},
              {"protocol", r.protocol},
              {"encoder_id", r.encoder_id},
              {"per_image", r.per_image},
              {"aggregate", r.aggregate},
              {"config_sha256", config_sha256},
              {"files", {{stem + ".csv", sha256_hex(csv)}}}};
  for (const auto& f : extra_files)
    doc["files"][f] = sha256_hex(std::span<const std::uint8_t>(io::read_bytes(dir / f)));
  doc["content_sha256"] = sha256_hex(doc.dump());
  io::write_text(dir / (stem + ".json"), doc.dump(2) + "\n");
}

}  // namespace ice
