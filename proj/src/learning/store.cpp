#include "ice/learning/store.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "ice/core/checksum.hpp"
#include "ice/core/error.hpp"
#include "ice/core/io.hpp"
#include "json.hpp"

namespace ice {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "embedding store assumes a little-endian host");

namespace {

std::vector<const TokenEmbedding*> rows_of(const RunState& s) {
  std::vector<const TokenEmbedding*> rows;
  for (const auto& c : s.concepts) {
    rows.push_back(&c.conspec);
    rows.push_back(&c.inspec);
    for (const auto& it : c.intrinsics) rows.push_back(&it.embedding);
  }
  return rows;
}

std::string file_sha(const fs::path& p) {
  const auto bytes = io::read_bytes(p);
  return sha256_hex(std::span<const std::uint8_t>(bytes));
}

std::vector<LossRow> parse_losses(const std::string& csv) {
  std::vector<LossRow> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "step,phase,concept_id,recon,att,triplet,prior,total")
    fail(ErrorCode::schema_violation, "losses.csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) fail(ErrorCode::schema_violation, "losses.csv: malformed row");
    LossRow r;
    try {
      r.step = std::stoi(f[0]);
      r.phase = phase_from_string(f[1]);
      r.concept_id = f[2];
      r.loss = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    } catch (const std::logic_error&) {
      fail(ErrorCode::schema_violation, "losses.csv: malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void export_concepts(const fs::path& dir, const StoredRun& run) {
  const RunState& s = run.state;
  fs::create_directories(dir);

  const auto rows = rows_of(s);
  std::vector<std::uint8_t> blob;
  json row_ids = json::array();
  for (const auto* r : rows) {
    require(r->dim() == run.embedding_dim, "export: token " + r->token_id + " has the wrong dimension");
    row_ids.push_back(r->token_id);
    const auto* p = reinterpret_cast<const std::uint8_t*>(r->values.data());
    blob.insert(blob.end(), p, p + r->values.size() * sizeof(float));
  }
  io::write_bytes(dir / "embeddings.bin", blob);
  io::write_text(dir / "losses.csv", loss_csv(s.loss_history));
  io::write_png(dir / "image.png", s.image);

  json checksums = json::object();
  checksums["embeddings.bin"] = sha256_hex(std::span<const std::uint8_t>(blob));
  checksums["losses.csv"] = file_sha(dir / "losses.csv");
  checksums["image.png"] = file_sha(dir / "image.png");

  for (const auto& f : run.attachments) {
    require(fs::exists(dir / f), "export: attachment " + f + " is not in the store directory");
    checksums[f] = file_sha(dir / f);
  }

  json concepts = json::array();
  for (std::size_t i = 0; i < s.concepts.size(); ++i) {
    const auto& c = s.concepts[i];
    const std::string mask = "mask_" + std::to_string(i) + ".png";
    io::write_mask_png(dir / mask, c.record.mask);
    checksums[mask] = file_sha(dir / mask);
    json intr = json::object();
    for (const auto& it : c.intrinsics) intr[it.axis.name] = it.embedding.token_id;
    concepts.push_back({{"index", i},
                        {"label", c.record.text_concept.label},
                        {"score", c.record.text_concept.score},
                        {"order", c.record.order},
                        {"coverage", c.record.coverage},
                        {"init_word", c.init_word},
                        {"mask", mask},
                        {"conspec", c.conspec.token_id},
                        {"inspec", c.inspec.token_id},
                        {"intrinsics", intr}});
  }
  json axes = json::array();
  for (const auto& a : s.axes) axes.push_back(a.name);
  json gamma2 = json::array();
  for (const auto& [pair, v] : s.margins.gamma_phase2)
    gamma2.push_back({{"j", pair.first}, {"k", pair.second}, {"value", v}});

  json doc = {
      {"format", "ice-concepts"},
      {"version", store_version},
      {"backend", run.backend},
      {"embedding_dim", run.embedding_dim},
      {"config_sha256", run.config_sha256},
      {"phase", to_string(s.phase)},
      {"axes", axes},
      {"schedule",
       {{"phase1_steps", run.schedule.phase1_steps},
        {"phase2_steps", run.schedule.phase2_steps},
        {"refine_steps", run.schedule.refine_steps},
        {"learning_rate_tokens", run.schedule.learning_rate_tokens},
        {"learning_rate_refine", run.schedule.learning_rate_refine},
        {"seed", run.schedule.seed}}},
      {"weights",
       {{"lambda_att", s.margins.lambda_att},
        {"lambda_triplet", s.margins.lambda_triplet},
        {"gamma_phase1", s.margins.gamma_phase1},
        {"gamma_phase2", gamma2}}},
      {"template_bank_sha256", TemplateBank::standard().sha256()},
      {"prior_seeds", s.prior_seeds},
      {"head_parameters", s.head_parameters},
      {"notes", s.notes},
      {"concepts", concepts},
      {"embedding_rows", row_ids},
      {"loss_history", "losses.csv"},
      {"image", "image.png"},
      {"attachments", run.attachments},
      {"checksums", checksums},
  };
  doc["manifest_sha256"] = sha256_hex(doc.dump());
  io::write_text(dir / "concepts_manifest.json", doc.dump(2) + "\n");
}

StoredRun import_concepts(const fs::path& dir) {
  json doc;
  try {
    doc = json::parse(io::read_text(dir / "concepts_manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, "concepts_manifest.json: " + std::string(e.what()));
  }
  StoredRun run;
  try {
    if (doc.at("format").get<std::string>() != "ice-concepts")
      fail(ErrorCode::schema_violation, "not a concept store");
    if (doc.at("version").get<int>() != store_version)
      fail(ErrorCode::version_mismatch, "concept store version " +
                                            std::to_string(doc.at("version").get<int>()) +
                                            " is not supported");
    json body = doc;
    const std::string claimed = body.at("manifest_sha256").get<std::string>();
    body.erase("manifest_sha256");
    if (sha256_hex(body.dump()) != claimed)
      fail(ErrorCode::checksum_mismatch, "concepts_manifest.json: manifest checksum mismatch");
    for (const auto& [name, sha] : doc.at("checksums").items())
      if (file_sha(dir / name) != sha.get<std::string>())
        fail(ErrorCode::checksum_mismatch, name + ": checksum mismatch");

    run.backend = doc.at("backend").get<std::string>();
    run.embedding_dim = doc.at("embedding_dim").get<std::size_t>();
    run.config_sha256 = doc.at("config_sha256").get<std::string>();
    run.attachments = doc.at("attachments").get<std::vector<std::string>>();
    const auto& sc = doc.at("schedule");
    run.schedule.phase1_steps = sc.at("phase1_steps").get<int>();
    run.schedule.phase2_steps = sc.at("phase2_steps").get<int>();
    run.schedule.refine_steps = sc.at("refine_steps").get<int>();
    run.schedule.learning_rate_tokens = sc.at("learning_rate_tokens").get<double>();
    run.schedule.learning_rate_refine = sc.at("learning_rate_refine").get<double>();
    run.schedule.seed = sc.at("seed").get<std::uint64_t>();

    RunState& s = run.state;
    s.phase = phase_from_string(doc.at("phase").get<std::string>());
    for (const auto& a : doc.at("axes")) s.axes.push_back({a.get<std::string>()});
    const auto& wj = doc.at("weights");
    s.margins.lambda_att = wj.at("lambda_att").get<double>();
    s.margins.lambda_triplet = wj.at("lambda_triplet").get<double>();
    s.margins.gamma_phase1 = wj.at("gamma_phase1").get<double>();
    for (const auto& g : wj.at("gamma_phase2"))
      s.margins.gamma_phase2[{g.at("j").get<std::string>(), g.at("k").get<std::string>()}] =
          g.at("value").get<double>();
    s.margins.validate();
    if (doc.at("template_bank_sha256").get<std::string>() != TemplateBank::standard().sha256())
      fail(ErrorCode::version_mismatch, "concept store was trained with a different template bank");
    s.prior_seeds = doc.at("prior_seeds").get<std::vector<std::uint64_t>>();
    s.head_parameters = doc.at("head_parameters").get<std::vector<double>>();
    s.notes = doc.at("notes").get<std::vector<std::string>>();
    s.image = io::read_png(dir / doc.at("image").get<std::string>());
    s.loss_history = parse_losses(io::read_text(dir / doc.at("loss_history").get<std::string>()));

    const auto blob = io::read_bytes(dir / "embeddings.bin");
    const auto ids = doc.at("embedding_rows").get<std::vector<std::string>>();
    const std::size_t row_bytes = run.embedding_dim * sizeof(float);
    if (blob.size() != ids.size() * row_bytes)
      fail(ErrorCode::schema_violation, "embeddings.bin: size does not match the manifest");
    std::map<std::string, std::vector<float>> table;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      std::vector<float> v(run.embedding_dim);
      std::memcpy(v.data(), blob.data() + r * row_bytes, row_bytes);
      table[ids[r]] = std::move(v);
    }
    const auto take = [&](const std::string& id) {
      auto it = table.find(id);
      if (it == table.end()) fail(ErrorCode::schema_violation, "embeddings.bin: no row for " + id);
      return TokenEmbedding{id, it->second};
    };
    for (const auto& cj : doc.at("concepts")) {
      LearnedConcept c;
      c.record.text_concept = {cj.at("label").get<std::string>(), cj.at("score").get<double>()};
      c.record.order = cj.at("order").get<int>();
      c.record.coverage = cj.at("coverage").get<double>();
      c.record.mask = io::read_mask_png(dir / cj.at("mask").get<std::string>());
      c.init_word = cj.at("init_word").get<std::string>();
      c.conspec = take(cj.at("conspec").get<std::string>());
      c.inspec = take(cj.at("inspec").get<std::string>());
      for (const auto& a : s.axes)
        c.intrinsics.push_back({a, take(cj.at("intrinsics").at(a.name).get<std::string>())});
      s.concepts.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::schema_violation, "concepts_manifest.json: " + std::string(e.what()));
  }
  return run;
}

}  // namespace ice
