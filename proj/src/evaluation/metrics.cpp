#include "ice/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ice/core/error.hpp"
#include "ice/core/vec.hpp"

namespace ice {

namespace {

// Minimum-cost assignment for rows ≤ cols (potentials method). Returns the
// column of each row.
std::vector<int> min_cost_rows(const Matrix& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

// Best total similarity of a size-min(rows, cols) matching over the given
// subsets.
double best_total(const Matrix& sim, const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool flip = rows.size() > cols.size();
  const auto& r = flip ? cols : rows;
  const auto& c = flip ? rows : cols;
  Matrix cost(r.size(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      cost[i][j] = -(flip ? sim[static_cast<std::size_t>(c[j])][static_cast<std::size_t>(r[i])]
                          : sim[static_cast<std::size_t>(r[i])][static_cast<std::size_t>(c[j])]);
  const auto col = min_cost_rows(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) total -= cost[i][static_cast<std::size_t>(col[i])];
  return total;
}

std::vector<int> without(const std::vector<int>& v, int x) {
  std::vector<int> out;
  for (int e : v)
    if (e != x) out.push_back(e);
  return out;
}

}  // namespace

Assignment hungarian_match(const Matrix& similarity) {
  const int n = static_cast<int>(similarity.size());
  const int m = n == 0 ? 0 : static_cast<int>(similarity[0].size());
  for (const auto& row : similarity) {
    require(static_cast<int>(row.size()) == m, "hungarian_match: ragged matrix");
    for (double x : row) require(std::isfinite(x), "hungarian_match: non-finite entry");
  }
  Assignment out;
  if (n == 0 || m == 0) return out;

  std::vector<int> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < m; ++j) cols[static_cast<std::size_t>(j)] = j;
  const double optimum = best_total(similarity, rows, cols);
  const double tol = 1e-12 * std::max(1.0, std::abs(optimum));

  // Fix rows in order, each to the lowest column that keeps the optimum
  // reachable; a row is left unmatched only when no column does.
  std::size_t needed = static_cast<std::size_t>(std::min(n, m));
  double fixed = 0.0;
  for (int i = 0; i < n && needed > 0; ++i) {
    const auto rest_rows = without(rows, i);
    bool placed = false;
    for (int j : cols) {
      const auto rest_cols = without(cols, j);
      if (std::min(rest_rows.size(), rest_cols.size()) < needed - 1) continue;
      const double s = similarity[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (fixed + s + best_total(similarity, rest_rows, rest_cols) >= optimum - tol) {
        out.pairs.emplace_back(i, j);
        fixed += s;
        cols = rest_cols;
        --needed;
        placed = true;
        break;
      }
    }
    rows = rest_rows;
    (void)placed;
  }
  out.total = fixed;
  return out;
}

MatchReport evaluate_masks(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt) {
  if (gt.empty()) fail(ErrorCode::invalid_input, "evaluate_masks: ground-truth set is empty");
  for (const auto& m : pred)
    if (!m.same_shape(gt.front()))
      fail(ErrorCode::invalid_input, "evaluate_masks: mask dimensions differ");
  for (const auto& m : gt)
    if (!m.same_shape(gt.front()))
      fail(ErrorCode::invalid_input, "evaluate_masks: mask dimensions differ");

  Matrix iou(pred.size(), std::vector<double>(gt.size()));
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) iou[i][j] = mask_iou(pred[i], gt[j]);

  MatchReport r;
  r.assignment = hungarian_match(iou).pairs;
  for (const auto& [i, j] : r.assignment) {
    const auto& p = pred[static_cast<std::size_t>(i)];
    const auto& g = gt[static_cast<std::size_t>(j)];
    const auto s = mask_intersection_union(p, g);
    const auto inter = static_cast<double>(s.intersection);
    PairScore ps;
    ps.iou = s.union_count == 0 ? 0.0 : inter / static_cast<double>(s.union_count);
    ps.recall = g.count() == 0 ? 0.0 : inter / static_cast<double>(g.count());
    ps.precision = p.count() == 0 ? 0.0 : inter / static_cast<double>(p.count());
    r.per_pair.push_back(ps);
  }
  if (!r.per_pair.empty()) {
    for (const auto& ps : r.per_pair) {
      r.aggregate.iou += ps.iou;
      r.aggregate.recall += ps.recall;
      r.aggregate.precision += ps.precision;
    }
    const auto k = static_cast<double>(r.per_pair.size());
    r.aggregate.iou /= k;
    r.aggregate.recall /= k;
    r.aggregate.precision /= k;
  }
  r.unmatched_pred = static_cast<int>(pred.size() - r.assignment.size());
  r.unmatched_gt = static_cast<int>(gt.size() - r.assignment.size());
  return r;
}

std::string_view to_string(SimilarityMode m) {
  return m == SimilarityMode::raw_cosine ? "raw_cosine" : "affine";
}

SimilarityMode similarity_mode_from_string(std::string_view s) {
  if (s == "raw_cosine") return SimilarityMode::raw_cosine;
  if (s == "affine") return SimilarityMode::affine;
  fail(ErrorCode::schema_violation, "unknown similarity mode '" + std::string(s) + "'");
}

SimilarityMode default_mode(const EmbeddingEncoder& encoder) {
  return encoder.nonnegative() ? SimilarityMode::raw_cosine : SimilarityMode::affine;
}

double similarity(const Vector& a, const Vector& b, SimilarityMode mode) {
  const double c = cosine_similarity(normalized(a), normalized(b));
  return mode == SimilarityMode::raw_cosine ? c : 0.5 * (1.0 + c);
}

double sim_identity(const std::vector<std::vector<ImageTensor>>& concept_images,
                    const std::vector<ImageTensor>& gt_crops, const EmbeddingEncoder& encoder,
                    SimilarityMode mode) {
  if (concept_images.empty() || concept_images.size() != gt_crops.size())
    fail(ErrorCode::invalid_input, "sim_identity: need one image list and one crop per concept");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt_crops.size(); ++i) {
    if (concept_images[i].empty())
      fail(ErrorCode::invalid_input, "sim_identity: concept " + std::to_string(i) + " has no images");
    const Vector crop = encoder.embed_image(gt_crops[i]);
    double s = 0.0;
    for (const auto& img : concept_images[i]) s += similarity(encoder.embed_image(img), crop, mode);
    sum += s / static_cast<double>(concept_images[i].size());
  }
  return sum / static_cast<double>(gt_crops.size());
}

double sim_composition(const ImageTensor& composed, const ImageTensor& original,
                       const EmbeddingEncoder& encoder, SimilarityMode mode) {
  return similarity(encoder.embed_image(composed), encoder.embed_image(original), mode);
}

double acc_topk(const std::vector<std::vector<ImageTensor>>& generated,
                const std::vector<ImageTensor>& prototypes, int k, const EmbeddingEncoder& encoder) {
  const int classes = static_cast<int>(prototypes.size());
  if (k < 1 || k > classes)
    fail(ErrorCode::invalid_input, "acc_topk: k = " + std::to_string(k) + " with " +
                                       std::to_string(classes) + " classes");
  if (generated.size() != prototypes.size())
    fail(ErrorCode::invalid_input, "acc_topk: one generated list per class required");
  std::vector<Vector> proto;
  for (const auto& p : prototypes) proto.push_back(encoder.embed_image(p));
  int hits = 0, total = 0;
  for (int c = 0; c < classes; ++c)
    for (const auto& img : generated[static_cast<std::size_t>(c)]) {
      const Vector e = encoder.embed_image(img);
      std::vector<double> s;
      for (const auto& p : proto) s.push_back(similarity(e, p, SimilarityMode::raw_cosine));
      const double own = s[static_cast<std::size_t>(c)];
      int rank = 0;
      for (int o = 0; o < classes; ++o) {
        const double so = s[static_cast<std::size_t>(o)];
        if (so > own || (so == own && o < c)) ++rank;
      }
      hits += rank < k;
      ++total;
    }
  if (total == 0) fail(ErrorCode::invalid_input, "acc_topk: no generated images");
  return static_cast<double>(hits) / total;
}

std::string icbench_prompt(const std::string& token_id) { return "a photo of " + token_id; }

IcbenchReport icbench_scores(const std::vector<LearnedConcept>& concepts,
                             const ConceptDescriptions& descriptions, const ModelBackend& backend,
                             const EmbeddingEncoder& encoder, SimilarityMode mode) {
  IcbenchReport r;
  r.mode = mode;
  std::map<std::string, std::pair<double, int>> tt, tv;
  for (const auto& c : concepts) {
    const auto& label = c.record.text_concept.label;
    const auto entry = descriptions.find(label);
    if (entry == descriptions.end())
      fail(ErrorCode::descriptions_missing, "no description for concept '" + label + "'");
    std::vector<std::pair<std::string, std::string>> axes{{"object", c.conspec.token_id}};
    for (const auto& it : c.intrinsics) axes.emplace_back(it.axis.name, it.embedding.token_id);
    for (const auto& [axis, token] : axes) {
      const auto d = entry->second.find(axis);
      if (d == entry->second.end())
        fail(ErrorCode::descriptions_missing,
             "no '" + axis + "' description for concept '" + label + "'");
      const Vector desc = encoder.embed_text(d->second);
      const std::string prompt = icbench_prompt(token);
      AxisScore s{label, axis, token, similarity(desc, encoder.embed_text(prompt), mode), 0.0};
      const Conditioning cond = backend.encode(prompt);
      for (int seed = 0; seed < icbench_images; ++seed)
        s.sim_tv += similarity(desc, encoder.embed_image(backend.generate(cond, static_cast<std::uint64_t>(seed))), mode);
      s.sim_tv /= icbench_images;
      tt[axis].first += s.sim_tt;
      tt[axis].second += 1;
      tv[axis].first += s.sim_tv;
      tv[axis].second += 1;
      r.per_concept.push_back(std::move(s));
    }
  }
  for (const auto& [axis, acc] : tt)
    r.per_axis[axis] = {acc.first / acc.second, tv[axis].first / tv[axis].second};
  return r;
}

namespace {

void check_grids(const LabelGrid& pred, const LabelGrid& gt) {
  if (gt.labels.empty() || pred.labels.empty())
    fail(ErrorCode::invalid_input, "pixel_label_metrics: empty label grid");
  if (pred.height != gt.height || pred.width != gt.width ||
      pred.labels.size() != static_cast<std::size_t>(gt.height) * static_cast<std::size_t>(gt.width) ||
      gt.labels.size() != pred.labels.size())
    fail(ErrorCode::invalid_input, "pixel_label_metrics: grid dimensions differ");
}

}  // namespace

PixelMetrics pixel_label_metrics(const LabelGrid& pred, const LabelGrid& gt) {
  check_grids(pred, gt);
  PixelMetrics out;
  std::map<int, std::pair<std::size_t, std::size_t>> iu;  // label → (intersection, union)
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int p = pred.labels[i], g = gt.labels[i];
    if (p == g) {
      ++correct;
      iu[g].first += 1;
      iu[g].second += 1;
    } else {
      iu[g].second += 1;
      iu[p].second += 1;
    }
  }
  out.acc = static_cast<double>(correct) / static_cast<double>(gt.labels.size());
  for (const auto& [label, c] : iu) {
    out.class_iou[label] = static_cast<double>(c.first) / static_cast<double>(c.second);
    out.miou += out.class_iou[label];
  }
  out.miou /= static_cast<double>(iu.size());
  return out;
}

LabelGrid align_labels(const LabelGrid& pred, const LabelGrid& gt) {
  check_grids(pred, gt);
  for (std::size_t i = 0; i < gt.labels.size(); ++i)
    require(pred.labels[i] >= 0 && gt.labels[i] >= 0, "align_labels: labels must be >= 0");
  std::set<int> ps(pred.labels.begin(), pred.labels.end()), gs(gt.labels.begin(), gt.labels.end());
  const std::vector<int> pl(ps.begin(), ps.end()), gl(gs.begin(), gs.end());
  std::map<int, std::size_t> pi, gi;
  for (std::size_t i = 0; i < pl.size(); ++i) pi[pl[i]] = i;
  for (std::size_t i = 0; i < gl.size(); ++i) gi[gl[i]] = i;
  Matrix overlap(pl.size(), std::vector<double>(gl.size(), 0.0));
  for (std::size_t i = 0; i < gt.labels.size(); ++i) overlap[pi[pred.labels[i]]][gi[gt.labels[i]]] += 1.0;
  std::map<int, int> rename;
  for (int p : pl) rename[p] = -1 - p;
  for (const auto& [r, c] : hungarian_match(overlap).pairs)
    rename[pl[static_cast<std::size_t>(r)]] = gl[static_cast<std::size_t>(c)];
  LabelGrid out = pred;
  for (int& l : out.labels) l = rename[l];
  return out;
}

}  // namespace ice
