#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ice::oracle {

double exact_ot(const std::vector<double>& a, const std::vector<double>& b,
                const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  const int source = n + m, sink = n + m + 1, nodes = n + m + 2;
  struct Edge {
    int to;
    double cap, cost;
    int rev;
  };
  std::vector<std::vector<Edge>> g(static_cast<std::size_t>(nodes));
  const auto add = [&](int u, int v, double cap, double c) {
    g[u].push_back({v, cap, c, static_cast<int>(g[v].size())});
    g[v].push_back({u, 0.0, -c, static_cast<int>(g[u].size()) - 1});
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) add(source, i, a[i], 0.0);
  for (int j = 0; j < m; ++j) add(n + j, sink, b[j], 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) add(i, n + j, inf, cost[i][j]);

  constexpr double tiny = 1e-15;
  double remaining = std::min(std::accumulate(a.begin(), a.end(), 0.0),
                              std::accumulate(b.begin(), b.end(), 0.0));
  double total = 0.0;
  while (remaining > tiny) {
    std::vector<double> dist(nodes, inf);
    std::vector<int> prev_node(nodes, -1), prev_edge(nodes, -1);
    dist[source] = 0.0;
    for (int round = 0; round < nodes; ++round) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (dist[u] == inf) continue;
        for (int e = 0; e < static_cast<int>(g[u].size()); ++e) {
          const Edge& ed = g[u][e];
          if (ed.cap <= tiny) continue;
          if (dist[u] + ed.cost < dist[ed.to] - 1e-15) {
            dist[ed.to] = dist[u] + ed.cost;
            prev_node[ed.to] = u;
            prev_edge[ed.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == inf) break;
    double push = remaining;
    for (int v = sink; v != source; v = prev_node[v])
      push = std::min(push, g[prev_node[v]][prev_edge[v]].cap);
    for (int v = sink; v != source; v = prev_node[v]) {
      Edge& ed = g[prev_node[v]][prev_edge[v]];
      ed.cap -= push;
      g[v][ed.rev].cap += push;
    }
    total += push * dist[sink];
    remaining -= push;
  }
  return total;
}

std::vector<std::vector<double>> grid_cost(int h, int w) {
  const auto coord = [](int i, int size) { return size > 1 ? double(i) / (size - 1) : 0.5; };
  const int n = h * w;
  std::vector<std::vector<double>> c(n, std::vector<double>(n));
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const double dy = coord(p / w, h) - coord(q / w, h);
      const double dx = coord(p % w, w) - coord(q % w, w);
      c[p][q] = std::sqrt(dy * dy + dx * dx);
    }
  return c;
}

BruteAssignment brute_force_assignment(const std::vector<std::vector<double>>& sim) {
  const int n = static_cast<int>(sim.size());
  const int m = n == 0 ? 0 : static_cast<int>(sim[0].size());
  const bool transpose = n > m;
  const int rows = transpose ? m : n, cols = transpose ? n : m;
  const auto at = [&](int r, int c) { return transpose ? sim[c][r] : sim[r][c]; };

  BruteAssignment best;
  best.total = -std::numeric_limits<double>::infinity();
  std::vector<int> choice(rows);
  std::vector<bool> used(cols, false);
  std::vector<std::vector<int>> optimal;

  std::function<void(int, double)> rec = [&](int r, double acc) {
    if (r == rows) {
      if (acc > best.total + 1e-12) {
        best.total = acc;
        optimal.assign(1, choice);
      } else if (std::abs(acc - best.total) <= 1e-12) {
        optimal.push_back(choice);
      }
      return;
    }
    for (int c = 0; c < cols; ++c) {
      if (used[c]) continue;
      used[c] = true;
      choice[r] = c;
      rec(r + 1, acc + at(r, c));
      used[c] = false;
    }
  };
  rec(0, 0.0);

  // Lowest-index preference is stated on (pred, gt) pairs sorted by pred index.
  std::vector<std::vector<std::pair<int, int>>> candidates;
  for (const auto& ch : optimal) {
    std::vector<std::pair<int, int>> pairs;
    for (int r = 0; r < rows; ++r)
      pairs.push_back(transpose ? std::make_pair(ch[r], r) : std::make_pair(r, ch[r]));
    std::sort(pairs.begin(), pairs.end());
    candidates.push_back(std::move(pairs));
  }
  best.pairs = *std::min_element(candidates.begin(), candidates.end());
  return best;
}

}  // namespace ice::oracle
