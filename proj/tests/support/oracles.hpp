#pragma once

#include <utility>
#include <vector>

namespace ice::oracle {

// Exact discrete optimal transport by successive shortest paths on the
// bipartite transport network (Bellman-Ford on the residual graph).
double exact_ot(const std::vector<double>& a, const std::vector<double>& b,
                const std::vector<std::vector<double>>& cost);

// Unit-square Euclidean ground cost between the cells of an h x w grid.
std::vector<std::vector<double>> grid_cost(int h, int w);

struct BruteAssignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double total = 0.0;
};

// Exhaustive search over all injective maps of the smaller side; among
// optimal maps (within 1e-12) returns the lexicographically smallest.
BruteAssignment brute_force_assignment(const std::vector<std::vector<double>>& sim);

// Central finite-difference gradient.
template <typename F>
std::vector<double> numeric_gradient(F&& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace ice::oracle
