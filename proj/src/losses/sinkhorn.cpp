#include "ice/losses/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ice/core/error.hpp"

namespace ice {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double log_sum_exp(const VectorXd& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// Plan exponent matrix (f_i + g_j − C_ij) / eps.
MatrixXd exponent(const VectorXd& f, const VectorXd& g, const MatrixXd& c, double eps) {
  return ((f.replicate(1, c.cols()) + g.transpose().replicate(c.rows(), 1)) - c) / eps;
}

// −Hessian of the entropic dual with the last column potential pinned at 0.
MatrixXd dual_hessian(const MatrixXd& p, double eps) {
  const auto n = p.rows(), m = p.cols();
  MatrixXd h = MatrixXd::Zero(n + m - 1, n + m - 1);
  h.topLeftCorner(n, n).diagonal() = p.rowwise().sum();
  h.topRightCorner(n, m - 1) = p.leftCols(m - 1);
  h.bottomLeftCorner(m - 1, n) = p.leftCols(m - 1).transpose();
  h.bottomRightCorner(m - 1, m - 1).diagonal() = p.colwise().sum().head(m - 1).transpose();
  return h / eps;
}

}  // namespace

Eigen::MatrixXd grid_cost(int h, int w) {
  require(h >= 1 && w >= 1, "grid_cost: empty grid");
  const auto coord = [](int i, int size) { return size > 1 ? double(i) / (size - 1) : 0.5; };
  const int n = h * w;
  MatrixXd c(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      c(p, q) = std::hypot(coord(p / w, h) - coord(q / w, h), coord(p % w, w) - coord(q % w, w));
  return c;
}

SinkhornResult sinkhorn(const std::vector<double>& a_full, const std::vector<double>& b_full,
                        const Eigen::MatrixXd& cost_full, const SinkhornOptions& opt,
                        bool with_gradient) {
  require(cost_full.rows() == static_cast<Eigen::Index>(a_full.size()) &&
              cost_full.cols() == static_cast<Eigen::Index>(b_full.size()),
          "sinkhorn: cost shape does not match the marginals");
  require(opt.epsilon > 0.0, "sinkhorn: epsilon must be positive");
  const auto check_simplex = [](const std::vector<double>& v, const char* name) {
    double s = 0.0;
    for (double x : v) {
      if (!std::isfinite(x) || x < 0.0)
        fail(ErrorCode::degenerate_distribution, std::string("sinkhorn: invalid mass in ") + name);
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9)
      fail(ErrorCode::degenerate_distribution, std::string("sinkhorn: ") + name + " does not sum to 1");
  };
  check_simplex(a_full, "a");
  check_simplex(b_full, "b");

  std::vector<Eigen::Index> ia, jb;
  for (std::size_t i = 0; i < a_full.size(); ++i)
    if (a_full[i] > 0.0) ia.push_back(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < b_full.size(); ++j)
    if (b_full[j] > 0.0) jb.push_back(static_cast<Eigen::Index>(j));
  const auto n = static_cast<Eigen::Index>(ia.size());
  const auto m = static_cast<Eigen::Index>(jb.size());
  VectorXd a(n), b(m);
  MatrixXd c(n, m);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = a_full[static_cast<std::size_t>(ia[i])];
  for (Eigen::Index j = 0; j < m; ++j) b(j) = b_full[static_cast<std::size_t>(jb[j])];
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = cost_full(ia[i], jb[j]);

  SinkhornResult out;
  if (with_gradient) out.grad_a.assign(a_full.size(), 0.0);

  // One side is a point mass: the product plan is the only feasible plan.
  if (n == 1 || m == 1) {
    const MatrixXd p = a * b.transpose();
    out.value = (p.array() * c.array()).sum();
    if (with_gradient && n > 1)
      for (Eigen::Index i = 0; i < n; ++i) out.grad_a[static_cast<std::size_t>(ia[i])] = c(i, 0);
    return out;
  }

  const double eps = opt.epsilon;
  const VectorXd la = a.array().log(), lb = b.array().log();
  VectorXd f = VectorXd::Zero(n), g = VectorXd::Zero(m);
  double e = std::max(opt.start_epsilon, eps);
  for (int k = 0; k < opt.max_sweeps; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      f(i) = e * la(i) - e * log_sum_exp((g - c.row(i).transpose()) / e);
    for (Eigen::Index j = 0; j < m; ++j)
      g(j) = e * lb(j) - e * log_sum_exp((f - c.col(j)) / e);
    out.sweeps = k + 1;
    if (e > eps) {
      e = std::max(eps, e * opt.scaling);
    } else {
      const MatrixXd p = exponent(f, g, c, eps).array().exp();
      if ((p.rowwise().sum() - a).lpNorm<1>() < opt.sweep_tolerance) break;
    }
  }

  f.array() += g(m - 1);
  g.array() -= g(m - 1);

  const auto dual = [&](const VectorXd& ff, const VectorXd& gg) {
    const MatrixXd z = exponent(ff, gg, c, eps);
    if (z.maxCoeff() > 700.0) return -std::numeric_limits<double>::infinity();
    return ff.dot(a) + gg.dot(b) - eps * z.array().exp().sum();
  };
  const auto residual = [&](const MatrixXd& p) {
    return (a - p.rowwise().sum()).lpNorm<1>() + (b - p.colwise().sum().transpose()).lpNorm<1>();
  };

  MatrixXd p = exponent(f, g, c, eps).array().exp();
  out.marginal_residual = residual(p);
  if (opt.newton_polish) {
    for (int it = 0; it < opt.max_newton && out.marginal_residual > opt.newton_tolerance; ++it) {
      VectorXd grad(n + m - 1);
      grad.head(n) = a - p.rowwise().sum();
      grad.tail(m - 1) = (b - p.colwise().sum().transpose()).head(m - 1);
      MatrixXd hess = dual_hessian(p, eps);
      hess.diagonal().array() += 1e-12 * hess.diagonal().maxCoeff();
      VectorXd d = hess.llt().solve(grad);
      if (!d.allFinite()) break;
      // When the significant plan entries split into disconnected blocks the
      // Hessian is nearly singular and the raw step explodes; cap it so each
      // step changes any plan entry by at most a factor e^(2·cap/ε).
      const double cap = opt.newton_step_cap * eps;
      if (const double big = d.lpNorm<Eigen::Infinity>(); big > cap) d *= cap / big;
      const double d0 = dual(f, g);
      const double slope = grad.dot(d);
      double t = 1.0;
      bool accepted = false;
      VectorXd fn, gn;
      MatrixXd pn;
      while (t > 1e-10) {
        fn = f + t * d.head(n);
        gn = g;
        gn.head(m - 1) += t * d.tail(m - 1);
        const double dn = dual(fn, gn);
        if (dn >= d0 + 1e-4 * t * slope) {
          accepted = true;
        } else if (std::isfinite(dn)) {
          // Close to the optimum the dual gain drowns in round-off; fall back
          // to requiring a smaller marginal residual.
          pn = exponent(fn, gn, c, eps).array().exp();
          accepted = residual(pn) < out.marginal_residual;
        }
        if (accepted) break;
        t *= 0.5;
      }
      if (!accepted) break;
      f = fn;
      g = gn;
      p = exponent(f, g, c, eps).array().exp();
      out.marginal_residual = residual(p);
      out.newton_steps = it + 1;
    }
  }

  if (!p.allFinite()) fail(ErrorCode::numeric_failure, "sinkhorn: non-finite transport plan");
  out.value = (p.array() * c.array()).sum();

  if (with_gradient) {
    // Implicit differentiation of the marginal conditions: H z = ∂<P,C>/∂(f, g).
    const MatrixXd pc = p.array() * c.array();
    VectorXd rhs(n + m - 1);
    rhs.head(n) = pc.rowwise().sum() / eps;
    rhs.tail(m - 1) = pc.colwise().sum().transpose().head(m - 1) / eps;
    const VectorXd z = dual_hessian(p, eps).ldlt().solve(rhs);
    if (!z.allFinite()) fail(ErrorCode::numeric_failure, "sinkhorn: singular dual Hessian");
    for (Eigen::Index i = 0; i < n; ++i) out.grad_a[static_cast<std::size_t>(ia[i])] = z(i);
  }
  return out;
}

AttentionLoss wasserstein_attention_loss(const AttentionMap& attention, const BinaryMask& mask,
                                         bool with_gradient, const SinkhornOptions& options) {
  const double total = attention.total();
  if (!(total > 0.0))
    fail(ErrorCode::degenerate_distribution, "attention map has zero mass");
  const BinaryMask coarse = mask.resampled(attention.height(), attention.width());
  const std::size_t cells = coarse.count();
  if (cells == 0)
    fail(ErrorCode::degenerate_distribution, "mask is empty on the attention grid");

  std::vector<double> a(attention.size()), b(coarse.pixel_count());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = attention.weights()[i] / total;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = coarse[i] ? 1.0 / static_cast<double>(cells) : 0.0;

  const auto r = sinkhorn(a, b, grid_cost(attention.height(), attention.width()), options,
                          with_gradient);
  AttentionLoss out{r.value, {}};
  if (with_gradient) {
    // a = A / ΣA, so dL/dA_k = (z_k − Σ_i a_i z_i) / ΣA.
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] * r.grad_a[i];
    out.grad.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out.grad[k] = (r.grad_a[k] - mean) / total;
  }
  return out;
}

}  // namespace ice
