#include "ahgn/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ahgn/errors.hpp"

namespace ahgn {

namespace {

void check_marginal(std::span<const double> w, std::size_t n, const char* which) {
  if (w.size() != n) throw ShapeError(std::string("marginal ") + which + " length does not match cost");
  double s = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw ContractError(std::string("marginal ") + which + " must be strictly positive");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ContractError(std::string("marginal ") + which + " must sum to 1");
}

double lse(const double* x, std::size_t n, std::size_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[k * stride]);
  double z = 0.0;
  for (std::size_t k = 0; k < n; ++k) z += std::exp(x[k * stride] - mx);
  return mx + std::log(z);
}

}  // namespace

std::vector<double> uniform_marginal(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

SinkhornResult sinkhorn(const Tensor& cost, std::span<const double> p, std::span<const double> q, double eps_reg,
                        int iters, double tol) {
  if (!(eps_reg > 0.0)) throw ContractError("eps_reg must be positive");
  if (iters < 1) throw ContractError("sinkhorn iteration cap must be >= 1");
  if (!cost.all_finite()) throw ContractError("cost matrix must be finite");
  const std::size_t n = cost.rows(), m = cost.cols();
  check_marginal(p, n, "p");
  check_marginal(q, m, "q");

  std::vector<double> log_p(n), log_q(m);
  for (std::size_t i = 0; i < n; ++i) log_p[i] = std::log(p[i]);
  for (std::size_t j = 0; j < m; ++j) log_q[j] = std::log(q[j]);

  // Scaled potentials: f/eps, g/eps.
  std::vector<double> f(n, 0.0), g(m, 0.0);
  Tensor scaled({n, m});
  for (std::size_t k = 0; k < cost.size(); ++k) scaled[k] = -cost[k] / eps_reg;
  Tensor work({n, m});

  auto fail = [&]() {
    throw NumericalError("sinkhorn potentials became non-finite at eps_reg=" + std::to_string(eps_reg) +
                         "; increase eps_reg relative to the cost range");
  };

  SinkhornResult result;
  result.plan = Tensor({n, m});
  for (int it = 1; it <= iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) work(i, j) = scaled(i, j) + g[j];
      f[i] = log_p[i] - lse(&work(i, 0), m, 1);
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) work(i, j) = scaled(i, j) + f[i];
      g[j] = log_q[j] - lse(&work(0, j), n, m);
    }
    for (double v : f) if (!std::isfinite(v)) fail();
    for (double v : g) if (!std::isfinite(v)) fail();

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) result.plan(i, j) = std::exp(scaled(i, j) + f[i] + g[j]);

    double row_err = 0.0, col_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += result.plan(i, j);
      row_err = std::max(row_err, std::abs(s - p[i]));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += result.plan(i, j);
      col_err = std::max(col_err, std::abs(s - q[j]));
    }
    result.iterations = it;
    result.row_residual = row_err;
    result.col_residual = col_err;
    if (row_err <= tol && col_err <= tol) {
      result.converged = true;
      break;
    }
  }
  if (!result.plan.all_finite()) fail();
  return result;
}

Tensor gw_linearization(const Tensor& cost_s, const Tensor& cost_v, const Tensor& plan) {
  const std::size_t n = plan.rows(), m = plan.cols();
  if (cost_s.rows() != n || cost_s.cols() != n || cost_v.rows() != m || cost_v.cols() != m) {
    throw ShapeError("gw_linearization: intra-cost shapes " + shape_str(cost_s.shape()) + ", " +
                     shape_str(cost_v.shape()) + " do not fit plan " + shape_str(plan.shape()));
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i2 = 0; i2 < n; ++i2)
        for (std::size_t j2 = 0; j2 < m; ++j2) s += std::abs(cost_s(i, i2) - cost_v(j, j2)) * plan(i2, j2);
      out(i, j) = s;
    }
  return out;
}

double fused_objective(const Tensor& node_cost, const Tensor& cost_s, const Tensor& cost_v, const Tensor& plan,
                       double lambda) {
  const Tensor lin = gw_linearization(cost_s, cost_v, plan);
  double d = 0.0;
  for (std::size_t k = 0; k < plan.size(); ++k) d += plan[k] * (lambda * node_cost[k] + lin[k]);
  return d;
}

Coupling fused_gw(const Tensor& node_cost, const Tensor& cost_s, const Tensor& cost_v, const OTConfig& cfg) {
  if (cfg.gw_outer_iters < 1) throw ContractError("gw_outer_iters must be >= 1");
  const std::size_t n = node_cost.rows(), m = node_cost.cols();
  if (n == 0 || m == 0) throw EmptyInputError("fused_gw needs at least one node per side");

  Coupling c;
  c.p_s = uniform_marginal(n);
  c.p_v = uniform_marginal(m);
  c.node_cost = node_cost;
  c.cost_s = cost_s;
  c.cost_v = cost_v;
  c.plan = Tensor({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c.plan(i, j) = c.p_s[i] * c.p_v[j];

  for (int outer = 1; outer <= cfg.gw_outer_iters; ++outer) {
    Tensor linear = gw_linearization(cost_s, cost_v, c.plan);
    for (std::size_t k = 0; k < linear.size(); ++k) linear[k] += cfg.lambda * node_cost[k];
    SinkhornResult r = sinkhorn(linear, c.p_s, c.p_v, cfg.eps_reg, cfg.sinkhorn_iters, cfg.tol);
    double change = 0.0;
    for (std::size_t k = 0; k < r.plan.size(); ++k) change = std::max(change, std::abs(r.plan[k] - c.plan[k]));
    c.plan = std::move(r.plan);
    c.row_residual = r.row_residual;
    c.col_residual = r.col_residual;
    c.outer_iterations = outer;
    c.converged = r.converged;
    if (change <= 1e-12) break;
  }
  c.distance = fused_objective(node_cost, cost_s, cost_v, c.plan, cfg.lambda);
  return c;
}

namespace {

Tensor cosine_cost_values(const Tensor& a, const Tensor& b) {
  Tape tape;
  Tensor c = cosine_cost(tape.constant(a), tape.constant(b)).value();
  // 1 - cos can round to -1e-17
  for (auto& x : c.raw()) x = std::max(x, 0.0);
  return c;
}

// E(C_s, C_v) = sum_{i,j,i',j'} T_ij T_i'j' |C_s(i,i') - C_v(j,j')| for a constant plan T.
Var gw_energy(Var cost_s, Var cost_v, const Tensor& plan) {
  const Tensor& cs = cost_s.value();
  const Tensor& cv = cost_v.value();
  const Tensor lin = gw_linearization(cs, cv, plan);
  double e = 0.0;
  for (std::size_t k = 0; k < plan.size(); ++k) e += plan[k] * lin[k];
  const Var parents[] = {cost_s, cost_v};
  return cost_s.tape()->record(Tensor::scalar(e), parents, [cost_s, cost_v, plan](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& cs = t.value(cost_s.id());
    const Tensor& cv = t.value(cost_v.id());
    const std::size_t n = plan.rows(), m = plan.cols();
    Tensor gs({n, n}), gv({m, m});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t i2 = 0; i2 < n; ++i2)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t j2 = 0; j2 < m; ++j2) {
            const double diff = cs(i, i2) - cv(j, j2);
            const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
            const double w = g * plan(i, j) * plan(i2, j2) * sign;
            gs(i, i2) += w;
            gv(j, j2) -= w;
          }
    if (t.requires_grad(cost_s.id())) {
      Tensor& dst = t.grad(cost_s.id());
      for (std::size_t k = 0; k < gs.size(); ++k) dst[k] += gs[k];
    }
    if (t.requires_grad(cost_v.id())) {
      Tensor& dst = t.grad(cost_v.id());
      for (std::size_t k = 0; k < gv.size(); ++k) dst[k] += gv[k];
    }
  });
}

}  // namespace

Coupling got_distance(const Tensor& subtitle, const Tensor& visual, const OTConfig& cfg) {
  if (subtitle.rows() == 0 || visual.rows() == 0) throw EmptyInputError("got_distance needs n, m >= 1");
  return fused_gw(cosine_cost_values(subtitle, visual), cosine_cost_values(subtitle, subtitle),
                  cosine_cost_values(visual, visual), cfg);
}

Var got_energy(Var subtitle, Var visual, const Tensor& plan, double lambda) {
  Var node = cosine_cost(subtitle, visual);
  if (node.shape() != plan.shape()) {
    throw ShapeError("plan " + shape_str(plan.shape()) + " does not match node cost " + shape_str(node.shape()));
  }
  Var plan_var = subtitle.tape()->constant(plan);
  Var node_term = scale(sum_all(mul(plan_var, node)), lambda);
  return add(node_term, gw_energy(cosine_cost(subtitle, subtitle), cosine_cost(visual, visual), plan));
}

CrossModalLoss loss_cm(std::span<const SegmentPair> segments, const OTConfig& cfg,
                       const std::vector<Tensor>* frozen_plans) {
  if (segments.empty()) throw EmptyInputError("loss_cm needs at least one segment");
  if (frozen_plans && frozen_plans->size() != segments.size()) {
    throw ContractError("frozen plan count does not match segment count");
  }
  CrossModalLoss out;
  Var total;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    Coupling c;
    if (frozen_plans) {
      const Tensor& s = seg.subtitle.value();
      const Tensor& v = seg.visual.value();
      c.p_s = uniform_marginal(s.rows());
      c.p_v = uniform_marginal(v.rows());
      c.node_cost = cosine_cost_values(s, v);
      c.cost_s = cosine_cost_values(s, s);
      c.cost_v = cosine_cost_values(v, v);
      c.plan = (*frozen_plans)[i];
      c.distance = fused_objective(c.node_cost, c.cost_s, c.cost_v, c.plan, cfg.lambda);
    } else {
      c = got_distance(seg.subtitle.value(), seg.visual.value(), cfg);
    }
    Var d = got_energy(seg.subtitle, seg.visual, c.plan, cfg.lambda);
    total = total.valid() ? add(total, d) : d;
    out.couplings.push_back(std::move(c));
  }
  out.loss = scale(total, cfg.alpha / static_cast<double>(segments.size()));
  return out;
}

double brute_force_wd(const Tensor& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw ShapeError("brute_force_wd needs a square cost, got " + shape_str(cost.shape()));
  if (n == 0) throw EmptyInputError("brute_force_wd on empty cost");
  if (n > 6) throw ContractError("brute_force_wd limited to n <= 6, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost(i, perm[i]);
    best = std::min(best, s / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace ahgn
