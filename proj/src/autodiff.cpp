#include "ahgn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ahgn/errors.hpp"

namespace ahgn {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw ContractError("operand recorded on a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss recorded on a different tape");
  if (!value(loss.id()).is_scalar()) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor{};
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

double stable_sigmoid(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  double s;
  if (x >= 0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
}

std::size_t resolve_axis(const Tensor& t, int axis) {
  if (axis == -1) return 1;
  if (axis == 0 || axis == 1) return static_cast<std::size_t>(axis);
  throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_str(t.shape()));
}

Tensor as_matrix(Tensor t) {
  if (t.rank() == 2) return t;
  const std::size_t n = t.size();
  return Tensor({1, n}, std::move(t.raw()));
}

enum class Binary { kAdd, kSub, kMul };

Var binary(Var a, Var b, Binary kind) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_scalar = av.is_scalar() && !bv.is_scalar();
  const bool b_scalar = bv.is_scalar() && !av.is_scalar();
  if (!a_scalar && !b_scalar && av.shape() != bv.shape()) {
    throw ShapeError("elementwise shape mismatch: " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  const Shape out_shape = a_scalar ? bv.shape() : av.shape();
  Tensor out(out_shape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? av[0] : av[i];
    const double y = b_scalar ? bv[0] : bv[i];
    switch (kind) {
      case Binary::kAdd: out[i] = x + y; break;
      case Binary::kSub: out[i] = x - y; break;
      case Binary::kMul: out[i] = x * y; break;
    }
  }
  const Var parents[] = {a, b};
  return a.tape()->record(std::move(out), parents, [a, b, a_scalar, b_scalar, kind](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const std::size_t n = g.size();
    if (t.requires_grad(a.id())) {
      Tensor& ga = t.grad(a.id());
      const Tensor& bv = t.value(b.id());
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == Binary::kMul) d *= b_scalar ? bv[0] : bv[i];
        ga[a_scalar ? 0 : i] += d;
      }
    }
    if (t.requires_grad(b.id())) {
      Tensor& gb = t.grad(b.id());
      const Tensor& av = t.value(a.id());
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == Binary::kSub) d = -d;
        if (kind == Binary::kMul) d *= a_scalar ? av[0] : av[i];
        gb[b_scalar ? 0 : i] += d;
      }
    }
  });
}

// Elementwise unary op where the derivative is expressed via input x and output y.
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const Var parents[] = {a};
  return a.tape()->record(std::move(out), parents, [a, deriv](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a.id());
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul inner dimension mismatch: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv.raw()[p * c];
      double* orow = &out.raw()[i * c];
      for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
    }
  }
  const Var parents[] = {a, b};
  return a.tape()->record(std::move(out), parents, [a, b, r, k, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(a.id());
    const Tensor& bv = t.value(b.id());
    if (t.requires_grad(a.id())) {
      Tensor& ga = t.grad(a.id());  // dA = G B^T
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * bv[p * c + j];
          ga[i * k + p] += s;
        }
    }
    if (t.requires_grad(b.id())) {
      Tensor& gb = t.grad(b.id());  // dB = A^T G
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < c; ++j) gb[p * c + j] += aip * g[i * c + j];
        }
    }
  });
}

Var transpose(Var a) {
  const Var parents[] = {a};
  return a.tape()->record(a.value().transposed(), parents, [a](Tape& t, std::size_t self) {
    const Tensor gt = t.grad(self).transposed();
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < gt.size(); ++i) ga[i] += gt[i];
  });
}

Var add(Var a, Var b) { return binary(a, b, Binary::kAdd); }
Var sub(Var a, Var b) { return binary(a, b, Binary::kSub); }
Var mul(Var a, Var b) { return binary(a, b, Binary::kMul); }

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var one_minus(Var a) {
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().raw()) {
    if (!(v > 0.0)) throw DegenerateInputError("log of non-positive value");
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var softmax(Var a, int axis) {
  const Tensor av = as_matrix(a.value());
  const std::size_t ax = resolve_axis(av, axis);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(a.value().shape());
  // Iterate over "lanes": rows when ax == 1, columns when ax == 0.
  const std::size_t lanes = ax == 1 ? r : c;
  const std::size_t len = ax == 1 ? c : r;
  const std::size_t stride = ax == 1 ? 1 : c;
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const std::size_t base = ax == 1 ? lane * c : lane;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, av[base + k * stride]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(av[base + k * stride] - mx);
      out[base + k * stride] = e;
      z += e;
    }
    for (std::size_t k = 0; k < len; ++k) out[base + k * stride] /= z;
  }
  const Var parents[] = {a};
  return a.tape()->record(std::move(out), parents,
                          [a, lanes, len, stride, c, ax](Tape& t, std::size_t self) {
                            const Tensor& g = t.grad(self);
                            const Tensor& y = t.value(self);
                            Tensor& ga = t.grad(a.id());
                            for (std::size_t lane = 0; lane < lanes; ++lane) {
                              const std::size_t base = ax == 1 ? lane * c : lane;
                              double dot = 0.0;
                              for (std::size_t k = 0; k < len; ++k) {
                                const std::size_t i = base + k * stride;
                                dot += g[i] * y[i];
                              }
                              for (std::size_t k = 0; k < len; ++k) {
                                const std::size_t i = base + k * stride;
                                ga[i] += y[i] * (g[i] - dot);
                              }
                            }
                          });
}

Var log_sum_exp(Var a) {
  const Tensor& av = a.value();
  if (av.empty()) throw ContractError("log_sum_exp of empty tensor");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : av.raw()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : av.raw()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  const Var parents[] = {a};
  return a.tape()->record(Tensor::scalar(lse), parents, [a, lse](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& x = t.value(a.id());
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g * std::exp(x[i] - lse);
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Tape* tape = parts.front().tape();
  const std::size_t ax = resolve_axis(parts.front().value(), axis);
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (p.tape() != tape) throw ContractError("operands recorded on different tapes");
    const Tensor& v = p.value();
    if (ax == 1) {
      if (rows == 0) rows = v.rows();
      if (v.rows() != rows) throw ShapeError("concat axis 1 row mismatch: " + shape_str(v.shape()));
      cols += v.cols();
    } else {
      if (cols == 0) cols = v.cols();
      if (v.cols() != cols) throw ShapeError("concat axis 0 column mismatch: " + shape_str(v.shape()));
      rows += v.rows();
    }
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    offsets.push_back(off);
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (ax == 1) out(i, off + j) = v(i, j);
        else out(off + i, j) = v(i, j);
      }
    off += ax == 1 ? v.cols() : v.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape->record(std::move(out), parts, [ps, offsets, ax](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (!t.requires_grad(ps[k].id())) continue;
      Tensor& gp = t.grad(ps[k].id());
      const std::size_t r = gp.rows(), c = gp.cols();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gp(i, j) += ax == 1 ? g(i, offsets[k] + j) : g(offsets[k] + i, j);
    }
  });
}

Var sum(Var a, int axis) {
  const Tensor& av = a.value();
  const std::size_t ax = resolve_axis(av, axis);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = ax == 0 ? Tensor({1, c}) : Tensor({r, 1});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[ax == 0 ? j : i] += av(i, j);
  const Var parents[] = {a};
  return a.tape()->record(std::move(out), parents, [a, r, c, ax](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[ax == 0 ? j : i];
  });
}

Var mean(Var a, int axis) {
  const std::size_t ax = resolve_axis(a.value(), axis);
  const std::size_t n = ax == 0 ? a.value().rows() : a.value().cols();
  if (n == 0) throw DegenerateInputError("mean over empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().raw()) s += v;
  const Var parents[] = {a};
  return a.tape()->record(Tensor::scalar(s), parents, [a](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean_all(Var a) {
  if (a.value().empty()) throw DegenerateInputError("mean of empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var repeat_rows(Var row, std::size_t n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw ShapeError("repeat_rows expects a single row, got " + shape_str(rv.shape()));
  const std::size_t c = rv.cols();
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = rv[j];
  const Var parents[] = {row};
  return row.tape()->record(std::move(out), parents, [row, n, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gr = t.grad(row.id());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.size() != av.cols()) {
    throw ShapeError("add_row width mismatch: " + shape_str(av.shape()) + " + " + shape_str(rv.shape()));
  }
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = av;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  const Var parents[] = {a, row};
  return a.tape()->record(std::move(out), parents, [a, row, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a.id())) {
      Tensor& ga = t.grad(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(row.id())) {
      Tensor& gr = t.grad(row.id());
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
    }
  });
}

Var take_row(Var a, std::size_t r) {
  const Tensor& av = a.value();
  if (r >= av.rows()) throw ShapeError("row index " + std::to_string(r) + " out of range for " + shape_str(av.shape()));
  const std::size_t c = av.cols();
  const Var parents[] = {a};
  return a.tape()->record(av.row_copy(r), parents, [a, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(a.id());
    for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += g[j];
  });
}

Var stack_rows(std::span<const Var> rows) { return concat(rows, 0); }

Var row_normalize(Var a) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({r, c});
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av(i, j) * av(i, j);
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 1e-12)) throw DegenerateInputError("row " + std::to_string(i) + " has zero norm");
    for (std::size_t j = 0; j < c; ++j) out(i, j) = av(i, j) / norms[i];
  }
  const Var parents[] = {a};
  return a.tape()->record(std::move(out), parents, [a, norms, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.id());
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
    }
  });
}

Var cosine_cost(Var a, Var b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cosine_cost width mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  return one_minus(matmul(row_normalize(a), transpose(row_normalize(b))));
}

Var cosine_distance(Var u, Var v) {
  if (u.value().size() != v.value().size()) {
    throw ShapeError("cosine_distance size mismatch: " + shape_str(u.shape()) + " vs " + shape_str(v.shape()));
  }
  if (u.rows() != 1 || v.rows() != 1) throw ShapeError("cosine_distance expects row vectors");
  return cosine_cost(u, v);
}

Var gated_mix(Var x, Var message, Var gate) { return add(x, mul(gate, sub(message, x))); }

}  // namespace ahgn
