#include "gcf/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcf/errors.hpp"
#include "gcf/numerics/kernels.hpp"

namespace gcf::num {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw ContractError("operands live on different tapes");
  return *a.tape();
}

enum class Bcast { Full, Scalar, Row };

// How operand `t` maps onto an output of shape [rows x cols].
Bcast classify(const Tensor& t, std::size_t rows, std::size_t cols) {
  if (t.rows() == rows && t.cols() == cols) return Bcast::Full;
  if (t.size() == 1) return Bcast::Scalar;
  if (t.rows() == 1 && t.cols() == cols) return Bcast::Row;
  throw ShapeError("cannot broadcast " + shape_str(t.shape()) + " to [" + std::to_string(rows) + "x" +
                   std::to_string(cols) + "]");
}

inline std::size_t src_index(Bcast b, std::size_t i, std::size_t cols) {
  switch (b) {
    case Bcast::Full: return i;
    case Bcast::Scalar: return 0;
    case Bcast::Row: return i % cols;
  }
  return i;
}

struct BinaryShape {
  std::size_t rows, cols;
  Bcast a, b;
};

BinaryShape binary_shape(const Tensor& a, const Tensor& b) {
  const std::size_t rows = std::max(a.rows(), b.rows());
  const std::size_t cols = std::max(a.cols(), b.cols());
  return {rows, cols, classify(a, rows, cols), classify(b, rows, cols)};
}

// Sums an output-shaped adjoint back into an operand of broadcast kind `b`.
Tensor reduce_to(const Tensor& g, Bcast b, const Tensor& like) {
  if (b == Bcast::Full) return g;
  Tensor out(like.shape(), 0.0);
  const std::size_t cols = g.cols();
  for (std::size_t i = 0; i < g.size(); ++i) out[src_index(b, i, cols)] += g[i];
  return out;
}

template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, F f, DA da, DB db) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const BinaryShape s = binary_shape(av, bv);
  Tensor out({s.rows, s.cols});
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(av[src_index(s.a, i, s.cols)], bv[src_index(s.b, i, s.cols)]);
  }
  return tape.record(std::move(out), {a, b}, [a, b, s, da, db](Tape& t, Var, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (a.requires_grad()) {
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] = g[i] * da(av[src_index(s.a, i, s.cols)], bv[src_index(s.b, i, s.cols)]);
      }
      t.accumulate(a, reduce_to(ga, s.a, av));
    }
    if (b.requires_grad()) {
      Tensor gb(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i] = g[i] * db(av[src_index(s.a, i, s.cols)], bv[src_index(s.b, i, s.cols)]);
      }
      t.accumulate(b, reduce_to(gb, s.b, bv));
    }
  });
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (std::isnan(v)) throw NumericError(std::string("NaN input to ") + op);
  }
}

void check_axis(int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("axis must be 0 or 1, got " + std::to_string(axis));
}

// Visits each 1-D slice along `axis` as (offset, stride, length).
template <typename F>
void for_each_slice(const Tensor& t, int axis, F f) {
  const std::size_t rows = t.rows();
  const std::size_t cols = t.cols();
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) f(r * cols, std::size_t{1}, cols);
  } else {
    for (std::size_t c = 0; c < cols; ++c) f(c, cols, rows);
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul inner extents differ: " + shape_str(av.shape()) + " * " + shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::matmul(av.data().data(), bv.data().data(), out.data().data(), m, k, n, false);
  return tape.record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, Var, const Tensor& g) {
    if (a.requires_grad()) {
      // dA = G * B^T
      Tensor& ga = t.grad_buffer(a);
      kernels::matmul_bt(g.data().data(), b.value().data().data(), ga.data().data(), m, n, k, true);
    }
    if (b.requires_grad()) {
      // dB = A^T * G
      Tensor& gb = t.grad_buffer(b);
      kernels::matmul_at(a.value().data().data(), g.data().data(), gb.data().data(), k, m, n, true);
    }
  });
}

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape& t, Var, const Tensor& g) {
    Tensor ga = g;
    for (double& v : ga.data()) v *= factor;
    t.accumulate(a, ga);
  });
}

Var add_scalar(Var a, double offset) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return tape.record(std::move(out), {a}, [a](Tape& t, Var, const Tensor& g) { t.accumulate(a, g); });
}

Var tanh(Var a) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return tape.record(std::move(out), {a}, [a](Tape& t, Var self, const Tensor& g) {
    const Tensor& y = self.value();
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
    t.accumulate(a, ga);
  });
}

Var sigmoid(Var a) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return tape.record(std::move(out), {a}, [a](Tape& t, Var self, const Tensor& g) {
    const Tensor& y = self.value();
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i] * (1.0 - y[i]);
    t.accumulate(a, ga);
  });
}

Var softmax(Var a, int axis) {
  check_axis(axis);
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  check_finite(x, "softmax");
  Tensor out(x.shape());
  for_each_slice(x, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    double mx = x[off];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x[off + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(x[off + i * stride] - mx);
      out[off + i * stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[off + i * stride] /= z;
  });
  return tape.record(std::move(out), {a}, [a, axis](Tape& t, Var self, const Tensor& g) {
    const Tensor& y = self.value();
    Tensor ga(g.shape());
    for_each_slice(y, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) dot += g[off + i * stride] * y[off + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t j = off + i * stride;
        ga[j] = y[j] * (g[j] - dot);
      }
    });
    t.accumulate(a, ga);
  });
}

Var log_softmax(Var a, int axis) {
  check_axis(axis);
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  check_finite(x, "log_softmax");
  Tensor out(x.shape());
  for_each_slice(x, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    double mx = x[off];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x[off + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) z += std::exp(x[off + i * stride] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t i = 0; i < len; ++i) out[off + i * stride] = x[off + i * stride] - lz;
  });
  return tape.record(std::move(out), {a}, [a, axis](Tape& t, Var self, const Tensor& g) {
    const Tensor& y = self.value();
    Tensor ga(g.shape());
    for_each_slice(y, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
      double gs = 0.0;
      for (std::size_t i = 0; i < len; ++i) gs += g[off + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t j = off + i * stride;
        ga[j] = g[j] - std::exp(y[j]) * gs;
      }
    });
    t.accumulate(a, ga);
  });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape& tape = *x.tape();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), d = xv.cols();
  if (d < 2) throw ShapeError("layer_norm needs at least 2 features");
  if (gain.value().rows() != 1 || gain.value().cols() != d || bias.value().rows() != 1 ||
      bias.value().cols() != d) {
    throw ShapeError("layer_norm gain/bias must be [1x" + std::to_string(d) + "]");
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor xhat({rows, d});
  std::vector<double> inv_std(rows);
  Tensor out({rows, d});
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xv(r, c);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv(r, c) - mu) * (xv(r, c) - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xv(r, c) - mu) * inv_std[r];
      out(r, c) = xhat(r, c) * gv(0, c) + bv(0, c);
    }
  }
  return tape.record(std::move(out), {x, gain, bias},
                     [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](
                         Tape& t, Var, const Tensor& g) {
                       const Tensor& gv = gain.value();
                       if (x.requires_grad()) {
                         Tensor gx({rows, d});
                         const double inv_d = 1.0 / static_cast<double>(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double m1 = 0.0, m2 = 0.0;
                           for (std::size_t c = 0; c < d; ++c) {
                             const double dxh = g(r, c) * gv(0, c);
                             m1 += dxh;
                             m2 += dxh * xhat(r, c);
                           }
                           m1 *= inv_d;
                           m2 *= inv_d;
                           for (std::size_t c = 0; c < d; ++c) {
                             const double dxh = g(r, c) * gv(0, c);
                             gx(r, c) = inv_std[r] * (dxh - m1 - xhat(r, c) * m2);
                           }
                         }
                         t.accumulate(x, gx);
                       }
                       if (gain.requires_grad() || bias.requires_grad()) {
                         Tensor gg({1, d}), gb({1, d});
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < d; ++c) {
                             gg(0, c) += g(r, c) * xhat(r, c);
                             gb(0, c) += g(r, c);
                           }
                         }
                         t.accumulate(gain, gg);
                         t.accumulate(bias, gb);
                       }
                     });
}

Var linear(Var x, Var w, Var b) {
  if (b.value().rows() != 1 || b.value().cols() != w.value().cols()) {
    throw ShapeError("linear bias " + shape_str(b.value().shape()) + " does not match weight " +
                     shape_str(w.value().shape()));
  }
  return add(matmul(x, w), b);
}

Var sum(Var a) {
  Tape& tape = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape.record(Tensor::scalar(s), {a}, [a](Tape& t, Var, const Tensor& g) {
    t.accumulate(a, Tensor(a.value().shape(), g.item()));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += av(r, c);
    out(r, 0) = s;
  }
  return tape.record(std::move(out), {a}, [a, rows, cols](Tape& t, Var, const Tensor& g) {
    Tensor ga({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) = g(r, 0);
    t.accumulate(a, ga);
  });
}

Var transpose(Var a) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(c, r) = av(r, c);
  return tape.record(std::move(out), {a}, [a, rows, cols](Tape& t, Var, const Tensor& g) {
    Tensor ga({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) = g(c, r);
    t.accumulate(a, ga);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Tape& tape = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw ContractError("operands live on different tapes");
    if (p.rows() != rows) throw ShapeError("concat_cols row mismatch");
    cols += p.cols();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, off + c) = pv(r, c);
    off += pv.cols();
  }
  return tape.record(std::move(out), parts, [parts, rows](Tape& t, Var, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t pc = p.cols();
      if (p.requires_grad()) {
        Tensor gp({rows, pc});
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < pc; ++c) gp(r, c) = g(r, off + c);
        t.accumulate(p, gp);
      }
      off += pc;
    }
  });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw ShapeError("gather_rows index out of range");
    for (std::size_t c = 0; c < cols; ++c) out(i, c) = av(rows[i], c);
  }
  return tape.record(std::move(out), {a}, [a, rows, cols](Tape& t, Var, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) ga(rows[i], c) += g(i, c);
  });
}

Var scale_rows(Var a, Var w) {
  Tape& tape = same_tape(a, w);
  const Tensor& av = a.value();
  const Tensor& wv = w.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (wv.rows() != rows || wv.cols() != 1) {
    throw ShapeError("scale_rows weight " + shape_str(wv.shape()) + " vs " + shape_str(av.shape()));
  }
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = av(r, c) * wv(r, 0);
  return tape.record(std::move(out), {a, w}, [a, w, rows, cols](Tape& t, Var, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& wv = w.value();
    if (a.requires_grad()) {
      Tensor ga({rows, cols});
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ga(r, c) = g(r, c) * wv(r, 0);
      t.accumulate(a, ga);
    }
    if (w.requires_grad()) {
      Tensor gw({rows, 1});
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += g(r, c) * av(r, c);
        gw(r, 0) = s;
      }
      t.accumulate(w, gw);
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& tape = *a.tape();
  Tensor out = a.value().reshaped({rows, cols});
  return tape.record(std::move(out), {a}, [a](Tape& t, Var, const Tensor& g) {
    t.accumulate(a, g.reshaped(a.value().shape()));
  });
}

Var smooth_l1(Var e) {
  Tape& tape = *e.tape();
  Tensor out = e.value();
  for (double& v : out.data()) {
    const double m = std::abs(v);
    v = m < 1.0 ? 0.5 * v * v : m - 0.5;
  }
  return tape.record(std::move(out), {e}, [e](Tape& t, Var, const Tensor& g) {
    const Tensor& ev = e.value();
    Tensor ge(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = ev[i];
      const double d = std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0);
      ge[i] = g[i] * d;
    }
    t.accumulate(e, ge);
  });
}

}  // namespace gcf::num
