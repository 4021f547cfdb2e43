#include "qgen/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <string>

#include "qgen/error.hpp"

namespace qgen::ad {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

std::string mismatch(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
         shape_str(b);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(mismatch(op, a.shape(), b.shape()));
}

void check_rank(const char* op, const Tensor& t, std::size_t r) {
  if (t.rank() != r) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) +
                     ", got " + shape_str(t.shape()));
  }
}

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (Tape::current() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(Tape::BackwardFn fn, const Tensor& out) {
  Tape::current()->record(out.shared_node(), std::move(fn));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) + b.at(i);
  bool rg = tracing({&a, &b});
  Tensor out = Tensor::make(a.shape(), std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), bn = b.shared_node()](Tape& t,
                                                     const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
          }
          if (bn->requires_grad) {
            auto& gb = t.adj(*bn);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
          }
        },
        out);
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) - b.at(i);
  bool rg = tracing({&a, &b});
  Tensor out = Tensor::make(a.shape(), std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), bn = b.shared_node()](Tape& t,
                                                     const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
          }
          if (bn->requires_grad) {
            auto& gb = t.adj(*bn);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
          }
        },
        out);
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) * b.at(i);
  bool rg = tracing({&a, &b});
  Tensor out = Tensor::make(a.shape(), std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), bn = b.shared_node()](Tape& t,
                                                     const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
          }
          if (bn->requires_grad) {
            auto& gb = t.adj(*bn);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
          }
        },
        out);
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) * factor;
  bool rg = tracing({&a});
  Tensor out = Tensor::make(a.shape(), std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), factor](Tape& t, const std::vector<double>& g) {
          auto& ga = t.adj(*an);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
        },
        out);
  }
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor smul(const Tensor& s, const Tensor& x) {
  if (s.size() != 1) {
    throw ShapeError("smul: gate must hold one element, got " +
                     shape_str(s.shape()));
  }
  double sv = s.at(0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sv * x.at(i);
  bool rg = tracing({&s, &x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [sn = s.shared_node(), xn = x.shared_node()](Tape& t,
                                                     const std::vector<double>& g) {
          if (sn->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xn->data[i];
            t.adj(*sn)[0] += acc;
          }
          if (xn->requires_grad) {
            auto& gx = t.adj(*xn);
            double sv2 = sn->data[0];
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv2;
          }
        },
        out);
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x.at(i)));
  bool rg = tracing({&x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), on = out.shared_node()](
            Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < g.size(); ++i) {
            double yi = on->data[i];
            gx[i] += g[i] * yi * (1.0 - yi);
          }
        },
        out);
  }
  return out;
}

Tensor tanh_op(const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x.at(i));
  bool rg = tracing({&x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), on = out.shared_node()](
            Tape& t, const std::vector<double>& g) {
          double skew = tanh_adjoint_skew();
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < g.size(); ++i) {
            double yi = on->data[i];
            gx[i] += skew * g[i] * (1.0 - yi * yi);
          }
        },
        out);
  }
  return out;
}

Tensor log_op(const Tensor& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(x.at(i));
  bool rg = tracing({&x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node()](Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xn->data[i];
        },
        out);
  }
  return out;
}

Tensor clamp_min(const Tensor& x, double floor) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(x.at(i), floor);
  bool rg = tracing({&x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), floor](Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (xn->data[i] > floor) gx[i] += g[i];
          }
        },
        out);
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.at(i);
  bool rg = tracing({&x});
  Tensor out = Tensor::make({}, {acc}, rg);
  if (rg) {
    record(
        [xn = x.shared_node()](Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
        },
        out);
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ContractError("mean: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.at(i);
  double n = static_cast<double>(x.size());
  bool rg = tracing({&x});
  Tensor out = Tensor::make({}, {acc / n}, rg);
  if (rg) {
    record(
        [xn = x.shared_node(), n](Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] / n;
        },
        out);
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  check_same_shape("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i) * b.at(i);
  bool rg = tracing({&a, &b});
  Tensor out = Tensor::make({}, {acc}, rg);
  if (rg) {
    record(
        [an = a.shared_node(), bn = b.shared_node()](Tape& t,
                                                     const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * bn->data[i];
          }
          if (bn->requires_grad) {
            auto& gb = t.adj(*bn);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * an->data[i];
          }
        },
        out);
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2);
  check_rank("matmul", b, 2);
  if (a.cols() != b.rows()) throw ShapeError(mismatch("matmul", a.shape(), b.shape()));
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> y(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += av * b.at(p, j);
    }
  }
  bool rg = tracing({&a, &b});
  Tensor out = Tensor::make({m, n}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), bn = b.shared_node(), m, k, n](
            Tape& t, const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                  acc += g[i * n + j] * bn->data[p * n + j];
                }
                ga[i * k + p] += acc;
              }
            }
          }
          if (bn->requires_grad) {
            auto& gb = t.adj(*bn);
            for (std::size_t p = 0; p < k; ++p) {
              for (std::size_t i = 0; i < m; ++i) {
                double av = an->data[i * k + p];
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                  gb[p * n + j] += av * g[i * n + j];
                }
              }
            }
          }
        },
        out);
  }
  return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  check_rank("matvec", a, 2);
  check_rank("matvec", x, 1);
  if (a.cols() != x.size()) throw ShapeError(mismatch("matvec", a.shape(), x.shape()));
  std::size_t m = a.rows(), k = a.cols();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += a.at(i, j) * x.at(j);
    y[i] = acc;
  }
  bool rg = tracing({&a, &x});
  Tensor out = Tensor::make({m}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), xn = x.shared_node(), m, k](
            Tape& t, const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < k; ++j) {
                ga[i * k + j] += g[i] * xn->data[j];
              }
            }
          }
          if (xn->requires_grad) {
            auto& gx = t.adj(*xn);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < k; ++j) {
                gx[j] += g[i] * an->data[i * k + j];
              }
            }
          }
        },
        out);
  }
  return out;
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
  check_rank("vecmat", x, 1);
  check_rank("vecmat", a, 2);
  if (x.size() != a.rows()) throw ShapeError(mismatch("vecmat", x.shape(), a.shape()));
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double xv = x.at(i);
    if (xv == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) y[j] += xv * a.at(i, j);
  }
  bool rg = tracing({&x, &a});
  Tensor out = Tensor::make({n}, std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), an = a.shared_node(), m, n](
            Tape& t, const std::vector<double>& g) {
          if (xn->requires_grad) {
            auto& gx = t.adj(*xn);
            for (std::size_t i = 0; i < m; ++i) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[j] * an->data[i * n + j];
              gx[i] += acc;
            }
          }
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < m; ++i) {
              double xv = xn->data[i];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += xv * g[j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check_rank("transpose", a, 2);
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = a.at(i, j);
  }
  bool rg = tracing({&a});
  Tensor out = Tensor::make({n, m}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), m, n](Tape& t, const std::vector<double>& g) {
          auto& ga = t.adj(*an);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
          }
        },
        out);
  }
  return out;
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  return add(matvec(w, x), b);
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  check_rank("add_rowvec", a, 2);
  check_rank("add_rowvec", v, 1);
  if (a.cols() != v.size()) {
    throw ShapeError(mismatch("add_rowvec", a.shape(), v.shape()));
  }
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = a.at(i, j) + v.at(j);
  }
  bool rg = tracing({&a, &v});
  Tensor out = Tensor::make({m, n}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), vn = v.shared_node(), m, n](
            Tape& t, const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
          }
          if (vn->requires_grad) {
            auto& gv = t.adj(*vn);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) gv[j] += g[i * n + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
  check_rank("mul_rowvec", a, 2);
  check_rank("mul_rowvec", v, 1);
  if (a.cols() != v.size()) {
    throw ShapeError(mismatch("mul_rowvec", a.shape(), v.shape()));
  }
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = a.at(i, j) * v.at(j);
  }
  bool rg = tracing({&a, &v});
  Tensor out = Tensor::make({m, n}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), vn = v.shared_node(), m, n](
            Tape& t, const std::vector<double>& g) {
          if (an->requires_grad) {
            auto& ga = t.adj(*an);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                ga[i * n + j] += g[i * n + j] * vn->data[j];
              }
            }
          }
          if (vn->requires_grad) {
            auto& gv = t.adj(*vn);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                gv[j] += g[i * n + j] * an->data[i * n + j];
              }
            }
          }
        },
        out);
  }
  return out;
}

Tensor outer_add(const Tensor& u, const Tensor& v) {
  check_rank("outer_add", u, 1);
  check_rank("outer_add", v, 1);
  std::size_t m = u.size(), n = v.size();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = u.at(i) + v.at(j);
  }
  bool rg = tracing({&u, &v});
  Tensor out = Tensor::make({m, n}, std::move(y), rg);
  if (rg) {
    record(
        [un = u.shared_node(), vn = v.shared_node(), m, n](
            Tape& t, const std::vector<double>& g) {
          if (un->requires_grad) {
            auto& gu = t.adj(*un);
            for (std::size_t i = 0; i < m; ++i) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j];
              gu[i] += acc;
            }
          }
          if (vn->requires_grad) {
            auto& gv = t.adj(*vn);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) gv[j] += g[i * n + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  std::size_t rank = parts.front().rank();
  if (rank != 1 && rank != 2) {
    throw ShapeError("concat: expected rank 1 or 2, got " +
                     shape_str(parts.front().shape()));
  }
  if (axis >= rank) {
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(parts.front().shape()));
  }
  for (const Tensor& p : parts) {
    if (p.rank() != rank) {
      throw ShapeError(mismatch("concat", parts.front().shape(), p.shape()));
    }
    if (rank == 2) {
      std::size_t shared = axis == 0 ? 1 : 0;
      if (p.extent(shared) != parts.front().extent(shared)) {
        throw ShapeError(mismatch("concat", parts.front().shape(), p.shape()));
      }
    }
  }

  bool rg = false;
  if (Tape::current() != nullptr) {
    for (const Tensor& p : parts) rg = rg || p.requires_grad();
  }

  Tensor out;
  if (rank == 1) {
    std::size_t total = 0;
    for (const Tensor& p : parts) total += p.size();
    std::vector<double> y;
    y.reserve(total);
    for (const Tensor& p : parts) y.insert(y.end(), p.data().begin(), p.data().end());
    out = Tensor::make({total}, std::move(y), rg);
    if (rg) {
      std::vector<NodePtr> nodes;
      nodes.reserve(parts.size());
      for (const Tensor& p : parts) nodes.push_back(p.shared_node());
      record(
          [nodes](Tape& t, const std::vector<double>& g) {
            std::size_t off = 0;
            for (const NodePtr& n : nodes) {
              std::size_t len = n->data.size();
              if (n->requires_grad) {
                auto& gp = t.adj(*n);
                for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
              }
              off += len;
            }
          },
          out);
    }
    return out;
  }

  if (axis == 0) {
    std::size_t cols = parts.front().cols();
    std::size_t total_rows = 0;
    for (const Tensor& p : parts) total_rows += p.rows();
    std::vector<double> y;
    y.reserve(total_rows * cols);
    for (const Tensor& p : parts) y.insert(y.end(), p.data().begin(), p.data().end());
    out = Tensor::make({total_rows, cols}, std::move(y), rg);
    if (rg) {
      std::vector<NodePtr> nodes;
      nodes.reserve(parts.size());
      for (const Tensor& p : parts) nodes.push_back(p.shared_node());
      record(
          [nodes](Tape& t, const std::vector<double>& g) {
            std::size_t off = 0;
            for (const NodePtr& n : nodes) {
              std::size_t len = n->data.size();
              if (n->requires_grad) {
                auto& gp = t.adj(*n);
                for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
              }
              off += len;
            }
          },
          out);
    }
    return out;
  }

  // axis == 1: rows stay aligned, columns are laid side by side.
  std::size_t rows = parts.front().rows();
  std::size_t total_cols = 0;
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const Tensor& p : parts) {
    widths.push_back(p.cols());
    total_cols += p.cols();
  }
  std::vector<double> y(rows * total_cols);
  std::size_t col_off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& p = parts[k];
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < widths[k]; ++j) {
        y[i * total_cols + col_off + j] = p.at(i, j);
      }
    }
    col_off += widths[k];
  }
  out = Tensor::make({rows, total_cols}, std::move(y), rg);
  if (rg) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.shared_node());
    record(
        [nodes, widths, rows, total_cols](Tape& t, const std::vector<double>& g) {
          std::size_t off = 0;
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            const NodePtr& n = nodes[k];
            if (n->requires_grad) {
              auto& gp = t.adj(*n);
              for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < widths[k]; ++j) {
                  gp[i * widths[k] + j] += g[i * total_cols + off + j];
                }
              }
            }
            off += widths[k];
          }
        },
        out);
  }
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no inputs");
  std::size_t n = rows.front().size();
  for (const Tensor& r : rows) {
    check_rank("stack_rows", r, 1);
    if (r.size() != n) {
      throw ShapeError(mismatch("stack_rows", rows.front().shape(), r.shape()));
    }
  }
  std::size_t m = rows.size();
  std::vector<double> y;
  y.reserve(m * n);
  bool rg = false;
  if (Tape::current() != nullptr) {
    for (const Tensor& r : rows) rg = rg || r.requires_grad();
  }
  for (const Tensor& r : rows) y.insert(y.end(), r.data().begin(), r.data().end());
  Tensor out = Tensor::make({m, n}, std::move(y), rg);
  if (rg) {
    std::vector<NodePtr> nodes;
    nodes.reserve(m);
    for (const Tensor& r : rows) nodes.push_back(r.shared_node());
    record(
        [nodes, n](Tape& t, const std::vector<double>& g) {
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!nodes[i]->requires_grad) continue;
            auto& gr = t.adj(*nodes[i]);
            for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
          }
        },
        out);
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t start, std::size_t len) {
  check_rank("slice", x, 1);
  if (start + len > x.size()) {
    throw IndexError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds length " +
                     std::to_string(x.size()));
  }
  std::vector<double> y(x.data().begin() + static_cast<std::ptrdiff_t>(start),
                        x.data().begin() + static_cast<std::ptrdiff_t>(start + len));
  bool rg = tracing({&x});
  Tensor out = Tensor::make({len}, std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), start](Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (std::size_t i = 0; i < g.size(); ++i) gx[start + i] += g[i];
        },
        out);
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
  check_rank("gather_rows", a, 2);
  std::size_t m = a.rows(), n = a.cols();
  for (std::size_t idx : indices) {
    if (idx >= m) {
      throw IndexError("gather_rows: row " + std::to_string(idx) +
                       " out of range for " + shape_str(a.shape()));
    }
  }
  std::vector<double> y(indices.size() * n);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const double* src = a.data().data() + indices[r] * n;
    std::copy(src, src + n, y.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  bool rg = tracing({&a});
  Tensor out = Tensor::make({indices.size(), n}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), indices, n](Tape& t, const std::vector<double>& g) {
          auto& ga = t.adj(*an);
          for (std::size_t r = 0; r < indices.size(); ++r) {
            for (std::size_t j = 0; j < n; ++j) {
              ga[indices[r] * n + j] += g[r * n + j];
            }
          }
        },
        out);
  }
  return out;
}

Tensor row(const Tensor& a, std::size_t i) {
  check_rank("row", a, 2);
  if (i >= a.rows()) {
    throw IndexError("row: index " + std::to_string(i) + " out of range for " +
                     shape_str(a.shape()));
  }
  std::size_t n = a.cols();
  std::vector<double> y(a.data().begin() + static_cast<std::ptrdiff_t>(i * n),
                        a.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  bool rg = tracing({&a});
  Tensor out = Tensor::make({n}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), i, n](Tape& t, const std::vector<double>& g) {
          auto& ga = t.adj(*an);
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
        },
        out);
  }
  return out;
}

Tensor pick(const Tensor& x, std::size_t i) {
  check_rank("pick", x, 1);
  if (i >= x.size()) {
    throw IndexError("pick: index " + std::to_string(i) + " out of range for " +
                     shape_str(x.shape()));
  }
  bool rg = tracing({&x});
  Tensor out = Tensor::make({}, {x.at(i)}, rg);
  if (rg) {
    record(
        [xn = x.shared_node(), i](Tape& t, const std::vector<double>& g) {
          t.adj(*xn)[i] += g[0];
        },
        out);
  }
  return out;
}

Tensor scatter_sum(const Tensor& values, const std::vector<std::size_t>& indices,
                   std::size_t out_size) {
  check_rank("scatter_sum", values, 1);
  if (values.size() != indices.size()) {
    throw ShapeError("scatter_sum: " + std::to_string(values.size()) +
                     " values but " + std::to_string(indices.size()) + " indices");
  }
  for (std::size_t idx : indices) {
    if (idx >= out_size) {
      throw IndexError("scatter_sum: target " + std::to_string(idx) +
                       " out of range for output length " +
                       std::to_string(out_size));
    }
  }
  std::vector<double> y(out_size, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) y[indices[i]] += values.at(i);
  bool rg = tracing({&values});
  Tensor out = Tensor::make({out_size}, std::move(y), rg);
  if (rg) {
    record(
        [vn = values.shared_node(), indices](Tape& t, const std::vector<double>& g) {
          auto& gv = t.adj(*vn);
          for (std::size_t i = 0; i < indices.size(); ++i) gv[i] += g[indices[i]];
        },
        out);
  }
  return out;
}

namespace {

// One normalized slice of a (possibly masked) softmax. Walks `count` entries
// starting at `base`, consecutive entries `stride` apart. Masked entries are
// written as exact zeros and never touch the exponentials.
void softmax_slice(const std::vector<double>& x, const std::vector<double>* mask,
                   std::size_t base, std::size_t stride, std::size_t count,
                   std::vector<double>& y) {
  double hi = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = base + k * stride;
    bool keep = mask == nullptr || (*mask)[i] != 0.0;
    if (!keep) continue;
    if (!any || x[i] > hi) hi = x[i];
    any = true;
  }
  if (!any) throw MaskError("softmax: every entry of a slice is masked out");
  double denom = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = base + k * stride;
    bool keep = mask == nullptr || (*mask)[i] != 0.0;
    y[i] = keep ? std::exp(x[i] - hi) : 0.0;
    denom += y[i];
  }
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = base + k * stride;
    y[i] /= denom;
  }
}

void softmax_slice_backward(const std::vector<double>& y,
                            const std::vector<double>& g, std::size_t base,
                            std::size_t stride, std::size_t count,
                            std::vector<double>& gx) {
  double pivot = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = base + k * stride;
    pivot += y[i] * g[i];
  }
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = base + k * stride;
    gx[i] += y[i] * (g[i] - pivot);
  }
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis,
               const std::optional<Tensor>& mask) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("softmax: expected rank 1 or 2, got " + shape_str(x.shape()));
  }
  if (mask.has_value() && mask->shape() != x.shape()) {
    throw ShapeError(mismatch("softmax mask", x.shape(), mask->shape()));
  }
  if (x.rank() == 2 && axis > 1) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(x.shape()));
  }
  const std::vector<double>* mdata = mask.has_value() ? &mask->data() : nullptr;
  std::vector<double> y(x.size());

  // Slice geometry: (base, stride, count) triples covering the tensor.
  std::vector<std::array<std::size_t, 3>> slices;
  if (x.rank() == 1) {
    slices.push_back({0, 1, x.size()});
  } else if (axis == 1) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      slices.push_back({i * x.cols(), 1, x.cols()});
    }
  } else {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      slices.push_back({j, x.cols(), x.rows()});
    }
  }
  for (const auto& s : slices) softmax_slice(x.data(), mdata, s[0], s[1], s[2], y);

  bool rg = tracing({&x});
  Tensor out = Tensor::make(x.shape(), std::move(y), rg);
  if (rg) {
    record(
        [xn = x.shared_node(), on = out.shared_node(), slices](
            Tape& t, const std::vector<double>& g) {
          auto& gx = t.adj(*xn);
          for (const auto& s : slices) {
            softmax_slice_backward(on->data, g, s[0], s[1], s[2], gx);
          }
        },
        out);
  }
  return out;
}

Tensor rowmax(const Tensor& a, const std::optional<Tensor>& mask) {
  check_rank("rowmax", a, 2);
  if (mask.has_value() && mask->shape() != a.shape()) {
    throw ShapeError(mismatch("rowmax mask", a.shape(), mask->shape()));
  }
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m);
  std::vector<std::size_t> argmax(m);
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    double hi = 0.0;
    std::size_t at = 0;
    for (std::size_t j = 0; j < n; ++j) {
      bool keep = !mask.has_value() || mask->at(i, j) != 0.0;
      if (!keep) continue;
      if (!any || a.at(i, j) > hi) {
        hi = a.at(i, j);
        at = j;
      }
      any = true;
    }
    if (!any) throw MaskError("rowmax: every entry of row " + std::to_string(i) +
                              " is masked out");
    y[i] = hi;
    argmax[i] = at;
  }
  bool rg = tracing({&a});
  Tensor out = Tensor::make({m}, std::move(y), rg);
  if (rg) {
    record(
        [an = a.shared_node(), argmax, n](Tape& t, const std::vector<double>& g) {
          auto& ga = t.adj(*an);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i * n + argmax[i]] += g[i];
          }
        },
        out);
  }
  return out;
}

}  // namespace qgen::ad
