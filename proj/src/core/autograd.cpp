#include "latentdub/core/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace latentdub::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(bw);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                                " vs " + b->value.shape_str());
}

// elementwise helper: y = f(x), dx += dy * dfdx(x, y)
Var unary_ew(const Var& a, double (*f)(double), double (*dfdx)(double, double)) {
  Tensor out(a->value.shape());
  const std::int64_t n = a->value.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(a->value[i]);
  return make_node(std::move(out), {a}, [f, dfdx](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& ga = a->ensure_grad();
    const std::int64_t n = nd.value.size();
    for (std::int64_t i = 0; i < n; ++i) ga[i] += nd.grad[i] * dfdx(a->value[i], nd.value[i]);
  });
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return n;
}

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

void backward(const Var& root) {
  if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
  // iterative post-order topo sort
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  std::unordered_set<Node*> on_stack_done;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params)
    if (p->grad.size() != 0) p->grad.fill(0.0);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    for (int k = 0; k < 2; ++k) {
      Var p = nd.parents[k];
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    if (nd.parents[0]->requires_grad) {
      Tensor& g = nd.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i];
    }
    if (nd.parents[1]->requires_grad) {
      Tensor& g = nd.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] -= nd.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    Var a = nd.parents[0], b = nd.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i] * a->value[i];
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * s;
  return make_node(std::move(out), {a}, [s](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + s;
  return make_node(std::move(out), {a}, [](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i];
  });
}

Var abs(const Var& a) {
  return unary_ew(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary_ew(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a, double eps) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a->value[i] + eps);
  return make_node(std::move(out), {a}, [](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.size(); ++i) {
      double y = nd.value[i];
      if (y > 0.0) g[i] += nd.grad[i] * 0.5 / y;
    }
  });
}

Var log(const Var& a) {
  return unary_ew(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, a->value[i]));
  return make_node(std::move(out), {a}, [lo, hi](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.size(); ++i) {
      double x = a->value[i];
      if (x > lo && x < hi) g[i] += nd.grad[i];
    }
  });
}

Var gelu(const Var& a) {
  return unary_ew(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Var sigmoid(const Var& a) {
  return unary_ew(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
  return unary_ew(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary_ew(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    double gy = nd.grad[0];
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

Var mean_all(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_node(Tensor::scalar(s * inv), {a}, [inv](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    double gy = nd.grad[0] * inv;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += gy;
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + a->value.shape_str() + " x " +
                                b->value.shape_str());
  const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  Tensor out({m, n});
  CMapMat A(a->value.data(), m, k), B(b->value.data(), k, n);
  MapMat(out.data(), m, n).noalias() = A * B;
  return make_node(std::move(out), {a, b}, [m, k, n](Node& nd) {
    Var a = nd.parents[0], b = nd.parents[1];
    CMapMat dY(nd.grad.data(), m, n);
    if (a->requires_grad) {
      CMapMat B(b->value.data(), k, n);
      MapMat(a->ensure_grad().data(), m, k).noalias() += dY * B.transpose();
    }
    if (b->requires_grad) {
      CMapMat A(a->value.data(), m, k);
      MapMat(b->ensure_grad().data(), k, n).noalias() += A.transpose() * dY;
    }
  });
}

Var transpose(const Var& a) {
  if (a->value.ndim() != 2) throw std::invalid_argument("transpose: need 2-d");
  const int m = a->value.dim(0), n = a->value.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
  return make_node(std::move(out), {a}, [m, n](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(j, i);
  });
}

Var slice_cols(const Var& a, int c0, int c1) {
  if (a->value.ndim() != 2 || c0 < 0 || c1 > a->value.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const int m = a->value.dim(0);
  Tensor out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a->value.at(i, j);
  return make_node(std::move(out), {a}, [m, c0, c1](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = c0; j < c1; ++j) g.at(i, j) += nd.grad.at(i, j - c0);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int m = parts[0]->value.dim(0);
  int total = 0;
  for (const auto& p : parts) {
    if (p->value.ndim() != 2 || p->value.dim(0) != m)
      throw std::invalid_argument("concat_cols: row mismatch");
    total += p->value.dim(1);
  }
  Tensor out({m, total});
  int off = 0;
  for (const auto& p : parts) {
    const int n = p->value.dim(1);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(i, off + j) = p->value.at(i, j);
    off += n;
  }
  return make_node(std::move(out), parts, [m](Node& nd) {
    int off = 0;
    for (auto& p : nd.parents) {
      const int n = p->value.dim(1);
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(i, off + j);
      }
      off += n;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int n = parts[0]->value.dim(1);
  int total = 0;
  for (const auto& p : parts) {
    if (p->value.ndim() != 2 || p->value.dim(1) != n)
      throw std::invalid_argument("concat_rows: col mismatch");
    total += p->value.dim(0);
  }
  Tensor out({total, n});
  std::int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.size(), out.data() + off);
    off += p->value.size();
  }
  return make_node(std::move(out), parts, [](Node& nd) {
    std::int64_t off = 0;
    for (auto& p : nd.parents) {
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::int64_t i = 0; i < p->value.size(); ++i) g[i] += nd.grad[off + i];
      }
      off += p->value.size();
    }
  });
}

Var softmax_rows(const Var& a, const Tensor* add_mask) {
  if (a->value.ndim() != 2) throw std::invalid_argument("softmax_rows: need 2-d");
  const int m = a->value.dim(0), n = a->value.dim(1);
  const bool mask_row = add_mask && add_mask->ndim() == 1;
  if (add_mask && !mask_row && !(add_mask->ndim() == 2 && add_mask->dim(0) == m && add_mask->dim(1) == n))
    throw std::invalid_argument("softmax_rows: mask shape");
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      double v = a->value.at(i, j) + (add_mask ? (mask_row ? (*add_mask)[j] : add_mask->at(i, j)) : 0.0);
      out.at(i, j) = v;
      mx = std::max(mx, v);
    }
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      s += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= s;
  }
  return make_node(std::move(out), {a}, [m, n](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += nd.grad.at(i, j) * nd.value.at(i, j);
      for (int j = 0; j < n; ++j)
        g.at(i, j) += nd.value.at(i, j) * (nd.grad.at(i, j) - dot);
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (x->value.ndim() != 2) throw std::invalid_argument("layer_norm_rows: need 2-d");
  const int m = x->value.dim(0), n = x->value.dim(1);
  if (gamma->value.size() != n || beta->value.size() != n)
    throw std::invalid_argument("layer_norm_rows: gamma/beta size");
  Tensor out({m, n});
  Tensor xhat({m, n});
  Tensor inv_sigma({m});
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += x->value.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = x->value.at(i, j) - mu;
      var += d * d;
    }
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (int j = 0; j < n; ++j) {
      double xh = (x->value.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = gamma->value[j] * xh + beta->value[j];
    }
  }
  auto xhat_p = std::make_shared<Tensor>(std::move(xhat));
  auto is_p = std::make_shared<Tensor>(std::move(inv_sigma));
  return make_node(std::move(out), {x, gamma, beta}, [m, n, xhat_p, is_p](Node& nd) {
    Var x = nd.parents[0], gamma = nd.parents[1], beta = nd.parents[2];
    if (gamma->requires_grad) {
      Tensor& gg = gamma->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) gg[j] += nd.grad.at(i, j) * xhat_p->at(i, j);
    }
    if (beta->requires_grad) {
      Tensor& gb = beta->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) gb[j] += nd.grad.at(i, j);
    }
    if (x->requires_grad) {
      Tensor& gx = x->ensure_grad();
      for (int i = 0; i < m; ++i) {
        double mean_g = 0.0, mean_gx = 0.0;
        for (int j = 0; j < n; ++j) {
          double gj = nd.grad.at(i, j) * gamma->value[j];
          mean_g += gj;
          mean_gx += gj * xhat_p->at(i, j);
        }
        mean_g /= n;
        mean_gx /= n;
        double is = (*is_p)[i];
        for (int j = 0; j < n; ++j) {
          double gj = nd.grad.at(i, j) * gamma->value[j];
          gx.at(i, j) += is * (gj - mean_g - xhat_p->at(i, j) * mean_gx);
        }
      }
    }
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  if (x->value.ndim() != 2) throw std::invalid_argument("l2_normalize_rows: need 2-d");
  const int m = x->value.dim(0), n = x->value.dim(1);
  Tensor out({m, n});
  Tensor norms({m});
  for (int i = 0; i < m; ++i) {
    double s = eps;
    for (int j = 0; j < n; ++j) s += x->value.at(i, j) * x->value.at(i, j);
    double nr = std::sqrt(s);
    norms[i] = nr;
    for (int j = 0; j < n; ++j) out.at(i, j) = x->value.at(i, j) / nr;
  }
  auto norms_p = std::make_shared<Tensor>(std::move(norms));
  return make_node(std::move(out), {x}, [m, n, norms_p](Node& nd) {
    Var x = nd.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (int i = 0; i < m; ++i) {
      double nr = (*norms_p)[i];
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += nd.grad.at(i, j) * x->value.at(i, j);
      for (int j = 0; j < n; ++j)
        g.at(i, j) += nd.grad.at(i, j) / nr - x->value.at(i, j) * dot / (nr * nr * nr);
    }
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  if (Tensor::count(shape) != a->value.size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out(shape, a->value.vec());
  return make_node(std::move(out), {a}, [](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i];
  });
}

namespace {

// im2col for a [C,H,W] input: columns indexed by output pixel, rows by (c,ky,kx)
void im2col(const Tensor& x, int kh, int kw, int stride, int pad_h, int pad_w, int oh, int ow,
            RowMat& cols) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  cols.resize(C * kh * kw, oh * ow);
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (c * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad_h;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad_w;
            cols(row, oy * ow + ox) =
                (iy >= 0 && iy < H && ix >= 0 && ix < W) ? x.at(c, iy, ix) : 0.0;
          }
        }
      }
}

void col2im_add(const RowMat& cols, int C, int H, int W, int kh, int kw, int stride, int pad_h,
                int pad_w, int oh, int ow, Tensor& gx) {
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const int row = (c * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad_h;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad_w;
            if (ix < 0 || ix >= W) continue;
            gx.at(c, iy, ix) += cols(row, oy * ow + ox);
          }
        }
      }
}

Var conv2d_impl(const Var& x, const Var& w, const Var& b, int stride, int pad_h, int pad_w) {
  const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
  const int OC = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  if (w->value.dim(1) != C) throw std::invalid_argument("conv2d: channel mismatch");
  if (b->value.size() != OC) throw std::invalid_argument("conv2d: bias size");
  const int oh = (H + 2 * pad_h - kh) / stride + 1;
  const int ow = (W + 2 * pad_w - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: empty output");

  auto cols = std::make_shared<RowMat>();
  im2col(x->value, kh, kw, stride, pad_h, pad_w, oh, ow, *cols);
  Tensor out({OC, oh, ow});
  CMapMat Wm(w->value.data(), OC, C * kh * kw);
  MapMat Y(out.data(), OC, oh * ow);
  Y.noalias() = Wm * (*cols);
  for (int oc = 0; oc < OC; ++oc) Y.row(oc).array() += b->value[oc];

  return make_node(std::move(out), {x, w, b},
                   [C, H, W, OC, kh, kw, stride, pad_h, pad_w, oh, ow, cols](Node& nd) {
                     Var x = nd.parents[0], w = nd.parents[1], b = nd.parents[2];
                     CMapMat dY(nd.grad.data(), OC, oh * ow);
                     if (b->requires_grad) {
                       Tensor& gb = b->ensure_grad();
                       for (int oc = 0; oc < OC; ++oc) gb[oc] += dY.row(oc).sum();
                     }
                     if (w->requires_grad) {
                       MapMat gW(w->ensure_grad().data(), OC, C * kh * kw);
                       gW.noalias() += dY * cols->transpose();
                     }
                     if (x->requires_grad) {
                       CMapMat Wm(w->value.data(), OC, C * kh * kw);
                       RowMat dcols = Wm.transpose() * dY;
                       col2im_add(dcols, C, H, W, kh, kw, stride, pad_h, pad_w, oh, ow,
                                  x->ensure_grad());
                     }
                   });
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  if (x->value.ndim() != 3 || w->value.ndim() != 4)
    throw std::invalid_argument("conv2d: expected x[C,H,W], w[OC,C,kh,kw]");
  return conv2d_impl(x, w, b, stride, pad, pad);
}

Var conv1d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  if (x->value.ndim() != 2 || w->value.ndim() != 3)
    throw std::invalid_argument("conv1d: expected x[C,L], w[OC,C,k]");
  auto x3 = reshape(x, {x->value.dim(0), 1, x->value.dim(1)});
  auto w4 = reshape(w, {w->value.dim(0), w->value.dim(1), 1, w->value.dim(2)});
  auto y = conv2d_impl(x3, w4, b, stride, /*pad_h=*/0, /*pad_w=*/pad);
  return reshape(y, {y->value.dim(0), y->value.dim(2)});
}

Var upsample2x(const Var& x) {
  if (x->value.ndim() != 3) throw std::invalid_argument("upsample2x: need [C,H,W]");
  const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
  Tensor out({C, H * 2, W * 2});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H * 2; ++y)
      for (int xx = 0; xx < W * 2; ++xx) out.at(c, y, xx) = x->value.at(c, y / 2, xx / 2);
  return make_node(std::move(out), {x}, [C, H, W](Node& nd) {
    Var x = nd.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H * 2; ++y)
        for (int xx = 0; xx < W * 2; ++xx) g.at(c, y / 2, xx / 2) += nd.grad.at(c, y, xx);
  });
}

Var concat_ch(const Var& a, const Var& b) {
  if (a->value.ndim() != 3 || b->value.ndim() != 3 || a->value.dim(1) != b->value.dim(1) ||
      a->value.dim(2) != b->value.dim(2))
    throw std::invalid_argument("concat_ch: spatial mismatch");
  const int Ca = a->value.dim(0), Cb = b->value.dim(0);
  const int H = a->value.dim(1), W = a->value.dim(2);
  Tensor out({Ca + Cb, H, W});
  std::copy(a->value.data(), a->value.data() + a->value.size(), out.data());
  std::copy(b->value.data(), b->value.data() + b->value.size(), out.data() + a->value.size());
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    Var a = nd.parents[0], b = nd.parents[1];
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (std::int64_t i = 0; i < a->value.size(); ++i) g[i] += nd.grad[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      const std::int64_t off = a->value.size();
      for (std::int64_t i = 0; i < b->value.size(); ++i) g[i] += nd.grad[off + i];
    }
  });
}

Var slice_ch(const Var& a, int c0, int c1) {
  if (a->value.ndim() != 3 || c0 < 0 || c1 > a->value.dim(0) || c0 >= c1)
    throw std::invalid_argument("slice_ch: bad range");
  const int H = a->value.dim(1), W = a->value.dim(2);
  Tensor out({c1 - c0, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  std::copy(a->value.data() + c0 * plane, a->value.data() + c1 * plane, out.data());
  return make_node(std::move(out), {a}, [c0, c1, plane](Node& nd) {
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < (c1 - c0) * plane; ++i) g[c0 * plane + i] += nd.grad[i];
  });
}

Var slice_rows(const Var& a, int y0, int y1) {
  if (a->value.ndim() != 3 || y0 < 0 || y1 > a->value.dim(1) || y0 >= y1)
    throw std::invalid_argument("slice_rows: bad range");
  const int C = a->value.dim(0), H = a->value.dim(1), W = a->value.dim(2);
  Tensor out({C, y1 - y0, W});
  for (int c = 0; c < C; ++c)
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < W; ++x) out.at(c, y - y0, x) = a->value.at(c, y, x);
  return make_node(std::move(out), {a}, [C, H, W, y0, y1](Node& nd) {
    (void)H;
    Var a = nd.parents[0];
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int y = y0; y < y1; ++y)
        for (int x = 0; x < W; ++x) g.at(c, y, x) += nd.grad.at(c, y - y0, x);
  });
}

Var global_avg_pool(const Var& x) {
  if (x->value.ndim() != 3) throw std::invalid_argument("global_avg_pool: need [C,H,W]");
  const int C = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2);
  const double inv = 1.0 / (static_cast<double>(H) * W);
  Tensor out({C});
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) s += x->value.at(c, y, xx);
    out[c] = s * inv;
  }
  return make_node(std::move(out), {x}, [C, H, W, inv](Node& nd) {
    Var x = nd.parents[0];
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (int c = 0; c < C; ++c) {
      double gy = nd.grad[c] * inv;
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) g.at(c, y, xx) += gy;
    }
  });
}

}  // namespace latentdub::ad

namespace latentdub {

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace latentdub
