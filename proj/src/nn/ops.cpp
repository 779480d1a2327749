#include "multissl/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                to_string(b.shape()));
  }
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank) {
    throw Error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                to_string(x.shape()));
  }
}

void accumulate(Node& input, const Tensor& g) {
  if (!input.requires_grad) return;
  auto& buf = input.grad_buffer();
  for (int64_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

int normalize_axis(int axis, int rank) {
  int a = axis < 0 ? rank + axis : axis;
  if (a < 0 || a >= rank) throw Error("axis " + std::to_string(axis) + " out of range");
  return a;
}

void split_axis(const Shape& s, int axis, int64_t& outer, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) {
      auto& g = self.inputs[1]->grad_buffer();
      for (int64_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data) v *= s;
  return make_node(std::move(out), {a}, [s](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw Error("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                to_string(b.shape()));
  }
  Tensor out({n, m});
  MapMat(out.ptr(), n, m).noalias() =
      ConstMapMat(a.value().ptr(), n, k) * ConstMapMat(b.value().ptr(), k, m);
  return make_node(std::move(out), {a, b}, [n, k, m](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    ConstMapMat g(self.grad.ptr(), n, m);
    if (x.requires_grad) {
      MapMat(x.grad_buffer().ptr(), n, k).noalias() += g * ConstMapMat(y.value.ptr(), k, m).transpose();
    }
    if (y.requires_grad) {
      MapMat(y.grad_buffer().ptr(), k, m).noalias() += ConstMapMat(x.value.ptr(), n, k).transpose() * g;
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const int n = a.dim(0), m = a.dim(1);
  Tensor out({m, n});
  MapMat(out.ptr(), m, n) = ConstMapMat(a.value().ptr(), n, m).transpose();
  return make_node(std::move(out), {a}, [n, m](Node& self) {
    MapMat(self.inputs[0]->grad_buffer().ptr(), n, m) += ConstMapMat(self.grad.ptr(), m, n).transpose();
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  const int n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.shape() != Shape{out_dim, in} || bias.shape() != Shape{out_dim}) {
    throw Error("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                to_string(weight.shape()) + " / bias " + to_string(bias.shape()));
  }
  // Row-by-row loops so a sample's output does not depend on the batch it
  // is computed in (stored responses are compared bit-exactly).
  Tensor out({n, out_dim});
  const double* xv = x.value().ptr();
  const double* wv = weight.value().ptr();
  for (int r = 0; r < n; ++r) {
    const double* xr = xv + static_cast<int64_t>(r) * in;
    for (int c = 0; c < out_dim; ++c) {
      const double* wr = wv + static_cast<int64_t>(c) * in;
      double acc = 0.0;
      for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out[static_cast<int64_t>(r) * out_dim + c] = acc + bias.value()[c];
    }
  }
  return make_node(std::move(out), {x, weight, bias}, [n, in, out_dim](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    ConstMapMat g(self.grad.ptr(), n, out_dim);
    if (xn.requires_grad) {
      MapMat(xn.grad_buffer().ptr(), n, in).noalias() += g * ConstMapMat(wn.value.ptr(), out_dim, in);
    }
    if (wn.requires_grad) {
      MapMat(wn.grad_buffer().ptr(), out_dim, in).noalias() +=
          g.transpose() * ConstMapMat(xn.value.ptr(), n, in);
    }
    if (bn.requires_grad) {
      auto& gb = bn.grad_buffer();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < out_dim; ++c) gb[c] += g(r, c);
      }
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != C || weight.dim(3) != K || bias.shape() != Shape{O}) {
    throw Error("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                to_string(weight.shape()));
  }
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw Error("conv2d: input " + to_string(x.shape()) + " too small");
  const int rows = C * K * K;
  const int P = Ho * Wo;

  // im2col per sample, kept for the weight gradient.
  auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * rows * P, 0.0);
  const double* xv = x.value().ptr();
  for (int n = 0; n < N; ++n) {
    double* col = cols->data() + static_cast<size_t>(n) * rows * P;
    for (int c = 0; c < C; ++c) {
      const double* plane = xv + (static_cast<size_t>(n) * C + c) * H * W;
      for (int ki = 0; ki < K; ++ki) {
        for (int kj = 0; kj < K; ++kj) {
          double* dst = col + static_cast<size_t>((c * K + ki) * K + kj) * P;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= H) continue;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * stride - pad + kj;
              if (ix >= 0 && ix < W) dst[oy * Wo + ox] = plane[iy * W + ix];
            }
          }
        }
      }
    }
  }

  Tensor out({N, O, Ho, Wo});
  ConstMapMat wmat(weight.value().ptr(), O, rows);
  for (int n = 0; n < N; ++n) {
    MapMat o(out.ptr() + static_cast<size_t>(n) * O * P, O, P);
    o.noalias() = wmat * ConstMapMat(cols->data() + static_cast<size_t>(n) * rows * P, rows, P);
    for (int c = 0; c < O; ++c) o.row(c).array() += bias.value()[c];
  }

  return make_node(std::move(out), {x, weight, bias},
                   [=](Node& self) {
                     Node& xn = *self.inputs[0];
                     Node& wn = *self.inputs[1];
                     Node& bn = *self.inputs[2];
                     ConstMapMat w(wn.value.ptr(), O, rows);
                     std::vector<double> dcol(static_cast<size_t>(rows) * P);
                     for (int n = 0; n < N; ++n) {
                       ConstMapMat g(self.grad.ptr() + static_cast<size_t>(n) * O * P, O, P);
                       ConstMapMat col(cols->data() + static_cast<size_t>(n) * rows * P, rows, P);
                       if (wn.requires_grad) {
                         MapMat(wn.grad_buffer().ptr(), O, rows).noalias() += g * col.transpose();
                       }
                       if (bn.requires_grad) {
                         auto& gb = bn.grad_buffer();
                         for (int c = 0; c < O; ++c) gb[c] += g.row(c).sum();
                       }
                       if (!xn.requires_grad) continue;
                       MapMat(dcol.data(), rows, P).noalias() = w.transpose() * g;
                       double* gx = xn.grad_buffer().ptr() + static_cast<size_t>(n) * C * H * W;
                       for (int c = 0; c < C; ++c) {
                         double* plane = gx + static_cast<size_t>(c) * H * W;
                         for (int ki = 0; ki < K; ++ki) {
                           for (int kj = 0; kj < K; ++kj) {
                             const double* src = dcol.data() + static_cast<size_t>((c * K + ki) * K + kj) * P;
                             for (int oy = 0; oy < Ho; ++oy) {
                               const int iy = oy * stride - pad + ki;
                               if (iy < 0 || iy >= H) continue;
                               for (int ox = 0; ox < Wo; ++ox) {
                                 const int ix = ox * stride - pad + kj;
                                 if (ix >= 0 && ix < W) plane[iy * W + ix] += src[oy * Wo + ox];
                               }
                             }
                           }
                         }
                       }
                     }
                   });
}

Var silu(const Var& x) {
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = xv[i] / (1.0 + std::exp(-xv[i]));
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in.value[i]));
      g[i] += self.grad[i] * s * (1.0 + in.value[i] * (1.0 - s));
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.value()[i]);
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) {
      if (in.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
  return make_node(std::move(out), {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int64_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  if (numel(shape) != x.value().size()) {
    throw Error("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  Tensor out(std::move(shape), x.value().data);
  return make_node(std::move(out), {x}, [](Node& self) { accumulate(*self.inputs[0], self.grad); });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  const int rank = parts[0].value().rank();
  axis = normalize_axis(axis, rank);
  Shape shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw Error("concat: rank mismatch");
    total += s[static_cast<size_t>(axis)];
    s[static_cast<size_t>(axis)] = shape[static_cast<size_t>(axis)];
    if (s != shape) {
      throw Error("concat: incompatible shapes " + to_string(parts[0].shape()) + " and " +
                  to_string(p.shape()));
    }
  }
  shape[static_cast<size_t>(axis)] = total;
  int64_t outer = 0, inner = 0;
  split_axis(shape, axis, outer, inner);
  Tensor out(shape);
  std::vector<int64_t> widths;
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t w = static_cast<int64_t>(p.dim(axis)) * inner;
    widths.push_back(w);
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(p.value().ptr() + o * w, w, out.ptr() + o * total * inner + offset);
    }
    offset += w;
  }
  const int64_t row = static_cast<int64_t>(total) * inner;
  return make_node(std::move(out), parts, [widths, outer, row](Node& self) {
    int64_t off = 0;
    for (size_t k = 0; k < widths.size(); ++k) {
      Node& in = *self.inputs[k];
      if (in.requires_grad) {
        auto& g = in.grad_buffer();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t i = 0; i < widths[k]; ++i) g[o * widths[k] + i] += self.grad[o * row + off + i];
        }
      }
      off += widths[k];
    }
  });
}

Var slice(const Var& x, int axis, int start, int length) {
  axis = normalize_axis(axis, x.value().rank());
  const int full = x.dim(axis);
  if (start < 0 || length < 0 || start + length > full) {
    throw Error("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                ") outside axis of size " + std::to_string(full));
  }
  int64_t outer = 0, inner = 0;
  split_axis(x.shape(), axis, outer, inner);
  Shape shape = x.shape();
  shape[static_cast<size_t>(axis)] = length;
  Tensor out(shape);
  const int64_t w = static_cast<int64_t>(length) * inner;
  const int64_t src_row = static_cast<int64_t>(full) * inner;
  const int64_t off = static_cast<int64_t>(start) * inner;
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(x.value().ptr() + o * src_row + off, w, out.ptr() + o * w);
  }
  return make_node(std::move(out), {x}, [=](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < w; ++i) g[o * src_row + off + i] += self.grad[o * w + i];
    }
  });
}

Var mean_axis(const Var& x, int axis) {
  axis = normalize_axis(axis, x.value().rank());
  int64_t outer = 0, inner = 0;
  split_axis(x.shape(), axis, outer, inner);
  const int len = x.dim(axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  Tensor out(shape, 0.0);
  const double inv = 1.0 / len;
  const auto& xv = x.value();
  for (int64_t o = 0; o < outer; ++o) {
    for (int a = 0; a < len; ++a) {
      const double* src = xv.ptr() + (o * len + a) * inner;
      double* dst = out.ptr() + o * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out.data) v *= inv;
  return make_node(std::move(out), {x}, [=](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int64_t o = 0; o < outer; ++o) {
      for (int a = 0; a < len; ++a) {
        for (int64_t i = 0; i < inner; ++i) g[(o * len + a) * inner + i] += inv * self.grad[o * inner + i];
      }
    }
  });
}

Var spatial_mean(const Var& x) {
  require_rank(x, 4, "spatial_mean");
  return mean_axis(reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}), 2);
}

Var channels_last(const Var& x) {
  require_rank(x, 4, "channels_last");
  const int N = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Tensor out({N * S, C});
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* src = x.value().ptr() + (static_cast<int64_t>(n) * C + c) * S;
      for (int s = 0; s < S; ++s) out[(static_cast<int64_t>(n) * S + s) * C + c] = src[s];
    }
  }
  return make_node(std::move(out), {x}, [N, C, S](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        for (int s = 0; s < S; ++s) {
          g[(static_cast<int64_t>(n) * C + c) * S + s] += self.grad[(static_cast<int64_t>(n) * S + s) * C + c];
        }
      }
    }
  });
}

Var upsample_nearest(const Var& x, int height, int width) {
  require_rank(x, 4, "upsample_nearest");
  const int N = x.dim(0), C = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<int64_t> src(static_cast<size_t>(height) * width);
  for (int i = 0; i < height; ++i) {
    const int si = static_cast<int>(static_cast<int64_t>(i) * h / height);
    for (int j = 0; j < width; ++j) {
      const int sj = static_cast<int>(static_cast<int64_t>(j) * w / width);
      src[static_cast<size_t>(i) * width + j] = static_cast<int64_t>(si) * w + sj;
    }
  }
  Tensor out({N, C, height, width});
  const int64_t in_plane = static_cast<int64_t>(h) * w;
  const int64_t out_plane = static_cast<int64_t>(height) * width;
  for (int64_t p = 0; p < static_cast<int64_t>(N) * C; ++p) {
    for (int64_t k = 0; k < out_plane; ++k) out[p * out_plane + k] = x.value()[p * in_plane + src[k]];
  }
  return make_node(std::move(out), {x}, [src, N, C, in_plane, out_plane](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int64_t p = 0; p < static_cast<int64_t>(N) * C; ++p) {
      for (int64_t k = 0; k < out_plane; ++k) g[p * in_plane + src[k]] += self.grad[p * out_plane + k];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return make_node(Tensor({1}, s), {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (auto& v : g.data) v += self.grad[0];
  });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var l2_normalize(const Var& x) {
  require_rank(x, 2, "l2_normalize");
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = x.value();
  std::vector<double> norms(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    double ss = 0.0;
    for (int c = 0; c < d; ++c) ss += out[r * d + c] * out[r * d + c];
    norms[static_cast<size_t>(r)] = std::max(std::sqrt(ss), 1e-12);
    for (int c = 0; c < d; ++c) out[r * d + c] /= norms[static_cast<size_t>(r)];
  }
  return make_node(std::move(out), {x}, [n, d, norms](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int r = 0; r < n; ++r) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += self.grad[r * d + c] * self.value[r * d + c];
      for (int c = 0; c < d; ++c) {
        g[r * d + c] += (self.grad[r * d + c] - dot * self.value[r * d + c]) / norms[static_cast<size_t>(r)];
      }
    }
  });
}

Var row_dot(const Var& a, const Var& b) {
  require_same(a, b, "row_dot");
  require_rank(a, 2, "row_dot");
  const int n = a.dim(0), d = a.dim(1);
  Tensor out({n}, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) out[r] += a.value()[r * d + c] * b.value()[r * d + c];
  }
  return make_node(std::move(out), {a, b}, [n, d](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < d; ++c) {
        if (x.requires_grad) x.grad_buffer()[r * d + c] += self.grad[r] * y.value[r * d + c];
        if (y.requires_grad) y.grad_buffer()[r * d + c] += self.grad[r] * x.value[r * d + c];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape);
  for (int r = 0; r < n; ++r) {
    double mx = -INFINITY;
    for (int c = 0; c < k; ++c) mx = std::max(mx, logits[r * k + c] / temperature);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += (p[r * k + c] = std::exp(logits[r * k + c] / temperature - mx));
    for (int c = 0; c < k; ++c) p[r * k + c] /= z;
  }
  return p;
}

Var log_softmax(const Var& logits) {
  require_rank(logits, 2, "log_softmax");
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (int r = 0; r < n; ++r) {
    const double* row = logits.value().ptr() + static_cast<int64_t>(r) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(row[c] - mx);
    const double lz = mx + std::log(z);
    for (int c = 0; c < k; ++c) out[r * k + c] = row[c] - lz;
  }
  return make_node(std::move(out), {logits}, [n, k](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int r = 0; r < n; ++r) {
      double gs = 0.0;
      for (int c = 0; c < k; ++c) gs += self.grad[r * k + c];
      for (int c = 0; c < k; ++c) g[r * k + c] += self.grad[r * k + c] - std::exp(self.value[r * k + c]) * gs;
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw Error("cross_entropy: label count mismatch");
  Tensor pick({n, k}, 0.0);
  for (int r = 0; r < n; ++r) {
    const int y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= k) {
      throw Error("cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
    }
    pick[r * k + y] = -1.0 / n;
  }
  return sum(mul(log_softmax(logits), Var::constant(std::move(pick))));
}

Var soft_cross_entropy(const Var& logits, const Tensor& target_probs, double temperature) {
  require_shape(target_probs, logits.shape(), "soft_cross_entropy");
  Tensor w = target_probs;
  const double inv_n = 1.0 / logits.dim(0);
  for (auto& v : w.data) v *= -inv_n;
  return sum(mul(log_softmax(scale(logits, 1.0 / temperature)), Var::constant(std::move(w))));
}

Var mse(const Var& pred, const Tensor& target) {
  require_shape(target, pred.shape(), "mse");
  Var diff = sub(pred, Var::constant(target));
  return mean(mul(diff, diff));
}

double huber_value(double error, double kappa) {
  const double a = std::abs(error);
  return a <= kappa ? 0.5 * error * error : kappa * (a - 0.5 * kappa);
}

Var huber(const Var& pred, const Tensor& target, double kappa) {
  require_shape(target, pred.shape(), "huber");
  if (!(kappa > 0.0)) throw Error("huber: threshold must be positive");
  const int64_t n = pred.value().size();
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) total += huber_value(pred.value()[i] - target[i], kappa);
  Tensor tgt = target;
  return make_node(Tensor({1}, total / static_cast<double>(n)), {pred},
                   [tgt, kappa, n](Node& self) {
                     Node& p = *self.inputs[0];
                     auto& g = p.grad_buffer();
                     for (int64_t i = 0; i < n; ++i) {
                       const double e = p.value[i] - tgt[i];
                       const double de = std::abs(e) <= kappa ? e : (e > 0 ? kappa : -kappa);
                       g[i] += self.grad[0] * de / static_cast<double>(n);
                     }
                   });
}

}  // namespace multissl::nn
