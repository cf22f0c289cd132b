#include "l2l/graph.hpp"

#include <algorithm>
#include <cmath>

#include "l2l/error.hpp"
#include "l2l/kernels.hpp"

namespace l2l {
namespace {

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// col[(c*k + ki)*k + kj][oh*wd + ow] = src[c][oh*s - p + ki][ow*s - p + kj]
void im2col(const double* src, std::size_t channels, std::size_t hs, std::size_t ws,
            std::size_t k, std::size_t stride, std::size_t pad, std::size_t hd,
            std::size_t wd, double* col) {
  const std::size_t cols = hd * wd;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t oh = 0; oh < hd; ++oh) {
          const long ih = static_cast<long>(oh * stride + ki) - static_cast<long>(pad);
          for (std::size_t ow = 0; ow < wd; ++ow) {
            const long iw = static_cast<long>(ow * stride + kj) - static_cast<long>(pad);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<long>(hs) &&
                                iw < static_cast<long>(ws);
            row[oh * wd + ow] = inside ? src[(c * hs + ih) * ws + iw] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col back onto dst.
void col2im(const double* col, std::size_t channels, std::size_t hs, std::size_t ws,
            std::size_t k, std::size_t stride, std::size_t pad, std::size_t hd,
            std::size_t wd, double* dst) {
  const std::size_t cols = hd * wd;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t oh = 0; oh < hd; ++oh) {
          const long ih = static_cast<long>(oh * stride + ki) - static_cast<long>(pad);
          if (ih < 0 || ih >= static_cast<long>(hs)) continue;
          for (std::size_t ow = 0; ow < wd; ++ow) {
            const long iw = static_cast<long>(ow * stride + kj) - static_cast<long>(pad);
            if (iw < 0 || iw >= static_cast<long>(ws)) continue;
            dst[(c * hs + ih) * ws + iw] += row[oh * wd + ow];
          }
        }
      }
    }
  }
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// bookkeeping

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("graph: unknown variable id");
  return nodes_[v.id];
}

const Tensor& Graph::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::value(Var v) const {
  node(v);
  return val(v.id);
}

bool Graph::requires_grad(Var v) const { return node(v).needs_grad; }

std::vector<double> Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return std::vector<double>(val(v.id).size(), 0.0);
  return n.grad;
}

double* Graph::acc(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(val(id).size(), 0.0);
  return n.grad.data();
}

void Graph::fail(const char* op, const std::string& msg) const {
  throw Error("graph node #" + std::to_string(nodes_.size()) + " (" + op + "): " + msg);
}

Var Graph::push(const char* op, std::vector<std::size_t> inputs, Tensor value,
                std::function<void(Graph&, std::size_t)> reverse) {
  Node n;
  n.op = op;
  for (std::size_t i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.needs_grad) n.reverse = std::move(reverse);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor t) {
  Node n;
  n.op = "constant";
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::input(Tensor t) {
  Node n;
  n.op = "input";
  n.value = std::move(t);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::param(Tensor& t) {
  Node n;
  n.op = "param";
  n.external = &t;
  if (t.requires_grad) {
    n.needs_grad = true;
    n.sink = &t;
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::frozen(const Tensor& t) {
  Node n;
  n.op = "frozen";
  n.external = &t;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  const Node& ln = node(loss);
  if (val(loss.id).size() != 1) {
    throw Error("graph: backward() needs a scalar loss, got shape " +
                shape_str(val(loss.id).shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!ln.needs_grad) return;
  nodes_[loss.id].grad.assign(1, 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.sink) {
      auto& g = n.sink->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.reverse) n.reverse(*this, id);
  }
}

// ---------------------------------------------------------------------------
// affine and convolution

Var Graph::dense(Var x, Var w, Var b) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& Bv = value(b);
  if (X.rank() != 2 || W.rank() != 2 || X.dim(1) != W.dim(0) || Bv.size() != W.dim(1)) {
    fail("dense", "input " + shape_str(X.shape()) + ", weight " + shape_str(W.shape()) +
                      ", bias " + shape_str(Bv.shape()));
  }
  const std::size_t rows = X.dim(0), in = W.dim(0), out = W.dim(1);
  Tensor Y({rows, out});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(Bv.data().begin(), Bv.data().end(), Y.data().begin() + r * out);
  kernels::gemm_acc(rows, out, in, X.data().data(), W.data().data(), Y.data().data());
  return push("dense", {x.id, w.id, b.id}, std::move(Y),
              [rows, in, out](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const double* dy = n.grad.data();
                const Tensor& Xv = g.val(n.inputs[0]);
                const Tensor& Wv = g.val(n.inputs[1]);
                if (double* dx = g.acc(n.inputs[0])) {
                  std::vector<double> wt(in * out);
                  kernels::transpose(in, out, Wv.data().data(), wt.data());
                  kernels::gemm_acc(rows, in, out, dy, wt.data(), dx);
                }
                if (double* dw = g.acc(n.inputs[1])) {
                  std::vector<double> xt(in * rows);
                  kernels::transpose(rows, in, Xv.data().data(), xt.data());
                  kernels::gemm_acc(in, out, rows, xt.data(), dy, dw);
                }
                if (double* db = g.acc(n.inputs[2])) {
                  for (std::size_t r = 0; r < rows; ++r) kernels::axpy(out, 1.0, dy + r * out, db);
                }
              });
}

Var Graph::conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& Bv = value(b);
  if (X.rank() != 4 || W.rank() != 4 || W.dim(1) != X.dim(1) || W.dim(2) != W.dim(3) ||
      Bv.size() != W.dim(0) || stride == 0) {
    fail("conv2d", "input " + shape_str(X.shape()) + ", weight " + shape_str(W.shape()) +
                       ", bias " + shape_str(Bv.shape()));
  }
  const std::size_t batch = X.dim(0), ci = X.dim(1), h = X.dim(2), wd = X.dim(3);
  const std::size_t co = W.dim(0), k = W.dim(2);
  if (h + 2 * pad < k || wd + 2 * pad < k) fail("conv2d", "kernel larger than padded input");
  const std::size_t ho = conv_out_extent(h, k, stride, pad);
  const std::size_t wo = conv_out_extent(wd, k, stride, pad);
  const std::size_t kk = ci * k * k, hw = ho * wo;
  Tensor Y({batch, co, ho, wo});
  std::vector<double> col(kk * hw);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    double* yb = Y.data().data() + bi * co * hw;
    for (std::size_t c = 0; c < co; ++c) std::fill(yb + c * hw, yb + (c + 1) * hw, Bv[c]);
    im2col(X.data().data() + bi * ci * h * wd, ci, h, wd, k, stride, pad, ho, wo, col.data());
    kernels::gemm_acc(co, hw, kk, W.data().data(), col.data(), yb);
  }
  return push(
      "conv2d", {x.id, w.id, b.id}, std::move(Y),
      [=](Graph& g, std::size_t self) {
        const Node& n = g.nodes_[self];
        const Tensor& Xv = g.val(n.inputs[0]);
        const Tensor& Wv = g.val(n.inputs[1]);
        double* dx = g.acc(n.inputs[0]);
        double* dw = g.acc(n.inputs[1]);
        double* db = g.acc(n.inputs[2]);
        std::vector<double> wt, cols(kk * hw), colt, dcol;
        if (dx) {
          wt.resize(kk * co);
          kernels::transpose(co, kk, Wv.data().data(), wt.data());
          dcol.resize(kk * hw);
        }
        if (dw) colt.resize(hw * kk);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* dyb = n.grad.data() + bi * co * hw;
          if (dw) {
            im2col(Xv.data().data() + bi * ci * h * wd, ci, h, wd, k, stride, pad, ho, wo,
                   cols.data());
            kernels::transpose(kk, hw, cols.data(), colt.data());
            kernels::gemm_acc(co, kk, hw, dyb, colt.data(), dw);
          }
          if (dx) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            kernels::gemm_acc(kk, hw, co, wt.data(), dyb, dcol.data());
            col2im(dcol.data(), ci, h, wd, k, stride, pad, ho, wo, dx + bi * ci * h * wd);
          }
          if (db) {
            for (std::size_t c = 0; c < co; ++c) {
              double s = 0.0;
              for (std::size_t i = 0; i < hw; ++i) s += dyb[c * hw + i];
              db[c] += s;
            }
          }
        }
      });
}

Var Graph::conv_transpose2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& Bv = value(b);
  if (X.rank() != 4 || W.rank() != 4 || W.dim(0) != X.dim(1) || W.dim(2) != W.dim(3) ||
      Bv.size() != W.dim(1) || stride == 0) {
    fail("conv_transpose2d", "input " + shape_str(X.shape()) + ", weight " +
                                 shape_str(W.shape()) + ", bias " + shape_str(Bv.shape()));
  }
  const std::size_t batch = X.dim(0), ci = X.dim(1), h = X.dim(2), wd = X.dim(3);
  const std::size_t co = W.dim(1), k = W.dim(2);
  if ((h - 1) * stride + k < 2 * pad + 1 || (wd - 1) * stride + k < 2 * pad + 1)
    fail("conv_transpose2d", "padding removes the whole output");
  const std::size_t ho = (h - 1) * stride + k - 2 * pad;
  const std::size_t wo = (wd - 1) * stride + k - 2 * pad;
  const std::size_t kk = co * k * k, hw = h * wd, ohw = ho * wo;
  Tensor Y({batch, co, ho, wo});
  std::vector<double> wt(kk * ci), cols(kk * hw);
  kernels::transpose(ci, kk, W.data().data(), wt.data());
  for (std::size_t bi = 0; bi < batch; ++bi) {
    double* yb = Y.data().data() + bi * co * ohw;
    std::fill(cols.begin(), cols.end(), 0.0);
    kernels::gemm_acc(kk, hw, ci, wt.data(), X.data().data() + bi * ci * hw, cols.data());
    col2im(cols.data(), co, ho, wo, k, stride, pad, h, wd, yb);
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t i = 0; i < ohw; ++i) yb[c * ohw + i] += Bv[c];
  }
  return push("conv_transpose2d", {x.id, w.id, b.id}, std::move(Y),
              [=](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const Tensor& Xv = g.val(n.inputs[0]);
                const Tensor& Wv = g.val(n.inputs[1]);
                double* dx = g.acc(n.inputs[0]);
                double* dw = g.acc(n.inputs[1]);
                double* db = g.acc(n.inputs[2]);
                std::vector<double> dcol(kk * hw), dcolt, xt;
                if (dw) dcolt.resize(hw * kk);
                for (std::size_t bi = 0; bi < batch; ++bi) {
                  const double* dyb = n.grad.data() + bi * co * ohw;
                  if (dx || dw)
                    im2col(dyb, co, ho, wo, k, stride, pad, h, wd, dcol.data());
                  if (dx)
                    kernels::gemm_acc(ci, hw, kk, Wv.data().data(), dcol.data(),
                                      dx + bi * ci * hw);
                  if (dw) {
                    kernels::transpose(kk, hw, dcol.data(), dcolt.data());
                    kernels::gemm_acc(ci, kk, hw, Xv.data().data() + bi * ci * hw,
                                      dcolt.data(), dw);
                  }
                  if (db) {
                    for (std::size_t c = 0; c < co; ++c) {
                      double s = 0.0;
                      for (std::size_t i = 0; i < ohw; ++i) s += dyb[c * ohw + i];
                      db[c] += s;
                    }
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// normalization and activations

Var Graph::batch_norm(Var x, Var gamma, Var beta, BatchNormStats* stats, bool train) {
  const Tensor& X = value(x);
  const Tensor& G = value(gamma);
  const Tensor& Bt = value(beta);
  if (X.rank() != 2 && X.rank() != 4) fail("batch_norm", "input must be [B,C] or [B,C,H,W]");
  const std::size_t batch = X.dim(0), ch = X.dim(1);
  const std::size_t spatial = X.rank() == 4 ? X.dim(2) * X.dim(3) : 1;
  const std::size_t count = batch * spatial;
  if (G.size() != ch || Bt.size() != ch) fail("batch_norm", "affine size != channels");
  if (!train && (!stats || stats->running_mean.size() != ch || stats->running_var.size() != ch))
    fail("batch_norm", "eval mode needs running statistics");
  if (train && count == 0) fail("batch_norm", "empty batch in train mode");

  std::vector<double> mean(ch, 0.0), inv(ch, 0.0);
  if (train) {
    std::vector<double> var(ch, 0.0);
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < spatial; ++i) s += X[(b * ch + c) * spatial + i];
      mean[c] = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < spatial; ++i) {
          const double d = X[(b * ch + c) * spatial + i] - mean[c];
          v += d * d;
        }
      var[c] = v / static_cast<double>(count);
      inv[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
    }
    if (stats) {
      if (stats->running_mean.size() != ch) stats->running_mean = Tensor({ch}, 0.0);
      if (stats->running_var.size() != ch) stats->running_var = Tensor({ch}, 1.0);
      const double unbias =
          count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
      for (std::size_t c = 0; c < ch; ++c) {
        stats->running_mean[c] =
            (1.0 - kBatchNormMomentum) * stats->running_mean[c] + kBatchNormMomentum * mean[c];
        stats->running_var[c] = (1.0 - kBatchNormMomentum) * stats->running_var[c] +
                                kBatchNormMomentum * var[c] * unbias;
      }
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = stats->running_mean[c];
      inv[c] = 1.0 / std::sqrt(stats->running_var[c] + kBatchNormEps);
    }
  }

  Tensor xhat(X.shape());
  Tensor Y(X.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = (b * ch + c) * spatial + i;
        xhat[idx] = (X[idx] - mean[c]) * inv[c];
        Y[idx] = G[c] * xhat[idx] + Bt[c];
      }

  return push("batch_norm", {x.id, gamma.id, beta.id}, std::move(Y),
              [=, xhat = std::move(xhat), inv = std::move(inv)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const double* dy = n.grad.data();
                const Tensor& Gv = g.val(n.inputs[1]);
                double* dx = g.acc(n.inputs[0]);
                double* dg = g.acc(n.inputs[1]);
                double* dbeta = g.acc(n.inputs[2]);
                const double cnt = static_cast<double>(count);
                for (std::size_t c = 0; c < ch; ++c) {
                  double sdy = 0.0, sdyx = 0.0;
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < spatial; ++i) {
                      const std::size_t idx = (b * ch + c) * spatial + i;
                      sdy += dy[idx];
                      sdyx += dy[idx] * xhat[idx];
                    }
                  if (dg) dg[c] += sdyx;
                  if (dbeta) dbeta[c] += sdy;
                  if (!dx) continue;
                  const double gc = Gv[c];
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < spatial; ++i) {
                      const std::size_t idx = (b * ch + c) * spatial + i;
                      if (train) {
                        dx[idx] += gc * inv[c] / cnt *
                                   (cnt * dy[idx] - sdy - xhat[idx] * sdyx);
                      } else {
                        dx[idx] += gc * inv[c] * dy[idx];
                      }
                    }
                }
              });
}

Var Graph::relu(Var x) {
  const Tensor& X = value(x);
  Tensor Y(X.shape());
  kernels::relu(X.size(), X.data().data(), Y.data().data());
  return push("relu", {x.id}, std::move(Y), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    const Tensor& Xv = g.val(n.inputs[0]);
    if (double* dx = g.acc(n.inputs[0]))
      kernels::relu_backward(Xv.size(), Xv.data().data(), n.grad.data(), dx);
  });
}

Var Graph::prelu(Var x, Var slope) {
  const Tensor& X = value(x);
  const Tensor& A = value(slope);
  if (X.rank() < 2 && A.size() != 1) fail("prelu", "per-channel slope needs rank >= 2 input");
  const std::size_t ch = X.rank() >= 2 ? X.dim(1) : 1;
  if (A.size() != 1 && A.size() != ch) fail("prelu", "slope must have 1 or C elements");
  const std::size_t batch = X.rank() >= 1 ? X.dim(0) : 1;
  const std::size_t spatial = X.size() / std::max<std::size_t>(1, batch * ch);
  auto channel_of = [=](std::size_t idx) { return (idx / spatial) % ch; };
  const bool shared = A.size() == 1;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double a = shared ? A[0] : A[channel_of(i)];
    Y[i] = X[i] > 0.0 ? X[i] : a * X[i];
  }
  return push("prelu", {x.id, slope.id}, std::move(Y),
              [=](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const Tensor& Xv = g.val(n.inputs[0]);
                const Tensor& Av = g.val(n.inputs[1]);
                double* dx = g.acc(n.inputs[0]);
                double* da = g.acc(n.inputs[1]);
                for (std::size_t i = 0; i < Xv.size(); ++i) {
                  const std::size_t c = shared ? 0 : channel_of(i);
                  const double dy = n.grad[i];
                  if (Xv[i] > 0.0) {
                    if (dx) dx[i] += dy;
                  } else {
                    if (dx) dx[i] += Av[c] * dy;
                    if (da) da[c] += dy * Xv[i];
                  }
                }
              });
}

Var Graph::tanh(Var x) {
  const Tensor& X = value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::tanh(X[i]);
  return push("tanh", {x.id}, std::move(Y), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    const Tensor& Yv = n.value;
    if (double* dx = g.acc(n.inputs[0]))
      for (std::size_t i = 0; i < Yv.size(); ++i) dx[i] += n.grad[i] * (1.0 - Yv[i] * Yv[i]);
  });
}

// ---------------------------------------------------------------------------
// elementwise and structural

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape())
    fail("add", "shapes " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  Tensor Y = A;
  Y.requires_grad = false;
  Y.grad.reset();
  kernels::axpy(Y.size(), 1.0, B.data().data(), Y.data().data());
  return push("add", {a.id, b.id}, std::move(Y), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    const std::size_t sz = n.grad.size();
    if (double* da = g.acc(n.inputs[0])) kernels::axpy(sz, 1.0, n.grad.data(), da);
    if (double* db = g.acc(n.inputs[1])) kernels::axpy(sz, 1.0, n.grad.data(), db);
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape())
    fail("mul", "shapes " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  Tensor Y(A.shape());
  kernels::mul(Y.size(), A.data().data(), B.data().data(), Y.data().data());
  return push("mul", {a.id, b.id}, std::move(Y), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    const Tensor& Av = g.val(n.inputs[0]);
    const Tensor& Bv = g.val(n.inputs[1]);
    if (double* da = g.acc(n.inputs[0]))
      for (std::size_t i = 0; i < n.grad.size(); ++i) da[i] += n.grad[i] * Bv[i];
    if (double* db = g.acc(n.inputs[1]))
      for (std::size_t i = 0; i < n.grad.size(); ++i) db[i] += n.grad[i] * Av[i];
  });
}

Var Graph::scale(Var a, double s) {
  const Tensor& A = value(a);
  Tensor Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = s * A[i];
  return push("scale", {a.id}, std::move(Y), [s](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    if (double* da = g.acc(n.inputs[0])) kernels::axpy(n.grad.size(), s, n.grad.data(), da);
  });
}

Var Graph::concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_channels", "no inputs");
  const Tensor& first = value(parts[0]);
  if (first.rank() < 2) fail("concat_channels", "inputs must have rank >= 2");
  const std::size_t batch = first.dim(0);
  const std::size_t inner = first.size() / std::max<std::size_t>(1, batch * first.dim(1));
  Shape tail(first.shape().begin() + 2, first.shape().end());
  std::vector<std::size_t> chans, ids;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != first.rank() || t.dim(0) != batch ||
        Shape(t.shape().begin() + 2, t.shape().end()) != tail) {
      fail("concat_channels", "incompatible part " + shape_str(t.shape()) + " vs " +
                                  shape_str(first.shape()));
    }
    chans.push_back(t.dim(1));
    ids.push_back(p.id);
    total += t.dim(1);
  }
  Shape out_shape = first.shape();
  out_shape[1] = total;
  Tensor Y(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const Tensor& t = value(parts[p]);
      const std::size_t blk = chans[p] * inner;
      std::copy(t.data().begin() + b * blk, t.data().begin() + (b + 1) * blk,
                Y.data().begin() + (b * total + offset) * inner);
      offset += chans[p];
    }
  }
  return push("concat_channels", ids, std::move(Y),
              [=](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                for (std::size_t b = 0; b < batch; ++b) {
                  std::size_t offset = 0;
                  for (std::size_t p = 0; p < chans.size(); ++p) {
                    const std::size_t blk = chans[p] * inner;
                    if (double* dp = g.acc(n.inputs[p])) {
                      kernels::axpy(blk, 1.0, n.grad.data() + (b * total + offset) * inner,
                                    dp + b * blk);
                    }
                    offset += chans[p];
                  }
                }
              });
}

Var Graph::sign(Var x) {
  const Tensor& X = value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i)
    Y[i] = X[i] > 0.0 ? 1.0 : (X[i] < 0.0 ? -1.0 : 0.0);
  return push("sign", {x.id}, std::move(Y), nullptr);
}

Var Graph::clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) fail("clamp", "lo > hi");
  const Tensor& X = value(x);
  Tensor Y(X.shape(), X.vec());
  kernels::clamp(Y.size(), lo, hi, Y.data().data());
  return push("clamp", {x.id}, std::move(Y), [lo, hi](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    const Tensor& Xv = g.val(n.inputs[0]);
    if (double* dx = g.acc(n.inputs[0]))
      for (std::size_t i = 0; i < Xv.size(); ++i)
        if (Xv[i] >= lo && Xv[i] <= hi) dx[i] += n.grad[i];
  });
}

Var Graph::reshape(Var x, Shape shape) {
  const Tensor& X = value(x);
  if (shape_numel(shape) != X.size())
    fail("reshape", shape_str(X.shape()) + " -> " + shape_str(shape));
  return push("reshape", {x.id}, X.reshaped(std::move(shape)), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    if (double* dx = g.acc(n.inputs[0])) kernels::axpy(n.grad.size(), 1.0, n.grad.data(), dx);
  });
}

// ---------------------------------------------------------------------------
// losses and reductions

Var Graph::softmax_cross_entropy(Var logits, Var targets) {
  const Tensor& Z = value(logits);
  const Tensor& T = value(targets);
  if (Z.rank() != 2 || Z.shape() != T.shape())
    fail("softmax_cross_entropy",
         "logits " + shape_str(Z.shape()) + ", targets " + shape_str(T.shape()));
  const std::size_t rows = Z.dim(0), cls = Z.dim(1);
  Tensor L({rows});
  Tensor probs(Z.shape());
  std::vector<double> tsum(rows, 0.0), lses(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = Z.data().data() + r * cls;
    const double* t = T.data().data() + r * cls;
    double mx = z[0];
    for (std::size_t c = 1; c < cls; ++c) mx = std::max(mx, z[c]);
    double se = 0.0;
    for (std::size_t c = 0; c < cls; ++c) se += std::exp(z[c] - mx);
    const double lse = mx + std::log(se);
    lses[r] = lse;
    double loss = 0.0;
    for (std::size_t c = 0; c < cls; ++c) {
      probs[r * cls + c] = std::exp(z[c] - lse);
      loss += t[c] * (lse - z[c]);
      tsum[r] += t[c];
    }
    L[r] = loss;
  }
  return push("softmax_cross_entropy", {logits.id, targets.id}, std::move(L),
              [rows, cls, probs = std::move(probs), tsum = std::move(tsum),
               lses = std::move(lses)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const Tensor& Zv = g.val(n.inputs[0]);
                const Tensor& Tv = g.val(n.inputs[1]);
                if (double* dz = g.acc(n.inputs[0]))
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cls; ++c) {
                      const std::size_t i = r * cls + c;
                      dz[i] += n.grad[r] * (probs[i] * tsum[r] - Tv[i]);
                    }
                // d/dt_c = lse - z_c
                if (double* dt = g.acc(n.inputs[1]))
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cls; ++c) {
                      const std::size_t i = r * cls + c;
                      dt[i] += n.grad[r] * (lses[r] - Zv[i]);
                    }
              });
}

Var Graph::margin_loss(Var logits, Var targets, double kappa) {
  const Tensor& Z = value(logits);
  const Tensor& T = value(targets);
  if (Z.rank() != 2 || Z.shape() != T.shape() || Z.dim(1) < 2)
    fail("margin_loss", "logits " + shape_str(Z.shape()) + ", targets " + shape_str(T.shape()));
  const std::size_t rows = Z.dim(0), cls = Z.dim(1);
  Tensor L({rows});
  std::vector<std::size_t> label(rows), rival(rows);
  std::vector<bool> active(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = Z.data().data() + r * cls;
    label[r] = argmax_row(T.data().data() + r * cls, cls);
    std::size_t best = label[r] == 0 ? 1 : 0;
    for (std::size_t c = 0; c < cls; ++c)
      if (c != label[r] && z[c] > z[best]) best = c;
    rival[r] = best;
    const double m = z[best] - z[label[r]];
    active[r] = m < kappa;
    L[r] = active[r] ? m : kappa;
  }
  return push("margin_loss", {logits.id, targets.id}, std::move(L),
              [rows, cls, label = std::move(label), rival = std::move(rival),
               active = std::move(active)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (double* dz = g.acc(n.inputs[0]))
                  for (std::size_t r = 0; r < rows; ++r) {
                    if (!active[r]) continue;
                    dz[r * cls + rival[r]] += n.grad[r];
                    dz[r * cls + label[r]] -= n.grad[r];
                  }
              });
}

Var Graph::cosine_similarity(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() < 1 || A.shape() != B.shape())
    fail("cosine_similarity", "shapes " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  const std::size_t rows = A.dim(0);
  const std::size_t d = rows ? A.size() / rows : 0;
  Tensor Q({rows});
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x = A[r * d + i], y = B[r * d + i];
      dot += x * y;
      sa += x * x;
      sb += y * y;
    }
    na[r] = std::sqrt(sa);
    nb[r] = std::sqrt(sb);
    if (na[r] == 0.0 || nb[r] == 0.0) {
      Q[r] = 0.0;
      ++zero_norm_warnings_;
    } else {
      Q[r] = dot / (na[r] * nb[r]);
    }
  }
  return push("cosine_similarity", {a.id, b.id}, std::move(Q),
              [rows, d, na = std::move(na), nb = std::move(nb)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                const Tensor& Av = g.val(n.inputs[0]);
                const Tensor& Bv = g.val(n.inputs[1]);
                const Tensor& Qv = n.value;
                double* da = g.acc(n.inputs[0]);
                double* db = g.acc(n.inputs[1]);
                for (std::size_t r = 0; r < rows; ++r) {
                  if (na[r] == 0.0 || nb[r] == 0.0) continue;
                  const double gr = n.grad[r], q = Qv[r], nab = na[r] * nb[r];
                  for (std::size_t i = 0; i < d; ++i) {
                    const double x = Av[r * d + i], y = Bv[r * d + i];
                    if (da) da[r * d + i] += gr * (y / nab - q * x / (na[r] * na[r]));
                    if (db) db[r * d + i] += gr * (x / nab - q * y / (nb[r] * nb[r]));
                  }
                }
              });
}

Var Graph::mean(Var x) {
  const Tensor& X = value(x);
  if (X.size() == 0) fail("mean", "empty input");
  double s = 0.0;
  for (double v : X.data()) s += v;
  const double n_el = static_cast<double>(X.size());
  return push("mean", {x.id}, Tensor::scalar(s / n_el), [n_el](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    if (double* dx = g.acc(n.inputs[0])) {
      const double gv = n.grad[0] / n_el;
      for (std::size_t i = 0; i < g.val(n.inputs[0]).size(); ++i) dx[i] += gv;
    }
  });
}

Var Graph::sum(Var x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data()) s += v;
  return push("sum", {x.id}, Tensor::scalar(s), [](Graph& g, std::size_t self) {
    const Node& n = g.nodes_[self];
    if (double* dx = g.acc(n.inputs[0])) {
      const double gv = n.grad[0];
      for (std::size_t i = 0; i < g.val(n.inputs[0]).size(); ++i) dx[i] += gv;
    }
  });
}

}  // namespace l2l
