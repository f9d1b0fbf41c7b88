#include "crm/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace crm::ops {
namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) {
    throw std::invalid_argument(msg);
  }
}

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  if (m == 0 || n == 0) {
    return;
  }
  if (k == 0) {
    if (beta == 0.0) {
      for (int i = 0; i < m; ++i) {
        std::fill(c + static_cast<std::size_t>(i) * ldc,
                  c + static_cast<std::size_t>(i) * ldc + n, 0.0);
      }
    }
    return;
  }
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

// Gathers zero-padded k x k x Cin patches around every cell of a H x W x Cin
// tensor into a (H*W) x (k*k*Cin) row-major matrix.
void im2col(const double* input, int h, int w, int c, int k,
            std::vector<double>& patches) {
  const int pad = (k - 1) / 2;
  const std::size_t patch_len = static_cast<std::size_t>(k) * k * c;
  patches.assign(static_cast<std::size_t>(h) * w * patch_len, 0.0);
  for (int oh = 0; oh < h; ++oh) {
    for (int ow = 0; ow < w; ++ow) {
      double* row = patches.data() + (static_cast<std::size_t>(oh) * w + ow) * patch_len;
      for (int u = 0; u < k; ++u) {
        const int ih = oh + u - pad;
        if (ih < 0 || ih >= h) {
          continue;
        }
        const int jv0 = std::max(0, pad - ow);
        const int jv1 = std::min(k, w + pad - ow);
        if (jv0 >= jv1) {
          continue;
        }
        const double* src =
            input + (static_cast<std::size_t>(ih) * w + (ow + jv0 - pad)) * c;
        double* dst = row + (static_cast<std::size_t>(u) * k + jv0) * c;
        std::memcpy(dst, src, static_cast<std::size_t>(jv1 - jv0) * c * sizeof(double));
      }
    }
  }
}

// Scatter-adds patch-matrix gradients back onto the input grid.
void col2im_accumulate(const std::vector<double>& patch_grad, int h, int w,
                       int c, int k, double* input_grad) {
  const int pad = (k - 1) / 2;
  const std::size_t patch_len = static_cast<std::size_t>(k) * k * c;
  for (int oh = 0; oh < h; ++oh) {
    for (int ow = 0; ow < w; ++ow) {
      const double* row =
          patch_grad.data() + (static_cast<std::size_t>(oh) * w + ow) * patch_len;
      for (int u = 0; u < k; ++u) {
        const int ih = oh + u - pad;
        if (ih < 0 || ih >= h) {
          continue;
        }
        const int jv0 = std::max(0, pad - ow);
        const int jv1 = std::min(k, w + pad - ow);
        for (int v = jv0; v < jv1; ++v) {
          const int iw = ow + v - pad;
          double* dst = input_grad + (static_cast<std::size_t>(ih) * w + iw) * c;
          const double* src = row + (static_cast<std::size_t>(u) * k + v) * c;
          for (int ci = 0; ci < c; ++ci) {
            dst[ci] += src[ci];
          }
        }
      }
    }
  }
}

bool any_grad(const Tensor& a) { return a.requires_grad(); }

template <class... Ts>
bool any_grad(const Tensor& a, const Ts&... rest) {
  return a.requires_grad() || any_grad(rest...);
}

}  // namespace

void set_compute_threads(int threads) {
  openblas_set_num_threads(threads < 1 ? 1 : threads);
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  check(input.defined() && input.rank() == 3,
        "conv2d: input must be H x W x C");
  check(kernel.defined() && kernel.rank() == 4,
        "conv2d: kernel must be k x k x Cin x Cout");
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int k = kernel.dim(0);
  check(kernel.dim(1) == k, "conv2d: kernel must be square");
  check(k % 2 == 1, "conv2d: kernel size must be odd, got " + std::to_string(k));
  check(h >= 1 && w >= 1, "conv2d: input spatial dims must be >= 1");
  check(kernel.dim(2) == cin,
        "conv2d: input channels " + std::to_string(cin) +
            " != kernel channels " + std::to_string(kernel.dim(2)));
  const int cout = kernel.dim(3);
  check(bias.defined() && bias.rank() == 1 && bias.dim(0) == cout,
        "conv2d: bias must have one value per output channel");

  const int cells = h * w;
  const int patch_len = k * k * cin;

  const bool rec = tape.recording() && any_grad(input, kernel, bias);
  Tensor out(Shape{h, w, cout}, rec);
  for (int cell = 0; cell < cells; ++cell) {
    std::memcpy(out.data() + static_cast<std::size_t>(cell) * cout, bias.data(),
                static_cast<std::size_t>(cout) * sizeof(double));
  }

  std::vector<double> patches;
  im2col(input.data(), h, w, cin, k, patches);
  gemm(false, false, cells, cout, patch_len, 1.0, patches.data(), patch_len,
       kernel.data(), cout, 1.0, out.data(), cout);

  if (rec) {
    Tensor in_t = input, k_t = kernel, b_t = bias, out_t = out;
    tape.record(out, [in_t, k_t, b_t, out_t, h, w, cin, cout, k, cells,
                      patch_len]() mutable {
      const double* gout = out_t.grad();
      if (b_t.requires_grad()) {
        double* gb = b_t.grad();
        for (int cell = 0; cell < cells; ++cell) {
          const double* row = gout + static_cast<std::size_t>(cell) * cout;
          for (int co = 0; co < cout; ++co) {
            gb[co] += row[co];
          }
        }
      }
      if (k_t.requires_grad() || in_t.requires_grad()) {
        std::vector<double> patches;
        im2col(in_t.data(), h, w, cin, k, patches);
        if (k_t.requires_grad()) {
          // dK += P^T * dOut, accumulated straight into the kernel gradient.
          gemm(true, false, patch_len, cout, cells, 1.0, patches.data(),
               patch_len, gout, cout, 1.0, k_t.grad(), cout);
        }
        if (in_t.requires_grad()) {
          std::vector<double> patch_grad(patches.size());
          gemm(false, true, cells, patch_len, cout, 1.0, gout, cout,
               k_t.data(), cout, 0.0, patch_grad.data(), patch_len);
          col2im_accumulate(patch_grad, h, w, cin, k, in_t.grad());
        }
      }
    });
  }
  return out;
}

Tensor maxpool2(Tape& tape, const Tensor& input) {
  check(input.defined() && input.rank() == 3, "maxpool2: input must be H x W x C");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  check(h >= 1 && w >= 1, "maxpool2: input spatial dims must be >= 1");
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;

  const bool rec = tape.recording() && input.requires_grad();
  Tensor out(Shape{oh, ow, c}, rec);
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(oh) * ow * c);

  const double* in = input.data();
  double* o = out.data();
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int y1 = std::min(2 * y + 2, h), x1 = std::min(2 * x + 2, w);
      for (int ci = 0; ci < c; ++ci) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (int iy = 2 * y; iy < y1; ++iy) {
          for (int ix = 2 * x; ix < x1; ++ix) {
            const std::int64_t idx = (static_cast<std::int64_t>(iy) * w + ix) * c + ci;
            if (in[idx] > best) {  // strict: first max in scan order wins ties
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t oidx = (static_cast<std::size_t>(y) * ow + x) * c + ci;
        o[oidx] = best;
        argmax[oidx] = best_idx;
      }
    }
  }

  if (rec) {
    Tensor in_t = input, out_t = out;
    tape.record(out, [in_t, out_t, argmax = std::move(argmax)]() mutable {
      double* gin = in_t.grad();
      const double* gout = out_t.grad();
      for (std::size_t i = 0; i < argmax.size(); ++i) {
        gin[argmax[i]] += gout[i];
      }
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& input) {
  check(input.defined(), "relu: undefined input");
  const bool rec = tape.recording() && input.requires_grad();
  Tensor out(input.shape(), rec);
  const double* in = input.data();
  double* o = out.data();
  const std::int64_t n = input.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    o[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  if (rec) {
    Tensor in_t = input, out_t = out;
    tape.record(out, [in_t, out_t, n]() mutable {
      double* gin = in_t.grad();
      const double* gout = out_t.grad();
      const double* in = in_t.data();
      for (std::int64_t i = 0; i < n; ++i) {
        if (in[i] > 0.0) {  // gradient is 0 at exactly 0
          gin[i] += gout[i];
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.rank() == 3 && b.rank() == 3,
        "concat_channels: inputs must be H x W x C");
  check(a.dim(0) == b.dim(0) && a.dim(1) == b.dim(1),
        "concat_channels: spatial dims differ, " + shape_str(a.shape()) +
            " vs " + shape_str(b.shape()));
  const int h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
  const bool rec = tape.recording() && any_grad(a, b);
  Tensor out(Shape{h, w, ca + cb}, rec);
  const int cells = h * w;
  for (int cell = 0; cell < cells; ++cell) {
    double* dst = out.data() + static_cast<std::size_t>(cell) * (ca + cb);
    std::memcpy(dst, a.data() + static_cast<std::size_t>(cell) * ca,
                static_cast<std::size_t>(ca) * sizeof(double));
    std::memcpy(dst + ca, b.data() + static_cast<std::size_t>(cell) * cb,
                static_cast<std::size_t>(cb) * sizeof(double));
  }
  if (rec) {
    Tensor a_t = a, b_t = b, out_t = out;
    tape.record(out, [a_t, b_t, out_t, cells, ca, cb]() mutable {
      const double* gout = out_t.grad();
      for (int cell = 0; cell < cells; ++cell) {
        const double* row = gout + static_cast<std::size_t>(cell) * (ca + cb);
        if (a_t.requires_grad()) {
          double* ga = a_t.grad() + static_cast<std::size_t>(cell) * ca;
          for (int i = 0; i < ca; ++i) ga[i] += row[i];
        }
        if (b_t.requires_grad()) {
          double* gb = b_t.grad() + static_cast<std::size_t>(cell) * cb;
          for (int i = 0; i < cb; ++i) gb[i] += row[ca + i];
        }
      }
    });
  }
  return out;
}

Tensor global_avg_pool(Tape& tape, const Tensor& input) {
  check(input.defined() && input.rank() == 3, "global_avg_pool: input must be H x W x C");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  check(h * w >= 1, "global_avg_pool: empty spatial extent");
  const bool rec = tape.recording() && input.requires_grad();
  Tensor out(Shape{c}, rec);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  const double* in = input.data();
  for (int cell = 0; cell < h * w; ++cell) {
    for (int ci = 0; ci < c; ++ci) {
      out.data()[ci] += in[static_cast<std::size_t>(cell) * c + ci];
    }
  }
  for (int ci = 0; ci < c; ++ci) {
    out.data()[ci] *= inv;
  }
  if (rec) {
    Tensor in_t = input, out_t = out;
    const int cells = h * w;
    tape.record(out, [in_t, out_t, cells, c, inv]() mutable {
      double* gin = in_t.grad();
      const double* gout = out_t.grad();
      for (int cell = 0; cell < cells; ++cell) {
        for (int ci = 0; ci < c; ++ci) {
          gin[static_cast<std::size_t>(cell) * c + ci] += gout[ci] * inv;
        }
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& input) {
  check(input.defined() && input.rank() == 1 && input.dim(0) >= 1,
        "softmax: input must be a nonempty vector");
  const int c = input.dim(0);
  const bool rec = tape.recording() && input.requires_grad();
  Tensor out(Shape{c}, rec);
  const double* in = input.data();
  double m = in[0];
  for (int i = 1; i < c; ++i) {
    m = std::max(m, in[i]);
  }
  double denom = 0.0;
  for (int i = 0; i < c; ++i) {
    out.data()[i] = std::exp(in[i] - m);
    denom += out.data()[i];
  }
  for (int i = 0; i < c; ++i) {
    out.data()[i] /= denom;
  }
  if (rec) {
    Tensor in_t = input, out_t = out;
    tape.record(out, [in_t, out_t, c]() mutable {
      const double* p = out_t.data();
      const double* gout = out_t.grad();
      double dot = 0.0;
      for (int i = 0; i < c; ++i) {
        dot += gout[i] * p[i];
      }
      double* gin = in_t.grad();
      for (int i = 0; i < c; ++i) {
        gin[i] += p[i] * (gout[i] - dot);
      }
    });
  }
  return out;
}

Tensor resize_bilinear(Tape& tape, const Tensor& input, int out_h, int out_w) {
  check(input.defined() && input.rank() == 3, "resize_bilinear: input must be H x W x C");
  check(out_h >= 1 && out_w >= 1, "resize_bilinear: output dims must be >= 1");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  check(h >= 1 && w >= 1, "resize_bilinear: input dims must be >= 1");

  struct Axis {
    int lo, hi;
    double t;  // weight of hi
  };
  auto make_axis = [](int out_i, int in_n, int out_n) {
    const double src = (out_i + 0.5) * (static_cast<double>(in_n) / out_n) - 0.5;
    const double f = std::floor(src);
    int lo = static_cast<int>(f);
    double t = src - f;
    int hi = lo + 1;
    if (lo < 0) {
      lo = 0;
      hi = std::min(1, in_n - 1);
      t = 0.0;
    }
    if (hi > in_n - 1) {
      hi = in_n - 1;
      lo = std::min(lo, in_n - 1);
      if (lo == hi) t = 0.0;
    }
    return Axis{lo, hi, t};
  };

  const bool rec = tape.recording() && input.requires_grad();
  Tensor out(Shape{out_h, out_w, c}, rec);
  const double* in = input.data();
  for (int y = 0; y < out_h; ++y) {
    const Axis ay = make_axis(y, h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const Axis ax = make_axis(x, w, out_w);
      double* o = out.data() + (static_cast<std::size_t>(y) * out_w + x) * c;
      const double w00 = (1.0 - ay.t) * (1.0 - ax.t);
      const double w01 = (1.0 - ay.t) * ax.t;
      const double w10 = ay.t * (1.0 - ax.t);
      const double w11 = ay.t * ax.t;
      const double* p00 = in + (static_cast<std::size_t>(ay.lo) * w + ax.lo) * c;
      const double* p01 = in + (static_cast<std::size_t>(ay.lo) * w + ax.hi) * c;
      const double* p10 = in + (static_cast<std::size_t>(ay.hi) * w + ax.lo) * c;
      const double* p11 = in + (static_cast<std::size_t>(ay.hi) * w + ax.hi) * c;
      for (int ci = 0; ci < c; ++ci) {
        o[ci] = w00 * p00[ci] + w01 * p01[ci] + w10 * p10[ci] + w11 * p11[ci];
      }
    }
  }

  if (rec) {
    Tensor in_t = input, out_t = out;
    tape.record(out, [in_t, out_t, h, w, c, out_h, out_w, make_axis]() mutable {
      double* gin = in_t.grad();
      const double* gout = out_t.grad();
      for (int y = 0; y < out_h; ++y) {
        const Axis ay = make_axis(y, h, out_h);
        for (int x = 0; x < out_w; ++x) {
          const Axis ax = make_axis(x, w, out_w);
          const double* g = gout + (static_cast<std::size_t>(y) * out_w + x) * c;
          const double w00 = (1.0 - ay.t) * (1.0 - ax.t);
          const double w01 = (1.0 - ay.t) * ax.t;
          const double w10 = ay.t * (1.0 - ax.t);
          const double w11 = ay.t * ax.t;
          double* p00 = gin + (static_cast<std::size_t>(ay.lo) * w + ax.lo) * c;
          double* p01 = gin + (static_cast<std::size_t>(ay.lo) * w + ax.hi) * c;
          double* p10 = gin + (static_cast<std::size_t>(ay.hi) * w + ax.lo) * c;
          double* p11 = gin + (static_cast<std::size_t>(ay.hi) * w + ax.hi) * c;
          for (int ci = 0; ci < c; ++ci) {
            p00[ci] += w00 * g[ci];
            p01[ci] += w01 * g[ci];
            p10[ci] += w10 * g[ci];
            p11[ci] += w11 * g[ci];
          }
        }
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.shape() == b.shape(),
        "add: shape mismatch");
  const bool rec = tape.recording() && any_grad(a, b);
  Tensor out(a.shape(), rec);
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out.data()[i] = a.data()[i] + b.data()[i];
  }
  if (rec) {
    Tensor a_t = a, b_t = b, out_t = out;
    tape.record(out, [a_t, b_t, out_t, n]() mutable {
      const double* gout = out_t.grad();
      if (a_t.requires_grad()) {
        double* ga = a_t.grad();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += gout[i];
      }
      if (b_t.requires_grad()) {
        double* gb = b_t.grad();
        for (std::int64_t i = 0; i < n; ++i) gb[i] += gout[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check(a.defined() && b.defined() && a.shape() == b.shape(),
        "sub: shape mismatch");
  const bool rec = tape.recording() && any_grad(a, b);
  Tensor out(a.shape(), rec);
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out.data()[i] = a.data()[i] - b.data()[i];
  }
  if (rec) {
    Tensor a_t = a, b_t = b, out_t = out;
    tape.record(out, [a_t, b_t, out_t, n]() mutable {
      const double* gout = out_t.grad();
      if (a_t.requires_grad()) {
        double* ga = a_t.grad();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += gout[i];
      }
      if (b_t.requires_grad()) {
        double* gb = b_t.grad();
        for (std::int64_t i = 0; i < n; ++i) gb[i] -= gout[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  check(a.defined(), "scale: undefined input");
  const bool rec = tape.recording() && a.requires_grad();
  Tensor out(a.shape(), rec);
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out.data()[i] = a.data()[i] * factor;
  }
  if (rec) {
    Tensor a_t = a, out_t = out;
    tape.record(out, [a_t, out_t, n, factor]() mutable {
      double* ga = a_t.grad();
      const double* gout = out_t.grad();
      for (std::int64_t i = 0; i < n; ++i) ga[i] += factor * gout[i];
    });
  }
  return out;
}

Tensor average(Tape& tape, const std::vector<Tensor>& inputs) {
  check(!inputs.empty(), "average: needs at least one input");
  for (const auto& t : inputs) {
    check(t.defined() && t.shape() == inputs.front().shape(),
          "average: all inputs must share a shape");
  }
  bool grads = false;
  for (const auto& t : inputs) {
    grads = grads || t.requires_grad();
  }
  const bool rec = tape.recording() && grads;
  Tensor out(inputs.front().shape(), rec);
  const std::int64_t n = out.numel();
  const double inv = 1.0 / static_cast<double>(inputs.size());
  for (const auto& t : inputs) {
    for (std::int64_t i = 0; i < n; ++i) {
      out.data()[i] += t.data()[i];
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    out.data()[i] *= inv;
  }
  if (rec) {
    Tensor out_t = out;
    std::vector<Tensor> ins = inputs;
    tape.record(out, [ins, out_t, n, inv]() mutable {
      const double* gout = out_t.grad();
      for (auto& t : ins) {
        if (!t.requires_grad()) continue;
        double* g = t.grad();
        for (std::int64_t i = 0; i < n; ++i) g[i] += inv * gout[i];
      }
    });
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  check(a.defined(), "sum_all: undefined input");
  const bool rec = tape.recording() && a.requires_grad();
  double s = 0.0;
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    s += a.data()[i];
  }
  Tensor out(Shape{}, {s}, rec);
  if (rec) {
    Tensor a_t = a, out_t = out;
    tape.record(out, [a_t, out_t, n]() mutable {
      double* ga = a_t.grad();
      const double g = out_t.grad()[0];
      for (std::int64_t i = 0; i < n; ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor sum_squares(Tape& tape, const Tensor& a) {
  check(a.defined(), "sum_squares: undefined input");
  const bool rec = tape.recording() && a.requires_grad();
  double s = 0.0;
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    s += a.data()[i] * a.data()[i];
  }
  Tensor out(Shape{}, {s}, rec);
  if (rec) {
    Tensor a_t = a, out_t = out;
    tape.record(out, [a_t, out_t, n]() mutable {
      double* ga = a_t.grad();
      const double g = out_t.grad()[0];
      const double* v = a_t.data();
      for (std::int64_t i = 0; i < n; ++i) ga[i] += 2.0 * v[i] * g;
    });
  }
  return out;
}

Tensor log_pick(Tape& tape, const Tensor& values, int index, double factor,
                double floor) {
  check(values.defined() && values.rank() == 1, "log_pick: input must be a vector");
  check(index >= 0 && index < values.dim(0), "log_pick: index out of range");
  const bool rec = tape.recording() && values.requires_grad();
  const double v = values.data()[index];
  const bool floored = v < floor;
  Tensor out(Shape{}, {-factor * std::log(floored ? floor : v)}, rec);
  if (rec) {
    Tensor v_t = values, out_t = out;
    tape.record(out, [v_t, out_t, index, factor, floored]() mutable {
      if (floored) {
        return;
      }
      v_t.grad()[index] += out_t.grad()[0] * (-factor / v_t.data()[index]);
    });
  }
  return out;
}

}  // namespace crm::ops
