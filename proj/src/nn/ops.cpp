#include "realism/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace realism::nn {

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using MatMap = Eigen::Map<Mat<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const Mat<Scalar>>;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) throw ShapeError(std::string(op) + ": shapes " + a.str() + " and " + b.str() + " differ");
}

struct ConvGeometry {
  Index c, h, w, k, stride, pad, ho, wo;
  Index patch() const { return c * k * k; }
  Index out_plane() const { return ho * wo; }
};

// cols is (out_plane x patch); column (ci, ky, kx) holds the shifted input plane.
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, Mat<Scalar>& cols) {
  cols.resize(g.out_plane(), g.patch());
  for (Index ci = 0; ci < g.c; ++ci) {
    const Scalar* plane = x + ci * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        Scalar* dst = cols.col((ci * g.k + ky) * g.k + kx).data();
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          Scalar* row = dst + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.wo, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * g.w;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, const ConvGeometry& g, Scalar* dx) {
  for (Index ci = 0; ci < g.c; ++ci) {
    Scalar* plane = dx + ci * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        const Scalar* src = cols.col((ci * g.k + ky) * g.k + kx).data();
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          Scalar* row = plane + iy * g.w;
          const Scalar* s = src + oy * g.wo;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) row[ix] += s[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar, typename F, typename G>
Var<Scalar> elementwise(const Var<Scalar>& x, F forward, G derivative) {
  Tensor<Scalar> out(x.shape(), x.value().data.unaryExpr(forward));
  return make_result<Scalar>(std::move(out), {x}, [derivative](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0)) {
      const auto& in = node.parents[0]->value.data;
      gx->data.array() += node.grad.data.array() * in.binaryExpr(node.value.data, derivative).array();
    }
  });
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square");
  if (ws.c != xs.c)
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                     std::to_string(ws.c));
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != ws.n) throw ShapeError("conv2d: bias size mismatch");
  ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, pad, conv_output_size(xs.h, ws.h, stride, pad),
                 conv_output_size(xs.w, ws.h, stride, pad)};
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: input " + xs.str() + " too small");
  const Index cout = ws.n;

  Tensor<Scalar> out(Shape{xs.n, cout, g.ho, g.wo});
  ConstMatMap<Scalar> wt(weight.value().data.data(), g.patch(), cout);
  Mat<Scalar> cols;
  for (Index n = 0; n < xs.n; ++n) {
    im2col(x.value().data.data() + n * xs.per_sample(), g, cols);
    MatMap<Scalar> y(out.data.data() + n * out.shape.per_sample(), g.out_plane(), cout);
    y.noalias() = cols * wt;
    if (has_bias) y.rowwise() += bias.value().data.transpose();
  }

  std::vector<Var<Scalar>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result<Scalar>(std::move(out), std::move(inputs), [g, has_bias](Node<Scalar>& node) {
    const auto& xv = node.parents[0]->value;
    const auto& wv = node.parents[1]->value;
    Tensor<Scalar>* gx = grad_of(node, 0);
    Tensor<Scalar>* gw = grad_of(node, 1);
    Tensor<Scalar>* gb = has_bias ? grad_of(node, 2) : nullptr;
    const Index cout = wv.shape.n;
    ConstMatMap<Scalar> wt(wv.data.data(), g.patch(), cout);
    Mat<Scalar> cols, dcols;
    for (Index n = 0; n < xv.shape.n; ++n) {
      ConstMatMap<Scalar> dy(node.grad.data.data() + n * node.grad.shape.per_sample(), g.out_plane(), cout);
      if (gb) gb->data += dy.colwise().sum().transpose();
      if (gw) {
        im2col(xv.data.data() + n * xv.shape.per_sample(), g, cols);
        MatMap<Scalar>(gw->data.data(), g.patch(), cout).noalias() += cols.transpose() * dy;
      }
      if (gx) {
        dcols.noalias() = dy * wt.transpose();
        col2im_add(dcols, g, gx->data.data() + n * xv.shape.per_sample());
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       BatchNormState<Scalar>& state, bool training) {
  const Shape s = x.shape();
  const Index C = s.c, plane = s.plane(), m = s.n * plane;
  if (gamma.value().size() != C || beta.value().size() != C) throw ShapeError("batch_norm: parameter size");
  if (state.running_mean.size() != C) throw ShapeError("batch_norm: running stats size");

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean(C), invstd(C);
  const Scalar* xd = x.value().data.data();
  if (training) {
    if (m < 2) throw ShapeError("batch_norm: training needs more than one value per channel");
    for (Index c = 0; c < C; ++c) {
      Scalar sum = 0, sumsq = 0;
      for (Index n = 0; n < s.n; ++n) {
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(xd + (n * C + c) * plane, plane);
        sum += p.sum();
      }
      const Scalar mu = sum / m;
      for (Index n = 0; n < s.n; ++n) {
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(xd + (n * C + c) * plane, plane);
        sumsq += (p - mu).square().sum();
      }
      const Scalar var = sumsq / m;
      mean[c] = mu;
      invstd[c] = Scalar(1) / std::sqrt(var + state.eps);
      const Scalar unbiased = sumsq / (m - 1);
      state.running_mean.data[c] = state.momentum * state.running_mean.data[c] + (1 - state.momentum) * mu;
      state.running_var.data[c] = state.momentum * state.running_var.data[c] + (1 - state.momentum) * unbiased;
    }
  } else {
    mean = state.running_mean.data;
    invstd = (state.running_var.data.array() + state.eps).rsqrt().matrix();
  }

  auto xhat = std::make_shared<Tensor<Scalar>>(s);
  Tensor<Scalar> out(s);
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < C; ++c) {
      const Index off = (n * C + c) * plane;
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(xd + off, plane);
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> h(xhat->data.data() + off, plane);
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> y(out.data.data() + off, plane);
      h = (p - mean[c]) * invstd[c];
      y = h * gamma.value().data[c] + beta.value().data[c];
    }
  }

  return make_result<Scalar>(std::move(out), {x, gamma, beta}, [xhat, invstd, training, m](Node<Scalar>& node) {
    const Shape s = node.value.shape;
    const Index C = s.c, plane = s.plane();
    const auto& g = node.parents[1]->value.data;
    Tensor<Scalar>* gx = grad_of(node, 0);
    Tensor<Scalar>* gg = grad_of(node, 1);
    Tensor<Scalar>* gbeta = grad_of(node, 2);
    for (Index c = 0; c < C; ++c) {
      Scalar sum_dy = 0, sum_dy_xhat = 0;
      for (Index n = 0; n < s.n; ++n) {
        const Index off = (n * C + c) * plane;
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> dy(node.grad.data.data() + off, plane);
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> h(xhat->data.data() + off, plane);
        sum_dy += dy.sum();
        sum_dy_xhat += (dy * h).sum();
      }
      if (gg) gg->data[c] += sum_dy_xhat;
      if (gbeta) gbeta->data[c] += sum_dy;
      if (!gx) continue;
      const Scalar scale = g[c] * invstd[c];
      for (Index n = 0; n < s.n; ++n) {
        const Index off = (n * C + c) * plane;
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> dy(node.grad.data.data() + off, plane);
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> h(xhat->data.data() + off, plane);
        Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> dx(gx->data.data() + off, plane);
        if (training)
          dx += scale * (dy - sum_dy / m - h * (sum_dy_xhat / m));
        else
          dx += scale * dy;
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> instance_norm(const Var<Scalar>& x, Scalar eps) {
  const Shape s = x.shape();
  const Index plane = s.plane(), groups = s.n * s.c;
  if (plane < 2) throw ShapeError("instance_norm: spatial plane must have more than one value");
  auto xhat = std::make_shared<Tensor<Scalar>>(s);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> invstd(groups);
  for (Index gi = 0; gi < groups; ++gi) {
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(x.value().data.data() + gi * plane, plane);
    const Scalar mu = p.mean();
    const Scalar var = (p - mu).square().mean();
    invstd[gi] = Scalar(1) / std::sqrt(var + eps);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(xhat->data.data() + gi * plane, plane) = (p - mu) * invstd[gi];
  }
  Tensor<Scalar> out = *xhat;
  return make_result<Scalar>(std::move(out), {x}, [xhat, invstd](Node<Scalar>& node) {
    Tensor<Scalar>* gx = grad_of(node, 0);
    if (!gx) return;
    const Index plane = node.value.shape.plane();
    const Index groups = node.value.shape.n * node.value.shape.c;
    for (Index gi = 0; gi < groups; ++gi) {
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> dy(node.grad.data.data() + gi * plane, plane);
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> h(xhat->data.data() + gi * plane, plane);
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> dx(gx->data.data() + gi * plane, plane);
      const Scalar mdy = dy.mean(), mdyh = (dy * h).mean();
      dx += invstd[gi] * (dy - mdy - h * mdyh);
    }
  });
}

template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& x, const Var<Scalar>& scale_v, const Var<Scalar>& shift_v) {
  const Shape s = x.shape();
  const Shape expect{s.n, s.c, 1, 1};
  require_same_shape(scale_v.shape(), expect, "channel_affine(scale)");
  require_same_shape(shift_v.shape(), expect, "channel_affine(shift)");
  const Index plane = s.plane();
  Tensor<Scalar> out(s);
  for (Index gi = 0; gi < s.n * s.c; ++gi) {
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(x.value().data.data() + gi * plane, plane);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(out.data.data() + gi * plane, plane) =
        p * scale_v.value().data[gi] + shift_v.value().data[gi];
  }
  return make_result<Scalar>(std::move(out), {x, scale_v, shift_v}, [](Node<Scalar>& node) {
    const Index plane = node.value.shape.plane();
    const Index groups = node.value.shape.n * node.value.shape.c;
    const auto& xv = node.parents[0]->value.data;
    const auto& sv = node.parents[1]->value.data;
    Tensor<Scalar>* gx = grad_of(node, 0);
    Tensor<Scalar>* gs = grad_of(node, 1);
    Tensor<Scalar>* gt = grad_of(node, 2);
    for (Index gi = 0; gi < groups; ++gi) {
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> dy(node.grad.data.data() + gi * plane, plane);
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(xv.data() + gi * plane, plane);
      if (gx) Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(gx->data.data() + gi * plane, plane) += dy * sv[gi];
      if (gs) gs->data[gi] += (dy * p).sum();
      if (gt) gt->data[gi] += dy.sum();
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  return elementwise(
      x, [](Scalar v) { return v > 0 ? v : Scalar(0); }, [](Scalar in, Scalar) { return in > 0 ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope) {
  return elementwise(
      x, [slope](Scalar v) { return v > 0 ? v : slope * v; },
      [slope](Scalar in, Scalar) { return in > 0 ? Scalar(1) : slope; });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  return elementwise(
      x, [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  return elementwise(
      x, [](Scalar v) { return std::tanh(v); }, [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

template <typename Scalar>
Var<Scalar> max_pool2(const Var<Scalar>& x) {
  const Shape s = x.shape();
  const Index ho = s.h / 2, wo = s.w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("max_pool2: input " + s.str() + " too small");
  Tensor<Scalar> out(Shape{s.n, s.c, ho, wo});
  auto argmax = std::make_shared<std::vector<Index>>(out.size());
  const Scalar* xd = x.value().data.data();
  Index o = 0;
  for (Index gi = 0; gi < s.n * s.c; ++gi) {
    const Index base = gi * s.plane();
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox, ++o) {
        Index best = base + (2 * oy) * s.w + 2 * ox;
        for (Index dy = 0; dy < 2; ++dy)
          for (Index dx = 0; dx < 2; ++dx) {
            Index idx = base + (2 * oy + dy) * s.w + 2 * ox + dx;
            if (xd[idx] > xd[best]) best = idx;
          }
        (*argmax)[o] = best;
        out.data[o] = xd[best];
      }
    }
  }
  return make_result<Scalar>(std::move(out), {x}, [argmax](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0))
      for (Index o = 0; o < node.grad.size(); ++o) gx->data[(*argmax)[o]] += node.grad.data[o];
  });
}

template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x) {
  const Shape s = x.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, 1, 1});
  for (Index gi = 0; gi < s.n * s.c; ++gi) out.data[gi] = x.value().data.segment(gi * s.plane(), s.plane()).mean();
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0)) {
      const Index plane = node.parents[0]->value.shape.plane();
      for (Index gi = 0; gi < node.grad.size(); ++gi)
        gx->data.segment(gi * plane, plane).array() += node.grad.data[gi] / static_cast<Scalar>(plane);
    }
  });
}

template <typename Scalar>
Var<Scalar> upsample2(const Var<Scalar>& x) {
  const Shape s = x.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (Index gi = 0; gi < s.n * s.c; ++gi)
    for (Index y = 0; y < 2 * s.h; ++y)
      for (Index xx = 0; xx < 2 * s.w; ++xx)
        out.data[(gi * 2 * s.h + y) * 2 * s.w + xx] = x.value().data[(gi * s.h + y / 2) * s.w + xx / 2];
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& node) {
    auto* gx = grad_of(node, 0);
    if (!gx) return;
    const Shape s = node.parents[0]->value.shape;
    for (Index gi = 0; gi < s.n * s.c; ++gi)
      for (Index y = 0; y < 2 * s.h; ++y)
        for (Index xx = 0; xx < 2 * s.w; ++xx)
          gx->data[(gi * s.h + y / 2) * s.w + xx / 2] += node.grad.data[(gi * 2 * s.h + y) * 2 * s.w + xx];
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape(), a.value().data + b.value().data);
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& node) {
    if (auto* ga = grad_of(node, 0)) ga->data += node.grad.data;
    if (auto* gb = grad_of(node, 1)) gb->data += node.grad.data;
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<Scalar> out(a.shape(), a.value().data - b.value().data);
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& node) {
    if (auto* ga = grad_of(node, 0)) ga->data += node.grad.data;
    if (auto* gb = grad_of(node, 1)) gb->data -= node.grad.data;
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), a.value().data * s);
  return make_result<Scalar>(std::move(out), {a}, [s](Node<Scalar>& node) {
    if (auto* ga = grad_of(node, 0)) ga->data += node.grad.data * s;
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out(a.shape(), (a.value().data.array() + s).matrix());
  return make_result<Scalar>(std::move(out), {a}, [](Node<Scalar>& node) {
    if (auto* ga = grad_of(node, 0)) ga->data += node.grad.data;
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape s0 = parts[0].shape();
  Index total_c = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
      throw ShapeError("concat_channels: " + s.str() + " does not align with " + s0.str());
    total_c += s.c;
  }
  Tensor<Scalar> out(Shape{s0.n, total_c, s0.h, s0.w});
  const Index plane = s0.plane();
  for (Index n = 0; n < s0.n; ++n) {
    Index c_off = 0;
    for (const auto& p : parts) {
      const Index len = p.shape().c * plane;
      out.data.segment((n * total_c + c_off) * plane, len) = p.value().data.segment(n * len, len);
      c_off += p.shape().c;
    }
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return make_result<Scalar>(std::move(out), std::move(inputs), [](Node<Scalar>& node) {
    const Shape os = node.value.shape;
    const Index plane = os.plane();
    for (Index n = 0; n < os.n; ++n) {
      Index c_off = 0;
      for (std::size_t i = 0; i < node.parents.size(); ++i) {
        const Index c = node.parents[i]->value.shape.c;
        if (auto* g = grad_of(node, i))
          g->data.segment(n * c * plane, c * plane) += node.grad.data.segment((n * os.c + c_off) * plane, c * plane);
        c_off += c;
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_batch(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no inputs");
  const Shape s0 = parts[0].shape();
  Index total_n = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.c != s0.c || s.h != s0.h || s.w != s0.w) throw ShapeError("concat_batch: shapes differ");
    total_n += s.n;
  }
  Tensor<Scalar> out(Shape{total_n, s0.c, s0.h, s0.w});
  Index off = 0;
  for (const auto& p : parts) {
    out.data.segment(off, p.value().size()) = p.value().data;
    off += p.value().size();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return make_result<Scalar>(std::move(out), std::move(inputs), [](Node<Scalar>& node) {
    Index off = 0;
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const Index len = node.parents[i]->value.size();
      if (auto* g = grad_of(node, i)) g->data += node.grad.data.segment(off, len);
      off += len;
    }
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape) {
  if (shape.count() != x.value().size()) throw ShapeError("reshape: " + x.shape().str() + " to " + shape.str());
  Tensor<Scalar> out(shape, x.value().data);
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0)) gx->data += node.grad.data;
  });
}

template <typename Scalar>
Var<Scalar> slice_features(const Var<Scalar>& x, Index start, Index count) {
  const Shape s = x.shape();
  const Index f = s.per_sample();
  if (start < 0 || count <= 0 || start + count > f) throw ShapeError("slice_features: range out of bounds");
  Tensor<Scalar> out(Shape{s.n, count, 1, 1});
  for (Index n = 0; n < s.n; ++n) out.data.segment(n * count, count) = x.value().data.segment(n * f + start, count);
  return make_result<Scalar>(std::move(out), {x}, [start, count, f](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0))
      for (Index n = 0; n < node.value.shape.n; ++n)
        gx->data.segment(n * f + start, count) += node.grad.data.segment(n * count, count);
  });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  const Index in = weight.shape().c, outf = weight.shape().n;
  if (x.shape().per_sample() != in)
    throw ShapeError("linear: input has " + std::to_string(x.shape().per_sample()) + " features, expected " +
                     std::to_string(in));
  const bool has_bias = bias.defined();
  const Index n = x.shape().n;
  Tensor<Scalar> out(Shape{n, outf, 1, 1});
  ConstMatMap<Scalar> wt(weight.value().data.data(), in, outf);
  ConstMatMap<Scalar> xm(x.value().data.data(), in, n);
  MatMap<Scalar> ym(out.data.data(), outf, n);
  ym.noalias() = wt.transpose() * xm;
  if (has_bias) ym.colwise() += bias.value().data;
  std::vector<Var<Scalar>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result<Scalar>(std::move(out), std::move(inputs), [in, outf, n, has_bias](Node<Scalar>& node) {
    ConstMatMap<Scalar> dy(node.grad.data.data(), outf, n);
    if (auto* gx = grad_of(node, 0)) {
      ConstMatMap<Scalar> wt(node.parents[1]->value.data.data(), in, outf);
      MatMap<Scalar>(gx->data.data(), in, n).noalias() += wt * dy;
    }
    if (auto* gw = grad_of(node, 1)) {
      ConstMatMap<Scalar> xm(node.parents[0]->value.data.data(), in, n);
      MatMap<Scalar>(gw->data.data(), in, outf).noalias() += xm * dy.transpose();
    }
    if (has_bias)
      if (auto* gb = grad_of(node, 2)) gb->data += dy.rowwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& logits) {
  const Index f = logits.shape().per_sample(), n = logits.shape().n;
  Tensor<Scalar> out(Shape{n, f, 1, 1});
  for (Index i = 0; i < n; ++i) {
    auto z = logits.value().data.segment(i * f, f).array();
    auto e = (z - z.maxCoeff()).exp();
    out.data.segment(i * f, f) = (e / e.sum()).matrix();
  }
  return make_result<Scalar>(std::move(out), {logits}, [f, n](Node<Scalar>& node) {
    if (auto* g = grad_of(node, 0))
      for (Index i = 0; i < n; ++i) {
        auto p = node.value.data.segment(i * f, f);
        auto dy = node.grad.data.segment(i * f, f);
        const Scalar dot = p.dot(dy);
        g->data.segment(i * f, f).array() += p.array() * (dy.array() - dot);
      }
  });
}

template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::span<const int> labels) {
  const Index f = logits.shape().per_sample(), n = logits.shape().n;
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("softmax_cross_entropy: label count mismatch");
  auto probs = std::make_shared<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(n * f);
  std::vector<int> y(labels.begin(), labels.end());
  const Scalar floor = static_cast<Scalar>(kProbabilityFloor);
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    if (y[i] < 0 || y[i] >= f) throw InvalidArgument("label out of range");
    auto z = logits.value().data.segment(i * f, f).array();
    auto e = (z - z.maxCoeff()).exp();
    probs->segment(i * f, f) = (e / e.sum()).matrix();
    total -= std::log(std::max((*probs)[i * f + y[i]], floor));
  }
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out.data[0] = total / static_cast<Scalar>(n);
  return make_result<Scalar>(std::move(out), {logits}, [probs, y, f, n, floor](Node<Scalar>& node) {
    auto* g = grad_of(node, 0);
    if (!g) return;
    const Scalar up = node.grad.data[0] / static_cast<Scalar>(n);
    for (Index i = 0; i < n; ++i) {
      if ((*probs)[i * f + y[i]] < floor) continue;  // floored term is constant
      auto gi = g->data.segment(i * f, f);
      gi += up * probs->segment(i * f, f);
      gi[y[i]] -= up;
    }
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out.data[0] = x.value().data.mean();
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0))
      gx->data.array() += node.grad.data[0] / static_cast<Scalar>(gx->size());
  });
}

template <typename Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out.data[0] = (a.value().data - b.value().data).cwiseAbs().mean();
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& node) {
    const auto& av = node.parents[0]->value.data;
    const auto& bv = node.parents[1]->value.data;
    const Scalar up = node.grad.data[0] / static_cast<Scalar>(av.size());
    auto sign = (av - bv).array().sign();
    if (auto* ga = grad_of(node, 0)) ga->data.array() += up * sign;
    if (auto* gb = grad_of(node, 1)) gb->data.array() -= up * sign;
  });
}

template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "mse_loss");
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out.data[0] = (a.value().data - b.value().data).squaredNorm() / static_cast<Scalar>(a.value().size());
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& node) {
    const auto& av = node.parents[0]->value.data;
    const auto& bv = node.parents[1]->value.data;
    const Scalar up = 2 * node.grad.data[0] / static_cast<Scalar>(av.size());
    if (auto* ga = grad_of(node, 0)) ga->data += up * (av - bv);
    if (auto* gb = grad_of(node, 1)) gb->data -= up * (av - bv);
  });
}

template <typename Scalar>
Var<Scalar> mse_to_constant(const Var<Scalar>& x, Scalar target) {
  Tensor<Scalar> out(Shape{1, 1, 1, 1});
  out.data[0] = (x.value().data.array() - target).square().mean();
  return make_result<Scalar>(std::move(out), {x}, [target](Node<Scalar>& node) {
    if (auto* gx = grad_of(node, 0)) {
      const auto& xv = node.parents[0]->value.data;
      gx->data.array() += (2 * node.grad.data[0] / static_cast<Scalar>(xv.size())) * (xv.array() - target);
    }
  });
}

#define REALISM_INSTANTIATE_OPS(S)                                                                          \
  template Var<S> conv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&, int, int);                        \
  template Var<S> batch_norm<S>(const Var<S>&, const Var<S>&, const Var<S>&, BatchNormState<S>&, bool);     \
  template Var<S> instance_norm<S>(const Var<S>&, S);                                                       \
  template Var<S> channel_affine<S>(const Var<S>&, const Var<S>&, const Var<S>&);                           \
  template Var<S> relu<S>(const Var<S>&);                                                                   \
  template Var<S> leaky_relu<S>(const Var<S>&, S);                                                          \
  template Var<S> sigmoid<S>(const Var<S>&);                                                                \
  template Var<S> tanh<S>(const Var<S>&);                                                                   \
  template Var<S> max_pool2<S>(const Var<S>&);                                                              \
  template Var<S> global_avg_pool<S>(const Var<S>&);                                                        \
  template Var<S> upsample2<S>(const Var<S>&);                                                              \
  template Var<S> add<S>(const Var<S>&, const Var<S>&);                                                     \
  template Var<S> sub<S>(const Var<S>&, const Var<S>&);                                                     \
  template Var<S> scale<S>(const Var<S>&, S);                                                               \
  template Var<S> add_scalar<S>(const Var<S>&, S);                                                          \
  template Var<S> concat_channels<S>(std::span<const Var<S>>);                                              \
  template Var<S> concat_batch<S>(std::span<const Var<S>>);                                                 \
  template Var<S> reshape<S>(const Var<S>&, Shape);                                                         \
  template Var<S> slice_features<S>(const Var<S>&, Index, Index);                                           \
  template Var<S> linear<S>(const Var<S>&, const Var<S>&, const Var<S>&);                                   \
  template Var<S> softmax<S>(const Var<S>&);                                                                \
  template Var<S> softmax_cross_entropy<S>(const Var<S>&, std::span<const int>);                            \
  template Var<S> mean<S>(const Var<S>&);                                                                   \
  template Var<S> l1_loss<S>(const Var<S>&, const Var<S>&);                                                 \
  template Var<S> mse_loss<S>(const Var<S>&, const Var<S>&);                                                \
  template Var<S> mse_to_constant<S>(const Var<S>&, S);

REALISM_INSTANTIATE_OPS(float)
REALISM_INSTANTIATE_OPS(double)

}  // namespace realism::nn
