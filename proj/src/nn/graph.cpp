#include "wsct/nn/graph.hpp"

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Core>

namespace wsct::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapR = Eigen::Map<const RowMat<T>>;

// Unfolds k x k same-padded neighborhoods: row (c*k + ky)*k + kx, column y*W + x.
template <typename T>
void im2col(const Tensor<T>& x, int k, AlignedVector<T>& cols) {
  const int h = x.height(), w = x.width(), pad = k / 2;
  cols.assign(static_cast<std::size_t>(x.channels()) * k * k * h * w, T{});
  T* out = cols.data();
  for (int c = 0; c < x.channels(); ++c) {
    const T* src = x.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, out += static_cast<std::size_t>(h) * w) {
        const int dy = ky - pad, dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          T* row = out + static_cast<std::size_t>(y) * w;
          const T* srow = src + static_cast<std::size_t>(sy) * w + dx;
          for (int xx = x0; xx < x1; ++xx) row[xx] = srow[xx];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const AlignedVector<T>& cols, int k, Tensor<T>& dx) {
  const int h = dx.height(), w = dx.width(), pad = k / 2;
  const T* in = cols.data();
  for (int c = 0; c < dx.channels(); ++c) {
    T* dst = dx.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, in += static_cast<std::size_t>(h) * w) {
        const int dy = ky - pad, ddx = kx - pad;
        const int x0 = std::max(0, -ddx), x1 = std::min(w, w - ddx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* row = in + static_cast<std::size_t>(y) * w;
          T* drow = dst + static_cast<std::size_t>(sy) * w + ddx;
          for (int xx = x0; xx < x1; ++xx) drow[xx] += row[xx];
        }
      }
    }
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

template <typename T>
NodeId Graph<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(NodeId id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.channels(), n.value.height(), n.value.width());
  return n.grad;
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::conv(NodeId xid, const ConvLayer& layer) {
  const Tensor<T>& x = value(xid);
  if (x.channels() != layer.in)
    throw InputError("conv expects " + std::to_string(layer.in) + " channels, got " +
                     std::to_string(x.channels()));
  const int k = layer.kernel, hw = x.plane();
  const auto& weight = (*params_)[layer.weight].values;
  const auto& bias = (*params_)[layer.bias].values;
  const int kdim = layer.in * k * k;

  Node n;
  n.inputs = {xid};
  n.value = Tensor<T>(layer.out, x.height(), x.width());
  CMapR<T> wm(weight.data(), layer.out, kdim);
  MapR<T> ym(n.value.data(), layer.out, hw);
  if (k == 1) {
    ym.noalias() = wm * CMapR<T>(x.data(), kdim, hw);
  } else {
    AlignedVector<T> cols;
    im2col(x, k, cols);
    ym.noalias() = wm * CMapR<T>(cols.data(), kdim, hw);
  }
  for (int o = 0; o < layer.out; ++o) ym.row(o).array() += bias[static_cast<std::size_t>(o)];

  n.back = [layer, kdim, hw](Graph& g, Node& self, BackwardMode, ParamGrads<T>* grads) {
    const Tensor<T>& xin = g.value(self.inputs[0]);
    const int kk = layer.kernel;
    const auto& w = (*g.params_)[layer.weight].values;
    CMapR<T> wm(w.data(), layer.out, kdim);
    CMapR<T> dy(self.grad.data(), layer.out, hw);
    AlignedVector<T> cols;
    const T* colp = xin.data();
    if (kk != 1 || grads) {
      if (kk != 1) {
        im2col(xin, kk, cols);
        colp = cols.data();
      }
    }
    if (grads) {
      MapR<T> dw(grads->values[static_cast<std::size_t>(layer.weight)].data(), layer.out, kdim);
      dw.noalias() += dy * CMapR<T>(colp, kdim, hw).transpose();
      auto& db = grads->values[static_cast<std::size_t>(layer.bias)];
      for (int o = 0; o < layer.out; ++o) db[static_cast<std::size_t>(o)] += dy.row(o).sum();
    }
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    if (kk == 1) {
      MapR<T>(dx.data(), kdim, hw).noalias() += wm.transpose() * dy;
    } else {
      AlignedVector<T> dcols(static_cast<std::size_t>(kdim) * hw);
      MapR<T>(dcols.data(), kdim, hw).noalias() = wm.transpose() * dy;
      col2im_add(dcols, kk, dx);
    }
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::relu(NodeId xid) {
  const Tensor<T>& x = value(xid);
  Node n;
  n.inputs = {xid};
  n.value = x;
  for (T& v : n.value.values()) v = v > T{0} ? v : T{0};
  n.back = [](Graph& g, Node& self, BackwardMode mode, ParamGrads<T>*) {
    const NodeId in = self.inputs[0];
    const Tensor<T>& pre = g.value(in);
    Tensor<T> gated = self.grad;
    T* gp = gated.data();
    const T* xp = pre.data();
    for (std::size_t i = 0; i < gated.size(); ++i) {
      const bool open = xp[i] > T{0} && (mode == BackwardMode::kGradient || gp[i] > T{0});
      gp[i] = open ? gp[i] : T{0};
    }
    add_into(g.grad_of(in), gated);
    if (g.trace_rectifiers_) {
      const NodeId self_id = static_cast<NodeId>(&self - g.nodes_.data());
      g.traces_.push_back({self_id, &pre, self.grad, std::move(gated)});
    }
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::maxpool2(NodeId xid) {
  const Tensor<T>& x = value(xid);
  if (x.height() % 2 != 0 || x.width() % 2 != 0)
    throw InputError("maxpool2 needs even spatial dimensions");
  const int oh = x.height() / 2, ow = x.width() / 2;
  Node n;
  n.inputs = {xid};
  n.value = Tensor<T>(x.channels(), oh, ow);
  auto argmax = std::make_shared<std::vector<int>>(n.value.size());
  std::size_t o = 0;
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++o) {
        int best = (2 * y) * x.width() + 2 * xx;
        const T* ch = x.channel(c);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * x.width() + 2 * xx + dx;
            if (ch[idx] > ch[best]) best = idx;
          }
        (*argmax)[o] = best;
        n.value.data()[o] = ch[best];
      }
    }
  }
  n.back = [argmax](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    const int oplane = self.grad.plane();
    for (int c = 0; c < self.grad.channels(); ++c) {
      T* dch = dx.channel(c);
      const T* gch = self.grad.channel(c);
      const int* am = argmax->data() + static_cast<std::size_t>(c) * oplane;
      for (int i = 0; i < oplane; ++i) dch[am[i]] += gch[i];
    }
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::upsample2(NodeId xid) {
  const Tensor<T>& x = value(xid);
  Node n;
  n.inputs = {xid};
  n.value = Tensor<T>(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < n.value.height(); ++y)
      for (int xx = 0; xx < n.value.width(); ++xx) n.value.at(c, y, xx) = x.at(c, y / 2, xx / 2);
  n.back = [](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    for (int c = 0; c < self.grad.channels(); ++c)
      for (int y = 0; y < self.grad.height(); ++y)
        for (int xx = 0; xx < self.grad.width(); ++xx)
          dx.at(c, y / 2, xx / 2) += self.grad.at(c, y, xx);
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::concat(NodeId aid, NodeId bid) {
  const Tensor<T>& a = value(aid);
  const Tensor<T>& b = value(bid);
  if (a.height() != b.height() || a.width() != b.width())
    throw InputError("concat needs matching spatial dimensions");
  Node n;
  n.inputs = {aid, bid};
  n.value = Tensor<T>(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), n.value.data());
  std::copy(b.values().begin(), b.values().end(), n.value.data() + a.size());
  n.back = [](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& da = g.grad_of(self.inputs[0]);
    Tensor<T>& db = g.grad_of(self.inputs[1]);
    const T* src = self.grad.data();
    for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += src[i];
    for (std::size_t i = 0; i < db.size(); ++i) db.data()[i] += src[da.size() + i];
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::slice(NodeId xid, int first, int count) {
  const Tensor<T>& x = value(xid);
  if (first < 0 || count <= 0 || first + count > x.channels())
    throw InputError("channel slice out of range");
  Node n;
  n.inputs = {xid};
  n.value = Tensor<T>(count, x.height(), x.width());
  std::copy(x.channel(first), x.channel(first) + n.value.size(), n.value.data());
  n.back = [first](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    T* dst = dx.channel(first);
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad.data()[i];
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::sigmoid(NodeId xid) {
  Node n;
  n.inputs = {xid};
  n.value = value(xid);
  for (T& v : n.value.values()) v = T{1} / (T{1} + std::exp(-v));
  n.back = [](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T y = self.value.data()[i];
      dx.data()[i] += self.grad.data()[i] * y * (T{1} - y);
    }
  };
  return push(std::move(n));
}

template <typename T>
NodeId Graph<T>::tanh(NodeId xid) {
  Node n;
  n.inputs = {xid};
  n.value = value(xid);
  for (T& v : n.value.values()) v = std::tanh(v);
  n.back = [](Graph& g, Node& self, BackwardMode, ParamGrads<T>*) {
    Tensor<T>& dx = g.grad_of(self.inputs[0]);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const T y = self.value.data()[i];
      dx.data()[i] += self.grad.data()[i] * (T{1} - y * y);
    }
  };
  return push(std::move(n));
}

template <typename T>
void Graph<T>::backward(NodeId output, const Tensor<T>& seed, BackwardMode mode,
                        ParamGrads<T>* grads) {
  backward(std::vector<std::pair<NodeId, Tensor<T>>>{{output, seed}}, mode, grads);
}

template <typename T>
void Graph<T>::backward(const std::vector<std::pair<NodeId, Tensor<T>>>& seeds, BackwardMode mode,
                        ParamGrads<T>* grads) {
  for (auto& n : nodes_) n.grad = Tensor<T>();
  traces_.clear();
  NodeId top = -1;
  for (const auto& [id, seed] : seeds) {
    if (id < 0 || id >= size()) throw InputError("backward from unknown node");
    if (!seed.same_shape(value(id))) throw InputError("backward seed shape mismatch");
    add_into(grad_of(id), seed);
    top = std::max(top, id);
  }
  for (NodeId id = top; id >= 0; --id) {
    Node& n = node(id);
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, n, mode, grads);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace wsct::nn
