#include "cvgl/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace cvgl {

namespace {

using detail::grad_buffer;
using detail::NodePtr;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::ArrayXd>;
using CVecMap = Eigen::Map<const Eigen::ArrayXd>;

CVecMap as_array(const NodePtr& n) {
  return CVecMap(n->data.data(), static_cast<Eigen::Index>(n->data.size()));
}

VecMap grad_array(const NodePtr& n) {
  auto& g = grad_buffer(n);
  return VecMap(g.data(), static_cast<Eigen::Index>(g.size()));
}

Tensor make_output(Shape shape, std::vector<double> data, const char* op) {
  detail::check_finite(data, op);
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return Tensor::wrap(std::move(n));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(a.node()) + as_array(b.node());
  Tensor y = make_output(a.shape(), std::move(out), "add");
  Tape::maybe_record("add", {a.node(), b.node()}, y.node(), [](const Tape::Record& r) {
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += grad;
    if (r.input_tracked[1]) grad_array(r.inputs[1]) += grad;
  });
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(a.node()) - as_array(b.node());
  Tensor y = make_output(a.shape(), std::move(out), "sub");
  Tape::maybe_record("sub", {a.node(), b.node()}, y.node(), [](const Tape::Record& r) {
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += grad;
    if (r.input_tracked[1]) grad_array(r.inputs[1]) -= grad;
  });
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(a.node()) * as_array(b.node());
  Tensor y = make_output(a.shape(), std::move(out), "mul");
  Tape::maybe_record("mul", {a.node(), b.node()}, y.node(), [](const Tape::Record& r) {
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += grad * as_array(r.inputs[1]);
    if (r.input_tracked[1]) grad_array(r.inputs[1]) += grad * as_array(r.inputs[0]);
  });
  return y;
}

Tensor scale(const Tensor& a, double c) {
  detail::check_finite({c}, "scale factor");
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(a.node()) * c;
  Tensor y = make_output(a.shape(), std::move(out), "scale");
  Tape::maybe_record("scale", {a.node()}, y.node(), [c](const Tape::Record& r) {
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += grad * c;
  });
  return y;
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    throw std::invalid_argument("mul_scalar: scalar factor must have one element, got " + shape_str(s.shape()));
  }
  const double c = s.data()[0];
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(a.node()) * c;
  Tensor y = make_output(a.shape(), std::move(out), "mul_scalar");
  Tape::maybe_record("mul_scalar", {a.node(), s.node()}, y.node(), [](const Tape::Record& r) {
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    const double c = r.inputs[1]->data[0];
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += grad * c;
    if (r.input_tracked[1]) grad_buffer(r.inputs[1])[0] += (grad * as_array(r.inputs[0])).sum();
  });
  return y;
}

Tensor add_row_vector(const Tensor& m, const Tensor& v) {
  require_rank("add_row_vector", m, 2);
  require_rank("add_row_vector", v, 1);
  if (m.dim(1) != v.dim(0)) {
    throw std::invalid_argument("add_row_vector: row width " + shape_str(m.shape()) +
                                " does not match vector " + shape_str(v.shape()));
  }
  const int rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(m.size());
  CMatMap M(m.data().data(), rows, cols);
  MatMap O(out.data(), rows, cols);
  O = M.rowwise() + Eigen::Map<const Eigen::RowVectorXd>(v.data().data(), cols);
  Tensor y = make_output(m.shape(), std::move(out), "add_row_vector");
  Tape::maybe_record("add_row_vector", {m.node(), v.node()}, y.node(), [rows, cols](const Tape::Record& r) {
    CMatMap G(r.output->grad.data(), rows, cols);
    if (r.input_tracked[0]) MatMap(grad_buffer(r.inputs[0]).data(), rows, cols) += G;
    if (r.input_tracked[1]) {
      Eigen::Map<Eigen::VectorXd> gv(grad_buffer(r.inputs[1]).data(), cols);
      gv += G.colwise().sum().transpose();
    }
  });
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
  CMatMap A(a.data().data(), m, k);
  CMatMap B(b.data().data(), k, n);
  MatMap(out.data(), m, n).noalias() = A * B;
  Tensor y = make_output({m, n}, std::move(out), "matmul");
  Tape::maybe_record("matmul", {a.node(), b.node()}, y.node(), [m, k, n](const Tape::Record& r) {
    CMatMap G(r.output->grad.data(), m, n);
    CMatMap A(r.inputs[0]->data.data(), m, k);
    CMatMap B(r.inputs[1]->data.data(), k, n);
    if (r.input_tracked[0]) MatMap(grad_buffer(r.inputs[0]).data(), m, k).noalias() += G * B.transpose();
    if (r.input_tracked[1]) MatMap(grad_buffer(r.inputs[1]).data(), k, n).noalias() += A.transpose() * G;
  });
  return y;
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(a.size());
  MatMap(out.data(), n, m) = CMatMap(a.data().data(), m, n).transpose();
  Tensor y = make_output({n, m}, std::move(out), "transpose");
  Tape::maybe_record("transpose", {a.node()}, y.node(), [m, n](const Tape::Record& r) {
    if (r.input_tracked[0]) {
      MatMap(grad_buffer(r.inputs[0]).data(), m, n) += CMatMap(r.output->grad.data(), n, m).transpose();
    }
  });
  return y;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor y = make_output(std::move(shape), a.data(), "reshape");
  Tape::maybe_record("reshape", {a.node()}, y.node(), [](const Tape::Record& r) {
    if (r.input_tracked[0]) {
      const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
      grad_array(r.inputs[0]) += grad;
    }
  });
  return y;
}

Tensor softmax_rows(const Tensor& a) {
  require_rank("softmax_rows", a, 2);
  const int rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.size());
  for (int i = 0; i < rows; ++i) {
    CVecMap x(a.data().data() + static_cast<std::size_t>(i) * cols, cols);
    VecMap y(out.data() + static_cast<std::size_t>(i) * cols, cols);
    y = (x - x.maxCoeff()).exp();
    y /= y.sum();
  }
  Tensor y = make_output(a.shape(), std::move(out), "softmax_rows");
  Tape::maybe_record("softmax_rows", {a.node()}, y.node(), [rows, cols](const Tape::Record& r) {
    if (!r.input_tracked[0]) return;
    auto& gx = grad_buffer(r.inputs[0]);
    for (int i = 0; i < rows; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * cols;
      CVecMap y(r.output->data.data() + off, cols);
      CVecMap g(r.output->grad.data() + off, cols);
      VecMap(gx.data() + off, cols) += y * (g - (g * y).sum());
    }
  });
  return y;
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = 1.0 / (1.0 + (-as_array(a.node())).exp());
  Tensor y = make_output(a.shape(), std::move(out), "sigmoid");
  Tape::maybe_record("sigmoid", {a.node()}, y.node(), [](const Tape::Record& r) {
    if (!r.input_tracked[0]) return;
    const CVecMap grad(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    const CVecMap y = as_array(r.output);
    grad_array(r.inputs[0]) += grad * y * (1.0 - y);
  });
  return y;
}

Tensor conv1d_channels(const Tensor& f, const Tensor& kernel) {
  require_rank("conv1d_channels", f, 1);
  require_rank("conv1d_channels", kernel, 1);
  const int c = f.dim(0), w = kernel.dim(0);
  if (w % 2 == 0) throw std::invalid_argument("conv1d_channels: kernel width must be odd, got " + std::to_string(w));
  if (w > c) {
    throw std::invalid_argument("conv1d_channels: kernel " + shape_str(kernel.shape()) +
                                " wider than input " + shape_str(f.shape()));
  }
  const int r = w / 2;
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < c; ++i) {
    double acc = 0.0;
    for (int t = 0; t < w; ++t) {
      const int j = i + t - r;
      if (j >= 0 && j < c) acc += kernel.data()[static_cast<std::size_t>(t)] * f.data()[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  Tensor y = make_output({c}, std::move(out), "conv1d_channels");
  Tape::maybe_record("conv1d_channels", {f.node(), kernel.node()}, y.node(), [c, w, r](const Tape::Record& r_) {
    const auto& g = r_.output->grad;
    const auto& fv = r_.inputs[0]->data;
    const auto& kv = r_.inputs[1]->data;
    if (r_.input_tracked[0]) {
      auto& gf = grad_buffer(r_.inputs[0]);
      for (int i = 0; i < c; ++i) {
        for (int t = 0; t < w; ++t) {
          const int j = i + t - r;
          if (j >= 0 && j < c) gf[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i)] * kv[static_cast<std::size_t>(t)];
        }
      }
    }
    if (r_.input_tracked[1]) {
      auto& gk = grad_buffer(r_.inputs[1]);
      for (int i = 0; i < c; ++i) {
        for (int t = 0; t < w; ++t) {
          const int j = i + t - r;
          if (j >= 0 && j < c) gk[static_cast<std::size_t>(t)] += g[static_cast<std::size_t>(i)] * fv[static_cast<std::size_t>(j)];
        }
      }
    }
  });
  return y;
}

Tensor avg_pool_region(const Tensor& x, const Region& region) {
  require_rank("avg_pool_region", x, 3);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (region.height <= 0 || region.width <= 0) {
    throw std::invalid_argument("avg_pool_region: empty region " + std::to_string(region.height) + "x" +
                                std::to_string(region.width));
  }
  if (region.row < 0 || region.col < 0 || region.row + region.height > h || region.col + region.width > w) {
    throw std::invalid_argument("avg_pool_region: region out of bounds for map " + shape_str(x.shape()));
  }
  const double inv_count = 1.0 / (static_cast<double>(region.height) * static_cast<double>(region.width));
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (int i = region.row; i < region.row + region.height; ++i) {
      for (int j = region.col; j < region.col + region.width; ++j) {
        acc += x.data()[(static_cast<std::size_t>(ch) * h + i) * w + j];
      }
    }
    out[static_cast<std::size_t>(ch)] = acc * inv_count;
  }
  Tensor y = make_output({c}, std::move(out), "avg_pool_region");
  Tape::maybe_record("avg_pool_region", {x.node()}, y.node(),
                     [c, h, w, region, inv_count](const Tape::Record& r) {
                       if (!r.input_tracked[0]) return;
                       auto& gx = grad_buffer(r.inputs[0]);
                       const auto& g = r.output->grad;
                       for (int ch = 0; ch < c; ++ch) {
                         const double spread = g[static_cast<std::size_t>(ch)] * inv_count;
                         for (int i = region.row; i < region.row + region.height; ++i) {
                           for (int j = region.col; j < region.col + region.width; ++j) {
                             gx[(static_cast<std::size_t>(ch) * h + i) * w + j] += spread;
                           }
                         }
                       }
                     });
  return y;
}

Tensor sum_all(const Tensor& a) {
  Tensor y = make_output({1}, {as_array(a.node()).sum()}, "sum_all");
  Tape::maybe_record("sum_all", {a.node()}, y.node(), [](const Tape::Record& r) {
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += r.output->grad[0];
  });
  return y;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_rank("dot", a, 1);
  require_rank("dot", b, 1);
  require_same_shape("dot", a, b);
  Tensor y = make_output({1}, {(as_array(a.node()) * as_array(b.node())).sum()}, "dot");
  Tape::maybe_record("dot", {a.node(), b.node()}, y.node(), [](const Tape::Record& r) {
    const double g = r.output->grad[0];
    if (r.input_tracked[0]) grad_array(r.inputs[0]) += g * as_array(r.inputs[1]);
    if (r.input_tracked[1]) grad_array(r.inputs[1]) += g * as_array(r.inputs[0]);
  });
  return y;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw std::invalid_argument("concat: all parts must be rank 1, got " + shape_str(p.shape()));
    total += p.size();
  }
  std::vector<double> out;
  out.reserve(total);
  std::vector<NodePtr> inputs;
  inputs.reserve(parts.size());
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.node());
  }
  Tensor y = make_output({static_cast<int>(total)}, std::move(out), "concat");
  Tape::maybe_record("concat", std::move(inputs), y.node(), [](const Tape::Record& r) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r.inputs.size(); ++i) {
      const std::size_t n = r.inputs[i]->data.size();
      if (r.input_tracked[i]) {
        VecMap(grad_buffer(r.inputs[i]).data(), static_cast<Eigen::Index>(n)) +=
            CVecMap(r.output->grad.data() + off, static_cast<Eigen::Index>(n));
      }
      off += n;
    }
  });
  return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) {
    throw std::invalid_argument("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const int rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows) * (ca + cb));
  MatMap O(out.data(), rows, ca + cb);
  O.leftCols(ca) = CMatMap(a.data().data(), rows, ca);
  O.rightCols(cb) = CMatMap(b.data().data(), rows, cb);
  Tensor y = make_output({rows, ca + cb}, std::move(out), "concat_cols");
  Tape::maybe_record("concat_cols", {a.node(), b.node()}, y.node(), [rows, ca, cb](const Tape::Record& r) {
    CMatMap G(r.output->grad.data(), rows, ca + cb);
    if (r.input_tracked[0]) MatMap(grad_buffer(r.inputs[0]).data(), rows, ca) += G.leftCols(ca);
    if (r.input_tracked[1]) MatMap(grad_buffer(r.inputs[1]).data(), rows, cb) += G.rightCols(cb);
  });
  return y;
}

Tensor logsumexp(const Tensor& v) {
  require_rank("logsumexp", v, 1);
  const CVecMap x = as_array(v.node());
  const double m = x.maxCoeff();
  const double lse = m + std::log((x - m).exp().sum());
  Tensor y = make_output({1}, {lse}, "logsumexp");
  Tape::maybe_record("logsumexp", {v.node()}, y.node(), [](const Tape::Record& r) {
    if (!r.input_tracked[0]) return;
    const double g = r.output->grad[0];
    const double lse = r.output->data[0];
    grad_array(r.inputs[0]) += g * (as_array(r.inputs[0]) - lse).exp();
  });
  return y;
}

Tensor select(const Tensor& v, int index) {
  require_rank("select", v, 1);
  if (index < 0 || index >= v.dim(0)) {
    throw std::invalid_argument("select: index " + std::to_string(index) + " out of range for " +
                                shape_str(v.shape()));
  }
  Tensor y = make_output({1}, {v.data()[static_cast<std::size_t>(index)]}, "select");
  Tape::maybe_record("select", {v.node()}, y.node(), [index](const Tape::Record& r) {
    if (r.input_tracked[0]) grad_buffer(r.inputs[0])[static_cast<std::size_t>(index)] += r.output->grad[0];
  });
  return y;
}

Tensor l2_normalize(const Tensor& v) {
  require_rank("l2_normalize", v, 1);
  const double norm = std::sqrt((as_array(v.node()) * as_array(v.node())).sum());
  if (norm == 0.0) throw std::domain_error("l2_normalize: zero vector");
  std::vector<double> out(v.size());
  VecMap(out.data(), static_cast<Eigen::Index>(out.size())) = as_array(v.node()) / norm;
  Tensor y = make_output(v.shape(), std::move(out), "l2_normalize");
  Tape::maybe_record("l2_normalize", {v.node()}, y.node(), [norm](const Tape::Record& r) {
    if (!r.input_tracked[0]) return;
    const CVecMap g(r.output->grad.data(), static_cast<Eigen::Index>(r.output->grad.size()));
    const CVecMap y = as_array(r.output);
    const double yg = (y * g).sum();
    grad_array(r.inputs[0]) += (g - y * yg) / norm;
  });
  return y;
}

Tensor windowed_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const std::vector<std::vector<int>>& windows, double scale) {
  require_rank("windowed_attention", q, 2);
  require_same_shape("windowed_attention", q, k);
  require_same_shape("windowed_attention", q, v);
  const int n = q.dim(0), c = q.dim(1);
  if (windows.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("windowed_attention: need one window per query row, got " +
                                std::to_string(windows.size()) + " for " + std::to_string(n));
  }
  for (const auto& win : windows) {
    if (win.empty()) throw std::invalid_argument("windowed_attention: empty window");
    for (int j : win) {
      if (j < 0 || j >= n) {
        throw std::invalid_argument("windowed_attention: window index " + std::to_string(j) +
                                    " out of range for " + std::to_string(n) + " rows");
      }
    }
  }

  CMatMap Q(q.data().data(), n, c), K(k.data().data(), n, c), V(v.data().data(), n, c);
  auto weights = std::make_shared<std::vector<Eigen::VectorXd>>(static_cast<std::size_t>(n));
  std::vector<double> out(static_cast<std::size_t>(n) * c, 0.0);
  MatMap O(out.data(), n, c);
  for (int i = 0; i < n; ++i) {
    const auto& win = windows[static_cast<std::size_t>(i)];
    const int m = static_cast<int>(win.size());
    Eigen::VectorXd s(m);
    for (int j = 0; j < m; ++j) s(j) = Q.row(i).dot(K.row(win[static_cast<std::size_t>(j)])) * scale;
    Eigen::VectorXd a = (s.array() - s.maxCoeff()).exp();
    a /= a.sum();
    for (int j = 0; j < m; ++j) O.row(i) += a(j) * V.row(win[static_cast<std::size_t>(j)]);
    (*weights)[static_cast<std::size_t>(i)] = std::move(a);
  }
  Tensor y = make_output({n, c}, std::move(out), "windowed_attention");
  Tape::maybe_record(
      "windowed_attention", {q.node(), k.node(), v.node()}, y.node(),
      [n, c, scale, windows, weights](const Tape::Record& r) {
        CMatMap Q(r.inputs[0]->data.data(), n, c);
        CMatMap K(r.inputs[1]->data.data(), n, c);
        CMatMap V(r.inputs[2]->data.data(), n, c);
        CMatMap G(r.output->grad.data(), n, c);
        MatMap GQ(grad_buffer(r.inputs[0]).data(), n, c);
        MatMap GK(grad_buffer(r.inputs[1]).data(), n, c);
        MatMap GV(grad_buffer(r.inputs[2]).data(), n, c);
        for (int i = 0; i < n; ++i) {
          const auto& win = windows[static_cast<std::size_t>(i)];
          const Eigen::VectorXd& a = (*weights)[static_cast<std::size_t>(i)];
          const int m = static_cast<int>(win.size());
          Eigen::VectorXd da(m);
          for (int j = 0; j < m; ++j) da(j) = G.row(i).dot(V.row(win[static_cast<std::size_t>(j)]));
          const double adot = a.dot(da);
          for (int j = 0; j < m; ++j) {
            const int key = win[static_cast<std::size_t>(j)];
            const double ds = a(j) * (da(j) - adot);
            if (r.input_tracked[0]) GQ.row(i) += ds * scale * K.row(key);
            if (r.input_tracked[1]) GK.row(key) += ds * scale * Q.row(i);
            if (r.input_tracked[2]) GV.row(key) += a(j) * G.row(i);
          }
        }
      });
  return y;
}

Tensor extract_patches(const Tensor& img, int patch) {
  require_rank("extract_patches", img, 3);
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (patch <= 0 || h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument("extract_patches: patch " + std::to_string(patch) +
                                " must evenly divide map " + shape_str(img.shape()));
  }
  const int ph = h / patch, pw = w / patch;
  const int n = ph * pw, cols = c * patch * patch;
  std::vector<double> out(static_cast<std::size_t>(n) * cols);
  for (int bi = 0; bi < ph; ++bi) {
    for (int bj = 0; bj < pw; ++bj) {
      const std::size_t row = static_cast<std::size_t>(bi * pw + bj) * cols;
      for (int ch = 0; ch < c; ++ch) {
        for (int dy = 0; dy < patch; ++dy) {
          for (int dx = 0; dx < patch; ++dx) {
            out[row + static_cast<std::size_t>(ch) * patch * patch + static_cast<std::size_t>(dy) * patch + dx] =
                img.data()[(static_cast<std::size_t>(ch) * h + bi * patch + dy) * w + bj * patch + dx];
          }
        }
      }
    }
  }
  Tensor y = make_output({n, cols}, std::move(out), "extract_patches");
  Tape::maybe_record("extract_patches", {img.node()}, y.node(), [c, h, w, patch, ph, pw, cols](const Tape::Record& r) {
    if (!r.input_tracked[0]) return;
    auto& gi = grad_buffer(r.inputs[0]);
    const auto& g = r.output->grad;
    for (int bi = 0; bi < ph; ++bi) {
      for (int bj = 0; bj < pw; ++bj) {
        const std::size_t row = static_cast<std::size_t>(bi * pw + bj) * cols;
        for (int ch = 0; ch < c; ++ch) {
          for (int dy = 0; dy < patch; ++dy) {
            for (int dx = 0; dx < patch; ++dx) {
              gi[(static_cast<std::size_t>(ch) * h + bi * patch + dy) * w + bj * patch + dx] +=
                  g[row + static_cast<std::size_t>(ch) * patch * patch + static_cast<std::size_t>(dy) * patch + dx];
            }
          }
        }
      }
    }
  });
  return y;
}

}  // namespace cvgl
