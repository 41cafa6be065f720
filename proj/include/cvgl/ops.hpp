#pragma once

#include <vector>

#include "cvgl/tensor.hpp"

namespace cvgl {

/// Rectangular window into an H×W map: rows [row, row+height), cols [col, col+width).
struct Region {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

// Elementwise (shapes must match exactly; the only broadcasts are the
// vector-over-rows and scalar-over-tensor forms below).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// a * c for a plain double constant.
Tensor scale(const Tensor& a, double c);

/// a * s where s is a single-element tensor; gradient flows to both.
Tensor mul_scalar(const Tensor& a, const Tensor& s);

/// m[N×C] + v[C] added to every row.
Tensor add_row_vector(const Tensor& m, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Row-wise softmax with max-subtraction; each output row sums to 1.
Tensor softmax_rows(const Tensor& a);

Tensor sigmoid(const Tensor& a);

/// Same-length zero-padded correlation of a channel vector with an odd-width
/// kernel.
Tensor conv1d_channels(const Tensor& f, const Tensor& kernel);

/// Per-channel mean of x[C×H×W] over a nonempty in-bounds region.
Tensor avg_pool_region(const Tensor& x, const Region& region);

Tensor sum_all(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

/// Concatenates rank-1 tensors end to end.
Tensor concat(const std::vector<Tensor>& parts);

/// [m×na | m×nb] -> m×(na+nb).
Tensor concat_cols(const Tensor& a, const Tensor& b);

Tensor logsumexp(const Tensor& v);
Tensor select(const Tensor& v, int index);
Tensor l2_normalize(const Tensor& v);

/// Softmax attention where query row i attends only to the key/value rows
/// listed in windows[i]. Scores are scaled by `scale` before the softmax.
/// One fused primitive rather than per-position graph surgery; its gradient
/// is exercised by the finite-difference suites.
Tensor windowed_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const std::vector<std::vector<int>>& windows, double scale);

/// Non-overlapping p×p patches of img[C×H×W], one row per patch in row-major
/// patch order; row layout is channel-major within the patch.
Tensor extract_patches(const Tensor& img, int patch);

}  // namespace cvgl
