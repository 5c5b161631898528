#pragma once

#include "tabspec/common.hpp"

#include <random>

namespace tabspec::model {

// y = x W + b, with b a 1 x out row.
Matrix linear_forward(const Matrix& x, const Matrix& W, const Matrix& b);
// Accumulates dW, db and returns dx.
Matrix linear_backward(const Matrix& dy, const Matrix& x, const Matrix& W, Matrix& dW, Matrix& db);

struct LayerNormCache {
    Matrix xhat;
    Vector rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise normalization with affine gamma/beta (both 1 x d).
Matrix layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache* cache);
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gamma, Matrix& dgamma,
                           Matrix& dbeta);

// Numerically stable row softmax.
Matrix softmax_rows(const Matrix& s);
// Backward through row softmax given its output p.
Matrix softmax_rows_backward(const Matrix& dp, const Matrix& p);

/// softmax(q k^T * scale) v. Optionally returns the probability matrix.
Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                                    Matrix* probs = nullptr);

// Inverted-dropout mask: entries are 0 or 1/(1-p).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

// ReGLU over u = [a | b]: a * relu(b).
Matrix reglu_forward(const Matrix& u);
Matrix reglu_backward(const Matrix& dy, const Matrix& u);

}  // namespace tabspec::model
