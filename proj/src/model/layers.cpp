#include "tabspec/model/layers.hpp"

#include <cmath>

namespace tabspec::model {

Matrix linear_forward(const Matrix& x, const Matrix& W, const Matrix& b) {
    if (x.cols() != W.rows() || b.cols() != W.cols()) throw Error("linear: shape mismatch");
    Matrix y = x * W;
    y.rowwise() += b.row(0);
    return y;
}

Matrix linear_backward(const Matrix& dy, const Matrix& x, const Matrix& W, Matrix& dW, Matrix& db) {
    dW.noalias() += x.transpose() * dy;
    db += dy.colwise().sum();
    return dy * W.transpose();
}

Matrix layer_norm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache* cache) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Matrix xhat(n, d);
    Vector rstd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(i) = (x.row(i).array() - mean) * rstd[i];
    }
    Matrix y = xhat.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gamma, Matrix& dgamma,
                           Matrix& dbeta) {
    dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbeta += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
    const double d = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double mean_dxhat = dxhat.row(i).sum() / d;
        const double mean_dxhat_xhat = dxhat.row(i).dot(cache.xhat.row(i)) / d;
        dx.row(i) = cache.rstd[i] *
                    (dxhat.row(i).array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat);
    }
    return dx;
}

Matrix softmax_rows(const Matrix& s) {
    Matrix p(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        p.row(i) = (s.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Matrix softmax_rows_backward(const Matrix& dp, const Matrix& p) {
    const Vector inner = (dp.array() * p.array()).rowwise().sum();
    return p.array() * (dp.colwise() - inner).array();
}

Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v, double scale, Matrix* probs) {
    if (q.cols() != k.cols() || k.rows() != v.rows()) throw Error("attention: shape mismatch");
    Matrix p = softmax_rows((q * k.transpose()) * scale);
    Matrix out = p * v;
    if (probs) *probs = std::move(p);
    return out;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return Matrix::Ones(rows, cols);
    if (p >= 1.0) throw Error("dropout rate must be below 1");
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
    return m;
}

Matrix reglu_forward(const Matrix& u) {
    const Eigen::Index h = u.cols() / 2;
    return u.leftCols(h).array() * u.rightCols(h).array().max(0.0);
}

Matrix reglu_backward(const Matrix& dy, const Matrix& u) {
    const Eigen::Index h = u.cols() / 2;
    Matrix du(u.rows(), u.cols());
    du.leftCols(h) = dy.array() * u.rightCols(h).array().max(0.0);
    du.rightCols(h) = (u.rightCols(h).array() > 0.0).select(dy.array() * u.leftCols(h).array(), 0.0);
    return du;
}

}  // namespace tabspec::model
