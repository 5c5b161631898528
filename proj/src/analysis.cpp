#include "tabspec/analysis.hpp"

#include "tabspec/model/layers.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tabspec::analysis {

double effective_rank(const Matrix& M) {
    if (M.size() == 0) throw Error("zero matrix has no effective rank");
    Eigen::BDCSVD<Matrix> svd(M);
    const Vector& s = svd.singularValues();
    const double smax = s.size() ? s.maxCoeff() : 0.0;
    if (!(smax > 0.0)) throw Error("zero matrix has no effective rank");
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] >= 1e-12 * smax) total += s[i];
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] < 1e-12 * smax) continue;
        const double p = s[i] / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

double c_alpha(double alpha, double tau, double c_K, double c_Q, double c_q, double d_token) {
    if (!(d_token > 0.0)) throw Error("c_alpha: d_T must be positive");
    return std::exp((alpha * tau - 2.0 * c_K * c_Q * c_q) / std::sqrt(d_token));
}

Bound bound_thm1(double C, double d) {
    if (!(C > 0.0) || d < 1.0) throw Error("bound: need C > 0 and d >= 1");
    return {(C + d) * std::exp(-C / (C + d) * std::log(C)), 1.0 + d / C};
}

Bound bound_thm2a(double C, double d) {
    if (!(C > 0.0) || d < 1.0) throw Error("bound: need C > 0 and d >= 1");
    const double c2 = 2.0 * C;
    return {(c2 + d) * std::exp(-(c2 * std::log(c2) + d * std::log(d)) / (c2 + d)), 1.0 + d / c2};
}

Bound bound_thm2b(double C) {
    if (!(C > 0.0)) throw Error("bound: need C > 0");
    return {(C + 1.0) * std::exp(-C / (C + 1.0) * std::log(C)), 1.0 + 1.0 / C};
}

std::string to_string(PEAssignment a) {
    switch (a) {
        case PEAssignment::distinct_orthogonal: return "distinct_orthogonal";
        case PEAssignment::shared_within_groups: return "shared_within_groups";
        case PEAssignment::zero: return "zero";
    }
    return "zero";
}

std::string to_string(InputStructure s) { return s == InputStructure::iid ? "iid" : "two_group"; }

void ConstructedSetting::validate() const {
    if (d < 2) throw Error("constructed setting: d must be at least 2");
    if (d_pe < 1) throw Error("constructed setting: d_pe must be positive");
    if (d_token < d_pe + 1) throw Error("constructed setting: infeasible dimensions (d_T must exceed d_pe)");
    if (!(c_Q > 0.0 && c_K > 0.0 && c_q > 0.0)) throw Error("constructed setting: norm bounds must be positive");
    if (tau < 0.0 || alpha < 0.0) throw Error("constructed setting: tau and alpha must be nonnegative");
    if (!(content_share > 0.0 && content_share < 1.0)) throw Error("constructed setting: content share must lie in (0, 1)");
    if ((pe == PEAssignment::shared_within_groups || structure == InputStructure::two_group) && d % 2 != 0)
        throw Error("constructed setting: two-group structure needs even d");
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    return m;
}

Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(n, n, rng));
    Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i)
        if (R(i, i) < 0.0) Q.col(i) = -Q.col(i);
    return Q;
}

}  // namespace

double spectral_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(M);
    return svd.singularValues().maxCoeff();
}

ConstructedWeights construct_weights(const ConstructedSetting& s, std::uint64_t seed) {
    s.validate();
    std::mt19937_64 rng(seed);
    const int dT = s.d_token, dc = s.d_content(), dp = s.d_pe;
    const double rho = s.content_share, rho_p = std::sqrt(1.0 - rho * rho);
    const double c = s.c_Q * s.c_q * s.c_K;

    ConstructedWeights w;
    w.Q = s.c_Q * random_orthogonal(dT, rng);
    Vector q = gaussian(dT, 1, rng);
    w.q = s.c_q * q.normalized();
    const Vector query_dir = (w.Q.transpose() * w.q).normalized();

    if (dc >= s.d) {
        w.tokenizer = random_orthogonal(dc, rng).topRows(s.d);
    } else {
        w.tokenizer = gaussian(s.d, dc, rng);
        for (Eigen::Index i = 0; i < s.d; ++i) w.tokenizer.row(i).normalize();
    }

    Vector u = Vector::Zero(dT);
    const RowVector wsum = w.tokenizer.colwise().sum();
    if (wsum.norm() > 1e-12)
        u.head(dc) = rho * wsum.transpose().normalized();
    else
        u[0] = rho;
    u[dc] = rho_p;
    w.K = s.c_K * u * query_dir.transpose();

    w.V = Matrix::Zero(dT, dT);
    w.V.topLeftCorner(dc, dc) = random_orthogonal(dc, rng);

    w.pe = Matrix::Zero(s.d, dp);
    const double lead = s.tau / (c * rho_p);
    switch (s.pe) {
        case PEAssignment::distinct_orthogonal:
            w.pe(0, 0) = lead;
            if (dp > 1)
                for (Eigen::Index i = 0; i < s.d; ++i) w.pe(i, 1) = static_cast<double>(i + 1) / s.d;
            break;
        case PEAssignment::shared_within_groups:
            for (Eigen::Index i = 0; i < s.d / 2; ++i) w.pe(i, 0) = lead;
            break;
        case PEAssignment::zero: break;
    }

    const double tol = 1e-9;
    if (spectral_norm(w.Q) > s.c_Q + tol || spectral_norm(w.K) > s.c_K + tol || w.q.norm() > s.c_q + tol)
        throw Error("constructed setting: norm bound violated after construction");
    const Vector norms = w.tokenizer.rowwise().norm();
    if ((norms.array() - 1.0).abs().maxCoeff() > tol) throw Error("constructed setting: tokenizer norms differ");
    if (s.pe != PEAssignment::zero && std::abs(pe_score_gap(pe_scores(s, w)) - s.tau) > tol)
        throw Error("constructed setting: measured score gap differs from tau");
    return w;
}

Matrix sample_inputs(const ConstructedSetting& s, Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix X(n, s.d);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (s.structure == InputStructure::iid) {
            for (Eigen::Index i = 0; i < s.d; ++i) X(r, i) = unit(rng);
        } else {
            const double theta = unit(rng), theta2 = unit(rng);
            X.row(r).head(s.d / 2).setConstant(theta);
            X.row(r).tail(s.d - s.d / 2).setConstant(theta2);
        }
    }
    return X;
}

Matrix constructed_tokens(const ConstructedSetting& s, const ConstructedWeights& w, const RowVector& x) {
    if (x.size() != s.d) throw Error("constructed tokens: input dimension mismatch");
    Matrix t(s.d, s.d_token);
    t.leftCols(s.d_content()) = x.transpose().asDiagonal() * w.tokenizer;
    t.rightCols(s.d_pe) = s.alpha * w.pe;
    return t;
}

Vector pe_scores(const ConstructedSetting& s, const ConstructedWeights& w) {
    const RowVector query = (w.Q.transpose() * w.q).transpose();
    const Matrix Kp = w.K.bottomRows(s.d_pe);
    return (w.pe * Kp) * query.transpose();
}

double pe_score_gap(const Vector& scores) {
    if (scores.size() == 0) return 0.0;
    const double top = scores.maxCoeff();
    double next = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores[i] < top - 1e-12) next = std::max(next, scores[i]);
    return std::isfinite(next) ? top - next : 0.0;
}

Matrix constructed_attention(const ConstructedSetting& s, const ConstructedWeights& w, const Matrix& inputs) {
    const RowVector query = (w.Q.transpose() * w.q).transpose();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.d_token));
    Matrix out(inputs.rows(), s.d);
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        const Matrix t = constructed_tokens(s, w, inputs.row(r));
        Matrix probs;
        model::scaled_dot_product_attention(query, t * w.K, t * w.V, scale, &probs);
        out.row(r) = probs.row(0);
    }
    return out;
}

Matrix constructed_cls_outputs(const ConstructedSetting& s, const ConstructedWeights& w, const Matrix& inputs) {
    const RowVector query = (w.Q.transpose() * w.q).transpose();
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.d_token));
    Matrix out(inputs.rows(), s.d_token);
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        const Matrix t = constructed_tokens(s, w, inputs.row(r));
        out.row(r) = model::scaled_dot_product_attention(query, t * w.K, t * w.V, scale);
    }
    return out;
}

std::string to_string(BoundKind k) {
    switch (k) {
        case BoundKind::thm1: return "thm1";
        case BoundKind::thm2a: return "thm2a";
        case BoundKind::thm2b: return "thm2b";
    }
    return "thm1";
}

BoundKind parse_bound_kind(const std::string& s) {
    if (s == "thm1") return BoundKind::thm1;
    if (s == "thm2a") return BoundKind::thm2a;
    if (s == "thm2b") return BoundKind::thm2b;
    throw Error("unknown bound setting '" + s + "'");
}

ConstructedSetting setting_for(BoundKind kind, ConstructedSetting base) {
    switch (kind) {
        case BoundKind::thm1:
            base.pe = PEAssignment::distinct_orthogonal;
            base.structure = InputStructure::iid;
            break;
        case BoundKind::thm2a:
            base.pe = PEAssignment::distinct_orthogonal;
            base.structure = InputStructure::two_group;
            break;
        case BoundKind::thm2b:
            base.pe = PEAssignment::shared_within_groups;
            base.structure = InputStructure::two_group;
            break;
    }
    return base;
}

std::vector<BoundCheckRow> verify_bounds(BoundKind kind, ConstructedSetting base, const std::vector<double>& alphas,
                                         Eigen::Index n_samples, std::uint64_t seed) {
    ConstructedSetting s = setting_for(kind, base);
    const ConstructedWeights w = construct_weights(s, seed);
    const Matrix inputs = sample_inputs(s, n_samples, seed + 1);
    std::vector<BoundCheckRow> rows;
    for (double a : alphas) {
        s.alpha = a;
        BoundCheckRow row;
        row.alpha = a;
        row.C = c_alpha(a, s.tau, s.c_K, s.c_Q, s.c_q, s.d_token);
        row.measured = effective_rank(constructed_cls_outputs(s, w, inputs));
        const Bound b = kind == BoundKind::thm1    ? bound_thm1(row.C, s.d)
                        : kind == BoundKind::thm2a ? bound_thm2a(row.C, s.d)
                                                   : bound_thm2b(row.C);
        row.bound = b.value;
        row.approx = b.approx;
        row.holds = row.measured <= b.value + 1e-6;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tabspec::analysis
