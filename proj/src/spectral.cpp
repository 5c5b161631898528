#include "tabspec/spectral.hpp"

#include "tabspec/io.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tabspec::spectral {

std::string to_string(LaplacianKind k) { return k == LaplacianKind::normalized ? "normalized" : "unnormalized"; }

LaplacianKind parse_laplacian(const std::string& name) {
    if (name == "normalized") return LaplacianKind::normalized;
    if (name == "unnormalized") return LaplacianKind::unnormalized;
    throw Error("unknown laplacian kind '" + name + "'");
}

Matrix symmetrize(const Matrix& A) {
    if (A.rows() != A.cols()) throw Error("symmetrize: matrix must be square");
    return 0.5 * (A + A.transpose());
}

Matrix laplacian_matrix(const Matrix& a_sym, LaplacianKind kind) {
    const Eigen::Index n = a_sym.rows();
    const Vector deg = a_sym.rowwise().sum();
    if (kind == LaplacianKind::unnormalized) {
        Matrix L = -a_sym;
        L.diagonal() = deg - a_sym.diagonal();
        return L;
    }
    Vector inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
    Matrix L = -(inv_sqrt.asDiagonal() * a_sym * inv_sqrt.asDiagonal());
    for (Eigen::Index i = 0; i < n; ++i) L(i, i) += 1.0;
    return L;
}

static void fix_sign(Eigen::Ref<Vector> v) {
    const double max_abs = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= max_abs - 1e-12) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

SpectralDecomposition laplacian(const Matrix& a_sym, LaplacianKind kind) {
    if (a_sym.rows() != a_sym.cols()) throw Error("laplacian: adjacency must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian_matrix(a_sym, kind));
    if (es.info() != Eigen::Success) throw Error("laplacian: eigendecomposition failed");

    SpectralDecomposition out;
    out.kind = kind;
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
    const Eigen::Index n = out.eigenvalues.size();
    for (Eigen::Index c = 0; c < n; ++c) fix_sign(out.eigenvectors.col(c));

    // Deterministic order inside numerically degenerate clusters.
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n && out.eigenvalues[end] - out.eigenvalues[start] < 1e-9) ++end;
        if (end - start > 1) {
            std::vector<Eigen::Index> order(static_cast<std::size_t>(end - start));
            std::iota(order.begin(), order.end(), start);
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                const auto& va = out.eigenvectors.col(a);
                const auto& vb = out.eigenvectors.col(b);
                return std::lexicographical_compare(va.data(), va.data() + n, vb.data(), vb.data() + n);
            });
            const Matrix block = out.eigenvectors.middleCols(start, end - start);
            for (std::size_t k = 0; k < order.size(); ++k)
                out.eigenvectors.col(start + static_cast<Eigen::Index>(k)) = block.col(order[k] - start);
        }
        start = end;
    }
    return out;
}

namespace {

// Number of leading entries kept before the first significant gap.
int truncate_at_gap(const std::vector<double>& seq) {
    const int n = static_cast<int>(seq.size());
    if (n < 4) return n;
    std::vector<double> gaps;
    for (int i = 0; i + 1 < n; ++i) gaps.push_back(std::abs(seq[static_cast<std::size_t>(i + 1)] - seq[static_cast<std::size_t>(i)]));
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t g = sorted.size();
    const double median = g % 2 ? sorted[g / 2] : 0.5 * (sorted[g / 2 - 1] + sorted[g / 2]);
    for (std::size_t i = 0; i < gaps.size(); ++i)
        if (gaps[i] > 2.0 * median) return static_cast<int>(i) + 1;
    return n;
}

}  // namespace

KSelection auto_select_k(std::span<const double> eigenvalues) {
    std::vector<double> low, high;
    for (std::size_t i = 1; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] <= kLowThreshold) low.push_back(eigenvalues[i]);
    for (std::size_t i = eigenvalues.size(); i-- > 0;)
        if (eigenvalues[i] >= kHighThreshold) high.push_back(eigenvalues[i]);  // from the top down

    KSelection k;
    k.low_count = truncate_at_gap(low);
    k.high_count = truncate_at_gap(high);
    k.k_first = std::max(kMinK, std::min(k.low_count, kMaxK));
    k.k_last = k.k_first;
    return k;
}

Matrix standardize_columns(const Matrix& m, std::vector<bool>* degenerate) {
    Matrix out(m.rows(), m.cols());
    if (degenerate) degenerate->assign(static_cast<std::size_t>(m.cols()), false);
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        const Vector centered = m.col(c).array() - mean;
        const double var = centered.squaredNorm() / n;
        if (var < 1e-12) {
            out.col(c).setZero();
            if (degenerate) (*degenerate)[static_cast<std::size_t>(c)] = true;
        } else {
            out.col(c) = centered / std::sqrt(var);
        }
    }
    return out;
}

PEMatrix PEMatrix::with_alpha(double a) const {
    if (a < 0.0) throw Error("alpha must be nonnegative");
    PEMatrix out = *this;
    out.alpha = a;
    out.values = a * base;
    return out;
}

PEMatrix build_pe(const SpectralDecomposition& decomp, int k_first, int k_last, double alpha) {
    const Eigen::Index d = decomp.eigenvectors.cols();
    if (k_first < 0 || k_last < 0) throw Error("k must be nonnegative");
    if (k_first + k_last > d - 1) throw Error("not enough eigenvectors");
    if (alpha < 0.0) throw Error("alpha must be nonnegative");

    Matrix selected(decomp.eigenvectors.rows(), k_first + k_last);
    selected.leftCols(k_first) = decomp.eigenvectors.middleCols(1, k_first);
    selected.rightCols(k_last) = decomp.eigenvectors.rightCols(k_last);

    PEMatrix pe;
    pe.base = standardize_columns(selected, &pe.degenerate_columns);
    pe.k_first = k_first;
    pe.k_last = k_last;
    return pe.with_alpha(alpha);
}

PEMatrix consolidate_onehot(const PEMatrix& pe, const Groups& groups) {
    PEMatrix out = pe;
    out.base.resize(static_cast<Eigen::Index>(groups.size()), pe.cols());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw Error("consolidate_onehot: empty group");
        RowVector acc = RowVector::Zero(pe.cols());
        for (auto node : groups[g]) {
            if (static_cast<Eigen::Index>(node) >= pe.rows()) throw Error("consolidate_onehot: group references a missing node");
            acc += pe.base.row(static_cast<Eigen::Index>(node));
        }
        out.base.row(static_cast<Eigen::Index>(g)) = acc / static_cast<double>(groups[g].size());
    }
    out.consolidated = true;
    out.values = out.alpha * out.base;
    return out;
}

PEMatrix random_pe(Eigen::Index rows, Eigen::Index cols, double alpha, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix raw(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) raw(r, c) = normal(rng);
    PEMatrix pe;
    pe.base = standardize_columns(raw, &pe.degenerate_columns);
    pe.k_first = static_cast<int>(cols / 2);
    pe.k_last = static_cast<int>(cols - cols / 2);
    return pe.with_alpha(alpha);
}

void save_pe(const PEMatrix& pe, const PEMetadata& meta, const std::filesystem::path& csv,
             const std::filesystem::path& meta_json) {
    io::write_atomic(csv, io::matrix_to_csv(pe.values));
    nlohmann::json j{{"alpha", meta.alpha},
                     {"k_first", meta.k_first},
                     {"k_last", meta.k_last},
                     {"laplacian_kind", meta.laplacian_kind},
                     {"source_graph_hash", meta.source_graph_hash},
                     {"consolidated", meta.consolidated},
                     {"rows", pe.rows()},
                     {"cols", pe.cols()}};
    io::write_atomic(meta_json, j.dump(2) + "\n");
}

PEMatrix load_pe(const std::filesystem::path& csv, const std::filesystem::path& meta_json) {
    const auto j = nlohmann::json::parse(io::read_text(meta_json));
    PEMatrix pe;
    pe.values = io::read_matrix_csv(csv);
    pe.alpha = j.at("alpha").get<double>();
    pe.k_first = j.at("k_first").get<int>();
    pe.k_last = j.at("k_last").get<int>();
    pe.consolidated = j.at("consolidated").get<bool>();
    pe.base = pe.alpha > 0.0 ? Matrix(pe.values / pe.alpha) : pe.values;
    pe.degenerate_columns.assign(static_cast<std::size_t>(pe.cols()), false);
    return pe;
}

}  // namespace tabspec::spectral
