#pragma once

#include "tabspec/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tabspec::spectral {

enum class LaplacianKind { unnormalized, normalized };

std::string to_string(LaplacianKind k);
LaplacianKind parse_laplacian(const std::string& name);

Matrix symmetrize(const Matrix& A);

// D - A, or I - D^-1/2 A D^-1/2 with identity rows for isolated nodes.
Matrix laplacian_matrix(const Matrix& a_sym, LaplacianKind kind);

/// Full eigendecomposition of a graph Laplacian. Eigenvalues ascend; each
/// eigenvector's largest-magnitude entry is positive (first one on ties);
/// vectors inside a degenerate cluster (gap < 1e-9) are ordered
/// lexicographically by entries.
struct SpectralDecomposition {
    Vector eigenvalues;
    Matrix eigenvectors;  // column i pairs with eigenvalues[i]
    LaplacianKind kind = LaplacianKind::normalized;
};

SpectralDecomposition laplacian(const Matrix& a_sym, LaplacianKind kind = LaplacianKind::normalized);

inline constexpr double kLowThreshold = 0.75;
inline constexpr double kHighThreshold = 1.25;
inline constexpr int kMinK = 2;
inline constexpr int kMaxK = 10;

struct KSelection {
    int k_first = kMinK;
    int k_last = kMinK;
    int low_count = 0;   // after gap truncation
    int high_count = 0;  // after gap truncation
};

/// Automatic k from normalized-Laplacian eigenvalues: count eigenvalues
/// below/above the mid-frequency window, cut each side before its first
/// gap exceeding twice the median consecutive gap (when the side has at
/// least four candidates), then clamp to [2, 10] with k_last = k_first.
KSelection auto_select_k(std::span<const double> eigenvalues);

/// Positional-encoding matrix. `base` holds the standardized encodings,
/// `values` = alpha * base.
struct PEMatrix {
    Matrix base;
    Matrix values;
    double alpha = 1.0;
    int k_first = 0;
    int k_last = 0;
    bool consolidated = false;
    std::vector<bool> degenerate_columns;  // zero-variance columns set to 0

    Eigen::Index rows() const { return base.rows(); }
    Eigen::Index cols() const { return base.cols(); }
    PEMatrix with_alpha(double a) const;
};

// Columns e_2..e_{k_first+1} and e_{d-k_last+1}..e_d, standardized per column.
PEMatrix build_pe(const SpectralDecomposition& decomp, int k_first, int k_last, double alpha);

// One row per original feature: mean of its group's node rows.
PEMatrix consolidate_onehot(const PEMatrix& pe, const Groups& groups);

// Standard-normal matrix with the same standardization and scaling.
PEMatrix random_pe(Eigen::Index rows, Eigen::Index cols, double alpha, std::uint64_t seed);

// Zero-mean, unit population variance per column; flags near-constant columns.
Matrix standardize_columns(const Matrix& m, std::vector<bool>* degenerate = nullptr);

struct PEMetadata {
    double alpha = 1.0;
    int k_first = 0;
    int k_last = 0;
    std::string laplacian_kind;
    std::string source_graph_hash;
    bool consolidated = false;
};

void save_pe(const PEMatrix& pe, const PEMetadata& meta, const std::filesystem::path& csv,
             const std::filesystem::path& meta_json);
// Returns values as stored (alpha-scaled); base is recovered when alpha > 0.
PEMatrix load_pe(const std::filesystem::path& csv, const std::filesystem::path& meta_json);

}  // namespace tabspec::spectral
