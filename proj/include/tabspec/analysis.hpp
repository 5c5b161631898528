#pragma once

#include "tabspec/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabspec::analysis {

/// exp of the Shannon entropy (natural log) of the normalized singular
/// values; singular values below 1e-12 * sigma_max count as zero.
double effective_rank(const Matrix& M);

double c_alpha(double alpha, double tau, double c_K, double c_Q, double c_q, double d_token);

struct Bound {
    double value = 0.0;
    double approx = 0.0;  // large-C form
};

Bound bound_thm1(double C, double d);
Bound bound_thm2a(double C, double d);
Bound bound_thm2b(double C);

enum class PEAssignment { distinct_orthogonal, shared_within_groups, zero };
enum class InputStructure { iid, two_group };

std::string to_string(PEAssignment a);
std::string to_string(InputStructure s);

/// Single-layer, single-head attention readout of the CLS token with
/// hand-built weights: one PE score exceeds all others by tau (or, in the
/// shared mode, the first half's common score exceeds the second half's by
/// tau), the value map preserves the content block and zeroes the PE block,
/// and the tokenizer weights all have unit norm.
struct ConstructedSetting {
    int d = 8;
    int d_token = 16;
    int d_pe = 4;
    double tau = 2.0;
    double c_Q = 1.0, c_K = 1.0, c_q = 1.0;
    double alpha = 1.0;
    double content_share = 0.5;  // weight of the content direction in the key
    PEAssignment pe = PEAssignment::distinct_orthogonal;
    InputStructure structure = InputStructure::iid;

    int d_content() const { return d_token - d_pe; }
    void validate() const;
};

struct ConstructedWeights {
    Matrix Q, K, V;   // d_token x d_token; query = q^T Q, key_i = t_i^T K, value_i = t_i^T V
    Vector q;         // CLS embedding
    Matrix tokenizer; // d x d_content, row i is w_i
    Matrix pe;        // d x d_pe, unscaled
};

ConstructedWeights construct_weights(const ConstructedSetting& setting, std::uint64_t seed);

// n x d inputs in (0, 1): i.i.d. per entry, or theta for the first half and theta' for the rest.
Matrix sample_inputs(const ConstructedSetting& setting, Eigen::Index n, std::uint64_t seed);

// Token matrix (d x d_token) for one input row: [x_i w_i ; alpha p_i].
Matrix constructed_tokens(const ConstructedSetting& setting, const ConstructedWeights& w, const RowVector& x);
// PE contributions <Q^T q, K_p^T p_i> (unscaled by alpha), one per feature.
Vector pe_scores(const ConstructedSetting& setting, const ConstructedWeights& w);
// Max score minus the largest score among tokens of a different value.
double pe_score_gap(const Vector& scores);
// CLS outputs, n x d_token; attention over the d feature tokens with temperature sqrt(d_token).
Matrix constructed_cls_outputs(const ConstructedSetting& setting, const ConstructedWeights& w, const Matrix& inputs);
// Attention weights, n x d.
Matrix constructed_attention(const ConstructedSetting& setting, const ConstructedWeights& w, const Matrix& inputs);

double spectral_norm(const Matrix& M);

enum class BoundKind { thm1, thm2a, thm2b };
std::string to_string(BoundKind k);
BoundKind parse_bound_kind(const std::string& s);

struct BoundCheckRow {
    double alpha = 0.0;
    double C = 0.0;
    double measured = 0.0;
    double bound = 0.0;
    double approx = 0.0;
    bool holds = false;
};

/// Builds the constructed setting for `kind` at each alpha, measures the
/// effective rank of n_samples CLS outputs and compares with the bound.
std::vector<BoundCheckRow> verify_bounds(BoundKind kind, ConstructedSetting base, const std::vector<double>& alphas,
                                         Eigen::Index n_samples, std::uint64_t seed);
ConstructedSetting setting_for(BoundKind kind, ConstructedSetting base);

}  // namespace tabspec::analysis
