#pragma once

#include "tabspec/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tabspec::graphs {

enum class GraphMethod { pearson, spearman, chow_liu, notears, imported };

std::string to_string(GraphMethod m);
GraphMethod parse_method(const std::string& name);

/// Weighted feature-dependency graph. Weights are nonnegative with a zero
/// diagonal; undirected graphs are exactly symmetric.
struct FeatureGraph {
    Matrix weights;
    bool directed = false;
    GraphMethod method = GraphMethod::imported;
    std::map<std::string, std::string> params;

    std::size_t n_nodes() const { return static_cast<std::size_t>(weights.rows()); }
    void validate() const;
};

// |Pearson| between columns; constant columns get zero weight.
FeatureGraph pearson_graph(const Matrix& X);
// |Pearson| of average-rank transforms.
FeatureGraph spearman_graph(const Matrix& X);

Vector average_ranks(const Eigen::Ref<const Vector>& x);
double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Plug-in mutual information (nats) over a joint histogram. Continuous
/// axes use B = min(ceil(sqrt(m)), 32) equal-width bins; a column with at
/// most two distinct values uses its native values.
double mutual_information(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);
Matrix mutual_information_matrix(const Matrix& X);

using Edge = std::pair<std::size_t, std::size_t>;  // (lo, hi)

// Kruskal on a symmetric weight matrix, heaviest first; equal weights are
// taken in lexicographic (lo, hi) order.
std::vector<Edge> max_spanning_tree(const Matrix& weights);

FeatureGraph chow_liu_tree(const Matrix& X);

struct NotearsOptions {
    double lambda1 = 0.1;
    int max_iter = 100;
    double h_tol = 1e-8;
    double rho_max = 1e16;
    double w_threshold = 0.3;
};

struct NotearsResult {
    FeatureGraph graph;
    Matrix raw_weights;  // signed, before thresholding
    double h = 0.0;      // acyclicity residual of raw_weights
    bool converged = false;
    int outer_iterations = 0;
    int cycles_broken = 0;
};

/// Linear NOTEARS with an L1 penalty, solved by augmented Lagrangian over
/// the (w+, w-) split with a bound-constrained quasi-Newton inner solver.
/// Columns are centered, not rescaled.
NotearsResult notears(const Matrix& X, const NotearsOptions& options = {});

// tr(exp(W o W)) - d and its gradient.
std::pair<double, Matrix> acyclicity(const Matrix& W);

bool is_acyclic(const Matrix& weights);
// Repeatedly removes the lightest edge on a directed cycle; returns removals.
int break_cycles(Matrix& weights);

struct EntropyResult {
    double entropy = 0.0;
    std::vector<std::optional<double>> per_node;  // nullopt for isolated nodes
    bool degenerate = false;                      // every node isolated
};

EntropyResult graph_entropy(const FeatureGraph& g);

// Second-smallest eigenvalue of D - A_sym, clipped at 0.
double fiedler_value(const FeatureGraph& g);

struct GraphDiagnostics {
    double entropy = 0.0;
    double fiedler = 0.0;
    std::vector<std::optional<double>> per_node_entropy;
};
GraphDiagnostics diagnostics(const FeatureGraph& g);

// Dense n x n CSV; |entries| with the diagonal zeroed.
FeatureGraph import_graph(const std::filesystem::path& path, std::size_t expected_nodes, bool directed);

void save_graph(const FeatureGraph& g, const std::filesystem::path& csv, const std::filesystem::path& meta_json);
FeatureGraph load_graph(const std::filesystem::path& csv, const std::filesystem::path& meta_json);

}  // namespace tabspec::graphs
