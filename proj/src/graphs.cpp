#include "tabspec/graphs.hpp"

#include "tabspec/io.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <set>

namespace tabspec::graphs {

std::string to_string(GraphMethod m) {
    switch (m) {
        case GraphMethod::pearson: return "pearson";
        case GraphMethod::spearman: return "spearman";
        case GraphMethod::chow_liu: return "chow-liu";
        case GraphMethod::notears: return "notears";
        case GraphMethod::imported: return "imported";
    }
    return "unknown";
}

GraphMethod parse_method(const std::string& name) {
    if (name == "pearson") return GraphMethod::pearson;
    if (name == "spearman") return GraphMethod::spearman;
    if (name == "chow-liu" || name == "chow_liu") return GraphMethod::chow_liu;
    if (name == "notears") return GraphMethod::notears;
    if (name == "imported") return GraphMethod::imported;
    throw Error("unknown graph method '" + name + "'");
}

void FeatureGraph::validate() const {
    if (weights.rows() != weights.cols()) throw Error("graph weights must be square");
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
        if (weights(i, i) != 0.0) throw Error("graph weights must have a zero diagonal");
        for (Eigen::Index j = 0; j < weights.cols(); ++j) {
            if (!(weights(i, j) >= 0.0)) throw Error("graph weights must be nonnegative");
            if (!directed && weights(i, j) != weights(j, i)) throw Error("undirected graph weights must be symmetric");
        }
    }
}

double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size() || a.size() < 2) throw Error("pearson: need two equal-length columns with m >= 2");
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    const double na = ac.norm();
    const double nb = bc.norm();
    if (na < 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) || nb < 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()))
        return 0.0;
    return std::clamp(ac.dot(bc) / (na * nb), -1.0, 1.0);
}

static Matrix abs_correlation(const Matrix& X) {
    const Eigen::Index d = X.cols();
    if (X.rows() < 2) throw Error("correlation graph needs m >= 2");
    Matrix W = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) W(i, j) = W(j, i) = std::abs(pearson(X.col(i), X.col(j)));
    return W;
}

FeatureGraph pearson_graph(const Matrix& X) {
    return FeatureGraph{abs_correlation(X), false, GraphMethod::pearson, {}};
}

Vector average_ranks(const Eigen::Ref<const Vector>& x) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    Vector ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

FeatureGraph spearman_graph(const Matrix& X) {
    Matrix R(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) R.col(c) = average_ranks(X.col(c));
    return FeatureGraph{abs_correlation(R), false, GraphMethod::spearman, {}};
}

namespace {

struct Binned {
    std::vector<int> codes;
    int bins = 1;
};

Binned bin_column(const Eigen::Ref<const Vector>& x) {
    const Eigen::Index m = x.size();
    Binned out;
    out.codes.resize(static_cast<std::size_t>(m));
    std::set<double> distinct;
    for (Eigen::Index i = 0; i < m && distinct.size() <= 2; ++i) distinct.insert(x[i]);
    if (distinct.size() <= 2) {
        const double lo = *distinct.begin();
        out.bins = static_cast<int>(distinct.size());
        for (Eigen::Index i = 0; i < m; ++i) out.codes[static_cast<std::size_t>(i)] = x[i] == lo ? 0 : 1;
        return out;
    }
    const int B = std::min(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m)))), 32);
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    out.bins = B;
    const double width = (hi - lo) / B;
    for (Eigen::Index i = 0; i < m; ++i) {
        int b = static_cast<int>(std::floor((x[i] - lo) / width));
        out.codes[static_cast<std::size_t>(i)] = std::clamp(b, 0, B - 1);
    }
    return out;
}

double mi_from_bins(const Binned& a, const Binned& b) {
    const std::size_t m = a.codes.size();
    std::vector<double> joint(static_cast<std::size_t>(a.bins * b.bins), 0.0);
    std::vector<double> pa(static_cast<std::size_t>(a.bins), 0.0), pb(static_cast<std::size_t>(b.bins), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        joint[static_cast<std::size_t>(a.codes[i] * b.bins + b.codes[i])] += 1.0;
        pa[static_cast<std::size_t>(a.codes[i])] += 1.0;
        pb[static_cast<std::size_t>(b.codes[i])] += 1.0;
    }
    const double n = static_cast<double>(m);
    double mi = 0.0;
    for (int i = 0; i < a.bins; ++i)
        for (int j = 0; j < b.bins; ++j) {
            const double c = joint[static_cast<std::size_t>(i * b.bins + j)];
            if (c == 0.0) continue;
            mi += (c / n) * std::log(c * n / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
        }
    return std::max(mi, 0.0);
}

}  // namespace

double mutual_information(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size() || a.size() < 2) throw Error("mutual_information: need two equal-length columns with m >= 2");
    return mi_from_bins(bin_column(a), bin_column(b));
}

Matrix mutual_information_matrix(const Matrix& X) {
    const Eigen::Index d = X.cols();
    std::vector<Binned> binned;
    binned.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) binned.push_back(bin_column(X.col(c)));
    Matrix M = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j)
            M(i, j) = M(j, i) = mi_from_bins(binned[static_cast<std::size_t>(i)], binned[static_cast<std::size_t>(j)]);
    return M;
}

std::vector<Edge> max_spanning_tree(const Matrix& weights) {
    const std::size_t n = static_cast<std::size_t>(weights.rows());
    struct Candidate {
        double w;
        std::size_t lo, hi;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            cands.push_back({weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), i, j});
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.w != b.w) return a.w > b.w;
        return std::tie(a.lo, a.hi) < std::tie(b.lo, b.hi);
    });

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<Edge> tree;
    for (const auto& c : cands) {
        const auto a = find(c.lo);
        const auto b = find(c.hi);
        if (a == b) continue;
        parent[a] = b;
        tree.emplace_back(c.lo, c.hi);
        if (tree.size() + 1 == n) break;
    }
    std::sort(tree.begin(), tree.end());
    return tree;
}

FeatureGraph chow_liu_tree(const Matrix& X) {
    if (X.cols() < 2) throw Error("chow_liu_tree needs d >= 2");
    const Matrix mi = mutual_information_matrix(X);
    FeatureGraph g{Matrix::Zero(X.cols(), X.cols()), false, GraphMethod::chow_liu, {}};
    std::string edges;
    for (const auto& [i, j] : max_spanning_tree(mi)) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        g.weights(a, b) = g.weights(b, a) = mi(a, b);
        if (!edges.empty()) edges += ";";
        edges += std::to_string(i) + "-" + std::to_string(j);
    }
    g.params["edges"] = edges;
    return g;
}

bool is_acyclic(const Matrix& weights) {
    // Kahn's algorithm
    const Eigen::Index n = weights.rows();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (weights(i, j) != 0.0) ++indeg[static_cast<std::size_t>(j)];
    std::vector<Eigen::Index> queue;
    for (Eigen::Index i = 0; i < n; ++i)
        if (indeg[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
    Eigen::Index visited = 0;
    while (!queue.empty()) {
        const auto u = queue.back();
        queue.pop_back();
        ++visited;
        for (Eigen::Index v = 0; v < n; ++v)
            if (weights(u, v) != 0.0 && --indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
    }
    return visited == n;
}

static std::vector<Eigen::Index> find_cycle(const Matrix& w) {
    const Eigen::Index n = w.rows();
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 on stack, 2 done
    std::vector<Eigen::Index> stack;
    std::vector<Eigen::Index> cycle;

    std::function<bool(Eigen::Index)> dfs = [&](Eigen::Index u) {
        state[static_cast<std::size_t>(u)] = 1;
        stack.push_back(u);
        for (Eigen::Index v = 0; v < n; ++v) {
            if (w(u, v) == 0.0) continue;
            if (state[static_cast<std::size_t>(v)] == 1) {
                auto it = std::find(stack.begin(), stack.end(), v);
                cycle.assign(it, stack.end());
                return true;
            }
            if (state[static_cast<std::size_t>(v)] == 0 && dfs(v)) return true;
        }
        stack.pop_back();
        state[static_cast<std::size_t>(u)] = 2;
        return false;
    };
    for (Eigen::Index s = 0; s < n; ++s)
        if (state[static_cast<std::size_t>(s)] == 0 && dfs(s)) return cycle;
    return {};
}

int break_cycles(Matrix& weights) {
    int removed = 0;
    while (true) {
        const auto cycle = find_cycle(weights);
        if (cycle.empty()) return removed;
        Eigen::Index best_u = -1, best_v = -1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            const auto u = cycle[k];
            const auto v = cycle[(k + 1) % cycle.size()];
            if (std::abs(weights(u, v)) < best) {
                best = std::abs(weights(u, v));
                best_u = u;
                best_v = v;
            }
        }
        weights(best_u, best_v) = 0.0;
        ++removed;
    }
}

EntropyResult graph_entropy(const FeatureGraph& g) {
    const Eigen::Index n = g.weights.rows();
    EntropyResult out;
    out.per_node.assign(static_cast<std::size_t>(n), std::nullopt);
    const double norm = n > 2 ? std::log(static_cast<double>(n - 1)) : 0.0;
    double sum = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) total += g.weights(i, j);
        if (total <= 0.0) continue;
        double h = 0.0;
        if (norm > 0.0) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i || g.weights(i, j) <= 0.0) continue;
                const double p = g.weights(i, j) / total;
                h -= p * std::log(p);
            }
            h /= norm;
        }
        out.per_node[static_cast<std::size_t>(i)] = h;
        sum += h;
        ++counted;
    }
    out.degenerate = counted == 0;
    out.entropy = counted ? sum / counted : 0.0;
    return out;
}

double fiedler_value(const FeatureGraph& g) {
    if (g.n_nodes() < 2) throw Error("fiedler_value needs at least 2 nodes");
    const Matrix A = 0.5 * (g.weights + g.weights.transpose());
    Matrix L = -A;
    L.diagonal() = A.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<Matrix> es(L, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues()[1]);
}

GraphDiagnostics diagnostics(const FeatureGraph& g) {
    auto e = graph_entropy(g);
    return {e.entropy, g.n_nodes() >= 2 ? fiedler_value(g) : 0.0, std::move(e.per_node)};
}

FeatureGraph import_graph(const std::filesystem::path& path, std::size_t expected_nodes, bool directed) {
    Matrix m = io::read_matrix_csv(path);
    if (m.rows() != m.cols()) throw Error("imported graph is not square: " + path.string());
    if (static_cast<std::size_t>(m.rows()) != expected_nodes)
        throw Error("imported graph has " + std::to_string(m.rows()) + " nodes, table has " +
                    std::to_string(expected_nodes) + " columns");
    m = m.cwiseAbs();
    m.diagonal().setZero();
    if (!directed) {
        if (!m.isApprox(m.transpose(), 0.0)) throw Error("imported graph declared undirected but is not symmetric");
    }
    return FeatureGraph{m, directed, GraphMethod::imported, {{"source", path.filename().string()}}};
}

void save_graph(const FeatureGraph& g, const std::filesystem::path& csv, const std::filesystem::path& meta_json) {
    io::write_atomic(csv, io::matrix_to_csv(g.weights));
    nlohmann::json meta{{"method", to_string(g.method)},
                        {"directed", g.directed},
                        {"n_nodes", g.n_nodes()},
                        {"params", g.params}};
    io::write_atomic(meta_json, meta.dump(2) + "\n");
}

FeatureGraph load_graph(const std::filesystem::path& csv, const std::filesystem::path& meta_json) {
    const auto meta = nlohmann::json::parse(io::read_text(meta_json));
    FeatureGraph g;
    g.weights = io::read_matrix_csv(csv);
    g.directed = meta.at("directed").get<bool>();
    g.method = parse_method(meta.at("method").get<std::string>());
    g.params = meta.at("params").get<std::map<std::string, std::string>>();
    g.validate();
    return g;
}

}  // namespace tabspec::graphs
