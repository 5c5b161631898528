#pragma once

// Reference implementations used as test oracles. They deliberately avoid the
// library and Eigen's decompositions.

#include "tabspec/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

// One-sided Jacobi SVD on columns; returns singular values, unsorted.
inline std::vector<double> singular_values(const tabspec::Matrix& input) {
    const bool wide = input.cols() > input.rows();
    const tabspec::Matrix A0 = wide ? tabspec::Matrix(input.transpose()) : input;
    const int m = static_cast<int>(A0.rows());
    const int n = static_cast<int>(A0.cols());
    std::vector<std::vector<double>> col(n, std::vector<double>(m));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) col[j][i] = A0(i, j);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                double a = 0, b = 0, c = 0;
                for (int i = 0; i < m; ++i) {
                    a += col[p][i] * col[p][i];
                    b += col[q][i] * col[q][i];
                    c += col[p][i] * col[q][i];
                }
                if (c == 0.0 || std::abs(c) <= 1e-15 * std::sqrt(a * b)) continue;
                off = std::max(off, std::abs(c) / std::sqrt(a * b));
                const double zeta = (b - a) / (2 * c);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
                const double cs = 1 / std::sqrt(1 + t * t);
                const double sn = cs * t;
                for (int i = 0; i < m; ++i) {
                    const double x = col[p][i], y = col[q][i];
                    col[p][i] = cs * x - sn * y;
                    col[q][i] = sn * x + cs * y;
                }
            }
        if (off < 1e-15) break;
    }
    std::vector<double> s(n);
    for (int j = 0; j < n; ++j) {
        double ss = 0;
        for (double v : col[j]) ss += v * v;
        s[j] = std::sqrt(ss);
    }
    return s;
}

// exp of the Shannon entropy of the normalized spectrum.
inline double effective_rank(const tabspec::Matrix& M) {
    const auto s = singular_values(M);
    double total = 0, smax = 0;
    for (double v : s) {
        total += v;
        smax = std::max(smax, v);
    }
    double h = 0;
    for (double v : s) {
        if (v <= 1e-12 * smax) continue;
        const double p = v / total;
        h -= p * std::log(p);
    }
    return std::exp(h);
}

using Edge = std::pair<std::size_t, std::size_t>;

// Every labelled spanning tree on n nodes, decoded from Pruefer sequences.
inline std::vector<std::vector<Edge>> all_spanning_trees(std::size_t n) {
    std::vector<std::vector<Edge>> out;
    if (n < 2) return out;
    if (n == 2) return {{{0, 1}}};
    const std::size_t len = n - 2;
    std::vector<std::size_t> seq(len, 0);
    while (true) {
        std::vector<int> degree(n, 1);
        for (auto v : seq) ++degree[v];
        std::vector<Edge> tree;
        for (auto v : seq) {
            std::size_t leaf = 0;
            while (degree[leaf] != 1) ++leaf;
            tree.emplace_back(std::min(leaf, v), std::max(leaf, v));
            --degree[leaf];
            --degree[v];
        }
        std::size_t u = n, w = n;
        for (std::size_t i = 0; i < n; ++i)
            if (degree[i] == 1) (u == n ? u : w) = i;
        tree.emplace_back(u, w);
        std::sort(tree.begin(), tree.end());
        out.push_back(tree);

        std::size_t pos = 0;
        while (pos < len && ++seq[pos] == n) seq[pos++] = 0;
        if (pos == len) break;
    }
    return out;
}

// Brute-force maximum spanning tree. Among optimal trees the one whose edges,
// sorted by (weight desc, lo, hi), form the lexicographically smallest list.
inline std::vector<Edge> max_spanning_tree(const tabspec::Matrix& W) {
    const std::size_t n = static_cast<std::size_t>(W.rows());
    using Key = std::tuple<double, std::size_t, std::size_t>;
    auto keys = [&](const std::vector<Edge>& t) {
        std::vector<Key> k;
        for (auto [a, b] : t) k.emplace_back(-W(a, b), a, b);
        std::sort(k.begin(), k.end());
        return k;
    };
    std::vector<Edge> best;
    std::vector<Key> best_keys;
    for (const auto& t : all_spanning_trees(n)) {
        auto k = keys(t);
        if (best.empty() || k < best_keys) {
            best = t;
            best_keys = std::move(k);
        }
    }
    return best;
}

// Central finite difference of f at x along every coordinate.
inline tabspec::Matrix numeric_gradient(tabspec::Matrix& x, const std::function<double()>& f, double h = 1e-6) {
    tabspec::Matrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double keep = x(i, j);
            x(i, j) = keep + h;
            const double up = f();
            x(i, j) = keep - h;
            const double down = f();
            x(i, j) = keep;
            g(i, j) = (up - down) / (2 * h);
        }
    return g;
}

// Error relative to the larger norm, floored at 1e-4 so tensors whose exact
// gradient is zero are judged on absolute finite-difference noise.
inline double relative_error(const tabspec::Matrix& a, const tabspec::Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-4});
    return (a - b).norm() / scale;
}

}  // namespace oracle
