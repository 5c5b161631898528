#include "oracles.hpp"
#include "tabspec/graphs.hpp"
#include "tabspec/io.hpp"

#include <doctest.h>

#include <random>

using namespace tabspec;
using namespace tabspec::graphs;

namespace {

Matrix two_columns(const std::vector<double>& a, const std::vector<double>& b) {
    Matrix X(static_cast<Eigen::Index>(a.size()), 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = a[i];
        X(static_cast<Eigen::Index>(i), 1) = b[i];
    }
    return X;
}

Matrix gaussian(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 1);
    Matrix X(m, d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = n(rng);
    return X;
}

FeatureGraph from_weights(Matrix W) {
    FeatureGraph g;
    g.weights = std::move(W);
    return g;
}

}  // namespace

TEST_SUITE("graphs") {

TEST_CASE("pearson weights are absolute correlations") {
    CHECK(pearson_graph(two_columns({1, 2, 3, 4}, {2, 4, 6, 8})).weights(0, 1) == doctest::Approx(1.0));
    CHECK(pearson_graph(two_columns({1, 2, 3, 4}, {-1, -2, -3, -4})).weights(0, 1) == doctest::Approx(1.0));
    CHECK(pearson_graph(two_columns({1, 2, 3, 4}, {1, 3, 2, 4})).weights(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("constant column has zero pearson weight") {
    CHECK(pearson_graph(two_columns({1, 2, 3}, {7, 7, 7})).weights(0, 1) == 0.0);
}

TEST_CASE("spearman is invariant under monotone maps") {
    std::vector<double> a, b;
    for (int i = 0; i < 20; ++i) {
        a.push_back(std::sin(i * 1.3) * 5);
        b.push_back(std::pow(a.back(), 3));
    }
    CHECK(spearman_graph(two_columns(a, b)).weights(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("spearman ties use average ranks") {
    Vector x(3);
    x << 1, 1, 2;
    const Vector r = average_ranks(x);
    CHECK(r[0] == 1.5);
    CHECK(r[1] == 1.5);
    CHECK(r[2] == 3.0);
    CHECK(spearman_graph(two_columns({1, 1, 2}, {3, 3, 5})).weights(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("spearman of independent columns is small") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        CHECK(spearman_graph(gaussian(1000, 2, seed)).weights(0, 1) < 0.1);
}

TEST_CASE("mutual information of identical binary columns") {
    Vector a(100), b(100);
    for (int i = 0; i < 100; ++i) a[i] = b[i] = i < 50 ? 0.0 : 1.0;
    CHECK(mutual_information(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information of a column with itself is its binned entropy") {
    const Matrix X = gaussian(400, 1, 3);
    const double mi = mutual_information(X.col(0), X.col(0));
    // 20 equal-width bins, plug-in entropy computed directly
    const double lo = X.col(0).minCoeff(), hi = X.col(0).maxCoeff();
    std::vector<double> counts(20, 0);
    for (Eigen::Index i = 0; i < 400; ++i)
        counts[std::min<std::size_t>(19, static_cast<std::size_t>((X(i, 0) - lo) / ((hi - lo) / 20)))] += 1;
    double h = 0;
    for (double c : counts)
        if (c > 0) h -= c / 400 * std::log(c / 400);
    CHECK(mi > 0);
    CHECK(mi == doctest::Approx(h).epsilon(1e-9));
}

TEST_CASE("mutual information of independent uniforms is near zero") {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0, 1);
        Vector a(10000), b(10000);
        for (int i = 0; i < 10000; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        const double mi = mutual_information(a, b);
        CHECK(mi <= 0.06);
        total += mi;
    }
    CHECK(total / 5 <= 0.05);
}

TEST_CASE("chow-liu on two nodes is the single edge") {
    const auto g = chow_liu_tree(gaussian(50, 2, 1));
    CHECK(g.weights(0, 1) > 0);
    CHECK(g.weights(0, 1) == g.weights(1, 0));
}

TEST_CASE("max spanning tree picks the heaviest pair on a triangle") {
    Matrix W(3, 3);
    W << 0, 0.9, 0.5, 0.9, 0, 0.1, 0.5, 0.1, 0;
    const auto t = max_spanning_tree(W);
    CHECK(t == std::vector<Edge>{{0, 1}, {0, 2}});
}

TEST_CASE("chow-liu tree is connected and acyclic and matches brute force") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::Index d = 3 + static_cast<Eigen::Index>(seed % 4);
        const Matrix X = gaussian(200, d, seed);
        const auto g = chow_liu_tree(X);
        std::vector<Edge> edges;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j)
                if (g.weights(i, j) > 0) edges.emplace_back(i, j);
        CHECK(edges.size() == static_cast<std::size_t>(d - 1));
        CHECK(edges == oracle::max_spanning_tree(mutual_information_matrix(X)));
    }
}

TEST_CASE("pruefer enumeration counts n^(n-2) trees") {
    CHECK(oracle::all_spanning_trees(4).size() == 16);
    CHECK(oracle::all_spanning_trees(5).size() == 125);
}

TEST_CASE("acyclicity function is zero exactly on DAGs") {
    Matrix dag(3, 3);
    dag << 0, 1, 0, 0, 0, 2, 0, 0, 0;
    CHECK(acyclicity(dag).first == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(is_acyclic(dag));
    Matrix cyc = dag;
    cyc(2, 0) = 0.5;
    CHECK(acyclicity(cyc).first > 0);
    CHECK_FALSE(is_acyclic(cyc));
    CHECK(break_cycles(cyc) == 1);
    CHECK(cyc(2, 0) == 0.0);
}

TEST_CASE("acyclicity gradient matches finite differences") {
    Matrix W(3, 3);
    W << 0, 0.4, -0.2, 0.3, 0, 0.5, 0.1, -0.6, 0;
    const Matrix analytic = acyclicity(W).second;
    const Matrix numeric = oracle::numeric_gradient(W, [&] { return acyclicity(W).first; });
    CHECK(oracle::relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("notears with a huge penalty returns the empty graph") {
    Matrix X = gaussian(500, 3, 2);
    X.col(1) += 0.9 * X.col(0);
    NotearsOptions o;
    o.lambda1 = 1e6;
    CHECK(notears(X, o).graph.weights.isZero());
}

TEST_CASE("graph entropy on hand-checked graphs") {
    Matrix K = Matrix::Ones(4, 4) - Matrix::Identity(4, 4);
    CHECK(graph_entropy(from_weights(K)).entropy == doctest::Approx(1.0).epsilon(1e-12));
    Matrix P(3, 3);
    P << 0, 1, 0, 1, 0, 1, 0, 1, 0;
    CHECK(graph_entropy(from_weights(P)).entropy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    Matrix E = Matrix::Zero(3, 3);
    E(0, 1) = E(1, 0) = 1;
    const auto r = graph_entropy(from_weights(E));
    CHECK(r.entropy == 0.0);
    CHECK_FALSE(r.per_node[2].has_value());
}

TEST_CASE("graph entropy is scale invariant and bounded") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 10; ++t) {
        Matrix W(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j <= i; ++j) W(i, j) = W(j, i) = i == j ? 0 : u(rng);
        const double h = graph_entropy(from_weights(W)).entropy;
        CHECK(h >= 0);
        CHECK(h <= 1 + 1e-12);
        CHECK(graph_entropy(from_weights(W * 3.7)).entropy == doctest::Approx(h).epsilon(1e-12));
    }
}

TEST_CASE("fiedler value on hand-checked graphs") {
    Matrix two(2, 2);
    two << 0, 1, 1, 0;
    CHECK(fiedler_value(from_weights(two)) == doctest::Approx(2.0));
    Matrix split = Matrix::Zero(4, 4);
    split(0, 1) = split(1, 0) = split(2, 3) = split(3, 2) = 1;
    CHECK(std::abs(fiedler_value(from_weights(split))) < 1e-9);
    for (int n = 3; n <= 7; ++n) {
        Matrix K = Matrix::Ones(n, n) - Matrix::Identity(n, n);
        CHECK(fiedler_value(from_weights(K)) == doctest::Approx(n).epsilon(1e-10));
    }
}

TEST_CASE("fiedler value is permutation invariant and scales linearly") {
    Matrix W(4, 4);
    W << 0, 0.3, 0.9, 0, 0.3, 0, 0.2, 0.5, 0.9, 0.2, 0, 0.1, 0, 0.5, 0.1, 0;
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 2, 0, 3, 1;
    const Matrix Wp = perm * W * perm.transpose();
    const double f = fiedler_value(from_weights(W));
    CHECK(fiedler_value(from_weights(Wp)) == doctest::Approx(f).epsilon(1e-10));
    CHECK(fiedler_value(from_weights(W * 2.5)) == doctest::Approx(2.5 * f).epsilon(1e-10));
}

TEST_CASE("import_graph takes absolute values and zeroes the diagonal") {
    const auto dir = std::filesystem::temp_directory_path() / "tabspec_test_import";
    std::filesystem::create_directories(dir);
    io::write_atomic(dir / "eye.csv", "1,0,0\n0,1,0\n0,0,1\n");
    CHECK(import_graph(dir / "eye.csv", 3, false).weights.isZero());
    io::write_atomic(dir / "neg.csv", "0,-0.5,0\n-0.5,0,0\n0,0,0\n");
    CHECK(import_graph(dir / "neg.csv", 3, false).weights(0, 1) == 0.5);
    io::write_atomic(dir / "four.csv", "0,0,0,0\n0,0,0,0\n0,0,0,0\n0,0,0,0\n");
    CHECK_THROWS_AS(import_graph(dir / "four.csv", 5, false), Error);
}

TEST_CASE("graph save and load round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "tabspec_test_graph_io";
    std::filesystem::create_directories(dir);
    const auto g = spearman_graph(gaussian(60, 4, 8));
    save_graph(g, dir / "g.csv", dir / "g.json");
    const auto back = load_graph(dir / "g.csv", dir / "g.json");
    CHECK(back.weights == g.weights);
    CHECK(back.method == GraphMethod::spearman);
    CHECK(back.directed == g.directed);
}

TEST_CASE("association graphs are symmetric and bounded") {
    const Matrix X = gaussian(100, 6, 4);
    for (const auto& g : {pearson_graph(X), spearman_graph(X)}) {
        CHECK(g.weights == g.weights.transpose());
        CHECK(g.weights.minCoeff() >= 0);
        CHECK(g.weights.maxCoeff() <= 1);
        CHECK(g.weights.diagonal().isZero());
    }
    const auto cl = chow_liu_tree(X);
    CHECK(cl.weights == cl.weights.transpose());
    CHECK(cl.weights.minCoeff() >= 0);
}

}
