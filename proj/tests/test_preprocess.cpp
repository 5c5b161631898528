#include "tabspec/io.hpp"
#include "tabspec/preprocess.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace tabspec;
using namespace tabspec::preprocess;

namespace {

RawColumn categorical(std::vector<Cell> values, std::string name = "c") {
    return {std::move(name), ColumnKind::categorical, std::move(values)};
}

RawColumn continuous(const std::vector<double>& values, std::string name = "x") {
    RawColumn c{std::move(name), ColumnKind::continuous, {}};
    for (double v : values) c.values.emplace_back(v);
    return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("tabspec_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("three categories give three binary columns") {
    const auto enc = one_hot_encode(categorical({std::string("a"), std::string("b"), std::string("c"), std::string("a")}));
    CHECK(enc.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(enc.columns.cols() == 3);
    CHECK(enc.columns.row(0).sum() == 1.0);
}

TEST_CASE("twelve categories collapse to the top nine plus Other") {
    std::vector<Cell> vals;
    for (int c = 0; c < 12; ++c)
        for (int r = 0; r <= 12 - c; ++r) vals.emplace_back("k" + std::to_string(100 + c));
    const auto enc = one_hot_encode(categorical(vals));
    REQUIRE(enc.labels.size() == 10);
    CHECK(enc.labels.back() == kOtherLabel);
    CHECK(enc.labels.front() == "k100");
    // the three rarest categories all land in Other
    CHECK(enc.columns.col(9).sum() == doctest::Approx(4 + 3 + 2));
}

TEST_CASE("missing categorical entries get their own column") {
    const auto enc = one_hot_encode(categorical({std::string("A"), std::string("A"), std::monostate{}, std::string("B")}));
    REQUIRE(enc.labels == std::vector<std::string>{"A", "B", kMissingLabel});
    Matrix expected(4, 3);
    expected << 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0;
    CHECK(enc.columns == expected);
}

TEST_CASE("top-nine boundary ties break by label") {
    std::vector<Cell> vals;
    for (int c = 0; c < 11; ++c)
        for (int r = 0; r < 3; ++r) vals.emplace_back("z" + std::to_string(c + 10));
    const auto enc = one_hot_encode(categorical(vals));
    CHECK(enc.labels[8] == "z18");
    CHECK(enc.labels[9] == kOtherLabel);
}

TEST_CASE("standardize uses population statistics") {
    const std::vector<double> x{1, 2, 3};
    const auto s = standardize(x);
    CHECK(s.stats.mean == doctest::Approx(2.0));
    CHECK(s.stats.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(s.values[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(s.values[1] == doctest::Approx(0.0));
    CHECK(s.values[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("constant column becomes zeros and is flagged") {
    const std::vector<double> x{5, 5, 5};
    const auto s = standardize(x);
    CHECK(s.stats.constant);
    CHECK(s.values.isZero());
}

TEST_CASE("given statistics are applied, not refit") {
    const std::vector<double> x{4};
    const auto s = standardize(x, ColumnStats{2.0, 1.0, false});
    CHECK(s.values[0] == 2.0);
    CHECK(s.stats.mean == 2.0);
}

TEST_CASE("handle_missing drops sparse columns then incomplete rows") {
    RawTable t;
    RawColumn sparse{"sparse", ColumnKind::continuous, {}};
    RawColumn dense{"dense", ColumnKind::continuous, {}};
    for (int i = 0; i < 10; ++i) {
        sparse.values.push_back(i < 2 ? Cell(1.0) : Cell(std::monostate{}));
        dense.values.push_back(i == 3 || i == 7 ? Cell(std::monostate{}) : Cell(double(i)));
    }
    t.columns = {sparse, dense};
    const auto out = handle_missing(t);
    REQUIRE(out.columns.size() == 1);
    CHECK(out.columns[0].name == "dense");
    CHECK(out.rows() == 8);
    SUBCASE("idempotent") {
        const auto again = handle_missing(out);
        CHECK(again.rows() == out.rows());
        CHECK(again.columns.size() == out.columns.size());
    }
}

TEST_CASE("complete table is unchanged by handle_missing") {
    RawTable t;
    t.columns = {continuous({1, 2, 3}), categorical({std::string("a"), std::string("b"), std::string("a")})};
    const auto out = handle_missing(t);
    CHECK(out.rows() == 3);
    CHECK(out.columns.size() == 2);
}

TEST_CASE("stratified split keeps class proportions") {
    std::vector<int> labels(100);
    for (int i = 0; i < 100; ++i) labels[i] = i % 2;
    const auto s = split_stratified(100, labels, {}, 3);
    CHECK(s.train.size() == 60);
    CHECK(s.val.size() == 20);
    CHECK(s.test.size() == 20);
    auto ones = [&](const std::vector<std::size_t>& idx) {
        int n = 0;
        for (auto i : idx) n += labels[i];
        return n;
    };
    CHECK(ones(s.train) == 30);
    CHECK(ones(s.val) == 10);
    CHECK(ones(s.test) == 10);
}

TEST_CASE("split is a deterministic partition") {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        const auto a = split_stratified(97, std::nullopt, {}, seed);
        const auto b = split_stratified(97, std::nullopt, {}, seed);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        std::set<std::size_t> all;
        for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
        CHECK(all.size() == 97);
        CHECK(a.train.size() + a.val.size() + a.test.size() == 97);
    }
}

TEST_CASE("encode fits statistics on the given rows only") {
    RawTable t;
    t.columns = {continuous({0, 2, 100, -50}), categorical({std::string("u"), std::string("v"), std::string("u"), std::monostate{}})};
    const std::vector<std::size_t> fit{0, 1};
    const auto ft = encode(t, fit);
    REQUIRE(ft.standardization_stats.count(0));
    CHECK(ft.standardization_stats.at(0).mean == 1.0);
    CHECK(ft.standardization_stats.at(0).std == 1.0);
    CHECK(ft.data(2, 0) == 99.0);
    CHECK(ft.n_features() == 2);
    // one-hot group rows sum to one
    for (Eigen::Index r = 0; r < ft.data.rows(); ++r) {
        double s = 0;
        for (auto c : ft.groups[1]) s += ft.data(r, static_cast<Eigen::Index>(c));
        CHECK(s == 1.0);
    }
}

TEST_CASE("csv loading infers kinds and round-trips the feature table") {
    const auto dir = scratch_dir("pp_csv");
    io::write_atomic(dir / "in.csv", "a,b,y\n1,red,0.5\n2,blue,NA\n3,red,1.5\n,blue,2\n");
    const auto raw = table_from_csv(dir / "in.csv");
    CHECK(raw.column("a").kind == ColumnKind::continuous);
    CHECK(raw.column("b").kind == ColumnKind::categorical);
    CHECK(is_missing(raw.column("y").values[1]));
    const auto ft = encode(handle_missing(drop_column(raw, "y")));
    save_feature_table(ft, dir / "data.csv", dir / "meta.json");
    const auto back = load_feature_table(dir / "data.csv", dir / "meta.json");
    CHECK(back.data == ft.data);
    CHECK(back.groups == ft.groups);
    CHECK(back.feature_names == ft.feature_names);
}

TEST_CASE("declared kind overrides inference") {
    const auto dir = scratch_dir("pp_kind");
    io::write_atomic(dir / "in.csv", "zip,v\n10,1\n20,2\n10,3\n");
    const auto raw = table_from_csv(dir / "in.csv", {{"zip", ColumnKind::categorical}});
    CHECK(raw.column("zip").kind == ColumnKind::categorical);
}

}
