#include "tabspec/io.hpp"
#include "tabspec/pipeline.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>

using namespace tabspec;
using namespace tabspec::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("tabspec_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig tiny_config(const fs::path& out) {
    return parse_config("synth.d=6\nsynth.k=2\nsynth.n=120\n"
                        "model.d_token=8\nmodel.n_layers=1\nmodel.n_heads=1\n"
                        "train.max_epochs=2\ntrain.min_epochs=1\n"
                        "pe.alpha=2\nseeds=1\noutput=" + out.string() + "\n");
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing fills typed fields and rejects unknown keys") {
    const auto c = parse_config("# comment\ngraph.method=chow_liu\npe.k=3\npe.alpha_grid=0.5,1,2\nseeds=4,5\n"
                                "train.lr=0.001\ndata.kinds=a:categorical,b:continuous\n");
    CHECK(c.graph_method == graphs::GraphMethod::chow_liu);
    CHECK(c.k == 3);
    CHECK(c.alpha_grid == std::vector<double>{0.5, 1, 2});
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(c.train.optimizer.lr == 0.001);
    CHECK(c.column_kinds.at("a") == preprocess::ColumnKind::categorical);
    CHECK_FALSE(parse_config("pe.k=auto").k.has_value());
    CHECK_THROWS_AS(parse_config("pe.bogus=1"), Error);
    CHECK_THROWS_AS(parse_config("train.lr=fast"), Error);
}

TEST_CASE("config hash depends on content, not key order") {
    const auto a = parse_config("pe.alpha=2\nseeds=1\n");
    const auto b = parse_config("seeds=1\npe.alpha=2\n");
    const auto c = parse_config("seeds=1\npe.alpha=3\n");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 64);
}

TEST_CASE("output root honours the environment") {
    setenv("TABSPEC_OUT", "/tmp/somewhere", 1);
    CHECK(output_root() == fs::path("/tmp/somewhere"));
    unsetenv("TABSPEC_OUT");
    CHECK(output_root("fallback") == fs::path("fallback"));
}

TEST_CASE("processed data round-trips") {
    const auto dir = fresh("processed");
    io::write_atomic(dir / "in.csv", "a,b,label\n1,x,p\n2,y,q\n3,x,p\n4,y,q\n5,x,p\n6,y,q\n7,x,p\n8,y,q\n9,x,p\n10,y,q\n");
    const auto d = preprocess_csv(dir / "in.csv", "label", model::Task::classification, {}, 1);
    CHECK(d.n_classes() == 2);
    CHECK(d.table.n_features() == 2);
    CHECK(d.split.train.size() == 6);
    save_processed(d, dir / "out");
    const auto back = load_processed(dir / "out");
    CHECK(back.table.data == d.table.data);
    CHECK(back.labels == d.labels);
    CHECK(back.split.test == d.split.test);
}

TEST_CASE("end-to-end run writes hashed artifacts and resumes") {
    const auto out = fresh("run");
    const auto config = tiny_config(out);
    const fs::path run = run_pipeline(config);
    CHECK(run.filename().string() == "run-" + config.hash().substr(0, 12));
    for (const char* rel : {"raw/input.csv", "processed/data.csv", "graph/graph.csv", "spectral/pe.csv",
                            "metrics/metrics.csv", "report/summary.csv", "manifest.json"})
        CHECK(fs::exists(run / rel));
    const auto manifest = nlohmann::json::parse(io::read_text(run / "manifest.json"));
    CHECK(manifest["config_hash"] == config.hash());
    const auto metrics_hash = io::sha256_file(run / "metrics" / "metrics.csv");
    const auto stamp = fs::last_write_time(run / "metrics" / "metrics.csv");

    run_pipeline(config);
    CHECK(fs::last_write_time(run / "metrics" / "metrics.csv") == stamp);

    fs::remove(run / "metrics" / "metrics.csv");
    run_pipeline(config);
    CHECK(io::sha256_file(run / "metrics" / "metrics.csv") == metrics_hash);

    const auto rep = report(run);
    CHECK(rep.missing.empty());
    CHECK(rep.csv.find("improvement") != std::string::npos);
}

TEST_CASE("a failing stage names itself and keeps earlier artifacts") {
    const auto out = fresh("run_fail");
    auto config = tiny_config(out);
    config.graph_method = graphs::GraphMethod::imported;
    io::write_atomic(out / "wrong.csv", "0,1\n1,0\n");
    config.graph_import = out / "wrong.csv";
    CHECK_THROWS_WITH_AS(run_pipeline(config), doctest::Contains("stage 'graph' failed"), Error);
    const fs::path run = out / ("run-" + config.hash().substr(0, 12));
    CHECK(fs::exists(run / "processed" / "data.csv"));
}

TEST_CASE("report lists missing artifacts") {
    const auto dir = fresh("report_missing");
    const auto rep = report(dir);
    CHECK_FALSE(rep.missing.empty());
}

}
