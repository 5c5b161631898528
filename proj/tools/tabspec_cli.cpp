#include "tabspec/analysis.hpp"
#include "tabspec/graphs.hpp"
#include "tabspec/io.hpp"
#include "tabspec/model/checkpoint.hpp"
#include "tabspec/model/metrics.hpp"
#include "tabspec/pipeline.hpp"
#include "tabspec/spectral.hpp"
#include "tabspec/sweeps.hpp"
#include "tabspec/synthetic.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace tabspec;

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::string config;
};

fs::path out_dir(const std::string& given, const std::string& command) {
    return given.empty() ? pipeline::output_root() / command : fs::path(given);
}

std::map<std::string, preprocess::ColumnKind> parse_kinds(const std::string& spec) {
    pipeline::RunConfig c = pipeline::parse_config("data.kinds=" + spec);
    return c.column_kinds;
}

void write_diagnostics(const graphs::FeatureGraph& g, const fs::path& path) {
    const auto d = graphs::diagnostics(g);
    nlohmann::json j;
    j["entropy"] = d.entropy;
    j["fiedler"] = d.fiedler;
    io::write_atomic(path, j.dump(2) + "\n");
}

fs::path sidecar(const fs::path& csv) {
    fs::path p = csv;
    return p.replace_extension(".json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-derived positional encodings for tabular transformers"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
    app.add_option("--config", common.config, "key=value configuration file");

    model::ModelSpec desk = analysis::desk_model_spec();
    model::TrainConfig desk_train = analysis::desk_train_config();
    auto add_model_options = [&](CLI::App* sub, model::ModelSpec& spec, model::TrainConfig& tc) {
        sub->add_option("--d-token", spec.d_token, "Total token width")->capture_default_str();
        sub->add_option("--layers", spec.n_layers, "Transformer blocks")->capture_default_str();
        sub->add_option("--heads", spec.n_heads, "Attention heads")->capture_default_str();
        sub->add_option("--epochs", tc.max_epochs, "Maximum epochs")->capture_default_str();
        sub->add_option("--patience", tc.patience, "Early-stopping patience")->capture_default_str();
        sub->add_option("--min-epochs", tc.min_epochs, "Minimum epochs")->capture_default_str();
        sub->add_option("--batch-size", tc.batch_size, "Mini-batch size")->capture_default_str();
        sub->add_option("--lr", tc.optimizer.lr, "Learning rate")->capture_default_str();
        sub->add_option("--weight-decay", tc.optimizer.weight_decay, "Decoupled weight decay")->capture_default_str();
    };

    // preprocess
    std::string pp_input, pp_target = "y", pp_task = "reg", pp_kinds, pp_out;
    auto* pp = app.add_subcommand("preprocess", "Encode, standardize and split a CSV table");
    pp->add_option("--input", pp_input, "Input CSV")->required()->check(CLI::ExistingFile);
    pp->add_option("--target", pp_target, "Target column")->capture_default_str();
    pp->add_option("--task", pp_task, "reg or clf")->capture_default_str();
    pp->add_option("--kinds", pp_kinds, "Declared kinds, name:categorical|continuous,...");
    pp->add_option("--out", pp_out, "Output directory");

    // estimate-graph
    std::string eg_data, eg_method = "spearman", eg_import, eg_out;
    graphs::NotearsOptions eg_notears;
    auto* eg = app.add_subcommand("estimate-graph", "Estimate a feature graph from processed data");
    eg->add_option("--data", eg_data, "Processed data directory")->required()->check(CLI::ExistingDirectory);
    eg->add_option("--method", eg_method, "pearson|spearman|chow_liu|notears|imported")->capture_default_str();
    eg->add_option("--import", eg_import, "Dense adjacency CSV for the imported method");
    eg->add_option("--lambda1", eg_notears.lambda1, "NOTEARS L1 weight")->capture_default_str();
    eg->add_option("--w-threshold", eg_notears.w_threshold, "NOTEARS edge threshold")->capture_default_str();
    eg->add_option("--out", eg_out, "Output directory");

    // make-pe
    std::string mp_graph, mp_data, mp_k = "auto", mp_laplacian = "normalized", mp_out;
    double mp_alpha = 1.0;
    auto* mp = app.add_subcommand("make-pe", "Laplacian-eigenvector positional encodings from a graph");
    mp->add_option("--graph", mp_graph, "Graph directory")->required()->check(CLI::ExistingDirectory);
    mp->add_option("--data", mp_data, "Processed data directory, for one-hot consolidation");
    mp->add_option("--k", mp_k, "auto or an integer")->capture_default_str();
    mp->add_option("--alpha", mp_alpha, "PE scale")->capture_default_str();
    mp->add_option("--laplacian", mp_laplacian, "normalized|unnormalized")->capture_default_str();
    mp->add_option("--out", mp_out, "Output directory");

    // synth
    synthetic::SyntheticSpec sy_spec;
    std::string sy_out;
    auto* sy = app.add_subcommand("synth", "Generate a structure-controlled regression dataset");
    sy->add_option("--d", sy_spec.d, "Feature count")->capture_default_str();
    sy->add_option("--k", sy_spec.k, "Group count")->capture_default_str();
    sy->add_option("--n", sy_spec.n, "Sample count")->capture_default_str();
    sy->add_option("--noise-std", sy_spec.noise_std, "Feature noise std")->capture_default_str();
    sy->add_option("--target-group", sy_spec.target_group, "Group driving the target")->capture_default_str();
    sy->add_option("--out", sy_out, "Output directory");

    // train
    std::string tr_data, tr_pe = "none", tr_pe_file, tr_task, tr_out;
    double tr_alpha = 1.0;
    int tr_d_pe = 0;
    model::ModelSpec tr_spec;
    model::TrainConfig tr_cfg;
    auto* tr = app.add_subcommand("train", "Train one model on processed data");
    tr->add_option("--data", tr_data, "Processed data directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--pe", tr_pe, "none|fixed|random|learnable")->capture_default_str();
    tr->add_option("--pe-file", tr_pe_file, "PE CSV (with its .json sidecar)");
    tr->add_option("--d-pe", tr_d_pe, "PE width when no PE file is given")->capture_default_str();
    tr->add_option("--alpha", tr_alpha, "PE scale")->capture_default_str();
    tr->add_option("--task", tr_task, "reg or clf (must match the processed data)");
    tr->add_option("--out", tr_out, "Checkpoint directory");
    add_model_options(tr, tr_spec, tr_cfg);

    // rank-sweep
    synthetic::SyntheticSpec rs_data;
    std::vector<double> rs_alphas{0, 1, 2, 3, 5, 10, 20, 30};
    std::vector<std::uint64_t> rs_seeds{1, 2, 3, 4, 5};
    std::vector<std::string> rs_modes{"fixed", "random"};
    std::string rs_out;
    model::ModelSpec rs_spec = desk;
    model::TrainConfig rs_cfg = desk_train;
    auto* rs = app.add_subcommand("rank-sweep", "Effective rank of trained CLS embeddings across alpha");
    rs->add_option("--d", rs_data.d, "Feature count")->capture_default_str();
    rs->add_option("--k", rs_data.k, "Group count")->capture_default_str();
    rs->add_option("--n", rs_data.n, "Sample count")->capture_default_str();
    rs->add_option("--alphas", rs_alphas, "Alpha grid")->delimiter(',')->capture_default_str();
    rs->add_option("--seeds", rs_seeds, "Model seeds")->delimiter(',')->capture_default_str();
    rs->add_option("--modes", rs_modes, "PE modes")->delimiter(',')->capture_default_str();
    rs->add_option("--out", rs_out, "Output directory");
    add_model_options(rs, rs_spec, rs_cfg);

    // alpha-sweep
    synthetic::SyntheticSpec as_data;
    std::vector<int> as_ks{4, 15, 25};
    std::vector<double> as_alphas{0, 0.5, 1, 3, 10};
    std::vector<std::uint64_t> as_seeds{1, 2, 3, 4, 5};
    std::string as_out;
    model::ModelSpec as_spec = desk;
    model::TrainConfig as_cfg = desk_train;
    auto* as = app.add_subcommand("alpha-sweep", "Test RMSE across alpha for several structure regimes");
    as->add_option("--d", as_data.d, "Feature count")->capture_default_str();
    as->add_option("--n", as_data.n, "Sample count")->capture_default_str();
    as->add_option("--ks", as_ks, "Group counts")->delimiter(',')->capture_default_str();
    as->add_option("--alphas", as_alphas, "Alpha grid")->delimiter(',')->capture_default_str();
    as->add_option("--seeds", as_seeds, "Seeds")->delimiter(',')->capture_default_str();
    as->add_option("--out", as_out, "Output directory");
    add_model_options(as, as_spec, as_cfg);

    // verify-bounds
    std::string vb_setting = "thm1", vb_out;
    analysis::ConstructedSetting vb;
    double vb_alpha_max = 10.0;
    Eigen::Index vb_samples = 500;
    auto* vbc = app.add_subcommand("verify-bounds", "Measured CLS effective rank against the closed-form bounds");
    vbc->add_option("--setting", vb_setting, "thm1|thm2a|thm2b")->capture_default_str();
    vbc->add_option("--d", vb.d, "Input dimension")->capture_default_str();
    vbc->add_option("--d-token", vb.d_token, "Token dimension")->capture_default_str();
    vbc->add_option("--d-pe", vb.d_pe, "PE dimension")->capture_default_str();
    vbc->add_option("--tau", vb.tau, "PE score gap")->capture_default_str();
    vbc->add_option("--alpha-max", vb_alpha_max, "Largest integer alpha")->capture_default_str();
    vbc->add_option("--samples", vb_samples, "Input samples")->capture_default_str();
    vbc->add_option("--out", vb_out, "Optional CSV output path");

    // report
    std::string rp_run;
    auto* rp = app.add_subcommand("report", "Summarize a pipeline run directory");
    rp->add_option("--run", rp_run, "Run directory")->required()->check(CLI::ExistingDirectory);

    // run
    bool run_verbose = false;
    auto* run = app.add_subcommand("run", "Run the whole pipeline from --config");
    run->add_flag("--verbose", run_verbose, "Log stage progress");

    CLI11_PARSE(app, argc, argv);

    try {
        std::optional<pipeline::RunConfig> cfg;
        if (!common.config.empty()) cfg = pipeline::load_config(common.config);

        if (*pp) {
            const fs::path out = out_dir(pp_out, "preprocess");
            const auto data = pipeline::preprocess_csv(pp_input, pp_target, model::parse_task(pp_task),
                                                       parse_kinds(pp_kinds), common.seed);
            pipeline::save_processed(data, out);
            std::cout << "processed " << data.table.data.rows() << " rows, " << data.table.n_columns()
                      << " encoded columns, " << data.table.n_features() << " features -> " << out.string() << "\n";
        } else if (*eg) {
            const fs::path out = out_dir(eg_out, "graph");
            const auto data = pipeline::load_processed(eg_data);
            const auto g = pipeline::estimate_graph(data, graphs::parse_method(eg_method), eg_notears, eg_import);
            fs::create_directories(out);
            graphs::save_graph(g, out / "graph.csv", out / "graph.json");
            write_diagnostics(g, out / "diagnostics.json");
            std::cout << "graph with " << g.n_nodes() << " nodes -> " << out.string() << "\n";
        } else if (*mp) {
            const fs::path out = out_dir(mp_out, "pe");
            const auto g = graphs::load_graph(fs::path(mp_graph) / "graph.csv", fs::path(mp_graph) / "graph.json");
            Groups groups;
            if (!mp_data.empty()) {
                groups = pipeline::load_processed(mp_data).table.groups;
            } else {
                for (std::size_t i = 0; i < g.n_nodes(); ++i) groups.push_back({i});
            }
            const auto kind = spectral::parse_laplacian(mp_laplacian);
            std::optional<int> k;
            if (mp_k != "auto") k = std::stoi(mp_k);
            const auto r = pipeline::make_pe(g, groups, kind, k, mp_alpha);
            fs::create_directories(out);
            spectral::PEMetadata meta{mp_alpha, r.selection.k_first, r.selection.k_last, spectral::to_string(kind),
                                      io::sha256_file(fs::path(mp_graph) / "graph.csv"), true};
            spectral::save_pe(r.pe, meta, out / "pe.csv", out / "pe.json");
            io::write_atomic(out / "eigenvalues.csv", io::matrix_to_csv(r.decomposition.eigenvalues));
            std::cout << "pe " << r.pe.rows() << "x" << r.pe.cols() << " (k=" << r.selection.k_first << ") -> "
                      << out.string() << "\n";
        } else if (*sy) {
            const fs::path out = out_dir(sy_out, "synth");
            sy_spec.seed = common.seed;
            fs::create_directories(out);
            synthetic::save(synthetic::generate(sy_spec), sy_spec, out / "data.csv", out / "truth.json");
            std::cout << "synthetic d=" << sy_spec.d << " k=" << sy_spec.k << " n=" << sy_spec.n << " ("
                      << synthetic::to_string(synthetic::structure_regime(sy_spec.d, sy_spec.k)) << " structure) -> "
                      << out.string() << "\n";
        } else if (*tr) {
            const fs::path out = out_dir(tr_out, "train");
            const auto data = pipeline::load_processed(tr_data);
            if (!tr_task.empty() && model::parse_task(tr_task) != data.task)
                throw Error("--task does not match the processed data");
            if (cfg) {
                tr_spec = cfg->model;
                tr_cfg = cfg->train;
            }
            model::ModelSpec spec = tr_spec;
            spec.pe_mode = model::parse_pe_mode(tr_pe);
            spec.alpha = tr_alpha;
            spec.task = data.task;
            spec.n_classes = data.task == model::Task::classification ? data.n_classes() : 1;
            spec.seed = common.seed;
            Matrix pe_base;
            spec.d_pe = tr_d_pe;
            if (!tr_pe_file.empty()) {
                pe_base = spectral::load_pe(tr_pe_file, sidecar(tr_pe_file)).base;
                spec.d_pe = static_cast<int>(pe_base.cols());
            } else if (spec.pe_mode == model::PEMode::fixed) {
                throw Error("--pe fixed requires --pe-file");
            }
            model::TrainConfig tc = tr_cfg;
            tc.seed = common.seed;
            model::FTTransformer m(spec, data.table.groups, data.table.n_columns(), pe_base);
            const auto result = model::train(m, data.subset(data.split.train), data.subset(data.split.val), tc);
            model::save_checkpoint(m, out);
            const double test = model::evaluate(m, data.subset(data.split.test));
            nlohmann::json j;
            j["best_epoch"] = result.best_epoch;
            j["best_val_metric"] = result.best_val_metric;
            j["test_metric"] = test;
            j["metric"] = data.task == model::Task::regression ? "rmse" : "balanced_accuracy";
            j["parameters"] = m.parameter_count();
            io::write_atomic(out / "metrics.json", j.dump(2) + "\n");
            std::cout << j.dump() << "\n";
        } else if (*rs) {
            const fs::path out = out_dir(rs_out, "rank-sweep");
            rs_data.seed = common.seed;
            std::vector<model::PEMode> modes;
            for (const auto& m : rs_modes) modes.push_back(model::parse_pe_mode(m));
            const auto data = analysis::prepare_synthetic(rs_data);
            const auto records = analysis::rank_sweep(data, modes, rs_alphas, rs_spec, rs_cfg, rs_seeds,
                                                      [](const std::string& s) { std::cerr << s << "\n"; });
            fs::create_directories(out);
            io::write_atomic(out / "records.csv", analysis::records_to_csv(records));
            const auto summary = analysis::summarize(records);
            io::write_atomic(out / "summary.csv", analysis::summary_to_csv(summary));
            std::cout << analysis::summary_to_csv(summary);
        } else if (*as) {
            const fs::path out = out_dir(as_out, "alpha-sweep");
            const auto records = analysis::alpha_rmse_sweep(as_data, as_ks, as_alphas, as_spec, as_cfg, as_seeds,
                                                            [](const std::string& s) { std::cerr << s << "\n"; });
            fs::create_directories(out);
            io::write_atomic(out / "records.csv", analysis::records_to_csv(records));
            const auto summary = analysis::summarize(records);
            io::write_atomic(out / "summary.csv", analysis::summary_to_csv(summary));
            std::cout << analysis::summary_to_csv(summary);
        } else if (*vbc) {
            std::vector<double> alphas;
            for (int a = 0; a <= static_cast<int>(vb_alpha_max); ++a) alphas.push_back(a);
            const auto rows = analysis::verify_bounds(analysis::parse_bound_kind(vb_setting), vb, alphas, vb_samples,
                                                      common.seed);
            std::string csv = "alpha,C_alpha,measured_rank,bound,approx,holds\n";
            for (const auto& r : rows)
                csv += io::format_csv_row({io::format_double(r.alpha), io::format_double(r.C), io::format_double(r.measured),
                                           io::format_double(r.bound), io::format_double(r.approx),
                                           r.holds ? "true" : "false"}) + "\n";
            if (!vb_out.empty()) io::write_atomic(vb_out, csv);
            std::cout << csv;
            for (const auto& r : rows)
                if (!r.holds) return 2;
        } else if (*rp) {
            const auto r = pipeline::report(rp_run);
            std::cout << r.text;
            if (!r.missing.empty()) return 2;
        } else if (*run) {
            if (!cfg) throw Error("run requires --config");
            const fs::path dir = pipeline::run_pipeline(*cfg, run_verbose);
            std::cout << pipeline::report(dir).text;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
