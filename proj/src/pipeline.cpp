#include "tabspec/pipeline.hpp"

#include "tabspec/io.hpp"
#include "tabspec/model/checkpoint.hpp"
#include "tabspec/model/metrics.hpp"
#include "tabspec/sweeps.hpp"
#include "tabspec/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

namespace tabspec::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != static_cast<int>(d)) throw Error("config: '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<int>(d);
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + io::format_double(v[i]);
    return out;
}

std::string kind_name(preprocess::ColumnKind k) {
    return k == preprocess::ColumnKind::categorical ? "categorical" : "continuous";
}

preprocess::ColumnKind parse_kind(const std::string& s) {
    if (s == "categorical") return preprocess::ColumnKind::categorical;
    if (s == "continuous") return preprocess::ColumnKind::continuous;
    throw Error("config: unknown column kind '" + s + "'");
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        f["data.path"] = {[](RunConfig& c, const std::string& v) { c.data_path = v; },
                          [](const RunConfig& c) { return c.data_path.string(); }};
        f["data.target"] = {[](RunConfig& c, const std::string& v) { c.target = v; },
                            [](const RunConfig& c) { return c.target; }};
        f["data.task"] = {[](RunConfig& c, const std::string& v) { c.task = model::parse_task(v); },
                          [](const RunConfig& c) { return model::to_string(c.task); }};
        f["data.kinds"] = {[](RunConfig& c, const std::string& v) {
                               c.column_kinds.clear();
                               for (const auto& item : split_list(v)) {
                                   const auto colon = item.rfind(':');
                                   if (colon == std::string::npos) throw Error("config: data.kinds expects name:kind");
                                   c.column_kinds[trim(item.substr(0, colon))] = parse_kind(trim(item.substr(colon + 1)));
                               }
                           },
                           [](const RunConfig& c) {
                               std::string out;
                               for (const auto& [name, kind] : c.column_kinds)
                                   out += (out.empty() ? "" : ",") + name + ":" + kind_name(kind);
                               return out;
                           }};
        f["data.split_seed"] = {[](RunConfig& c, const std::string& v) { c.split_seed = static_cast<std::uint64_t>(to_int("data.split_seed", v)); },
                                [](const RunConfig& c) { return std::to_string(c.split_seed); }};
        f["synth.d"] = {[](RunConfig& c, const std::string& v) { c.synth_d = to_int("synth.d", v); },
                        [](const RunConfig& c) { return std::to_string(c.synth_d); }};
        f["synth.k"] = {[](RunConfig& c, const std::string& v) { c.synth_k = to_int("synth.k", v); },
                        [](const RunConfig& c) { return std::to_string(c.synth_k); }};
        f["synth.n"] = {[](RunConfig& c, const std::string& v) { c.synth_n = to_int("synth.n", v); },
                        [](const RunConfig& c) { return std::to_string(c.synth_n); }};
        f["graph.method"] = {[](RunConfig& c, const std::string& v) { c.graph_method = graphs::parse_method(v); },
                             [](const RunConfig& c) { return graphs::to_string(c.graph_method); }};
        f["graph.import"] = {[](RunConfig& c, const std::string& v) { c.graph_import = v; },
                             [](const RunConfig& c) { return c.graph_import.string(); }};
        f["graph.notears.lambda1"] = {[](RunConfig& c, const std::string& v) { c.notears.lambda1 = to_double("graph.notears.lambda1", v); },
                                      [](const RunConfig& c) { return io::format_double(c.notears.lambda1); }};
        f["graph.notears.max_iter"] = {[](RunConfig& c, const std::string& v) { c.notears.max_iter = to_int("graph.notears.max_iter", v); },
                                       [](const RunConfig& c) { return std::to_string(c.notears.max_iter); }};
        f["graph.notears.h_tol"] = {[](RunConfig& c, const std::string& v) { c.notears.h_tol = to_double("graph.notears.h_tol", v); },
                                    [](const RunConfig& c) { return io::format_double(c.notears.h_tol); }};
        f["graph.notears.rho_max"] = {[](RunConfig& c, const std::string& v) { c.notears.rho_max = to_double("graph.notears.rho_max", v); },
                                      [](const RunConfig& c) { return io::format_double(c.notears.rho_max); }};
        f["graph.notears.w_threshold"] = {[](RunConfig& c, const std::string& v) { c.notears.w_threshold = to_double("graph.notears.w_threshold", v); },
                                          [](const RunConfig& c) { return io::format_double(c.notears.w_threshold); }};
        f["pe.mode"] = {[](RunConfig& c, const std::string& v) { c.pe_mode = model::parse_pe_mode(v); },
                        [](const RunConfig& c) { return model::to_string(c.pe_mode); }};
        f["pe.laplacian"] = {[](RunConfig& c, const std::string& v) { c.laplacian = spectral::parse_laplacian(v); },
                             [](const RunConfig& c) { return spectral::to_string(c.laplacian); }};
        f["pe.k"] = {[](RunConfig& c, const std::string& v) {
                         if (v == "auto") c.k.reset();
                         else c.k = to_int("pe.k", v);
                     },
                     [](const RunConfig& c) { return c.k ? std::to_string(*c.k) : std::string("auto"); }};
        f["pe.alpha"] = {[](RunConfig& c, const std::string& v) { c.alpha = to_double("pe.alpha", v); },
                         [](const RunConfig& c) { return io::format_double(c.alpha); }};
        f["pe.alpha_grid"] = {[](RunConfig& c, const std::string& v) {
                                  c.alpha_grid.clear();
                                  for (const auto& item : split_list(v)) c.alpha_grid.push_back(to_double("pe.alpha_grid", item));
                              },
                              [](const RunConfig& c) { return join_doubles(c.alpha_grid); }};
        f["model.d_token"] = {[](RunConfig& c, const std::string& v) { c.model.d_token = to_int("model.d_token", v); },
                              [](const RunConfig& c) { return std::to_string(c.model.d_token); }};
        f["model.n_layers"] = {[](RunConfig& c, const std::string& v) { c.model.n_layers = to_int("model.n_layers", v); },
                               [](const RunConfig& c) { return std::to_string(c.model.n_layers); }};
        f["model.n_heads"] = {[](RunConfig& c, const std::string& v) { c.model.n_heads = to_int("model.n_heads", v); },
                              [](const RunConfig& c) { return std::to_string(c.model.n_heads); }};
        f["model.ffn_factor"] = {[](RunConfig& c, const std::string& v) { c.model.ffn_factor = to_double("model.ffn_factor", v); },
                                 [](const RunConfig& c) { return io::format_double(c.model.ffn_factor); }};
        f["model.attention_dropout"] = {[](RunConfig& c, const std::string& v) { c.model.attention_dropout = to_double("model.attention_dropout", v); },
                                        [](const RunConfig& c) { return io::format_double(c.model.attention_dropout); }};
        f["model.ffn_dropout"] = {[](RunConfig& c, const std::string& v) { c.model.ffn_dropout = to_double("model.ffn_dropout", v); },
                                  [](const RunConfig& c) { return io::format_double(c.model.ffn_dropout); }};
        f["model.residual_dropout"] = {[](RunConfig& c, const std::string& v) { c.model.residual_dropout = to_double("model.residual_dropout", v); },
                                       [](const RunConfig& c) { return io::format_double(c.model.residual_dropout); }};
        f["train.max_epochs"] = {[](RunConfig& c, const std::string& v) { c.train.max_epochs = to_int("train.max_epochs", v); },
                                 [](const RunConfig& c) { return std::to_string(c.train.max_epochs); }};
        f["train.patience"] = {[](RunConfig& c, const std::string& v) { c.train.patience = to_int("train.patience", v); },
                               [](const RunConfig& c) { return std::to_string(c.train.patience); }};
        f["train.min_epochs"] = {[](RunConfig& c, const std::string& v) { c.train.min_epochs = to_int("train.min_epochs", v); },
                                 [](const RunConfig& c) { return std::to_string(c.train.min_epochs); }};
        f["train.batch_size"] = {[](RunConfig& c, const std::string& v) { c.train.batch_size = to_int("train.batch_size", v); },
                                 [](const RunConfig& c) { return std::to_string(c.train.batch_size); }};
        f["train.lr"] = {[](RunConfig& c, const std::string& v) { c.train.optimizer.lr = to_double("train.lr", v); },
                         [](const RunConfig& c) { return io::format_double(c.train.optimizer.lr); }};
        f["train.weight_decay"] = {[](RunConfig& c, const std::string& v) { c.train.optimizer.weight_decay = to_double("train.weight_decay", v); },
                                   [](const RunConfig& c) { return io::format_double(c.train.optimizer.weight_decay); }};
        f["seeds"] = {[](RunConfig& c, const std::string& v) {
                          c.seeds.clear();
                          for (const auto& item : split_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_int("seeds", item)));
                      },
                      [](const RunConfig& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
                          return out;
                      }};
        f["output"] = {[](RunConfig& c, const std::string& v) { c.output_dir = v; },
                       [](const RunConfig& c) { return c.output_dir.string(); }};
        return f;
    }();
    return table;
}

}  // namespace

void RunConfig::validate() const {
    if (seeds.empty()) throw Error("config: seeds must be nonempty");
    if (!data_path.empty() && !fs::exists(data_path)) throw Error("config: data file not found: " + data_path.string());
    if (graph_method == graphs::GraphMethod::imported && !fs::exists(graph_import))
        throw Error("config: graph import file not found: " + graph_import.string());
    if (k && *k < 1) throw Error("config: pe.k must be positive");
    if (alpha < 0.0) throw Error("config: pe.alpha must be nonnegative");
    for (double a : alpha_grid)
        if (a < 0.0) throw Error("config: alpha grid entries must be nonnegative");
    if (data_path.empty() && task != model::Task::regression)
        throw Error("config: the synthetic source is regression only");
    model::ModelSpec probe = model;
    probe.d_pe = 0;
    probe.validate();
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
    return out;
}

std::string RunConfig::hash() const { return io::sha256_hex(canonical()); }

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto it = fields().find(key);
        if (it == fields().end()) throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        it->second.set(c, value);
    }
    return c;
}

RunConfig load_config(const fs::path& path) { return parse_config(io::read_text(path)); }

fs::path output_root(const fs::path& fallback) {
    if (const char* env = std::getenv("TABSPEC_OUT"); env && *env) return env;
    return fallback;
}

model::DataSplit ProcessedData::subset(const std::vector<std::size_t>& rows) const {
    model::DataSplit s;
    s.X = preprocess::take_rows(table.data, rows);
    if (task == model::Task::regression) {
        s.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) s.y[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
    } else {
        for (auto r : rows) s.labels.push_back(labels[r]);
    }
    return s;
}

ProcessedData preprocess_csv(const fs::path& csv, const std::string& target, model::Task task,
                             const std::map<std::string, preprocess::ColumnKind>& kinds, std::uint64_t split_seed) {
    auto declared = kinds;
    if (task == model::Task::classification && !declared.count(target))
        declared[target] = preprocess::ColumnKind::categorical;
    const auto raw = preprocess::handle_missing(preprocess::table_from_csv(csv, declared));
    const auto& target_column = raw.column(target);
    const auto features = preprocess::drop_column(raw, target);

    ProcessedData out;
    out.task = task;
    std::optional<std::vector<int>> strata;
    if (task == model::Task::regression) {
        const auto values = preprocess::numeric_target(target_column);
        out.y = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    } else {
        auto labels = preprocess::class_labels(target_column);
        out.labels = labels.ids;
        out.class_names = labels.names;
        if (out.class_names.size() < 2) throw Error("classification target needs at least two classes");
        strata = out.labels;
    }
    out.split = preprocess::split_stratified(raw.rows(), strata, {}, split_seed);
    out.table = preprocess::encode(features, out.split.train);
    return out;
}

void save_processed(const ProcessedData& data, const fs::path& dir) {
    fs::create_directories(dir);
    preprocess::save_feature_table(data.table, dir / "data.csv", dir / "meta.json");
    std::string targets = "target\n";
    const std::size_t n = static_cast<std::size_t>(data.table.data.rows());
    for (std::size_t i = 0; i < n; ++i)
        targets += (data.task == model::Task::regression ? io::format_double(data.y[static_cast<Eigen::Index>(i)])
                                                         : std::to_string(data.labels[i])) + "\n";
    io::write_atomic(dir / "targets.csv", targets);
    json j;
    j["task"] = model::to_string(data.task);
    j["class_names"] = data.class_names;
    j["split"] = {{"train", data.split.train}, {"val", data.split.val}, {"test", data.split.test}};
    io::write_atomic(dir / "processed.json", j.dump(2) + "\n");
}

ProcessedData load_processed(const fs::path& dir) {
    ProcessedData out;
    out.table = preprocess::load_feature_table(dir / "data.csv", dir / "meta.json");
    const auto j = json::parse(io::read_text(dir / "processed.json"));
    out.task = model::parse_task(j.at("task").get<std::string>());
    out.class_names = j.at("class_names").get<std::vector<std::string>>();
    out.split.train = j.at("split").at("train").get<std::vector<std::size_t>>();
    out.split.val = j.at("split").at("val").get<std::vector<std::size_t>>();
    out.split.test = j.at("split").at("test").get<std::vector<std::size_t>>();
    const auto targets = io::read_csv(dir / "targets.csv");
    if (targets.rows.size() != static_cast<std::size_t>(out.table.data.rows()))
        throw Error("processed targets do not match the table");
    if (out.task == model::Task::regression) {
        out.y.resize(static_cast<Eigen::Index>(targets.rows.size()));
        for (std::size_t i = 0; i < targets.rows.size(); ++i) out.y[static_cast<Eigen::Index>(i)] = std::stod(targets.rows[i].at(0));
    } else {
        for (const auto& row : targets.rows) out.labels.push_back(std::stoi(row.at(0)));
    }
    return out;
}

graphs::FeatureGraph estimate_graph(const ProcessedData& data, graphs::GraphMethod method,
                                    const graphs::NotearsOptions& notears, const fs::path& import_path) {
    const Matrix X = preprocess::take_rows(data.table.data, data.split.train);
    switch (method) {
        case graphs::GraphMethod::pearson: return graphs::pearson_graph(X);
        case graphs::GraphMethod::spearman: return graphs::spearman_graph(X);
        case graphs::GraphMethod::chow_liu: return graphs::chow_liu_tree(X);
        case graphs::GraphMethod::notears: return graphs::notears(X, notears).graph;
        case graphs::GraphMethod::imported: return graphs::import_graph(import_path, data.table.n_columns(), false);
    }
    throw Error("unknown graph method");
}

PEResult make_pe(const graphs::FeatureGraph& graph, const Groups& groups, spectral::LaplacianKind kind,
                 std::optional<int> k, double alpha) {
    PEResult out;
    out.decomposition = spectral::laplacian(spectral::symmetrize(graph.weights), kind);
    const auto& ev = out.decomposition.eigenvalues;
    out.selection = spectral::auto_select_k(std::vector<double>(ev.data(), ev.data() + ev.size()));
    if (k) out.selection.k_first = out.selection.k_last = *k;
    const int max_k = static_cast<int>((graph.n_nodes() - 1) / 2);
    if (!k && out.selection.k_first > max_k) out.selection.k_first = out.selection.k_last = max_k;
    if (out.selection.k_first < 1) throw Error("not enough eigenvectors");
    out.pe = spectral::consolidate_onehot(
        spectral::build_pe(out.decomposition, out.selection.k_first, out.selection.k_last, alpha), groups);
    return out;
}

namespace {

struct Manifest {
    json doc;
    fs::path path;
    fs::path root;

    void save() const { io::write_atomic(path, doc.dump(2) + "\n"); }

    bool complete(const std::string& stage) const {
        if (!doc.contains("stages") || !doc["stages"].contains(stage)) return false;
        for (const auto& [rel, hash] : doc["stages"][stage]["artifacts"].items()) {
            const fs::path p = root / rel;
            if (!fs::exists(p) || io::sha256_file(p) != hash.get<std::string>()) return false;
        }
        return true;
    }

    void record(const std::string& stage, const std::vector<fs::path>& artifacts) {
        json a = json::object();
        for (const auto& p : artifacts) a[fs::relative(p, root).generic_string()] = io::sha256_file(p);
        doc["stages"][stage] = {{"artifacts", a}};
    }
};

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::string metric_name(model::Task t) { return t == model::Task::regression ? "rmse" : "balanced_accuracy"; }

}  // namespace

fs::path run_pipeline(const RunConfig& config, bool verbose) {
    config.validate();
    const std::string hash = config.hash();
    const fs::path root = (config.output_dir.empty() ? output_root() : config.output_dir) / ("run-" + hash.substr(0, 12));
    fs::create_directories(root);
    io::write_atomic(root / "config.txt", config.canonical());

    Manifest manifest;
    manifest.root = root;
    manifest.path = root / "manifest.json";
    if (fs::exists(manifest.path)) {
        manifest.doc = json::parse(io::read_text(manifest.path));
        if (manifest.doc.value("config_hash", "") != hash) manifest.doc = json::object();
    }
    manifest.doc["config_hash"] = hash;
    manifest.doc["stage_order"] = {"data", "preprocess", "graph", "spectral", "train", "report"};

    auto log = [&](const std::string& msg) {
        if (verbose) std::cerr << "[tabspec] " << msg << "\n";
    };
    auto stage = [&](const std::string& name, const std::function<std::vector<fs::path>()>& body) {
        if (manifest.complete(name)) {
            log("stage " + name + ": up to date");
            return;
        }
        log("stage " + name + ": running");
        try {
            manifest.record(name, body());
        } catch (const std::exception& e) {
            manifest.save();
            throw Error("stage '" + name + "' failed: " + e.what());
        }
        manifest.save();
    };
    const bool uses_graph = config.pe_mode != model::PEMode::none;

    stage("data", [&] {
        fs::create_directories(root / "raw");
        if (config.data_path.empty()) {
            synthetic::SyntheticSpec s;
            s.d = config.synth_d;
            s.k = config.synth_k;
            s.n = config.synth_n;
            s.seed = config.split_seed;
            synthetic::save(synthetic::generate(s), s, root / "raw" / "input.csv", root / "raw" / "truth.json");
            return std::vector<fs::path>{root / "raw" / "input.csv", root / "raw" / "truth.json"};
        }
        io::write_atomic(root / "raw" / "input.csv", io::read_text(config.data_path));
        return std::vector<fs::path>{root / "raw" / "input.csv"};
    });

    stage("preprocess", [&] {
        const auto data = preprocess_csv(root / "raw" / "input.csv", config.target, config.task, config.column_kinds,
                                         config.split_seed);
        save_processed(data, root / "processed");
        return files_under(root / "processed");
    });

    if (uses_graph) {
        stage("graph", [&] {
            const auto data = load_processed(root / "processed");
            const auto g = estimate_graph(data, config.graph_method, config.notears, config.graph_import);
            fs::create_directories(root / "graph");
            graphs::save_graph(g, root / "graph" / "graph.csv", root / "graph" / "graph.json");
            const auto diag = graphs::diagnostics(g);
            json d;
            d["entropy"] = diag.entropy;
            d["fiedler"] = diag.fiedler;
            json per = json::array();
            for (const auto& v : diag.per_node_entropy) per.push_back(v ? json(*v) : json(nullptr));
            d["per_node_entropy"] = per;
            io::write_atomic(root / "graph" / "diagnostics.json", d.dump(2) + "\n");
            return files_under(root / "graph");
        });

        stage("spectral", [&] {
            const auto data = load_processed(root / "processed");
            const auto g = graphs::load_graph(root / "graph" / "graph.csv", root / "graph" / "graph.json");
            const auto r = make_pe(g, data.table.groups, config.laplacian, config.k, 1.0);
            fs::create_directories(root / "spectral");
            io::write_atomic(root / "spectral" / "eigenvalues.csv", io::matrix_to_csv(r.decomposition.eigenvalues));
            io::write_atomic(root / "spectral" / "eigenvectors.csv", io::matrix_to_csv(r.decomposition.eigenvectors));
            spectral::PEMetadata meta;
            meta.alpha = 1.0;
            meta.k_first = r.selection.k_first;
            meta.k_last = r.selection.k_last;
            meta.laplacian_kind = spectral::to_string(config.laplacian);
            meta.source_graph_hash = io::sha256_file(root / "graph" / "graph.csv");
            meta.consolidated = true;
            spectral::save_pe(r.pe, meta, root / "spectral" / "pe.csv", root / "spectral" / "pe.json");
            return files_under(root / "spectral");
        });
    }

    stage("train", [&] {
        const auto data = load_processed(root / "processed");
        Matrix pe_base;
        int d_pe = config.k ? 2 * *config.k : 0;
        if (uses_graph) {
            pe_base = spectral::load_pe(root / "spectral" / "pe.csv", root / "spectral" / "pe.json").base;
            d_pe = static_cast<int>(pe_base.cols());
        }
        const auto train_split = data.subset(data.split.train);
        const auto val_split = data.subset(data.split.val);
        const auto test_split = data.subset(data.split.test);
        const model::Task task = data.task;
        const std::string metric = metric_name(task);

        auto fit = [&](model::PEMode mode, double alpha, std::uint64_t seed) {
            model::ModelSpec spec = config.model;
            spec.task = task;
            spec.n_classes = task == model::Task::classification ? data.n_classes() : 1;
            spec.d_pe = d_pe;
            spec.pe_mode = mode;
            spec.alpha = alpha;
            spec.seed = seed;
            model::TrainConfig tc = config.train;
            tc.seed = seed;
            model::FTTransformer m(spec, data.table.groups, data.table.n_columns(),
                                   mode == model::PEMode::fixed ? pe_base : Matrix());
            model::train(m, train_split, val_split, tc);
            return m;
        };

        std::vector<analysis::SweepRecord> records;
        fs::remove_all(root / "checkpoints");
        for (auto seed : config.seeds) {
            const auto base = fit(model::PEMode::none, 0.0, seed);
            model::save_checkpoint(base, root / "checkpoints" / ("baseline-seed-" + std::to_string(seed)));
            records.push_back({"baseline", 0.0, seed, "val_" + metric, model::evaluate(base, val_split)});
            records.push_back({"baseline", 0.0, seed, metric, model::evaluate(base, test_split)});
            log("seed " + std::to_string(seed) + " baseline " + metric + "=" + io::format_double(records.back().value));
            if (config.pe_mode == model::PEMode::none) continue;

            double alpha = config.alpha;
            if (!config.alpha_grid.empty()) {
                std::map<double, double> scores;
                alpha = model::alpha_select(
                    config.alpha_grid,
                    [&](double a) { return scores[a] = model::evaluate(fit(config.pe_mode, a, seed), val_split); },
                    model::higher_is_better(task));
            }
            const auto pet = fit(config.pe_mode, alpha, seed);
            const std::string group = model::to_string(config.pe_mode);
            model::save_checkpoint(pet, root / "checkpoints" / (group + "-seed-" + std::to_string(seed)));
            records.push_back({group, alpha, seed, "val_" + metric, model::evaluate(pet, val_split)});
            records.push_back({group, alpha, seed, metric, model::evaluate(pet, test_split)});
            log("seed " + std::to_string(seed) + " " + group + " alpha=" + io::format_double(alpha) + " " + metric +
                "=" + io::format_double(records.back().value));
        }
        fs::create_directories(root / "metrics");
        io::write_atomic(root / "metrics" / "metrics.csv", analysis::records_to_csv(records));
        auto out = files_under(root / "checkpoints");
        out.push_back(root / "metrics" / "metrics.csv");
        return out;
    });

    stage("report", [&] {
        report(root);
        return std::vector<fs::path>{root / "report" / "summary.csv", root / "report" / "summary.txt"};
    });
    return root;
}

ReportResult report(const fs::path& run_dir) {
    ReportResult out;
    std::ostringstream text;
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& kind, const std::string& group, const std::string& alpha, const std::string& seed,
                   const std::string& metric, const std::string& value) {
        rows.push_back({kind, group, alpha, seed, metric, value});
    };

    text << "run: " << run_dir.string() << "\n";
    for (const char* rel : {"manifest.json", "processed/data.csv", "metrics/metrics.csv"})
        if (!fs::exists(run_dir / rel)) out.missing.push_back(rel);

    if (fs::exists(run_dir / "graph" / "diagnostics.json")) {
        const auto d = json::parse(io::read_text(run_dir / "graph" / "diagnostics.json"));
        text << "graph entropy: " << io::format_double(d.at("entropy").get<double>())
             << "  fiedler: " << io::format_double(d.at("fiedler").get<double>()) << "\n";
        add("diagnostic", "graph", "", "", "entropy", io::format_double(d.at("entropy").get<double>()));
        add("diagnostic", "graph", "", "", "fiedler", io::format_double(d.at("fiedler").get<double>()));
    }
    if (fs::exists(run_dir / "spectral" / "pe.json")) {
        const auto p = json::parse(io::read_text(run_dir / "spectral" / "pe.json"));
        text << "pe: k_first=" << p.at("k_first").get<int>() << " k_last=" << p.at("k_last").get<int>() << "\n";
        add("diagnostic", "pe", "", "", "k", std::to_string(p.at("k_first").get<int>()));
    }

    if (fs::exists(run_dir / "metrics" / "metrics.csv")) {
        const auto records = analysis::records_from_csv(io::read_text(run_dir / "metrics" / "metrics.csv"));
        std::map<std::pair<std::string, std::uint64_t>, double> test;
        std::string metric;
        for (const auto& r : records) {
            add("seed", r.group, io::format_double(r.alpha), std::to_string(r.seed), r.metric, io::format_double(r.value));
            if (r.metric.rfind("val_", 0) == 0) continue;
            metric = r.metric;
            test[{r.group, r.seed}] = r.value;
            if (r.group != "baseline") {
                text << "seed " << r.seed << ": chosen alpha " << io::format_double(r.alpha) << "\n";
                add("choice", r.group, io::format_double(r.alpha), std::to_string(r.seed), "alpha", io::format_double(r.alpha));
            }
        }
        const bool lower = metric == "rmse";
        std::vector<analysis::SweepRecord> tests;
        for (const auto& r : records)
            if (r.metric == metric) tests.push_back(r);
        std::map<std::string, std::pair<double, std::size_t>> means;
        for (const auto& r : tests) {
            auto& m = means[r.group];
            m.first += r.value;
            m.second += 1;
        }
        for (const auto& [group, m] : means) {
            const double mean = m.first / static_cast<double>(m.second);
            text << group << " mean " << metric << ": " << io::format_double(mean) << " (" << m.second << " seeds)\n";
            add("mean", group, "", "", metric, io::format_double(mean));
        }
        for (const auto& [key, value] : test) {
            if (key.first == "baseline") continue;
            const auto b = test.find({"baseline", key.second});
            if (b == test.end()) continue;
            const double imp = model::improvement_percent(b->second, value, lower);
            add("improvement", key.first, "", std::to_string(key.second), metric, io::format_double(imp));
        }
        if (means.count("baseline")) {
            const double base = means["baseline"].first / static_cast<double>(means["baseline"].second);
            for (const auto& [group, m] : means) {
                if (group == "baseline") continue;
                const double imp = model::improvement_percent(base, m.first / static_cast<double>(m.second), lower);
                std::ostringstream pct;
                pct.setf(std::ios::fixed);
                pct.precision(2);
                pct << imp;
                text << group << " improvement over baseline: " << pct.str() << "%\n";
                add("improvement", group, "", "", metric, io::format_double(imp));
            }
        }
    }
    for (const auto& m : out.missing) text << "missing artifact: " << m << "\n";

    out.csv = io::format_csv_row({"kind", "group", "alpha", "seed", "metric", "value"}) + "\n";
    for (const auto& r : rows) out.csv += io::format_csv_row(r) + "\n";
    out.text = text.str();
    fs::create_directories(run_dir / "report");
    io::write_atomic(run_dir / "report" / "summary.csv", out.csv);
    io::write_atomic(run_dir / "report" / "summary.txt", out.text);
    return out;
}

}  // namespace tabspec::pipeline
