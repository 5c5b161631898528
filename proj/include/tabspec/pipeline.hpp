#pragma once

#include "tabspec/graphs.hpp"
#include "tabspec/model/train.hpp"
#include "tabspec/model/transformer.hpp"
#include "tabspec/preprocess.hpp"
#include "tabspec/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tabspec::pipeline {

/// Flat key=value configuration. Keys carry a section prefix
/// ("graph.method", "train.lr"); '#' starts a comment line.
struct RunConfig {
    // data
    std::filesystem::path data_path;  // empty: synthetic source
    std::string target = "y";
    model::Task task = model::Task::regression;
    std::map<std::string, preprocess::ColumnKind> column_kinds;
    int synth_d = 30, synth_k = 4, synth_n = 2000;
    std::uint64_t split_seed = 1;
    // graph
    graphs::GraphMethod graph_method = graphs::GraphMethod::spearman;
    std::filesystem::path graph_import;
    graphs::NotearsOptions notears;
    // positional encodings
    model::PEMode pe_mode = model::PEMode::fixed;
    spectral::LaplacianKind laplacian = spectral::LaplacianKind::normalized;
    std::optional<int> k;  // nullopt: automatic
    double alpha = 1.0;
    std::vector<double> alpha_grid;  // nonempty: select alpha on validation
    // model and training
    model::ModelSpec model;
    model::TrainConfig train;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::filesystem::path output_dir;

    void validate() const;
    // Canonical text form: one sorted key=value per line.
    std::string canonical() const;
    std::string hash() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Output root from TABSPEC_OUT, else the given fallback.
std::filesystem::path output_root(const std::filesystem::path& fallback = "tabspec_out");

/// Encoded table with targets and a fixed 60/20/20 split; continuous
/// columns are standardized with training-row statistics.
struct ProcessedData {
    preprocess::FeatureTable table;
    model::Task task = model::Task::regression;
    Vector y;                     // regression targets
    std::vector<int> labels;      // class ids
    std::vector<std::string> class_names;
    preprocess::SplitIndices split;

    int n_classes() const { return static_cast<int>(class_names.size()); }
    model::DataSplit subset(const std::vector<std::size_t>& rows) const;
};

ProcessedData preprocess_csv(const std::filesystem::path& csv, const std::string& target, model::Task task,
                             const std::map<std::string, preprocess::ColumnKind>& kinds, std::uint64_t split_seed);
void save_processed(const ProcessedData& data, const std::filesystem::path& dir);
ProcessedData load_processed(const std::filesystem::path& dir);

// Graph over encoded columns, estimated from the training rows.
graphs::FeatureGraph estimate_graph(const ProcessedData& data, graphs::GraphMethod method,
                                    const graphs::NotearsOptions& notears = {},
                                    const std::filesystem::path& import_path = {});

struct PEResult {
    spectral::SpectralDecomposition decomposition;
    spectral::KSelection selection;
    spectral::PEMatrix pe;  // one row per original feature
};

PEResult make_pe(const graphs::FeatureGraph& graph, const Groups& groups, spectral::LaplacianKind kind,
                 std::optional<int> k, double alpha);

struct ReportResult {
    std::string text;
    std::string csv;  // kind,group,alpha,seed,metric,value
    std::vector<std::string> missing;
};

/// Runs every stage in order under output_dir/run-<hash prefix>, skipping
/// stages whose recorded artifacts are present and unchanged. Returns the
/// run directory.
std::filesystem::path run_pipeline(const RunConfig& config, bool verbose = false);

ReportResult report(const std::filesystem::path& run_dir);

}  // namespace tabspec::pipeline
