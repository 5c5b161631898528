#pragma once

#include "tabspec/graphs.hpp"
#include "tabspec/model/train.hpp"
#include "tabspec/model/transformer.hpp"
#include "tabspec/spectral.hpp"
#include "tabspec/synthetic.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tabspec::analysis {

/// Regression data split 60/20/20, standardized on the training rows, with
/// a graph-derived PE (normalized Laplacian, automatic k) estimated from the
/// training rows.
struct PreparedData {
    model::DataSplit train, val, test;
    Groups groups;
    Matrix pe_base;  // features x 2k, unscaled
    int k = 0;
    graphs::FeatureGraph graph;
};

PreparedData prepare_regression(const Matrix& X, const Vector& y, std::uint64_t split_seed,
                                graphs::GraphMethod method = graphs::GraphMethod::spearman,
                                std::optional<int> fixed_k = std::nullopt);
PreparedData prepare_synthetic(const synthetic::SyntheticSpec& spec,
                               graphs::GraphMethod method = graphs::GraphMethod::spearman,
                               std::optional<int> fixed_k = std::nullopt);

struct SweepRecord {
    std::string group;  // pe mode or structure regime
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

struct SweepSummary {
    std::string group;
    double alpha = 0.0;
    std::string metric;
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * sample sd / sqrt(n)
    std::size_t n = 0;
};

std::vector<SweepSummary> summarize(const std::vector<SweepRecord>& records);
double summary_mean(const std::vector<SweepSummary>& summary, const std::string& group, double alpha);

// Long-format CSV: group,alpha,seed,metric,value.
std::string records_to_csv(const std::vector<SweepRecord>& records);
std::vector<SweepRecord> records_from_csv(const std::string& text);
std::string summary_to_csv(const std::vector<SweepSummary>& summary);

// Small single-block model and optimizer settings used by the sweeps so
// that a full sweep fits on one CPU core.
model::ModelSpec desk_model_spec();
model::TrainConfig desk_train_config();

using Progress = std::function<void(const std::string&)>;

/// Trains one model per (mode, alpha, seed) and records the effective rank
/// of test-split CLS embeddings. alpha = 0 is trained once per seed and
/// shared across modes, since a zero PE block makes all modes identical.
std::vector<SweepRecord> rank_sweep(const PreparedData& data, const std::vector<model::PEMode>& modes,
                                    const std::vector<double>& alphas, const model::ModelSpec& spec,
                                    const model::TrainConfig& train_config, const std::vector<std::uint64_t>& seeds,
                                    const Progress& progress = {});

/// For each k (structure regime) and seed: generates a dataset, builds its
/// fixed PE and records test RMSE of a model trained at every alpha.
std::vector<SweepRecord> alpha_rmse_sweep(const synthetic::SyntheticSpec& base, const std::vector<int>& ks,
                                          const std::vector<double>& alphas, const model::ModelSpec& spec,
                                          const model::TrainConfig& train_config,
                                          const std::vector<std::uint64_t>& seeds, const Progress& progress = {});

}  // namespace tabspec::analysis
