#pragma once

#include "tabspec/model/params.hpp"
#include "tabspec/model/transformer.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace tabspec::model {

/// One split of encoded features with its targets. `y` is on the raw scale
/// for regression; `labels` are class indices for classification.
struct DataSplit {
    Matrix X;
    Vector y;
    std::vector<int> labels;

    Eigen::Index size() const { return X.rows(); }
};

struct TrainConfig {
    int max_epochs = 50;
    int patience = 20;
    int min_epochs = 10;
    int batch_size = 64;
    AdamWOptions optimizer;
    std::uint64_t seed = 1;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_val_metric = 0.0;
    bool stopped_early = false;
};

bool higher_is_better(Task task);

// RMSE on the raw target scale, or balanced accuracy.
double evaluate(const FTTransformer& model, const DataSplit& split);

/// Mini-batch AdamW with early stopping on the validation metric; the best
/// weights are restored at the end. Throws on a non-finite loss.
TrainResult train(FTTransformer& model, const DataSplit& train_split, const DataSplit& val_split,
                  const TrainConfig& config);

inline const std::vector<double> kDefaultAlphaGrid{0.05, 0.1, 0.25, 0.5, 1, 2, 3, 5, 10};

/// Argmax of the validation score over the grid; ties go to the smaller alpha.
double alpha_select(const std::vector<double>& grid, const std::function<double(double)>& validation_score,
                    bool higher_better = true);

}  // namespace tabspec::model
