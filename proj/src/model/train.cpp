#include "tabspec/model/train.hpp"

#include "tabspec/model/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tabspec::model {

bool higher_is_better(Task task) { return task == Task::classification; }

double evaluate(const FTTransformer& model, const DataSplit& split) {
    if (model.spec().task == Task::regression) return rmse(model.predict(split.X), split.y);
    return balanced_accuracy(model.predict_labels(split.X), split.labels);
}

namespace {

Matrix take_rows(const Matrix& X, const std::vector<std::size_t>& idx, std::size_t from, std::size_t to) {
    Matrix out(static_cast<Eigen::Index>(to - from), X.cols());
    for (std::size_t i = from; i < to; ++i) out.row(static_cast<Eigen::Index>(i - from)) = X.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

}  // namespace

TrainResult train(FTTransformer& model, const DataSplit& train_split, const DataSplit& val_split,
                  const TrainConfig& config) {
    if (config.batch_size < 1 || config.max_epochs < 1) throw Error("train: invalid configuration");
    if (train_split.size() == 0 || val_split.size() == 0) throw Error("train: empty split");
    const Task task = model.spec().task;
    const bool higher = higher_is_better(task);

    std::vector<std::size_t> counts;
    Vector y_std;
    if (task == Task::regression) {
        if (train_split.y.size() != train_split.size()) throw Error("train: target size mismatch");
        const double mean = train_split.y.mean();
        const double sd = std::sqrt((train_split.y.array() - mean).square().mean());
        model.set_target_scaling(mean, sd > 1e-12 ? sd : 1.0);
        y_std = (train_split.y.array() - model.target_mean()) / model.target_scale();
    } else {
        if (train_split.labels.size() != static_cast<std::size_t>(train_split.size()))
            throw Error("train: label size mismatch");
        counts = class_counts(train_split.labels, model.spec().n_classes);
    }

    AdamW optimizer(model.params(), config.optimizer);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(static_cast<std::size_t>(train_split.size()));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<Matrix> best_weights = model.params().snapshot();
    int since_best = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Targets t;
            if (task == Task::regression) {
                t.y.resize(static_cast<Eigen::Index>(stop - start));
                for (std::size_t i = start; i < stop; ++i) t.y[static_cast<Eigen::Index>(i - start)] = y_std[static_cast<Eigen::Index>(order[i])];
            } else {
                t.counts = counts;
                for (std::size_t i = start; i < stop; ++i) t.labels.push_back(train_split.labels[order[i]]);
            }
            model.params().zero_grad();
            const double l = model.loss_and_backward(take_rows(train_split.X, order, start, stop), t, &rng);
            if (!std::isfinite(l))
                throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
            optimizer.step(model.params());
            loss_sum += l * static_cast<double>(stop - start);
            seen += stop - start;
        }

        const double metric = evaluate(model, val_split);
        if (!std::isfinite(metric))
            throw Error("training diverged: non-finite validation metric at epoch " + std::to_string(epoch + 1));
        result.history.push_back({epoch + 1, loss_sum / static_cast<double>(seen), metric});
        const bool improved = result.best_epoch < 0 || (higher ? metric > result.best_val_metric : metric < result.best_val_metric);
        if (improved) {
            result.best_epoch = epoch + 1;
            result.best_val_metric = metric;
            best_weights = model.params().snapshot();
            since_best = 0;
        } else {
            ++since_best;
        }
        if (epoch + 1 >= config.min_epochs && since_best >= config.patience) {
            result.stopped_early = epoch + 1 < config.max_epochs;
            break;
        }
    }
    model.params().restore(best_weights);
    return result;
}

double alpha_select(const std::vector<double>& grid, const std::function<double(double)>& validation_score,
                    bool higher_better) {
    if (grid.empty()) throw Error("alpha grid is empty");
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    double best_alpha = sorted.front();
    double best = validation_score(best_alpha);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double s = validation_score(sorted[i]);
        if (higher_better ? s > best : s < best) {
            best = s;
            best_alpha = sorted[i];
        }
    }
    return best_alpha;
}

}  // namespace tabspec::model
