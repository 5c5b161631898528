#pragma once

#include "tabspec/common.hpp"

#include <cstddef>
#include <vector>

namespace tabspec::model {

std::vector<std::size_t> class_counts(const std::vector<int>& labels, int n_classes);

/// w_c = (1/C) * (N / n_c). Classes with zero count get weight 0.
Vector balanced_class_weights(const std::vector<std::size_t>& counts);

/// -(1/B) sum_i w_{y_i} log softmax(logits_i)[y_i]. Throws when a label's
/// class has zero count. Writes d loss / d logits when requested.
double balanced_ce_loss(const Matrix& logits, const std::vector<int>& labels, const std::vector<std::size_t>& counts,
                        Matrix* dlogits = nullptr);

// sum_i [pred_i == y_i] / (n_{y_i} * C), evaluated class by class.
double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);
// Mean of per-class recalls.
double macro_recall(const std::vector<int>& preds, const std::vector<int>& labels);

double mse_loss(const Vector& pred, const Vector& target, Vector* dpred = nullptr);
double rmse(const Vector& pred, const Vector& target);

// Relative improvement of `pet` over `baseline`, in percent; positive is better.
double improvement_percent(double baseline, double pet, bool lower_is_better);

}  // namespace tabspec::model
