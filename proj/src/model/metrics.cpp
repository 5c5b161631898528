#include "tabspec/model/metrics.hpp"

#include <cmath>
#include <map>

namespace tabspec::model {

std::vector<std::size_t> class_counts(const std::vector<int>& labels, int n_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw Error("label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

Vector balanced_class_weights(const std::vector<std::size_t>& counts) {
    if (counts.empty()) throw Error("balanced weights: no classes");
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total == 0.0) throw Error("balanced weights: no samples");
    const double C = static_cast<double>(counts.size());
    Vector w(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t c = 0; c < counts.size(); ++c)
        w[static_cast<Eigen::Index>(c)] = counts[c] ? (1.0 / C) * (total / static_cast<double>(counts[c])) : 0.0;
    return w;
}

double balanced_ce_loss(const Matrix& logits, const std::vector<int>& labels, const std::vector<std::size_t>& counts,
                        Matrix* dlogits) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw Error("balanced CE: batch size mismatch");
    if (static_cast<std::size_t>(logits.cols()) != counts.size()) throw Error("balanced CE: class count mismatch");
    const Vector w = balanced_class_weights(counts);
    const double B = static_cast<double>(labels.size());
    double loss = 0.0;
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= logits.cols()) throw Error("balanced CE: label out of range");
        if (counts[static_cast<std::size_t>(y)] == 0) throw Error("balanced CE: label with zero count");
        const double m = logits.row(i).maxCoeff();
        const RowVector e = (logits.row(i).array() - m).exp();
        const double z = e.sum();
        loss -= w[y] * (logits(i, y) - m - std::log(z));
        if (dlogits) {
            dlogits->row(i) = (w[y] / B) * (e / z);
            (*dlogits)(i, y) -= w[y] / B;
        }
    }
    return loss / B;
}

namespace {

// Per-class (correct, total), ordered by label.
std::map<int, std::pair<std::size_t, std::size_t>> class_hits(const std::vector<int>& preds,
                                                              const std::vector<int>& labels) {
    std::map<int, std::pair<std::size_t, std::size_t>> hits;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& h = hits[labels[i]];
        h.second += 1;
        if (preds[i] == labels[i]) h.first += 1;
    }
    return hits;
}

double mean_recall(const std::map<int, std::pair<std::size_t, std::size_t>>& hits) {
    double sum = 0.0;
    for (const auto& [cls, h] : hits) sum += static_cast<double>(h.first) / static_cast<double>(h.second);
    return sum / static_cast<double>(hits.size());
}

}  // namespace

double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || labels.empty()) throw Error("balanced accuracy: size mismatch");
    // the weighted sum, with its terms grouped by class
    return mean_recall(class_hits(preds, labels));
}

double macro_recall(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || labels.empty()) throw Error("macro recall: size mismatch");
    return mean_recall(class_hits(preds, labels));
}

double mse_loss(const Vector& pred, const Vector& target, Vector* dpred) {
    if (pred.size() != target.size() || pred.size() == 0) throw Error("mse: size mismatch");
    const Vector diff = pred - target;
    if (dpred) *dpred = (2.0 / static_cast<double>(pred.size())) * diff;
    return diff.squaredNorm() / static_cast<double>(pred.size());
}

double rmse(const Vector& pred, const Vector& target) { return std::sqrt(mse_loss(pred, target)); }

double improvement_percent(double baseline, double pet, bool lower_is_better) {
    if (baseline == 0.0) throw Error("improvement: zero baseline");
    const double rel = 100.0 * (baseline - pet) / baseline;
    return lower_is_better ? rel : -rel;
}

}  // namespace tabspec::model
