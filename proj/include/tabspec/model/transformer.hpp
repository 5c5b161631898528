#pragma once

#include "tabspec/common.hpp"
#include "tabspec/model/layers.hpp"
#include "tabspec/model/params.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tabspec::model {

enum class PEMode { none, fixed, random, learnable };
enum class Task { regression, classification };

std::string to_string(PEMode m);
PEMode parse_pe_mode(const std::string& s);
std::string to_string(Task t);
Task parse_task(const std::string& s);

struct ModelSpec {
    int d_token = 192;  // total token width, content + PE block
    int d_pe = 0;
    int n_layers = 3;
    int n_heads = 8;
    double ffn_factor = 4.0 / 3.0;
    double attention_dropout = 0.2;
    double ffn_dropout = 0.1;
    double residual_dropout = 0.0;
    PEMode pe_mode = PEMode::none;
    double alpha = 1.0;
    Task task = Task::regression;
    int n_classes = 1;
    std::uint64_t seed = 1;

    void validate() const;
    int d_content() const { return d_token - d_pe; }
    int d_head() const { return d_token / n_heads; }
    int ffn_hidden() const { return static_cast<int>(d_token * ffn_factor); }
    int n_outputs() const { return task == Task::regression ? 1 : n_classes; }
};

/// Targets for one batch: `y` (standardized) for regression, `labels` and
/// training-split `counts` for classification.
struct Targets {
    Vector y;
    std::vector<int> labels;
    std::vector<std::size_t> counts;
};

/// Minimal FT-Transformer: one token per original feature (the sum of its
/// encoded columns' embeddings), a prepended CLS token, a PE block of width
/// d_pe concatenated to every feature token, pre-norm attention + ReGLU
/// blocks (the first block's attention sees raw tokens), and a LayerNorm -> ReLU -> Linear head on the CLS token.
class FTTransformer {
public:
    // `pe_base` (features x d_pe, unscaled) is required for fixed mode.
    FTTransformer(ModelSpec spec, Groups groups, std::size_t n_columns, const Matrix& pe_base = Matrix());

    const ModelSpec& spec() const { return spec_; }
    const Groups& groups() const { return groups_; }
    std::size_t n_columns() const { return n_columns_; }
    std::size_t n_features() const { return groups_.size(); }
    std::size_t n_tokens() const { return groups_.size() + 1; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    Eigen::Index parameter_count() const { return params_.count(); }

    const Matrix& pe_base() const { return pe_base_; }
    void set_alpha(double alpha);
    // Current PE rows (features x d_pe) as attached to tokens.
    Matrix pe_block() const;

    // Content part, (batch * n_tokens) x d_content; row b*n_tokens is the CLS token.
    Matrix tokenize(const Matrix& X) const;
    // Appends the PE block (zeros for CLS), giving (batch * n_tokens) x d_token.
    Matrix attach_pe(const Matrix& content) const;

    Matrix forward(const Matrix& X) const;         // batch x n_outputs
    Matrix cls_embeddings(const Matrix& X) const;  // batch x d_token, input to the head
    // Regression: de-standardized values. Classification: argmax labels as doubles.
    Vector predict(const Matrix& X) const;
    std::vector<int> predict_labels(const Matrix& X) const;

    // One training pass: forward (dropout active when rng is given), loss,
    // and gradient accumulation into params().grad. Returns the loss.
    double loss_and_backward(const Matrix& X, const Targets& targets, std::mt19937_64* rng);
    // Loss without gradients or dropout.
    double loss(const Matrix& X, const Targets& targets) const;

    void set_target_scaling(double mean, double scale);
    double target_mean() const { return target_mean_; }
    double target_scale() const { return target_scale_; }

private:
    struct LayerIds {
        bool has_norm1 = true;
        std::size_t norm1_w = 0, norm1_b = 0, wq, bq, wk, bk, wv, bv, wo, bo, norm2_w, norm2_b, w1, b1, w2, b2;
    };
    struct LayerCache;
    struct Cache;

    Matrix run(const Matrix& X, Cache* cache, std::mt19937_64* rng) const;
    Matrix layer_forward(std::size_t l, const Matrix& h, bool cls_only, LayerCache* cache,
                         std::mt19937_64* rng) const;
    Matrix layer_backward(std::size_t l, const Matrix& dout, const LayerCache& cache);
    const Matrix& p(std::size_t id) const { return params_[id].value; }
    Matrix& g(std::size_t id) { return params_[id].grad; }

    ModelSpec spec_;
    Groups groups_;
    std::size_t n_columns_;
    std::vector<int> column_feature_;
    Matrix pe_base_;
    ParamStore params_;
    std::size_t tok_w_, tok_b_, cls_, pe_learn_ = 0, norm_w_, norm_b_, head_w_, head_b_;
    std::vector<LayerIds> layers_;
    double target_mean_ = 0.0, target_scale_ = 1.0;
};

}  // namespace tabspec::model
