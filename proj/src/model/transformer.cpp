#include "tabspec/model/transformer.hpp"

#include "tabspec/model/metrics.hpp"
#include "tabspec/spectral.hpp"

#include <cmath>

namespace tabspec::model {

std::string to_string(PEMode m) {
    switch (m) {
        case PEMode::none: return "none";
        case PEMode::fixed: return "fixed";
        case PEMode::random: return "random";
        case PEMode::learnable: return "learnable";
    }
    return "none";
}

PEMode parse_pe_mode(const std::string& s) {
    if (s == "none") return PEMode::none;
    if (s == "fixed") return PEMode::fixed;
    if (s == "random") return PEMode::random;
    if (s == "learnable") return PEMode::learnable;
    throw Error("unknown pe mode '" + s + "'");
}

std::string to_string(Task t) { return t == Task::regression ? "reg" : "clf"; }

Task parse_task(const std::string& s) {
    if (s == "reg" || s == "regression") return Task::regression;
    if (s == "clf" || s == "classification") return Task::classification;
    throw Error("unknown task '" + s + "'");
}

void ModelSpec::validate() const {
    if (d_pe < 0) throw Error("d_pe must be nonnegative");
    if (d_token - d_pe <= 0) throw Error("token content dimension must be positive");
    if (n_layers < 1) throw Error("n_layers must be positive");
    if (n_heads < 1 || d_token % n_heads != 0) throw Error("d_token must be divisible by n_heads");
    if (ffn_hidden() < 1) throw Error("ffn hidden width must be positive");
    for (double p : {attention_dropout, ffn_dropout, residual_dropout})
        if (p < 0.0 || p >= 1.0) throw Error("dropout rates must lie in [0, 1)");
    if (alpha < 0.0) throw Error("alpha must be nonnegative");
    if (task == Task::classification && n_classes < 2) throw Error("classification needs at least two classes");
}

struct FTTransformer::LayerCache {
    bool cls_only = false;
    LayerNormCache ln1;
    Matrix a, q, k, v, o;
    std::vector<Matrix> probs, attn_masks;
    Matrix z_mask, r1;
    LayerNormCache ln2;
    Matrix a2, u, g_mask, gd, f_mask;
};

struct FTTransformer::Cache {
    std::vector<LayerCache> layers;
    LayerNormCache norm;
    Matrix pre_relu, emb;
};

namespace {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

Matrix gather_rows(const Matrix& h, Eigen::Index stride) {
    const Eigen::Index B = h.rows() / stride;
    Matrix out(B, h.cols());
    for (Eigen::Index b = 0; b < B; ++b) out.row(b) = h.row(b * stride);
    return out;
}

void scatter_add_rows(Matrix& dst, const Matrix& src, Eigen::Index stride) {
    for (Eigen::Index b = 0; b < src.rows(); ++b) dst.row(b * stride) += src.row(b);
}

Matrix apply_mask(const Matrix& x, const Matrix& mask) {
    if (mask.size() == 0) return x;
    return x.cwiseProduct(mask);
}

Matrix maybe_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64* rng) {
    if (!rng || p <= 0.0) return Matrix();
    return dropout_mask(rows, cols, p, *rng);
}

constexpr Eigen::Index kEvalChunk = 512;

}  // namespace

FTTransformer::FTTransformer(ModelSpec spec, Groups groups, std::size_t n_columns, const Matrix& pe_base)
    : spec_(spec), groups_(std::move(groups)), n_columns_(n_columns) {
    spec_.validate();
    if (groups_.empty()) throw Error("model needs at least one feature");
    column_feature_.assign(n_columns_, -1);
    for (std::size_t f = 0; f < groups_.size(); ++f) {
        if (groups_[f].empty()) throw Error("feature group is empty");
        for (auto c : groups_[f]) {
            if (c >= n_columns_) throw Error("feature group references a missing column");
            if (column_feature_[c] != -1) throw Error("column assigned to two features");
            column_feature_[c] = static_cast<int>(f);
        }
    }
    for (int f : column_feature_)
        if (f < 0) throw Error("column not assigned to any feature");

    const auto F = static_cast<Eigen::Index>(groups_.size());
    switch (spec_.pe_mode) {
        case PEMode::fixed:
            if (pe_base.rows() != F) throw Error("pe row count must equal feature count");
            if (pe_base.cols() != spec_.d_pe) throw Error("pe width must equal d_pe");
            pe_base_ = pe_base;
            break;
        case PEMode::random:
            pe_base_ = spectral::random_pe(F, spec_.d_pe, 1.0, spec_.seed * 7919 + 104729).base;
            break;
        default:
            pe_base_ = Matrix::Zero(F, spec_.d_pe);
    }

    std::mt19937_64 rng(spec_.seed);
    const int d = spec_.d_token, dc = spec_.d_content(), h = spec_.ffn_hidden();
    const double tb = 1.0 / std::sqrt(static_cast<double>(dc));
    tok_w_ = params_.add("tokenizer.weight", uniform_init(static_cast<Eigen::Index>(n_columns_), dc, tb, rng), false);
    tok_b_ = params_.add("tokenizer.bias", uniform_init(F, dc, tb, rng), false);
    cls_ = params_.add("tokenizer.cls", uniform_init(1, dc, tb, rng), false);

    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    const double bh = 1.0 / std::sqrt(static_cast<double>(h));
    for (int l = 0; l < spec_.n_layers; ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        LayerIds ids{};
        ids.has_norm1 = l > 0;
        if (ids.has_norm1) {
            ids.norm1_w = params_.add(pre + "norm1.weight", Matrix::Ones(1, d), false);
            ids.norm1_b = params_.add(pre + "norm1.bias", Matrix::Zero(1, d), false);
        }
        ids.wq = params_.add(pre + "attention.wq", uniform_init(d, d, bd, rng), true);
        ids.bq = params_.add(pre + "attention.bq", Matrix::Zero(1, d), false);
        ids.wk = params_.add(pre + "attention.wk", uniform_init(d, d, bd, rng), true);
        ids.bk = params_.add(pre + "attention.bk", Matrix::Zero(1, d), false);
        ids.wv = params_.add(pre + "attention.wv", uniform_init(d, d, bd, rng), true);
        ids.bv = params_.add(pre + "attention.bv", Matrix::Zero(1, d), false);
        ids.wo = params_.add(pre + "attention.wo", uniform_init(d, d, bd, rng), true);
        ids.bo = params_.add(pre + "attention.bo", Matrix::Zero(1, d), false);
        ids.norm2_w = params_.add(pre + "norm2.weight", Matrix::Ones(1, d), false);
        ids.norm2_b = params_.add(pre + "norm2.bias", Matrix::Zero(1, d), false);
        ids.w1 = params_.add(pre + "ffn.w1", uniform_init(d, 2 * h, bd, rng), true);
        ids.b1 = params_.add(pre + "ffn.b1", Matrix::Zero(1, 2 * h), false);
        ids.w2 = params_.add(pre + "ffn.w2", uniform_init(h, d, bh, rng), true);
        ids.b2 = params_.add(pre + "ffn.b2", Matrix::Zero(1, d), false);
        layers_.push_back(ids);
    }
    norm_w_ = params_.add("head.norm.weight", Matrix::Ones(1, d), false);
    norm_b_ = params_.add("head.norm.bias", Matrix::Zero(1, d), false);
    head_w_ = params_.add("head.weight", uniform_init(d, spec_.n_outputs(), bd, rng), true);
    head_b_ = params_.add("head.bias", Matrix::Zero(1, spec_.n_outputs()), false);

    if (spec_.pe_mode == PEMode::learnable) {
        std::mt19937_64 pe_rng(spec_.seed * 7919 + 104729);
        std::normal_distribution<double> normal(0.0, 0.02);
        Matrix init(F, spec_.d_pe);
        for (Eigen::Index r = 0; r < F; ++r)
            for (Eigen::Index c = 0; c < spec_.d_pe; ++c) init(r, c) = normal(pe_rng);
        pe_learn_ = params_.add("pe.weight", std::move(init), false);
    }
}

void FTTransformer::set_alpha(double alpha) {
    if (alpha < 0.0) throw Error("alpha must be nonnegative");
    spec_.alpha = alpha;
}

Matrix FTTransformer::pe_block() const {
    switch (spec_.pe_mode) {
        case PEMode::fixed:
        case PEMode::random: return spec_.alpha * pe_base_;
        case PEMode::learnable: return params_[pe_learn_].value;
        case PEMode::none: break;
    }
    return Matrix::Zero(static_cast<Eigen::Index>(groups_.size()), spec_.d_pe);
}

void FTTransformer::set_target_scaling(double mean, double scale) {
    if (!(scale > 0.0)) throw Error("target scale must be positive");
    target_mean_ = mean;
    target_scale_ = scale;
}

Matrix FTTransformer::tokenize(const Matrix& X) const {
    if (X.cols() != static_cast<Eigen::Index>(n_columns_)) throw Error("input column count does not match the model");
    const Eigen::Index B = X.rows(), T = static_cast<Eigen::Index>(n_tokens());
    const Matrix& W = p(tok_w_);
    const Matrix& bias = p(tok_b_);
    Matrix out(B * T, spec_.d_content());
    for (Eigen::Index b = 0; b < B; ++b) {
        out.row(b * T) = p(cls_).row(0);
        out.block(b * T + 1, 0, T - 1, out.cols()) = bias;
        for (std::size_t c = 0; c < n_columns_; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            out.row(b * T + 1 + column_feature_[c]) += X(b, ci) * W.row(ci);
        }
    }
    return out;
}

Matrix FTTransformer::attach_pe(const Matrix& content) const {
    const Eigen::Index T = static_cast<Eigen::Index>(n_tokens());
    if (content.cols() != spec_.d_content() || content.rows() % T != 0) throw Error("attach_pe: width mismatch");
    const Eigen::Index B = content.rows() / T;
    const Matrix pe = pe_block();
    if (pe.cols() != spec_.d_pe) throw Error("attach_pe: pe width mismatch");
    Matrix out(content.rows(), spec_.d_token);
    out.leftCols(spec_.d_content()) = content;
    for (Eigen::Index b = 0; b < B; ++b) {
        out.block(b * T, spec_.d_content(), 1, spec_.d_pe).setZero();
        out.block(b * T + 1, spec_.d_content(), T - 1, spec_.d_pe) = pe;
    }
    return out;
}

Matrix FTTransformer::layer_forward(std::size_t l, const Matrix& h, bool cls_only, LayerCache* cache,
                                    std::mt19937_64* rng) const {
    const LayerIds& L = layers_[l];
    const Eigen::Index T = static_cast<Eigen::Index>(n_tokens());
    const Eigen::Index B = h.rows() / T, Tq = cls_only ? 1 : T;
    const Eigen::Index dh = spec_.d_head();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    LayerNormCache ln1;
    Matrix a = L.has_norm1 ? layer_norm_forward(h, p(L.norm1_w), p(L.norm1_b), cache ? &ln1 : nullptr) : h;
    Matrix q = linear_forward(cls_only ? gather_rows(a, T) : a, p(L.wq), p(L.bq));
    Matrix k = linear_forward(a, p(L.wk), p(L.bk));
    Matrix v = linear_forward(a, p(L.wv), p(L.bv));

    Matrix o(B * Tq, spec_.d_token);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int hd = 0; hd < spec_.n_heads; ++hd) {
            Matrix probs = softmax_rows(q.block(b * Tq, hd * dh, Tq, dh) * k.block(b * T, hd * dh, T, dh).transpose() *
                                        scale);
            Matrix mask = maybe_mask(Tq, T, spec_.attention_dropout, rng);
            o.block(b * Tq, hd * dh, Tq, dh) = apply_mask(probs, mask) * v.block(b * T, hd * dh, T, dh);
            if (cache) {
                cache->probs.push_back(std::move(probs));
                cache->attn_masks.push_back(std::move(mask));
            }
        }
    }
    Matrix z_mask = maybe_mask(B * Tq, spec_.d_token, spec_.residual_dropout, rng);
    Matrix r1 = (cls_only ? gather_rows(h, T) : h) + apply_mask(linear_forward(o, p(L.wo), p(L.bo)), z_mask);

    LayerNormCache ln2;
    Matrix a2 = layer_norm_forward(r1, p(L.norm2_w), p(L.norm2_b), cache ? &ln2 : nullptr);
    Matrix u = linear_forward(a2, p(L.w1), p(L.b1));
    Matrix g_mask = maybe_mask(B * Tq, spec_.ffn_hidden(), spec_.ffn_dropout, rng);
    Matrix gd = apply_mask(reglu_forward(u), g_mask);
    Matrix f_mask = maybe_mask(B * Tq, spec_.d_token, spec_.residual_dropout, rng);
    Matrix out = r1 + apply_mask(linear_forward(gd, p(L.w2), p(L.b2)), f_mask);

    if (cache) {
        cache->cls_only = cls_only;
        cache->ln1 = std::move(ln1);
        cache->a = std::move(a);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->o = std::move(o);
        cache->z_mask = std::move(z_mask);
        cache->r1 = std::move(r1);
        cache->ln2 = std::move(ln2);
        cache->a2 = std::move(a2);
        cache->u = std::move(u);
        cache->g_mask = std::move(g_mask);
        cache->gd = std::move(gd);
        cache->f_mask = std::move(f_mask);
    }
    return out;
}

Matrix FTTransformer::layer_backward(std::size_t l, const Matrix& dout, const LayerCache& c) {
    const LayerIds& L = layers_[l];
    const Eigen::Index T = static_cast<Eigen::Index>(n_tokens());
    const Eigen::Index Tq = c.cls_only ? 1 : T;
    const Eigen::Index B = c.a.rows() / T;
    const Eigen::Index dh = spec_.d_head();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dr1 = dout;
    const Matrix dgd = linear_backward(apply_mask(dout, c.f_mask), c.gd, p(L.w2), g(L.w2), g(L.b2));
    const Matrix du = reglu_backward(apply_mask(dgd, c.g_mask), c.u);
    const Matrix da2 = linear_backward(du, c.a2, p(L.w1), g(L.w1), g(L.b1));
    dr1 += layer_norm_backward(da2, c.ln2, p(L.norm2_w), g(L.norm2_w), g(L.norm2_b));

    const Matrix d_o = linear_backward(apply_mask(dr1, c.z_mask), c.o, p(L.wo), g(L.wo), g(L.bo));
    Matrix dq(B * Tq, spec_.d_token), dk = Matrix::Zero(B * T, spec_.d_token), dv = Matrix::Zero(B * T, spec_.d_token);
    std::size_t idx = 0;
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int hd = 0; hd < spec_.n_heads; ++hd, ++idx) {
            const Matrix& P = c.probs[idx];
            const Matrix& mask = c.attn_masks[idx];
            const auto dob = d_o.block(b * Tq, hd * dh, Tq, dh);
            const auto kb = c.k.block(b * T, hd * dh, T, dh);
            const auto vb = c.v.block(b * T, hd * dh, T, dh);
            const auto qb = c.q.block(b * Tq, hd * dh, Tq, dh);
            dv.block(b * T, hd * dh, T, dh).noalias() += apply_mask(P, mask).transpose() * dob;
            const Matrix dP = apply_mask(dob * vb.transpose(), mask);
            const Matrix dS = softmax_rows_backward(dP, P) * scale;
            dq.block(b * Tq, hd * dh, Tq, dh).noalias() = dS * kb;
            dk.block(b * T, hd * dh, T, dh).noalias() += dS.transpose() * qb;
        }
    }
    const Matrix aq = c.cls_only ? gather_rows(c.a, T) : Matrix();
    const Matrix daq = linear_backward(dq, c.cls_only ? aq : c.a, p(L.wq), g(L.wq), g(L.bq));
    Matrix da = linear_backward(dk, c.a, p(L.wk), g(L.wk), g(L.bk));
    da += linear_backward(dv, c.a, p(L.wv), g(L.wv), g(L.bv));
    if (c.cls_only)
        scatter_add_rows(da, daq, T);
    else
        da += daq;

    Matrix dh_in = L.has_norm1 ? layer_norm_backward(da, c.ln1, p(L.norm1_w), g(L.norm1_w), g(L.norm1_b)) : da;
    if (c.cls_only)
        scatter_add_rows(dh_in, dr1, T);
    else
        dh_in += dr1;
    return dh_in;
}

Matrix FTTransformer::run(const Matrix& X, Cache* cache, std::mt19937_64* rng) const {
    Matrix h = attach_pe(tokenize(X));
    if (cache) cache->layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l)
        h = layer_forward(l, h, l + 1 == layers_.size(), cache ? &cache->layers[l] : nullptr, rng);
    LayerNormCache ln;
    Matrix pre = layer_norm_forward(h, p(norm_w_), p(norm_b_), cache ? &ln : nullptr);
    Matrix emb = pre.cwiseMax(0.0);
    if (cache) {
        cache->norm = std::move(ln);
        cache->pre_relu = std::move(pre);
        cache->emb = emb;
    }
    return emb;
}

Matrix FTTransformer::cls_embeddings(const Matrix& X) const {
    Matrix out(X.rows(), spec_.d_token);
    for (Eigen::Index s = 0; s < X.rows(); s += kEvalChunk) {
        const Eigen::Index n = std::min(kEvalChunk, X.rows() - s);
        out.middleRows(s, n) = run(X.middleRows(s, n), nullptr, nullptr);
    }
    return out;
}

Matrix FTTransformer::forward(const Matrix& X) const {
    return linear_forward(cls_embeddings(X), p(head_w_), p(head_b_));
}

Vector FTTransformer::predict(const Matrix& X) const {
    const Matrix out = forward(X);
    if (spec_.task == Task::regression) return (out.col(0).array() * target_scale_ + target_mean_).matrix();
    Vector labels(out.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Eigen::Index arg;
        out.row(i).maxCoeff(&arg);
        labels[i] = static_cast<double>(arg);
    }
    return labels;
}

std::vector<int> FTTransformer::predict_labels(const Matrix& X) const {
    if (spec_.task != Task::classification) throw Error("predict_labels requires a classification model");
    const Vector v = predict(X);
    std::vector<int> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(v[i]);
    return out;
}

namespace {

double head_loss(const Matrix& out, const Targets& t, Task task, Matrix* dout) {
    if (task == Task::regression) {
        Vector dpred;
        const double l = mse_loss(out.col(0), t.y, dout ? &dpred : nullptr);
        if (dout) *dout = dpred;
        return l;
    }
    return balanced_ce_loss(out, t.labels, t.counts, dout);
}

}  // namespace

double FTTransformer::loss(const Matrix& X, const Targets& targets) const {
    return head_loss(forward(X), targets, spec_.task, nullptr);
}

double FTTransformer::loss_and_backward(const Matrix& X, const Targets& targets, std::mt19937_64* rng) {
    Cache cache;
    const Matrix emb = run(X, &cache, rng);
    const Matrix out = linear_forward(emb, p(head_w_), p(head_b_));
    Matrix dout;
    const double loss_value = head_loss(out, targets, spec_.task, &dout);

    const Matrix demb = linear_backward(dout, emb, p(head_w_), g(head_w_), g(head_b_));
    const Matrix dpre = (cache.pre_relu.array() > 0.0).select(demb, 0.0);
    Matrix dh = layer_norm_backward(dpre, cache.norm, p(norm_w_), g(norm_w_), g(norm_b_));
    for (std::size_t l = layers_.size(); l-- > 0;) dh = layer_backward(l, dh, cache.layers[l]);

    const Eigen::Index T = static_cast<Eigen::Index>(n_tokens()), dc = spec_.d_content();
    Matrix& gw = g(tok_w_);
    Matrix& gb = g(tok_b_);
    Matrix& gc = g(cls_);
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
        gc.row(0) += dh.block(b * T, 0, 1, dc);
        gb += dh.block(b * T + 1, 0, T - 1, dc);
        for (std::size_t c = 0; c < n_columns_; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            gw.row(ci) += X(b, ci) * dh.block(b * T + 1 + column_feature_[c], 0, 1, dc);
        }
        if (spec_.pe_mode == PEMode::learnable) g(pe_learn_) += dh.block(b * T + 1, dc, T - 1, spec_.d_pe);
    }
    return loss_value;
}

}  // namespace tabspec::model
