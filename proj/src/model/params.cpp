#include "tabspec/model/params.hpp"

#include <cmath>

namespace tabspec::model {

std::size_t ParamStore::add(std::string name, Matrix init, bool decay) {
    if (contains(name)) throw Error("duplicate parameter '" + name + "'");
    Param p;
    p.name = std::move(name);
    p.grad = Matrix::Zero(init.rows(), init.cols());
    p.value = std::move(init);
    p.decay = decay;
    params_.push_back(std::move(p));
    return params_.size() - 1;
}

std::size_t ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw Error("unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return true;
    return false;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.setZero();
}

Eigen::Index ParamStore::count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::vector<Matrix> ParamStore::snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw Error("restore: parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].rows() != params_[i].value.rows() || values[i].cols() != params_[i].value.cols())
            throw Error("restore: shape mismatch for '" + params_[i].name + "'");
        params_[i].value = values[i];
    }
}

AdamW::AdamW(const ParamStore& params, AdamWOptions opts) : opts_(opts) {
    for (const auto& p : params) {
        m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
}

void AdamW::step(ParamStore& params) {
    if (params.size() != m_.size()) throw Error("AdamW: parameter set changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        if (p.decay && opts_.weight_decay > 0.0) p.value *= 1.0 - opts_.lr * opts_.weight_decay;
        m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * p.grad;
        v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= opts_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opts_.eps);
    }
}

}  // namespace tabspec::model
