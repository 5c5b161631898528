#pragma once

#include "tabspec/common.hpp"

#include <string>
#include <vector>

namespace tabspec::model {

struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    bool decay = false;  // subject to decoupled weight decay
};

/// Ordered collection of named trainable tensors. Indices are stable.
class ParamStore {
public:
    std::size_t add(std::string name, Matrix init, bool decay);
    Param& operator[](std::size_t i) { return params_[i]; }
    const Param& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::size_t find(const std::string& name) const;
    bool contains(const std::string& name) const;

    void zero_grad();
    Eigen::Index count() const;  // total number of scalars

    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Param> params_;
};

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
};

class AdamW {
public:
    AdamW(const ParamStore& params, AdamWOptions opts);
    void step(ParamStore& params);
    long steps() const { return t_; }

private:
    AdamWOptions opts_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

}  // namespace tabspec::model
