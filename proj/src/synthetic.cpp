#include "tabspec/synthetic.hpp"

#include "tabspec/io.hpp"

#include <nlohmann/json.hpp>

#include <random>

namespace tabspec::synthetic {

void SyntheticSpec::validate() const {
    if (d < 1) throw Error("synthetic: d must be positive");
    if (k < 1) throw Error("synthetic: k must be positive");
    if (k > d) throw Error("synthetic: k must not exceed d");
    if (n < 1) throw Error("synthetic: n must be positive");
    if (!(noise_std > 0.0)) throw Error("synthetic: noise_std must be positive");
    if (!(latent_lo < latent_hi) || !(weight_lo < weight_hi)) throw Error("synthetic: empty sampling range");
    if (target_group < 0 || target_group >= k) throw Error("synthetic: target group out of range");
}

Groups balanced_partition(int d, int k) {
    if (k < 1 || k > d) throw Error("synthetic: k must be in [1, d]");
    Groups groups(static_cast<std::size_t>(k));
    const int base = d / k, extra = d % k;
    std::size_t next = 0;
    for (int g = 0; g < k; ++g) {
        const int size = base + (g < extra ? 1 : 0);
        for (int j = 0; j < size; ++j) groups[static_cast<std::size_t>(g)].push_back(next++);
    }
    return groups;
}

SyntheticData generate(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> weight(spec.weight_lo, spec.weight_hi);
    std::uniform_real_distribution<double> latent(spec.latent_lo, spec.latent_hi);
    std::normal_distribution<double> noise(0.0, spec.noise_std);

    SyntheticData out;
    out.groups = balanced_partition(spec.d, spec.k);
    out.target_group = spec.target_group;
    out.feature_weights.resize(spec.d);
    for (int f = 0; f < spec.d; ++f) out.feature_weights[f] = weight(rng);
    out.target_weight = weight(rng);
    out.target_bias = weight(rng);

    std::vector<int> group_of(static_cast<std::size_t>(spec.d));
    for (std::size_t g = 0; g < out.groups.size(); ++g)
        for (auto f : out.groups[g]) group_of[f] = static_cast<int>(g);

    out.X.resize(spec.n, spec.d);
    out.y.resize(spec.n);
    out.latents.resize(spec.n, spec.k);
    for (int t = 0; t < spec.n; ++t) {
        for (int g = 0; g < spec.k; ++g) out.latents(t, g) = latent(rng);
        for (int f = 0; f < spec.d; ++f)
            out.X(t, f) = out.latents(t, group_of[static_cast<std::size_t>(f)]) * out.feature_weights[f] + noise(rng);
        out.y[t] = out.target_weight * out.latents(t, spec.target_group) + out.target_bias;
    }
    return out;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::high: return "high";
        case Regime::moderate: return "moderate";
        case Regime::low: return "low";
    }
    return "unknown";
}

Regime structure_regime(int d, int k) {
    if (d < 1 || k < 1) throw Error("structure_regime: d and k must be positive");
    if (30L * k <= 8L * d) return Regime::high;
    if (30L * k <= 22L * d) return Regime::moderate;
    return Regime::low;
}

void save(const SyntheticData& data, const SyntheticSpec& spec, const std::filesystem::path& csv,
          const std::filesystem::path& truth_json) {
    std::vector<std::string> header;
    for (Eigen::Index f = 0; f < data.X.cols(); ++f) header.push_back("x" + std::to_string(f));
    header.push_back("y");
    Matrix full(data.X.rows(), data.X.cols() + 1);
    full << data.X, data.y;
    io::write_atomic(csv, io::matrix_to_csv(full, header));

    nlohmann::json j;
    j["d"] = spec.d;
    j["k"] = spec.k;
    j["n"] = spec.n;
    j["seed"] = spec.seed;
    j["noise_std"] = spec.noise_std;
    j["groups"] = data.groups;
    j["target_group"] = data.target_group;
    j["target_weight"] = data.target_weight;
    j["target_bias"] = data.target_bias;
    j["feature_weights"] = std::vector<double>(data.feature_weights.data(), data.feature_weights.data() + data.feature_weights.size());
    j["regime"] = to_string(structure_regime(spec.d, spec.k));
    io::write_atomic(truth_json, j.dump(2) + "\n");
}

}  // namespace tabspec::synthetic
