#pragma once

#include "tabspec/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace tabspec::synthetic {

/// Group-latent regression generator: each feature loads on its group's
/// latent variable, and the target is affine in one chosen group's latent.
struct SyntheticSpec {
    int d = 30;
    int k = 4;
    int n = 2000;
    double noise_std = 0.1;
    double latent_lo = -2.0, latent_hi = 2.0;
    double weight_lo = -1.0, weight_hi = 1.0;
    int target_group = 0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SyntheticData {
    Matrix X;          // n x d
    Vector y;          // n
    Matrix latents;    // n x k
    Groups groups;     // balanced contiguous partition of 0..d-1
    Vector feature_weights;
    double target_weight = 0.0;
    double target_bias = 0.0;
    int target_group = 0;
};

SyntheticData generate(const SyntheticSpec& spec);

// Contiguous partition with sizes differing by at most one, larger groups first.
Groups balanced_partition(int d, int k);

enum class Regime { high, moderate, low };
std::string to_string(Regime r);
Regime structure_regime(int d, int k);

// Data CSV (x0..x{d-1}, y) plus a JSON sidecar with groups and generator weights.
void save(const SyntheticData& data, const SyntheticSpec& spec, const std::filesystem::path& csv,
          const std::filesystem::path& truth_json);

}  // namespace tabspec::synthetic
