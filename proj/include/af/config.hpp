/// @file config.hpp
/// @brief Flat key=value run configuration shared by every CLI command.
///
/// One file drives data generation, both world-model training stages, policy
/// training, and evaluation. Keys are namespaced (env.*, world.*, train.*,
/// policy.*, grpo.*, eval.*); unknown keys are rejected so typos fail loudly,
/// and every command writes the fully resolved config next to its outputs.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "af/grpo.hpp"
#include "af/policy.hpp"
#include "af/training.hpp"
#include "af/worldmodel.hpp"

namespace af::cfg {

struct RunConfig {
    std::uint64_t seed = 0;

    // data generation
    std::string dataset = "ns";  // "ns" (vorticity solver) or "hotspot"
    int height = 32;
    int width = 32;
    double dt = 0.02;
    double viscosity = 1e-2;
    double forcing = 0.1;  // amplitude of the standard forcing; 0 disables
    int train_trajectories = 64;
    int test_trajectories = 8;
    int steps = 20;
    double hotspot_sigma = 0.25;
    double hotspot_speed = 0.08;

    wm::WorldModelConfig world;

    // two-stage world-model training (shared knobs + per-stage epochs)
    int stage1_epochs = 300;
    int stage2_epochs = 150;
    train::TrainConfig train;  // stage/epochs filled in per command

    pol::PolicyConfig policy;  // latent_dim/channels follow `world`
    grpo::GrpoConfig grpo;

    std::vector<int> eval_budgets = {64, 32, 16};

    /// Re-derive the coupled fields and validate everything.
    void finalize();
};

/// Apply one `key=value` assignment. Throws std::invalid_argument on an
/// unknown key or an unparsable value.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parse a config file: one assignment per line, '#' comments, blank lines ok.
RunConfig parse_config_file(const std::string& path);

/// Every key with its current value, one per line, sorted by key.
std::string serialize(const RunConfig& cfg);

/// Write serialize() to `path`.
void write_resolved(const RunConfig& cfg, const std::string& path);

}  // namespace af::cfg
