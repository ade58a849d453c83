/// @file training.hpp
/// @brief Two-stage offline world-model training and autoregressive rollout
/// evaluation.
///
/// Stage 1 fits the encoder and decoder on single frames with fresh random
/// sensor layouts every iteration. Stage 2 freezes them and fits the GRU +
/// denoiser on teacher-forced latent windows. Both mutate a shared ParamStore
/// in place so checkpointing stays trivial.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "af/env.hpp"
#include "af/optim.hpp"
#include "af/worldmodel.hpp"

namespace af::train {

struct TrainConfig {
    int stage = 1;
    int epochs = 300;        // stage-2 default 150, set by the caller
    int batch = 4;           // samples averaged per optimizer step
    float lr = 1e-3f;        // net lr; latent queries carry a 10x lr_scale
    float lr_floor = 1e-5f;  // cosine schedule floor
    float kl_weight = 1e-5f;
    float diff_weight = 1.f;
    int sensors = 64;        // fresh layout size drawn each iteration
    int history = 3;         // teacher-forced window length in stage 2
    std::uint64_t seed = 0;
    /// When non-empty, the last finite parameter state is written here before
    /// a divergence error propagates.
    std::string abort_checkpoint;

    void validate() const;
};

struct EvalReport {
    std::vector<double> per_step_mse;  // full-grid MSE at every timestep
    double in_t = 0;   // mean over the first half
    double out_t = 0;  // mean over the second half
    double avg = 0;
    int budget = 0;
    std::uint64_t seed = 0;
};

/// Fit encoder + decoder; returns the per-epoch loss history.
std::vector<double> train_stage1(const std::vector<env::FieldTrajectory>& data,
                                 ParamStore& store,
                                 const wm::WorldModelConfig& cfg,
                                 const TrainConfig& tc);

/// Fit GRU + denoiser with encoder/decoder frozen (byte-identical after).
/// Throws if the store lacks stage-1 parameters.
std::vector<double> train_stage2(const std::vector<env::FieldTrajectory>& data,
                                 ParamStore& store,
                                 const wm::WorldModelConfig& cfg,
                                 const TrainConfig& tc);

/// Encode o_0 once, then roll the latent dynamics autoregressively without
/// further observations, decoding every step on the full grid.
/// `identity_dynamics` holds the latent fixed instead of sampling; it exists
/// for perfect-oracle diagnostics on static fields.
EvalReport rollout_eval(const ParamStore& store, const wm::WorldModelConfig& cfg,
                        const env::FieldTrajectory& traj,
                        const env::SensorLayout& layout0, std::uint64_t seed,
                        bool identity_dynamics = false);

// ---- CSV export ------------------------------------------------------------

/// Columns: epoch, loss.
void write_loss_csv(const std::string& path, const std::vector<double>& history);

/// Columns: t, mse, split (in/out).
void write_eval_csv(const std::string& path, const EvalReport& report);

}  // namespace af::train
