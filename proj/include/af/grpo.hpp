/// @file grpo.hpp
/// @brief On-policy group-relative policy optimization for the sensing
/// policy, with lookahead rewards and dynamic group filtering; a PPO
/// baseline with a value head is included for comparison.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "af/env.hpp"
#include "af/policy.hpp"
#include "af/training.hpp"
#include "af/worldmodel.hpp"

namespace af::grpo {

struct GrpoConfig {
    int groups = 4;        // G actions sampled per timestep
    int horizon = 3;       // H lookahead steps
    double gamma = 0.99;
    double clip = 0.2;
    double eps_norm = 1e-8;
    int epochs = 4;        // optimization epochs per iteration
    int episodes = 4;      // E episodes collected per iteration
    int episode_len = 16;  // T timesteps per episode
    long total_steps = 50000;  // environment steps overall
    double filter_reset_prob = 0.1;
    bool filtering = true;
    int sensors = 16;      // sensing budget N
    int minibatch = 8;     // buffer entries per optimizer step
    float lr0 = 1e-4f;     // linear-then-constant schedule endpoints
    float lr1 = 1e-5f;
    std::uint64_t seed = 0;
    std::string abort_checkpoint;
    // Checkpoint selection: every `select_every` iterations score the
    // deterministic policy closed-loop on `select_trajs` held-out (or
    // training) trajectories and return the best-scoring parameters
    // instead of the last. 0 disables selection.
    int select_every = 0;
    int select_trajs = 2;

    void validate() const {
        if (groups < 2) throw std::invalid_argument("grpo: G < 2");
        if (horizon < 1) throw std::invalid_argument("grpo: H < 1");
        if (gamma < 0 || gamma >= 1) throw std::invalid_argument("grpo: gamma out of [0,1)");
        if (clip <= 0 || clip >= 1) throw std::invalid_argument("grpo: clip out of (0,1)");
        if (episodes < 1 || episode_len < 1 || epochs < 1 || minibatch < 1)
            throw std::invalid_argument("grpo: loop sizes must be >= 1");
        if (sensors < 1) throw std::invalid_argument("grpo: sensors < 1");
    }

    int iterations() const {
        const long per_iter = static_cast<long>(episodes) * episode_len;
        return static_cast<int>(std::max(1L, total_steps / per_iter));
    }
};

// ---- pure reward/advantage arithmetic --------------------------------------

/// Eq-style weighted lookahead: sum gamma^{h-1} r_h / sum gamma^{h-1}.
/// Accepts a shorter tail near episode end; rejects an empty window.
inline double lookahead_reward(const std::vector<double>& rewards, double gamma) {
    if (rewards.empty()) throw std::invalid_argument("lookahead: empty window");
    double num = 0, den = 0, w = 1;
    for (double r : rewards) {
        num += w * r;
        den += w;
        w *= gamma;
    }
    return num / den;
}

/// (r - mean)/std with population std; all zeros for a degenerate group.
inline std::vector<double> group_advantage(const std::vector<double>& rewards) {
    const std::size_t g = rewards.size();
    if (g < 2) throw std::invalid_argument("group_advantage: G < 2");
    double mean = 0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / static_cast<double>(g));
    std::vector<double> out(g, 0.0);
    if (std_dev < 1e-8) return out;
    for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / std_dev;
    return out;
}

/// Secondary normalization across the mini-batch: (A - mu_B)/(sigma_B + eps).
inline std::vector<double> batch_normalize(const std::vector<double>& adv,
                                           double eps_norm) {
    if (adv.empty()) throw std::invalid_argument("batch_normalize: empty batch");
    double mean = 0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double std_dev = std::sqrt(var / static_cast<double>(adv.size()));
    std::vector<double> out(adv.size());
    for (std::size_t i = 0; i < adv.size(); ++i)
        out[i] = (adv[i] - mean) / (std_dev + eps_norm);
    return out;
}

/// Clipped surrogate, averaged over samples; s = exp(new - old).
inline double surrogate_value(const std::vector<double>& new_lp,
                              const std::vector<double>& old_lp,
                              const std::vector<double>& adv, double clip) {
    if (new_lp.size() != old_lp.size() || new_lp.size() != adv.size())
        throw std::invalid_argument("surrogate: size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < new_lp.size(); ++i) {
        const double s = std::exp(new_lp[i] - old_lp[i]);
        const double clipped = std::clamp(s, 1.0 - clip, 1.0 + clip);
        acc += std::min(s * adv[i], clipped * adv[i]);
    }
    return acc / static_cast<double>(new_lp.size());
}

// ---- dynamic group filtering -----------------------------------------------

struct FilterState {
    double tau = -std::numeric_limits<double>::infinity();
    std::vector<double> minima;  // per-timestep group minima this iteration
};

/// Appends the group minimum, then decides: skip iff every reward is below
/// tau and the iteration counter is past the first.
inline bool filter_keep(const std::vector<double>& rewards, FilterState& state,
                        int iteration) {
    if (rewards.empty()) throw std::invalid_argument("filter: empty group");
    double lo = rewards[0];
    bool all_below = true;
    for (double r : rewards) {
        lo = std::min(lo, r);
        all_below = all_below && r < state.tau;
    }
    state.minima.push_back(lo);
    return iteration <= 1 || !all_below;
}

/// tau <- mean of the collected minima, then reset to -inf with the given
/// probability; the minima list is cleared either way.
inline void filter_finish_iteration(FilterState& state, RngStream& rng,
                                    double reset_prob) {
    if (!state.minima.empty()) {
        double mean = 0;
        for (double m : state.minima) mean += m;
        state.tau = mean / static_cast<double>(state.minima.size());
    }
    if (rng.uniform() < reset_prob)
        state.tau = -std::numeric_limits<double>::infinity();
    state.minima.clear();
}

// ---- rollout collection and training ---------------------------------------

struct GroupRollout {
    Tensor z_next;                   // policy conditioning, M x d_z
    env::ObservationSet obs;         // o_t
    std::vector<Tensor> pre_clip;    // G raw action samples, N x 2
    std::vector<double> log_probs;   // G densities under the sampling policy
    std::vector<double> rewards;     // G lookahead rewards
    int episode = 0;
    int t = 0;
};

struct RolloutBuffer {
    std::vector<GroupRollout> entries;
    double mean_reward = 0;    // over all (kept and skipped) group samples
    double kept_fraction = 1;  // timesteps stored / timesteps visited
};

/// PPO value head: mean-pooled policy trunk features through a 2-layer MLP.
template <class T>
Ref value_head(wm::Bind<T>& b, const pol::PolicyConfig& cfg, Ref z_next,
               const env::ObservationSet& obs) {
    Tape<T>& tape = b.tape();
    Ref feats = pol::policy_features(b, cfg, z_next, obs);
    const int n = tape.val(feats).rows();
    TensorT<T> pool({1, n});
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = T(1) / n;
    Ref pooled = tape.matmul(tape.constant(pool), feats);
    Ref h = tape.silu(wm::lin(b, pooled, "val.f1"));
    return wm::lin(b, h, "val.f2");  // 1 x 1
}

RolloutBuffer collect_rollouts(const ParamStore& world,
                               const wm::WorldModelConfig& wcfg,
                               const ParamStore& policy,
                               const pol::PolicyConfig& pcfg,
                               const std::vector<env::FieldTrajectory>& data,
                               const GrpoConfig& cfg, FilterState& filter,
                               int iteration, RngStream& rng);

struct TrainLog {
    int iteration = 0;
    double mean_reward = 0;
    double tau = 0;
    double kept_fraction = 0;
    double objective = 0;
    float lr = 0;
};

enum class Algo { grpo, ppo };

struct PpoConfig {
    float value_weight = 5.f;   // v_f
    float value_lr_mult = 10.f; // value head lr relative to policy
};

/// Extra parameters for the PPO value head (pooled trunk features -> scalar).
void init_value_head(ParamStore& store, const pol::PolicyConfig& cfg,
                     RngStream rng, const PpoConfig& ppo = {});

/// One epoch of shuffled minibatch updates over the buffer; returns the last
/// minibatch's surrogate objective.
double grpo_epoch(ParamStore& policy, const pol::PolicyConfig& pcfg,
                  const RolloutBuffer& buffer, const GrpoConfig& cfg, float lr,
                  RngStream& rng);

/// PPO variant: advantages are reward minus the value estimate, and the value
/// head regresses toward the mean group reward with weight v_f.
double ppo_epoch(ParamStore& policy, const pol::PolicyConfig& pcfg,
                 const RolloutBuffer& buffer, const GrpoConfig& cfg,
                 const PpoConfig& ppo, float lr, RngStream& rng);

/// Forward-only value prediction for one buffer entry.
double value_estimate(const ParamStore& policy, const pol::PolicyConfig& pcfg,
                      const GroupRollout& entry);

/// Alternates rollout collection with clipped-surrogate updates; mutates the
/// policy store in place and returns one log row per iteration. When
/// checkpoint selection is enabled, `select_data` (falling back to `data`)
/// supplies the trajectories the deterministic score is computed on.
std::vector<TrainLog> train_policy(const ParamStore& world,
                                   const wm::WorldModelConfig& wcfg,
                                   ParamStore& policy,
                                   const pol::PolicyConfig& pcfg,
                                   const std::vector<env::FieldTrajectory>& data,
                                   const GrpoConfig& cfg,
                                   Algo algo = Algo::grpo,
                                   const PpoConfig& ppo = {},
                                   const std::vector<env::FieldTrajectory>*
                                       select_data = nullptr);

/// Columns: iteration, mean_reward, tau, kept_fraction, objective, lr.
void write_policy_log_csv(const std::string& path,
                          const std::vector<TrainLog>& logs);

// ---- closed-loop evaluation ------------------------------------------------

/// How the sensor array moves between observations during evaluation.
enum class Strategy { fixed, random, policy };

struct ClosedLoopResult {
    train::EvalReport report;
    std::vector<env::SensorLayout> layouts;  // one per timestep, pre-move
};

/// Observe, reconstruct, and (optionally) move the sensors at every timestep.
/// Per-step MSE is the full-grid reconstruction error of the current frame.
/// `policy`/`pcfg` are consulted only for Strategy::policy, where the mean
/// action (clipped to +-a_max) is applied deterministically.
ClosedLoopResult closed_loop_eval(const ParamStore& world,
                                  const wm::WorldModelConfig& wcfg,
                                  const ParamStore* policy,
                                  const pol::PolicyConfig& pcfg,
                                  const env::FieldTrajectory& traj,
                                  const env::SensorLayout& layout0,
                                  Strategy strategy, std::uint64_t seed);

}  // namespace af::grpo
