#include "af/grpo.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <fstream>

#include "af/checkpoint.hpp"

namespace af::grpo {

namespace {

/// Indices of trajectories long enough for one episode plus lookahead.
std::vector<int> usable_trajectories(const std::vector<env::FieldTrajectory>& data,
                                     const GrpoConfig& cfg) {
    std::vector<int> out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].steps() >= cfg.episode_len + cfg.horizon)
            out.push_back(static_cast<int>(i));
        else
            std::fprintf(stderr,
                         "warning: trajectory %zu too short for episodes "
                         "(%d < %d), skipping\n",
                         i, data[i].steps(), cfg.episode_len + cfg.horizon);
    }
    return out;
}

void shuffle(std::vector<int>& idx, RngStream& rng) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)], idx[rng.index(i + 1)]);
}

}  // namespace

RolloutBuffer collect_rollouts(const ParamStore& world,
                               const wm::WorldModelConfig& wcfg,
                               const ParamStore& policy,
                               const pol::PolicyConfig& pcfg,
                               const std::vector<env::FieldTrajectory>& data,
                               const GrpoConfig& cfg, FilterState& filter,
                               int iteration, RngStream& rng) {
    cfg.validate();
    const std::vector<int> usable = usable_trajectories(data, cfg);
    if (usable.empty())
        throw std::invalid_argument(
            "collect_rollouts: no trajectory long enough for episode_len + horizon");
    const auto sched = wm::NoiseSchedule::exponential(wcfg.diffusion_steps,
                                                      wcfg.alpha_bar_final);

    RolloutBuffer buf;
    double reward_sum = 0;
    long reward_count = 0;
    int visited = 0, stored = 0;

    for (int e = 0; e < cfg.episodes; ++e) {
        const auto& traj =
            data[static_cast<std::size_t>(usable[rng.index(
                static_cast<int>(usable.size()))])];
        const int max_t0 = traj.steps() - cfg.episode_len - cfg.horizon;
        const int t0 = rng.index(max_t0 + 1);
        env::SensorLayout layout = env::init_layout(cfg.sensors, rng);
        Tensor h({wcfg.latent_tokens, wcfg.gru_hidden});

        for (int t = 0; t < cfg.episode_len; ++t) {
            const int ft = t0 + t;
            const Tensor frame = traj.frame(ft);
            env::ObservationSet obs = env::observe(frame, layout, ft);
            wm::LatentState st = wm::encode_obs(world, wcfg, obs, rng);
            h = wm::gru_advance(world, h, st.z);
            Tensor z_next = wm::dynamics_sample(world, wcfg, sched, st.z, h, rng);
            pol::PolicyEval ev = pol::policy_eval(policy, pcfg, z_next, obs);

            GroupRollout entry;
            entry.z_next = z_next;
            entry.obs = obs;
            entry.episode = e;
            entry.t = t;
            env::SensorLayout executed = layout;
            // common random numbers: every group member replays the same
            // encoder/diffusion noise, so within-group reward differences
            // come from the actions rather than the sampling
            const std::uint64_t look_seed = rng.next_u64();
            for (int g = 0; g < cfg.groups; ++g) {
                pol::Action act = pol::sample_action(ev, pcfg.a_max, rng);
                env::SensorLayout moved =
                    env::apply_displacement(layout, act.displacement);
                RngStream look_rng(look_seed, "lookahead");
                // one real observation at the moved layout, then imagination
                std::vector<double> rs;
                Tensor hr = h, zr;
                for (int hh = 1; hh <= cfg.horizon; ++hh) {
                    const Tensor fut = traj.frame(ft + hh);
                    if (hh == 1) {
                        zr = wm::encode_obs(world, wcfg,
                                            env::observe(fut, moved), look_rng)
                                 .z;
                    } else {
                        hr = wm::gru_advance(world, hr, zr);
                        zr = wm::dynamics_sample(world, wcfg, sched, zr, hr,
                                                 look_rng);
                    }
                    const Tensor dec = wm::decode_grid(world, wcfg, zr,
                                                       traj.height(),
                                                       traj.width());
                    rs.push_back(wm::reward(fut, dec));
                }
                const double r_look = lookahead_reward(rs, cfg.gamma);
                entry.pre_clip.push_back(act.pre_clip);
                entry.log_probs.push_back(act.log_prob);
                entry.rewards.push_back(r_look);
                if (g == 0) executed = moved;
                reward_sum += r_look;
                ++reward_count;
            }
            ++visited;
            const bool keep =
                !cfg.filtering || filter_keep(entry.rewards, filter, iteration);
            if (keep) {
                buf.entries.push_back(std::move(entry));
                ++stored;
            }
            layout = executed;
        }
    }
    buf.mean_reward = reward_count ? reward_sum / reward_count : 0.0;
    buf.kept_fraction = visited ? static_cast<double>(stored) / visited : 1.0;
    return buf;
}

namespace {

/// One minibatch update shared by the GRPO and PPO paths. `baseline` supplies
/// per-entry advantages before batch normalization; PPO adds a value loss.
double minibatch_update(ParamStore& policy, const pol::PolicyConfig& pcfg,
                        const RolloutBuffer& buffer,
                        const std::vector<int>& mb, const GrpoConfig& cfg,
                        const PpoConfig* ppo, float lr) {
    TapeF tape;
    wm::Bind<float> bind(tape, policy);

    std::vector<Ref> value_refs;  // PPO only, one per entry
    std::vector<double> flat_adv;
    for (int i : mb) {
        const GroupRollout& en = buffer.entries[static_cast<std::size_t>(i)];
        if (ppo) {
            Ref v = value_head(bind, pcfg, tape.constant(en.z_next), en.obs);
            value_refs.push_back(v);
            const double v_val = tape.val(v)[0];
            for (double r : en.rewards) flat_adv.push_back(r - v_val);
        } else {
            for (double a : group_advantage(en.rewards)) flat_adv.push_back(a);
        }
    }
    const std::vector<double> adv = batch_normalize(flat_adv, cfg.eps_norm);

    std::vector<Ref> terms;
    std::size_t k = 0;
    for (int i : mb) {
        const GroupRollout& en = buffer.entries[static_cast<std::size_t>(i)];
        pol::PolicyOut<float> out =
            pol::policy_forward(bind, pcfg, tape.constant(en.z_next), en.obs);
        for (std::size_t g = 0; g < en.pre_clip.size(); ++g) {
            Ref lp = pol::log_prob(tape, out.mu, out.logsig, en.pre_clip[g]);
            Ref ratio = tape.exp_(
                tape.affine(lp, 1.f, -static_cast<float>(en.log_probs[g])));
            const float a = static_cast<float>(adv[k++]);
            Ref plain = tape.affine(ratio, a);
            Ref clipped = tape.affine(
                tape.clamp(ratio, 1.f - static_cast<float>(cfg.clip),
                           1.f + static_cast<float>(cfg.clip)),
                a);
            // min() selected by value; gradient follows the active branch
            terms.push_back(tape.val(plain)[0] <= tape.val(clipped)[0] ? plain
                                                                       : clipped);
        }
    }
    Ref total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i)
        total = tape.add(total, terms[i]);
    Ref objective = tape.affine(total, 1.f / static_cast<float>(terms.size()));
    Ref loss = tape.neg(objective);

    if (ppo) {
        // value target: mean group reward of the entry
        Ref vloss_sum = tape.scalar(0.f);
        std::size_t vi = 0;
        for (int i : mb) {
            const GroupRollout& en = buffer.entries[static_cast<std::size_t>(i)];
            double target = 0;
            for (double r : en.rewards) target += r;
            target /= static_cast<double>(en.rewards.size());
            Ref d = tape.affine(value_refs[vi++], 1.f, -static_cast<float>(target));
            vloss_sum = tape.add(vloss_sum, tape.sum(tape.mul(d, d)));
        }
        Ref vloss = tape.affine(vloss_sum, ppo->value_weight /
                                               static_cast<float>(mb.size()));
        loss = tape.add(loss, vloss);
    }

    tape.backward(loss);
    policy.adam_step(tape.param_grads(), lr);
    return tape.val(objective)[0];
}

double run_epoch(ParamStore& policy, const pol::PolicyConfig& pcfg,
                 const RolloutBuffer& buffer, const GrpoConfig& cfg,
                 const PpoConfig* ppo, float lr, RngStream& rng) {
    if (buffer.entries.empty()) return 0.0;
    std::vector<int> idx(buffer.entries.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    shuffle(idx, rng);
    double last = 0;
    for (std::size_t start = 0; start < idx.size();
         start += static_cast<std::size_t>(cfg.minibatch)) {
        const std::size_t end =
            std::min(idx.size(), start + static_cast<std::size_t>(cfg.minibatch));
        const std::vector<int> mb(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end));
        last = minibatch_update(policy, pcfg, buffer, mb, cfg, ppo, lr);
    }
    return last;
}

}  // namespace

double grpo_epoch(ParamStore& policy, const pol::PolicyConfig& pcfg,
                  const RolloutBuffer& buffer, const GrpoConfig& cfg, float lr,
                  RngStream& rng) {
    return run_epoch(policy, pcfg, buffer, cfg, nullptr, lr, rng);
}

double ppo_epoch(ParamStore& policy, const pol::PolicyConfig& pcfg,
                 const RolloutBuffer& buffer, const GrpoConfig& cfg,
                 const PpoConfig& ppo, float lr, RngStream& rng) {
    return run_epoch(policy, pcfg, buffer, cfg, &ppo, lr, rng);
}

double value_estimate(const ParamStore& policy, const pol::PolicyConfig& pcfg,
                      const GroupRollout& entry) {
    TapeF tape;
    wm::Bind<float> bind(tape, policy);
    Ref v = value_head(bind, pcfg, tape.constant(entry.z_next), entry.obs);
    return tape.val(v)[0];
}

void init_value_head(ParamStore& store, const pol::PolicyConfig& cfg,
                     RngStream rng, const PpoConfig& ppo) {
    wm::detail::add_linear(store, "val.f1", cfg.width, cfg.width, rng,
                           ppo.value_lr_mult);
    wm::detail::add_linear(store, "val.f2", 1, cfg.width, rng,
                           ppo.value_lr_mult);
}

std::vector<TrainLog> train_policy(const ParamStore& world,
                                   const wm::WorldModelConfig& wcfg,
                                   ParamStore& policy,
                                   const pol::PolicyConfig& pcfg,
                                   const std::vector<env::FieldTrajectory>& data,
                                   const GrpoConfig& cfg, Algo algo,
                                   const PpoConfig& ppo,
                                   const std::vector<env::FieldTrajectory>*
                                       select_data) {
    cfg.validate();
    if (algo == Algo::ppo && !policy.has("val.f1.w"))
        throw std::invalid_argument(
            "train_policy: PPO requires the value head (init_value_head)");

    RngStream collect_rng(cfg.seed, "policy-collect");
    RngStream filter_rng(cfg.seed, "policy-filter");
    RngStream batch_rng(cfg.seed, "policy-batch");
    FilterState filter;
    const int iters = cfg.iterations();
    const long total_opt = static_cast<long>(iters) * cfg.epochs;
    long opt_step = 0;

    // deterministic closed-loop score on a few training trajectories; the
    // stochastic on-policy reward is a poor proxy for it
    const std::vector<env::FieldTrajectory>& sel =
        select_data ? *select_data : data;
    const auto select_score = [&]() {
        const int n = std::min<int>(cfg.select_trajs,
                                    static_cast<int>(sel.size()));
        double total = 0;
        for (int k = 0; k < n; ++k) {
            RngStream lrng(cfg.seed, "select-layout-" + std::to_string(k));
            const env::SensorLayout lay0 = env::init_layout(cfg.sensors, lrng);
            total += closed_loop_eval(world, wcfg, &policy, pcfg,
                                      sel[static_cast<std::size_t>(k)], lay0,
                                      Strategy::policy,
                                      cfg.seed + static_cast<std::uint64_t>(k))
                         .report.avg;
        }
        return total / n;
    };
    double best_score = std::numeric_limits<double>::infinity();
    ParamStore best;
    bool have_best = false;
    if (cfg.select_every > 0) {
        best_score = select_score();
        best = policy;
        have_best = true;
    }

    std::vector<TrainLog> logs;
    try {
        for (int it = 1; it <= iters; ++it) {
            // sampling densities stored in the buffer play the role of the
            // old policy; parameters drift only during the epochs below
            RolloutBuffer buf = collect_rollouts(world, wcfg, policy, pcfg,
                                                 data, cfg, filter, it,
                                                 collect_rng);
            if (cfg.filtering)
                filter_finish_iteration(filter, filter_rng,
                                        cfg.filter_reset_prob);
            double obj = 0;
            float lr = cfg.lr1;
            for (int ep = 0; ep < cfg.epochs; ++ep) {
                lr = linear_then_constant_lr(cfg.lr0, cfg.lr1, opt_step,
                                             total_opt);
                obj = algo == Algo::grpo
                          ? grpo_epoch(policy, pcfg, buf, cfg, lr, batch_rng)
                          : ppo_epoch(policy, pcfg, buf, cfg, ppo, lr,
                                      batch_rng);
                ++opt_step;
            }
            logs.push_back(TrainLog{it, buf.mean_reward, filter.tau,
                                    buf.kept_fraction, obj, lr});
            if (cfg.select_every > 0 &&
                (it % cfg.select_every == 0 || it == iters)) {
                const double score = select_score();
                if (score < best_score) {
                    best_score = score;
                    best = policy;
                    have_best = true;
                }
            }
        }
    } catch (const std::runtime_error&) {
        if (!cfg.abort_checkpoint.empty())
            save_checkpoint(policy, cfg.abort_checkpoint);
        throw;
    }
    if (have_best) policy = best;
    return logs;
}

ClosedLoopResult closed_loop_eval(const ParamStore& world,
                                  const wm::WorldModelConfig& wcfg,
                                  const ParamStore* policy,
                                  const pol::PolicyConfig& pcfg,
                                  const env::FieldTrajectory& traj,
                                  const env::SensorLayout& layout0,
                                  Strategy strategy, std::uint64_t seed) {
    if (strategy == Strategy::policy && !policy)
        throw std::invalid_argument("closed_loop_eval: policy store missing");
    const auto sched = wm::NoiseSchedule::exponential(wcfg.diffusion_steps,
                                                      wcfg.alpha_bar_final);
    RngStream rng(seed, "closed-loop");
    ClosedLoopResult res;
    env::SensorLayout layout = layout0;
    Tensor h({wcfg.latent_tokens, wcfg.gru_hidden});
    const int steps = traj.steps();
    res.report.per_step_mse.resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        res.layouts.push_back(layout);
        const Tensor frame = traj.frame(t);
        env::ObservationSet obs = env::observe(frame, layout, t);
        wm::LatentState st = wm::encode_obs(world, wcfg, obs, rng);
        const Tensor dec = wm::decode_grid(world, wcfg, st.z, traj.height(),
                                           traj.width());
        res.report.per_step_mse[static_cast<std::size_t>(t)] =
            -wm::reward(frame, dec);
        if (t + 1 == steps) break;
        switch (strategy) {
            case Strategy::fixed:
                break;
            case Strategy::random: {
                std::vector<double> a(
                    2 * static_cast<std::size_t>(layout.count()));
                for (double& v : a)
                    v = rng.uniform(-double(pcfg.a_max), double(pcfg.a_max));
                layout = env::apply_displacement(layout, a);
                break;
            }
            case Strategy::policy: {
                h = wm::gru_advance(world, h, st.z);
                const Tensor z_next =
                    wm::dynamics_sample(world, wcfg, sched, st.z, h, rng,
                                        /*deterministic=*/true);
                pol::PolicyEval ev = pol::policy_eval(*policy, pcfg, z_next, obs);
                // execute a sampled action, as during training; the mean
                // alone accumulates systematic drift over a long episode
                pol::Action act = pol::sample_action(ev, pcfg.a_max, rng);
                layout = env::apply_displacement(layout, act.displacement);
                break;
            }
        }
    }
    const int half = steps / 2;
    double in = 0, out = 0, total = 0;
    for (int t = 0; t < steps; ++t) {
        const double m = res.report.per_step_mse[static_cast<std::size_t>(t)];
        total += m;
        (t < half ? in : out) += m;
    }
    res.report.in_t = half ? in / half : 0.0;
    res.report.out_t = steps > half ? out / (steps - half) : 0.0;
    res.report.avg = total / steps;
    res.report.budget = layout0.count();
    res.report.seed = seed;
    return res;
}

void write_policy_log_csv(const std::string& path,
                          const std::vector<TrainLog>& logs) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "iteration,mean_reward,tau,kept_fraction,objective,lr\n";
    for (const auto& row : logs)
        f << row.iteration << "," << row.mean_reward << "," << row.tau << ","
          << row.kept_fraction << "," << row.objective << "," << row.lr << "\n";
}

}  // namespace af::grpo
