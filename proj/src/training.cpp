#include "af/training.hpp"

#include <fstream>
#include <stdexcept>

#include "af/checkpoint.hpp"

namespace af::train {

namespace {

void accumulate(std::map<std::string, Tensor>& into,
                const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, g] : grads) {
        auto it = into.find(name);
        if (it == into.end()) {
            into.emplace(name, g);
        } else {
            for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
        }
    }
}

void scale_grads(std::map<std::string, Tensor>& grads, float s) {
    for (auto& [name, g] : grads)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
}

/// Frame H x W x C viewed as (H*W) x C for decoder targets.
Tensor flatten_frame(const Tensor& frame) {
    const int hw = frame.extent(0) * frame.extent(1);
    Tensor out({hw, frame.extent(2)});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = frame[i];
    return out;
}

void check_dataset(const std::vector<env::FieldTrajectory>& data) {
    if (data.empty()) throw std::invalid_argument("training: empty dataset");
    for (const auto& t : data)
        if (t.steps() < 1) throw std::invalid_argument("training: empty trajectory");
}

}  // namespace

void TrainConfig::validate() const {
    if (kl_weight < 0 || diff_weight < 0)
        throw std::invalid_argument("TrainConfig: negative loss weight");
    if (sensors < 1) throw std::invalid_argument("TrainConfig: sensors < 1");
    if (epochs < 1 || batch < 1)
        throw std::invalid_argument("TrainConfig: epochs and batch must be >= 1");
    if (history < 1) throw std::invalid_argument("TrainConfig: history < 1");
}

std::vector<double> train_stage1(const std::vector<env::FieldTrajectory>& data,
                                 ParamStore& store,
                                 const wm::WorldModelConfig& cfg,
                                 const TrainConfig& tc) {
    tc.validate();
    check_dataset(data);
    RngStream pick(tc.seed, "stage1-pick");
    RngStream layout_rng(tc.seed, "stage1-layout");
    RngStream eps_rng(tc.seed, "stage1-eps");

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(tc.epochs));
    try {
        for (int epoch = 0; epoch < tc.epochs; ++epoch) {
            std::map<std::string, Tensor> grad_sum;
            double loss_sum = 0;
            for (int b = 0; b < tc.batch; ++b) {
                const auto& traj =
                    data[pick.index(static_cast<int>(data.size()))];
                const Tensor frame = traj.frame(pick.index(traj.steps()));
                const env::SensorLayout layout =
                    env::init_layout(tc.sensors, layout_rng);
                const env::ObservationSet obs = env::observe(frame, layout);

                TapeF tape;
                wm::Bind<float> bind(tape, store);
                wm::EncodeOut<float> enc = wm::encode_tokens(bind, cfg, obs);
                Ref z = wm::sample_latent(tape, enc, eps_rng);
                Ref pred = wm::decode(bind, cfg, z,
                                      env::grid_coords(traj.height(), traj.width()));
                Ref recon = tape.mse(pred, flatten_frame(frame));
                Ref loss = tape.add(
                    recon, tape.affine(wm::kl_divergence(tape, enc), tc.kl_weight));
                tape.backward(loss);
                loss_sum += tape.val(loss)[0];
                accumulate(grad_sum, tape.param_grads());
            }
            scale_grads(grad_sum, 1.f / static_cast<float>(tc.batch));
            const float lr = cosine_lr(tc.lr, tc.lr_floor, epoch, tc.epochs);
            store.adam_step(grad_sum, lr);
            history.push_back(loss_sum / tc.batch);
        }
    } catch (const std::runtime_error&) {
        if (!tc.abort_checkpoint.empty()) save_checkpoint(store, tc.abort_checkpoint);
        throw;
    }
    return history;
}

std::vector<double> train_stage2(const std::vector<env::FieldTrajectory>& data,
                                 ParamStore& store,
                                 const wm::WorldModelConfig& cfg,
                                 const TrainConfig& tc) {
    tc.validate();
    check_dataset(data);
    if (!store.has("enc.query") || !store.has("dec.m3.w"))
        throw std::invalid_argument(
            "train_stage2: encoder/decoder parameters missing; run stage 1 first");
    if (!store.has("gru.wr") || !store.has("dyn.out.w"))
        throw std::invalid_argument(
            "train_stage2: dynamics parameters missing from the store");
    for (const auto& t : data)
        if (t.steps() < tc.history + 1)
            throw std::invalid_argument(
                "train_stage2: trajectory shorter than history window");

    const auto sched = wm::NoiseSchedule::exponential(cfg.diffusion_steps,
                                                      cfg.alpha_bar_final);
    RngStream pick(tc.seed, "stage2-pick");
    RngStream layout_rng(tc.seed, "stage2-layout");
    RngStream noise_rng(tc.seed, "stage2-noise");

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(tc.epochs));
    try {
        for (int epoch = 0; epoch < tc.epochs; ++epoch) {
            std::map<std::string, Tensor> grad_sum;
            double loss_sum = 0;
            for (int b = 0; b < tc.batch; ++b) {
                const auto& traj =
                    data[pick.index(static_cast<int>(data.size()))];
                const int t0 = pick.index(traj.steps() - tc.history);

                // teacher forcing: clean posterior means per frame, no
                // gradient into the frozen encoder
                std::vector<Tensor> latents;
                for (int t = t0; t <= t0 + tc.history; ++t) {
                    const Tensor frame = traj.frame(t);
                    const env::SensorLayout layout =
                        env::init_layout(tc.sensors, layout_rng);
                    TapeF enc_tape;
                    wm::Bind<float> enc_bind(enc_tape, store);
                    wm::EncodeOut<float> enc = wm::encode_tokens(
                        enc_bind, cfg, env::observe(frame, layout));
                    latents.push_back(enc_tape.val(enc.mu));
                }

                TapeF tape;
                wm::Bind<float> bind(tape, store);
                Ref h = tape.constant(
                    Tensor({cfg.latent_tokens, cfg.gru_hidden}));
                std::vector<Ref> step_losses;
                for (int s = 0; s < tc.history; ++s) {
                    Ref z_t = tape.constant(latents[static_cast<std::size_t>(s)]);
                    h = wm::gru_step(bind, h, z_t);
                    const Tensor& z_next = latents[static_cast<std::size_t>(s) + 1];
                    const int k = 1 + noise_rng.index(sched.steps);
                    Tensor eps(z_next.shape());
                    for (std::size_t i = 0; i < eps.size(); ++i)
                        eps[i] = static_cast<float>(noise_rng.normal());
                    const Tensor zk = wm::diffusion_forward(z_next, k, eps, sched);
                    Ref seq = tape.concat_rows(z_t, tape.constant(zk));
                    Ref eps_hat = wm::denoise_predict(bind, cfg, seq, k, h);
                    Ref target_half = tape.slice_rows(eps_hat, cfg.latent_tokens,
                                                      2 * cfg.latent_tokens);
                    step_losses.push_back(tape.mse(target_half, eps));
                }
                Ref loss = step_losses[0];
                for (std::size_t s = 1; s < step_losses.size(); ++s)
                    loss = tape.add(loss, step_losses[s]);
                loss = tape.affine(loss, tc.diff_weight /
                                             static_cast<float>(tc.history));
                tape.backward(loss);
                loss_sum += tape.val(loss)[0];
                // stage-1 parameters stay frozen: keep only dynamics gradients
                auto grads = tape.param_grads();
                for (auto it = grads.begin(); it != grads.end();)
                    if (it->first.rfind("gru.", 0) != 0 &&
                        it->first.rfind("dyn.", 0) != 0)
                        it = grads.erase(it);
                    else
                        ++it;
                accumulate(grad_sum, grads);
            }
            scale_grads(grad_sum, 1.f / static_cast<float>(tc.batch));
            const float lr = cosine_lr(tc.lr, tc.lr_floor, epoch, tc.epochs);
            store.adam_step(grad_sum, lr);
            history.push_back(loss_sum / tc.batch);
        }
    } catch (const std::runtime_error&) {
        if (!tc.abort_checkpoint.empty()) save_checkpoint(store, tc.abort_checkpoint);
        throw;
    }
    return history;
}

EvalReport rollout_eval(const ParamStore& store, const wm::WorldModelConfig& cfg,
                        const env::FieldTrajectory& traj,
                        const env::SensorLayout& layout0, std::uint64_t seed,
                        bool identity_dynamics) {
    const auto sched = wm::NoiseSchedule::exponential(cfg.diffusion_steps,
                                                      cfg.alpha_bar_final);
    RngStream eps_rng(seed, "rollout-eps");
    RngStream dyn_rng(seed, "rollout-dyn");

    EvalReport report;
    report.budget = layout0.count();
    report.seed = seed;

    const Tensor frame0 = traj.frame(0);
    wm::LatentState state =
        wm::encode_obs(store, cfg, env::observe(frame0, layout0), eps_rng);
    Tensor z = state.z;
    Tensor h = state.h;

    for (int t = 0; t < traj.steps(); ++t) {
        if (t > 0) {
            h = wm::gru_advance(store, h, z);
            if (!identity_dynamics)
                z = wm::dynamics_sample(store, cfg, sched, z, h, dyn_rng);
        }
        const Tensor decoded =
            wm::decode_grid(store, cfg, z, traj.height(), traj.width());
        report.per_step_mse.push_back(-wm::reward(traj.frame(t), decoded));
    }

    const int steps = traj.steps();
    const int half = steps / 2;
    double in_sum = 0, out_sum = 0, all = 0;
    for (int t = 0; t < steps; ++t) {
        all += report.per_step_mse[static_cast<std::size_t>(t)];
        (t < half ? in_sum : out_sum) +=
            report.per_step_mse[static_cast<std::size_t>(t)];
    }
    report.in_t = half > 0 ? in_sum / half : 0.0;
    report.out_t = steps > half ? out_sum / (steps - half) : 0.0;
    report.avg = all / steps;
    return report;
}

void write_loss_csv(const std::string& path,
                    const std::vector<double>& history) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i)
        f << i << "," << history[i] << "\n";
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "t,mse,split\n";
    const int half = static_cast<int>(report.per_step_mse.size()) / 2;
    for (std::size_t t = 0; t < report.per_step_mse.size(); ++t)
        f << t << "," << report.per_step_mse[t] << ","
          << (static_cast<int>(t) < half ? "in" : "out") << "\n";
}

}  // namespace af::train
