#include "af/worldmodel.hpp"

namespace af::wm {

LatentState initial_state(const WorldModelConfig& cfg) {
    LatentState s;
    s.z = Tensor({cfg.latent_tokens, cfg.latent_dim});
    s.mu = Tensor({cfg.latent_tokens, cfg.latent_dim});
    s.logsig = Tensor({cfg.latent_tokens, cfg.latent_dim});
    s.h = Tensor({cfg.latent_tokens, cfg.gru_hidden});
    return s;
}

LatentState encode_obs(const ParamStore& store, const WorldModelConfig& cfg,
                       const env::ObservationSet& obs, RngStream& rng,
                       const Tensor* prev_h) {
    TapeF tape;
    Bind<float> bind(tape, store);
    EncodeOut<float> enc = encode_tokens(bind, cfg, obs);
    Ref z = sample_latent(tape, enc, rng);
    LatentState s;
    s.z = tape.val(z);
    s.mu = tape.val(enc.mu);
    s.logsig = tape.val(enc.logsig);
    s.h = prev_h ? *prev_h : Tensor({cfg.latent_tokens, cfg.gru_hidden});
    return s;
}

Tensor gru_advance(const ParamStore& store, const Tensor& h, const Tensor& z) {
    TapeF tape;
    Bind<float> bind(tape, store);
    return tape.val(gru_step(bind, tape.constant(h), tape.constant(z)));
}

Tensor diffusion_forward(const Tensor& z0, int k, const Tensor& noise,
                         const NoiseSchedule& sched) {
    if (!z0.same_shape(noise))
        throw std::invalid_argument("diffusion_forward: noise shape mismatch");
    const double bar = sched.bar(k);
    const float a = static_cast<float>(std::sqrt(bar));
    const float b = static_cast<float>(std::sqrt(1.0 - bar));
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a * z0[i] + b * noise[i];
    return out;
}

Tensor dynamics_sample(const ParamStore& store, const WorldModelConfig& cfg,
                       const NoiseSchedule& sched, const Tensor& z_t,
                       const Tensor& h_t, RngStream& rng, bool deterministic) {
    Tensor zk(z_t.shape());
    for (std::size_t i = 0; i < zk.size(); ++i)
        zk[i] = static_cast<float>(rng.normal());
    for (int k = sched.steps; k >= 1; --k) {
        TapeF tape;
        Bind<float> bind(tape, store);
        Ref x_seq = tape.concat_rows(tape.constant(z_t), tape.constant(zk));
        Ref eps = denoise_predict(bind, cfg, x_seq, k, tape.constant(h_t));
        const int m = z_t.rows();
        const Tensor& eps_v = tape.val(eps);
        const double a = sched.alpha[static_cast<std::size_t>(k) - 1];
        const float inv_sqrt_a = static_cast<float>(1.0 / std::sqrt(a));
        const float coef = static_cast<float>(std::sqrt(1.0 - a));
        const float sig = static_cast<float>(sched.sigma[static_cast<std::size_t>(k) - 1]);
        Tensor next(zk.shape());
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < z_t.cols(); ++c) {
                // eps rows [m, 2m) correspond to the target half
                float v = (zk.at(r, c) - coef * eps_v.at(m + r, c)) * inv_sqrt_a;
                if (!deterministic && sig > 0)
                    v += sig * static_cast<float>(rng.normal());
                next.at(r, c) = v;
            }
        zk = std::move(next);
    }
    return zk;
}

Tensor decode_at(const ParamStore& store, const WorldModelConfig& cfg,
                 const Tensor& z, const std::vector<double>& coords_xy) {
    TapeF tape;
    Bind<float> bind(tape, store);
    return tape.val(decode(bind, cfg, tape.constant(z), coords_xy));
}

Tensor decode_grid(const ParamStore& store, const WorldModelConfig& cfg,
                   const Tensor& z, int height, int width) {
    Tensor flat = decode_at(store, cfg, z, env::grid_coords(height, width));
    Tensor out({height, width, cfg.channels});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = flat[i];
    return out;
}

double reward(const Tensor& u_true, const Tensor& u_hat) {
    if (u_true.size() != u_hat.size())
        throw std::invalid_argument("reward: size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < u_true.size(); ++i) {
        const double d = static_cast<double>(u_true[i]) - u_hat[i];
        acc += d * d;
    }
    return -acc / static_cast<double>(u_true.size());
}

}  // namespace af::wm
