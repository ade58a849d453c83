/// @file worldmodel.hpp
/// @brief Latent world model: sparse-set encoder with a variational
/// bottleneck, GRU + conditional-diffusion latent dynamics, and a
/// coordinate-based decoder that also defines the reward.
///
/// Forward blocks are templated on the scalar type so the test suite can run
/// them in double precision against finite-difference oracles; production
/// code uses float.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "af/autodiff.hpp"
#include "af/env.hpp"
#include "af/optim.hpp"
#include "af/rng.hpp"

namespace af::wm {

// ---- Fourier features ------------------------------------------------------

struct FourierConfig {
    std::vector<int> scales = {2, 3};
    int freqs_per_scale = 12;  // N_f
    double base = 2.0;

    /// Per-axis convention: dim = d + |scales| * 2 * N_f * d.
    int dim(int spatial = 2) const {
        return spatial + static_cast<int>(scales.size()) * 2 * freqs_per_scale * spatial;
    }

    /// N_f log-uniformly spaced frequencies in [pi * b^0, pi * b^scale].
    std::vector<double> frequencies(int scale) const {
        std::vector<double> out(freqs_per_scale);
        for (int i = 0; i < freqs_per_scale; ++i) {
            const double t = freqs_per_scale > 1
                                 ? static_cast<double>(i) / (freqs_per_scale - 1)
                                 : 0.0;
            out[i] = std::numbers::pi * std::pow(base, scale * t);
        }
        return out;
    }
};

/// Embed P points (xy pairs) as [x, y, {sin/cos per scale and axis}].
template <class T>
TensorT<T> fourier_embed(const std::vector<double>& xy, const FourierConfig& cfg) {
    const int p = static_cast<int>(xy.size()) / 2;
    const int dim = cfg.dim();
    TensorT<T> out({p, dim});
    for (int r = 0; r < p; ++r) {
        const double x = xy[2 * static_cast<std::size_t>(r)];
        const double y = xy[2 * static_cast<std::size_t>(r) + 1];
        if (std::abs(x) > 1.0 || std::abs(y) > 1.0)
            throw std::invalid_argument("fourier_embed: point outside domain");
        int c = 0;
        out.at(r, c++) = static_cast<T>(x);
        out.at(r, c++) = static_cast<T>(y);
        for (int s : cfg.scales)
            for (double w : cfg.frequencies(s)) {
                out.at(r, c++) = static_cast<T>(std::sin(x * w));
                out.at(r, c++) = static_cast<T>(std::cos(x * w));
                out.at(r, c++) = static_cast<T>(std::sin(y * w));
                out.at(r, c++) = static_cast<T>(std::cos(y * w));
            }
    }
    return out;
}

// ---- configuration ---------------------------------------------------------

struct WorldModelConfig {
    int latent_tokens = 32;   // M
    int query_dim = 128;      // d_q
    int latent_dim = 16;      // d_z
    int heads = 4;
    int value_embed_dim = 32;
    int channels = 1;
    FourierConfig fourier;    // encoder + decoder coordinate embedding

    int gru_hidden = 64;      // d_h

    int denoiser_dim = 64;    // d_f
    int denoiser_blocks = 2;
    int denoiser_heads = 4;
    int step_embed_dim = 16;  // d_k
    int modulation_hidden = 128;
    int diffusion_steps = 3;  // K
    double alpha_bar_final = 0.02;

    int decoder_width = 128;
    int decoder_blocks = 2;
    int decoder_cross_dim = 16;  // per-scale cross-attention feature dim

    float logsig_min = -10.f;
    float logsig_max = 2.f;
};

// ---- noise schedule --------------------------------------------------------

struct NoiseSchedule {
    int steps = 0;                    // K
    std::vector<double> alpha;        // alpha_k, index k-1
    std::vector<double> alpha_bar;    // cumulative, index k-1; bar(0) == 1
    std::vector<double> sigma;        // reverse-step noise, index k-1

    static NoiseSchedule exponential(int k_steps, double alpha_bar_final) {
        if (k_steps < 1) throw std::invalid_argument("schedule: K < 1");
        if (alpha_bar_final <= 0 || alpha_bar_final >= 1)
            throw std::invalid_argument("schedule: alpha_bar_final out of (0,1)");
        NoiseSchedule s;
        s.steps = k_steps;
        const double c = -std::log(alpha_bar_final);
        double prev_bar = 1.0;
        for (int k = 1; k <= k_steps; ++k) {
            const double bar = std::exp(-c * k / k_steps);
            const double a = bar / prev_bar;
            const double var =
                k == 1 ? 0.0 : (1.0 - prev_bar) / (1.0 - bar) * (1.0 - a);
            s.alpha.push_back(a);
            s.alpha_bar.push_back(bar);
            s.sigma.push_back(std::sqrt(std::max(0.0, var)));
            prev_bar = bar;
        }
        return s;
    }

    double bar(int k) const {  // k in [0, K]
        if (k < 0 || k > steps) throw std::out_of_range("schedule: k out of range");
        return k == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(k) - 1];
    }
};

// ---- parameter binding -----------------------------------------------------

/// Resolves store parameters onto a tape once per name.
template <class T>
class Bind {
  public:
    Bind(Tape<T>& tape, const ParamStoreT<T>& store) : tape_(tape), store_(store) {}

    Ref operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        Ref r = tape_.param(name, store_.get(name));
        cache_.emplace(name, r);
        return r;
    }

    Tape<T>& tape() { return tape_; }

  private:
    Tape<T>& tape_;
    const ParamStoreT<T>& store_;
    std::map<std::string, Ref> cache_;
};

template <class T>
Ref lin(Bind<T>& b, Ref x, const std::string& prefix) {
    return b.tape().linear(x, b(prefix + ".w"), b(prefix + ".b"));
}

/// Multi-head attention over already-projected q/k/v (all width divisible by
/// heads); concatenates per-head outputs.
template <class T>
Ref multihead(Tape<T>& tape, Ref q, Ref k, Ref v, int heads) {
    const int d = tape.val(q).cols();
    const int hd = d / heads;
    std::vector<Ref> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Ref qh = tape.slice_cols(q, h * hd, (h + 1) * hd);
        Ref kh = tape.slice_cols(k, h * hd, (h + 1) * hd);
        Ref vh = tape.slice_cols(v, h * hd, (h + 1) * hd);
        outs.push_back(tape.attention(qh, kh, vh));
    }
    return heads == 1 ? outs[0] : tape.concat_cols(outs);
}

// ---- parameter initialization ---------------------------------------------

namespace detail {

template <class T>
void add_linear(ParamStoreT<T>& store, const std::string& prefix, int out,
                int in, RngStream& rng, float lr_scale = 1.f) {
    store.add_dense(prefix + ".w", out, in, rng, lr_scale);
    store.add_zeros(prefix + ".b", {1, out}, lr_scale);
}

template <class T>
void add_linear_zero(ParamStoreT<T>& store, const std::string& prefix, int out,
                     int in) {
    store.add_zeros(prefix + ".w", {out, in});
    store.add_zeros(prefix + ".b", {1, out});
}

}  // namespace detail

/// Encoder + decoder parameters (stage-1 trainables).
template <class T>
void init_encoder_decoder(ParamStoreT<T>& store, const WorldModelConfig& cfg,
                          RngStream rng) {
    using detail::add_linear;
    const int dq = cfg.query_dim, dz = cfg.latent_dim;
    const int pos = cfg.fourier.dim();
    // latent queries train with a 10x learning rate
    store.add_normal("enc.query", {cfg.latent_tokens, dq}, 0.02, rng, 10.f);
    add_linear(store, "enc.val", cfg.value_embed_dim, cfg.channels, rng);
    for (const char* stage : {"enc.geo", "enc.obs"}) {
        const std::string p(stage);
        const int kv_in = p == "enc.geo" ? pos : pos + cfg.value_embed_dim;
        add_linear(store, p + ".q", dq, dq, rng);
        add_linear(store, p + ".k", dq, kv_in, rng);
        add_linear(store, p + ".v", dq, kv_in, rng);
        add_linear(store, p + ".o", dq, dq, rng);
        add_linear(store, p + ".f1", 2 * dq, dq, rng);
        add_linear(store, p + ".f2", dq, 2 * dq, rng);
    }
    add_linear(store, "enc.mu", dz, dq, rng);
    add_linear(store, "enc.sig", dz, dq, rng);

    const int w = cfg.decoder_width;
    add_linear(store, "dec.in", w, dz, rng);
    for (int i = 0; i < cfg.decoder_blocks; ++i) {
        const std::string p = "dec.b" + std::to_string(i);
        add_linear(store, p + ".q", w, w, rng);
        add_linear(store, p + ".k", w, w, rng);
        add_linear(store, p + ".v", w, w, rng);
        add_linear(store, p + ".o", w, w, rng);
        add_linear(store, p + ".f1", 2 * w, w, rng);
        add_linear(store, p + ".f2", w, 2 * w, rng);
    }
    const int dc = cfg.decoder_cross_dim;
    for (int s : cfg.fourier.scales) {
        const std::string p = "dec.s" + std::to_string(s);
        add_linear(store, p + ".q", dc, pos, rng);
        add_linear(store, p + ".k", dc, w, rng);
        add_linear(store, p + ".v", dc, w, rng);
    }
    const int fdim = dc * static_cast<int>(cfg.fourier.scales.size());
    add_linear(store, "dec.m1", w, fdim, rng);
    add_linear(store, "dec.m2", w, w, rng);
    add_linear(store, "dec.m3", cfg.channels, w, rng);
}

/// GRU + denoiser parameters (stage-2 trainables).
template <class T>
void init_dynamics(ParamStoreT<T>& store, const WorldModelConfig& cfg,
                   RngStream rng) {
    using detail::add_linear;
    const int dz = cfg.latent_dim, dh = cfg.gru_hidden;
    for (const char* gate : {"r", "u", "n"}) {
        const std::string g(gate);
        store.add_dense("gru.w" + g, dh, dz, rng);
        store.add_dense("gru.u" + g, dh, dh, rng);
        store.add_zeros("gru.b" + g, {1, dh});
    }
    const int df = cfg.denoiser_dim;
    add_linear(store, "dyn.in", df, dz, rng);
    store.add_normal("dyn.step_embed", {cfg.diffusion_steps, cfg.step_embed_dim},
                     0.02, rng);
    const int cond = cfg.step_embed_dim + dh;
    for (int i = 0; i < cfg.denoiser_blocks; ++i) {
        const std::string p = "dyn.b" + std::to_string(i);
        add_linear(store, p + ".mod1", cfg.modulation_hidden, cond, rng);
        // zero-init so every block starts as the identity residual
        detail::add_linear_zero(store, p + ".mod2", 6 * df, cfg.modulation_hidden);
        add_linear(store, p + ".q", df, df, rng);
        add_linear(store, p + ".k", df, df, rng);
        add_linear(store, p + ".v", df, df, rng);
        add_linear(store, p + ".o", df, df, rng);
        add_linear(store, p + ".f1", 2 * df, df, rng);
        add_linear(store, p + ".f2", df, 2 * df, rng);
    }
    add_linear(store, "dyn.out", dz, df, rng);
}

// ---- forward blocks --------------------------------------------------------

template <class T>
struct EncodeOut {
    Ref mu;      // M x d_z
    Ref logsig;  // M x d_z, clamped
};

/// Canonical observation order: lexicographic by (x, y, values). Sorting makes
/// permutation invariance exact at the bit level, not just mathematically.
inline std::vector<int> canonical_order(const env::ObservationSet& obs) {
    const int n = obs.layout.count();
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const int c = obs.values.cols();
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (obs.layout.x(a) != obs.layout.x(b)) return obs.layout.x(a) < obs.layout.x(b);
        if (obs.layout.y(a) != obs.layout.y(b)) return obs.layout.y(a) < obs.layout.y(b);
        for (int j = 0; j < c; ++j)
            if (obs.values.at(a, j) != obs.values.at(b, j))
                return obs.values.at(a, j) < obs.values.at(b, j);
        return false;
    });
    return idx;
}

/// One cross-attention + FFN round of the encoder: z = q_res + FFN(MHA(...)).
template <class T>
Ref encoder_round(Bind<T>& b, const std::string& p, Ref queries, Ref kv_input,
                  int heads) {
    Tape<T>& tape = b.tape();
    Ref q = lin(b, queries, p + ".q");
    Ref k = lin(b, kv_input, p + ".k");
    Ref v = lin(b, kv_input, p + ".v");
    Ref attn = lin(b, multihead(tape, q, k, v, heads), p + ".o");
    Ref f = lin(b, tape.silu(lin(b, attn, p + ".f1")), p + ".f2");
    return tape.add(queries, f);
}

template <class T>
EncodeOut<T> encode_tokens(Bind<T>& b, const WorldModelConfig& cfg,
                           const env::ObservationSet& obs) {
    Tape<T>& tape = b.tape();
    const int n = obs.layout.count();
    if (n < 1) throw std::invalid_argument("encode: empty observation set");
    const std::vector<int> order = canonical_order(obs);

    std::vector<double> xy(2 * static_cast<std::size_t>(n));
    TensorT<T> values({n, cfg.channels});
    for (int r = 0; r < n; ++r) {
        const int src = order[static_cast<std::size_t>(r)];
        xy[2 * static_cast<std::size_t>(r)] = obs.layout.x(src);
        xy[2 * static_cast<std::size_t>(r) + 1] = obs.layout.y(src);
        for (int c = 0; c < cfg.channels; ++c)
            values.at(r, c) = static_cast<T>(obs.values.at(src, c));
    }
    Ref pos = tape.constant(fourier_embed<T>(xy, cfg.fourier));
    Ref val = lin(b, tape.constant(values), "enc.val");

    Ref queries = b("enc.query");
    Ref geo = encoder_round(b, "enc.geo", queries, pos, cfg.heads);
    Ref obs_kv = tape.concat_cols({pos, val});
    Ref tokens = encoder_round(b, "enc.obs", geo, obs_kv, cfg.heads);

    EncodeOut<T> out;
    out.mu = lin(b, tokens, "enc.mu");
    out.logsig = tape.clamp(lin(b, tokens, "enc.sig"),
                            static_cast<T>(cfg.logsig_min),
                            static_cast<T>(cfg.logsig_max));
    return out;
}

/// Reparameterized sample z = mu + exp(logsig) * eps.
template <class T>
Ref sample_latent(Tape<T>& tape, const EncodeOut<T>& enc, RngStream& rng) {
    TensorT<T> eps(tape.val(enc.mu).shape());
    for (std::size_t i = 0; i < eps.size(); ++i)
        eps[i] = static_cast<T>(rng.normal());
    return tape.add(enc.mu, tape.mul(tape.exp_(enc.logsig), tape.constant(eps)));
}

/// Closed-form KL(N(mu, sig^2) || N(0, I)), summed over tokens and dims.
template <class T>
Ref kl_divergence(Tape<T>& tape, const EncodeOut<T>& enc) {
    Ref mu2 = tape.mul(enc.mu, enc.mu);
    Ref var = tape.exp_(tape.affine(enc.logsig, T(2)));
    Ref inner = tape.sub(tape.add(mu2, var),
                         tape.affine(enc.logsig, T(2), T(1)));
    return tape.affine(tape.sum(inner), T(0.5));
}

/// Standard GRU cell applied per latent token with shared weights.
template <class T>
Ref gru_step(Bind<T>& b, Ref h, Ref z) {
    Tape<T>& tape = b.tape();
    if (tape.val(h).rows() != tape.val(z).rows())
        throw std::invalid_argument("gru_step: token counts differ");
    auto gate = [&](const char* g, Ref hh) {
        const std::string s(g);
        Ref x_part = tape.matmul_nt(z, b("gru.w" + s));
        Ref h_part = tape.matmul_nt(hh, b("gru.u" + s));
        return tape.add_rowvec(tape.add(x_part, h_part), b("gru.b" + s));
    };
    Ref r = tape.sigmoid(gate("r", h));
    Ref u = tape.sigmoid(gate("u", h));
    Ref hn = tape.add_rowvec(tape.matmul_nt(h, b("gru.un")), b("gru.bn"));
    Ref n = tape.tanh_(tape.add(tape.matmul_nt(z, b("gru.wn")), tape.mul(r, hn)));
    // h' = (1 - u) * n + u * h
    Ref one_minus_u = tape.affine(u, T(-1), T(1));
    return tape.add(tape.mul(one_minus_u, n), tape.mul(u, h));
}

/// One transformer block with adaLN-Zero modulation. cond is per-token.
template <class T>
Ref denoiser_block(Bind<T>& b, const std::string& p, Ref x, Ref cond, int heads) {
    Tape<T>& tape = b.tape();
    const int df = tape.val(x).cols();
    Ref mods = lin(b, tape.silu(lin(b, cond, p + ".mod1")), p + ".mod2");
    auto slice = [&](int i) { return tape.slice_cols(mods, i * df, (i + 1) * df); };
    Ref g1 = slice(0), s1 = slice(1), b1 = slice(2);
    Ref g2 = slice(3), s2 = slice(4), b2 = slice(5);

    auto modulate = [&](Ref input, Ref scale, Ref shift) {
        Ref normed = tape.layernorm_rows(input);
        return tape.add(tape.mul(normed, tape.affine(scale, T(1), T(1))), shift);
    };
    Ref h1 = modulate(x, s1, b1);
    Ref attn = lin(b,
                   multihead(tape, lin(b, h1, p + ".q"), lin(b, h1, p + ".k"),
                             lin(b, h1, p + ".v"), heads),
                   p + ".o");
    x = tape.add(x, tape.mul(g1, attn));
    Ref h2 = modulate(x, s2, b2);
    Ref mlp = lin(b, tape.silu(lin(b, h2, p + ".f1")), p + ".f2");
    return tape.add(x, tape.mul(g2, mlp));
}

/// Noise prediction for the concatenated sequence [z_t; noised z_{t+1}].
/// Returns 2M x d_z; only the second half enters the diffusion loss.
template <class T>
Ref denoise_predict(Bind<T>& b, const WorldModelConfig& cfg, Ref x_seq, int k,
                    Ref h_tokens) {
    Tape<T>& tape = b.tape();
    const int m2 = tape.val(x_seq).rows();
    if (k < 1 || k > cfg.diffusion_steps)
        throw std::out_of_range("denoise: diffusion step out of range");
    Ref x = lin(b, x_seq, "dyn.in");
    Ref ek = tape.repeat_rows(
        tape.slice_rows(b("dyn.step_embed"), k - 1, k), m2);
    // context and target tokens share the per-token history conditioning
    Ref h2 = tape.concat_rows(h_tokens, h_tokens);
    Ref cond = tape.concat_cols({ek, h2});
    for (int i = 0; i < cfg.denoiser_blocks; ++i)
        x = denoiser_block(b, "dyn.b" + std::to_string(i), x, cond,
                           cfg.denoiser_heads);
    return lin(b, x, "dyn.out");
}

/// Pre-LN transformer block used by the decoder's token self-attention.
template <class T>
Ref selfattn_block(Bind<T>& b, const std::string& p, Ref x, int heads) {
    Tape<T>& tape = b.tape();
    Ref h = tape.layernorm_rows(x);
    Ref attn = lin(b,
                   multihead(tape, lin(b, h, p + ".q"), lin(b, h, p + ".k"),
                             lin(b, h, p + ".v"), heads),
                   p + ".o");
    x = tape.add(x, attn);
    Ref h2 = tape.layernorm_rows(x);
    Ref mlp = lin(b, tape.silu(lin(b, h2, p + ".f1")), p + ".f2");
    return tape.add(x, mlp);
}

/// Decode latent tokens at arbitrary query coordinates -> P x C.
template <class T>
Ref decode(Bind<T>& b, const WorldModelConfig& cfg, Ref z,
           const std::vector<double>& coords_xy) {
    Tape<T>& tape = b.tape();
    Ref tokens = lin(b, z, "dec.in");
    for (int i = 0; i < cfg.decoder_blocks; ++i)
        tokens = selfattn_block(b, "dec.b" + std::to_string(i), tokens, cfg.heads);

    Ref pos = tape.constant(fourier_embed<T>(coords_xy, cfg.fourier));
    std::vector<Ref> feats;
    for (int s : cfg.fourier.scales) {
        const std::string p = "dec.s" + std::to_string(s);
        Ref q = lin(b, pos, p + ".q");
        Ref k = lin(b, tokens, p + ".k");
        Ref v = lin(b, tokens, p + ".v");
        feats.push_back(tape.attention(q, k, v));
    }
    Ref f = tape.concat_cols(feats);
    Ref h = tape.silu(lin(b, f, "dec.m1"));
    h = tape.silu(lin(b, h, "dec.m2"));
    return lin(b, h, "dec.m3");
}

// ---- float-only convenience layer (no gradients) ---------------------------

/// Latent state carried across a trajectory.
struct LatentState {
    Tensor z;       // M x d_z
    Tensor mu;      // M x d_z
    Tensor logsig;  // M x d_z
    Tensor h;       // M x d_h, zeros at t = 0
};

LatentState initial_state(const WorldModelConfig& cfg);

/// Encode an observation set; deterministic given the rng state.
LatentState encode_obs(const ParamStore& store, const WorldModelConfig& cfg,
                       const env::ObservationSet& obs, RngStream& rng,
                       const Tensor* prev_h = nullptr);

Tensor gru_advance(const ParamStore& store, const Tensor& h, const Tensor& z);

/// Closed-form forward noising z^k = sqrt(bar a_k) z0 + sqrt(1 - bar a_k) eps.
Tensor diffusion_forward(const Tensor& z0, int k, const Tensor& noise,
                         const NoiseSchedule& sched);

/// Reverse DDPM loop from pure noise, conditioned on (z_t, h_t).
Tensor dynamics_sample(const ParamStore& store, const WorldModelConfig& cfg,
                       const NoiseSchedule& sched, const Tensor& z_t,
                       const Tensor& h_t, RngStream& rng,
                       bool deterministic = false);

/// Decode latent tokens on the full grid -> H x W x C frame tensor.
Tensor decode_grid(const ParamStore& store, const WorldModelConfig& cfg,
                   const Tensor& z, int height, int width);

Tensor decode_at(const ParamStore& store, const WorldModelConfig& cfg,
                 const Tensor& z, const std::vector<double>& coords_xy);

/// r = -MSE(u_true, u_hat) over the full grid; 0 iff perfect reconstruction.
double reward(const Tensor& u_true, const Tensor& u_hat);

}  // namespace af::wm
