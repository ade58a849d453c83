/// @file policy.hpp
/// @brief Sensing policy: maps (predicted next latent, current observations)
/// to a diagonal Gaussian over per-sensor displacements.
///
/// Per sensor: embed [coords, value], cross-attend onto the latent tokens at
/// several scales, mix across the array with self-attention, and project to
/// (mu, log sigma). Sensors are processed in a canonical sorted order and
/// unsorted on output, which makes permutation equivariance exact at the bit
/// level.
#pragma once

#include <string>
#include <vector>

#include "af/env.hpp"
#include "af/worldmodel.hpp"

namespace af::pol {

struct PolicyConfig {
    wm::FourierConfig fourier{{2, 3}, 7, 2.0};
    int value_embed_dim = 16;
    int width = 64;
    int heads = 4;
    int blocks = 2;      // self-attention blocks over the sensor array
    int cross_dim = 16;  // per-scale cross-attention feature dim
    int latent_dim = 16; // must match the world model d_z
    int channels = 1;
    float logsig_min = -10.f;
    float logsig_max = 2.f;
    float a_max = 0.05f;
};

template <class T>
struct PolicyOut {
    Ref mu;      // N x 2
    Ref logsig;  // N x 2, clamped
};

template <class T>
void init_policy(ParamStoreT<T>& store, const PolicyConfig& cfg, RngStream rng) {
    using wm::detail::add_linear;
    const int pos = cfg.fourier.dim();
    add_linear(store, "pol.val", cfg.value_embed_dim, cfg.channels, rng);
    add_linear(store, "pol.in", cfg.width, pos + cfg.value_embed_dim, rng);
    for (int s : cfg.fourier.scales) {
        const std::string p = "pol.s" + std::to_string(s);
        add_linear(store, p + ".q", cfg.cross_dim, cfg.width, rng);
        add_linear(store, p + ".k", cfg.cross_dim, cfg.latent_dim, rng);
        add_linear(store, p + ".v", cfg.cross_dim, cfg.latent_dim, rng);
    }
    const int fdim = cfg.cross_dim * static_cast<int>(cfg.fourier.scales.size());
    add_linear(store, "pol.merge", cfg.width, fdim, rng);
    for (int i = 0; i < cfg.blocks; ++i) {
        const std::string p = "pol.b" + std::to_string(i);
        add_linear(store, p + ".q", cfg.width, cfg.width, rng);
        add_linear(store, p + ".k", cfg.width, cfg.width, rng);
        add_linear(store, p + ".v", cfg.width, cfg.width, rng);
        add_linear(store, p + ".o", cfg.width, cfg.width, rng);
        add_linear(store, p + ".f1", 2 * cfg.width, cfg.width, rng);
        add_linear(store, p + ".f2", cfg.width, 2 * cfg.width, rng);
    }
    add_linear(store, "pol.mu", 2, cfg.width, rng);
    add_linear(store, "pol.sig", 2, cfg.width, rng);
    // start at the identity policy: zero mean displacement with moderate
    // exploration noise. A random mean head gives each sensor a persistent
    // drift direction that compounds over a long episode into layouts the
    // world model never saw.
    auto& mw = store.mutable_value("pol.mu.w");
    for (std::size_t i = 0; i < mw.size(); ++i) mw[i] = T(0);
    auto& sw = store.mutable_value("pol.sig.w");
    for (std::size_t i = 0; i < sw.size(); ++i) sw[i] *= T(0.1);
    auto& sb = store.mutable_value("pol.sig.b");
    for (std::size_t i = 0; i < sb.size(); ++i) sb[i] = T(-2.5);
}

/// Shared trunk: per-sensor features after cross-attention onto the latent
/// and array self-attention, rows in the caller's original sensor order.
/// z_next is the predicted next latent (M x d_z) as a tape ref.
template <class T>
Ref policy_features(wm::Bind<T>& b, const PolicyConfig& cfg, Ref z_next,
                    const env::ObservationSet& obs) {
    Tape<T>& tape = b.tape();
    const int n = obs.layout.count();
    if (n < 1) throw std::invalid_argument("policy: empty observation set");
    if (tape.val(z_next).cols() != cfg.latent_dim)
        throw std::invalid_argument("policy: latent width mismatch");
    if (obs.values.cols() != cfg.channels)
        throw std::invalid_argument("policy: channel mismatch");

    const std::vector<int> order = wm::canonical_order(obs);
    std::vector<double> xy(2 * static_cast<std::size_t>(n));
    TensorT<T> values({n, cfg.channels});
    for (int r = 0; r < n; ++r) {
        const int src = order[static_cast<std::size_t>(r)];
        xy[2 * static_cast<std::size_t>(r)] = obs.layout.x(src);
        xy[2 * static_cast<std::size_t>(r) + 1] = obs.layout.y(src);
        for (int c = 0; c < cfg.channels; ++c)
            values.at(r, c) = static_cast<T>(obs.values.at(src, c));
    }

    Ref pos = tape.constant(wm::fourier_embed<T>(xy, cfg.fourier));
    Ref val = wm::lin(b, tape.constant(values), "pol.val");
    Ref tokens = wm::lin(b, tape.concat_cols({pos, val}), "pol.in");

    std::vector<Ref> feats;
    for (int s : cfg.fourier.scales) {
        const std::string p = "pol.s" + std::to_string(s);
        Ref q = wm::lin(b, tokens, p + ".q");
        Ref k = wm::lin(b, z_next, p + ".k");
        Ref v = wm::lin(b, z_next, p + ".v");
        feats.push_back(tape.attention(q, k, v));
    }
    Ref mixed = tape.add(tokens, wm::lin(b, tape.concat_cols(feats), "pol.merge"));
    for (int i = 0; i < cfg.blocks; ++i)
        mixed = wm::selfattn_block(b, "pol.b" + std::to_string(i), mixed, cfg.heads);

    // unsort via a one-hot permutation matrix; a single nonzero per row keeps
    // the gather exact in floating point
    TensorT<T> perm({n, n});
    for (int r = 0; r < n; ++r)
        perm.at(order[static_cast<std::size_t>(r)], r) = T(1);
    return tape.matmul(tape.constant(perm), mixed);
}

template <class T>
PolicyOut<T> policy_forward(wm::Bind<T>& b, const PolicyConfig& cfg, Ref z_next,
                            const env::ObservationSet& obs) {
    Tape<T>& tape = b.tape();
    Ref feats = policy_features(b, cfg, z_next, obs);
    PolicyOut<T> out;
    out.mu = wm::lin(b, feats, "pol.mu");
    out.logsig = tape.clamp(wm::lin(b, feats, "pol.sig"),
                            static_cast<T>(cfg.logsig_min),
                            static_cast<T>(cfg.logsig_max));
    return out;
}

/// Diagonal-Gaussian log density of `action` (pre-clip), summed over sensors
/// and dims. Differentiable w.r.t. mu and logsig.
template <class T>
Ref log_prob(Tape<T>& tape, Ref mu, Ref logsig, const TensorT<T>& action) {
    if (!tape.val(mu).same_shape(action) || !tape.val(logsig).same_shape(action))
        throw std::invalid_argument("log_prob: shape mismatch");
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    Ref d = tape.sub(tape.constant(action), mu);
    Ref zn = tape.mul(d, tape.exp_(tape.neg(logsig)));
    Ref term = tape.add(tape.affine(tape.mul(zn, zn), T(0.5)),
                        tape.affine(logsig, T(1), static_cast<T>(kHalfLog2Pi)));
    return tape.neg(tape.sum(term));
}

// ---- float-only convenience layer ------------------------------------------

struct Action {
    std::vector<double> displacement;  // N x 2 row-major, clipped to +-a_max
    Tensor pre_clip;                   // N x 2 raw Gaussian sample
    double log_prob = 0;               // density of the pre-clip sample
};

struct PolicyEval {
    Tensor mu;
    Tensor logsig;
};

PolicyEval policy_eval(const ParamStore& store, const PolicyConfig& cfg,
                       const Tensor& z_next, const env::ObservationSet& obs);

Action sample_action(const PolicyEval& eval, float a_max, RngStream& rng);

/// Scalar oracle-style density evaluation (no tape).
double log_prob_value(const Tensor& pre_clip, const Tensor& mu,
                      const Tensor& logsig);

}  // namespace af::pol
