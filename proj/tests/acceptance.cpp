// Acceptance gate: nine pass/fail checks covering gradients, the solver,
// set symmetry, policy-optimization arithmetic, directional learning trends,
// and end-to-end determinism. Each criterion prints exactly one line; the
// process exits nonzero if any fail.
//
// Usage: acceptance [path-to-cli] [criterion numbers...]
// With no numbers, all nine run. The CLI path is needed only by criterion 8.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "af/checkpoint.hpp"
#include "af/grpo.hpp"
#include "af/training.hpp"
#include "gradcheck.hpp"

using namespace af;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// ---- shared small configurations -------------------------------------------

wm::WorldModelConfig grad_world_cfg() {
    // every width <= 8 so the finite-difference sweep stays fast
    wm::WorldModelConfig cfg;
    cfg.latent_tokens = 2;
    cfg.query_dim = 8;
    cfg.latent_dim = 4;
    cfg.heads = 2;
    cfg.value_embed_dim = 4;
    cfg.fourier.scales = {1};
    cfg.fourier.freqs_per_scale = 2;
    cfg.gru_hidden = 4;
    cfg.denoiser_dim = 8;
    cfg.denoiser_blocks = 1;
    cfg.denoiser_heads = 2;
    cfg.step_embed_dim = 4;
    cfg.modulation_hidden = 8;
    cfg.decoder_width = 8;
    cfg.decoder_blocks = 1;
    cfg.decoder_cross_dim = 4;
    return cfg;
}

pol::PolicyConfig grad_policy_cfg() {
    pol::PolicyConfig cfg;
    cfg.fourier.scales = {1};
    cfg.fourier.freqs_per_scale = 2;
    cfg.value_embed_dim = 4;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.blocks = 1;
    cfg.cross_dim = 4;
    cfg.latent_dim = 4;
    return cfg;
}

// capable-but-quick world model used by the trend criteria
wm::WorldModelConfig desk_world_cfg() {
    wm::WorldModelConfig cfg;
    cfg.latent_tokens = 8;
    cfg.query_dim = 32;
    cfg.latent_dim = 16;
    cfg.heads = 4;
    cfg.value_embed_dim = 16;
    cfg.fourier.scales = {2, 3};
    cfg.fourier.freqs_per_scale = 6;
    cfg.gru_hidden = 16;
    cfg.denoiser_dim = 32;
    cfg.denoiser_blocks = 1;
    cfg.denoiser_heads = 2;
    cfg.step_embed_dim = 8;
    cfg.modulation_hidden = 32;
    cfg.decoder_width = 32;
    cfg.decoder_blocks = 1;
    cfg.decoder_cross_dim = 8;
    return cfg;
}

pol::PolicyConfig desk_policy_cfg() {
    pol::PolicyConfig cfg;
    cfg.fourier.scales = {2, 3};
    cfg.fourier.freqs_per_scale = 7;
    cfg.value_embed_dim = 8;
    cfg.width = 32;
    cfg.heads = 4;
    cfg.blocks = 1;
    cfg.cross_dim = 8;
    cfg.latent_dim = 16;
    return cfg;
}

env::ObservationSet random_obs(int n, RngStream& rng) {
    env::ObservationSet obs;
    obs.values = Tensor({n, 1});
    for (int i = 0; i < n; ++i) {
        obs.layout.xy.push_back(rng.uniform(-0.95, 0.95));
        obs.layout.xy.push_back(rng.uniform(-0.95, 0.95));
        obs.values[static_cast<std::size_t>(i)] = static_cast<float>(rng.normal());
    }
    return obs;
}

// ---- criterion 1: gradient suite -------------------------------------------

bool criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const wm::WorldModelConfig cfg = grad_world_cfg();
    double worst = 0;
    std::string worst_name;
    const auto track = [&](const char* block, test::GradCheckResult r) {
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = std::string(block) + "/" + r.worst_param;
        }
    };

    {  // encoder attention + variational bottleneck
        ParamStoreT<double> store;
        RngStream init(101, "init");
        wm::init_encoder_decoder(store, cfg, init);
        RngStream rng(102, "data");
        env::ObservationSet obs = random_obs(5, rng);
        auto objective = [&](const ParamStoreT<double>& s) {
            TapeD tape;
            wm::Bind<double> bind(tape, s);
            auto enc = wm::encode_tokens(bind, cfg, obs);
            Ref loss = tape.add(tape.sum(tape.mul(enc.mu, enc.mu)),
                                wm::kl_divergence(tape, enc));
            return tape.val(loss)[0];
        };
        TapeD tape;
        wm::Bind<double> bind(tape, store);
        auto enc = wm::encode_tokens(bind, cfg, obs);
        Ref loss = tape.add(tape.sum(tape.mul(enc.mu, enc.mu)),
                            wm::kl_divergence(tape, enc));
        tape.backward(loss);
        track("encoder", test::finite_difference_check(objective, store,
                                                       tape.param_grads(),
                                                       1e-4));
    }
    {  // GRU cell
        ParamStoreT<double> store;
        RngStream init(103, "init");
        wm::init_dynamics(store, cfg, init);
        RngStream rng(104, "data");
        TensorD z({cfg.latent_tokens, cfg.latent_dim});
        TensorD h({cfg.latent_tokens, cfg.gru_hidden});
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.3 * rng.normal();
        auto objective = [&](const ParamStoreT<double>& s) {
            TapeD tape;
            wm::Bind<double> bind(tape, s);
            Ref hn = wm::gru_step(bind, tape.constant(h), tape.constant(z));
            return tape.val(tape.sum(tape.mul(hn, hn)))[0];
        };
        TapeD tape;
        wm::Bind<double> bind(tape, store);
        Ref hn = wm::gru_step(bind, tape.constant(h), tape.constant(z));
        Ref loss = tape.sum(tape.mul(hn, hn));
        tape.backward(loss);
        track("gru", test::finite_difference_check(objective, store,
                                                   tape.param_grads(), 1e-4));
    }
    {  // denoiser with awakened modulation gates
        ParamStoreT<double> store;
        RngStream init(105, "init");
        wm::init_dynamics(store, cfg, init);
        RngStream gate(106, "gate");
        for (int i = 0; i < cfg.denoiser_blocks; ++i) {
            auto& w = store.mutable_value("dyn.b" + std::to_string(i) +
                                          ".mod2.w");
            for (std::size_t j = 0; j < w.size(); ++j)
                w[j] = 0.05 * gate.normal();
        }
        RngStream rng(107, "data");
        const int m = cfg.latent_tokens;
        TensorD zk({2 * m, cfg.latent_dim}), h({m, cfg.gru_hidden});
        for (std::size_t i = 0; i < zk.size(); ++i) zk[i] = rng.normal();
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.3 * rng.normal();
        auto objective = [&](const ParamStoreT<double>& s) {
            TapeD tape;
            wm::Bind<double> bind(tape, s);
            Ref eps = wm::denoise_predict(bind, cfg, tape.constant(zk), 2,
                                          tape.constant(h));
            return tape.val(tape.sum(tape.mul(eps, eps)))[0];
        };
        TapeD tape;
        wm::Bind<double> bind(tape, store);
        Ref eps = wm::denoise_predict(bind, cfg, tape.constant(zk), 2,
                                      tape.constant(h));
        Ref loss = tape.sum(tape.mul(eps, eps));
        tape.backward(loss);
        track("denoiser", test::finite_difference_check(objective, store,
                                                        tape.param_grads(),
                                                        1e-4));
    }
    {  // decoder
        ParamStoreT<double> store;
        RngStream init(108, "init");
        wm::init_encoder_decoder(store, cfg, init);
        RngStream rng(109, "data");
        TensorD z({cfg.latent_tokens, cfg.latent_dim});
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
        std::vector<double> q = {-0.5, 0.25, 0.1, -0.8, 0.6, 0.7};
        TensorD target({3, 1});
        for (std::size_t i = 0; i < 3; ++i) target[i] = rng.normal();
        auto objective = [&](const ParamStoreT<double>& s) {
            TapeD tape;
            wm::Bind<double> bind(tape, s);
            Ref u = wm::decode(bind, cfg, tape.constant(z), q);
            return tape.val(tape.mse(u, target))[0];
        };
        TapeD tape;
        wm::Bind<double> bind(tape, store);
        Ref u = wm::decode(bind, cfg, tape.constant(z), q);
        Ref loss = tape.mse(u, target);
        tape.backward(loss);
        track("decoder", test::finite_difference_check(objective, store,
                                                       tape.param_grads(),
                                                       1e-4));
    }
    {  // policy head through the action log density
        const pol::PolicyConfig pcfg = grad_policy_cfg();
        ParamStoreT<double> store;
        RngStream init(110, "init");
        pol::init_policy(store, pcfg, init);
        RngStream rng(111, "data");
        env::ObservationSet obs = random_obs(3, rng);
        TensorD z({2, pcfg.latent_dim});
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
        TensorD action({3, 2});
        for (std::size_t i = 0; i < action.size(); ++i)
            action[i] = 0.03 * rng.normal();
        auto objective = [&](const ParamStoreT<double>& s) {
            TapeD tape;
            wm::Bind<double> bind(tape, s);
            auto out = pol::policy_forward(bind, pcfg, tape.constant(z), obs);
            return tape.val(pol::log_prob(tape, out.mu, out.logsig, action))[0];
        };
        TapeD tape;
        wm::Bind<double> bind(tape, store);
        auto out = pol::policy_forward(bind, pcfg, tape.constant(z), obs);
        Ref loss = pol::log_prob(tape, out.mu, out.logsig, action);
        tape.backward(loss);
        track("policy", test::finite_difference_check(objective, store,
                                                      tape.param_grads(),
                                                      1e-4));
    }

    const double elapsed = seconds_since(t0);
    const bool ok = worst < 1e-4 && elapsed < 60.0;
    std::printf(
        "%s criterion 1: gradient suite (max rel err %.3e < 1e-4 at %s, "
        "%.1fs < 60s)\n",
        ok ? "PASS" : "FAIL", worst, worst_name.c_str(), elapsed);
    return ok;
}

// ---- criterion 2: solver oracle --------------------------------------------

bool criterion2() {
    env::DomainSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.dt = 0.02;
    spec.viscosity = 1e-2;
    spec.forcing = nullptr;

    TensorD w0({32, 32});
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
            w0[static_cast<std::size_t>(j) * 32 + i] =
                std::sin(2 * kPi * (-1.0 + 2.0 * j / 32.0));
    env::FieldTrajectory traj = env::simulate_vorticity(w0, spec, 51);
    double worst_rel = 0;
    for (int t = 0; t < 51; ++t) {
        const double decay =
            std::exp(-4 * kPi * kPi * spec.viscosity * t * spec.dt);
        double num = 0, den = 0;
        const Tensor frame = traj.frame(t);
        for (int j = 0; j < 32; ++j)
            for (int i = 0; i < 32; ++i) {
                const double expected =
                    decay * std::sin(2 * kPi * (-1.0 + 2.0 * j / 32.0));
                const double got = frame[static_cast<std::size_t>(j) * 32 + i];
                num += (got - expected) * (got - expected);
                den += expected * expected;
            }
        worst_rel = std::max(worst_rel, std::sqrt(num / den));
    }

    RngStream rng(11, "w0");
    env::FieldTrajectory free_decay =
        env::simulate_vorticity(env::random_vorticity(spec, rng), spec, 30);
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    const std::size_t fsz = 32 * 32;
    for (int t = 0; t < 30; ++t) {
        double ens = 0;
        for (std::size_t i = 0; i < fsz; ++i) {
            const double w =
                free_decay.data[static_cast<std::size_t>(t) * fsz + i];
            ens += w * w;
        }
        if (ens > prev + 1e-6) monotone = false;
        prev = ens;
    }

    const bool ok = worst_rel < 0.01 && monotone;
    std::printf(
        "%s criterion 2: solver oracle (decay rel L2 %.4f < 0.01, enstrophy "
        "%s)\n",
        ok ? "PASS" : "FAIL", worst_rel,
        monotone ? "monotone" : "NOT monotone");
    return ok;
}

// ---- criterion 3: set symmetry ---------------------------------------------

bool criterion3() {
    const wm::WorldModelConfig wcfg = grad_world_cfg();
    const pol::PolicyConfig pcfg = grad_policy_cfg();
    ParamStore world;
    RngStream winit(301, "init");
    wm::init_encoder_decoder(world, wcfg, winit);
    ParamStore policy;
    RngStream pinit(302, "init");
    pol::init_policy(policy, pcfg, pinit);

    RngStream rng(303, "data");
    const int n = 12;
    env::ObservationSet obs = random_obs(n, rng);
    Tensor z({2, pcfg.latent_dim});
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = static_cast<float>(rng.normal());

    TapeF base_tape;
    wm::Bind<float> base_bind(base_tape, world);
    const auto base_enc = wm::encode_tokens(base_bind, wcfg, obs);
    const Tensor base_mu = base_tape.val(base_enc.mu);
    const Tensor base_sig = base_tape.val(base_enc.logsig);
    const pol::PolicyEval base_pol = pol::policy_eval(policy, pcfg, z, obs);

    RngStream shuf(304, "perm");
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[static_cast<std::size_t>(i)], perm[shuf.index(i + 1)]);
        env::ObservationSet shuffled;
        shuffled.values = Tensor({n, 1});
        for (int i = 0; i < n; ++i) {
            const int s = perm[static_cast<std::size_t>(i)];
            shuffled.layout.xy.push_back(obs.layout.x(s));
            shuffled.layout.xy.push_back(obs.layout.y(s));
            shuffled.values[static_cast<std::size_t>(i)] =
                obs.values[static_cast<std::size_t>(s)];
        }
        TapeF tape;
        wm::Bind<float> bind(tape, world);
        const auto enc = wm::encode_tokens(bind, wcfg, shuffled);
        bool good = tape.val(enc.mu) == base_mu &&
                    tape.val(enc.logsig) == base_sig;
        const pol::PolicyEval out = pol::policy_eval(policy, pcfg, z, shuffled);
        for (int i = 0; i < n && good; ++i) {
            const int s = perm[static_cast<std::size_t>(i)];
            for (int c = 0; c < 2; ++c)
                good = good && out.mu.at(i, c) == base_pol.mu.at(s, c) &&
                       out.logsig.at(i, c) == base_pol.logsig.at(s, c);
        }
        if (good) ++exact;
    }
    const bool ok = exact == 100;
    std::printf(
        "%s criterion 3: set symmetry bit-exact (%d/100 permutations)\n",
        ok ? "PASS" : "FAIL", exact);
    return ok;
}

// ---- criterion 4: policy-optimization unit oracles -------------------------

bool criterion4() {
    bool ok = true;
    std::string detail;

    const std::vector<double> adv = grpo::group_advantage({1.0, 2.0, 3.0});
    if (std::abs(adv[0] + 1.2247) > 1e-4 || std::abs(adv[1]) > 1e-4 ||
        std::abs(adv[2] - 1.2247) > 1e-4) {
        ok = false;
        detail += " advantage";
    }

    if (std::abs(grpo::lookahead_reward({1.0, 0.0, 0.0}, 0.99) - 0.33669) >
        1e-4) {
        ok = false;
        detail += " lookahead";
    }

    const std::vector<double> lp = {0.3, -1.1, 2.0};
    const std::vector<double> a2 = {0.5, -0.25, 1.5};
    const double mean = (0.5 - 0.25 + 1.5) / 3.0;
    if (std::abs(grpo::surrogate_value(lp, lp, a2, 0.2) - mean) > 1e-7) {
        ok = false;
        detail += " surrogate";
    }

    grpo::FilterState st;
    st.tau = -0.5;
    const bool t1 = !grpo::filter_keep({-0.9, -0.6, -0.8}, st, 2);  // skip
    const bool t2 = grpo::filter_keep({-0.9, -0.2, -0.8}, st, 2);   // keep
    const bool t3 = grpo::filter_keep({-0.9, -0.6, -0.8}, st, 1);   // first it
    st.minima = {-1.0, -3.0};
    RngStream rng(401, "f");
    grpo::filter_finish_iteration(st, rng, 0.0);
    const bool t4 = std::abs(st.tau + 2.0) < 1e-12 && st.minima.empty();
    if (!(t1 && t2 && t3 && t4)) {
        ok = false;
        detail += " filter";
    }

    std::printf("%s criterion 4: policy-optimization unit oracles%s\n",
                ok ? "PASS" : "FAIL",
                ok ? "" : (" (failing:" + detail + ")").c_str());
    return ok;
}

// ---- criterion 5: world-model rollout trend --------------------------------

bool criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    const wm::WorldModelConfig wcfg = desk_world_cfg();

    env::DomainSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.dt = 0.02;
    spec.viscosity = 1e-2;
    spec.forcing = env::standard_forcing();

    double in_sum = 0, out_sum = 0, mse16 = 0, mse64 = 0;
    bool finite = true;
    for (std::uint64_t seed : {501u, 502u, 503u}) {
        std::vector<env::FieldTrajectory> data;
        for (int i = 0; i < 6; ++i) {
            RngStream rng(seed + static_cast<std::uint64_t>(i), "w0");
            data.push_back(env::simulate_vorticity(
                env::random_vorticity(spec, rng), spec, 20));
        }
        ParamStore store;
        RngStream init(seed, "init");
        wm::init_encoder_decoder(store, wcfg, init.sub("enc"));
        wm::init_dynamics(store, wcfg, init.sub("dyn"));

        train::TrainConfig tc;
        tc.stage = 1;
        tc.epochs = 4000;
        tc.batch = 4;
        tc.sensors = 64;
        tc.seed = seed;
        train::train_stage1(data, store, wcfg, tc);
        tc.stage = 2;
        tc.epochs = 600;
        train::train_stage2(data, store, wcfg, tc);

        RngStream erng(seed, "eval");
        for (int budget : {64, 16}) {
            env::SensorLayout layout = env::init_layout(budget, erng);
            const train::EvalReport rep =
                train::rollout_eval(store, wcfg, data[0], layout, seed);
            for (double m : rep.per_step_mse)
                finite = finite && std::isfinite(m);
            if (budget == 64) {
                in_sum += rep.in_t;
                out_sum += rep.out_t;
                mse64 += rep.avg;
            } else {
                mse16 += rep.avg;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const bool ok =
        finite && in_sum < out_sum && mse16 >= mse64 && elapsed < 1800.0;
    std::printf(
        "%s criterion 5: rollout trend (In-t %.4f < Out-t %.4f, MSE16 %.4f >= "
        "MSE64 %.4f, finite=%d, %.0fs < 1800s)\n",
        ok ? "PASS" : "FAIL", in_sum / 3, out_sum / 3, mse16 / 3, mse64 / 3,
        finite, elapsed);
    return ok;
}

// ---- criteria 6/7/9: hotspot toy, shared per-seed training -----------------

struct HotspotRun {
    ParamStore world;
    std::vector<env::FieldTrajectory> test;
    double fixed_mse = 0;    // frozen-layout baseline
    double policy_h3 = 0;    // trained policy, horizon 3, filtering on
    double policy_h1 = 0;    // horizon 1
    double nofilter = 0;     // horizon 3, filtering off
    double reward_first = 0;  // mean episode reward, first iteration (h3 run)
    double reward_last = 0;   // and final iteration
    double train_seconds = 0;
};

env::DomainSpec hotspot_spec() {
    env::DomainSpec spec;
    spec.height = 16;
    spec.width = 16;
    spec.dt = 1.0;
    spec.viscosity = 0.0;
    return spec;
}

std::vector<env::FieldTrajectory> hotspot_set(std::uint64_t seed, int count,
                                              int steps, const char* label) {
    const env::DomainSpec spec = hotspot_spec();
    std::vector<env::FieldTrajectory> out;
    for (int i = 0; i < count; ++i) {
        RngStream rng(seed + static_cast<std::uint64_t>(i), label);
        out.push_back(env::hotspot_trajectory(spec, steps, 0.3, 0.02, rng));
    }
    return out;
}

double eval_strategy(const HotspotRun& run, const ParamStore* policy,
                     const pol::PolicyConfig& pcfg, grpo::Strategy strategy,
                     std::uint64_t seed, int sensors) {
    double total = 0;
    for (std::size_t ti = 0; ti < run.test.size(); ++ti) {
        RngStream lrng(seed, "layout-" + std::to_string(ti));
        const env::SensorLayout layout0 = env::init_layout(sensors, lrng);
        const auto res = grpo::closed_loop_eval(
            run.world, desk_world_cfg(), policy, pcfg, run.test[ti], layout0,
            strategy, seed + ti);
        total += res.report.avg;
    }
    return total / static_cast<double>(run.test.size());
}

const std::vector<HotspotRun>& hotspot_runs() {
    static std::vector<HotspotRun> runs = [] {
        const wm::WorldModelConfig wcfg = desk_world_cfg();
        pol::PolicyConfig pcfg = desk_policy_cfg();
        // the bump drifts 0.02/step, so a 0.1 step cap lets a sensor catch
        // up and track; at 0.05 the chase never closes the gap
        pcfg.a_max = 0.1f;
        const int sensors = 8;
        std::vector<HotspotRun> out;
        for (std::uint64_t seed : {601u, 602u, 603u}) {
            const auto t0 = std::chrono::steady_clock::now();
            HotspotRun run;
            const auto train_set = hotspot_set(seed, 8, 72, "train");
            run.test = hotspot_set(seed + 100, 8, 72, "test");

            RngStream init(seed, "init");
            wm::init_encoder_decoder(run.world, wcfg, init.sub("enc"));
            wm::init_dynamics(run.world, wcfg, init.sub("dyn"));
            train::TrainConfig tc;
            tc.stage = 1;
            tc.epochs = 6000;
            tc.batch = 4;
            // dense sensing during reconstruction training; the policy then
            // works with a quarter of that budget, where placement matters
            tc.sensors = 64;
            tc.seed = seed;
            train::train_stage1(train_set, run.world, wcfg, tc);
            tc.stage = 2;
            tc.epochs = 300;
            train::train_stage2(train_set, run.world, wcfg, tc);

            grpo::GrpoConfig gc;
            gc.sensors = sensors;
            gc.groups = 8;
            gc.horizon = 3;
            gc.episodes = 2;
            // episodes must be long enough for layout drift to register in
            // the training signal; short episodes hide slow array collapse
            gc.episode_len = 48;
            gc.epochs = 2;
            gc.minibatch = 8;
            gc.total_steps = 9600;  // 100 iterations
            gc.lr0 = 3e-4f;
            gc.lr1 = 3e-5f;
            gc.seed = seed;

            std::vector<grpo::TrainLog> logs;
            const auto train_one = [&](grpo::GrpoConfig g) {
                ParamStore policy;
                RngStream pinit(seed, "policy-init");
                pol::init_policy(policy, pcfg, pinit);
                logs = grpo::train_policy(run.world, wcfg, policy, pcfg,
                                          train_set, g);
                return policy;
            };

            const ParamStore p3 = train_one(gc);
            run.reward_first = logs.front().mean_reward;
            run.reward_last = logs.back().mean_reward;
            // the wall-clock budget covers what the headline trend needs:
            // world-model training plus the horizon-3 policy run
            run.train_seconds = seconds_since(t0);
            grpo::GrpoConfig g1 = gc;
            g1.horizon = 1;
            const ParamStore p1 = train_one(g1);
            grpo::GrpoConfig gnf = gc;
            gnf.filtering = false;
            const ParamStore pnf = train_one(gnf);

            run.fixed_mse = eval_strategy(run, nullptr, pcfg,
                                          grpo::Strategy::fixed, seed, sensors);
            run.policy_h3 = eval_strategy(run, &p3, pcfg,
                                          grpo::Strategy::policy, seed, sensors);
            run.policy_h1 = eval_strategy(run, &p1, pcfg,
                                          grpo::Strategy::policy, seed, sensors);
            run.nofilter = eval_strategy(run, &pnf, pcfg,
                                         grpo::Strategy::policy, seed, sensors);
            out.push_back(std::move(run));
        }
        return out;
    }();
    return runs;
}

bool criterion6() {
    const auto& runs = hotspot_runs();
    double fixed = 0, active = 0, secs = 0, r0 = 0, r1 = 0;
    for (const auto& r : runs) {
        fixed += r.fixed_mse;
        active += r.policy_h3;
        secs += r.train_seconds;
        r0 += r.reward_first;
        r1 += r.reward_last;
    }
    const double improve = 100.0 * (fixed - active) / fixed;
    const bool ok = improve >= 10.0 && secs < 1800.0;
    std::printf(
        "%s criterion 6: active sensing trend (policy MSE %.4f vs fixed %.4f, "
        "improvement %.1f%% >= 10%%, train reward %.4f -> %.4f, %.0fs < "
        "1800s)\n",
        ok ? "PASS" : "FAIL", active / 3, fixed / 3, improve, r0 / 3, r1 / 3,
        secs);
    return ok;
}

bool criterion7() {
    const auto& runs = hotspot_runs();
    double h3 = 0, h1 = 0;
    for (const auto& r : runs) {
        h3 += r.policy_h3;
        h1 += r.policy_h1;
    }
    const bool tie = h3 <= 1.02 * h1;
    const bool ok = tie;
    std::printf(
        "%s criterion 7: horizon ablation (H=3 MSE %.4f vs H=1 %.4f%s)\n",
        ok ? "PASS" : "FAIL", h3 / 3, h1 / 3,
        h3 <= h1 ? "" : ", tie within 2% tolerance");
    return ok;
}

bool criterion9() {
    const auto& runs = hotspot_runs();
    double on = 0, off = 0;
    for (const auto& r : runs) {
        on += r.policy_h3;
        off += r.nofilter;
    }
    // directional: filtering enabled must not be worse by more than 5%
    const bool ok = on <= 1.05 * off;
    std::printf(
        "%s criterion 9: filtering ablation (enabled MSE %.4f, disabled %.4f, "
        "%s)\n",
        ok ? "PASS" : "FAIL", on / 3, off / 3,
        on <= off ? "enabled better or equal" : "within 5% tolerance");
    return ok;
}

// ---- criterion 8: pipeline determinism -------------------------------------

bool criterion8(const std::string& cli) {
    if (cli.empty() || !fs::exists(cli)) {
        std::printf("FAIL criterion 8: determinism (CLI binary not found: %s)\n",
                    cli.c_str());
        return false;
    }
    const fs::path dir = fs::temp_directory_path() / "af_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg_path = (dir / "run.cfg").string();
    {
        std::ofstream f(cfg_path);
        f << "seed=17\nenv.dataset=hotspot\nenv.height=16\nenv.width=16\n"
             "env.steps=12\nenv.train_trajectories=3\nenv.test_trajectories=2\n"
             "world.latent_tokens=4\nworld.query_dim=16\nworld.latent_dim=8\n"
             "world.heads=2\nworld.value_embed_dim=8\nworld.gru_hidden=8\n"
             "world.denoiser_dim=16\nworld.denoiser_blocks=1\n"
             "world.denoiser_heads=2\nworld.step_embed_dim=8\n"
             "world.modulation_hidden=16\nworld.decoder_width=16\n"
             "world.decoder_blocks=1\nworld.decoder_cross_dim=8\n"
             "world.fourier_scales=1,2\nworld.fourier_freqs=4\n"
             "train.stage1_epochs=40\ntrain.stage2_epochs=10\ntrain.batch=2\n"
             "train.sensors=12\npolicy.width=16\npolicy.heads=2\n"
             "policy.blocks=1\npolicy.cross_dim=8\npolicy.fourier_scales=1,2\n"
             "policy.fourier_freqs=4\ngrpo.groups=2\ngrpo.horizon=2\n"
             "grpo.episodes=1\ngrpo.episode_len=4\ngrpo.epochs=1\n"
             "grpo.total_steps=8\ngrpo.sensors=8\neval.budgets=12,6\n";
    }
    const auto pipeline = [&](const std::string& out) {
        const std::string base = "\"" + cli + "\"";
        const std::string common =
            " --config \"" + cfg_path + "\" --out \"" + out + "\" >/dev/null 2>&1";
        return std::system((base + " gen-data" + common).c_str()) == 0 &&
               std::system((base + " train-world --stage 1" + common).c_str()) ==
                   0 &&
               std::system((base + " train-world --stage 2" + common).c_str()) ==
                   0 &&
               std::system((base + " train-policy" + common).c_str()) == 0 &&
               std::system((base + " eval" + common).c_str()) == 0;
    };
    const std::string out1 = (dir / "run1").string();
    const std::string out2 = (dir / "run2").string();
    if (!pipeline(out1) || !pipeline(out2)) {
        std::printf("FAIL criterion 8: determinism (pipeline run failed)\n");
        return false;
    }
    int compared = 0;
    bool identical = true;
    for (const auto& entry : fs::directory_iterator(out1)) {
        if (entry.path().extension() != ".csv") continue;
        ++compared;
        std::ifstream a(entry.path(), std::ios::binary);
        std::ifstream b(out2 + "/" + entry.path().filename().string(),
                        std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        if (!b || sa.str() != sb.str()) identical = false;
    }
    fs::remove_all(dir);
    const bool ok = identical && compared > 0;
    std::printf(
        "%s criterion 8: determinism (%d CSV artifacts %s across reruns)\n",
        ok ? "PASS" : "FAIL", compared,
        identical ? "checksum-identical" : "DIFFER");
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (!arg.empty() && std::isdigit(static_cast<unsigned char>(arg[0])))
            selected.insert(std::atoi(arg.c_str()));
        else
            cli = arg;
    }
    const auto want = [&](int n) {
        return selected.empty() || selected.count(n) > 0;
    };

    int failures = 0;
    if (want(1) && !criterion1()) ++failures;
    if (want(2) && !criterion2()) ++failures;
    if (want(3) && !criterion3()) ++failures;
    if (want(4) && !criterion4()) ++failures;
    if (want(5) && !criterion5()) ++failures;
    if (want(6) && !criterion6()) ++failures;
    if (want(7) && !criterion7()) ++failures;
    if (want(8) && !criterion8(cli)) ++failures;
    if (want(9) && !criterion9()) ++failures;
    return failures == 0 ? 0 : 1;
}
