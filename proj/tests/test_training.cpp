/// Training loops: degenerate-dataset oracles, loss-decrease smoke runs,
/// stage-2 freezing, rollout evaluation invariants, and CSV export.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "af/checkpoint.hpp"
#include "af/training.hpp"

using namespace af;
using namespace af::train;

namespace {

wm::WorldModelConfig tiny_cfg() {
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

ParamStore init_store(const wm::WorldModelConfig& cfg, std::uint64_t seed) {
    ParamStore store;
    RngStream rng(seed, "init");
    wm::init_encoder_decoder(store, cfg, rng.sub("enc"));
    wm::init_dynamics(store, cfg, rng.sub("dyn"));
    return store;
}

env::FieldTrajectory constant_trajectory(int steps, int h, int w, float value) {
    env::FieldTrajectory traj;
    traj.data = Tensor::full({steps, h, w, 1}, value);
    traj.dt = 1.0;
    return traj;
}

std::vector<env::FieldTrajectory> toy_ns_dataset(std::uint64_t seed, int count) {
    env::DomainSpec spec;
    spec.height = 8;
    spec.width = 8;
    spec.dt = 0.02;
    spec.viscosity = 1e-2;
    spec.forcing = env::standard_forcing();
    std::vector<env::FieldTrajectory> out;
    for (int i = 0; i < count; ++i) {
        RngStream rng(seed + static_cast<std::uint64_t>(i), "w0");
        out.push_back(
            env::simulate_vorticity(env::random_vorticity(spec, rng), spec, 4));
    }
    return out;
}

}  // namespace

TEST_CASE("config: invalid fields rejected") {
    TrainConfig tc;
    tc.kl_weight = -1.f;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.sensors = 0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.epochs = 0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("stage1: constant field is reconstructed to MSE < 1e-6") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 41);
    std::vector<env::FieldTrajectory> data;
    data.push_back(constant_trajectory(3, 8, 8, 0.7f));

    TrainConfig tc;
    tc.epochs = 2500;
    tc.batch = 2;
    tc.lr = 1e-2f;
    tc.sensors = 8;
    tc.seed = 42;
    auto history = train_stage1(data, store, cfg, tc);
    REQUIRE(history.size() == 2500);

    RngStream eval_rng(43, "eval");
    wm::LatentState s = wm::encode_obs(
        store, cfg,
        env::observe(data[0].frame(0), env::init_layout(8, eval_rng)), eval_rng);
    Tensor decoded = wm::decode_grid(store, cfg, s.z, 8, 8);
    CHECK(-wm::reward(data[0].frame(0), decoded) < 1e-6);
}

TEST_CASE("stage1: loss at epoch 50 below epoch 1, 3-seed average") {
    wm::WorldModelConfig cfg = tiny_cfg();
    double first = 0, later = 0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ParamStore store = init_store(cfg, seed);
        auto data = toy_ns_dataset(seed, 2);
        TrainConfig tc;
        tc.epochs = 50;
        tc.batch = 2;
        tc.lr = 3e-3f;
        tc.sensors = 8;
        tc.seed = seed;
        auto history = train_stage1(data, store, cfg, tc);
        first += history.front();
        later += history.back();
    }
    CHECK(later / 3 < first / 3);
}

TEST_CASE("stage1: divergence writes the abort checkpoint before rethrowing") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "af_abort.lasr";
    fs::remove(path);

    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 44);
    // poison one weight so the first forward pass goes non-finite
    store.mutable_value("enc.mu.w")[0] = std::numeric_limits<float>::quiet_NaN();
    std::vector<env::FieldTrajectory> data;
    data.push_back(constant_trajectory(2, 8, 8, 0.1f));
    TrainConfig tc;
    tc.epochs = 2;
    tc.sensors = 4;
    tc.abort_checkpoint = path.string();
    CHECK_THROWS_AS(train_stage1(data, store, cfg, tc), std::runtime_error);
    CHECK(fs::exists(path));
    fs::remove(path);
}

TEST_CASE("stage2: stage-1 parameters frozen byte-identically") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 45);
    auto data = toy_ns_dataset(7, 1);

    std::map<std::string, Tensor> before;
    for (const auto& [name, e] : store.entries())
        if (name.rfind("enc.", 0) == 0 || name.rfind("dec.", 0) == 0)
            before.emplace(name, e.value);
    const Tensor gru_before = store.get("gru.wr");

    TrainConfig tc;
    tc.stage = 2;
    tc.epochs = 5;
    tc.batch = 2;
    tc.sensors = 6;
    tc.history = 2;
    tc.seed = 46;
    auto history = train_stage2(data, store, cfg, tc);
    REQUIRE(history.size() == 5);

    for (const auto& [name, value] : before) CHECK(store.get(name) == value);
    CHECK_FALSE(store.get("gru.wr") == gru_before);
}

TEST_CASE("stage2: refuses to run without stage-1 parameters") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store;
    RngStream rng(47, "init");
    wm::init_dynamics(store, cfg, rng.sub("dyn"));
    auto data = toy_ns_dataset(8, 1);
    TrainConfig tc;
    tc.history = 2;
    CHECK_THROWS_AS(train_stage2(data, store, cfg, tc), std::invalid_argument);
}

TEST_CASE("stage2: loss decreases on a degenerate constant dataset (smoothed)") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 48);
    std::vector<env::FieldTrajectory> data;
    data.push_back(constant_trajectory(4, 8, 8, 0.3f));
    TrainConfig tc;
    tc.stage = 2;
    tc.epochs = 10;
    tc.batch = 4;
    tc.lr = 3e-3f;
    tc.sensors = 6;
    tc.history = 2;
    tc.seed = 49;
    auto history = train_stage2(data, store, cfg, tc);
    double early = 0, late = 0;
    for (int i = 0; i < 5; ++i) {
        early += history[static_cast<std::size_t>(i)];
        late += history[static_cast<std::size_t>(i) + 5];
    }
    CHECK(late < early);
}

TEST_CASE("rollout: deterministic, averages consistent, budget ordering sane") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 50);
    auto data = toy_ns_dataset(9, 1);
    RngStream lrng(51, "layout");
    env::SensorLayout layout = env::init_layout(8, lrng);

    EvalReport a = rollout_eval(store, cfg, data[0], layout, 52);
    EvalReport b = rollout_eval(store, cfg, data[0], layout, 52);
    CHECK(a.per_step_mse == b.per_step_mse);
    CHECK(a.budget == 8);
    REQUIRE(static_cast<int>(a.per_step_mse.size()) == data[0].steps());
    for (double m : a.per_step_mse) CHECK(std::isfinite(m));

    double in_sum = 0, out_sum = 0, all = 0;
    const int half = data[0].steps() / 2;
    for (int t = 0; t < data[0].steps(); ++t) {
        all += a.per_step_mse[static_cast<std::size_t>(t)];
        (t < half ? in_sum : out_sum) += a.per_step_mse[static_cast<std::size_t>(t)];
    }
    CHECK(a.in_t == doctest::Approx(in_sum / half).epsilon(1e-9));
    CHECK(a.out_t ==
          doctest::Approx(out_sum / (data[0].steps() - half)).epsilon(1e-9));
    CHECK(a.avg == doctest::Approx(all / data[0].steps()).epsilon(1e-9));

    // different budget, same model: still evaluable
    env::SensorLayout small = env::init_layout(4, lrng);
    EvalReport c = rollout_eval(store, cfg, data[0], small, 52);
    CHECK(c.budget == 4);
}

TEST_CASE("rollout: identity dynamics on a static field repeats the t=0 error") {
    wm::WorldModelConfig cfg = tiny_cfg();
    ParamStore store = init_store(cfg, 53);
    env::FieldTrajectory traj = constant_trajectory(6, 8, 8, 0.5f);
    RngStream lrng(54, "layout");
    env::SensorLayout layout = env::init_layout(6, lrng);
    EvalReport r = rollout_eval(store, cfg, traj, layout, 55, true);
    for (double m : r.per_step_mse) CHECK(m == r.per_step_mse[0]);
}

TEST_CASE("csv export: row counts and headers") {
    namespace fs = std::filesystem;
    const fs::path loss_path = fs::temp_directory_path() / "af_loss.csv";
    const fs::path eval_path = fs::temp_directory_path() / "af_eval.csv";

    write_loss_csv(loss_path.string(), {1.0, 0.5, 0.25});
    EvalReport r;
    r.per_step_mse = {0.1, 0.2, 0.3, 0.4};
    write_eval_csv(eval_path.string(), r);

    auto count_lines = [](const fs::path& p) {
        std::ifstream f(p);
        int n = 0;
        std::string line;
        while (std::getline(f, line)) ++n;
        return n;
    };
    CHECK(count_lines(loss_path) == 4);  // header + 3
    CHECK(count_lines(eval_path) == 5);  // header + 4
    std::ifstream f(eval_path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "t,mse,split");
    fs::remove(loss_path);
    fs::remove(eval_path);
}
