// afield: end-to-end driver for the active-sensing pipeline.
//
//   afield gen-data      --out runs/demo
//   afield train-world   --out runs/demo --stage 1
//   afield train-world   --out runs/demo --stage 2
//   afield train-policy  --out runs/demo [--algo grpo|ppo]
//   afield eval          --out runs/demo
//   afield plot          --out runs/demo
//
// Every command reads the same flat key=value config (--config) and writes
// the resolved config next to its outputs. Exit codes: 0 ok, 1 user error,
// 2 numerical failure.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "af/checkpoint.hpp"
#include "af/config.hpp"
#include "af/grpo.hpp"
#include "af/training.hpp"

namespace fs = std::filesystem;
using namespace af;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out = "out";
    std::string data;  // defaults to out
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
};

cfg::RunConfig load_config(const CommonArgs& args) {
    cfg::RunConfig rc;
    if (!args.config_path.empty())
        rc = cfg::parse_config_file(args.config_path);
    if (args.seed_set) rc.seed = args.seed;
    rc.finalize();
    return rc;
}

std::string data_dir(const CommonArgs& args) {
    return args.data.empty() ? args.out : args.data;
}

void require_file(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw std::invalid_argument("missing " + path + " (run `afield " +
                                    producer + "` first)");
}

env::DomainSpec domain_spec(const cfg::RunConfig& rc) {
    env::DomainSpec spec;
    spec.height = rc.height;
    spec.width = rc.width;
    spec.dt = rc.dt;
    spec.viscosity = rc.viscosity;
    if (rc.forcing != 0.0) {
        const double amp = rc.forcing;
        env::Forcing base = env::standard_forcing();
        // standard_forcing has amplitude 0.1; rescale to the configured one
        spec.forcing = [base, amp](double x, double y) {
            return base(x, y) * (amp / 0.1);
        };
    }
    return spec;
}

std::vector<env::FieldTrajectory> generate(const cfg::RunConfig& rc, int count,
                                           const std::string& label) {
    const env::DomainSpec spec = domain_spec(rc);
    std::vector<env::FieldTrajectory> out;
    for (int i = 0; i < count; ++i) {
        RngStream rng(rc.seed, label + "-" + std::to_string(i));
        if (rc.dataset == "hotspot") {
            out.push_back(env::hotspot_trajectory(spec, rc.steps,
                                                  rc.hotspot_sigma,
                                                  rc.hotspot_speed, rng));
        } else {
            out.push_back(env::simulate_vorticity(
                env::random_vorticity(spec, rng), spec, rc.steps, rc.seed));
        }
    }
    return out;
}

int cmd_gen_data(const CommonArgs& args) {
    const cfg::RunConfig rc = load_config(args);
    fs::create_directories(args.out);
    const std::string train_path = args.out + "/train.ltrj";
    const std::string test_path = args.out + "/test.ltrj";
    if (!args.force && (fs::exists(train_path) || fs::exists(test_path)))
        throw std::invalid_argument("refusing to overwrite existing dataset in " +
                                    args.out + " (use --force)");

    env::save_trajectories(generate(rc, rc.train_trajectories, "train"),
                           train_path);
    env::save_trajectories(generate(rc, rc.test_trajectories, "test"),
                           test_path);

    std::ofstream manifest(args.out + "/manifest.txt");
    manifest << "dataset=" << rc.dataset << "\n"
             << "train_trajectories=" << rc.train_trajectories << "\n"
             << "test_trajectories=" << rc.test_trajectories << "\n"
             << "steps=" << rc.steps << "\n"
             << "height=" << rc.height << "\n"
             << "width=" << rc.width << "\n"
             << "dt=" << rc.dt << "\n"
             << "viscosity=" << rc.viscosity << "\n"
             << "forcing=" << rc.forcing << "\n"
             << "seed=" << rc.seed << "\n";
    cfg::write_resolved(rc, args.out + "/resolved.cfg");
    std::cout << "wrote " << train_path << " (" << rc.train_trajectories
              << ") and " << test_path << " (" << rc.test_trajectories << ")\n";
    return 0;
}

int cmd_train_world(const CommonArgs& args, int stage) {
    cfg::RunConfig rc = load_config(args);
    fs::create_directories(args.out);
    const std::string train_path = data_dir(args) + "/train.ltrj";
    require_file(train_path, "gen-data");
    const auto data = env::load_trajectories(train_path);

    rc.train.stage = stage;
    rc.train.epochs = stage == 1 ? rc.stage1_epochs : rc.stage2_epochs;
    rc.train.abort_checkpoint = args.out + "/world_abort.ckpt";

    ParamStore store;
    std::vector<double> losses;
    if (stage == 1) {
        RngStream init(rc.seed, "world-init");
        wm::init_encoder_decoder(store, rc.world, init.sub("enc"));
        wm::init_dynamics(store, rc.world, init.sub("dyn"));
        losses = train::train_stage1(data, store, rc.world, rc.train);
        save_checkpoint(store, args.out + "/world_stage1.ckpt");
        train::write_loss_csv(args.out + "/stage1_loss.csv", losses);
    } else {
        const std::string prev = args.out + "/world_stage1.ckpt";
        require_file(prev, "train-world --stage 1");
        store = load_checkpoint(prev);
        losses = train::train_stage2(data, store, rc.world, rc.train);
        save_checkpoint(store, args.out + "/world.ckpt");
        train::write_loss_csv(args.out + "/stage2_loss.csv", losses);
    }
    cfg::write_resolved(rc, args.out + "/resolved.cfg");
    std::cout << "stage " << stage << " done, final loss " << losses.back()
              << "\n";
    return 0;
}

int cmd_train_policy(const CommonArgs& args, const std::string& algo) {
    cfg::RunConfig rc = load_config(args);
    fs::create_directories(args.out);
    const std::string world_path = args.out + "/world.ckpt";
    require_file(world_path, "train-world --stage 2");
    const std::string train_path = data_dir(args) + "/train.ltrj";
    require_file(train_path, "gen-data");

    const ParamStore world = load_checkpoint(world_path);
    const auto data = env::load_trajectories(train_path);
    rc.grpo.abort_checkpoint = args.out + "/policy_abort.ckpt";

    ParamStore policy;
    RngStream init(rc.seed, "policy-init");
    pol::init_policy(policy, rc.policy, init);
    const grpo::Algo a = algo == "ppo" ? grpo::Algo::ppo : grpo::Algo::grpo;
    grpo::PpoConfig ppo;
    if (a == grpo::Algo::ppo)
        grpo::init_value_head(policy, rc.policy, init.sub("value"), ppo);

    const auto logs = grpo::train_policy(world, rc.world, policy, rc.policy,
                                         data, rc.grpo, a, ppo);
    save_checkpoint(policy, args.out + "/policy.ckpt");
    grpo::write_policy_log_csv(args.out + "/policy_log.csv", logs);
    cfg::write_resolved(rc, args.out + "/resolved.cfg");
    std::cout << "trained " << algo << " for " << logs.size()
              << " iterations, final mean reward "
              << (logs.empty() ? 0.0 : logs.back().mean_reward) << "\n";
    return 0;
}

const char* strategy_name(grpo::Strategy s) {
    switch (s) {
        case grpo::Strategy::fixed: return "fixed";
        case grpo::Strategy::random: return "random";
        default: return "policy";
    }
}

int cmd_eval(const CommonArgs& args) {
    const cfg::RunConfig rc = load_config(args);
    fs::create_directories(args.out);
    const std::string world_path = args.out + "/world.ckpt";
    require_file(world_path, "train-world --stage 2");
    const std::string policy_path = args.out + "/policy.ckpt";
    require_file(policy_path, "train-policy");
    const std::string test_path = data_dir(args) + "/test.ltrj";
    require_file(test_path, "gen-data");

    const ParamStore world = load_checkpoint(world_path);
    const ParamStore policy = load_checkpoint(policy_path);
    const auto data = env::load_trajectories(test_path);
    if (data.empty()) throw std::invalid_argument("eval: empty test set");

    const grpo::Strategy strategies[] = {grpo::Strategy::fixed,
                                         grpo::Strategy::random,
                                         grpo::Strategy::policy};
    std::ofstream cmp(args.out + "/comparison.csv");
    cmp << "strategy,budget,in_t,out_t,avg,improvement_vs_fixed_pct\n";

    for (int budget : rc.eval_budgets) {
        // every strategy sees the same trajectories, seeds, and t=0 layouts
        std::vector<env::SensorLayout> layouts0;
        for (std::size_t ti = 0; ti < data.size(); ++ti) {
            RngStream lrng(rc.seed, "eval-layout-" + std::to_string(budget) +
                                        "-" + std::to_string(ti));
            layouts0.push_back(env::init_layout(budget, lrng));
        }
        double fixed_avg = 0;
        for (grpo::Strategy s : strategies) {
            std::vector<double> curve(static_cast<std::size_t>(data[0].steps()));
            double in = 0, out = 0, avg = 0;
            grpo::ClosedLoopResult first;
            for (std::size_t ti = 0; ti < data.size(); ++ti) {
                const std::uint64_t seed =
                    rc.seed + 7919u * static_cast<std::uint64_t>(budget) + ti;
                grpo::ClosedLoopResult res = grpo::closed_loop_eval(
                    world, rc.world, &policy, rc.policy, data[ti],
                    layouts0[ti], s, seed);
                if (ti == 0) first = res;
                for (std::size_t t = 0; t < curve.size(); ++t)
                    curve[t] += res.report.per_step_mse[t] /
                                static_cast<double>(data.size());
                in += res.report.in_t / static_cast<double>(data.size());
                out += res.report.out_t / static_cast<double>(data.size());
                avg += res.report.avg / static_cast<double>(data.size());
            }
            if (s == grpo::Strategy::fixed) fixed_avg = avg;
            const double improve =
                fixed_avg != 0 ? 100.0 * (fixed_avg - avg) / fixed_avg : 0.0;
            cmp << strategy_name(s) << "," << budget << "," << in << "," << out
                << "," << avg << "," << improve << "\n";

            const std::string tag = std::string(strategy_name(s)) + "_" +
                                    std::to_string(budget);
            train::EvalReport mean;
            mean.per_step_mse = curve;
            train::write_eval_csv(args.out + "/curve_" + tag + ".csv", mean);
            std::ofstream sd(args.out + "/sensors_" + tag + ".csv");
            sd << "t,sensor,x,y\n";
            for (std::size_t t = 0; t < first.layouts.size(); ++t)
                for (int i = 0; i < first.layouts[t].count(); ++i)
                    sd << t << "," << i << "," << first.layouts[t].x(i) << ","
                       << first.layouts[t].y(i) << "\n";
        }
    }
    cfg::write_resolved(rc, args.out + "/resolved.cfg");
    std::cout << "wrote " << args.out << "/comparison.csv\n";
    return 0;
}

int cmd_plot(const CommonArgs& args) {
    if (!fs::exists(args.out + "/comparison.csv"))
        throw std::invalid_argument("missing " + args.out +
                                    "/comparison.csv (run `afield eval` first)");
    // collate the per-run curve and sensor files into single plot-ready CSVs
    std::map<std::string, std::string> curves, sensors;
    for (const auto& entry : fs::directory_iterator(args.out)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("curve_", 0) == 0) curves[name] = entry.path().string();
        if (name.rfind("sensors_", 0) == 0)
            sensors[name] = entry.path().string();
    }
    if (curves.empty())
        throw std::invalid_argument("no curve_*.csv files in " + args.out);

    const auto tag_of = [](const std::string& name, std::size_t prefix) {
        // curve_<strategy>_<budget>.csv -> "<strategy>,<budget>"
        std::string tag = name.substr(prefix, name.size() - prefix - 4);
        const std::size_t us = tag.rfind('_');
        tag[us] = ',';
        return tag;
    };

    std::ofstream ec(args.out + "/error_curves.csv");
    ec << "strategy,budget,t,mse\n";
    for (const auto& [name, path] : curves) {
        const std::string tag = tag_of(name, 6);
        std::ifstream f(path);
        std::string line;
        std::getline(f, line);  // header t,mse,split
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            const std::size_t c1 = line.find(',');
            const std::size_t c2 = line.find(',', c1 + 1);
            ec << tag << "," << line.substr(0, c2 == std::string::npos
                                                   ? std::string::npos
                                                   : c2)
               << "\n";
        }
    }

    std::ofstream st(args.out + "/sensor_tracks.csv");
    st << "strategy,budget,t,sensor,x,y\n";
    for (const auto& [name, path] : sensors) {
        const std::string tag = tag_of(name, 8);
        std::ifstream f(path);
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line))
            if (!line.empty()) st << tag << "," << line << "\n";
    }
    std::cout << "wrote " << args.out << "/error_curves.csv and "
              << args.out << "/sensor_tracks.csv\n";
    return 0;
}

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_option("--out", args.out, "artifact directory");
    sub->add_option("--data", args.data,
                    "dataset directory (defaults to --out)");
    sub->add_option("--seed", args.seed, "override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_flag("--force", args.force, "overwrite existing artifacts");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active sensing for continuum field reconstruction"};
    app.require_subcommand(1);

    CommonArgs args;
    int stage = 1;
    std::string algo = "grpo";

    CLI::App* gen = app.add_subcommand("gen-data", "simulate trajectories");
    add_common(gen, args);
    CLI::App* tw = app.add_subcommand("train-world", "fit the world model");
    add_common(tw, args);
    tw->add_option("--stage", stage, "1 = encoder/decoder, 2 = dynamics")
        ->check(CLI::Range(1, 2));
    CLI::App* tp = app.add_subcommand("train-policy", "fit the sensing policy");
    add_common(tp, args);
    tp->add_option("--algo", algo, "grpo or ppo")
        ->check(CLI::IsMember({"grpo", "ppo"}));
    CLI::App* ev = app.add_subcommand("eval", "compare sensing strategies");
    add_common(ev, args);
    CLI::App* pl = app.add_subcommand("plot", "collate plot-ready CSV data");
    add_common(pl, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(args);
        if (tw->parsed()) return cmd_train_world(args, stage);
        if (tp->parsed()) return cmd_train_policy(args, algo);
        if (ev->parsed()) return cmd_eval(args);
        if (pl->parsed()) return cmd_plot(args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
