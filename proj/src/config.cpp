#include "af/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace af::cfg {

namespace {

// ---- value parsing, strict: the whole token must be consumed ---------------

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    }
    if (used != v.size())
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    }
    if (used != v.size())
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(static_cast<int>(parse_int(key, tok)));
    if (out.empty())
        throw std::invalid_argument("config: empty list for " + key);
    return out;
}

std::string join(const std::vector<int>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

// One registry entry per key: how to set it from a string and how to print
// its current value.
struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

using Registry = std::map<std::string, Field>;

const Registry& registry() {
    static const Registry reg = [] {
        Registry r;
        auto num = [&r](const std::string& key, auto getter) {
            // getter returns a mutable reference into the config
            using RefT = std::remove_reference_t<decltype(getter(
                std::declval<RunConfig&>()))>;
            r[key] = Field{
                [getter](RunConfig& c, const std::string& k,
                         const std::string& v) {
                    if constexpr (std::is_same_v<RefT, bool>)
                        getter(c) = parse_bool(k, v);
                    else if constexpr (std::is_integral_v<RefT>)
                        getter(c) = static_cast<RefT>(parse_int(k, v));
                    else
                        getter(c) = static_cast<RefT>(parse_real(k, v));
                },
                [getter](const RunConfig& c) {
                    RunConfig& mut = const_cast<RunConfig&>(c);
                    if constexpr (std::is_same_v<RefT, bool>)
                        return std::string(getter(mut) ? "true" : "false");
                    else {
                        std::ostringstream os;
                        if constexpr (std::is_floating_point_v<RefT>)
                            os.precision(
                                std::numeric_limits<RefT>::max_digits10);
                        os << getter(mut);
                        return os.str();
                    }
                }};
        };
        auto str = [&r](const std::string& key, auto getter) {
            r[key] = Field{
                [getter](RunConfig& c, const std::string&,
                         const std::string& v) { getter(c) = v; },
                [getter](const RunConfig& c) {
                    return getter(const_cast<RunConfig&>(c));
                }};
        };
        auto list = [&r](const std::string& key, auto getter) {
            r[key] = Field{
                [getter](RunConfig& c, const std::string& k,
                         const std::string& v) {
                    getter(c) = parse_int_list(k, v);
                },
                [getter](const RunConfig& c) {
                    return join(getter(const_cast<RunConfig&>(c)));
                }};
        };

        num("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });

        str("env.dataset", [](RunConfig& c) -> std::string& { return c.dataset; });
        num("env.height", [](RunConfig& c) -> int& { return c.height; });
        num("env.width", [](RunConfig& c) -> int& { return c.width; });
        num("env.dt", [](RunConfig& c) -> double& { return c.dt; });
        num("env.viscosity",
            [](RunConfig& c) -> double& { return c.viscosity; });
        num("env.forcing", [](RunConfig& c) -> double& { return c.forcing; });
        num("env.train_trajectories",
            [](RunConfig& c) -> int& { return c.train_trajectories; });
        num("env.test_trajectories",
            [](RunConfig& c) -> int& { return c.test_trajectories; });
        num("env.steps", [](RunConfig& c) -> int& { return c.steps; });
        num("env.hotspot_sigma",
            [](RunConfig& c) -> double& { return c.hotspot_sigma; });
        num("env.hotspot_speed",
            [](RunConfig& c) -> double& { return c.hotspot_speed; });

        num("world.latent_tokens",
            [](RunConfig& c) -> int& { return c.world.latent_tokens; });
        num("world.query_dim",
            [](RunConfig& c) -> int& { return c.world.query_dim; });
        num("world.latent_dim",
            [](RunConfig& c) -> int& { return c.world.latent_dim; });
        num("world.heads", [](RunConfig& c) -> int& { return c.world.heads; });
        num("world.value_embed_dim",
            [](RunConfig& c) -> int& { return c.world.value_embed_dim; });
        num("world.gru_hidden",
            [](RunConfig& c) -> int& { return c.world.gru_hidden; });
        num("world.denoiser_dim",
            [](RunConfig& c) -> int& { return c.world.denoiser_dim; });
        num("world.denoiser_blocks",
            [](RunConfig& c) -> int& { return c.world.denoiser_blocks; });
        num("world.denoiser_heads",
            [](RunConfig& c) -> int& { return c.world.denoiser_heads; });
        num("world.step_embed_dim",
            [](RunConfig& c) -> int& { return c.world.step_embed_dim; });
        num("world.modulation_hidden",
            [](RunConfig& c) -> int& { return c.world.modulation_hidden; });
        num("world.diffusion_steps",
            [](RunConfig& c) -> int& { return c.world.diffusion_steps; });
        num("world.alpha_bar_final",
            [](RunConfig& c) -> double& { return c.world.alpha_bar_final; });
        num("world.decoder_width",
            [](RunConfig& c) -> int& { return c.world.decoder_width; });
        num("world.decoder_blocks",
            [](RunConfig& c) -> int& { return c.world.decoder_blocks; });
        num("world.decoder_cross_dim",
            [](RunConfig& c) -> int& { return c.world.decoder_cross_dim; });
        list("world.fourier_scales", [](RunConfig& c) -> std::vector<int>& {
            return c.world.fourier.scales;
        });
        num("world.fourier_freqs", [](RunConfig& c) -> int& {
            return c.world.fourier.freqs_per_scale;
        });
        num("world.fourier_base",
            [](RunConfig& c) -> double& { return c.world.fourier.base; });

        num("train.stage1_epochs",
            [](RunConfig& c) -> int& { return c.stage1_epochs; });
        num("train.stage2_epochs",
            [](RunConfig& c) -> int& { return c.stage2_epochs; });
        num("train.batch", [](RunConfig& c) -> int& { return c.train.batch; });
        num("train.lr", [](RunConfig& c) -> float& { return c.train.lr; });
        num("train.lr_floor",
            [](RunConfig& c) -> float& { return c.train.lr_floor; });
        num("train.kl_weight",
            [](RunConfig& c) -> float& { return c.train.kl_weight; });
        num("train.diff_weight",
            [](RunConfig& c) -> float& { return c.train.diff_weight; });
        num("train.sensors",
            [](RunConfig& c) -> int& { return c.train.sensors; });
        num("train.history",
            [](RunConfig& c) -> int& { return c.train.history; });

        num("policy.width", [](RunConfig& c) -> int& { return c.policy.width; });
        num("policy.heads", [](RunConfig& c) -> int& { return c.policy.heads; });
        num("policy.blocks",
            [](RunConfig& c) -> int& { return c.policy.blocks; });
        num("policy.cross_dim",
            [](RunConfig& c) -> int& { return c.policy.cross_dim; });
        num("policy.value_embed_dim",
            [](RunConfig& c) -> int& { return c.policy.value_embed_dim; });
        num("policy.a_max",
            [](RunConfig& c) -> float& { return c.policy.a_max; });
        list("policy.fourier_scales", [](RunConfig& c) -> std::vector<int>& {
            return c.policy.fourier.scales;
        });
        num("policy.fourier_freqs", [](RunConfig& c) -> int& {
            return c.policy.fourier.freqs_per_scale;
        });
        num("policy.fourier_base",
            [](RunConfig& c) -> double& { return c.policy.fourier.base; });

        num("grpo.groups", [](RunConfig& c) -> int& { return c.grpo.groups; });
        num("grpo.horizon",
            [](RunConfig& c) -> int& { return c.grpo.horizon; });
        num("grpo.gamma", [](RunConfig& c) -> double& { return c.grpo.gamma; });
        num("grpo.clip", [](RunConfig& c) -> double& { return c.grpo.clip; });
        num("grpo.eps_norm",
            [](RunConfig& c) -> double& { return c.grpo.eps_norm; });
        num("grpo.epochs", [](RunConfig& c) -> int& { return c.grpo.epochs; });
        num("grpo.episodes",
            [](RunConfig& c) -> int& { return c.grpo.episodes; });
        num("grpo.episode_len",
            [](RunConfig& c) -> int& { return c.grpo.episode_len; });
        num("grpo.total_steps",
            [](RunConfig& c) -> long& { return c.grpo.total_steps; });
        num("grpo.filter_reset_prob",
            [](RunConfig& c) -> double& { return c.grpo.filter_reset_prob; });
        num("grpo.filtering",
            [](RunConfig& c) -> bool& { return c.grpo.filtering; });
        num("grpo.sensors",
            [](RunConfig& c) -> int& { return c.grpo.sensors; });
        num("grpo.minibatch",
            [](RunConfig& c) -> int& { return c.grpo.minibatch; });
        num("grpo.lr0", [](RunConfig& c) -> float& { return c.grpo.lr0; });
        num("grpo.lr1", [](RunConfig& c) -> float& { return c.grpo.lr1; });

        list("eval.budgets",
             [](RunConfig& c) -> std::vector<int>& { return c.eval_budgets; });
        return r;
    }();
    return reg;
}

}  // namespace

void RunConfig::finalize() {
    if (dataset != "ns" && dataset != "hotspot")
        throw std::invalid_argument("config: env.dataset must be ns or hotspot");
    if (height < 4 || width < 4)
        throw std::invalid_argument("config: grid too small");
    if (train_trajectories < 1 || test_trajectories < 1 || steps < 2)
        throw std::invalid_argument("config: dataset counts out of range");
    for (int b : eval_budgets)
        if (b < 1) throw std::invalid_argument("config: eval budget < 1");
    // the policy reads latents produced by this world model
    policy.latent_dim = world.latent_dim;
    policy.channels = world.channels;
    train.seed = seed;
    grpo.seed = seed;
    train.validate();
    grpo.validate();
}

void apply_key(RunConfig& cfg, const std::string& key,
               const std::string& value) {
    const auto& reg = registry();
    auto it = reg.find(key);
    if (it == reg.end())
        throw std::invalid_argument("config: unknown key: " + key);
    it->second.set(cfg, key, value);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        const std::size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: " + path + ":" +
                                        std::to_string(lineno) +
                                        ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const std::size_t x = s.find_first_not_of(" \t");
            const std::size_t y = s.find_last_not_of(" \t");
            s = x == std::string::npos ? "" : s.substr(x, y - x + 1);
        };
        trim(key);
        trim(value);
        apply_key(cfg, key, value);
    }
    cfg.finalize();
    return cfg;
}

std::string serialize(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : registry())
        out += key + "=" + field.get(cfg) + "\n";
    return out;
}

void write_resolved(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << serialize(cfg);
}

}  // namespace af::cfg
