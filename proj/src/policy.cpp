#include "af/policy.hpp"

#include <cmath>

namespace af::pol {

PolicyEval policy_eval(const ParamStore& store, const PolicyConfig& cfg,
                       const Tensor& z_next, const env::ObservationSet& obs) {
    TapeF tape;
    wm::Bind<float> bind(tape, store);
    PolicyOut<float> out = policy_forward(bind, cfg, tape.constant(z_next), obs);
    return {tape.val(out.mu), tape.val(out.logsig)};
}

Action sample_action(const PolicyEval& eval, float a_max, RngStream& rng) {
    Action act;
    act.pre_clip = Tensor(eval.mu.shape());
    for (std::size_t i = 0; i < act.pre_clip.size(); ++i) {
        const float sig = std::exp(eval.logsig[i]);
        act.pre_clip[i] =
            eval.mu[i] + sig * static_cast<float>(rng.normal());
    }
    act.log_prob = log_prob_value(act.pre_clip, eval.mu, eval.logsig);
    act.displacement.resize(act.pre_clip.size());
    for (std::size_t i = 0; i < act.pre_clip.size(); ++i)
        act.displacement[i] = std::clamp(static_cast<double>(act.pre_clip[i]),
                                         -static_cast<double>(a_max),
                                         static_cast<double>(a_max));
    return act;
}

double log_prob_value(const Tensor& pre_clip, const Tensor& mu,
                      const Tensor& logsig) {
    if (pre_clip.size() != mu.size() || mu.size() != logsig.size())
        throw std::invalid_argument("log_prob_value: size mismatch");
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    double acc = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double ls = logsig[i];
        const double z = (static_cast<double>(pre_clip[i]) - mu[i]) * std::exp(-ls);
        acc -= 0.5 * z * z + ls + kHalfLog2Pi;
    }
    return acc;
}

}  // namespace af::pol
