#include "demostack/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "demostack/errors.hpp"
#include "demostack/rng.hpp"

namespace demostack {

SamplerSchedule SamplerSchedule::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sampler config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    SamplerSchedule s;
    try {
        s.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
        s.target_weights = j.at("weights").get<std::vector<double>>();
        s.ramp_steps = j.value("ramp_steps", std::size_t{0});
        s.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (s.dataset_ids.empty() || s.dataset_ids.size() != s.target_weights.size())
        throw FormatError(path.string() + ": dataset_ids and weights must be non-empty "
                                          "and of equal length");
    for (double w : s.target_weights)
        if (w <= 0.0) throw DomainError(path.string() + ": weights must be positive");
    return s;
}

void SamplerSchedule::save_json(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["dataset_ids"] = dataset_ids;
    j["weights"] = target_weights;
    j["ramp_steps"] = ramp_steps;
    j["seed"] = seed;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sampler config: " + path.string());
    out << j.dump(2) << "\n";
}

std::vector<double> mixture_weights(const std::vector<double>& w, double alpha) {
    if (w.empty()) throw DomainError("mixture_weights: empty weight vector");
    if (alpha < 0.0 || alpha > 1.0)
        throw DomainError("mixture_weights: alpha must be in [0, 1]");
    std::vector<double> out(w.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) throw DomainError("mixture_weights: weights must be positive");
        out[i] = std::pow(w[i], alpha);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double ramp_alpha(std::size_t step, std::size_t ramp_steps) {
    if (ramp_steps == 0) return 1.0;
    return std::min(1.0, static_cast<double>(step) / static_cast<double>(ramp_steps));
}

std::vector<std::size_t> sample_plan(const SamplerSchedule& sched, std::size_t step,
                                     std::size_t n_draws) {
    if (n_draws < 1) throw DomainError("sample_plan: n_draws must be >= 1");
    const double alpha = ramp_alpha(step, sched.ramp_steps);
    const std::vector<double> probs = mixture_weights(sched.target_weights, alpha);

    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;

    CounterRng rng(CounterRng::derive_key(sched.seed, step));
    std::vector<std::size_t> plan(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) {
        const double u = rng.next_double();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        plan[i] = std::min(static_cast<std::size_t>(it - cdf.begin()), probs.size() - 1);
    }
    return plan;
}

} // namespace demostack
