#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace demostack {

struct SamplerSchedule {
    std::vector<std::string> dataset_ids;
    std::vector<double> target_weights;
    std::size_t ramp_steps = 0; // 0 = alpha fixed at 1
    std::uint64_t seed = 0;

    static SamplerSchedule from_json_file(const std::filesystem::path& path);
    void save_json(const std::filesystem::path& path) const;
};

/// W_i = w_i^alpha / sum_j w_j^alpha. alpha=0 gives the uniform mixture,
/// alpha=1 the target weights renormalized.
std::vector<double> mixture_weights(const std::vector<double>& w, double alpha);

/// Linear ramp alpha = min(1, step / ramp_steps).
double ramp_alpha(std::size_t step, std::size_t ramp_steps);

/// Draws n_draws dataset indices by inverse CDF over the scheduled mixture.
/// Fully reproducible given (seed, step, n_draws).
std::vector<std::size_t> sample_plan(const SamplerSchedule& sched, std::size_t step,
                                     std::size_t n_draws);

} // namespace demostack
