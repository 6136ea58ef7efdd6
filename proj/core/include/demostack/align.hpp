#pragma once

#include <array>
#include <vector>

#include "demostack/episode.hpp"

namespace demostack {

struct FlowEstimate {
    double mean_magnitude = 0.0; // pixels per frame
    std::vector<double> per_pair_magnitudes;
    bool degenerate = false; // static data, magnitude indistinguishable from zero
};

/// Fritsch-Carlson monotone cubic Hermite interpolation. Reproduces knots
/// exactly and never overshoots monotone data between knots.
std::vector<double> pchip_eval(const std::vector<double>& knot_x,
                               const std::vector<double>& knot_y,
                               const std::vector<double>& query);

/// Coarse-to-fine SAD block matching (16x16 blocks, +-8 px search per level,
/// up to 3 pyramid levels). Deterministic; zero shift wins SAD ties.
FlowEstimate mean_flow_magnitude(const std::vector<Image>& frames);

struct AlignmentFactor {
    double stride = 1.0; // source steps per output step
    bool degenerate = false;
};

/// f = reference_flow / dataset_flow, clamped to [0.25, 4.0]. Degenerate
/// (non-positive) dataset flow clamps to 4.0 with a warning flag.
AlignmentFactor alignment_factor(double dataset_flow, double reference_flow);

/// Resamples each column independently at query times j*f via pchip_eval.
/// Output length M = floor((T-1)/f) + 1.
Matrix resample_trajectory(const Matrix& traj, double stride);

/// Renormalizes groups of 4 columns (quaternion wxyz) to unit norm per row.
void renormalize_quaternion_columns(Matrix& traj,
                                    const std::vector<std::array<int, 4>>& groups);

} // namespace demostack
