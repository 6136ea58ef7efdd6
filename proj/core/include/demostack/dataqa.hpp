#pragma once

#include <functional>
#include <string>
#include <vector>

#include "demostack/episode.hpp"

namespace demostack {

struct QualityReport {
    std::string episode_id;
    double tremble = 0.0;
    double sharpness = 0.0;
    double visual_diversity = 0.0;
    double state_diversity = 0.0;
    double motion = 0.0;
    bool gripper_pattern_ok = true;
    bool accepted = false;
    std::vector<std::string> reject_reasons;
};

struct QaConfig {
    double tremble_max = 1.0;
    double sharpness_min = 0.0;
    double smoothing_sigma = 2.0;       // steps
    std::size_t frame_sample_budget = 16;
    std::vector<std::string> gripper_pattern; // e.g. {"open","closed","open"}; empty = disabled
    int gripper_channel = -1;                 // action column; -1 = disabled
    double gripper_lo = 0.3;
    double gripper_hi = 0.7;
    std::string sharpness_camera; // empty = first camera
};

/// Feature grid for one frame: S spatial cells x D feature dims, row-major
/// (cell-major). visual_diversity averages over cells first, then takes the
/// temporal std per feature dim.
struct FeatureGrid {
    std::size_t cells = 0;
    std::size_t dims = 0;
    std::vector<double> values; // cells * dims
};

using FeatureExtractor = std::function<FeatureGrid(const Image&)>;

/// 8x8 grid of cells; per cell (mean intensity, intensity std), scaled to [0,1].
FeatureGrid grid_feature_extractor(const Image& frame);

/// Normalized discrepancy between forward-difference velocities and their
/// Gaussian-smoothed version (kernel truncated at 4*sigma, reflect padding).
/// 0/0 terms contribute zero; the result lies in [0, 1].
double tremble_score(const Matrix& states, double smoothing_sigma);

/// Median over sampled frames of the median 64x64-region sharpness, where a
/// region score is the max over its 4x4-pixel blocks of the Laplacian std.
double sharpness_score(const std::vector<Image>& frames, std::size_t frame_sample_budget);

double visual_diversity(const std::vector<Image>& frames, const FeatureExtractor& extractor);

/// sqrt of the trace of the population covariance of the state rows.
double state_diversity(const Matrix& states);

/// Hysteresis binarization of a gripper channel followed by run-length
/// compression; true iff the compressed open/closed sequence equals pattern.
bool gripper_pattern_check(const std::vector<double>& channel, double lo, double hi,
                           const std::vector<std::string>& pattern);

QualityReport qa_episode(const Episode& ep, const QaConfig& qa, const FilterConfig& filt);

/// Evenly spaced sample of up to budget frame indices out of [0, count).
std::vector<std::size_t> sample_frame_indices(std::size_t count, std::size_t budget);

} // namespace demostack
