#include "demostack/dataqa.hpp"

#include <algorithm>
#include <cmath>

#include "demostack/errors.hpp"

namespace demostack {

namespace {

// Half-sample symmetric reflection into [0, n).
std::size_t reflect_index(long i, long n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return static_cast<std::size_t>(i);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double population_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::sqrt(var);
}

// Per-frame sharpness: Laplacian std in 4x4 blocks, max-pooled over 16x16
// block windows, median over regions.
double frame_sharpness(const Image& img) {
    if (img.width < 64 || img.height < 64)
        throw FrameTooSmallError("sharpness_score requires frames of at least 64x64 pixels");

    const int H = img.height, W = img.width;
    const int block_rows = H / 4, block_cols = W / 4;
    Matrix block_std(static_cast<std::size_t>(block_rows),
                     static_cast<std::size_t>(block_cols));

    std::vector<double> vals;
    vals.reserve(16);
    for (int by = 0; by < block_rows; ++by) {
        for (int bx = 0; bx < block_cols; ++bx) {
            vals.clear();
            for (int y = by * 4; y < by * 4 + 4; ++y) {
                for (int x = bx * 4; x < bx * 4 + 4; ++x) {
                    if (x < 1 || y < 1 || x >= W - 1 || y >= H - 1) continue;
                    const double lap = static_cast<double>(img.at(x - 1, y)) +
                                       img.at(x + 1, y) + img.at(x, y - 1) +
                                       img.at(x, y + 1) - 4.0 * img.at(x, y);
                    vals.push_back(lap);
                }
            }
            block_std(by, bx) = population_std(vals);
        }
    }

    const int win_rows = block_rows / 16, win_cols = block_cols / 16;
    std::vector<double> regions;
    regions.reserve(static_cast<std::size_t>(win_rows) * win_cols);
    for (int wy = 0; wy < win_rows; ++wy) {
        for (int wx = 0; wx < win_cols; ++wx) {
            double best = 0.0;
            for (int by = wy * 16; by < wy * 16 + 16; ++by)
                for (int bx = wx * 16; bx < wx * 16 + 16; ++bx)
                    best = std::max(best, block_std(by, bx));
            regions.push_back(best);
        }
    }
    return median(std::move(regions));
}

} // namespace

std::vector<std::size_t> sample_frame_indices(std::size_t count, std::size_t budget) {
    std::vector<std::size_t> idx;
    if (count == 0 || budget == 0) return idx;
    if (count <= budget) {
        idx.resize(count);
        for (std::size_t i = 0; i < count; ++i) idx[i] = i;
        return idx;
    }
    if (budget == 1) return {count / 2};
    for (std::size_t i = 0; i < budget; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(count - 1) /
                           static_cast<double>(budget - 1);
        idx.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

double tremble_score(const Matrix& states, double smoothing_sigma) {
    if (states.rows < 3)
        throw InsufficientDataError("tremble_score requires T >= 3");
    if (smoothing_sigma <= 0.0)
        throw DomainError("smoothing_sigma must be positive");

    const std::size_t Tv = states.rows - 1;
    const std::size_t D = states.cols;

    // Forward-difference velocities, T-1 rows.
    Matrix vel(Tv, D);
    for (std::size_t t = 0; t < Tv; ++t)
        for (std::size_t d = 0; d < D; ++d)
            vel(t, d) = states(t + 1, d) - states(t, d);

    const long radius = std::lround(4.0 * smoothing_sigma);
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (static_cast<double>(i) * i) /
                                  (smoothing_sigma * smoothing_sigma));
        kernel[static_cast<std::size_t>(i + radius)] = w;
        ksum += w;
    }
    for (double& w : kernel) w /= ksum;

    double total = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t t = 0; t < Tv; ++t) {
            double smooth = 0.0;
            for (long i = -radius; i <= radius; ++i)
                smooth += kernel[static_cast<std::size_t>(i + radius)] *
                          vel(reflect_index(static_cast<long>(t) + i,
                                            static_cast<long>(Tv)), d);
            const double v = vel(t, d);
            const double denom = std::abs(smooth) + std::abs(v);
            if (denom > 0.0) total += std::abs(smooth - v) / denom;
        }
    }
    return total / (static_cast<double>(Tv) * static_cast<double>(D));
}

double sharpness_score(const std::vector<Image>& frames, std::size_t frame_sample_budget) {
    if (frames.empty())
        throw InsufficientDataError("sharpness_score requires at least one frame");
    const auto idx = sample_frame_indices(frames.size(), frame_sample_budget);
    std::vector<double> scores;
    scores.reserve(idx.size());
    for (std::size_t i : idx) scores.push_back(frame_sharpness(frames[i]));
    return median(std::move(scores));
}

FeatureGrid grid_feature_extractor(const Image& frame) {
    constexpr int kGrid = 8;
    FeatureGrid grid;
    grid.cells = kGrid * kGrid;
    grid.dims = 2;
    grid.values.resize(grid.cells * grid.dims);

    std::vector<double> cell;
    for (int gy = 0; gy < kGrid; ++gy) {
        const int y0 = gy * frame.height / kGrid;
        const int y1 = (gy + 1) * frame.height / kGrid;
        for (int gx = 0; gx < kGrid; ++gx) {
            const int x0 = gx * frame.width / kGrid;
            const int x1 = (gx + 1) * frame.width / kGrid;
            cell.clear();
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    cell.push_back(frame.at(x, y) / 255.0);
            double mean = 0.0;
            for (double v : cell) mean += v;
            if (!cell.empty()) mean /= static_cast<double>(cell.size());
            const std::size_t c = static_cast<std::size_t>(gy * kGrid + gx);
            grid.values[c * 2 + 0] = mean;
            grid.values[c * 2 + 1] = population_std(cell);
        }
    }
    return grid;
}

double visual_diversity(const std::vector<Image>& frames, const FeatureExtractor& extractor) {
    if (frames.size() < 2)
        throw InsufficientDataError("visual_diversity requires at least 2 frames");

    // Spatial mean first: one D-vector per frame.
    std::vector<std::vector<double>> per_frame;
    per_frame.reserve(frames.size());
    std::size_t dims = 0;
    for (const auto& f : frames) {
        const FeatureGrid g = extractor(f);
        dims = g.dims;
        std::vector<double> mean_over_cells(g.dims, 0.0);
        for (std::size_t c = 0; c < g.cells; ++c)
            for (std::size_t d = 0; d < g.dims; ++d)
                mean_over_cells[d] += g.values[c * g.dims + d];
        for (double& v : mean_over_cells) v /= static_cast<double>(g.cells);
        per_frame.push_back(std::move(mean_over_cells));
    }

    double acc = 0.0;
    std::vector<double> series(frames.size());
    for (std::size_t d = 0; d < dims; ++d) {
        for (std::size_t t = 0; t < frames.size(); ++t) series[t] = per_frame[t][d];
        acc += population_std(series);
    }
    return dims == 0 ? 0.0 : acc / static_cast<double>(dims);
}

double state_diversity(const Matrix& states) {
    if (states.rows < 2)
        throw InsufficientDataError("state_diversity requires T >= 2");
    double trace = 0.0;
    std::vector<double> col(states.rows);
    for (std::size_t d = 0; d < states.cols; ++d) {
        for (std::size_t t = 0; t < states.rows; ++t) col[t] = states(t, d);
        const double s = population_std(col);
        trace += s * s;
    }
    return std::sqrt(trace);
}

bool gripper_pattern_check(const std::vector<double>& channel, double lo, double hi,
                           const std::vector<std::string>& pattern) {
    if (lo >= hi) throw DomainError("gripper_lo must be below gripper_hi");

    std::vector<std::string> runs;
    std::string label;
    for (double v : channel) {
        std::string next = label;
        if (v > hi) next = "open";
        else if (v < lo) next = "closed";
        if (next.empty()) continue; // undecided prefix
        if (runs.empty() || runs.back() != next) runs.push_back(next);
        label = next;
    }
    if (runs.empty())
        throw UndecidableError("gripper channel never crosses either threshold");
    return runs == pattern;
}

QualityReport qa_episode(const Episode& ep, const QaConfig& qa, const FilterConfig& filt) {
    QualityReport rep;
    rep.episode_id = ep.id;

    const ValidationResult val = validate_episode(ep, filt);
    for (auto reason : val.reasons) rep.reject_reasons.push_back(to_string(reason));

    rep.motion = motion_activity(ep.states, ep.fps);

    try {
        rep.tremble = tremble_score(ep.states, qa.smoothing_sigma);
        if (rep.tremble > qa.tremble_max) rep.reject_reasons.push_back("tremble");
    } catch (const Error&) {
        rep.reject_reasons.push_back("tremble_unscorable");
    }

    const std::vector<Image>* frames = nullptr;
    if (!qa.sharpness_camera.empty()) {
        auto it = ep.cameras.find(qa.sharpness_camera);
        if (it != ep.cameras.end()) frames = &it->second;
    } else if (!ep.cameras.empty()) {
        frames = &ep.cameras.begin()->second;
    }

    if (frames != nullptr && !frames->empty()) {
        try {
            rep.sharpness = sharpness_score(*frames, qa.frame_sample_budget);
            if (rep.sharpness < qa.sharpness_min) rep.reject_reasons.push_back("sharpness");
        } catch (const Error&) {
            rep.reject_reasons.push_back("sharpness_unscorable");
        }
        try {
            rep.visual_diversity = visual_diversity(*frames, grid_feature_extractor);
        } catch (const Error&) {
            rep.visual_diversity = 0.0;
        }
    } else if (qa.sharpness_min > 0.0) {
        rep.reject_reasons.push_back("sharpness_unscorable");
    }

    try {
        rep.state_diversity = state_diversity(ep.states);
    } catch (const Error&) {
        rep.state_diversity = 0.0;
    }

    if (!qa.gripper_pattern.empty() && qa.gripper_channel >= 0) {
        const auto ch = static_cast<std::size_t>(qa.gripper_channel);
        if (ch >= ep.actions.cols) {
            rep.gripper_pattern_ok = false;
            rep.reject_reasons.push_back("gripper_pattern");
        } else {
            std::vector<double> channel(ep.actions.rows);
            for (std::size_t t = 0; t < ep.actions.rows; ++t)
                channel[t] = ep.actions(t, ch);
            try {
                rep.gripper_pattern_ok = gripper_pattern_check(
                    channel, qa.gripper_lo, qa.gripper_hi, qa.gripper_pattern);
            } catch (const Error&) {
                rep.gripper_pattern_ok = false;
            }
            if (!rep.gripper_pattern_ok) rep.reject_reasons.push_back("gripper_pattern");
        }
    }

    rep.accepted = rep.reject_reasons.empty();
    return rep;
}

} // namespace demostack
