#include "demostack/align.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <utility>

#include "demostack/errors.hpp"

namespace demostack {

namespace {

// Fritsch-Carlson tangents: weighted harmonic mean at interior knots, zero
// across sign changes, one-sided three-point estimates at the ends.
std::vector<double> pchip_tangents(const std::vector<double>& x,
                                   const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);
    if (n == 2) {
        const double d = (y[1] - y[0]) / (x[1] - x[0]);
        m[0] = m[1] = d;
        return m;
    }
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = x[k + 1] - x[k];
        delta[k] = (y[k + 1] - y[k]) / h[k];
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) {
            m[k] = 0.0;
        } else {
            const double w1 = 2.0 * h[k] + h[k - 1];
            const double w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
        double t = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (t * d0 <= 0.0) t = 0.0;
        else if (d0 * d1 < 0.0 && std::abs(t) > 3.0 * std::abs(d0)) t = 3.0 * d0;
        return t;
    };
    m[0] = endpoint(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return m;
}

struct BlockGrid {
    int bw = 0, bh = 0;           // blocks across / down
    std::vector<int> dx, dy;      // per-block displacement
};

constexpr int kBlock = 16;
constexpr int kSearch = 8;

long sad_cost(const Image& a, const Image& b, int ax, int ay, int bx, int by) {
    long cost = 0;
    for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x)
            cost += std::abs(static_cast<int>(a.at(ax + x, ay + y)) -
                             static_cast<int>(b.at(bx + x, by + y)));
    return cost;
}

BlockGrid match_level(const Image& prev, const Image& next, const BlockGrid* coarse) {
    BlockGrid grid;
    grid.bw = prev.width / kBlock;
    grid.bh = prev.height / kBlock;
    grid.dx.assign(static_cast<std::size_t>(grid.bw) * grid.bh, 0);
    grid.dy.assign(static_cast<std::size_t>(grid.bw) * grid.bh, 0);

    for (int by = 0; by < grid.bh; ++by) {
        for (int bx = 0; bx < grid.bw; ++bx) {
            int gx = 0, gy = 0;
            if (coarse != nullptr && coarse->bw > 0) {
                const int cx = std::clamp((bx * kBlock + kBlock / 2) / 2 / kBlock, 0,
                                          coarse->bw - 1);
                const int cy = std::clamp((by * kBlock + kBlock / 2) / 2 / kBlock, 0,
                                          coarse->bh - 1);
                const std::size_t ci =
                    static_cast<std::size_t>(cy) * coarse->bw + cx;
                gx = 2 * coarse->dx[ci];
                gy = 2 * coarse->dy[ci];
            }
            const int px = bx * kBlock, py = by * kBlock;
            long best_cost = -1;
            int best_dx = 0, best_dy = 0;
            long best_norm = 0;
            // Search around the coarse prediction and around zero, so a bad
            // coarse guess (e.g. texture decorrelated by downsampling) cannot
            // strand the block away from the true displacement.
            const std::array<std::pair<int, int>, 2> anchors = {
                std::pair<int, int>{gx, gy}, std::pair<int, int>{0, 0}};
            const std::size_t n_anchors = (gx == 0 && gy == 0) ? 1 : 2;
            for (std::size_t a = 0; a < n_anchors; ++a) {
                const auto [ax, ay] = anchors[a];
                for (int sy = -kSearch; sy <= kSearch; ++sy) {
                    for (int sx = -kSearch; sx <= kSearch; ++sx) {
                        const int tx = px + ax + sx, ty = py + ay + sy;
                        if (tx < 0 || ty < 0 || tx + kBlock > next.width ||
                            ty + kBlock > next.height)
                            continue;
                        const long cost = sad_cost(prev, next, px, py, tx, ty);
                        const int ddx = ax + sx, ddy = ay + sy;
                        const long norm = static_cast<long>(ddx) * ddx +
                                          static_cast<long>(ddy) * ddy;
                        if (best_cost < 0 || cost < best_cost ||
                            (cost == best_cost && norm < best_norm)) {
                            best_cost = cost;
                            best_dx = ddx;
                            best_dy = ddy;
                            best_norm = norm;
                        }
                    }
                }
            }
            const std::size_t i = static_cast<std::size_t>(by) * grid.bw + bx;
            grid.dx[i] = best_dx;
            grid.dy[i] = best_dy;
        }
    }
    return grid;
}

double pair_flow(const Image& prev, const Image& next) {
    std::vector<Image> pyr_prev{prev}, pyr_next{next};
    while (pyr_prev.size() < 3) {
        const Image& last = pyr_prev.back();
        if (last.width / 2 < kBlock || last.height / 2 < kBlock) break;
        pyr_prev.push_back(downsample2(pyr_prev.back()));
        pyr_next.push_back(downsample2(pyr_next.back()));
    }

    BlockGrid grid;
    bool have_coarse = false;
    for (std::size_t l = pyr_prev.size(); l-- > 0;) {
        grid = match_level(pyr_prev[l], pyr_next[l], have_coarse ? &grid : nullptr);
        have_coarse = true;
    }

    // Border blocks cannot see matches that leave the frame; average over
    // interior blocks when any exist.
    auto interior = [&](int bx, int by) {
        const int px = bx * kBlock, py = by * kBlock;
        return px - kSearch >= 0 && px + kBlock + kSearch <= prev.width &&
               py - kSearch >= 0 && py + kBlock + kSearch <= prev.height;
    };
    double sum = 0.0;
    std::size_t n = 0;
    for (int pass = 0; pass < 2 && n == 0; ++pass) {
        sum = 0.0;
        for (int by = 0; by < grid.bh; ++by)
            for (int bx = 0; bx < grid.bw; ++bx) {
                if (pass == 0 && !interior(bx, by)) continue;
                const std::size_t i = static_cast<std::size_t>(by) * grid.bw + bx;
                sum += std::sqrt(static_cast<double>(grid.dx[i]) * grid.dx[i] +
                                 static_cast<double>(grid.dy[i]) * grid.dy[i]);
                ++n;
            }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace

std::vector<double> pchip_eval(const std::vector<double>& knot_x,
                               const std::vector<double>& knot_y,
                               const std::vector<double>& query) {
    const std::size_t n = knot_x.size();
    if (n < 2) throw DomainError("pchip_eval: need at least 2 knots");
    if (knot_y.size() != n) throw DomainError("pchip_eval: x/y size mismatch");
    for (std::size_t k = 0; k + 1 < n; ++k)
        if (knot_x[k + 1] <= knot_x[k])
            throw DomainError("pchip_eval: knot x must be strictly increasing");

    const std::vector<double> m = pchip_tangents(knot_x, knot_y);

    std::vector<double> out;
    out.reserve(query.size());
    for (double x : query) {
        if (x < knot_x.front() || x > knot_x.back())
            throw RangeError("pchip_eval: query " + std::to_string(x) +
                             " outside [" + std::to_string(knot_x.front()) + ", " +
                             std::to_string(knot_x.back()) + "]");
        const auto it = std::upper_bound(knot_x.begin(), knot_x.end(), x);
        std::size_t k = it == knot_x.begin()
                            ? 0
                            : static_cast<std::size_t>(it - knot_x.begin()) - 1;
        if (k + 1 >= n) k = n - 2;
        if (x == knot_x[k]) {
            out.push_back(knot_y[k]); // exact at knots
            continue;
        }
        if (x == knot_x[k + 1]) {
            out.push_back(knot_y[k + 1]);
            continue;
        }
        const double h = knot_x[k + 1] - knot_x[k];
        const double t = (x - knot_x[k]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        const double h10 = t3 - 2.0 * t2 + t;
        const double h01 = -2.0 * t3 + 3.0 * t2;
        const double h11 = t3 - t2;
        out.push_back(h00 * knot_y[k] + h * h10 * m[k] + h01 * knot_y[k + 1] +
                      h * h11 * m[k + 1]);
    }
    return out;
}

FlowEstimate mean_flow_magnitude(const std::vector<Image>& frames) {
    if (frames.size() < 2)
        throw InsufficientDataError("mean_flow_magnitude requires at least 2 frames");
    const int w = frames.front().width, h = frames.front().height;
    if (w < 32 || h < 32)
        throw FormatError("mean_flow_magnitude requires frames of at least 32x32");
    for (const auto& f : frames)
        if (f.width != w || f.height != h)
            throw FormatError("mean_flow_magnitude: frame dimensions differ");

    FlowEstimate est;
    est.per_pair_magnitudes.reserve(frames.size() - 1);
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        const double mag = pair_flow(frames[t], frames[t + 1]);
        est.per_pair_magnitudes.push_back(mag);
        sum += mag;
    }
    est.mean_magnitude = sum / static_cast<double>(est.per_pair_magnitudes.size());
    est.degenerate = est.mean_magnitude <= 0.0;
    return est;
}

AlignmentFactor alignment_factor(double dataset_flow, double reference_flow) {
    if (reference_flow <= 0.0)
        throw DomainError("alignment_factor: reference_flow must be positive");
    AlignmentFactor out;
    if (dataset_flow <= 0.0) {
        out.stride = 4.0;
        out.degenerate = true;
        return out;
    }
    out.stride = std::clamp(reference_flow / dataset_flow, 0.25, 4.0);
    return out;
}

Matrix resample_trajectory(const Matrix& traj, double stride) {
    if (traj.rows < 2)
        throw InsufficientDataError("resample_trajectory requires T >= 2");
    if (stride < 0.25 || stride > 4.0)
        throw DomainError("resample_trajectory: stride outside [0.25, 4.0]");

    const std::size_t T = traj.rows;
    const double last = static_cast<double>(T - 1);
    const std::size_t M = static_cast<std::size_t>(std::floor(last / stride)) + 1;

    std::vector<double> knot_x(T);
    for (std::size_t t = 0; t < T; ++t) knot_x[t] = static_cast<double>(t);
    std::vector<double> query(M);
    for (std::size_t j = 0; j < M; ++j) {
        double u = static_cast<double>(j) * stride;
        const double r = std::round(u);
        if (std::abs(u - r) < 1e-9 && r <= last) u = r; // snap onto knots
        query[j] = std::min(u, last);
    }

    Matrix out(M, traj.cols);
    std::vector<double> knot_y(T);
    for (std::size_t d = 0; d < traj.cols; ++d) {
        for (std::size_t t = 0; t < T; ++t) knot_y[t] = traj(t, d);
        const auto col = pchip_eval(knot_x, knot_y, query);
        for (std::size_t j = 0; j < M; ++j) out(j, d) = col[j];
    }
    return out;
}

void renormalize_quaternion_columns(Matrix& traj,
                                    const std::vector<std::array<int, 4>>& groups) {
    for (const auto& g : groups) {
        for (std::size_t t = 0; t < traj.rows; ++t) {
            double norm = 0.0;
            for (int c : g) norm += traj(t, static_cast<std::size_t>(c)) *
                                    traj(t, static_cast<std::size_t>(c));
            norm = std::sqrt(norm);
            if (norm <= 0.0) continue;
            for (int c : g) traj(t, static_cast<std::size_t>(c)) /= norm;
        }
    }
}

} // namespace demostack
