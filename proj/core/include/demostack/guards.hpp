#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "demostack/matrix.hpp"

namespace demostack {

/// Mixture of full-covariance Gaussians over (optionally standardized) robot
/// states. Density queries and the OOD threshold live in standardized space;
/// gradients are reported with respect to the raw state.
struct GmmDensityModel {
    std::size_t K = 0;
    std::size_t dim = 0;
    std::vector<double> weights;              // K
    std::vector<std::vector<double>> means;   // K x D
    std::vector<Matrix> covariances;          // K of D x D
    double tau_ood = 0.0;
    double alpha_step = 0.2;
    std::vector<double> standardize_mean;     // D (identity when empty)
    std::vector<double> standardize_std;      // D

    static GmmDensityModel from_json_file(const std::filesystem::path& path);
    void save_json(const std::filesystem::path& path) const;
};

struct GmmFitOptions {
    bool standardize = true;
    double tau_quantile = 0.005;
    double ridge = 1e-6;
    double tol = 1e-6;
    std::size_t max_iters = 200;
    double alpha_step = 0.2;
};

struct GmmFitResult {
    GmmDensityModel model;
    std::vector<double> log_likelihoods; // per EM iteration
};

/// EM with distance-weighted seeded initialization. Deterministic per seed.
GmmFitResult fit_gmm(const Matrix& states, std::size_t K, std::uint64_t seed,
                     const GmmFitOptions& opts = {});

/// Mixture density and its analytic gradient with respect to s.
std::pair<double, std::vector<double>> gmm_density_grad(const GmmDensityModel& model,
                                                        const std::vector<double>& s);

struct OodCorrection {
    std::vector<double> state;
    bool corrected = false;
    double density = 0.0;
    std::size_t steps = 0;
};

/// Single gradient step s + alpha * grad p(s) when the density falls below
/// tau_ood. max_steps > 1 iterates until the density recovers (capped).
OodCorrection ood_correct(const GmmDensityModel& model, const std::vector<double>& s,
                          std::size_t max_steps = 1);

/// rho_t = t/T for t = 1..T; final step labeled exactly 1.
std::vector<double> progress_labels(std::size_t T);

/// Pinhole camera: intrinsics plus camera-to-world rigid transform.
struct CameraModel {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    std::array<double, 16> camera_to_world{
        1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}; // row-major 4x4
};

/// Validates fx, fy > 0 and orthonormal rotation block.
void validate_camera(const CameraModel& cam);

/// Backprojects pixel (u, v) at the given depth into the world frame.
std::array<double, 3> lift_point(double u, double v, double depth,
                                 const CameraModel& cam);

} // namespace demostack
