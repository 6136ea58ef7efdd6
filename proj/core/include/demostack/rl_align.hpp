#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "demostack/guards.hpp"

namespace demostack {

struct OfflineBatch {
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> actions;
    std::vector<double> rewards;
    std::vector<std::vector<double>> next_states;
    std::vector<bool> terminal;

    std::size_t size() const { return states.size(); }
};

/// Value-and-gradient oracle for Q(s, a).
class Critic {
public:
    virtual ~Critic() = default;
    virtual double q(const std::vector<double>& s, const std::vector<double>& a) const = 0;
    virtual std::vector<double> grad_a(const std::vector<double>& s,
                                       const std::vector<double>& a) const = 0;
};

/// Q = -||a - a*||^2 around a fixed maximizer. Analytic test critic.
class QuadraticCritic : public Critic {
public:
    explicit QuadraticCritic(std::vector<double> maximizer)
        : maximizer_(std::move(maximizer)) {}

    double q(const std::vector<double>& s, const std::vector<double>& a) const override;
    std::vector<double> grad_a(const std::vector<double>& s,
                               const std::vector<double>& a) const override;

private:
    std::vector<double> maximizer_;
};

/// Q = log p(a) under a GMM density; state-independent. Analytic test critic.
class GmmLogDensityCritic : public Critic {
public:
    explicit GmmLogDensityCritic(GmmDensityModel model) : model_(std::move(model)) {}

    double q(const std::vector<double>& s, const std::vector<double>& a) const override;
    std::vector<double> grad_a(const std::vector<double>& s,
                               const std::vector<double>& a) const override;

private:
    GmmDensityModel model_;
};

struct RefineConfig {
    double eta = 0.05;
    std::size_t n_steps = 5;
    double grad_floor = 1e-9;
};

/// Asymmetric squared loss |tau - 1(u<0)| * u^2.
double expectile_loss(double u, double tau);

using ValueFn = std::function<double(const std::vector<double>&)>;

/// (L_V, L_Q): expectile value regression against the target critic plus the
/// TD regression of Q toward r + gamma * V(s') with terminal masking.
std::pair<double, double> iql_losses(const OfflineBatch& batch, const ValueFn& value,
                                     const Critic& q_target, const Critic& q,
                                     double tau, double gamma);

/// a <- a + eta * grad / ||grad||, n_steps times; stops early below grad_floor.
std::vector<double> refine_action(const Critic& critic, const std::vector<double>& s,
                                  const std::vector<double>& a, const RefineConfig& cfg);

struct RefineStepReport {
    double q_before = 0.0;
    double q_after = 0.0;
    double grad_norm = 0.0; // at the original action
    std::size_t steps_taken = 0;
};

struct RefinedTrajectory {
    std::vector<std::vector<double>> actions;
    std::vector<RefineStepReport> report;
};

RefinedTrajectory refine_trajectory(
    const Critic& critic,
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& traj,
    const RefineConfig& cfg);

} // namespace demostack
