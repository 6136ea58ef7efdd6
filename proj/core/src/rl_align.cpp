#include "demostack/rl_align.hpp"

#include <cmath>

#include "demostack/errors.hpp"

namespace demostack {

double QuadraticCritic::q(const std::vector<double>&, const std::vector<double>& a) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - maximizer_[i];
        d2 += d * d;
    }
    return -d2;
}

std::vector<double> QuadraticCritic::grad_a(const std::vector<double>&,
                                            const std::vector<double>& a) const {
    std::vector<double> g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = -2.0 * (a[i] - maximizer_[i]);
    return g;
}

double GmmLogDensityCritic::q(const std::vector<double>&,
                              const std::vector<double>& a) const {
    return std::log(std::max(gmm_density_grad(model_, a).first, 1e-300));
}

std::vector<double> GmmLogDensityCritic::grad_a(const std::vector<double>&,
                                                const std::vector<double>& a) const {
    auto [p, grad] = gmm_density_grad(model_, a);
    p = std::max(p, 1e-300);
    for (double& g : grad) g /= p; // d/da log p = grad p / p
    return grad;
}

double expectile_loss(double u, double tau) {
    if (tau <= 0.0 || tau >= 1.0)
        throw DomainError("expectile_loss: tau must be in (0, 1)");
    const double w = u < 0.0 ? std::abs(tau - 1.0) : tau;
    return w * u * u;
}

std::pair<double, double> iql_losses(const OfflineBatch& batch, const ValueFn& value,
                                     const Critic& q_target, const Critic& q,
                                     double tau, double gamma) {
    const std::size_t n = batch.size();
    if (n == 0) throw DomainError("iql_losses: empty batch");
    if (batch.actions.size() != n || batch.rewards.size() != n ||
        batch.next_states.size() != n || batch.terminal.size() != n)
        throw DomainError("iql_losses: batch field lengths differ");
    if (gamma < 0.0 || gamma > 1.0)
        throw DomainError("iql_losses: gamma must be in [0, 1]");

    double lv = 0.0, lq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = q_target.q(batch.states[i], batch.actions[i]) -
                         value(batch.states[i]);
        lv += expectile_loss(u, tau);

        const double bootstrap =
            batch.terminal[i] ? 0.0 : gamma * value(batch.next_states[i]);
        const double td = batch.rewards[i] + bootstrap -
                          q.q(batch.states[i], batch.actions[i]);
        lq += td * td;
    }
    return {lv / static_cast<double>(n), lq / static_cast<double>(n)};
}

std::vector<double> refine_action(const Critic& critic, const std::vector<double>& s,
                                  const std::vector<double>& a, const RefineConfig& cfg) {
    std::vector<double> cur = a;
    for (std::size_t step = 0; step < cfg.n_steps; ++step) {
        const std::vector<double> g = critic.grad_a(s, cur);
        double norm = 0.0;
        for (double v : g) {
            if (!std::isfinite(v))
                throw CriticError("refine_action: non-finite critic gradient");
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm < cfg.grad_floor) break;
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] += cfg.eta * g[i] / norm;
    }
    return cur;
}

RefinedTrajectory refine_trajectory(
    const Critic& critic,
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& traj,
    const RefineConfig& cfg) {
    RefinedTrajectory out;
    out.actions.reserve(traj.size());
    out.report.reserve(traj.size());
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const auto& [s, a] = traj[t];
        RefineStepReport rep;
        try {
            rep.q_before = critic.q(s, a);
            if (!std::isfinite(rep.q_before))
                throw CriticError("non-finite critic value");
            const std::vector<double> g0 = critic.grad_a(s, a);
            for (double v : g0) rep.grad_norm += v * v;
            rep.grad_norm = std::sqrt(rep.grad_norm);

            std::vector<double> refined = a;
            for (std::size_t step = 0; step < cfg.n_steps; ++step) {
                const std::vector<double> g = critic.grad_a(s, refined);
                double norm = 0.0;
                for (double v : g) {
                    if (!std::isfinite(v)) throw CriticError("non-finite critic gradient");
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                if (norm < cfg.grad_floor) break;
                for (std::size_t i = 0; i < refined.size(); ++i)
                    refined[i] += cfg.eta * g[i] / norm;
                ++rep.steps_taken;
            }
            rep.q_after = critic.q(s, refined);
            out.actions.push_back(std::move(refined));
        } catch (const CriticError& e) {
            throw CriticError("step " + std::to_string(t) + ": " + e.what());
        }
        out.report.push_back(rep);
    }
    return out;
}

} // namespace demostack
