#include "demostack/guards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "demostack/errors.hpp"
#include "demostack/rng.hpp"

namespace demostack {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Lower-triangular Cholesky factor of an SPD matrix.
Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.rows;
    Matrix L(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= L(i, k) * L(j, k);
            if (i == j) {
                if (sum <= 0.0)
                    throw DomainError("covariance matrix is not positive definite");
                L(i, i) = std::sqrt(sum);
            } else {
                L(i, j) = sum / L(j, j);
            }
        }
    }
    return L;
}

// Solves (L L^T) x = b.
std::vector<double> cholesky_solve(const Matrix& L, std::vector<double> b) {
    const std::size_t n = L.rows;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= L(i, k) * b[k];
        b[i] /= L(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) b[i] -= L(k, i) * b[k];
        b[i] /= L(i, i);
    }
    return b;
}

struct ComponentCache {
    Matrix chol;
    double log_norm = 0.0; // -0.5 (D log 2pi + log det)
};

ComponentCache cache_component(const Matrix& cov) {
    ComponentCache c;
    c.chol = cholesky(cov);
    double logdet = 0.0;
    for (std::size_t i = 0; i < cov.rows; ++i) logdet += 2.0 * std::log(c.chol(i, i));
    c.log_norm = -0.5 * (static_cast<double>(cov.rows) * kLog2Pi + logdet);
    return c;
}

double log_gaussian(const ComponentCache& c, const std::vector<double>& mean,
                    const double* x, std::size_t dim) {
    std::vector<double> diff(dim);
    for (std::size_t d = 0; d < dim; ++d) diff[d] = x[d] - mean[d];
    // Forward substitution only: quad = |L^-1 diff|^2.
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t k = 0; k < i; ++k) diff[i] -= c.chol(i, k) * diff[k];
        diff[i] /= c.chol(i, i);
    }
    double quad = 0.0;
    for (double v : diff) quad += v * v;
    return c.log_norm - 0.5 * quad;
}

std::vector<double> standardized(const GmmDensityModel& m, const std::vector<double>& s) {
    if (m.standardize_mean.empty()) return s;
    std::vector<double> z(s.size());
    for (std::size_t d = 0; d < s.size(); ++d)
        z[d] = (s[d] - m.standardize_mean[d]) / m.standardize_std[d];
    return z;
}

} // namespace

GmmFitResult fit_gmm(const Matrix& states, std::size_t K, std::uint64_t seed,
                     const GmmFitOptions& opts) {
    const std::size_t N = states.rows, D = states.cols;
    if (K < 1) throw DomainError("fit_gmm: K must be >= 1");
    if (K > N) throw DomainError("fit_gmm: K=" + std::to_string(K) +
                                 " exceeds sample count N=" + std::to_string(N));

    GmmFitResult result;
    GmmDensityModel& model = result.model;
    model.K = K;
    model.dim = D;
    model.alpha_step = opts.alpha_step;

    // Standardization stats (population).
    Matrix z = states;
    if (opts.standardize) {
        model.standardize_mean.assign(D, 0.0);
        model.standardize_std.assign(D, 1.0);
        for (std::size_t d = 0; d < D; ++d) {
            double mean = 0.0;
            for (std::size_t t = 0; t < N; ++t) mean += states(t, d);
            mean /= static_cast<double>(N);
            double var = 0.0;
            for (std::size_t t = 0; t < N; ++t) {
                const double dv = states(t, d) - mean;
                var += dv * dv;
            }
            var /= static_cast<double>(N);
            model.standardize_mean[d] = mean;
            model.standardize_std[d] = std::max(std::sqrt(var), 1e-12);
            for (std::size_t t = 0; t < N; ++t)
                z(t, d) = (states(t, d) - mean) / model.standardize_std[d];
        }
    }

    // Distance-weighted seeding (k-means++ style).
    CounterRng rng(CounterRng::derive_key(seed, 0x676d6dULL));
    std::vector<std::size_t> centers;
    centers.push_back(static_cast<std::size_t>(rng.next_below(N)));
    std::vector<double> dist2(N, 0.0);
    while (centers.size() < K) {
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c : centers) {
                double d2 = 0.0;
                for (std::size_t d = 0; d < D; ++d) {
                    const double dv = z(i, d) - z(c, d);
                    d2 += dv * dv;
                }
                best = std::min(best, d2);
            }
            dist2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.next_below(N));
        } else {
            double u = rng.next_double() * total;
            for (std::size_t i = 0; i < N; ++i) {
                u -= dist2[i];
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        }
        centers.push_back(pick);
    }

    // Initial parameters: uniform weights, seeded means, pooled covariance.
    model.weights.assign(K, 1.0 / static_cast<double>(K));
    model.means.assign(K, std::vector<double>(D, 0.0));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t d = 0; d < D; ++d) model.means[k][d] = z(centers[k], d);

    Matrix pooled(D, D);
    {
        std::vector<double> mean(D, 0.0);
        for (std::size_t t = 0; t < N; ++t)
            for (std::size_t d = 0; d < D; ++d) mean[d] += z(t, d);
        for (double& v : mean) v /= static_cast<double>(N);
        for (std::size_t t = 0; t < N; ++t)
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = 0; j < D; ++j)
                    pooled(i, j) += (z(t, i) - mean[i]) * (z(t, j) - mean[j]);
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j)
                pooled(i, j) /= static_cast<double>(N);
        for (std::size_t i = 0; i < D; ++i) pooled(i, i) += opts.ridge;
    }
    model.covariances.assign(K, pooled);

    // EM.
    std::vector<ComponentCache> caches(K);
    Matrix resp(N, K);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
        for (std::size_t k = 0; k < K; ++k) caches[k] = cache_component(model.covariances[k]);

        double ll = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double max_lp = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                const double lp = std::log(model.weights[k]) +
                                  log_gaussian(caches[k], model.means[k], z.row(i), D);
                resp(i, k) = lp;
                max_lp = std::max(max_lp, lp);
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) sum += std::exp(resp(i, k) - max_lp);
            const double lse = max_lp + std::log(sum);
            ll += lse;
            for (std::size_t k = 0; k < K; ++k)
                resp(i, k) = std::exp(resp(i, k) - lse);
        }
        result.log_likelihoods.push_back(ll);
        if (ll - prev_ll < opts.tol && iter > 0) break;
        prev_ll = ll;

        // M-step.
        for (std::size_t k = 0; k < K; ++k) {
            double nk = 0.0;
            for (std::size_t i = 0; i < N; ++i) nk += resp(i, k);
            nk = std::max(nk, 1e-300);
            model.weights[k] = nk / static_cast<double>(N);
            for (std::size_t d = 0; d < D; ++d) {
                double m = 0.0;
                for (std::size_t i = 0; i < N; ++i) m += resp(i, k) * z(i, d);
                model.means[k][d] = m / nk;
            }
            Matrix& cov = model.covariances[k];
            for (std::size_t a = 0; a < D; ++a)
                for (std::size_t b = 0; b < D; ++b) cov(a, b) = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t a = 0; a < D; ++a) {
                    const double da = z(i, a) - model.means[k][a];
                    for (std::size_t b = 0; b <= a; ++b) {
                        const double db = z(i, b) - model.means[k][b];
                        cov(a, b) += resp(i, k) * da * db;
                    }
                }
            }
            for (std::size_t a = 0; a < D; ++a)
                for (std::size_t b = 0; b <= a; ++b) {
                    cov(a, b) /= nk;
                    cov(b, a) = cov(a, b);
                }
            for (std::size_t a = 0; a < D; ++a) cov(a, a) += opts.ridge;
        }
    }

    // OOD threshold from the training-point densities.
    std::vector<double> densities(N);
    std::vector<double> raw(D);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t d = 0; d < D; ++d) raw[d] = states(i, d);
        densities[i] = gmm_density_grad(model, raw).first;
    }
    std::sort(densities.begin(), densities.end());
    const auto idx = static_cast<std::size_t>(
        std::floor(opts.tau_quantile * static_cast<double>(N - 1)));
    model.tau_ood = densities[std::min(idx, N - 1)];

    return result;
}

std::pair<double, std::vector<double>> gmm_density_grad(const GmmDensityModel& model,
                                                        const std::vector<double>& s) {
    if (s.size() != model.dim)
        throw DomainError("gmm_density_grad: state has wrong dimension");
    for (double v : s)
        if (!std::isfinite(v)) throw DomainError("gmm_density_grad: non-finite input");

    const std::vector<double> zvec = standardized(model, s);
    const std::size_t D = model.dim;

    double p = 0.0;
    std::vector<double> grad(D, 0.0);
    for (std::size_t k = 0; k < model.K; ++k) {
        const ComponentCache c = cache_component(model.covariances[k]);
        const double pk =
            model.weights[k] *
            std::exp(log_gaussian(c, model.means[k], zvec.data(), D));
        p += pk;
        std::vector<double> diff(D);
        for (std::size_t d = 0; d < D; ++d) diff[d] = model.means[k][d] - zvec[d];
        const std::vector<double> dir = cholesky_solve(c.chol, std::move(diff));
        for (std::size_t d = 0; d < D; ++d) grad[d] += pk * dir[d];
    }
    if (!model.standardize_mean.empty())
        for (std::size_t d = 0; d < D; ++d) grad[d] /= model.standardize_std[d];
    return {p, grad};
}

OodCorrection ood_correct(const GmmDensityModel& model, const std::vector<double>& s,
                          std::size_t max_steps) {
    OodCorrection out;
    out.state = s;
    auto [p, grad] = gmm_density_grad(model, s);
    out.density = p;
    if (p >= model.tau_ood || max_steps == 0) return out;

    out.corrected = true;
    for (std::size_t step = 0; step < max_steps; ++step) {
        for (std::size_t d = 0; d < out.state.size(); ++d)
            out.state[d] += model.alpha_step * grad[d];
        ++out.steps;
        std::tie(p, grad) = gmm_density_grad(model, out.state);
        out.density = p;
        if (p >= model.tau_ood) break;
    }
    return out;
}

std::vector<double> progress_labels(std::size_t T) {
    if (T == 0) throw DomainError("progress_labels: T must be >= 1");
    std::vector<double> rho(T);
    for (std::size_t t = 1; t <= T; ++t)
        rho[t - 1] = static_cast<double>(t) / static_cast<double>(T);
    rho.back() = 1.0;
    return rho;
}

void validate_camera(const CameraModel& cam) {
    if (cam.fx <= 0.0 || cam.fy <= 0.0)
        throw DomainError("camera focal lengths must be positive");
    const auto& M = cam.camera_to_world;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += M[4 * k + i] * M[4 * k + j];
            const double expect = i == j ? 1.0 : 0.0;
            if (std::abs(dot - expect) > 1e-9)
                throw DomainError("camera rotation block is not orthonormal");
        }
    }
}

std::array<double, 3> lift_point(double u, double v, double depth,
                                 const CameraModel& cam) {
    if (depth <= 0.0) throw DomainError("lift_point: depth must be positive");
    const double xc = (u - cam.cx) / cam.fx * depth;
    const double yc = (v - cam.cy) / cam.fy * depth;
    const double zc = depth;
    const auto& M = cam.camera_to_world;
    std::array<double, 3> world{};
    for (int i = 0; i < 3; ++i)
        world[static_cast<std::size_t>(i)] =
            M[4 * i + 0] * xc + M[4 * i + 1] * yc + M[4 * i + 2] * zc + M[4 * i + 3];
    return world;
}

GmmDensityModel GmmDensityModel::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open GMM model: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    GmmDensityModel m;
    try {
        m.K = j.at("K").get<std::size_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.tau_ood = j.at("tau_ood").get<double>();
        m.alpha_step = j.value("alpha_step", 0.2);
        for (const auto& jm : j.at("means"))
            m.means.push_back(jm.get<std::vector<double>>());
        for (const auto& jc : j.at("covariances")) {
            Matrix cov(m.dim, m.dim);
            std::size_t r = 0;
            for (const auto& row : jc) {
                std::size_t c = 0;
                for (const auto& v : row) cov(r, c++) = v.get<double>();
                ++r;
            }
            m.covariances.push_back(std::move(cov));
        }
        if (j.contains("standardization")) {
            m.standardize_mean =
                j.at("standardization").at("mean").get<std::vector<double>>();
            m.standardize_std =
                j.at("standardization").at("std").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (m.weights.size() != m.K || m.means.size() != m.K || m.covariances.size() != m.K)
        throw FormatError(path.string() + ": component count mismatch");
    return m;
}

void GmmDensityModel::save_json(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["K"] = K;
    j["dim"] = dim;
    j["weights"] = weights;
    j["means"] = means;
    j["covariances"] = nlohmann::ordered_json::array();
    for (const auto& cov : covariances) {
        nlohmann::ordered_json jc = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < cov.rows; ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t c = 0; c < cov.cols; ++c) row.push_back(cov(r, c));
            jc.push_back(row);
        }
        j["covariances"].push_back(jc);
    }
    j["tau_ood"] = tau_ood;
    j["alpha_step"] = alpha_step;
    if (!standardize_mean.empty()) {
        j["standardization"]["mean"] = standardize_mean;
        j["standardization"]["std"] = standardize_std;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write GMM model: " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace demostack
