// demostack: batch pipelines for robot demonstration curation, action-space
// unification, temporal alignment, augmentation, and offline RL numerics.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <memory>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "demostack/align.hpp"
#include "demostack/augment.hpp"
#include "demostack/dataqa.hpp"
#include "demostack/episode.hpp"
#include "demostack/errors.hpp"
#include "demostack/guards.hpp"
#include "demostack/rl_align.hpp"
#include "demostack/sampler.hpp"
#include "demostack/unify.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace demostack;

namespace {

ordered_json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return j;
}

// Temp file + rename so reruns either fully replace a report or leave the old
// one intact.
void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

void write_json(const fs::path& path, const ordered_json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

// EpisodePack directories under root, sorted by name.
std::vector<fs::path> list_packs(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
    std::vector<fs::path> packs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            packs.push_back(entry.path());
    std::sort(packs.begin(), packs.end());
    return packs;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<std::size_t> next{0};
    const unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(n));
    for (unsigned w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

FilterConfig parse_filter_config(const ordered_json& j) {
    FilterConfig cfg;
    cfg.min_length = j.value("min_length", std::size_t{1});
    cfg.max_length = j.value("max_length", std::size_t{100000});
    if (j.contains("required_cameras"))
        cfg.required_cameras = j.at("required_cameras").get<std::vector<std::string>>();
    cfg.motion_threshold = j.value("motion_threshold", 0.0);
    if (cfg.min_length == 0 || cfg.min_length > cfg.max_length)
        throw FormatError("filter config: need 0 < min_length <= max_length");
    return cfg;
}

QaConfig parse_qa_config(const ordered_json& j) {
    QaConfig cfg;
    cfg.tremble_max = j.value("tremble_max", 1.0);
    cfg.sharpness_min = j.value("sharpness_min", 0.0);
    cfg.smoothing_sigma = j.value("smoothing_sigma", 2.0);
    cfg.frame_sample_budget = j.value("frame_sample_budget", std::size_t{16});
    if (j.contains("gripper_pattern"))
        cfg.gripper_pattern = j.at("gripper_pattern").get<std::vector<std::string>>();
    cfg.gripper_channel = j.value("gripper_channel", -1);
    cfg.gripper_lo = j.value("gripper_lo", 0.3);
    cfg.gripper_hi = j.value("gripper_hi", 0.7);
    cfg.sharpness_camera = j.value("sharpness_camera", std::string{});
    return cfg;
}

UnifiedLayout load_layout(const std::string& spec) {
    if (spec.empty() || spec == "default") return UnifiedLayout::default_layout();
    return UnifiedLayout::from_json_file(spec);
}

ordered_json quality_report_json(const QualityReport& rep) {
    ordered_json j;
    j["episode_id"] = rep.episode_id;
    j["tremble"] = rep.tremble;
    j["sharpness"] = rep.sharpness;
    j["visual_diversity"] = rep.visual_diversity;
    j["state_diversity"] = rep.state_diversity;
    j["motion"] = rep.motion;
    j["gripper_pattern_ok"] = rep.gripper_pattern_ok;
    j["accepted"] = rep.accepted;
    j["reject_reasons"] = rep.reject_reasons;
    return j;
}

void write_f32(const fs::path& path, const Matrix& m) {
    std::vector<float> raw(m.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(m.data[i]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

int cmd_validate(const std::string& in, const std::string& out,
                 const std::string& config, unsigned jobs) {
    const FilterConfig cfg = parse_filter_config(load_json(config));
    const auto packs = list_packs(in);
    std::vector<ordered_json> rows(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        const ValidationResult res = validate_episode(ep, cfg);
        ordered_json j;
        j["episode_id"] = ep.id;
        j["passed"] = res.passed;
        j["reasons"] = ordered_json::array();
        for (auto r : res.reasons) j["reasons"].push_back(to_string(r));
        rows[i] = std::move(j);
    });
    std::sort(rows.begin(), rows.end(), [](const ordered_json& a, const ordered_json& b) {
        return a.at("episode_id") < b.at("episode_id");
    });
    write_json(fs::path(out) / "validate_report.json", rows);
    return 0;
}

int cmd_qa(const std::string& in, const std::string& out, const std::string& config,
           unsigned jobs) {
    const ordered_json j = load_json(config);
    const QaConfig qa = parse_qa_config(j.value("qa", ordered_json::object()));
    const FilterConfig filt = parse_filter_config(j.value("filter", ordered_json::object()));

    const auto packs = list_packs(in);
    std::vector<QualityReport> reports(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        reports[i] = qa_episode(load_episode(packs[i]), qa, filt);
    });
    std::sort(reports.begin(), reports.end(),
              [](const QualityReport& a, const QualityReport& b) {
                  return a.episode_id < b.episode_id;
              });

    ordered_json rows = ordered_json::array();
    for (const auto& rep : reports) rows.push_back(quality_report_json(rep));
    write_json(fs::path(out) / "qa_report.json", rows);

    ordered_json summary;
    double tremble = 0, sharp = 0, dvis = 0, dstate = 0;
    std::size_t accepted = 0;
    for (const auto& rep : reports) {
        tremble += rep.tremble;
        sharp += rep.sharpness;
        dvis += rep.visual_diversity;
        dstate += rep.state_diversity;
        if (rep.accepted) ++accepted;
    }
    const double n = reports.empty() ? 1.0 : static_cast<double>(reports.size());
    summary["episodes"] = reports.size();
    summary["accepted"] = accepted;
    summary["D_vis"] = dvis / n;
    summary["D_state"] = dstate / n;
    summary["S_sharp"] = sharp / n;
    summary["S_tremble"] = tremble / n;
    write_json(fs::path(out) / "dataset_summary.json", summary);
    return 0;
}

int cmd_align(const std::string& in, const std::string& out, const std::string& config,
              const std::string& dataset_id, double factor, bool apply, unsigned jobs) {
    const ordered_json j = load_json(config);
    const double reference_flow = j.at("reference_flow").get<double>();
    const std::string camera = j.value("camera", std::string{});

    const auto packs = list_packs(in);
    std::vector<double> flows(packs.size(), 0.0);
    std::vector<Episode> episodes(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        episodes[i] = load_episode(packs[i]);
        const auto& cams = episodes[i].cameras;
        auto it = camera.empty() ? cams.begin() : cams.find(camera);
        if (it == cams.end() || it->second.size() < 2) return;
        flows[i] = mean_flow_magnitude(it->second).mean_magnitude;
    });

    double mean_flow = 0.0;
    std::size_t counted = 0;
    for (double f : flows)
        if (f > 0.0) {
            mean_flow += f;
            ++counted;
        }
    if (counted > 0) mean_flow /= static_cast<double>(counted);

    AlignmentFactor af;
    if (factor > 0.0) {
        af.stride = factor;
    } else {
        af = alignment_factor(mean_flow, reference_flow);
    }

    ordered_json plan;
    plan["dataset_id"] = dataset_id;
    plan["mean_flow"] = mean_flow;
    plan["reference_flow"] = reference_flow;
    plan["stride_f"] = af.stride;
    plan["degenerate"] = af.degenerate;
    write_json(fs::path(out) / "align_plan.json", plan);

    if (apply) {
        parallel_for(packs.size(), jobs, [&](std::size_t i) {
            Episode ep = episodes[i];
            if (ep.length() < 2) return;
            ep.states = resample_trajectory(ep.states, af.stride);
            ep.actions = resample_trajectory(ep.actions, af.stride);
            const std::size_t M = ep.states.rows;
            for (auto& [name, frames] : ep.cameras) {
                std::vector<Image> resampled;
                resampled.reserve(M);
                for (std::size_t k = 0; k < M; ++k) {
                    const auto idx = static_cast<std::size_t>(
                        std::llround(std::min(static_cast<double>(k) * af.stride,
                                              static_cast<double>(frames.size() - 1))));
                    resampled.push_back(frames[std::min(idx, frames.size() - 1)]);
                }
                frames = std::move(resampled);
            }
            ep.metadata["align_stride"] = std::to_string(af.stride);
            save_episode(ep, fs::path(out) / "packs" / ep.id);
        });
    }
    return 0;
}

int cmd_unify(const std::string& in, const std::string& out, const std::string& config,
              unsigned jobs) {
    const ordered_json j = load_json(config);
    const fs::path desc_dir = j.at("descriptor_dir").get<std::string>();

    const auto packs = list_packs(in);
    std::vector<ordered_json> rows(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        const auto desc =
            EmbodimentDescriptor::from_json_file(desc_dir / (ep.embodiment_id + ".json"));
        Matrix unified(ep.actions.rows, kUnifiedDim);
        for (std::size_t t = 0; t < ep.actions.rows; ++t) {
            std::vector<double> native(ep.actions.row(t),
                                       ep.actions.row(t) + ep.actions.cols);
            const UnifiedAction u = map_to_unified(native, desc);
            for (std::size_t d = 0; d < kUnifiedDim; ++d) unified(t, d) = u.values[d];
        }
        write_f32(fs::path(out) / (ep.id + ".unified.f32"), unified);
        ordered_json row;
        row["episode_id"] = ep.id;
        row["embodiment_id"] = ep.embodiment_id;
        row["prompt"] = control_prompt(desc);
        row["T"] = ep.actions.rows;
        rows[i] = std::move(row);
    });
    std::sort(rows.begin(), rows.end(), [](const ordered_json& a, const ordered_json& b) {
        return a.at("episode_id") < b.at("episode_id");
    });
    write_json(fs::path(out) / "unify_report.json", rows);
    return 0;
}

int cmd_retarget(const std::string& in, const std::string& out,
                 const std::string& config, unsigned jobs) {
    const ordered_json j = load_json(config);
    const UnifiedLayout layout = load_layout(j.value("layout", std::string{"default"}));
    const fs::path desc_dir = j.at("descriptor_dir").get<std::string>();
    const auto dst =
        EmbodimentDescriptor::from_json_file(desc_dir / (j.at("dst").get<std::string>() + ".json"));
    std::vector<RetargetRule> rules;
    if (j.contains("rules"))
        for (const auto& jr : j.at("rules"))
            rules.push_back({jr.at("src_slot").get<int>(), jr.at("dst_slot").get<int>(),
                             jr.value("scale", 1.0), jr.value("offset", 0.0)});

    const auto packs = list_packs(in);
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        const auto src =
            EmbodimentDescriptor::from_json_file(desc_dir / (ep.embodiment_id + ".json"));
        const Episode r = retarget(ep, src, dst, layout, rules);
        save_episode(r, fs::path(out) / r.id);
    });
    return 0;
}

int cmd_augment(const std::string& in, const std::string& out,
                const std::string& config, const std::string& mode, unsigned jobs) {
    const ordered_json j = load_json(config);
    const UnifiedLayout layout = load_layout(j.value("layout", std::string{"default"}));
    const fs::path desc_dir = j.at("descriptor_dir").get<std::string>();
    AugmentConfig cfg = j.contains("augment_file")
                            ? AugmentConfig::from_json_file(j.at("augment_file").get<std::string>())
                            : AugmentConfig::defaults();

    const bool do_mirror = mode == "mirror" || mode == "both";
    const bool do_reverse = mode == "reverse" || mode == "both";

    const auto packs = list_packs(in);
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        if (do_mirror) {
            const auto desc = EmbodimentDescriptor::from_json_file(
                desc_dir / (ep.embodiment_id + ".json"));
            const Episode m = mirror_episode(ep, layout, desc, cfg);
            save_episode(m, fs::path(out) / m.id);
        }
        if (do_reverse && instruction_reversible(ep.instruction, cfg)) {
            const Episode r = reverse_episode(ep, cfg);
            save_episode(r, fs::path(out) / r.id);
        }
    });
    return 0;
}

int cmd_sample_plan(const std::string& config, double alpha_override, long step,
                    long draws, std::uint64_t seed_override, bool have_seed) {
    SamplerSchedule sched = SamplerSchedule::from_json_file(config);
    if (have_seed) sched.seed = seed_override;

    if (draws > 0) {
        const auto plan =
            sample_plan(sched, static_cast<std::size_t>(std::max(step, 0L)),
                        static_cast<std::size_t>(draws));
        std::cout << "draw,dataset_id\n";
        for (std::size_t i = 0; i < plan.size(); ++i)
            std::cout << i << "," << sched.dataset_ids[plan[i]] << "\n";
        return 0;
    }

    const double alpha = alpha_override >= 0.0
                             ? alpha_override
                             : ramp_alpha(static_cast<std::size_t>(std::max(step, 0L)),
                                          sched.ramp_steps);
    const auto w = mixture_weights(sched.target_weights, alpha);
    std::cout << "dataset_id,weight\n";
    char buf[64];
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10f", w[i]);
        std::cout << sched.dataset_ids[i] << "," << buf << "\n";
    }
    return 0;
}

int cmd_fit_ood(const std::string& in, const std::string& out,
                const std::string& config) {
    const ordered_json j = load_json(config);
    GmmFitOptions opts;
    opts.standardize = j.value("standardize", true);
    opts.tau_quantile = j.value("quantile", 0.005);
    opts.alpha_step = j.value("alpha_step", 0.2);
    const auto K = j.value("K", std::size_t{4});
    const auto seed = j.value("seed", std::uint64_t{0});

    const auto packs = list_packs(in);
    if (packs.empty()) throw IoError("fit-ood: no EpisodePacks under " + in);
    std::vector<Episode> eps;
    for (const auto& p : packs) eps.push_back(load_episode(p));
    const std::size_t D = eps.front().states.cols;
    std::size_t total = 0;
    for (const auto& ep : eps) {
        if (ep.states.cols != D)
            throw FormatError("fit-ood: state dimension differs across episodes");
        total += ep.states.rows;
    }
    Matrix all(total, D);
    std::size_t row = 0;
    for (const auto& ep : eps)
        for (std::size_t t = 0; t < ep.states.rows; ++t, ++row)
            for (std::size_t d = 0; d < D; ++d) all(row, d) = ep.states(t, d);

    const GmmFitResult fit = fit_gmm(all, K, seed, opts);
    fs::create_directories(out);
    fit.model.save_json(fs::path(out) / "gmm_model.json");
    return 0;
}

int cmd_ood_check(const std::string& in, const std::string& out,
                  const std::string& config, unsigned jobs) {
    const GmmDensityModel model = GmmDensityModel::from_json_file(config);
    const auto packs = list_packs(in);
    std::vector<ordered_json> rows(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        ordered_json flagged = ordered_json::array();
        for (std::size_t t = 0; t < ep.states.rows; ++t) {
            std::vector<double> s(ep.states.row(t), ep.states.row(t) + ep.states.cols);
            const OodCorrection c = ood_correct(model, s);
            if (c.corrected) {
                ordered_json e;
                e["t"] = t;
                e["density"] = c.density;
                e["corrected_state"] = c.state;
                flagged.push_back(std::move(e));
            }
        }
        ordered_json row;
        row["episode_id"] = ep.id;
        row["states"] = ep.states.rows;
        row["ood_count"] = flagged.size();
        row["flagged"] = std::move(flagged);
        rows[i] = std::move(row);
    });
    std::sort(rows.begin(), rows.end(), [](const ordered_json& a, const ordered_json& b) {
        return a.at("episode_id") < b.at("episode_id");
    });
    write_json(fs::path(out) / "ood_report.json", rows);
    return 0;
}

int cmd_progress(const std::string& in, const std::string& out, unsigned jobs) {
    const auto packs = list_packs(in);
    std::vector<ordered_json> rows(packs.size());
    parallel_for(packs.size(), jobs, [&](std::size_t i) {
        const Episode ep = load_episode(packs[i]);
        ordered_json row;
        row["episode_id"] = ep.id;
        row["labels"] = progress_labels(ep.length());
        rows[i] = std::move(row);
    });
    std::sort(rows.begin(), rows.end(), [](const ordered_json& a, const ordered_json& b) {
        return a.at("episode_id") < b.at("episode_id");
    });
    write_json(fs::path(out) / "progress.json", rows);
    return 0;
}

int cmd_refine(const std::string& in, const std::string& out,
               const std::string& config) {
    const ordered_json j = load_json(config);
    RefineConfig cfg;
    cfg.eta = j.value("eta", 0.05);
    cfg.n_steps = j.value("n_steps", std::size_t{5});
    cfg.grad_floor = j.value("grad_floor", 1e-9);

    std::unique_ptr<Critic> critic;
    const auto& jc = j.at("critic");
    const auto type = jc.at("type").get<std::string>();
    if (type == "quadratic") {
        critic = std::make_unique<QuadraticCritic>(
            jc.at("maximizer").get<std::vector<double>>());
    } else if (type == "gmm") {
        critic = std::make_unique<GmmLogDensityCritic>(
            GmmDensityModel::from_json_file(jc.at("model").get<std::string>()));
    } else {
        throw FormatError("refine: unknown critic type: " + type);
    }

    const ordered_json traj_json = load_json(in);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> traj;
    for (const auto& js : traj_json.at("steps"))
        traj.emplace_back(js.at("s").get<std::vector<double>>(),
                          js.at("a").get<std::vector<double>>());

    const RefinedTrajectory refined = refine_trajectory(*critic, traj, cfg);

    ordered_json report;
    report["steps"] = ordered_json::array();
    for (std::size_t t = 0; t < refined.report.size(); ++t) {
        const auto& rep = refined.report[t];
        ordered_json e;
        e["q_before"] = rep.q_before;
        e["q_after"] = rep.q_after;
        e["grad_norm"] = rep.grad_norm;
        e["steps_taken"] = rep.steps_taken;
        e["action"] = refined.actions[t];
        report["steps"].push_back(std::move(e));
    }
    write_json(fs::path(out) / "refine_report.json", report);
    return 0;
}

int cmd_summary(const std::string& in, const std::string& out) {
    const ordered_json rows = load_json(fs::path(in) / "qa_report.json");
    ordered_json summary;
    double tremble = 0, sharp = 0, dvis = 0, dstate = 0;
    std::size_t accepted = 0;
    for (const auto& r : rows) {
        tremble += r.at("tremble").get<double>();
        sharp += r.at("sharpness").get<double>();
        dvis += r.at("visual_diversity").get<double>();
        dstate += r.at("state_diversity").get<double>();
        if (r.at("accepted").get<bool>()) ++accepted;
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    summary["episodes"] = rows.size();
    summary["accepted"] = accepted;
    summary["D_vis"] = dvis / n;
    summary["D_state"] = dstate / n;
    summary["S_sharp"] = sharp / n;
    summary["S_tremble"] = tremble / n;
    write_json(fs::path(out) / "dataset_summary.json", summary);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"demostack: robot demonstration curation and control-support pipelines"};
    app.require_subcommand(1);

    std::string in, out = ".", config, dataset_id = "dataset", mode = "both";
    unsigned jobs = 1;
    double alpha = -1.0, factor = 0.0;
    long step = 0, draws = 0;
    std::uint64_t seed = 0;
    bool apply = false;

    auto add_common = [&](CLI::App* cmd, bool needs_in, bool needs_config) {
        if (needs_in) cmd->add_option("--in", in, "input directory or file")->required();
        cmd->add_option("--out", out, "output directory");
        if (needs_config)
            cmd->add_option("--config", config, "JSON config file")->required();
        cmd->add_option("--jobs", jobs, "episode-level parallelism");
    };

    auto* validate = app.add_subcommand("validate", "structural episode validation");
    add_common(validate, true, true);
    auto* qa = app.add_subcommand("qa", "episode quality scores and verdicts");
    add_common(qa, true, true);
    auto* align = app.add_subcommand("align", "flow-based temporal alignment plan");
    add_common(align, true, true);
    align->add_option("--dataset-id", dataset_id, "dataset id for the plan");
    align->add_option("--factor", factor, "force a resampling stride");
    align->add_flag("--apply", apply, "write resampled packs");
    auto* unify = app.add_subcommand("unify", "map native actions into unified slots");
    add_common(unify, true, true);
    auto* retarget_cmd = app.add_subcommand("retarget", "retarget packs to a new embodiment");
    add_common(retarget_cmd, true, true);
    auto* augment_cmd = app.add_subcommand("augment", "mirror/time-reversal variants");
    add_common(augment_cmd, true, true);
    augment_cmd->add_option("--mode", mode, "mirror | reverse | both");
    auto* sample = app.add_subcommand("sample-plan", "scheduled mixture weights or draws");
    sample->add_option("--config", config, "sampler JSON config")->required();
    sample->add_option("--alpha", alpha, "override mixture alpha");
    sample->add_option("--step", step, "training step for the ramp");
    sample->add_option("--draws", draws, "emit this many sampled dataset indices");
    auto* seed_opt = sample->add_option("--seed", seed, "override schedule seed");
    auto* fit_ood = app.add_subcommand("fit-ood", "fit the state-density GMM");
    add_common(fit_ood, true, true);
    auto* ood_check = app.add_subcommand("ood-check", "density check and correction");
    add_common(ood_check, true, true);
    auto* progress = app.add_subcommand("progress", "episode progress labels");
    add_common(progress, true, false);
    auto* refine = app.add_subcommand("refine", "Q-gradient trajectory refinement");
    add_common(refine, true, true);
    auto* summary = app.add_subcommand("summary", "aggregate qa reports");
    summary->add_option("--in", in, "directory with qa_report.json")->required();
    summary->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(in, out, config, jobs);
        if (qa->parsed()) return cmd_qa(in, out, config, jobs);
        if (align->parsed())
            return cmd_align(in, out, config, dataset_id, factor, apply, jobs);
        if (unify->parsed()) return cmd_unify(in, out, config, jobs);
        if (retarget_cmd->parsed()) return cmd_retarget(in, out, config, jobs);
        if (augment_cmd->parsed()) return cmd_augment(in, out, config, mode, jobs);
        if (sample->parsed())
            return cmd_sample_plan(config, alpha, step, draws, seed, seed_opt->count() > 0);
        if (fit_ood->parsed()) return cmd_fit_ood(in, out, config);
        if (ood_check->parsed()) return cmd_ood_check(in, out, config, jobs);
        if (progress->parsed()) return cmd_progress(in, out, jobs);
        if (refine->parsed()) return cmd_refine(in, out, config);
        if (summary->parsed()) return cmd_summary(in, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
