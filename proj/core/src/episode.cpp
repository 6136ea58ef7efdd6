#include "demostack/episode.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "demostack/errors.hpp"

namespace demostack {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.pgm", index);
    return buf;
}

// Little-endian f32 stream, row-major.
Matrix read_f32_matrix(const std::filesystem::path& path, std::size_t rows,
                       std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing stream file: " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    const std::size_t expected = rows * cols * sizeof(float);
    if (bytes != expected)
        throw FormatError(path.string() + ": expected " + std::to_string(expected) +
                          " bytes for " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", found " + std::to_string(bytes));
    std::vector<float> raw(rows * cols);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
    if (!in) throw IoError("failed reading " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : raw) {
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&v, &u, 4);
        }
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < raw.size(); ++i) m.data[i] = raw[i];
    return m;
}

void write_f32_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::vector<float> raw(m.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(m.data[i]);
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : raw) {
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&v, &u, 4);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace

std::string to_string(ActionSemantics sem) {
    return sem == ActionSemantics::absolute_target ? "absolute_target" : "delta";
}

ActionSemantics action_semantics_from_string(const std::string& s) {
    if (s == "absolute_target") return ActionSemantics::absolute_target;
    if (s == "delta") return ActionSemantics::delta;
    throw FormatError("unknown action_semantics: " + s);
}

std::string to_string(ValidationReason r) {
    switch (r) {
        case ValidationReason::missing_camera: return "missing_camera";
        case ValidationReason::missing_frames: return "missing_frames";
        case ValidationReason::too_short: return "too_short";
        case ValidationReason::too_long: return "too_long";
        case ValidationReason::low_motion: return "low_motion";
        case ValidationReason::bad_stream_shape: return "bad_stream_shape";
    }
    return "unknown";
}

double motion_activity(const Matrix& states, double fps) {
    if (states.rows < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < states.rows; ++t)
        for (std::size_t d = 0; d < states.cols; ++d)
            sum += std::abs(states(t + 1, d) - states(t, d));
    const double n = static_cast<double>((states.rows - 1) * states.cols);
    return sum / n * fps;
}

Episode load_episode(const std::filesystem::path& path) {
    const auto manifest_path = path / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("missing manifest: " + manifest_path.string());

    ordered_json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest " + manifest_path.string() + ": " + e.what());
    }

    Episode ep;
    try {
        ep.id = manifest.at("id").get<std::string>();
        ep.embodiment_id = manifest.at("embodiment_id").get<std::string>();
        ep.fps = manifest.at("fps").get<double>();
        ep.instruction = manifest.at("instruction").get<std::string>();
        ep.reversible = manifest.at("reversible").get<bool>();
        ep.action_semantics =
            action_semantics_from_string(manifest.at("action_semantics").get<std::string>());
        if (manifest.contains("metadata"))
            for (const auto& [k, v] : manifest.at("metadata").items())
                ep.metadata[k] = v.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest field in " + manifest_path.string() + ": " + e.what());
    }
    if (ep.fps <= 0.0) throw FormatError("fps must be positive in " + manifest_path.string());

    const auto T = manifest.at("T").get<std::size_t>();
    const auto state_dim = manifest.at("state_dim").get<std::size_t>();
    const auto action_dim = manifest.at("action_dim").get<std::size_t>();
    if (T < 1) throw FormatError("T must be >= 1 in " + manifest_path.string());

    ep.states = read_f32_matrix(path / "states.f32", T, state_dim);
    ep.actions = read_f32_matrix(path / "actions.f32", T, action_dim);

    for (const auto& cam : manifest.at("cameras")) {
        const auto name = cam.at("name").get<std::string>();
        const int width = cam.at("width").get<int>();
        const int height = cam.at("height").get<int>();
        std::vector<Image> frames;
        const auto dir = path / "cameras" / name;
        for (std::size_t t = 0; t < T; ++t) {
            const auto frame_path = dir / frame_name(t);
            if (!std::filesystem::exists(frame_path)) break;
            Image img = read_pgm(frame_path);
            if (img.width != width || img.height != height)
                throw FormatError(frame_path.string() + ": frame is " +
                                  std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  ", manifest declares " + std::to_string(width) + "x" +
                                  std::to_string(height));
            frames.push_back(std::move(img));
        }
        ep.cameras[name] = std::move(frames);
    }
    return ep;
}

void save_episode(const Episode& ep, const std::filesystem::path& path) {
    std::filesystem::create_directories(path);

    ordered_json manifest;
    manifest["id"] = ep.id;
    manifest["embodiment_id"] = ep.embodiment_id;
    manifest["fps"] = ep.fps;
    manifest["instruction"] = ep.instruction;
    manifest["T"] = ep.states.rows;
    manifest["state_dim"] = ep.states.cols;
    manifest["action_dim"] = ep.actions.cols;
    manifest["cameras"] = ordered_json::array();
    for (const auto& [name, frames] : ep.cameras) {
        ordered_json cam;
        cam["name"] = name;
        cam["width"] = frames.empty() ? 0 : frames.front().width;
        cam["height"] = frames.empty() ? 0 : frames.front().height;
        manifest["cameras"].push_back(cam);
    }
    manifest["reversible"] = ep.reversible;
    manifest["action_semantics"] = to_string(ep.action_semantics);
    if (!ep.metadata.empty()) {
        ordered_json meta;
        for (const auto& [k, v] : ep.metadata) meta[k] = v;
        manifest["metadata"] = meta;
    }

    {
        std::ofstream out(path / "manifest.json");
        if (!out) throw IoError("cannot write manifest in " + path.string());
        out << manifest.dump(2) << "\n";
    }

    write_f32_matrix(path / "states.f32", ep.states);
    write_f32_matrix(path / "actions.f32", ep.actions);

    for (const auto& [name, frames] : ep.cameras) {
        const auto dir = path / "cameras" / name;
        std::filesystem::create_directories(dir);
        for (std::size_t t = 0; t < frames.size(); ++t)
            write_pgm(dir / frame_name(t), frames[t]);
    }
}

ValidationResult validate_episode(const Episode& ep, const FilterConfig& cfg) {
    ValidationResult res;
    const std::size_t T = ep.length();

    if (T < cfg.min_length) res.reasons.push_back(ValidationReason::too_short);
    if (T > cfg.max_length) res.reasons.push_back(ValidationReason::too_long);

    if (ep.actions.rows != T)
        res.reasons.push_back(ValidationReason::bad_stream_shape);

    bool missing_camera = false;
    bool missing_frames = false;
    bool bad_shape = false;
    for (const auto& name : cfg.required_cameras) {
        auto it = ep.cameras.find(name);
        if (it == ep.cameras.end()) {
            missing_camera = true;
            continue;
        }
        if (it->second.size() != T) missing_frames = true;
    }
    for (const auto& [name, frames] : ep.cameras) {
        if (frames.size() != T) missing_frames = true;
        for (const auto& f : frames)
            if (!frames.empty() &&
                (f.width != frames.front().width || f.height != frames.front().height))
                bad_shape = true;
    }
    if (missing_camera) res.reasons.push_back(ValidationReason::missing_camera);
    if (missing_frames) res.reasons.push_back(ValidationReason::missing_frames);
    if (bad_shape) res.reasons.push_back(ValidationReason::bad_stream_shape);

    if (cfg.motion_threshold > 0.0 &&
        motion_activity(ep.states, ep.fps) < cfg.motion_threshold)
        res.reasons.push_back(ValidationReason::low_motion);

    std::sort(res.reasons.begin(), res.reasons.end());
    res.reasons.erase(std::unique(res.reasons.begin(), res.reasons.end()),
                      res.reasons.end());
    res.passed = res.reasons.empty();
    return res;
}

} // namespace demostack
