#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "demostack/image.hpp"
#include "demostack/matrix.hpp"

namespace demostack {

enum class ActionSemantics { absolute_target, delta };

std::string to_string(ActionSemantics sem);
ActionSemantics action_semantics_from_string(const std::string& s);

/// One demonstration: synchronized state/action trajectories plus camera
/// streams. Immutable by convention after load; transforms return copies.
struct Episode {
    std::string id;
    std::string embodiment_id;
    double fps = 0.0;
    std::string instruction;
    Matrix states;  // T x state_dim
    Matrix actions; // T x action_dim
    std::map<std::string, std::vector<Image>> cameras;
    bool reversible = false;
    ActionSemantics action_semantics = ActionSemantics::absolute_target;
    std::map<std::string, std::string> metadata;

    std::size_t length() const { return states.rows; }
};

enum class ValidationReason {
    missing_camera,
    missing_frames,
    too_short,
    too_long,
    low_motion,
    bad_stream_shape,
};

std::string to_string(ValidationReason r);

struct ValidationResult {
    bool passed = false;
    std::vector<ValidationReason> reasons;
};

struct FilterConfig {
    std::size_t min_length = 1;
    std::size_t max_length = 100000;
    std::vector<std::string> required_cameras;
    double motion_threshold = 0.0; // state-units per second
};

/// Mean over steps and dims of |s_{t+1} - s_t|, times fps. Zero for T < 2.
double motion_activity(const Matrix& states, double fps);

/// Reads an EpisodePack directory (manifest.json + raw streams + PGM frames).
/// Camera streams shorter than T load with however many leading frames exist;
/// validate_episode flags the shortfall.
Episode load_episode(const std::filesystem::path& path);

/// Writes an EpisodePack directory. Round-trips bit-exactly through
/// load_episode.
void save_episode(const Episode& ep, const std::filesystem::path& path);

ValidationResult validate_episode(const Episode& ep, const FilterConfig& cfg);

} // namespace demostack
