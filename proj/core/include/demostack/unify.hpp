#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demostack/episode.hpp"

namespace demostack {

inline constexpr std::size_t kUnifiedDim = 64;

enum class SlotGroup {
    left_arm,
    right_arm,
    left_grasp,
    right_grasp,
    left_hand,
    right_hand,
    left_ee,
    right_ee,
    torso,
    head,
    base,
    reserved,
};

std::string to_string(SlotGroup g);
SlotGroup slot_group_from_string(const std::string& s);

struct SlotSpec {
    int index = 0;
    std::string semantic_id;
    std::string unit;
    int mirror_partner = 0; // index; equal to index when self-mirrored
    int mirror_sign = 1;    // +1 or -1
    SlotGroup group = SlotGroup::reserved;
};

/// The fixed 64-slot semantic layout shared by all embodiments.
class UnifiedLayout {
public:
    static UnifiedLayout default_layout();
    static UnifiedLayout from_json_file(const std::filesystem::path& path);

    explicit UnifiedLayout(std::vector<SlotSpec> slots);

    const SlotSpec& slot(std::size_t index) const { return slots_[index]; }
    const std::vector<SlotSpec>& slots() const { return slots_; }

    void save_json(const std::filesystem::path& path) const;

private:
    std::vector<SlotSpec> slots_;
};

enum class EndEffector { gripper, dex_hand };
enum class ControlType { joint, cartesian };
enum class BaseType { mobile, static_base };

struct PromptFields {
    int arms = 0;
    int hands = 0;
    EndEffector end_effector = EndEffector::gripper;
    ControlType ctrl = ControlType::joint;
    BaseType base = BaseType::static_base;
};

struct DimMapping {
    int native_index = 0;
    int slot_index = 0;
    double scale = 1.0;
    double offset = 0.0;
};

/// Per-robot mapping of native action dimensions into unified slots, plus the
/// slot mask and the control-prompt fields.
class EmbodimentDescriptor {
public:
    EmbodimentDescriptor(std::string embodiment_id, std::vector<DimMapping> dims,
                         PromptFields prompt);

    static EmbodimentDescriptor from_json_file(const std::filesystem::path& path);
    void save_json(const std::filesystem::path& path) const;

    const std::string& embodiment_id() const { return id_; }
    const std::vector<DimMapping>& dims() const { return dims_; }
    const std::array<bool, kUnifiedDim>& mask() const { return mask_; }
    const PromptFields& prompt() const { return prompt_; }
    std::size_t native_dim() const { return dims_.size(); }
    std::size_t masked_count() const;

private:
    std::string id_;
    std::vector<DimMapping> dims_; // sorted by native_index
    std::array<bool, kUnifiedDim> mask_{};
    PromptFields prompt_;
};

struct UnifiedAction {
    std::array<double, kUnifiedDim> values{};
    std::array<bool, kUnifiedDim> mask{};
};

UnifiedAction map_to_unified(const std::vector<double>& native,
                             const EmbodimentDescriptor& desc);

std::vector<double> map_from_unified(const UnifiedAction& u,
                                     const EmbodimentDescriptor& desc);

/// Mean squared difference over masked slots only.
double masked_bc_loss(const std::array<double, kUnifiedDim>& pred,
                      const std::array<double, kUnifiedDim>& target,
                      const std::array<bool, kUnifiedDim>& mask);

/// (valid, spurious): mean squared difference over masked and unmasked slots
/// respectively. Diagnostic for the cost of naive zero-padding.
std::pair<double, double> padding_loss_decomposition(
    const std::array<double, kUnifiedDim>& pred,
    const std::array<double, kUnifiedDim>& padded_target,
    const std::array<bool, kUnifiedDim>& mask);

/// Canonical serialization, e.g.
/// "arms=2;hands=2;ee=dex;ctrl=joint;base=static;slots=0-13,16-39".
std::string control_prompt(const EmbodimentDescriptor& desc);

struct ParsedPrompt {
    PromptFields fields;
    std::array<bool, kUnifiedDim> mask{};
};

ParsedPrompt parse_control_prompt(const std::string& prompt);

/// Standard-normal draw of dimension k embedded into the masked slots in
/// ascending slot order; zeros elsewhere. Reproducible per seed.
std::array<double, kUnifiedDim> localize_noise(std::size_t k,
                                               const EmbodimentDescriptor& desc,
                                               std::uint64_t seed);

/// Optional per-slot substitution applied in unified space when the target
/// embodiment does not map a source slot directly.
struct RetargetRule {
    int src_slot = 0;
    int dst_slot = 0;
    double scale = 1.0;
    double offset = 0.0;
};

Episode retarget(const Episode& ep, const EmbodimentDescriptor& src,
                 const EmbodimentDescriptor& dst, const UnifiedLayout& layout,
                 const std::vector<RetargetRule>& rules = {});

} // namespace demostack
