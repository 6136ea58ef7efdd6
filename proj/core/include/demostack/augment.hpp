#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "demostack/episode.hpp"
#include "demostack/unify.hpp"

namespace demostack {

struct ReversalTemplate {
    std::string match;   // single '*' wildcard, e.g. "pick * from the table"
    std::string rewrite; // e.g. "place * on the table"
};

struct AugmentConfig {
    std::vector<ReversalTemplate> reversible_skills;
    std::vector<std::pair<std::string, std::string>> swap_lexicon; // e.g. {"left","right"}

    static AugmentConfig defaults();
    static AugmentConfig from_json_file(const std::filesystem::path& path);
};

/// True when the instruction matches one of the reversal templates.
bool instruction_reversible(const std::string& instruction, const AugmentConfig& cfg);

/// Single-pass swap of lexicon pairs ("left" <-> "right") via placeholders.
std::string swap_instruction_terms(const std::string& instruction,
                                   const AugmentConfig& cfg);

/// Bilateral mirror: unified slots permuted by mirror_partner and signed,
/// left/right camera streams swapped, every frame horizontally flipped,
/// instruction terms swapped.
Episode mirror_episode(const Episode& ep, const UnifiedLayout& layout,
                       const EmbodimentDescriptor& desc, const AugmentConfig& cfg);

/// Time reversal for reversible skills: streams reversed, actions reassigned
/// so each action drives the reversed state sequence forward, instruction
/// rewritten per template.
Episode reverse_episode(const Episode& ep, const AugmentConfig& cfg);

} // namespace demostack
