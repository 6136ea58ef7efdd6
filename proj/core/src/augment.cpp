#include "demostack/augment.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "demostack/errors.hpp"

namespace demostack {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    if (from.empty()) return;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// Matches a template with a single '*' wildcard; captures the wildcard text.
bool template_match(const std::string& text, const std::string& pattern,
                    std::string& captured) {
    const auto star = pattern.find('*');
    if (star == std::string::npos) {
        captured.clear();
        return text == pattern;
    }
    const std::string prefix = pattern.substr(0, star);
    const std::string suffix = pattern.substr(star + 1);
    if (text.size() < prefix.size() + suffix.size()) return false;
    if (text.compare(0, prefix.size(), prefix) != 0) return false;
    if (text.compare(text.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
    captured = text.substr(prefix.size(), text.size() - prefix.size() - suffix.size());
    return true;
}

std::string apply_template(const std::string& rewrite, const std::string& captured) {
    std::string out = rewrite;
    replace_all(out, "*", captured);
    return out;
}

} // namespace

AugmentConfig AugmentConfig::defaults() {
    AugmentConfig cfg;
    cfg.reversible_skills = {
        {"pick * from the table", "place * on the table"},
        {"place * on the table", "pick * from the table"},
        {"hand over *", "take back *"},
        {"take back *", "hand over *"},
        {"move * from left hand to right hand", "move * from right hand to left hand"},
        {"move * from right hand to left hand", "move * from left hand to right hand"},
        {"take * from the hand", "give * to the hand"},
        {"give * to the hand", "take * from the hand"},
    };
    cfg.swap_lexicon = {{"left", "right"}};
    return cfg;
}

AugmentConfig AugmentConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open augment config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    AugmentConfig cfg;
    try {
        for (const auto& jt : j.at("reversible_skills"))
            cfg.reversible_skills.push_back(
                {jt.at("match").get<std::string>(), jt.at("rewrite").get<std::string>()});
        for (const auto& jp : j.at("swap_lexicon"))
            cfg.swap_lexicon.emplace_back(jp.at(0).get<std::string>(),
                                          jp.at(1).get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return cfg;
}

bool instruction_reversible(const std::string& instruction, const AugmentConfig& cfg) {
    std::string captured;
    for (const auto& t : cfg.reversible_skills)
        if (template_match(instruction, t.match, captured)) return true;
    return false;
}

std::string swap_instruction_terms(const std::string& instruction,
                                   const AugmentConfig& cfg) {
    std::string out = instruction;
    for (std::size_t i = 0; i < cfg.swap_lexicon.size(); ++i) {
        const auto& [a, b] = cfg.swap_lexicon[i];
        const std::string placeholder = "\x01" + std::to_string(i) + "\x02";
        replace_all(out, a, placeholder);
        replace_all(out, b, a);
        replace_all(out, placeholder, b);
    }
    return out;
}

Episode mirror_episode(const Episode& ep, const UnifiedLayout& layout,
                       const EmbodimentDescriptor& desc, const AugmentConfig& cfg) {
    // The permuted vector must stay representable in the same descriptor.
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        if (!desc.mask()[i]) continue;
        const auto partner = static_cast<std::size_t>(layout.slot(i).mirror_partner);
        if (!desc.mask()[partner])
            throw LayoutError("mirror_episode: slot " + std::to_string(i) + " (" +
                              layout.slot(i).semantic_id + ") has unmasked mirror partner " +
                              std::to_string(partner));
    }

    auto mirror_row = [&](const double* row, std::size_t n) {
        std::vector<double> native(row, row + n);
        const UnifiedAction u = map_to_unified(native, desc);
        UnifiedAction v;
        v.mask = u.mask;
        for (std::size_t i = 0; i < kUnifiedDim; ++i) {
            if (!u.mask[i]) continue;
            const auto partner = static_cast<std::size_t>(layout.slot(i).mirror_partner);
            v.values[partner] = layout.slot(i).mirror_sign * u.values[i];
        }
        return map_from_unified(v, desc);
    };

    Episode out = ep;
    out.id = ep.id + "_mirror";
    out.instruction = swap_instruction_terms(ep.instruction, cfg);
    out.metadata["augmentation"] = "mirror";
    out.metadata["source_id"] = ep.id;

    for (std::size_t t = 0; t < ep.actions.rows; ++t) {
        const auto row = mirror_row(ep.actions.row(t), ep.actions.cols);
        for (std::size_t d = 0; d < row.size(); ++d) out.actions(t, d) = row[d];
    }
    if (ep.states.cols == desc.native_dim()) {
        for (std::size_t t = 0; t < ep.states.rows; ++t) {
            const auto row = mirror_row(ep.states.row(t), ep.states.cols);
            for (std::size_t d = 0; d < row.size(); ++d) out.states(t, d) = row[d];
        }
    }

    out.cameras.clear();
    for (const auto& [name, frames] : ep.cameras) {
        const std::string new_name = swap_instruction_terms(name, cfg);
        std::vector<Image> flipped;
        flipped.reserve(frames.size());
        for (const auto& f : frames) flipped.push_back(flip_horizontal(f));
        out.cameras[new_name] = std::move(flipped);
    }
    return out;
}

Episode reverse_episode(const Episode& ep, const AugmentConfig& cfg) {
    std::string captured;
    const ReversalTemplate* tmpl = nullptr;
    for (const auto& t : cfg.reversible_skills) {
        if (template_match(ep.instruction, t.match, captured)) {
            tmpl = &t;
            break;
        }
    }
    if (tmpl == nullptr)
        throw NotReversibleError("instruction matches no reversible template: \"" +
                                 ep.instruction + "\"");

    const std::size_t T = ep.length();
    Episode out = ep;
    out.id = ep.id + "_reverse";
    out.instruction = apply_template(tmpl->rewrite, captured);
    out.metadata["augmentation"] = "reverse";
    out.metadata["source_id"] = ep.id;

    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t d = 0; d < ep.states.cols; ++d)
            out.states(t, d) = ep.states(T - 1 - t, d);

    for (auto& [name, frames] : out.cameras)
        std::reverse(frames.begin(), frames.end());

    if (ep.action_semantics == ActionSemantics::absolute_target) {
        if (ep.actions.cols != ep.states.cols)
            throw DimError("reverse_episode: absolute_target reversal requires matching "
                           "state and action dimensions");
        // a'_t targets the next reversed state; the final action holds.
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t src = t + 1 < T ? t + 1 : T - 1;
            for (std::size_t d = 0; d < out.actions.cols; ++d)
                out.actions(t, d) = out.states(src, d);
        }
    } else {
        // Delta: a'_t = -a_{T-2-t}, with a zero hold at the end.
        for (std::size_t t = 0; t < T; ++t) {
            if (t + 1 < T) {
                const std::size_t src = T - 2 - t;
                for (std::size_t d = 0; d < out.actions.cols; ++d)
                    out.actions(t, d) = -ep.actions(src, d);
            } else {
                for (std::size_t d = 0; d < out.actions.cols; ++d)
                    out.actions(t, d) = 0.0;
            }
        }
    }
    return out;
}

} // namespace demostack
