#include "demostack/unify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "demostack/errors.hpp"
#include "demostack/rng.hpp"

namespace demostack {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* kGroupNames[] = {"left_arm",  "right_arm", "left_grasp", "right_grasp",
                             "left_hand", "right_hand", "left_ee",    "right_ee",
                             "torso",     "head",       "base",       "reserved"};

std::string slot_ranges(const std::array<bool, kUnifiedDim>& mask) {
    std::string out;
    std::size_t i = 0;
    while (i < kUnifiedDim) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < kUnifiedDim && mask[j + 1]) ++j;
        if (!out.empty()) out += ",";
        out += std::to_string(i);
        if (j > i) out += "-" + std::to_string(j);
        i = j + 1;
    }
    return out;
}

void add_slots(std::vector<SlotSpec>& slots, int first, int count, SlotGroup group,
               const std::string& prefix, const std::string& unit, int partner_first,
               const std::vector<int>& signs) {
    for (int i = 0; i < count; ++i) {
        SlotSpec s;
        s.index = first + i;
        s.semantic_id = prefix + std::to_string(i);
        s.unit = unit;
        s.group = group;
        s.mirror_partner = partner_first + i;
        s.mirror_sign = signs.empty() ? 1 : signs[static_cast<std::size_t>(i) % signs.size()];
        slots.push_back(s);
    }
}

} // namespace

std::string to_string(SlotGroup g) { return kGroupNames[static_cast<int>(g)]; }

SlotGroup slot_group_from_string(const std::string& s) {
    for (int i = 0; i < 12; ++i)
        if (s == kGroupNames[i]) return static_cast<SlotGroup>(i);
    throw LayoutError("unknown slot group: " + s);
}

UnifiedLayout::UnifiedLayout(std::vector<SlotSpec> slots) : slots_(std::move(slots)) {
    if (slots_.size() != kUnifiedDim)
        throw LayoutError("layout must define exactly 64 slots, got " +
                          std::to_string(slots_.size()));
    std::sort(slots_.begin(), slots_.end(),
              [](const SlotSpec& a, const SlotSpec& b) { return a.index < b.index; });
    std::set<std::string> ids;
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        const SlotSpec& s = slots_[i];
        if (s.index != static_cast<int>(i))
            throw LayoutError("slot indices must cover 0..63 uniquely; problem near index " +
                              std::to_string(s.index));
        if (!ids.insert(s.semantic_id).second)
            throw LayoutError("duplicate semantic_id: " + s.semantic_id);
        if (s.mirror_partner < 0 || s.mirror_partner >= static_cast<int>(kUnifiedDim))
            throw LayoutError("mirror_partner out of range at slot " + std::to_string(i));
        if (s.mirror_sign != 1 && s.mirror_sign != -1)
            throw LayoutError("mirror_sign must be +1 or -1 at slot " + std::to_string(i));
    }
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        const SlotSpec& s = slots_[i];
        const SlotSpec& p = slots_[static_cast<std::size_t>(s.mirror_partner)];
        if (p.mirror_partner != s.index)
            throw LayoutError("mirror_partner is not an involution at slot " +
                              std::to_string(i));
        if (p.mirror_sign != s.mirror_sign)
            throw LayoutError("mirror_sign must match between partners at slot " +
                              std::to_string(i));
    }
}

UnifiedLayout UnifiedLayout::default_layout() {
    std::vector<SlotSpec> slots;
    slots.reserve(kUnifiedDim);
    const std::vector<int> arm_signs = {1, -1, -1, 1, -1, 1, -1};
    const std::vector<int> ee_signs = {1, -1, 1, 1, -1, 1, -1}; // xyz + quat wxyz
    add_slots(slots, 0, 7, SlotGroup::left_arm, "l_arm_j", "rad", 7, arm_signs);
    add_slots(slots, 7, 7, SlotGroup::right_arm, "r_arm_j", "rad", 0, arm_signs);
    add_slots(slots, 14, 1, SlotGroup::left_grasp, "l_grasp", "norm", 15, {1});
    add_slots(slots, 15, 1, SlotGroup::right_grasp, "r_grasp", "norm", 14, {1});
    add_slots(slots, 16, 12, SlotGroup::left_hand, "l_hand_j", "rad", 28, {1});
    add_slots(slots, 28, 12, SlotGroup::right_hand, "r_hand_j", "rad", 16, {1});
    add_slots(slots, 40, 7, SlotGroup::left_ee, "l_ee_", "pose", 47, ee_signs);
    add_slots(slots, 47, 7, SlotGroup::right_ee, "r_ee_", "pose", 40, ee_signs);
    add_slots(slots, 54, 1, SlotGroup::torso, "torso_pitch", "rad", 54, {1});
    add_slots(slots, 55, 1, SlotGroup::torso, "torso_yaw", "rad", 55, {-1});
    add_slots(slots, 56, 1, SlotGroup::head, "head_pitch", "rad", 56, {1});
    add_slots(slots, 57, 1, SlotGroup::head, "head_yaw", "rad", 57, {-1});
    add_slots(slots, 58, 1, SlotGroup::base, "base_vx", "m/s", 58, {1});
    add_slots(slots, 59, 1, SlotGroup::base, "base_vy", "m/s", 59, {-1});
    add_slots(slots, 60, 1, SlotGroup::base, "base_wz", "rad/s", 60, {-1});
    add_slots(slots, 61, 3, SlotGroup::reserved, "reserved_", "none", 61, {1});
    // reserved slots self-mirror
    for (auto& s : slots)
        if (s.group == SlotGroup::reserved) s.mirror_partner = s.index;
    return UnifiedLayout(std::move(slots));
}

UnifiedLayout UnifiedLayout::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open layout file: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LayoutError(path.string() + ": " + e.what());
    }
    std::vector<SlotSpec> slots;
    try {
        std::size_t pos = 0;
        for (const auto& js : j.at("slots")) {
            SlotSpec s;
            s.index = js.at("index").get<int>();
            s.semantic_id = js.at("semantic_id").get<std::string>();
            s.unit = js.at("unit").get<std::string>();
            s.mirror_partner = js.at("mirror_partner").get<int>();
            s.mirror_sign = js.at("mirror_sign").get<int>();
            s.group = slot_group_from_string(js.at("group").get<std::string>());
            slots.push_back(s);
            ++pos;
        }
    } catch (const nlohmann::json::exception& e) {
        throw LayoutError(path.string() + ": slots[" + std::to_string(slots.size()) +
                          "]: " + e.what());
    }
    return UnifiedLayout(std::move(slots));
}

void UnifiedLayout::save_json(const std::filesystem::path& path) const {
    ordered_json j;
    j["slots"] = ordered_json::array();
    for (const auto& s : slots_) {
        ordered_json js;
        js["index"] = s.index;
        js["semantic_id"] = s.semantic_id;
        js["unit"] = s.unit;
        js["mirror_partner"] = s.mirror_partner;
        js["mirror_sign"] = s.mirror_sign;
        js["group"] = to_string(s.group);
        j["slots"].push_back(js);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write layout file: " + path.string());
    out << j.dump(2) << "\n";
}

EmbodimentDescriptor::EmbodimentDescriptor(std::string embodiment_id,
                                           std::vector<DimMapping> dims,
                                           PromptFields prompt)
    : id_(std::move(embodiment_id)), dims_(std::move(dims)), prompt_(prompt) {
    std::sort(dims_.begin(), dims_.end(),
              [](const DimMapping& a, const DimMapping& b) {
                  return a.native_index < b.native_index;
              });
    const int n = static_cast<int>(dims_.size());
    std::set<int> native_seen;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        const DimMapping& d = dims_[i];
        if (d.native_index < 0 || d.native_index >= n)
            throw DescriptorError(id_ + ": dims[" + std::to_string(i) +
                                  "]: native_index " + std::to_string(d.native_index) +
                                  " outside [0, " + std::to_string(n) + ")");
        if (!native_seen.insert(d.native_index).second)
            throw DescriptorError(id_ + ": duplicate native_index " +
                                  std::to_string(d.native_index));
        if (d.slot_index < 0 || d.slot_index >= static_cast<int>(kUnifiedDim))
            throw DescriptorError(id_ + ": dims[" + std::to_string(i) + "]: slot " +
                                  std::to_string(d.slot_index) + " outside [0, 64)");
        if (mask_[static_cast<std::size_t>(d.slot_index)])
            throw DescriptorError(id_ + ": two dims map to slot " +
                                  std::to_string(d.slot_index));
        if (d.scale == 0.0)
            throw DescriptorError(id_ + ": dims[" + std::to_string(i) +
                                  "]: scale must be nonzero");
        mask_[static_cast<std::size_t>(d.slot_index)] = true;
    }
}

std::size_t EmbodimentDescriptor::masked_count() const { return dims_.size(); }

EmbodimentDescriptor EmbodimentDescriptor::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open descriptor file: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DescriptorError(path.string() + ": " + e.what());
    }
    try {
        std::vector<DimMapping> dims;
        for (const auto& jd : j.at("dims")) {
            DimMapping d;
            d.native_index = jd.at("native_index").get<int>();
            d.slot_index = jd.at("slot").get<int>();
            d.scale = jd.value("scale", 1.0);
            d.offset = jd.value("offset", 0.0);
            dims.push_back(d);
        }
        const auto& jp = j.at("prompt");
        PromptFields p;
        p.arms = jp.at("arms").get<int>();
        p.hands = jp.at("hands").get<int>();
        const auto ee = jp.at("end_effector").get<std::string>();
        if (ee == "gripper") p.end_effector = EndEffector::gripper;
        else if (ee == "dex_hand") p.end_effector = EndEffector::dex_hand;
        else throw DescriptorError(path.string() + ": unknown end_effector: " + ee);
        const auto ctrl = jp.at("ctrl").get<std::string>();
        if (ctrl == "joint") p.ctrl = ControlType::joint;
        else if (ctrl == "cartesian") p.ctrl = ControlType::cartesian;
        else throw DescriptorError(path.string() + ": unknown ctrl: " + ctrl);
        const auto base = jp.at("base").get<std::string>();
        if (base == "mobile") p.base = BaseType::mobile;
        else if (base == "static") p.base = BaseType::static_base;
        else throw DescriptorError(path.string() + ": unknown base: " + base);
        return EmbodimentDescriptor(j.at("embodiment_id").get<std::string>(),
                                    std::move(dims), p);
    } catch (const nlohmann::json::exception& e) {
        throw DescriptorError(path.string() + ": " + e.what());
    }
}

void EmbodimentDescriptor::save_json(const std::filesystem::path& path) const {
    ordered_json j;
    j["embodiment_id"] = id_;
    j["dims"] = ordered_json::array();
    for (const auto& d : dims_) {
        ordered_json jd;
        jd["native_index"] = d.native_index;
        jd["slot"] = d.slot_index;
        jd["scale"] = d.scale;
        jd["offset"] = d.offset;
        j["dims"].push_back(jd);
    }
    ordered_json jp;
    jp["arms"] = prompt_.arms;
    jp["hands"] = prompt_.hands;
    jp["end_effector"] = prompt_.end_effector == EndEffector::gripper ? "gripper" : "dex_hand";
    jp["ctrl"] = prompt_.ctrl == ControlType::joint ? "joint" : "cartesian";
    jp["base"] = prompt_.base == BaseType::mobile ? "mobile" : "static";
    j["prompt"] = jp;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write descriptor file: " + path.string());
    out << j.dump(2) << "\n";
}

UnifiedAction map_to_unified(const std::vector<double>& native,
                             const EmbodimentDescriptor& desc) {
    if (native.size() != desc.native_dim())
        throw DimError("map_to_unified: native vector has " +
                       std::to_string(native.size()) + " dims, descriptor expects " +
                       std::to_string(desc.native_dim()));
    UnifiedAction u;
    for (const auto& d : desc.dims()) {
        const auto slot = static_cast<std::size_t>(d.slot_index);
        u.values[slot] = d.scale * native[static_cast<std::size_t>(d.native_index)] + d.offset;
        u.mask[slot] = true;
    }
    return u;
}

std::vector<double> map_from_unified(const UnifiedAction& u,
                                     const EmbodimentDescriptor& desc) {
    for (std::size_t i = 0; i < kUnifiedDim; ++i)
        if (desc.mask()[i] && !u.mask[i])
            throw MaskError("map_from_unified: required slot " + std::to_string(i) +
                            " is unmasked in the input");
    std::vector<double> native(desc.native_dim(), 0.0);
    for (const auto& d : desc.dims())
        native[static_cast<std::size_t>(d.native_index)] =
            (u.values[static_cast<std::size_t>(d.slot_index)] - d.offset) / d.scale;
    return native;
}

double masked_bc_loss(const std::array<double, kUnifiedDim>& pred,
                      const std::array<double, kUnifiedDim>& target,
                      const std::array<bool, kUnifiedDim>& mask) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        if (!mask[i]) continue;
        const double d = pred[i] - target[i];
        sum += d * d;
        ++n;
    }
    if (n == 0) throw MaskError("masked_bc_loss: mask has no set bits");
    return sum / static_cast<double>(n);
}

std::pair<double, double> padding_loss_decomposition(
    const std::array<double, kUnifiedDim>& pred,
    const std::array<double, kUnifiedDim>& padded_target,
    const std::array<bool, kUnifiedDim>& mask) {
    double valid_sum = 0.0, spurious_sum = 0.0;
    std::size_t nv = 0, ns = 0;
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        const double d = pred[i] - padded_target[i];
        if (mask[i]) {
            valid_sum += d * d;
            ++nv;
        } else {
            spurious_sum += d * d;
            ++ns;
        }
    }
    const double valid = nv ? valid_sum / static_cast<double>(nv) : 0.0;
    const double spurious = ns ? spurious_sum / static_cast<double>(ns) : 0.0;
    return {valid, spurious};
}

std::string control_prompt(const EmbodimentDescriptor& desc) {
    const PromptFields& p = desc.prompt();
    std::ostringstream out;
    out << "arms=" << p.arms << ";hands=" << p.hands
        << ";ee=" << (p.end_effector == EndEffector::gripper ? "gripper" : "dex")
        << ";ctrl=" << (p.ctrl == ControlType::joint ? "joint" : "cartesian")
        << ";base=" << (p.base == BaseType::mobile ? "mobile" : "static")
        << ";slots=" << slot_ranges(desc.mask());
    return out.str();
}

ParsedPrompt parse_control_prompt(const std::string& prompt) {
    ParsedPrompt out;
    std::istringstream in(prompt);
    std::string field;
    while (std::getline(in, field, ';')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw FormatError("control prompt field missing '=': " + field);
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (key == "arms") out.fields.arms = std::stoi(val);
        else if (key == "hands") out.fields.hands = std::stoi(val);
        else if (key == "ee") {
            if (val == "gripper") out.fields.end_effector = EndEffector::gripper;
            else if (val == "dex") out.fields.end_effector = EndEffector::dex_hand;
            else throw FormatError("control prompt: unknown ee: " + val);
        } else if (key == "ctrl") {
            if (val == "joint") out.fields.ctrl = ControlType::joint;
            else if (val == "cartesian") out.fields.ctrl = ControlType::cartesian;
            else throw FormatError("control prompt: unknown ctrl: " + val);
        } else if (key == "base") {
            if (val == "mobile") out.fields.base = BaseType::mobile;
            else if (val == "static") out.fields.base = BaseType::static_base;
            else throw FormatError("control prompt: unknown base: " + val);
        } else if (key == "slots") {
            std::istringstream ranges(val);
            std::string range;
            while (std::getline(ranges, range, ',')) {
                if (range.empty()) continue;
                const auto dash = range.find('-');
                int lo, hi;
                if (dash == std::string::npos) {
                    lo = hi = std::stoi(range);
                } else {
                    lo = std::stoi(range.substr(0, dash));
                    hi = std::stoi(range.substr(dash + 1));
                }
                if (lo < 0 || hi >= static_cast<int>(kUnifiedDim) || lo > hi)
                    throw FormatError("control prompt: bad slot range: " + range);
                for (int i = lo; i <= hi; ++i) out.mask[static_cast<std::size_t>(i)] = true;
            }
        } else {
            throw FormatError("control prompt: unknown field: " + key);
        }
    }
    return out;
}

std::array<double, kUnifiedDim> localize_noise(std::size_t k,
                                               const EmbodimentDescriptor& desc,
                                               std::uint64_t seed) {
    if (k != desc.masked_count())
        throw DimError("localize_noise: k=" + std::to_string(k) +
                       " but descriptor has " + std::to_string(desc.masked_count()) +
                       " masked slots");
    CounterRng rng(CounterRng::derive_key(seed, 0x6e6f697365ULL));
    std::array<double, kUnifiedDim> out{};
    for (std::size_t i = 0; i < kUnifiedDim; ++i)
        if (desc.mask()[i]) out[i] = rng.next_normal();
    return out;
}

Episode retarget(const Episode& ep, const EmbodimentDescriptor& src,
                 const EmbodimentDescriptor& dst, const UnifiedLayout& layout,
                 const std::vector<RetargetRule>& rules) {
    // Resolve where each src slot lands on the dst side up front.
    std::array<int, kUnifiedDim> dst_slot_of{};
    std::array<double, kUnifiedDim> rule_scale{};
    std::array<double, kUnifiedDim> rule_offset{};
    std::vector<std::string> unmappable;
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        dst_slot_of[i] = -1;
        rule_scale[i] = 1.0;
        if (!src.mask()[i]) continue;
        if (dst.mask()[i]) {
            dst_slot_of[i] = static_cast<int>(i);
            continue;
        }
        bool found = false;
        for (const auto& r : rules) {
            if (r.src_slot == static_cast<int>(i) &&
                dst.mask()[static_cast<std::size_t>(r.dst_slot)]) {
                dst_slot_of[i] = r.dst_slot;
                rule_scale[i] = r.scale;
                rule_offset[i] = r.offset;
                found = true;
                break;
            }
        }
        if (!found) unmappable.push_back(layout.slot(i).semantic_id);
    }
    if (!unmappable.empty()) {
        std::string msg = "retarget: no target mapping for slots:";
        for (const auto& id : unmappable) msg += " " + id;
        throw RetargetError(msg);
    }

    const bool map_states = ep.states.cols == src.native_dim();

    auto retarget_row = [&](const double* row, std::size_t n) {
        std::vector<double> native(row, row + n);
        const UnifiedAction u_src = map_to_unified(native, src);
        UnifiedAction u_dst;
        for (std::size_t i = 0; i < kUnifiedDim; ++i) {
            if (dst.mask()[i]) u_dst.mask[i] = true;
            if (!src.mask()[i]) continue;
            const auto d = static_cast<std::size_t>(dst_slot_of[i]);
            u_dst.values[d] = rule_scale[i] * u_src.values[i] + rule_offset[i];
        }
        return map_from_unified(u_dst, dst);
    };

    Episode out = ep;
    out.embodiment_id = dst.embodiment_id();
    out.actions = Matrix(ep.actions.rows, dst.native_dim());
    for (std::size_t t = 0; t < ep.actions.rows; ++t) {
        const auto row = retarget_row(ep.actions.row(t), ep.actions.cols);
        for (std::size_t d = 0; d < row.size(); ++d) out.actions(t, d) = row[d];
    }
    if (map_states) {
        out.states = Matrix(ep.states.rows, dst.native_dim());
        for (std::size_t t = 0; t < ep.states.rows; ++t) {
            const auto row = retarget_row(ep.states.row(t), ep.states.cols);
            for (std::size_t d = 0; d < row.size(); ++d) out.states(t, d) = row[d];
        }
    }

    std::size_t covered = 0, total = 0;
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        if (!dst.mask()[i]) continue;
        ++total;
        bool provided = false;
        for (std::size_t s = 0; s < kUnifiedDim; ++s)
            if (src.mask()[s] && dst_slot_of[s] == static_cast<int>(i)) provided = true;
        if (provided) ++covered;
    }
    out.metadata["retarget_source"] = src.embodiment_id();
    out.metadata["retarget_coverage"] =
        std::to_string(covered) + "/" + std::to_string(total);
    return out;
}

} // namespace demostack
