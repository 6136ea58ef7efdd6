#include "fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "demostack/rng.hpp"

namespace demostack::testing {

Image textured_image(int width, int height, std::uint64_t seed) {
    CounterRng rng(CounterRng::derive_key(seed, 0x746578ULL));
    Image img(width, height);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
    return img;
}

Image shift_wrap(const Image& img, int dx) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int sx = (x - dx) % img.width;
            if (sx < 0) sx += img.width;
            out.at(x, y) = img.at(sx, y);
        }
    return out;
}

Image add_brightness(const Image& img, int delta) {
    Image out = img;
    for (auto& p : out.pixels)
        p = static_cast<std::uint8_t>(std::clamp(static_cast<int>(p) + delta, 0, 255));
    return out;
}

Image box_blur5(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int sum = 0, n = 0;
            for (int dy = -2; dy <= 2; ++dy) {
                for (int dx = -2; dx <= 2; ++dx) {
                    const int sx = std::clamp(x + dx, 0, img.width - 1);
                    const int sy = std::clamp(y + dy, 0, img.height - 1);
                    sum += img.at(sx, sy);
                    ++n;
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>(sum / n);
        }
    }
    return out;
}

Image flat_image(int width, int height, std::uint8_t value) {
    return Image(width, height, value);
}

Image checkerboard(int width, int height) {
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at(x, y) = ((x + y) % 2 == 0) ? 255 : 0;
    return img;
}

Episode sine_episode(const SineEpisodeSpec& spec) {
    Episode ep;
    ep.id = spec.id;
    ep.embodiment_id = spec.embodiment_id;
    ep.fps = spec.fps;
    ep.instruction = spec.instruction;
    ep.reversible = true;
    ep.action_semantics = ActionSemantics::absolute_target;

    ep.states = Matrix(spec.T, spec.dims);
    for (std::size_t d = 0; d < spec.dims; ++d) {
        const double phase = 0.3 * static_cast<double>(d);
        for (std::size_t t = 0; t < spec.T; ++t) {
            double v = spec.amplitude *
                       std::sin(0.15 * static_cast<double>(t) + phase);
            if (spec.noise > 0.0 && t > 0)
                v += (t % 2 == 0 ? spec.noise : -spec.noise);
            ep.states(t, d) = static_cast<float>(v); // keep f32-exact
        }
    }
    ep.actions = ep.states;

    const Image base = textured_image(spec.frame_size, spec.frame_size, spec.seed);
    for (std::size_t c = 0; c < spec.cameras; ++c) {
        std::vector<Image> frames;
        frames.reserve(spec.T);
        for (std::size_t t = 0; t < spec.T; ++t)
            frames.push_back(shift_wrap(base, static_cast<int>(t % 7)));
        const std::string name = c == 0 ? "head" : (c == 1 ? "left_wrist" : "right_wrist");
        ep.cameras[name] = std::move(frames);
    }
    return ep;
}

EmbodimentDescriptor dual_arm_descriptor() {
    std::vector<DimMapping> dims;
    for (int i = 0; i < 14; ++i) dims.push_back({i, i, 1.0, 0.0});
    PromptFields prompt;
    prompt.arms = 2;
    prompt.hands = 0;
    prompt.end_effector = EndEffector::gripper;
    prompt.ctrl = ControlType::joint;
    prompt.base = BaseType::static_base;
    return EmbodimentDescriptor("dual_arm_14", std::move(dims), prompt);
}

EmbodimentDescriptor dual_arm_gripper_descriptor() {
    std::vector<DimMapping> dims;
    for (int i = 0; i < 14; ++i) dims.push_back({i, i, 1.0, 0.0});
    dims.push_back({14, 14, 1.0 / 0.08, 0.0}); // gripper width in metres -> [0,1]
    dims.push_back({15, 15, 1.0 / 0.08, 0.0});
    PromptFields prompt;
    prompt.arms = 2;
    prompt.hands = 0;
    prompt.end_effector = EndEffector::gripper;
    prompt.ctrl = ControlType::joint;
    prompt.base = BaseType::static_base;
    return EmbodimentDescriptor("dual_arm_gripper_16", std::move(dims), prompt);
}

EmbodimentDescriptor random_descriptor(std::uint64_t seed, std::size_t k) {
    CounterRng rng(CounterRng::derive_key(seed, 0x64657363ULL));
    std::vector<int> slots(kUnifiedDim);
    for (std::size_t i = 0; i < kUnifiedDim; ++i) slots[i] = static_cast<int>(i);
    for (std::size_t i = kUnifiedDim - 1; i > 0; --i)
        std::swap(slots[i], slots[rng.next_below(i + 1)]);

    std::vector<DimMapping> dims;
    for (std::size_t i = 0; i < k; ++i) {
        DimMapping d;
        d.native_index = static_cast<int>(i);
        d.slot_index = slots[i];
        d.scale = 0.2 + 2.0 * rng.next_double();
        if (rng.next_double() < 0.5) d.scale = -d.scale;
        d.offset = 2.0 * rng.next_double() - 1.0;
        dims.push_back(d);
    }
    PromptFields prompt;
    prompt.arms = 1 + static_cast<int>(rng.next_below(2));
    prompt.hands = static_cast<int>(rng.next_below(3));
    prompt.end_effector =
        rng.next_double() < 0.5 ? EndEffector::gripper : EndEffector::dex_hand;
    prompt.ctrl = rng.next_double() < 0.5 ? ControlType::joint : ControlType::cartesian;
    prompt.base = rng.next_double() < 0.5 ? BaseType::mobile : BaseType::static_base;
    return EmbodimentDescriptor("random_" + std::to_string(seed), std::move(dims), prompt);
}

std::vector<double> random_native(const EmbodimentDescriptor& desc, std::uint64_t seed) {
    CounterRng rng(CounterRng::derive_key(seed, 0x6163ULL));
    std::vector<double> native(desc.native_dim());
    for (double& v : native) v = 4.0 * rng.next_double() - 2.0;
    return native;
}

} // namespace demostack::testing
