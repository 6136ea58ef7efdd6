#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "demostack/episode.hpp"
#include "demostack/unify.hpp"

namespace demostack::testing {

/// Random texture image, reproducible per seed.
Image textured_image(int width, int height, std::uint64_t seed);

/// Horizontal translation with wraparound, so texture covers every block.
Image shift_wrap(const Image& img, int dx);

/// Adds a constant offset to every pixel, clamped to [0, 255].
Image add_brightness(const Image& img, int delta);

/// 5x5 box blur with clamped borders.
Image box_blur5(const Image& img);

/// Constant-intensity frame.
Image flat_image(int width, int height, std::uint8_t value = 0);

/// Period-2 checkerboard.
Image checkerboard(int width, int height);

struct SineEpisodeSpec {
    std::string id = "ep";
    std::string embodiment_id = "dual_arm_14";
    std::size_t T = 40;
    std::size_t dims = 14;
    double fps = 10.0;
    double amplitude = 1.0;
    double noise = 0.0;        // alternating +-noise added to velocities
    int frame_size = 64;
    std::size_t cameras = 1;
    std::uint64_t seed = 1;
    std::string instruction = "pick the cup from the table";
};

/// Smooth sine-wave episode with textured moving frames. Values are rounded
/// to f32 so EpisodePack round-trips are bit-exact.
Episode sine_episode(const SineEpisodeSpec& spec);

/// 14-dof dual-arm descriptor: native dims 0-6 -> left arm slots 0-6,
/// 7-13 -> right arm slots 7-13, identity affine.
EmbodimentDescriptor dual_arm_descriptor();

/// 16-dof variant adding grasp scalars on slots 14/15.
EmbodimentDescriptor dual_arm_gripper_descriptor();

/// Random descriptor with k mapped slots and nonzero random affines.
EmbodimentDescriptor random_descriptor(std::uint64_t seed, std::size_t k);

/// Random native action vector for a descriptor.
std::vector<double> random_native(const EmbodimentDescriptor& desc, std::uint64_t seed);

} // namespace demostack::testing
