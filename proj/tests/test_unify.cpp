#include <doctest.h>

#include <cmath>

#include "demostack/errors.hpp"
#include "demostack/unify.hpp"
#include "fixtures.hpp"
#include "temp_dir.hpp"

using namespace demostack;
using namespace demostack::testing;

namespace {

EmbodimentDescriptor dual_arm_dex_descriptor() {
    // Slots 0-13 (arms) and 16-39 (hands), 38 native dims, identity affine.
    std::vector<DimMapping> dims;
    int native = 0;
    for (int s = 0; s < 14; ++s) dims.push_back({native++, s, 1.0, 0.0});
    for (int s = 16; s < 40; ++s) dims.push_back({native++, s, 1.0, 0.0});
    PromptFields p;
    p.arms = 2;
    p.hands = 2;
    p.end_effector = EndEffector::dex_hand;
    p.ctrl = ControlType::joint;
    p.base = BaseType::static_base;
    return EmbodimentDescriptor("dual_arm_dex_38", std::move(dims), p);
}

} // namespace

TEST_CASE("layout validation") {
    UnifiedLayout layout = UnifiedLayout::default_layout();
    CHECK(layout.slots().size() == kUnifiedDim);
    for (std::size_t i = 0; i < kUnifiedDim; ++i) {
        const SlotSpec& s = layout.slot(i);
        CHECK(s.index == static_cast<int>(i));
        const SlotSpec& p = layout.slot(static_cast<std::size_t>(s.mirror_partner));
        CHECK(p.mirror_partner == s.index); // involution
        CHECK(p.mirror_sign == s.mirror_sign);
    }

    SUBCASE("broken involution is rejected") {
        auto slots = layout.slots();
        slots[0].mirror_partner = 5; // slot 5's partner is 12, not 0
        CHECK_THROWS_AS(UnifiedLayout(std::move(slots)), LayoutError);
    }
    SUBCASE("duplicate semantic id is rejected") {
        auto slots = layout.slots();
        slots[1].semantic_id = slots[0].semantic_id;
        CHECK_THROWS_AS(UnifiedLayout(std::move(slots)), LayoutError);
    }
    SUBCASE("json round-trip") {
        TempDir tmp("layout");
        layout.save_json(tmp.path() / "layout.json");
        UnifiedLayout back = UnifiedLayout::from_json_file(tmp.path() / "layout.json");
        for (std::size_t i = 0; i < kUnifiedDim; ++i) {
            CHECK(back.slot(i).semantic_id == layout.slot(i).semantic_id);
            CHECK(back.slot(i).mirror_partner == layout.slot(i).mirror_partner);
            CHECK(back.slot(i).mirror_sign == layout.slot(i).mirror_sign);
            CHECK(back.slot(i).group == layout.slot(i).group);
        }
    }
}

TEST_CASE("descriptor validation") {
    SUBCASE("slot out of range") {
        std::vector<DimMapping> dims = {{0, 64, 1.0, 0.0}};
        CHECK_THROWS_AS(EmbodimentDescriptor("bad", std::move(dims), PromptFields{}),
                        DescriptorError);
    }
    SUBCASE("slot collision") {
        std::vector<DimMapping> dims = {{0, 3, 1.0, 0.0}, {1, 3, 1.0, 0.0}};
        CHECK_THROWS_AS(EmbodimentDescriptor("bad", std::move(dims), PromptFields{}),
                        DescriptorError);
    }
    SUBCASE("zero scale") {
        std::vector<DimMapping> dims = {{0, 3, 0.0, 0.0}};
        CHECK_THROWS_AS(EmbodimentDescriptor("bad", std::move(dims), PromptFields{}),
                        DescriptorError);
    }
    SUBCASE("json round-trip") {
        TempDir tmp("descriptor");
        EmbodimentDescriptor desc = dual_arm_gripper_descriptor();
        desc.save_json(tmp.path() / "desc.json");
        EmbodimentDescriptor back =
            EmbodimentDescriptor::from_json_file(tmp.path() / "desc.json");
        CHECK(back.embodiment_id() == desc.embodiment_id());
        CHECK(back.mask() == desc.mask());
        REQUIRE(back.dims().size() == desc.dims().size());
        for (std::size_t i = 0; i < desc.dims().size(); ++i) {
            CHECK(back.dims()[i].slot_index == desc.dims()[i].slot_index);
            CHECK(back.dims()[i].scale == desc.dims()[i].scale);
            CHECK(back.dims()[i].offset == desc.dims()[i].offset);
        }
        CHECK(control_prompt(back) == control_prompt(desc));
    }
}

TEST_CASE("map_to_unified places values per the affine map") {
    SUBCASE("7-dof left arm lands in slots 0-6") {
        std::vector<DimMapping> dims;
        for (int i = 0; i < 7; ++i) dims.push_back({i, i, 1.0, 0.0});
        EmbodimentDescriptor arm("left7", std::move(dims), PromptFields{});
        UnifiedAction u = map_to_unified({1, 2, 3, 4, 5, 6, 7}, arm);
        int set = 0;
        for (std::size_t i = 0; i < kUnifiedDim; ++i)
            if (u.mask[i]) ++set;
        CHECK(set == 7);
        for (int i = 0; i < 7; ++i) {
            CHECK(u.mask[static_cast<std::size_t>(i)]);
            CHECK(u.values[static_cast<std::size_t>(i)] == doctest::Approx(i + 1));
        }
        CHECK(u.values[10] == 0.0);
    }
    SUBCASE("gripper width scaling") {
        EmbodimentDescriptor desc = dual_arm_gripper_descriptor();
        std::vector<double> native(16, 0.0);
        native[14] = 0.08; // full opening in metres, scale 1/0.08
        UnifiedAction u = map_to_unified(native, desc);
        CHECK(u.values[14] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("length mismatch raises DimError") {
        CHECK_THROWS_AS(map_to_unified({1, 2, 3}, dual_arm_descriptor()), DimError);
    }
}

TEST_CASE("map_from_unified inverts map_to_unified") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EmbodimentDescriptor desc = random_descriptor(seed, 5 + seed % 30);
        const std::vector<double> native = random_native(desc, seed);
        UnifiedAction u = map_to_unified(native, desc);
        const std::vector<double> back = map_from_unified(u, desc);
        REQUIRE(back.size() == native.size());
        for (std::size_t i = 0; i < native.size(); ++i)
            CHECK(back[i] == doctest::Approx(native[i]).epsilon(1e-12));
    }
}

TEST_CASE("map_from_unified ignores unmapped slots and enforces the mask") {
    EmbodimentDescriptor desc = dual_arm_descriptor();
    UnifiedAction u = map_to_unified(random_native(desc, 3), desc);
    const std::vector<double> base = map_from_unified(u, desc);

    SUBCASE("perturbing an unmapped slot changes nothing") {
        UnifiedAction perturbed = u;
        perturbed.values[50] = 1234.5;
        perturbed.mask[50] = true;
        CHECK(map_from_unified(perturbed, desc) == base);
    }
    SUBCASE("missing required slot raises MaskError") {
        UnifiedAction broken = u;
        broken.mask[0] = false;
        CHECK_THROWS_AS(map_from_unified(broken, desc), MaskError);
    }
}

TEST_CASE("masked_bc_loss") {
    std::array<double, kUnifiedDim> pred{}, target{};
    std::array<bool, kUnifiedDim> mask{};

    SUBCASE("garbage on unmasked slots is ignored") {
        mask[3] = mask[9] = true;
        pred[3] = target[3] = 1.5;
        pred[9] = target[9] = -2.0;
        pred[20] = 99.0;
        target[21] = -99.0;
        CHECK(masked_bc_loss(pred, target, mask) == 0.0);
    }
    SUBCASE("full mask with unit differences averages to 1") {
        mask.fill(true);
        pred.fill(1.0);
        CHECK(masked_bc_loss(pred, target, mask) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("two slots with diffs 1 and 3 give 5") {
        mask[0] = mask[1] = true;
        pred[0] = 1.0;
        pred[1] = 3.0;
        CHECK(masked_bc_loss(pred, target, mask) == doctest::Approx(5.0).epsilon(1e-15));
    }
    SUBCASE("empty mask raises MaskError") {
        CHECK_THROWS_AS(masked_bc_loss(pred, target, mask), MaskError);
    }
}

TEST_CASE("padding loss decomposition") {
    std::array<double, kUnifiedDim> pred{}, target{};
    std::array<bool, kUnifiedDim> mask{};
    mask[0] = mask[1] = true;

    SUBCASE("perfect prediction gives (0,0)") {
        auto [valid, spurious] = padding_loss_decomposition(target, target, mask);
        CHECK(valid == 0.0);
        CHECK(spurious == 0.0);
    }
    SUBCASE("one unmasked slot off by 0.5") {
        pred[10] = 0.5; // 62 unmasked slots
        auto [valid, spurious] = padding_loss_decomposition(pred, target, mask);
        CHECK(valid == 0.0);
        CHECK(spurious == doctest::Approx(0.25 / 62.0).epsilon(1e-12));
    }
    SUBCASE("full mask means no spurious term") {
        mask.fill(true);
        pred.fill(2.0);
        auto [valid, spurious] = padding_loss_decomposition(pred, target, mask);
        CHECK(valid == doctest::Approx(4.0).epsilon(1e-15));
        CHECK(spurious == 0.0);
    }
    SUBCASE("valid part equals masked_bc_loss exactly") {
        EmbodimentDescriptor desc = random_descriptor(5, 12);
        UnifiedAction u = map_to_unified(random_native(desc, 5), desc);
        std::array<double, kUnifiedDim> p{};
        for (std::size_t i = 0; i < kUnifiedDim; ++i) p[i] = 0.1 * static_cast<double>(i);
        auto [valid, spurious] = padding_loss_decomposition(p, u.values, desc.mask());
        CHECK(valid == masked_bc_loss(p, u.values, desc.mask()));
        CHECK(spurious >= 0.0);
    }
}

TEST_CASE("control prompt serialization") {
    SUBCASE("dual-arm dex-hand canonical string") {
        CHECK(control_prompt(dual_arm_dex_descriptor()) ==
              "arms=2;hands=2;ee=dex;ctrl=joint;base=static;slots=0-13,16-39");
    }
    SUBCASE("dim list order does not matter") {
        std::vector<DimMapping> fwd = {{0, 2, 1.0, 0.0}, {1, 5, 1.0, 0.0}};
        std::vector<DimMapping> rev = {{1, 5, 1.0, 0.0}, {0, 2, 1.0, 0.0}};
        EmbodimentDescriptor a("a", std::move(fwd), PromptFields{});
        EmbodimentDescriptor b("b", std::move(rev), PromptFields{});
        CHECK(control_prompt(a) == control_prompt(b));
    }
    SUBCASE("parse inverts serialize") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            EmbodimentDescriptor desc = random_descriptor(seed, 3 + seed * 4);
            ParsedPrompt parsed = parse_control_prompt(control_prompt(desc));
            CHECK(parsed.mask == desc.mask());
            CHECK(parsed.fields.arms == desc.prompt().arms);
            CHECK(parsed.fields.hands == desc.prompt().hands);
            CHECK(parsed.fields.end_effector == desc.prompt().end_effector);
            CHECK(parsed.fields.ctrl == desc.prompt().ctrl);
            CHECK(parsed.fields.base == desc.prompt().base);
        }
    }
    SUBCASE("singleton slot is printed without a dash") {
        std::vector<DimMapping> dims = {{0, 7, 1.0, 0.0}};
        EmbodimentDescriptor one("one", std::move(dims), PromptFields{});
        CHECK(control_prompt(one).ends_with("slots=7"));
    }
}

TEST_CASE("localize_noise") {
    EmbodimentDescriptor desc = dual_arm_gripper_descriptor();
    const std::size_t k = desc.masked_count();

    SUBCASE("unmasked slots are exactly zero") {
        auto noise = localize_noise(k, desc, 42);
        for (std::size_t i = 0; i < kUnifiedDim; ++i)
            if (!desc.mask()[i]) CHECK(noise[i] == 0.0);
    }
    SUBCASE("seed determinism") {
        CHECK(localize_noise(k, desc, 7) == localize_noise(k, desc, 7));
        CHECK(localize_noise(k, desc, 7) != localize_noise(k, desc, 8));
    }
    SUBCASE("k mismatch raises DimError") {
        CHECK_THROWS_AS(localize_noise(k + 1, desc, 0), DimError);
    }
    SUBCASE("per-slot moments over many draws") {
        // 3-sigma law-of-large-numbers band around mean 0 / variance 1.
        const std::size_t n = 100000;
        std::array<double, kUnifiedDim> sum{}, sumsq{};
        for (std::size_t draw = 0; draw < n; ++draw) {
            auto noise = localize_noise(k, desc, draw);
            for (std::size_t i = 0; i < kUnifiedDim; ++i) {
                sum[i] += noise[i];
                sumsq[i] += noise[i] * noise[i];
            }
        }
        for (std::size_t i = 0; i < kUnifiedDim; ++i) {
            if (!desc.mask()[i]) continue;
            const double mean = sum[i] / static_cast<double>(n);
            const double var = sumsq[i] / static_cast<double>(n) - mean * mean;
            CHECK(std::abs(mean) < 0.02);
            CHECK(std::abs(var - 1.0) < 0.02);
        }
    }
}

TEST_CASE("retarget") {
    UnifiedLayout layout = UnifiedLayout::default_layout();
    SineEpisodeSpec spec;
    spec.T = 12;
    spec.dims = 14;
    Episode ep = sine_episode(spec);

    SUBCASE("dst equal to src leaves actions unchanged") {
        EmbodimentDescriptor desc = dual_arm_descriptor();
        Episode out = retarget(ep, desc, desc, layout);
        REQUIRE(out.actions.rows == ep.actions.rows);
        for (std::size_t t = 0; t < out.actions.rows; ++t)
            for (std::size_t d = 0; d < out.actions.cols; ++d)
                CHECK(out.actions(t, d) ==
                      doctest::Approx(ep.actions(t, d)).epsilon(1e-12));
        CHECK(out.embodiment_id == desc.embodiment_id());
        CHECK(out.metadata.at("retarget_coverage") == "14/14");
    }
    SUBCASE("gripper channel maps to a grasp scalar via a rule") {
        // Source: one arm joint on slot 0 plus a two-finger width on slot 61
        // (reserved); destination uses the left grasp scalar slot 14.
        std::vector<DimMapping> src_dims = {{0, 0, 1.0, 0.0}, {1, 61, 1.0, 0.0}};
        std::vector<DimMapping> dst_dims = {{0, 0, 1.0, 0.0}, {1, 14, 1.0, 0.0}};
        EmbodimentDescriptor src("twofinger", std::move(src_dims), PromptFields{});
        EmbodimentDescriptor dst("grasp", std::move(dst_dims), PromptFields{});

        Episode small = ep;
        small.states = Matrix(3, 2);
        small.actions = Matrix(3, 2);
        for (std::size_t t = 0; t < 3; ++t) {
            small.actions(t, 0) = static_cast<double>(t);
            small.actions(t, 1) = 0.02 * static_cast<double>(t + 1); // width in metres
        }
        // Closure mapping: width 0.08 m -> 0 (open), width 0 -> 1 (closed).
        std::vector<RetargetRule> rules = {{61, 14, -1.0 / 0.08, 1.0}};
        Episode out = retarget(small, src, dst, layout, rules);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(out.actions(t, 0) == doctest::Approx(small.actions(t, 0)));
            CHECK(out.actions(t, 1) ==
                  doctest::Approx(1.0 - small.actions(t, 1) / 0.08).epsilon(1e-12));
        }
    }
    SUBCASE("unmapped base slots raise RetargetError naming them") {
        std::vector<DimMapping> src_dims = {{0, 58, 1.0, 0.0}, {1, 59, 1.0, 0.0}};
        std::vector<DimMapping> dst_dims = {{0, 0, 1.0, 0.0}, {1, 1, 1.0, 0.0}};
        EmbodimentDescriptor src("mobile", std::move(src_dims), PromptFields{});
        EmbodimentDescriptor dst("static", std::move(dst_dims), PromptFields{});
        Episode small = ep;
        small.states = Matrix(2, 2);
        small.actions = Matrix(2, 2);
        try {
            retarget(small, src, dst, layout);
            FAIL("expected RetargetError");
        } catch (const RetargetError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("base_vx") != std::string::npos);
            CHECK(msg.find("base_vy") != std::string::npos);
        }
    }
    SUBCASE("bijective round trip restores actions") {
        // A maps native dims to slots 0/1; B maps the same slots with a
        // different affine. Retargeting A->B->A must restore the originals.
        std::vector<DimMapping> a_dims = {{0, 0, 2.0, 0.5}, {1, 1, -1.5, 0.0}};
        std::vector<DimMapping> b_dims = {{0, 0, 0.25, -1.0}, {1, 1, 3.0, 2.0}};
        EmbodimentDescriptor a("emb_a", std::move(a_dims), PromptFields{});
        EmbodimentDescriptor b("emb_b", std::move(b_dims), PromptFields{});
        Episode small = ep;
        small.states = Matrix(4, 2);
        small.actions = Matrix(4, 2);
        for (std::size_t t = 0; t < 4; ++t) {
            small.actions(t, 0) = 0.3 * static_cast<double>(t) - 0.5;
            small.actions(t, 1) = 1.0 - 0.2 * static_cast<double>(t);
        }
        Episode round = retarget(retarget(small, a, b, layout), b, a, layout);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t d = 0; d < 2; ++d)
                CHECK(round.actions(t, d) ==
                      doctest::Approx(small.actions(t, d)).epsilon(1e-12));
    }
}
