#include <doctest.h>

#include <cmath>

#include "demostack/dataqa.hpp"
#include "demostack/errors.hpp"
#include "fixtures.hpp"
#include "oracle_dataqa.hpp"

using namespace demostack;
using namespace demostack::testing;

TEST_CASE("tremble is zero for constant-velocity and all-zero states") {
    Matrix ramp(10, 3);
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t d = 0; d < 3; ++d)
            ramp(t, d) = 0.5 * static_cast<double>(t) + static_cast<double>(d);
    CHECK(tremble_score(ramp, 2.0) == doctest::Approx(0.0).epsilon(1e-12));

    Matrix zeros(10, 3);
    CHECK(tremble_score(zeros, 2.0) == 0.0);
}

TEST_CASE("tremble rejects too-short input") {
    CHECK_THROWS_AS(tremble_score(Matrix(2, 3), 2.0), InsufficientDataError);
}

TEST_CASE("tremble matches the direct-formula oracle and orders noise") {
    SineEpisodeSpec clean_spec;
    clean_spec.T = 60;
    clean_spec.dims = 6;
    Episode clean = sine_episode(clean_spec);

    SineEpisodeSpec noisy_spec = clean_spec;
    noisy_spec.noise = 0.05;
    Episode noisy = sine_episode(noisy_spec);

    const double clean_score = tremble_score(clean.states, 2.0);
    const double noisy_score = tremble_score(noisy.states, 2.0);
    CHECK(clean_score == doctest::Approx(oracle_tremble(clean.states, 2.0)).epsilon(1e-9));
    CHECK(noisy_score == doctest::Approx(oracle_tremble(noisy.states, 2.0)).epsilon(1e-9));
    CHECK(noisy_score > clean_score);
    CHECK(clean_score >= 0.0);
    CHECK(noisy_score <= 1.0);
}

TEST_CASE("tremble is offset-invariant and bounded") {
    SineEpisodeSpec spec;
    spec.T = 40;
    spec.dims = 4;
    spec.noise = 0.02;
    Episode ep = sine_episode(spec);
    const double base = tremble_score(ep.states, 2.0);

    Matrix shifted = ep.states;
    for (double& v : shifted.data) v += 17.25;
    CHECK(tremble_score(shifted, 2.0) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
}

TEST_CASE("sharpness of constant frames is zero") {
    std::vector<Image> frames(3, flat_image(64, 64, 100));
    CHECK(sharpness_score(frames, 16) == 0.0);
}

TEST_CASE("sharpness rejects small frames") {
    std::vector<Image> frames(1, flat_image(32, 64));
    CHECK_THROWS_AS(sharpness_score(frames, 16), FrameTooSmallError);
}

TEST_CASE("sharpness matches the per-pixel oracle and orders blur") {
    SUBCASE("checkerboard vs blurred checkerboard") {
        const Image sharp = checkerboard(64, 64);
        const Image blurred = box_blur5(sharp);
        const double s = sharpness_score({sharp}, 16);
        const double b = sharpness_score({blurred}, 16);
        CHECK(s == doctest::Approx(oracle_sharpness({sharp}, 16)).epsilon(1e-9));
        CHECK(b == doctest::Approx(oracle_sharpness({blurred}, 16)).epsilon(1e-9));
        CHECK(s > b);
    }
    SUBCASE("noise vs blurred noise") {
        const Image noise = textured_image(96, 80, 7);
        const Image blurred = box_blur5(noise);
        const double s = sharpness_score({noise}, 16);
        const double b = sharpness_score({blurred}, 16);
        CHECK(s == doctest::Approx(oracle_sharpness({noise}, 16)).epsilon(1e-9));
        CHECK(b == doctest::Approx(oracle_sharpness({blurred}, 16)).epsilon(1e-9));
        CHECK(s > b);
    }
}

TEST_CASE("sharpness is invariant under intensity inversion") {
    const Image img = textured_image(64, 64, 11);
    Image inverted = img;
    for (auto& p : inverted.pixels) p = static_cast<std::uint8_t>(255 - p);
    CHECK(sharpness_score({img}, 16) ==
          doctest::Approx(sharpness_score({inverted}, 16)).epsilon(1e-12));
}

TEST_CASE("sample_frame_indices is evenly spaced and within budget") {
    CHECK(sample_frame_indices(5, 16) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    auto idx = sample_frame_indices(1000, 16);
    CHECK(idx.size() == 16);
    CHECK(idx.front() == 0);
    CHECK(idx.back() == 999);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
    CHECK(sample_frame_indices(0, 16).empty());
}

TEST_CASE("visual diversity basics") {
    const Image a = flat_image(64, 64, 0);
    SUBCASE("identical frames give zero") {
        CHECK(visual_diversity({a, a, a}, grid_feature_extractor) == 0.0);
    }
    SUBCASE("alternating frames give positive diversity") {
        const Image b = flat_image(64, 64, 200);
        CHECK(visual_diversity({a, b, a, b}, grid_feature_extractor) > 0.0);
    }
    SUBCASE("fewer than two frames is an error") {
        CHECK_THROWS_AS(visual_diversity({a}, grid_feature_extractor),
                        InsufficientDataError);
    }
}

TEST_CASE("visual diversity of a brightness staircase is computable by hand") {
    // Flat frames at 0, 51, 102, 153, 204: the mean-intensity feature per
    // frame is 0, 0.2, 0.4, 0.6, 0.8 (population std 0.2*sqrt(2)); the
    // intensity-std feature is identically zero. Mean over the two feature
    // dims halves the std.
    std::vector<Image> frames;
    for (int v : {0, 51, 102, 153, 204})
        frames.push_back(flat_image(64, 64, static_cast<std::uint8_t>(v)));
    const double expected = 0.5 * 0.2 * std::sqrt(2.0);
    CHECK(visual_diversity(frames, grid_feature_extractor) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("visual diversity matches the oracle and is shuffle-invariant") {
    std::vector<Image> frames;
    for (int t = 0; t < 8; ++t)
        frames.push_back(add_brightness(textured_image(64, 64, 3), 10 * t));
    const double base = visual_diversity(frames, grid_feature_extractor);
    CHECK(base == doctest::Approx(oracle_visual_diversity(frames)).epsilon(1e-9));

    std::vector<Image> shuffled = {frames[5], frames[0], frames[7], frames[2],
                                   frames[6], frames[1], frames[3], frames[4]};
    CHECK(visual_diversity(shuffled, grid_feature_extractor) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("state diversity hand values and properties") {
    SUBCASE("identical rows give zero") {
        Matrix m(4, 3, 2.5);
        CHECK(state_diversity(m) == 0.0);
    }
    SUBCASE("two points two units apart in one dim give 1") {
        Matrix m(2, 2);
        m(1, 0) = 2.0;
        CHECK(state_diversity(m) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("uniform scaling scales the result linearly") {
        SineEpisodeSpec spec;
        spec.T = 30;
        spec.dims = 5;
        Episode ep = sine_episode(spec);
        const double base = state_diversity(ep.states);
        Matrix scaled = ep.states;
        for (double& v : scaled.data) v *= -3.0;
        CHECK(state_diversity(scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));
    }
    SUBCASE("translation invariance") {
        SineEpisodeSpec spec;
        spec.T = 20;
        spec.dims = 4;
        Episode ep = sine_episode(spec);
        Matrix shifted = ep.states;
        for (double& v : shifted.data) v += 4.0;
        CHECK(state_diversity(shifted) ==
              doctest::Approx(state_diversity(ep.states)).epsilon(1e-12));
    }
    SUBCASE("matches the covariance-trace oracle") {
        SineEpisodeSpec spec;
        spec.T = 25;
        spec.dims = 7;
        spec.noise = 0.03;
        Episode ep = sine_episode(spec);
        CHECK(state_diversity(ep.states) ==
              doctest::Approx(oracle_state_diversity(ep.states)).epsilon(1e-9));
    }
    SUBCASE("single row is an error") {
        CHECK_THROWS_AS(state_diversity(Matrix(1, 3)), InsufficientDataError);
    }
}

TEST_CASE("gripper pattern hysteresis") {
    const std::vector<std::string> oco = {"open", "closed", "open"};
    SUBCASE("clean open-closed-open passes") {
        CHECK(gripper_pattern_check({1, 1, 0, 0, 1}, 0.3, 0.7, oco));
    }
    SUBCASE("all-open fails the pattern") {
        CHECK_FALSE(gripper_pattern_check({1, 1, 1, 1}, 0.3, 0.7, oco));
    }
    SUBCASE("chatter around the high threshold stays a single run") {
        CHECK(gripper_pattern_check({0.68, 0.72, 0.69, 0.71}, 0.3, 0.7, {"open"}));
    }
    SUBCASE("undecided channel raises") {
        CHECK_THROWS_AS(gripper_pattern_check({0.5, 0.5, 0.5}, 0.3, 0.7, oco),
                        UndecidableError);
    }
    SUBCASE("undecided prefix before first decision is ignored") {
        CHECK(gripper_pattern_check({0.5, 0.9, 0.1, 0.9}, 0.3, 0.7, oco));
    }
}

TEST_CASE("qa_episode verdicts") {
    SineEpisodeSpec spec;
    spec.T = 50;
    spec.dims = 6;
    Episode clean = sine_episode(spec);

    QaConfig qa;
    qa.tremble_max = 0.3;
    qa.sharpness_min = 1.0;
    FilterConfig filt;
    filt.required_cameras = {"head"};

    SUBCASE("clean fixture is accepted") {
        QualityReport rep = qa_episode(clean, qa, filt);
        CHECK(rep.accepted);
        CHECK(rep.reject_reasons.empty());
        CHECK(rep.tremble >= 0.0);
        CHECK(rep.sharpness > 1.0);
    }
    SUBCASE("tremble threshold below the oracle score rejects") {
        SineEpisodeSpec noisy_spec = spec;
        noisy_spec.noise = 0.05;
        Episode noisy = sine_episode(noisy_spec);
        QaConfig strict = qa;
        strict.tremble_max = 0.5 * oracle_tremble(noisy.states, qa.smoothing_sigma);
        QualityReport rep = qa_episode(noisy, strict, filt);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reject_reasons == std::vector<std::string>{"tremble"});
    }
    SUBCASE("blurry frames reject on sharpness") {
        Episode blurry = clean;
        for (auto& f : blurry.cameras.at("head")) {
            f = box_blur5(box_blur5(box_blur5(f)));
        }
        QaConfig strict = qa;
        strict.sharpness_min = sharpness_score(clean.cameras.at("head"), 16);
        QualityReport rep = qa_episode(blurry, strict, filt);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reject_reasons == std::vector<std::string>{"sharpness"});
    }
    SUBCASE("structural failures surface as reject reasons") {
        FilterConfig missing = filt;
        missing.required_cameras = {"head", "left_wrist"};
        QualityReport rep = qa_episode(clean, qa, missing);
        CHECK_FALSE(rep.accepted);
        CHECK(rep.reject_reasons == std::vector<std::string>{"missing_camera"});
    }
    SUBCASE("gripper pattern mismatch rejects") {
        QaConfig grip = qa;
        grip.gripper_pattern = {"open", "closed", "open"};
        grip.gripper_channel = 0;
        QualityReport rep = qa_episode(clean, grip, filt);
        CHECK_FALSE(rep.gripper_pattern_ok);
        CHECK_FALSE(rep.accepted);
    }
}
