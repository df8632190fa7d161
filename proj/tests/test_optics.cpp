#include <doctest.h>

#include <cmath>
#include <limits>

#include "blindsim/optics.hpp"

using namespace blindsim;

TEST_CASE("attenuation arithmetic")
{
    Waveform w;
    w.segments.push_back({0, 10, false, 0.0, 1e-3, 0.0});

    CHECK(apply_attenuation(w, 0.0).segments[0].pol_power == 1e-3);
    CHECK(apply_attenuation(w, 60.0).segments[0].pol_power ==
          doctest::Approx(1e-9).epsilon(1e-12));

    Waveform q;
    q.segments.push_back({0, 1, true, 0.0, 0.1, 0.0});
    CHECK(apply_attenuation(q, 10.0).segments[0].pol_power ==
          doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("attenuation composes additively in dB")
{
    Waveform w;
    w.segments.push_back({0, 10, false, 2e-6, 3e-6, 30.0});
    const auto seq = apply_attenuation(apply_attenuation(w, 12.5), 7.5);
    const auto once = apply_attenuation(w, 20.0);
    CHECK(seq.segments[0].pol_power ==
          doctest::Approx(once.segments[0].pol_power).epsilon(1e-12));
    CHECK(seq.segments[0].unpol_power ==
          doctest::Approx(once.segments[0].unpol_power).epsilon(1e-12));
}

TEST_CASE("Malus projection over all four states and both analyzers")
{
    // Expected transmitted fractions computed by hand: cos^2 of the angle
    // between state and analyzer axis.
    struct Row {
        double state_deg;
        double analyzer_deg;
        double d0_fraction;
    };
    const Row table[] = {
        {0.0, 0.0, 1.0},   {90.0, 0.0, 0.0},  {45.0, 0.0, 0.5},  {135.0, 0.0, 0.5},
        {0.0, 45.0, 0.5},  {90.0, 45.0, 0.5}, {45.0, 45.0, 1.0}, {135.0, 45.0, 0.0},
    };
    const double p = 3.2e-6;
    for (const auto& row : table) {
        const auto [d0, d1] = project_onto_basis(p, row.state_deg, row.analyzer_deg);
        CHECK(d0 == doctest::Approx(p * row.d0_fraction).epsilon(1e-9).scale(p));
        CHECK(d0 + d1 == p); // exact by construction
    }
}

TEST_CASE("projection bounds hold for arbitrary angles")
{
    SlotRng rng(3, Stream::DetectorNoise, 0);
    for (int i = 0; i < 1000; ++i) {
        const double p = rng.next_double() * 1e-3;
        const double state = rng.next_double() * 360.0;
        const double axis = rng.next_double() * 360.0;
        const auto [d0, d1] = project_onto_basis(p, state, axis);
        CHECK(d0 >= 0.0);
        CHECK(d0 <= p);
        CHECK(d1 >= 0.0);
        CHECK(d1 <= p);
        // d1 = p - d0 can round when d0 < p/2; one ulp of slack
        CHECK(std::fabs(d0 + d1 - p) <=
              std::numeric_limits<double>::epsilon() * p);
    }
}

TEST_CASE("passive splitter halves power and composes to quarters")
{
    OpticalSegment s{0, 10, false, 0.0, 2e-6, 45.0};
    const auto [a, b] = split_passive(s);
    CHECK(a.pol_power == 1e-6);
    CHECK(b.pol_power == 1e-6);

    OpticalSegment zero{0, 10, false, 0.0, 0.0, 0.0};
    CHECK(split_passive(zero).first.total_power() == 0.0);

    // D state through BS then a rectilinear PBS: each detector of that arm
    // sees a quarter of the input.
    const auto [rect_arm, diag_arm] = split_passive(s);
    (void)diag_arm;
    const auto [d0, d1] = project_onto_basis(rect_arm.pol_power, 45.0, 0.0);
    CHECK(d0 == doctest::Approx(0.25 * s.pol_power).epsilon(1e-12));
    CHECK(d1 == doctest::Approx(0.25 * s.pol_power).epsilon(1e-12));
}

TEST_CASE("detector_share combines arm fraction, unpolarized split and Malus")
{
    OpticalSegment s{0, 10, false, 8e-6, 4e-6, 0.0};
    // arm fraction 0.5, analyzer at 0 deg: 0.5*(0.5*8u + 4u) = 4u
    CHECK(detector_share(s, 0.5, 0.0) == doctest::Approx(4e-6).epsilon(1e-12));
    // analyzer at 90 deg: polarized part fully reflected
    CHECK(detector_share(s, 0.5, 90.0) == doctest::Approx(2e-6).epsilon(1e-6));
}

TEST_CASE("photocount statistics match the Poisson tail")
{
    SlotRng rng(11, Stream::DetectorNoise, 0);
    CHECK(sample_photocount(0.0, 1.0, rng) == 0);
    CHECK(sample_photocount(0.5, 0.0, rng) == 0);

    const double mu = 0.1, eta = 0.5;
    const int n = 1000000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
        hits += sample_photocount(mu, eta, rng) >= 1 ? 1 : 0;
    const double expected = 1.0 - std::exp(-mu * eta);
    const double p = static_cast<double>(hits) / n;
    const double sigma = std::sqrt(expected * (1.0 - expected) / n);
    CHECK(std::fabs(p - expected) < 3.0 * sigma);
}

TEST_CASE("waveform well-formedness rejects overlap and negative power")
{
    Waveform w;
    w.segments.push_back({0, 10, false, 1.0, 0.0, 0.0});
    w.segments.push_back({10, 5, false, 0.0, 1.0, 0.0});
    CHECK(w.well_formed());

    Waveform overlap = w;
    overlap.segments.push_back({12, 5, false, 1.0, 0.0, 0.0});
    CHECK(!overlap.well_formed());

    Waveform negative;
    negative.segments.push_back({0, 10, false, -1.0, 0.0, 0.0});
    CHECK(!negative.well_formed());
}
