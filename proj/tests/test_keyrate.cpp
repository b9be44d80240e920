#include <cmath>
#include <random>

#include "doctest.h"

#include "qkdnet/keyrate.hpp"

using namespace qkdnet;

namespace {

CoincidenceTable table_from(double hh, double hv, double vh, double vv, double dd,
                            double da, double ad, double aa) {
    CoincidenceTable t;
    t.at(Outcome::H, Outcome::H) = hh;
    t.at(Outcome::H, Outcome::V) = hv;
    t.at(Outcome::V, Outcome::H) = vh;
    t.at(Outcome::V, Outcome::V) = vv;
    t.at(Outcome::D, Outcome::D) = dd;
    t.at(Outcome::D, Outcome::A) = da;
    t.at(Outcome::A, Outcome::D) = ad;
    t.at(Outcome::A, Outcome::A) = aa;
    return t;
}

struct PublishedColumn {
    double sifted_bps;
    double e_h, e_d;        // fractional
    double bar3_h, bar3_d;  // fractional 3-sigma bars
    double secure_bps;
};

constexpr double kTacq = 500.0;

const PublishedColumn kColumns[3] = {
    {32.5, 0.0235, 0.0215, 0.0051, 0.0048, 20.55072},
    {29.4, 0.0168, 0.0223, 0.0045, 0.0051, 19.66052},
    {16.3, 0.0472, 0.0722, 0.0100, 0.0120, 3.98380},
};

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.0235) == doctest::Approx(0.16066490).epsilon(1e-7));
    CHECK(binary_entropy(0.11) == doctest::Approx(0.49981).epsilon(1e-4));

    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        CHECK(binary_entropy(x) == doctest::Approx(binary_entropy(1.0 - x)).epsilon(1e-12));
        CHECK(binary_entropy(0.5 * (x + y)) >=
              0.5 * (binary_entropy(x) + binary_entropy(y)) - 1e-12);
    }

    CHECK_THROWS_AS((void)binary_entropy(-0.01), domain_error);
    CHECK_THROWS_AS((void)binary_entropy(1.01), domain_error);
}

TEST_CASE("qber estimation from a coincidence table") {
    const CoincidenceTable t = table_from(3, 100, 95, 2, 90, 4, 1, 95);
    const QberEstimate q = qber(t);
    CHECK(q.n_h == 200.0);
    CHECK(q.n_d == 190.0);
    CHECK(q.e_h == doctest::Approx(0.025).epsilon(1e-15));
    CHECK(q.e_d == doctest::Approx(5.0 / 190.0).epsilon(1e-15));
    CHECK(q.sigma_h == doctest::Approx(std::sqrt(0.025 * 0.975 / 200.0)).epsilon(1e-12));
    CHECK(q.sigma_d ==
          doctest::Approx(std::sqrt(q.e_d * (1.0 - q.e_d) / 190.0)).epsilon(1e-12));

    CHECK_THROWS_AS((void)qber(table_from(0, 0, 0, 0, 10, 0, 0, 10)), domain_error);
    CHECK_THROWS_AS((void)qber(table_from(0, 10, 10, 0, 0, 0, 0, 0)), domain_error);
}

TEST_CASE("sifted rate and its Poisson bar") {
    const CoincidenceTable t = table_from(0, 8000, 8000, 0, 125, 0, 0, 125);
    const RateWithBar r = sifted_rate(t, kTacq);
    CHECK(r.bps == doctest::Approx(32.5).epsilon(1e-15));
    CHECK(r.bar3 == doctest::Approx(0.764853).epsilon(1e-6));

    const RateWithBar half = sifted_rate(t, 250.0);
    CHECK(half.bps == doctest::Approx(65.0).epsilon(1e-15));

    const RateWithBar empty = sifted_rate(CoincidenceTable{}, kTacq);
    CHECK(empty.bps == 0.0);
    CHECK(empty.bar3 == 0.0);

    CHECK_THROWS_AS((void)sifted_rate(t, 0.0), domain_error);
}

TEST_CASE("published aggregates reconstruct the finite-sample bars") {
    const double bars[3] = {0.764853, 0.727461, 0.541664};
    for (int i = 0; i < 3; ++i) {
        const RateWithBar r = published_sifted(kColumns[i].sifted_bps, kTacq);
        CHECK(r.bps == kColumns[i].sifted_bps);
        CHECK(r.bar3 == doctest::Approx(bars[i]).epsilon(1e-6));
    }

    // Binomial bars from the split sifted counts, in percentage points.
    const double bar_h_pp[3] = {0.504173, 0.449731, 0.996619};
    const double bar_d_pp[3] = {0.482735, 0.516693, 1.216335};
    for (int i = 0; i < 3; ++i) {
        const PublishedColumn& c = kColumns[i];
        const QberEstimate q = published_qber(c.e_h, c.e_d, c.sifted_bps, kTacq);
        CHECK(q.n_h == doctest::Approx(c.sifted_bps * kTacq / 2.0).epsilon(1e-12));
        CHECK(q.n_d == q.n_h);
        CHECK(300.0 * q.sigma_h == doctest::Approx(bar_h_pp[i]).epsilon(1e-5));
        CHECK(300.0 * q.sigma_d == doctest::Approx(bar_d_pp[i]).epsilon(1e-5));
    }

    // Explicit published bars override the binomial estimate.
    const QberEstimate q =
        published_qber(0.0235, 0.0215, 32.5, kTacq, 0.0051, 0.0048);
    CHECK(q.sigma_h == doctest::Approx(0.0017).epsilon(1e-12));
    CHECK(q.sigma_d == doctest::Approx(0.0016).epsilon(1e-12));

    CHECK_THROWS_AS((void)published_sifted(-1.0, kTacq), domain_error);
    CHECK_THROWS_AS((void)published_sifted(32.5, 0.0), domain_error);
    CHECK_THROWS_AS((void)published_qber(1.1, 0.02, 32.5, kTacq), domain_error);
}

TEST_CASE("secure rate reproduces the three published operating points") {
    const double nominal[3] = {20.5, 19.7, 4.0};
    for (int i = 0; i < 3; ++i) {
        const PublishedColumn& c = kColumns[i];
        const RateWithBar sifted = published_sifted(c.sifted_bps, kTacq);
        const QberEstimate q =
            published_qber(c.e_h, c.e_d, c.sifted_bps, kTacq, c.bar3_h, c.bar3_d);
        const SecureRate s = secure_rate(sifted, q, 1.2);
        CHECK_FALSE(s.below_threshold);
        CHECK(s.bps == doctest::Approx(c.secure_bps).epsilon(1e-4));
        CHECK(std::abs(s.bps - nominal[i]) < 0.3);
        CHECK(s.bar3 > 0.0);
    }
}

TEST_CASE("secure rate limiting behavior") {
    const RateWithBar sifted{100.0, 1.5};

    QberEstimate perfect;
    perfect.n_h = perfect.n_d = 1000.0;
    const SecureRate ideal = secure_rate(sifted, perfect, 1.2);
    CHECK(ideal.bps == 100.0);
    CHECK(ideal.bar3 == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_FALSE(ideal.below_threshold);

    QberEstimate half;
    half.e_h = 0.5;
    half.e_d = 0.01;
    const SecureRate dead = secure_rate(sifted, half, 1.2);
    CHECK(dead.bps == 0.0);
    CHECK(dead.bar3 == 0.0);
    CHECK(dead.below_threshold);

    QberEstimate noisy;  // K < 0 well before 50%
    noisy.e_h = noisy.e_d = 0.3;
    CHECK(secure_rate(sifted, noisy, 1.2).below_threshold);

    QberEstimate q;
    q.e_h = q.e_d = 0.02;
    CHECK_THROWS_AS((void)secure_rate(sifted, q, 0.9), domain_error);
    QberEstimate bad;
    bad.e_h = -0.1;
    CHECK_THROWS_AS((void)secure_rate(sifted, bad, 1.2), domain_error);
}

TEST_CASE("secure rate is monotone in error rate, uncertainty and inefficiency") {
    const RateWithBar sifted{100.0, 0.0};

    double prev = 1e18;
    for (double e = 0.0; e <= 0.45; e += 0.05) {
        QberEstimate q;
        q.e_h = q.e_d = e;
        const SecureRate s = secure_rate(sifted, q, 1.2);
        CHECK(s.bps <= prev + 1e-12);
        prev = s.bps;
    }

    QberEstimate q;
    q.e_h = q.e_d = 0.03;
    prev = 1e18;
    for (double f = 1.0; f <= 2.0; f += 0.25) {
        const SecureRate s = secure_rate(sifted, q, f);
        CHECK(s.bps <= prev + 1e-12);
        prev = s.bps;
    }

    prev = 1e18;
    for (double sigma = 0.0; sigma <= 0.02; sigma += 0.005) {
        QberEstimate qs;
        qs.e_h = qs.e_d = 0.03;
        qs.sigma_h = qs.sigma_d = sigma;
        const SecureRate s = secure_rate(sifted, qs, 1.2);
        CHECK(s.bps <= prev + 1e-12);
        prev = s.bps;
    }
}

TEST_CASE("improvement projections compose multiplicatively") {
    ImprovementScenario all;
    all.dual_detectors = true;
    all.splice_loss = true;
    all.detector_efficiency = true;
    all.rep_rate = true;
    CHECK(all.factor() == doctest::Approx(3600.0).epsilon(1e-15));

    Projection p = project_scenario(20.5, all);
    CHECK(p.per_channel_bps == doctest::Approx(73800.0).epsilon(1e-12));
    CHECK(p.per_channel_bps > 73000.0);
    CHECK(p.per_channel_bps < 75000.0);

    all.channels = 20;
    p = project_scenario(20.5, all);
    CHECK(p.aggregate_bps == doctest::Approx(1.476e6).epsilon(1e-12));
    CHECK(p.aggregate_bps >= 1.4e6);

    const Projection identity = project_scenario(20.5, ImprovementScenario{});
    CHECK(identity.factor == 1.0);
    CHECK(identity.per_channel_bps == 20.5);
    CHECK(identity.aggregate_bps == 20.5);

    ImprovementScenario pairwise;
    pairwise.dual_detectors = true;
    pairwise.splice_loss = true;
    CHECK(pairwise.factor() == doctest::Approx(16.0).epsilon(1e-15));

    CHECK_THROWS_AS((void)project_scenario(-1.0, all), domain_error);
    ImprovementScenario none;
    none.channels = 0;
    CHECK_THROWS_AS((void)project_scenario(20.5, none), domain_error);
}

TEST_CASE("stability series partitions pulses into windows") {
    BinnedStream a, b;
    const auto pair = [&](std::uint64_t sync, Outcome oa, Outcome ob) {
        a.events.push_back({sync, oa});
        b.events.push_back({sync, ob});
    };
    pair(10, Outcome::H, Outcome::V);
    pair(12, Outcome::D, Outcome::D);
    pair(50, Outcome::D, Outcome::D);
    pair(90, Outcome::H, Outcome::H);
    pair(91, Outcome::H, Outcome::V);
    pair(92, Outcome::A, Outcome::D);
    pair(93, Outcome::D, Outcome::D);

    const auto series = stability_series(a, b, 40, 100, 1000.0);
    REQUIRE(series.size() == 3);

    CHECK(series[0].window_index == 0);
    CHECK(series[0].t_start_s == doctest::Approx(0.0));
    CHECK(series[0].t_end_s == doctest::Approx(0.04));
    CHECK_FALSE(series[0].empty);
    CHECK(series[0].q.e_h == 0.0);
    CHECK(series[0].q.e_d == 0.0);
    CHECK(series[0].q.n_h == 1.0);
    CHECK(series[0].q.n_d == 1.0);

    CHECK(series[1].empty);  // D/A only, H/V basis empty
    CHECK(series[1].t_start_s == doctest::Approx(0.04));

    CHECK(series[2].t_end_s == doctest::Approx(0.1));  // last window is short
    CHECK_FALSE(series[2].empty);
    CHECK(series[2].q.e_h == doctest::Approx(0.5));
    CHECK(series[2].q.e_d == doctest::Approx(0.5));

    // One window spanning everything reproduces the whole-run estimate.
    const auto whole = stability_series(a, b, 1000, 100, 1000.0);
    REQUIRE(whole.size() == 1);
    const QberEstimate q = qber(coincidences(a, b));
    CHECK(whole[0].q.e_h == doctest::Approx(q.e_h).epsilon(1e-15));
    CHECK(whole[0].q.e_d == doctest::Approx(q.e_d).epsilon(1e-15));
    CHECK(whole[0].q.n_h == q.n_h);
    CHECK(whole[0].q.n_d == q.n_d);

    CHECK(stability_series(a, b, 10, 0, 1000.0).empty());
    CHECK_THROWS_AS((void)stability_series(a, b, 0, 100, 1000.0), domain_error);
    CHECK_THROWS_AS((void)stability_series(a, b, 10, 100, 0.0), domain_error);
}
