#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fgp/design.hpp"
#include "fgp/prng.hpp"
#include "fgp/synth.hpp"

using namespace fgp;
using linalg::Matrix;

TEST_CASE("empirical flooding probability") {
    Matrix stack(4, 3);
    // location 0 flooded in 2 of 4 scenarios, location 1 never, location 2 always
    stack(0, 0) = 0.4;
    stack(1, 0) = 0.9;
    stack(0, 2) = 0.1;
    stack(1, 2) = 0.2;
    stack(2, 2) = 0.3;
    stack(3, 2) = 0.4;
    const std::vector<double> efp = design::compute_efp(stack);
    CHECK(efp[0] == doctest::Approx(0.5));
    CHECK(efp[1] == 0.0);
    CHECK(efp[2] == 1.0);

    for (double v : design::compute_efp(Matrix(3, 2))) CHECK(v == 0.0);
    for (double v : efp) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("kmeans degenerate counts") {
    rng::SplitMix64 stream(1);
    Matrix pts(6, 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts.data()[i] = stream.normal();

    SUBCASE("k = n gives zero inertia") {
        const design::KMeansResult r = design::kmeans(pts, 6, 0);
        CHECK(r.inertia == doctest::Approx(0.0).epsilon(1e-12));
        std::set<std::size_t> used(r.assignments.begin(), r.assignments.end());
        CHECK(used.size() == 6);
    }
    SUBCASE("k = 1 gives the coordinate mean") {
        const design::KMeansResult r = design::kmeans(pts, 1, 0);
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            m0 += pts(i, 0);
            m1 += pts(i, 1);
        }
        CHECK(r.centroids(0, 0) == doctest::Approx(m0 / 6.0));
        CHECK(r.centroids(0, 1) == doctest::Approx(m1 / 6.0));
    }
    SUBCASE("k > n is rejected") {
        CHECK_THROWS_AS(design::kmeans(pts, 7, 0), parameter_error);
    }
}

TEST_CASE("kmeans separates two unit-separated blobs") {
    rng::SplitMix64 stream(2);
    Matrix pts(20, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        pts(i, 0) = 0.05 * stream.normal();
        pts(i, 1) = 0.05 * stream.normal();
        pts(10 + i, 0) = 1.0 + 0.05 * stream.normal();
        pts(10 + i, 1) = 1.0 + 0.05 * stream.normal();
    }
    const design::KMeansResult r = design::kmeans(pts, 2, 7);

    // exhaustive 2-partition oracle: blob-pure split minimizes the inertia
    auto partition_inertia = [&](unsigned mask) {
        double cx[2] = {0, 0}, cy[2] = {0, 0};
        int n[2] = {0, 0};
        for (std::size_t i = 0; i < 20; ++i) {
            const int g = (mask >> i) & 1u;
            cx[g] += pts(i, 0);
            cy[g] += pts(i, 1);
            ++n[g];
        }
        if (n[0] == 0 || n[1] == 0) return 1e300;
        double inertia = 0.0;
        for (std::size_t i = 0; i < 20; ++i) {
            const int g = (mask >> i) & 1u;
            const double dx = pts(i, 0) - cx[g] / n[g];
            const double dy = pts(i, 1) - cy[g] / n[g];
            inertia += dx * dx + dy * dy;
        }
        return inertia;
    };
    double best = 1e300;
    unsigned best_mask = 0;
    for (unsigned mask = 1; mask < (1u << 20) - 1; ++mask) {
        const double v = partition_inertia(mask);
        if (v < best) {
            best = v;
            best_mask = mask;
        }
    }
    // the oracle's best partition is blob-pure
    const unsigned lower_ten = (1u << 10) - 1;
    CHECK((best_mask == lower_ten || best_mask == (~lower_ten & ((1u << 20) - 1))));

    // kmeans found the same assignment (up to label swap) and inertia
    for (std::size_t i = 1; i < 10; ++i) CHECK(r.assignments[i] == r.assignments[0]);
    for (std::size_t i = 11; i < 20; ++i) CHECK(r.assignments[i] == r.assignments[10]);
    CHECK(r.assignments[0] != r.assignments[10]);
    CHECK(r.inertia == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("kmeans inertia never increases across reruns with more iterations") {
    rng::SplitMix64 stream(3);
    Matrix pts(40, 3);
    for (std::size_t i = 0; i < pts.size(); ++i) pts.data()[i] = stream.normal();
    const design::KMeansResult a = design::kmeans(pts, 5, 11);
    const design::KMeansResult b = design::kmeans(pts, 5, 11);
    CHECK(a.inertia == b.inertia);  // deterministic per seed
    CHECK(a.assignments == b.assignments);
}

TEST_CASE("select_doe honors classes, mandatory points and de-duplication") {
    // strip of candidates: half with high EFP, half with low EFP, some dry
    const std::size_t g = 60;
    Matrix locations(g, 2);
    std::vector<double> efp(g);
    for (std::size_t i = 0; i < g; ++i) {
        locations(i, 0) = static_cast<double>(i % 10) / 9.0;
        locations(i, 1) = static_cast<double>(i / 10) / 5.0;
        if (i < 20)
            efp[i] = 0.5 + 0.3 * static_cast<double>(i) / 20.0;  // class 1
        else if (i < 50)
            efp[i] = 0.05 + 0.3 * static_cast<double>(i - 20) / 30.0;  // class 2
        else
            efp[i] = 0.0;  // dry
    }

    // mandatory points on dry land cannot collide with cluster picks
    const std::vector<std::size_t> mandatory{55, 58};
    const design::DoeResult doe = design::select_doe(locations, efp, 4, 6, 0.4, mandatory, 3);

    // no duplicates
    std::set<std::size_t> unique(doe.selected.begin(), doe.selected.end());
    CHECK(unique.size() == doe.selected.size());
    // mandatory present
    for (std::size_t m : mandatory) CHECK(unique.count(m) == 1);
    // class labels match the EFP strata for non-mandatory picks
    for (std::size_t i = 0; i < doe.selected.size(); ++i) {
        const std::size_t idx = doe.selected[i];
        if (doe.class_labels[i] == 1) CHECK(efp[idx] >= 0.4);
        if (doe.class_labels[i] == 2) {
            CHECK(efp[idx] > 0.0);
            CHECK(efp[idx] < 0.4);
        }
    }
    // promised count: kappa1 + kappa2 + mandatory (no collisions here)
    CHECK(doe.selected.size() == 4 + 6 + 2);

    // empty class: every location wet with high EFP, class 2 empty
    std::vector<double> all_high(g, 0.9);
    CHECK_THROWS_AS(design::select_doe(locations, all_high, 2, 2, 0.4, {}, 0), parameter_error);
}

TEST_CASE("select_doe single-cluster strip picks the most central wet point") {
    // uniform-EFP strip: kappa1 = 0, kappa2 = 1 must select the point whose
    // clustering feature vector is nearest the feature mean (exhaustive check)
    const std::size_t g = 11;
    Matrix locations(g, 2);
    std::vector<double> efp(g, 0.2);
    for (std::size_t i = 0; i < g; ++i) {
        locations(i, 0) = static_cast<double>(i) / 10.0;
        locations(i, 1) = 0.0;
    }

    const design::DoeResult doe = design::select_doe(locations, efp, 0, 1, 0.4, {}, 5);
    REQUIRE(doe.selected.size() == 1);

    // oracle: nearest-to-mean over the candidates; x = 0.5 sits exactly on it
    double mean_x = 0.0;
    for (std::size_t i = 0; i < g; ++i) mean_x += locations(i, 0);
    mean_x /= static_cast<double>(g);
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < g; ++i) {
        const double d = std::abs(locations(i, 0) - mean_x);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    CHECK(best == 5);
    CHECK(doe.selected[0] == best);
}

TEST_CASE("maximin latin hypercube designs are stratified and maximin over candidates") {
    SUBCASE("n=2, dims=1 stratification") {
        const Matrix d = design::maximin_lhd(2, 1, 5, 42);
        const double lo = std::min(d(0, 0), d(1, 0));
        const double hi = std::max(d(0, 0), d(1, 0));
        CHECK(lo >= 0.0);
        CHECK(lo < 0.5);
        CHECK(hi >= 0.5);
        CHECK(hi < 1.0);
    }

    SUBCASE("n=5, dims=2 stratification in both axes") {
        const Matrix d = design::maximin_lhd(5, 2, 8, 7);
        for (std::size_t axis = 0; axis < 2; ++axis) {
            std::vector<int> strata(5, 0);
            for (std::size_t i = 0; i < 5; ++i) {
                const int s = static_cast<int>(d(i, axis) * 5.0);
                REQUIRE(s >= 0);
                REQUIRE(s < 5);
                ++strata[s];
            }
            for (int count : strata) CHECK(count == 1);
        }
    }

    SUBCASE("returned design maximizes the candidate min-distance") {
        std::vector<Matrix> candidates;
        const Matrix best = design::maximin_lhd(8, 2, 12, 3, &candidates);
        REQUIRE(candidates.size() == 12);
        auto min_d2 = [](const Matrix& m) {
            double v = 1e300;
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = i + 1; j < m.rows(); ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < m.cols(); ++k) {
                        const double d = m(i, k) - m(j, k);
                        s += d * d;
                    }
                    v = std::min(v, s);
                }
            return v;
        };
        const double best_v = min_d2(best);
        for (const Matrix& cand : candidates) CHECK(best_v >= min_d2(cand) - 1e-15);
    }

    SUBCASE("deterministic per seed") {
        const Matrix a = design::maximin_lhd(6, 3, 4, 99);
        const Matrix b = design::maximin_lhd(6, 3, 4, 99);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
}

TEST_CASE("scalar summaries and standardization") {
    const std::vector<std::vector<double>> constant{{3.0, 3.0, 3.0}};
    const std::vector<double> f = design::scalar_summaries(constant);
    CHECK(f[0] == 3.0);
    CHECK(f[1] == 3.0);

    // monotone channel on [0,1] with 37 points: max 1, mean 0.5
    std::vector<double> ramp(37);
    for (std::size_t t = 0; t < 37; ++t) ramp[t] = static_cast<double>(t) / 36.0;
    const std::vector<double> g = design::scalar_summaries({ramp});
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(0.5));

    // standardized features have zero mean and unit variance per column
    synth::SynthConfig cfg;
    cfg.channels = 2;
    cfg.scenarios = 12;
    cfg.time_points = 20;
    cfg.seed = 4;
    const funspace::ScenarioInputs inputs = synth::gen_inputs(cfg);
    const Matrix feats = design::standardized_features(inputs);
    REQUIRE(feats.rows() == 12);
    REQUIRE(feats.cols() == 4);
    for (std::size_t j = 0; j < feats.cols(); ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < feats.rows(); ++i) mean += feats(i, j);
        mean /= 12.0;
        for (std::size_t i = 0; i < feats.rows(); ++i)
            var += (feats(i, j) - mean) * (feats(i, j) - mean);
        var /= 12.0;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("scenario selection covers clusters and supports enrichment") {
    rng::SplitMix64 stream(5);
    // two well-separated feature clusters of 5 scenarios each
    Matrix feats(10, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        feats(i, 0) = 0.02 * stream.normal();
        feats(i, 1) = 0.02 * stream.normal();
        feats(5 + i, 0) = 3.0 + 0.02 * stream.normal();
        feats(5 + i, 1) = 3.0 + 0.02 * stream.normal();
    }
    const std::vector<std::size_t> two = design::select_scenarios(feats, 2, 1);
    REQUIRE(two.size() == 2);
    CHECK(((two[0] < 5) != (two[1] < 5)));  // one representative per cluster

    // k = R with nothing excluded returns every scenario
    const std::vector<std::size_t> all = design::select_scenarios(feats, 10, 1);
    CHECK(all.size() == 10);

    // enrichment never returns previously selected indices
    const std::vector<std::size_t> first = design::select_scenarios(feats, 4, 9);
    const std::vector<std::size_t> second = design::select_scenarios(feats, 4, 9, first);
    for (std::size_t idx : second)
        CHECK(std::find(first.begin(), first.end(), idx) == first.end());

    CHECK_THROWS_AS(design::select_scenarios(feats, 8, 0, first), parameter_error);
}
