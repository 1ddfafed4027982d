#include "fgp/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fgp/prng.hpp"

namespace fgp::design {

std::vector<double> compute_efp(const Matrix& values, double wet_threshold) {
    const std::size_t r = values.rows();
    const std::size_t g = values.cols();
    if (r == 0 || g == 0) throw data_error("compute_efp: empty map stack");
    std::vector<double> efp(g, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < g; ++j)
            if (values(i, j) > wet_threshold) efp[j] += 1.0;
    for (double& v : efp) v /= static_cast<double>(r);
    return efp;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (k == 0 || k > n) throw parameter_error("kmeans: k must satisfy 1 <= k <= n");

    rng::SplitMix64 stream(rng::SplitMix64::mix(seed ^ 0x6b6d65616e73ULL));

    // distance-squared seeding
    Matrix centroids(k, d);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(stream.below(n));
    std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_d2[i] = std::min(min_d2[i], sq_dist(points.row(i), centroids.row(c - 1)));
            total += min_d2[i];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double target = stream.uniform01() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d2[i];
                if (min_d2[i] > 0.0 && acc >= target) {
                    chosen = i;
                    break;
                }
                if (min_d2[i] > 0.0) chosen = i;  // last positive-mass fallback
            }
        } else {
            chosen = static_cast<std::size_t>(stream.below(n));
        }
        std::copy(points.row(chosen).begin(), points.row(chosen).end(),
                  centroids.row(c).begin());
    }

    KMeansResult result;
    result.assignments.assign(n, 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    constexpr int kMaxIterations = 300;

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d2 = sq_dist(points.row(i), centroids.row(c));
                if (d2 < best) {
                    best = d2;
                    arg = c;
                }
            }
            result.assignments[i] = arg;
            inertia += best;
        }

        Matrix sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = result.assignments[i];
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) sums(c, j) += points(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // revive an empty cluster at the point farthest from its centroid
                double far = -1.0;
                std::size_t arg = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d2 =
                        sq_dist(points.row(i), centroids.row(result.assignments[i]));
                    if (d2 > far) {
                        far = d2;
                        arg = i;
                    }
                }
                std::copy(points.row(arg).begin(), points.row(arg).end(),
                          centroids.row(c).begin());
                continue;
            }
            for (std::size_t j = 0; j < d; ++j)
                centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }

        result.iterations = iter + 1;
        result.inertia = inertia;
        if (std::abs(prev_inertia - inertia) <= 1e-9 * (1.0 + inertia)) break;
        prev_inertia = inertia;
    }

    result.centroids = std::move(centroids);
    return result;
}

DoeResult select_doe(const Matrix& locations, const std::vector<double>& efp,
                     std::size_t kappa1, std::size_t kappa2, double efp_split,
                     const std::vector<std::size_t>& mandatory, std::uint64_t seed) {
    const std::size_t g = locations.rows();
    if (locations.cols() != 2) throw shape_error("select_doe: locations must be G x 2");
    if (efp.size() != g) throw shape_error("select_doe: EFP length mismatch");
    if (!(efp_split > 0.0) || !(efp_split < 1.0))
        throw parameter_error("select_doe: efp_split must lie in (0, 1)");

    // min-max normalization of coordinates; EFP enters on its own [0,1] scale
    double lo1 = locations(0, 0), hi1 = lo1, lo2 = locations(0, 1), hi2 = lo2;
    for (std::size_t i = 1; i < g; ++i) {
        lo1 = std::min(lo1, locations(i, 0));
        hi1 = std::max(hi1, locations(i, 0));
        lo2 = std::min(lo2, locations(i, 1));
        hi2 = std::max(hi2, locations(i, 1));
    }
    const double w1 = hi1 > lo1 ? hi1 - lo1 : 1.0;
    const double w2 = hi2 > lo2 ? hi2 - lo2 : 1.0;

    std::vector<std::size_t> class1, class2;
    for (std::size_t i = 0; i < g; ++i) {
        if (efp[i] >= efp_split)
            class1.push_back(i);
        else if (efp[i] > 0.0)
            class2.push_back(i);
    }

    DoeResult out;
    out.mandatory = mandatory;

    auto pick_class = [&](const std::vector<std::size_t>& members, std::size_t kappa,
                          int label, std::uint64_t stream_tag) {
        if (kappa == 0) return;
        if (members.empty())
            throw parameter_error(
                "select_doe: a stratification class is empty; adjust efp_split");
        if (kappa > members.size())
            throw parameter_error("select_doe: more clusters than candidate locations");
        Matrix feats(members.size(), 3);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const std::size_t idx = members[i];
            feats(i, 0) = (locations(idx, 0) - lo1) / w1;
            feats(i, 1) = (locations(idx, 1) - lo2) / w2;
            feats(i, 2) = efp[idx];
        }
        const KMeansResult km = kmeans(feats, kappa, rng::SplitMix64::mix(seed ^ stream_tag));
        for (std::size_t c = 0; c < kappa; ++c) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = members.size();
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (km.assignments[i] != c) continue;
                const double d2 = sq_dist(feats.row(i), km.centroids.row(c));
                if (d2 < best) {
                    best = d2;
                    arg = i;
                }
            }
            if (arg == members.size()) continue;  // cannot happen after revival
            out.selected.push_back(members[arg]);
            out.class_labels.push_back(label);
        }
    };

    pick_class(class1, kappa1, 1, 0x646f6531ULL);
    pick_class(class2, kappa2, 2, 0x646f6532ULL);

    for (std::size_t idx : mandatory) {
        if (idx >= g) throw parameter_error("select_doe: mandatory index out of range");
        out.selected.push_back(idx);
        out.class_labels.push_back(0);
    }

    // de-duplicate, keeping first occurrence
    std::vector<std::size_t> dedup;
    std::vector<int> dedup_labels;
    for (std::size_t i = 0; i < out.selected.size(); ++i) {
        const std::size_t idx = out.selected[i];
        bool seen = false;
        for (std::size_t j : dedup)
            if (j == idx) {
                seen = true;
                break;
            }
        if (!seen) {
            dedup.push_back(idx);
            dedup_labels.push_back(out.class_labels[i]);
        } else if (out.class_labels[i] == 0) {
            // mandatory point already selected by clustering: relabel it
            for (std::size_t j = 0; j < dedup.size(); ++j)
                if (dedup[j] == idx) dedup_labels[j] = 0;
        }
    }
    out.selected = std::move(dedup);
    out.class_labels = std::move(dedup_labels);
    return out;
}

Matrix maximin_lhd(std::size_t n, std::size_t dims, std::size_t restarts, std::uint64_t seed,
                   std::vector<Matrix>* candidates_out) {
    if (n == 0 || dims == 0) throw parameter_error("maximin_lhd: n and dims must be positive");
    rng::SplitMix64 stream(rng::SplitMix64::mix(seed ^ 0x6c686421ULL));
    restarts = std::max<std::size_t>(1, restarts);

    Matrix best;
    double best_min_d2 = -1.0;
    std::vector<std::size_t> perm(n);
    for (std::size_t t = 0; t < restarts; ++t) {
        rng::SplitMix64 sub = stream.split(t);
        Matrix cand(n, dims);
        for (std::size_t j = 0; j < dims; ++j) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = n; i-- > 1;)
                std::swap(perm[i], perm[static_cast<std::size_t>(sub.below(i + 1))]);
            for (std::size_t i = 0; i < n; ++i)
                cand(i, j) = (static_cast<double>(perm[i]) + sub.uniform01()) /
                             static_cast<double>(n);
        }
        double min_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                min_d2 = std::min(min_d2, sq_dist(cand.row(i), cand.row(j)));
        if (n == 1) min_d2 = 0.0;
        if (candidates_out != nullptr) candidates_out->push_back(cand);
        if (min_d2 > best_min_d2) {
            best_min_d2 = min_d2;
            best = std::move(cand);
        }
    }
    return best;
}

std::vector<double> scalar_summaries(const std::vector<std::vector<double>>& scenario_curves) {
    if (scenario_curves.empty()) throw data_error("scalar_summaries: no channels");
    std::vector<double> features;
    features.reserve(2 * scenario_curves.size());
    for (const std::vector<double>& curve : scenario_curves) {
        if (curve.empty()) throw data_error("scalar_summaries: empty channel");
        double maxi = curve.front();
        double mean = 0.0;
        for (double v : curve) {
            maxi = std::max(maxi, v);
            mean += v;
        }
        features.push_back(maxi);
        features.push_back(mean / static_cast<double>(curve.size()));
    }
    return features;
}

Matrix standardized_features(const ScenarioInputs& inputs) {
    inputs.validate();
    const std::size_t r = inputs.scenario_count();
    const std::size_t q = inputs.channel_count();
    Matrix feats(r, 2 * q);
    for (std::size_t i = 0; i < r; ++i) {
        std::vector<std::vector<double>> curves(q);
        for (std::size_t c = 0; c < q; ++c) {
            auto row = inputs.channels[c].values.row(i);
            curves[c].assign(row.begin(), row.end());
        }
        const std::vector<double> f = scalar_summaries(curves);
        std::copy(f.begin(), f.end(), feats.row(i).begin());
    }
    for (std::size_t j = 0; j < feats.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < r; ++i) mean += feats(i, j);
        mean /= static_cast<double>(r);
        double var = 0.0;
        for (std::size_t i = 0; i < r; ++i) var += (feats(i, j) - mean) * (feats(i, j) - mean);
        var /= static_cast<double>(r);
        const double sd = std::sqrt(var);
        for (std::size_t i = 0; i < r; ++i)
            feats(i, j) = sd > 0.0 ? (feats(i, j) - mean) / sd : 0.0;
    }
    return feats;
}

std::vector<std::size_t> select_scenarios(const Matrix& features, std::size_t k,
                                          std::uint64_t seed,
                                          const std::vector<std::size_t>& exclude) {
    const std::size_t r = features.rows();
    std::vector<bool> excluded(r, false);
    for (std::size_t idx : exclude) {
        if (idx >= r) throw parameter_error("select_scenarios: exclude index out of range");
        excluded[idx] = true;
    }
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < r; ++i)
        if (!excluded[i]) pool.push_back(i);
    if (k > pool.size())
        throw parameter_error("select_scenarios: k exceeds the non-excluded scenario count");

    Matrix sub(pool.size(), features.cols());
    for (std::size_t i = 0; i < pool.size(); ++i)
        std::copy(features.row(pool[i]).begin(), features.row(pool[i]).end(), sub.row(i).begin());

    const KMeansResult km = kmeans(sub, k, seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = pool.size();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (km.assignments[i] != c) continue;
            const double d2 = sq_dist(sub.row(i), km.centroids.row(c));
            if (d2 < best) {
                best = d2;
                arg = i;
            }
        }
        if (arg != pool.size()) chosen.push_back(pool[arg]);
    }
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    return chosen;
}

}  // namespace fgp::design
