#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "saul/baselines.hpp"
#include "saul/bbq.hpp"
#include "saul/datastreams.hpp"
#include "saul/general_bbq.hpp"
#include "saul/model_io.hpp"

namespace saul {

struct SuiteResult {
    std::string name;
    std::size_t trials = 0;
    std::size_t failures = 0;
    std::string first_failure;

    bool ok() const { return failures == 0; }
};

namespace detail {

struct Trial {
    std::mt19937_64 rng;
    Trial(std::uint64_t seed, std::size_t suite, std::size_t i) {
        std::seed_seq seq{seed, std::uint64_t{suite}, std::uint64_t{i}};
        rng.seed(seq);
    }

    std::size_t uniform(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    Vector in_ball(Eigen::Index d) {
        Vector x(d);
        for (Eigen::Index i = 0; i < d; ++i) x[i] = real(-1.0, 1.0);
        return x * (real(0.0, 1.0) / std::max(x.norm(), 1e-12));
    }
};

inline Dataset small_dataset(Trial& t, std::size_t max_size, Eigen::Index max_dim) {
    DatasetSpec spec;
    spec.kind = t.uniform(0, 1) ? DatasetKind::Margin : DatasetKind::RealizableLinear;
    spec.size = t.uniform(20, max_size);
    spec.dim = static_cast<Eigen::Index>(t.uniform(1, static_cast<std::size_t>(max_dim)));
    spec.gamma = spec.dim > 4 ? 0.02 : 0.1;
    spec.seed = t.rng();
    return gen_dataset(spec);
}

// Up to `limit` core-set ids plus a few unqueried ids.
inline std::vector<SampleId> random_deletions(Trial& t, const BbqModel& m, std::span<const LabeledSample> data,
                                              std::size_t limit) {
    auto core = m.coreset_ids();
    std::shuffle(core.begin(), core.end(), t.rng);
    core.resize(std::min(core.size(), t.uniform(0, limit)));
    for (std::size_t k = 0, extra = t.uniform(0, 5); k < extra; ++k) {
        const auto& s = data[t.uniform(0, data.size() - 1)];
        if (!m.in_coreset(s.id) && std::find(core.begin(), core.end(), s.id) == core.end()) core.push_back(s.id);
    }
    std::shuffle(core.begin(), core.end(), t.rng);
    return core;
}

template <typename Body>
SuiteResult run_suite(std::string name, std::size_t index, std::uint64_t seed, std::size_t trials, Body&& body) {
    SuiteResult r{std::move(name), trials, 0, {}};
    for (std::size_t i = 0; i < trials; ++i) {
        Trial t(seed, index, i);
        std::string why;
        bool ok = false;
        try {
            ok = body(t, why);
        } catch (const std::exception& e) {
            why = std::string("exception: ") + e.what();
        }
        if (!ok) {
            if (r.failures++ == 0) r.first_failure = "trial " + std::to_string(i) + ": " + why;
        }
    }
    return r;
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

// Randomized invariant suites over seeded instances. Trial i of suite s is seeded by
// (seed, s, i) only.
inline std::vector<SuiteResult> run_verify(std::uint64_t seed, std::size_t trials) {
    using detail::Trial;
    std::vector<SuiteResult> out;

    out.push_back(detail::run_suite("sherman-morrison", 0, seed, trials, [](Trial& t, std::string& why) {
        const auto d = static_cast<Eigen::Index>(t.uniform(1, 8));
        GramState g(d, t.real(0.5, 4.0), t.uniform(1, 16));
        std::vector<std::pair<Vector, double>> live;
        for (std::size_t step = 0, n = t.uniform(5, 60); step < n; ++step) {
            if (!live.empty() && t.uniform(0, 2) == 0) {
                const auto k = t.uniform(0, live.size() - 1);
                g.downdate(live[k].first, live[k].second);
                live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
            } else {
                const Vector x = t.in_ball(d);
                const double y = t.uniform(0, 1) ? 1.0 : -1.0;
                g.update(x, y);
                live.emplace_back(x, y);
            }
            const double err = detail::max_abs(g.gram_inv() - g.gram().inverse());
            if (err > 1e-8) {
                why = "inverse drift " + std::to_string(err);
                return false;
            }
        }
        return true;
    }));

    out.push_back(detail::run_suite("bbq-exact-unlearning", 1, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 400, 8);
        const double kappas[] = {0.3, 0.5, 0.7};
        const BbqParams p{ds.size(), kappas[t.uniform(0, 2)], static_cast<double>(t.uniform(1, 12))};
        const BbqModel m = bbq_fit(ds.samples, p);
        const auto u = detail::random_deletions(t, m, ds.samples, static_cast<std::size_t>(p.cap_k));
        const BbqModel after = deletion_update(m, u);
        const BbqModel fresh = replay_on_coreset(m, u);
        if (!equivalent(after.state_of_system(), fresh.state_of_system(), 1e-8)) {
            why = "state differs from fresh fit on the surviving core set";
            return false;
        }
        return true;
    }));

    out.push_back(detail::run_suite("bbq-monotone-requery", 2, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 400, 8);
        const BbqParams p{ds.size(), t.real(0.2, 0.8), static_cast<double>(t.uniform(1, 12))};
        const BbqModel m = bbq_fit(ds.samples, p);
        const auto u = detail::random_deletions(t, m, ds.samples, m.coreset_size());
        std::unordered_set<SampleId> drop(u.begin(), u.end());
        std::vector<SampleId> expect;
        for (const SampleId id : m.coreset_ids()) {
            if (!drop.contains(id)) expect.push_back(id);
        }
        const BbqModel fresh = replay_on_coreset(m, u);
        if (fresh.coreset_ids() != expect) {
            why = "replay queried " + std::to_string(fresh.coreset_size()) + " of " + std::to_string(expect.size());
            return false;
        }
        return true;
    }));

    out.push_back(detail::run_suite("leverage-bounds", 3, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 400, 8);
        const BbqParams p{ds.size(), t.real(0.2, 0.8), static_cast<double>(t.uniform(2, 12))};
        const BbqModel m = bbq_fit(ds.samples, p);
        const double queried_cap = 1.0 / (p.lambda() + 1.0);
        for (const auto& s : m.coreset()) {
            if (m.gram().leverage(s.x) > queried_cap + 1e-12) {
                why = "queried leverage above 1/(lambda+1)";
                return false;
            }
        }
        auto core = m.coreset_ids();
        std::shuffle(core.begin(), core.end(), t.rng);
        core.resize(std::min(core.size(), static_cast<std::size_t>(p.cap_k) - 1));
        const BbqModel after = deletion_update(m, core);
        const double cap = std::numbers::e * p.threshold();
        for (const auto& s : ds.samples) {
            if (!m.in_coreset(s.id) && after.gram().leverage(s.x) > cap + 1e-12) {
                why = "unqueried leverage above e*T^-kappa after deletions";
                return false;
            }
        }
        return true;
    }));

    out.push_back(detail::run_suite("drift-identity", 4, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 400, 8);
        BbqModel m = bbq_fit(ds.samples, BbqParams{ds.size(), 0.5, static_cast<double>(t.uniform(1, 8))});
        auto core = m.coreset_ids();
        std::shuffle(core.begin(), core.end(), t.rng);
        for (std::size_t k = 0; k < std::min<std::size_t>(core.size(), 5); ++k) {
            const LabeledSample s = *m.find(core[k]);
            const Vector& probe = ds.samples[t.uniform(0, ds.size() - 1)].x;
            const double predicted = deletion_drift(m.gram(), s.x, s.y, probe);
            const double before = m.score(probe);
            m.delete_one(s.id);
            const double err = std::abs(m.score(probe) - before - predicted);
            if (err > 1e-8) {
                why = "drift expansion off by " + std::to_string(err);
                return false;
            }
        }
        return true;
    }));

    out.push_back(detail::run_suite("retrain-exact-unlearn", 5, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 300, 8);
        std::vector<SampleId> ids;
        for (const auto& s : ds.samples) ids.push_back(s.id);
        std::shuffle(ids.begin(), ids.end(), t.rng);
        ids.resize(t.uniform(0, ids.size()));
        std::unordered_set<SampleId> drop(ids.begin(), ids.end());
        std::vector<LabeledSample> kept;
        for (const auto& s : ds.samples) {
            if (!drop.contains(s.id)) kept.push_back(s);
        }
        const Vector w = exact_unlearn(ds.samples, ids);
        const Vector ref = ridge_retrain(kept, kBaselineLambda, ds.dim());
        const double err = (w - ref).cwiseAbs().maxCoeff();
        if (err > 1e-8) {
            why = "downdated ridge differs from direct solve by " + std::to_string(err);
            return false;
        }
        return true;
    }));

    out.push_back(detail::run_suite("general-exact-unlearning", 6, seed, trials, [](Trial& t, std::string& why) {
        const std::size_t n = t.uniform(10, 120);
        std::vector<LabeledSample> pool;
        for (std::size_t i = 0; i < n; ++i) {
            Vector x(1);
            x[0] = t.real(-1.0, 1.0);
            pool.push_back({static_cast<SampleId>(i), x, 1});
        }
        std::vector<ClassFunction> fs;
        for (std::size_t k = 0, m = t.uniform(2, 16); k < m; ++k) {
            fs.push_back(threshold_function("h" + std::to_string(k), 0, t.real(-1.0, 1.0), t.real(0.5, 1.0), t.real(0.0, 0.5)));
        }
        const FiniteFunctionClass F(std::move(fs));
        const std::size_t star = t.uniform(0, F.size() - 1);
        for (auto& s : pool) s.y = t.real(0.0, 1.0) < F(star, s) ? 1 : -1;
        GeneralConfig cfg;
        cfg.rate = finite_class_rate(F.size(), n, cfg.delta);
        const GeneralModel m = general_bbq_fit(pool, F, cfg);
        auto q = m.queried_ids();
        std::shuffle(q.begin(), q.end(), t.rng);
        q.resize(t.uniform(0, std::min<std::size_t>(q.size(), 3)));
        const GeneralModel after = general_deletion_update(m, q, F);
        GeneralConfig frozen = m.config;
        frozen.fixed_stages = m.stage_count;
        const GeneralModel fresh = general_bbq_fit(after.queried_samples(), F, frozen);
        auto sorted_ids = [](std::vector<SampleId> v) {
            std::sort(v.begin(), v.end());
            return v;
        };
        if (sorted_ids(fresh.queried_ids()) != sorted_ids(after.queried_ids()) || fresh.f_hat != after.f_hat) {
            why = "fresh fit on surviving queries disagrees";
            return false;
        }
        return true;
    }));

    out.push_back(detail::run_suite("serialization", 7, seed, trials, [](Trial& t, std::string& why) {
        const Dataset ds = detail::small_dataset(t, 200, 6);
        if (encode_dataset(decode_dataset(encode_dataset(ds))) != encode_dataset(ds)) {
            why = "dataset round trip not bit-exact";
            return false;
        }
        BbqModel m = bbq_fit(ds.samples, BbqParams{ds.size(), 0.5, 4.0});
        auto u = detail::random_deletions(t, m, ds.samples, 3);
        m.delete_samples(u);
        const std::string bytes = encode_model(m);
        if (encode_model(decode_model(bytes)) != bytes) {
            why = "model round trip not bit-exact";
            return false;
        }
        return true;
    }));

    return out;
}

}  // namespace saul
