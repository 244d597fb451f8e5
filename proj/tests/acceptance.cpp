// Acceptance run: one PASS/FAIL line per criterion. Oracles here are written against Eigen and
// the standard library directly; the library is only used as the system under test.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "saul/bbq.hpp"
#include "saul/capacity.hpp"
#include "saul/datastreams.hpp"
#include "saul/general_bbq.hpp"
#include "saul/gram_state.hpp"
#include "saul/harness.hpp"

using namespace saul;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- linear oracles -------------------------------------------------------------------------

struct DenseFit {
    std::vector<LabeledSample> queried;
    Matrix A;
    Vector w;
};

// Straight-line sampler: query iff x^T A^{-1} x > T^-kappa, dense LDLT solves.
DenseFit dense_fit(std::span<const LabeledSample> stream, Eigen::Index d, std::size_t horizon, double kappa,
                   double lambda) {
    DenseFit out;
    out.A = lambda * Matrix::Identity(d, d);
    Vector b = Vector::Zero(d);
    const double thr = std::pow(static_cast<double>(horizon), -kappa);
    for (const auto& s : stream) {
        if (s.x.dot(out.A.ldlt().solve(s.x)) > thr) {
            out.A += s.x * s.x.transpose();
            b += s.y * s.x;
            out.queried.push_back(s);
        }
    }
    out.w = out.A.ldlt().solve(b);
    return out;
}

double dense_log_det_ratio(const Matrix& A, double lambda) {
    const Matrix L = (A / lambda).llt().matrixL();
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) s += 2.0 * std::log(L(i, i));
    return s;
}

std::vector<SampleId> ids_of(std::span<const LabeledSample> v) {
    std::vector<SampleId> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
}

Vector ball_point(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = n01(rng);
    return z * (std::pow(u01(rng), 1.0 / static_cast<double>(d)) / z.norm());
}

struct LinearInstance {
    Dataset ds;
    BbqParams params;
    BbqModel model;
    std::vector<SampleId> deletions;
};

std::vector<LinearInstance> linear_instances() {
    std::vector<LinearInstance> out;
    std::mt19937_64 rng(20240601);
    const double kappas[] = {0.3, 0.5, 0.7};
    for (int i = 0; i < 200; ++i) {
        DatasetSpec spec;
        spec.kind = i % 2 ? DatasetKind::Margin : DatasetKind::RealizableLinear;
        spec.size = 50 + rng() % 1951;
        spec.dim = 1 + static_cast<Eigen::Index>(rng() % 20);
        spec.gamma = spec.dim > 8 ? 0.02 : 0.1;
        spec.seed = 5000 + static_cast<std::uint64_t>(i);
        auto ds = gen_dataset(spec);
        const double K = 1.0 + static_cast<double>(rng() % 32);
        const BbqParams params{ds.size(), kappas[i % 3], K};
        auto model = bbq_fit(ds.samples, params);
        auto core = model.coreset_ids();
        std::shuffle(core.begin(), core.end(), rng);
        core.resize(std::min<std::size_t>(core.size(), rng() % (static_cast<std::size_t>(K) + 1)));
        std::vector<SampleId> u = core;
        for (int k = 0; k < 10; ++k) u.push_back(ds.samples[rng() % ds.size()].id);
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        std::shuffle(u.begin(), u.end(), rng);
        out.push_back({std::move(ds), params, std::move(model), std::move(u)});
    }
    return out;
}

std::vector<LabeledSample> surviving_coreset(const BbqModel& m, std::span<const SampleId> u) {
    std::unordered_set<SampleId> drop(u.begin(), u.end());
    std::vector<LabeledSample> keep;
    for (const auto& s : m.coreset()) {
        if (!drop.contains(s.id)) keep.push_back(s);
    }
    return keep;
}

Outcome criterion_1(const std::vector<LinearInstance>& cases) {
    const auto t0 = Clock::now();
    std::size_t failures = 0, hits = 0;
    for (const auto& c : cases) {
        const auto after = deletion_update(c.model, c.deletions);
        const auto keep = surviving_coreset(c.model, c.deletions);
        hits += c.model.coreset_size() - keep.size();
        Vector w = Vector::Zero(c.ds.dim());
        std::vector<LabeledSample> stored;
        if (!keep.empty()) {
            auto ref = dense_fit(keep, c.ds.dim(), c.params.horizon, c.params.kappa, c.params.lambda());
            w = ref.w;
            stored = ref.queried;
        }
        const auto st = after.state_of_system();
        const bool same = st.stored == stored && (st.weight - w).cwiseAbs().maxCoeff() <= 1e-8;
        failures += !same;
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 60.0,
            fmt("%zu instances, %zu core-set deletions, %zu failures, %.2f s", cases.size(), hits, failures, secs)};
}

Outcome criterion_2(const std::vector<LinearInstance>& cases) {
    std::size_t failures = 0;
    for (const auto& c : cases) {
        const auto replay = replay_on_coreset(c.model, c.deletions);
        failures += ids_of(replay.coreset()) != ids_of(surviving_coreset(c.model, c.deletions));
    }
    return {failures == 0, fmt("%zu instances, %zu failures", cases.size(), failures)};
}

Outcome criterion_3() {
    std::mt19937_64 rng(3);
    double worst_inv = 0.0, worst_round = 0.0;
    const int sequences = 10000;
    for (int seq = 0; seq < sequences; ++seq) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 10);
        const double lambda = 0.5 + static_cast<double>(rng() % 32);
        GramState g(d, lambda);
        Matrix A = lambda * Matrix::Identity(d, d);
        std::vector<std::pair<Vector, double>> live;
        const int steps = 4 + static_cast<int>(rng() % 30);
        for (int step = 0; step < steps; ++step) {
            if (!live.empty() && rng() % 3 == 0) {
                const auto k = rng() % live.size();
                g.downdate(live[k].first, live[k].second);
                A -= live[k].first * live[k].first.transpose();
                live.erase(live.begin() + static_cast<long>(k));
            } else {
                Vector x = ball_point(rng, d);
                const double y = rng() % 2 ? 1.0 : -1.0;
                g.update(x, y);
                A += x * x.transpose();
                live.emplace_back(std::move(x), y);
            }
        }
        worst_inv = std::max(worst_inv, (g.gram_inv() - A.fullPivLu().inverse()).cwiseAbs().maxCoeff());
        const Matrix inv = g.gram_inv();
        const Vector w = g.weight();
        const Vector x = ball_point(rng, d);
        g.update(x, 1.0);
        g.downdate(x, 1.0);
        worst_round = std::max({worst_round, (g.gram_inv() - inv).cwiseAbs().maxCoeff(), (g.weight() - w).cwiseAbs().maxCoeff()});
    }
    return {worst_inv <= 1e-8 && worst_round <= 1e-10,
            fmt("%d sequences, max |inverse - dense| = %.2e, max round-trip error = %.2e", sequences, worst_inv,
                worst_round)};
}

Outcome criterion_4() {
    std::mt19937_64 rng(4);
    std::size_t instances = 0, checks = 0, violations = 0;
    double worst_queried = 0.0, worst_unqueried = 0.0;
    for (int i = 0; i < 120; ++i) {
        DatasetSpec spec;
        spec.size = 200 + rng() % 1801;
        spec.dim = 1 + static_cast<Eigen::Index>(rng() % 12);
        spec.gamma = spec.dim > 8 ? 0.02 : 0.1;
        spec.seed = 9000 + static_cast<std::uint64_t>(i);
        const auto ds = gen_dataset(spec);
        const double K = 2.0 + static_cast<double>(rng() % 30);
        const BbqParams p{ds.size(), 0.3 + 0.1 * static_cast<double>(i % 5), K};
        const auto m = bbq_fit(ds.samples, p);
        const auto ref = dense_fit(ds.samples, ds.dim(), p.horizon, p.kappa, K);
        const auto ldlt = ref.A.ldlt();
        for (const auto& s : m.coreset()) {
            const double lev = s.x.dot(ldlt.solve(s.x));
            worst_queried = std::max(worst_queried, lev * (K + 1.0));
            violations += lev > 1.0 / (K + 1.0);
            ++checks;
        }
        auto core = m.coreset_ids();
        std::shuffle(core.begin(), core.end(), rng);
        core.resize(std::min<std::size_t>(core.size(), static_cast<std::size_t>(K) - 1));
        const auto keep = surviving_coreset(m, core);
        Matrix A = K * Matrix::Identity(ds.dim(), ds.dim());
        for (const auto& s : keep) A += s.x * s.x.transpose();
        const auto post = A.ldlt();
        const double cap = std::numbers::e * p.threshold();
        for (const auto& s : ds.samples) {
            if (m.in_coreset(s.id)) continue;
            const double lev = s.x.dot(post.solve(s.x));
            worst_unqueried = std::max(worst_unqueried, lev / cap);
            violations += lev > cap;
            ++checks;
        }
        ++instances;
    }
    return {violations == 0,
            fmt("%zu instances, %zu leverage checks, %zu violations; max ratio to bound: queried %.3f, unqueried %.3f",
                instances, checks, violations, worst_queried, worst_unqueried)};
}

Outcome criterion_5() {
    std::mt19937_64 rng(5);
    double worst = 0.0;
    const int probes = 1000;
    for (int i = 0; i < probes; ++i) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 10);
        const double lambda = 1.0 + static_cast<double>(rng() % 20);
        GramState g(d, lambda);
        std::vector<std::pair<Vector, double>> pts;
        for (int k = 0; k < 15; ++k) {
            pts.emplace_back(ball_point(rng, d), rng() % 2 ? 1.0 : -1.0);
            g.update(pts.back().first, pts.back().second);
        }
        const auto& [xi, yi] = pts[rng() % pts.size()];
        const Vector x = ball_point(rng, d);
        const Matrix Ainv = g.gram_inv();
        const Vector b = g.b();
        // w' - w = (A^{-1} xi xi^T A^{-1} / (1 - r)) (b - yi xi) - yi A^{-1} xi
        const Vector ax = Ainv * xi;
        const double r = xi.dot(ax);
        const double expansion = x.dot(ax) * ax.dot(b - yi * xi) / (1.0 - r) - yi * x.dot(ax);
        const double before = g.weight().dot(x);
        g.downdate(xi, yi);
        worst = std::max(worst, std::abs(g.weight().dot(x) - before - expansion));
    }
    return {worst <= 1e-8, fmt("%d probes, max |observed - expansion| = %.2e", probes, worst)};
}

Outcome criterion_6(const std::vector<LinearInstance>& cases) {
    std::size_t violations = 0, scaled_violations = 0;
    double worst_slack = -1e300;
    for (const auto& c : cases) {
        const double lambda = c.params.lambda();
        Matrix A = lambda * Matrix::Identity(c.ds.dim(), c.ds.dim());
        for (const auto& s : c.model.coreset()) A += s.x * s.x.transpose();
        const double bound = std::pow(static_cast<double>(c.params.horizon), c.params.kappa) * dense_log_det_ratio(A, lambda);
        const double n = static_cast<double>(c.model.coreset_size());
        violations += n > bound;
        worst_slack = std::max(worst_slack, n - bound);
        // r <= (1/lambda) / ln(1 + 1/lambda) * ln(1 + r) for r in [0, 1/lambda]
        scaled_violations += n > bound * (1.0 / lambda) / std::log1p(1.0 / lambda);
    }
    // Trend: N_T / (d T^kappa ln T) against the frozen constant 1, which is what
    // log det(A/lambda) <= d ln(1 + T/(d lambda)) <= d ln T gives for lambda >= 1.
    constexpr double kFrozen = 1.0;
    std::string trend;
    double worst_ratio = 0.0;
    for (const std::size_t T : {1000u, 10000u, 100000u}) {
        double mean = 0.0;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            DatasetSpec spec;
            spec.size = T;
            spec.dim = 10;
            spec.seed = 700 + seed;
            const auto ds = gen_dataset(spec);
            const auto m = bbq_fit(ds.samples, BbqParams{T, 0.5, 4.0});
            const double t = static_cast<double>(T);
            const double ratio = static_cast<double>(m.coreset_size()) / (10.0 * std::sqrt(t) * std::log(t));
            worst_ratio = std::max(worst_ratio, ratio);
            mean += ratio / 3.0;
        }
        trend += fmt(" T=%zu:%.3f", T, mean);
    }
    return {violations == 0 && worst_ratio < kFrozen,
            fmt("%zu fitted instances, %zu logdet violations (max N_T - bound = %.3f; with the pre-update leverage "
                "factor (1/lambda)/ln(1+1/lambda): %zu); ratio by T (K=4, 3 seeds):%s, max %.3f < %.1f",
                cases.size(), violations, worst_slack, scaled_violations, trend.c_str(), worst_ratio, kFrozen)};
}

Outcome criterion_7() {
    const auto t0 = Clock::now();
    CapacityParams p;
    p.horizon = 2000;
    p.dim = 10;
    p.kappa = 0.5;
    p.cap_k = 10.0;
    const double c = 0.2;
    const std::size_t total = expected_capacity_uniform(p, c);
    const int trials = 200;
    int exceed = 0;
    double mean_core = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        DatasetSpec spec;
        spec.size = p.horizon;
        spec.dim = p.dim;
        spec.seed = 31000 + static_cast<std::uint64_t>(trial);
        const auto ds = gen_dataset(spec);
        const auto m = bbq_fit(ds.samples, BbqParams{p.horizon, p.kappa, p.cap_k});
        mean_core += static_cast<double>(m.coreset_size()) / trials;
        std::vector<SampleId> ids = ids_of(ds.samples);
        std::mt19937_64 rng(77 + static_cast<std::uint64_t>(trial));
        std::shuffle(ids.begin(), ids.end(), rng);
        std::size_t k_csd = 0;
        for (std::size_t k = 0; k < total; ++k) k_csd += m.in_coreset(ids[k]);
        exceed += static_cast<double>(k_csd) > p.cap_k;
    }
    const double rate = static_cast<double>(exceed) / trials;
    const double limit = c + 3.0 * std::sqrt(c * (1 - c) / trials);
    const double secs = seconds_since(t0);
    return {rate <= limit && secs < 300.0,
            fmt("K_total=%zu, %d trials, mean |Q|=%.1f, Pr(K_csd > K)=%.3f <= %.3f, %.1f s", total, trials, mean_core,
                rate, limit, secs)};
}

Outcome criterion_8() {
    ExperimentConfig cfg;  // desk preset: T=20000, d=20, gamma=0.1, 40% label -1 deletions, m=16
    const auto rep = run_experiment(cfg);
    const auto* bbq = rep.find("bbq");
    const auto* retrain = rep.find("retrain");
    const auto* sisa = rep.find("sisa");
    const double acc_b = bbq->curve.back().accuracy;
    const double acc_r = retrain->curve.back().accuracy;
    const double acc_s = sisa->curve.back().accuracy;
    const bool storage = bbq->stored_fraction < 0.20 && retrain->stored_fraction == 1.0 && sisa->stored_fraction == 1.0;
    const bool time = bbq->deletion_seconds <= 0.5 * retrain->deletion_seconds;
    const bool time_with_refits = bbq->deletion_seconds + bbq->refit_seconds <= 0.5 * retrain->deletion_seconds;
    const bool vs_retrain = acc_b >= acc_r - 0.02;
    const bool vs_sisa = acc_b >= acc_s;
    return {storage && time && vs_retrain && vs_sisa,
            fmt("stored %.2f%% [%s]; deletion time bbq %.4f s vs retrain %.4f s [%s] (with %zu gate refits %.3f s: %s); "
                "final accuracy bbq %.4f, retrain %.4f [%s], sisa %.4f [%s]",
                100.0 * bbq->stored_fraction, storage ? "ok" : "no", bbq->deletion_seconds, retrain->deletion_seconds,
                time ? "ok" : "no", bbq->refits, bbq->deletion_seconds + bbq->refit_seconds,
                time_with_refits ? "ok" : "no", acc_b, acc_r, vs_retrain ? "ok" : "no", acc_s, vs_sisa ? "ok" : "no")};
}

// ---- general-class oracles ------------------------------------------------------------------

std::size_t brute_erm(const FiniteFunctionClass& F, std::span<const LabeledSample> labeled) {
    std::vector<std::pair<double, std::size_t>> ranking;
    for (std::size_t f = 0; f < F.size(); ++f) {
        double loss = 0.0;
        for (const auto& s : labeled) loss += std::pow((1.0 + s.y) / 2.0 - F(f, s), 2);
        ranking.emplace_back(loss, f);
    }
    std::sort(ranking.begin(), ranking.end());
    return ranking.front().second;
}

struct GeneralInstance {
    FiniteFunctionClass F;
    std::vector<LabeledSample> pool;
};

GeneralInstance general_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01;
    const std::size_t count = 2 + rng() % 31;
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 3);
    std::vector<ClassFunction> fs;
    for (std::size_t k = 0; k < count; ++k) {
        const double hi = 0.125 * static_cast<double>(rng() % 9);
        const double lo = 0.125 * static_cast<double>(rng() % 9);
        fs.push_back(threshold_function("f" + std::to_string(k), static_cast<Eigen::Index>(rng() % d), u(rng), hi, lo));
    }
    FiniteFunctionClass F(std::move(fs));
    const std::size_t star = rng() % F.size();
    const std::size_t n = 10 + rng() % 191;
    std::vector<LabeledSample> pool;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledSample s{static_cast<SampleId>(i), ball_point(rng, d), 1};
        s.y = u01(rng) < F(star, s) ? 1 : -1;
        pool.push_back(std::move(s));
    }
    return {std::move(F), std::move(pool)};
}

// Returns the number of instances whose fresh replay differs.
std::size_t general_sweep(std::uint64_t seed, int instances, std::size_t& erm_mismatch) {
    std::mt19937_64 rng(seed);
    std::size_t failures = 0;
    for (int i = 0; i < instances; ++i) {
        const auto inst = general_instance(rng);
        GeneralConfig cfg;
        cfg.rate = finite_class_rate(inst.F.size(), inst.pool.size(), cfg.delta);
        const auto m = general_bbq_fit(inst.pool, inst.F, cfg);
        auto u = m.queried_ids();
        std::shuffle(u.begin(), u.end(), rng);
        u.resize(std::min<std::size_t>(u.size(), 3));
        const auto after = general_deletion_update(m, u, inst.F);
        const auto kept = after.queried_samples();
        erm_mismatch += brute_erm(inst.F, kept) != after.f_hat;
        erm_mismatch += brute_erm(inst.F, m.queried_samples()) != m.f_hat;
        std::vector<SampleId> fresh_ids;
        std::size_t fresh_hat = 0;
        if (!kept.empty()) {
            GeneralConfig frozen = m.config;
            frozen.fixed_stages = m.stage_count;
            const auto fresh = general_bbq_fit(kept, inst.F, frozen);
            fresh_ids = fresh.queried_ids();
            fresh_hat = fresh.f_hat;
        }
        auto a = after.queried_ids();
        std::sort(a.begin(), a.end());
        std::sort(fresh_ids.begin(), fresh_ids.end());
        failures += a != fresh_ids || fresh_hat != after.f_hat;
    }
    return failures;
}

Outcome criterion_9() {
    std::size_t erm_mismatch = 0;
    const std::size_t failures = general_sweep(9, 100, erm_mismatch);
    std::size_t extra_erm = 0;
    const int extended = 2000;
    const std::size_t extended_failures = general_sweep(909, extended, extra_erm);
    return {failures == 0 && erm_mismatch == 0,
            fmt("100 instances, %zu replay mismatches, %zu ERM mismatches; extended sweep: %zu/%d replay mismatches, "
                "%zu ERM mismatches",
                failures, erm_mismatch, extended_failures, extended, extra_erm)};
}

double enumerate_dimension(const FiniteFunctionClass& F, const std::vector<LabeledSample>& S) {
    std::vector<std::size_t> perm(S.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = 0.0;
    do {
        double total = 0.0;
        for (std::size_t t = 0; t < perm.size(); ++t) {
            double step = 0.0;
            for (std::size_t f = 0; f < F.size(); ++f) {
                for (std::size_t g = 0; g < F.size(); ++g) {
                    double den = 1.0;
                    for (std::size_t k = 0; k < t; ++k) den += std::pow(F(f, S[perm[k]]) - F(g, S[perm[k]]), 2);
                    step = std::max(step, std::pow(F(f, S[perm[t]]) - F(g, S[perm[t]]), 2) / den);
                }
            }
            total += step;
        }
        best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Outcome criterion_10() {
    const FiniteFunctionClass F({constant_function("zero", 0.0), constant_function("one", 1.0)});
    std::mt19937_64 rng(10);
    bool ok = true;
    double worst = 0.0;
    std::vector<LabeledSample> S;
    double h = 0.0;
    for (std::size_t t = 1; t <= 8; ++t) {
        S.push_back({static_cast<SampleId>(t), ball_point(rng, 2), 1});
        h += 1.0 / static_cast<double>(t);
        const auto pd = projected_dimension(F, S);
        const double brute = enumerate_dimension(F, S);
        worst = std::max({worst, std::abs(pd.value - h), std::abs(brute - h)});
        ok = ok && pd.exact;
    }
    const LabeledSample x{0, Vector::Zero(2), 1};
    const std::vector<LabeledSample> one{{1, Vector::Zero(2), 1}};
    const double d_empty = d2_score(x, {}, F);
    const double d_one = d2_score(x, one, F);
    ok = ok && worst <= 1e-12 && d_empty == 1.0 && d_one == 0.5;
    return {ok, fmt("max |D - H_T| over T<=8 = %.1e (library and enumeration); d2 = %.17g, %.17g", worst, d_empty, d_one)};
}

Outcome criterion_11() {
    const auto base = fs::temp_directory_path() / ("saul_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(base);
    std::vector<std::string> names;
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        const auto dir = base / run;
        const std::string cmd = std::string(SAUL_CLI) +
                                " bench --methods bbq,sisa,retrain --seed 5 --format csv --out " + dir.string() +
                                " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    }
    std::size_t files = 0, differing = 0;
    if (ran) {
        for (const auto& entry : fs::directory_iterator(base / "a")) {
            ++files;
            const auto other = base / "b" / entry.path().filename();
            if (!fs::exists(other) || io::read_file(entry.path()) != io::read_file(other)) ++differing;
        }
        for (const auto& entry : fs::directory_iterator(base / "b")) {
            if (!fs::exists(base / "a" / entry.path().filename())) ++differing;
        }
    }
    fs::remove_all(base);
    return {ran && files == 3 && differing == 0,
            fmt("two bench runs %s; %zu CSV files compared, %zu differ", ran ? "succeeded" : "FAILED", files, differing)};
}

}  // namespace

int main() {
    int passed = 0, total = 0;
    const auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        ++total;
        passed += o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << o.detail << std::endl;
    };

    const auto cases = linear_instances();
    report(1, "exact unlearning equals fresh fit on surviving core set", [&] { return criterion_1(cases); });
    report(2, "replay re-queries exactly the surviving core set", [&] { return criterion_2(cases); });
    report(3, "Sherman-Morrison updates match dense inversion", criterion_3);
    report(4, "leverage bounds", criterion_4);
    report(5, "deletion drift expansion", criterion_5);
    report(6, "query count bounds", [&] { return criterion_6(cases); });
    report(7, "expected deletion capacity under uniform deletions", criterion_7);
    report(8, "desk-scale benchmark ordering", criterion_8);
    report(9, "general class deletion equals fresh fit", criterion_9);
    report(10, "projected dimension and D^2 closed forms", criterion_10);
    report(11, "bench CSV output is deterministic", criterion_11);
    std::cout << passed << "/" << total << " criteria passed" << std::endl;
    return 0;
}
