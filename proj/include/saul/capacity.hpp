#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "saul/bbq.hpp"
#include "saul/datastreams.hpp"

namespace saul {

// All logarithms below are natural logarithms.
struct CapacityParams {
    std::size_t horizon = 0;  // T
    Eigen::Index dim = 1;     // d
    double kappa = 0.5;
    double delta = 0.01;
    double eps_bar = 0.1;  // margin estimate
    double cap_k = 32.0;   // core-set deletion budget K

    void validate() const {
        if (horizon < 2) throw InvalidArgument("capacity formulas need T >= 2");
        if (dim < 1) throw InvalidArgument("dimension must be positive");
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw InvalidArgument("kappa must lie in [0, 1]");
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
        if (!(eps_bar >= 0.0)) throw InvalidArgument("eps_bar must be nonnegative");
        if (!(cap_k > 0.0)) throw InvalidArgument("K must be positive");
    }

    double log_horizon() const { return std::log(static_cast<double>(horizon)); }
};

// eps^2 T^kappa / (16 e d ln T ln(1/delta)) - 1, before flooring.
inline double coreset_capacity_value(const CapacityParams& p) {
    p.validate();
    const double num = p.eps_bar * p.eps_bar * std::pow(static_cast<double>(p.horizon), p.kappa);
    const double den = 16.0 * std::numbers::e * static_cast<double>(p.dim) * p.log_horizon() * std::log(1.0 / p.delta);
    return num / den - 1.0;
}

// Number of core-set deletions with a guaranteed sign agreement on unqueried points.
inline std::size_t coreset_capacity(const CapacityParams& p) {
    const double v = coreset_capacity_value(p);
    return v <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(v));
}

// 2 sqrt(e (K+1)) T^{-kappa/2} sqrt(d ln T ln(1/delta))
inline double drift_bound(std::size_t deletions, const CapacityParams& p) {
    p.validate();
    return 2.0 * std::sqrt(std::numbers::e * static_cast<double>(deletions + 1)) *
           std::pow(static_cast<double>(p.horizon), -p.kappa / 2.0) *
           std::sqrt(static_cast<double>(p.dim) * p.log_horizon() * std::log(1.0 / p.delta));
}

// floor(c K T / (d T^kappa ln T)): total uniform deletions before the core-set budget K
// is exhausted with probability above c.
inline std::size_t expected_capacity_uniform(const CapacityParams& p, double failure_prob) {
    p.validate();
    if (!(failure_prob >= 0.0 && failure_prob < 1.0)) throw InvalidArgument("failure probability must lie in [0, 1)");
    const double t = static_cast<double>(p.horizon);
    const double v = failure_prob * p.cap_k * t / (static_cast<double>(p.dim) * std::pow(t, p.kappa) * p.log_horizon());
    return static_cast<std::size_t>(std::floor(v));
}

// (K / K_total) * core_cost
inline double expected_deletion_time(double budget, double total, double core_cost) {
    if (!(total > 0.0)) throw InvalidArgument("K_total must be positive");
    if (budget < 0.0 || core_cost < 0.0) throw InvalidArgument("K and core cost must be nonnegative");
    return budget / total * core_cost;
}

// 2 * min |w^T x| over probe points.
inline double estimate_margin(const Vector& weight, std::span<const Vector> probe) {
    if (probe.empty()) throw InvalidArgument("margin estimate needs a nonempty probe");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : probe) m = std::min(m, std::abs(weight.dot(x)));
    return 2.0 * m;
}

// T_eps = #{t : |u^T x_t| <= eps}
inline std::size_t margin_point_count(std::span<const LabeledSample> samples, const Vector& u, double eps) {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [&](const LabeledSample& s) { return std::abs(u.dot(s.x)) <= eps; }));
}

struct MetricSet {
    std::size_t coreset_deletions = 0;
    std::size_t free_deletions = 0;
    std::vector<double> deletion_seconds;
    std::size_t margin_points = 0;
    std::size_t stored_scalars = 0;

    std::size_t total() const { return coreset_deletions + free_deletions; }
};

enum class GateDecision { Accept, BudgetExhausted };
enum class ExhaustionPolicy { Halt, Refit };

inline std::string to_string(ExhaustionPolicy p) { return p == ExhaustionPolicy::Halt ? "halt" : "refit"; }
inline ExhaustionPolicy parse_policy(const std::string& s) {
    if (s == "halt") return ExhaustionPolicy::Halt;
    if (s == "refit") return ExhaustionPolicy::Refit;
    throw InvalidArgument("unknown exhaustion policy '" + s + "'");
}

// Guards core-set deletions. Accepts while the core-set deletion count is below the
// capacity and the drift of w^T x on the (unqueried) probe points, measured against the
// reference model, stays below half the margin estimate.
class CapacityGate {
public:
    // Capacity from the formula with eps_bar replaced by the probe margin estimate.
    CapacityGate(const BbqModel& reference, std::vector<LabeledSample> probe, CapacityParams base)
        : probe_(std::move(probe)) {
        init_reference(reference);
        base.eps_bar = margin_;
        capacity_ = coreset_capacity(base);
    }

    // Explicit capacity; the drift check still uses the probe margin.
    CapacityGate(const BbqModel& reference, std::vector<LabeledSample> probe, std::size_t capacity)
        : probe_(std::move(probe)), capacity_(capacity) {
        init_reference(reference);
    }

    std::size_t capacity() const { return capacity_; }
    double margin_estimate() const { return margin_; }
    std::size_t probe_size() const { return probe_.size(); }
    const std::vector<LabeledSample>& probe() const { return probe_; }

    double max_drift(const BbqModel& current) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < probe_.size(); ++i) {
            worst = std::max(worst, std::abs(current.score(probe_[i].x) - reference_scores_[i]));
        }
        return worst;
    }

    GateDecision check(const BbqModel& current, const MetricSet& history) const {
        if (history.coreset_deletions == 0) return GateDecision::Accept;
        if (history.coreset_deletions >= capacity_) return GateDecision::BudgetExhausted;
        return max_drift(current) < margin_ / 2.0 ? GateDecision::Accept : GateDecision::BudgetExhausted;
    }

    // Probe points are data too: a deleted probe point is forgotten here as well.
    void forget(SampleId id) {
        for (std::size_t i = 0; i < probe_.size(); ++i) {
            if (probe_[i].id == id) {
                probe_.erase(probe_.begin() + static_cast<std::ptrdiff_t>(i));
                reference_scores_.erase(reference_scores_.begin() + static_cast<std::ptrdiff_t>(i));
                return;
            }
        }
    }

private:
    void init_reference(const BbqModel& reference) {
        if (probe_.empty()) throw InvalidArgument("capacity gate needs probe points");
        std::vector<Vector> xs;
        for (const auto& s : probe_) {
            if (reference.in_coreset(s.id)) throw InvalidArgument("probe points must be unqueried");
            xs.push_back(s.x);
            reference_scores_.push_back(reference.score(s.x));
        }
        margin_ = estimate_margin(reference.weight(), xs);
    }

    std::vector<LabeledSample> probe_;
    std::vector<double> reference_scores_;
    double margin_ = 0.0;
    std::size_t capacity_ = 0;
};

// Functional form of the gate check.
inline GateDecision capacity_gate(const CapacityGate& gate, const BbqModel& current, const MetricSet& history) {
    return gate.check(current, history);
}

struct MonteCarloOptions {
    std::size_t trials = 200;
    std::uint64_t seed = 0;
    std::vector<std::size_t> totals;  // K_total grid; must be nondecreasing
    double kappa = 0.5;
    double cap_k = 10.0;
    bool check_drift_identity = true;
};

struct MonteCarloResult {
    std::vector<std::size_t> totals;
    std::vector<double> empirical;  // Pr(K_csd > K) at each K_total
    std::vector<double> bound;      // K_total T^kappa / K * E_mu[x^T Mbar x]
    double mean_quadratic = 0.0;    // E_mu[x^T Mbar x]
    double mean_coreset_size = 0.0;
    double mean_free_fraction = 0.0;  // free deletions / deletions processed
    double max_drift_identity_error = 0.0;
};

namespace detail {

inline std::vector<double> normalized_weights(std::span<const LabeledSample> data, const DeletionDistribution& dist) {
    std::vector<double> mu(data.size(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        switch (dist.kind) {
            case DeletionDistribution::Kind::Uniform: mu[i] = 1.0; break;
            case DeletionDistribution::Kind::ByLabel: mu[i] = data[i].y == dist.target_label ? 1.0 : 0.0; break;
            case DeletionDistribution::Kind::Weighted: mu[i] = dist.weights.at(i); break;
        }
    }
    double sum = 0.0;
    for (double v : mu) sum += v;
    if (!(sum > 0.0)) throw InvalidArgument("deletion distribution has no mass");
    for (double& v : mu) v /= sum;
    return mu;
}

}  // namespace detail

// Simulates random stream permutations (refitting each time) and deletion sequences drawn
// without replacement from `dist`, and estimates Pr(K_csd > K) after each K_total on the
// grid, alongside the permutation-averaged bound. Trial i uses seed (seed, i), so results
// do not depend on evaluation order.
inline MonteCarloResult expected_capacity_mc(std::span<const LabeledSample> data, const DeletionDistribution& dist,
                                             std::size_t budget, const MonteCarloOptions& opt) {
    if (opt.trials == 0) throw InvalidArgument("trials must be at least 1");
    if (data.empty()) throw InvalidArgument("dataset must be nonempty");
    if (!std::is_sorted(opt.totals.begin(), opt.totals.end())) throw InvalidArgument("K_total grid must be sorted");
    const std::size_t T = data.size();
    const Eigen::Index d = data.front().x.size();
    const std::size_t max_total = opt.totals.empty() ? 0 : opt.totals.back();
    const std::vector<double> mu = detail::normalized_weights(data, dist);

    BbqParams params{T, opt.kappa, opt.cap_k};
    MonteCarloResult res;
    res.totals = opt.totals;
    std::vector<std::size_t> exceed(opt.totals.size(), 0);
    Matrix mbar = Matrix::Zero(d, d);
    std::size_t processed = 0, free_total = 0;

    for (std::size_t trial = 0; trial < opt.trials; ++trial) {
        std::seed_seq seq{static_cast<std::uint64_t>(opt.seed), static_cast<std::uint64_t>(trial)};
        std::mt19937_64 rng(seq);
        std::vector<std::size_t> order(T);
        for (std::size_t i = 0; i < T; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<SampleId> ids(T);
        std::vector<Vector> xs(T);
        for (std::size_t i = 0; i < T; ++i) {
            ids[i] = data[order[i]].id;
            xs[i] = data[order[i]].x;
        }
        Matrix inv_sum = Matrix::Zero(d, d);
        BbqModel model = bbq_select(
            ids, xs, [&](std::size_t t) { return data[order[t]].y; }, params,
            [&](std::size_t, const GramState& g) { inv_sum += g.gram_inv(); });
        mbar += inv_sum / static_cast<double>(T);
        res.mean_coreset_size += static_cast<double>(model.coreset_size());

        const auto sigma = deletion_stream(data, dist, max_total, rng());
        std::size_t csd = 0, grid = 0;
        Vector probe = xs.front();
        for (std::size_t k = 0; k <= sigma.size(); ++k) {
            while (grid < opt.totals.size() && opt.totals[grid] == k) {
                if (csd > budget) ++exceed[grid];
                ++grid;
            }
            if (k == sigma.size()) break;
            const LabeledSample* hit = model.find(sigma[k]);
            ++processed;
            if (!hit) {
                ++free_total;
                continue;
            }
            ++csd;
            if (opt.check_drift_identity) {
                const double predicted = deletion_drift(model.gram(), hit->x, hit->y, probe);
                const double before = model.score(probe);
                model.delete_one(sigma[k]);
                res.max_drift_identity_error =
                    std::max(res.max_drift_identity_error, std::abs(model.score(probe) - before - predicted));
            } else {
                model.delete_one(sigma[k]);
            }
        }
    }

    mbar /= static_cast<double>(opt.trials);
    for (std::size_t i = 0; i < T; ++i) {
        if (mu[i] > 0.0) res.mean_quadratic += mu[i] * data[i].x.dot(mbar * data[i].x);
    }
    const double scale = std::pow(static_cast<double>(T), opt.kappa) / static_cast<double>(std::max<std::size_t>(budget, 1));
    for (std::size_t g = 0; g < opt.totals.size(); ++g) {
        res.empirical.push_back(static_cast<double>(exceed[g]) / static_cast<double>(opt.trials));
        res.bound.push_back(static_cast<double>(opt.totals[g]) * scale * res.mean_quadratic);
    }
    res.mean_coreset_size /= static_cast<double>(opt.trials);
    res.mean_free_fraction = processed == 0 ? 0.0 : static_cast<double>(free_total) / static_cast<double>(processed);
    return res;
}

// Largest K_total on the grid whose empirical exhaustion probability is at most c.
inline std::size_t max_total_at_level(const MonteCarloResult& r, double c) {
    std::size_t best = 0;
    for (std::size_t g = 0; g < r.totals.size(); ++g) {
        if (r.empirical[g] <= c) best = r.totals[g];
        else break;
    }
    return best;
}

// {params, K_max, curves: [[K_total, Pr]...], bound: [[K_total, rhs]...], ...}
inline nlohmann::json capacity_report_json(const CapacityParams& p, const MonteCarloResult& r) {
    nlohmann::json curve = nlohmann::json::array(), bound = nlohmann::json::array();
    for (std::size_t g = 0; g < r.totals.size(); ++g) {
        curve.push_back({r.totals[g], r.empirical[g]});
        bound.push_back({r.totals[g], r.bound[g]});
    }
    return {{"report_version", 1},
            {"params",
             {{"T", p.horizon}, {"d", p.dim}, {"kappa", p.kappa}, {"delta", p.delta}, {"eps_bar", p.eps_bar}, {"K", p.cap_k}}},
            {"K_max", coreset_capacity(p)},
            {"curves", curve},
            {"bound", bound},
            {"mean_quadratic", r.mean_quadratic},
            {"mean_coreset_size", r.mean_coreset_size},
            {"mean_free_fraction", r.mean_free_fraction},
            {"max_drift_identity_error", r.max_drift_identity_error}};
}

}  // namespace saul
