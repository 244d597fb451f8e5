#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "saul/sample.hpp"

namespace saul {

// A named deterministic evaluator f: X -> [0, 1]. Evaluators see the sample id and its
// features, never its label.
struct ClassFunction {
    std::string name;
    std::function<double(SampleId, const Vector&)> eval;
};

inline ClassFunction constant_function(std::string name, double value) {
    return {std::move(name), [value](SampleId, const Vector&) { return value; }};
}

// f(x) = above if x[feature] > threshold else below
inline ClassFunction threshold_function(std::string name, Eigen::Index feature, double threshold, double above,
                                        double below) {
    return {std::move(name), [=](SampleId, const Vector& x) {
                if (feature < 0 || feature >= x.size()) throw InvalidArgument("threshold feature out of range");
                return x[feature] > threshold ? above : below;
            }};
}

// f(x) = table[id] when present, otherwise `fallback`.
inline ClassFunction table_function(std::string name, std::unordered_map<SampleId, double> table, double fallback) {
    return {std::move(name), [table = std::move(table), fallback](SampleId id, const Vector&) {
                auto it = table.find(id);
                return it == table.end() ? fallback : it->second;
            }};
}

class FiniteFunctionClass {
public:
    static constexpr std::size_t kDefaultCap = 256;

    explicit FiniteFunctionClass(std::vector<ClassFunction> functions, std::size_t cap = kDefaultCap)
        : functions_(std::move(functions)) {
        if (functions_.empty()) throw InvalidArgument("function class must be nonempty");
        if (functions_.size() > cap) {
            throw InvalidArgument("function class has " + std::to_string(functions_.size()) +
                                  " members, cap is " + std::to_string(cap));
        }
    }

    std::size_t size() const { return functions_.size(); }
    const std::string& name(std::size_t i) const { return functions_.at(i).name; }

    double operator()(std::size_t i, SampleId id, const Vector& x) const {
        const double v = functions_.at(i).eval(id, x);
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainViolation("function '" + functions_[i].name + "' returned " + std::to_string(v) +
                                  " outside [0, 1]");
        }
        return v;
    }
    double operator()(std::size_t i, const LabeledSample& s) const { return (*this)(i, s.id, s.x); }

    // |F| x n table of function values.
    Matrix tabulate(std::span<const LabeledSample> xs) const {
        Matrix values(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(xs.size()));
        for (std::size_t j = 0; j < xs.size(); ++j) {
            for (std::size_t f = 0; f < size(); ++f) {
                values(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = (*this)(f, xs[j]);
            }
        }
        return values;
    }

private:
    std::vector<ClassFunction> functions_;
};

namespace detail {

// Squared gaps (f(x_j) - g(x_j))^2 for every unordered pair f < g, one row per pair.
inline Matrix pair_gaps(const Matrix& values) {
    const auto nf = values.rows();
    const auto n = values.cols();
    const Eigen::Index pairs = nf * (nf - 1) / 2;
    Matrix sq(pairs, n);
    Eigen::Index p = 0;
    for (Eigen::Index f = 0; f < nf; ++f) {
        for (Eigen::Index g = f + 1; g < nf; ++g, ++p) {
            sq.row(p) = (values.row(f) - values.row(g)).array().square().matrix();
        }
    }
    return sq;
}

// max_p gap_p(j) / (den_p + 1)
inline double d2_from_gaps(const Matrix& sq, Eigen::Index j, const Vector& den) {
    double best = 0.0;
    for (Eigen::Index p = 0; p < sq.rows(); ++p) {
        best = std::max(best, sq(p, j) / (den[p] + 1.0));
    }
    return best;
}

}  // namespace detail

// D^2(x; prefix) = sup_{f,g} (f(x)-g(x))^2 / (sum_{x_i in prefix} (f(x_i)-g(x_i))^2 + 1),
// by brute force over ordered pairs.
inline double d2_score(const LabeledSample& x, std::span<const LabeledSample> prefix, const FiniteFunctionClass& F) {
    double best = 0.0;
    for (std::size_t f = 0; f < F.size(); ++f) {
        for (std::size_t g = 0; g < F.size(); ++g) {
            if (f == g) continue;
            const double gap = F(f, x) - F(g, x);
            double den = 1.0;
            for (const auto& xi : prefix) {
                const double d = F(f, xi) - F(g, xi);
                den += d * d;
            }
            best = std::max(best, gap * gap / den);
        }
    }
    return best;
}

struct ProjectedDimensionOptions {
    std::size_t exact_cap = 8;  // exact supremum over orderings up to this many points
    std::size_t restarts = 4;   // extra randomized greedy passes above the cap
    std::uint64_t seed = 0;
};

struct ProjectedDimension {
    double value = 0.0;
    bool exact = false;  // false: greedy lower bound
};

namespace detail {

inline constexpr std::size_t kExactDimensionHardCap = 20;

// Exact sup over orderings. A term only depends on the set of earlier points, so the
// supremum is a longest path over subsets.
inline double projected_dimension_exact(const Matrix& sq) {
    const auto n = static_cast<std::size_t>(sq.cols());
    if (n == 0) return 0.0;
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<double> best(full + 1, -1.0);
    best[0] = 0.0;
    Vector den(sq.rows());
    for (std::size_t mask = 0; mask < full; ++mask) {
        if (best[mask] < 0.0) continue;
        den.setZero();
        for (std::size_t j = 0; j < n; ++j) {
            if (mask & (std::size_t{1} << j)) den += sq.col(static_cast<Eigen::Index>(j));
        }
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t bit = std::size_t{1} << j;
            if (mask & bit) continue;
            const double v = best[mask] + d2_from_gaps(sq, static_cast<Eigen::Index>(j), den);
            best[mask | bit] = std::max(best[mask | bit], v);
        }
    }
    return best[full];
}

inline double projected_dimension_greedy(const Matrix& sq, std::optional<std::size_t> first) {
    const auto n = static_cast<std::size_t>(sq.cols());
    std::vector<bool> used(n, false);
    Vector den = Vector::Zero(sq.rows());
    double total = 0.0;
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        double pick_val = -1.0;
        if (step == 0 && first) {
            pick = *first;
            pick_val = d2_from_gaps(sq, static_cast<Eigen::Index>(pick), den);
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double v = d2_from_gaps(sq, static_cast<Eigen::Index>(j), den);
                if (v > pick_val) {
                    pick_val = v;
                    pick = j;
                }
            }
        }
        used[pick] = true;
        total += pick_val;
        den += sq.col(static_cast<Eigen::Index>(pick));
    }
    return total;
}

inline ProjectedDimension projected_dimension_from_gaps(const Matrix& sq, const ProjectedDimensionOptions& opt) {
    const auto n = static_cast<std::size_t>(sq.cols());
    if (sq.rows() == 0 || n == 0) return {0.0, true};
    if (n <= std::min(opt.exact_cap, kExactDimensionHardCap)) return {projected_dimension_exact(sq), true};
    double value = projected_dimension_greedy(sq, std::nullopt);
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        value = std::max(value, projected_dimension_greedy(sq, pick(rng)));
    }
    return {value, false};
}

}  // namespace detail

// Projected dimension of F on S: sup over orderings of S of the summed D^2 scores. Exact
// up to `exact_cap` points, otherwise a greedy lower bound flagged as inexact.
inline ProjectedDimension projected_dimension(const FiniteFunctionClass& F, std::span<const LabeledSample> S,
                                              const ProjectedDimensionOptions& opt = {}) {
    return detail::projected_dimension_from_gaps(detail::pair_gaps(F.tabulate(S)), opt);
}

// argmin_f sum ((1+y)/2 - f(x))^2, ties to the lowest index. Losses are summed in
// ascending id order so the result does not depend on the order of `labeled`.
inline std::size_t erm_fit(const FiniteFunctionClass& F, std::span<const LabeledSample> labeled) {
    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labeled[a].id < labeled[b].id; });
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < F.size(); ++f) {
        double loss = 0.0;
        for (const std::size_t i : order) {
            const double r = 0.5 * (1.0 + labeled[i].y) - F(f, labeled[i]);
            loss += r * r;
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = f;
        }
    }
    return best;
}

// Default convergence rate for a finite class: ln(|F| T / delta).
inline double finite_class_rate(std::size_t class_size, std::size_t horizon, double delta) {
    return std::log(static_cast<double>(class_size) * static_cast<double>(horizon) / delta);
}

struct GeneralConfig {
    double delta = 0.1;
    double rate = 1.0;  // R(T, delta)
    std::size_t max_stages = 30;
    // When set, run exactly this many stages and skip the stop rule.
    std::optional<std::size_t> fixed_stages;
    ProjectedDimensionOptions dimension{};

    void validate() const {
        if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
        if (!(rate > 0.0)) throw InvalidArgument("rate must be positive");
        if (max_stages == 0) throw InvalidArgument("max_stages must be positive");
    }
};

struct StageRecord {
    std::size_t stage = 0;
    double epsilon = 0.0;
    std::vector<SampleId> queried;        // in selection order
    std::vector<double> selection_d2;     // D^2 of each pick at selection time
    std::optional<std::size_t> stage_hat; // ERM on this stage's queries; empty means the constant 1/2
    std::vector<SampleId> confident;
    std::vector<SampleId> pool;           // remaining pool after the stage
    std::vector<SampleId> survivors;      // remaining uncertain points after the stage
    double exit_max_d2 = 0.0;             // max D^2 over candidates when the stage ended
    double dimension = 0.0;               // projected dimension used by the stop rule
    bool dimension_exact = false;
    bool stopped = false;
};

struct QueriedSample {
    std::size_t stage = 0;
    LabeledSample sample;
};

struct GeneralSystemState {
    std::size_t f_hat = 0;
    std::vector<LabeledSample> stored;

    friend bool operator==(const GeneralSystemState&, const GeneralSystemState&) = default;
};

struct GeneralModel {
    std::vector<QueriedSample> queried;
    std::vector<StageRecord> stages;
    std::size_t f_hat = 0;
    std::size_t stage_count = 0;  // L
    GeneralConfig config;

    std::vector<LabeledSample> queried_samples() const {
        std::vector<LabeledSample> out;
        out.reserve(queried.size());
        for (const auto& q : queried) out.push_back(q.sample);
        return out;
    }

    std::vector<SampleId> queried_ids() const {
        std::vector<SampleId> out;
        out.reserve(queried.size());
        for (const auto& q : queried) out.push_back(q.sample.id);
        return out;
    }

    // sign(f_hat(x) - 1/2), ties to +1
    int predict(const FiniteFunctionClass& F, SampleId id, const Vector& x) const {
        return sign_label(F(f_hat, id, x) - 0.5);
    }

    GeneralSystemState state_of_system() const { return {f_hat, queried_samples()}; }
};

namespace detail {

inline std::size_t erm_on_table(const Matrix& values, std::span<const std::size_t> idx,
                                std::span<const SampleId> ids, std::span<const int> labels) {
    std::vector<std::size_t> order(idx.begin(), idx.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < values.rows(); ++f) {
        double loss = 0.0;
        for (const std::size_t i : order) {
            const double r = 0.5 * (1.0 + labels[i]) - values(f, static_cast<Eigen::Index>(i));
            loss += r * r;
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = static_cast<std::size_t>(f);
        }
    }
    return best;
}

}  // namespace detail

// Staged pool-based sampler. Each stage greedily queries the candidate with the largest
// D^2 against the stage's queries (ties to the lowest id) while it exceeds eps_l^2, fits
// ERM on the stage, marks confident points, and applies the stop rule. `label_of(i)` is
// only called for queried indices.
template <typename LabelOracle>
GeneralModel general_bbq_select(std::span<const LabeledSample> pool, LabelOracle&& label_of,
                                const FiniteFunctionClass& F, const GeneralConfig& config) {
    config.validate();
    if (pool.empty()) throw InvalidArgument("pool must be nonempty");
    const std::size_t n = pool.size();
    std::vector<SampleId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = pool[i].id;
    {
        std::unordered_set<SampleId> seen(ids.begin(), ids.end());
        if (seen.size() != n) throw InvalidArgument("pool ids must be unique");
    }

    const Matrix values = F.tabulate(pool);
    const Matrix sq = detail::pair_gaps(values);

    std::vector<bool> in_pool(n, true);
    std::vector<bool> in_surv(n, true);
    std::vector<int> labels(n, 0);

    GeneralModel model;
    model.config = config;
    std::vector<std::size_t> all_queried;

    const std::size_t stage_limit = config.fixed_stages ? std::min(*config.fixed_stages, config.max_stages)
                                                        : config.max_stages;

    std::optional<ProjectedDimension> pool_dim;

    for (std::size_t stage = 1; stage <= stage_limit; ++stage) {
        StageRecord rec;
        rec.stage = stage;
        const double scale = std::ldexp(1.0, -static_cast<int>(stage));  // 2^{-l}
        rec.epsilon = scale / std::sqrt(config.rate);
        const double eps2 = rec.epsilon * rec.epsilon;

        std::vector<bool> in_stage(n, false);
        std::vector<std::size_t> stage_idx;
        Vector den = Vector::Zero(sq.rows());
        for (;;) {
            std::size_t pick = n;
            double pick_val = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!in_pool[i] || in_stage[i]) continue;
                const double v = detail::d2_from_gaps(sq, static_cast<Eigen::Index>(i), den);
                if (v > pick_val || (v == pick_val && ids[i] < ids[pick])) {
                    pick_val = v;
                    pick = i;
                }
            }
            if (pick == n) {
                rec.exit_max_d2 = 0.0;
                break;
            }
            if (!(pick_val > eps2)) {
                rec.exit_max_d2 = pick_val;
                break;
            }
            in_stage[pick] = true;
            stage_idx.push_back(pick);
            rec.queried.push_back(ids[pick]);
            rec.selection_d2.push_back(pick_val);
            den += sq.col(static_cast<Eigen::Index>(pick));
        }

        if (!stage_idx.empty()) {
            for (const std::size_t i : stage_idx) {
                labels[i] = label_of(i);
                check_label(labels[i]);
            }
            const std::size_t hat = detail::erm_on_table(values, stage_idx, ids, labels);
            rec.stage_hat = hat;
            const double margin = 3.0 * scale;
            for (std::size_t i = 0; i < n; ++i) {
                if (!in_pool[i] || in_stage[i]) continue;
                if (std::abs(values(static_cast<Eigen::Index>(hat), static_cast<Eigen::Index>(i)) - 0.5) > margin) {
                    rec.confident.push_back(ids[i]);
                    in_surv[i] = false;
                }
            }
        }

        for (const std::size_t i : stage_idx) {
            in_pool[i] = false;
            in_surv[i] = false;
            all_queried.push_back(i);
            model.queried.push_back({stage, pool[i]});
        }

        std::size_t survivors = 0;
        bool any_disagreement = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (in_pool[i]) {
                rec.pool.push_back(ids[i]);
                if (sq.rows() > 0 && sq.col(static_cast<Eigen::Index>(i)).maxCoeff() > 0.0) any_disagreement = true;
            }
            if (in_surv[i]) {
                ++survivors;
                rec.survivors.push_back(ids[i]);
            }
        }

        bool stop = false;
        if (!config.fixed_stages) {
            // The projected dimension is taken over the whole input pool.
            if (!pool_dim) pool_dim = detail::projected_dimension_from_gaps(sq, config.dimension);
            rec.dimension = pool_dim->value;
            rec.dimension_exact = pool_dim->exact;
            const double step = 2.0 * scale;  // 2^{-l+1}
            stop = pool_dim->value * config.rate / step > step * static_cast<double>(survivors);
        }
        // Nothing left that any pair disagrees on: later stages cannot query.
        if (!any_disagreement) stop = true;
        rec.stopped = stop || stage == stage_limit;
        model.stages.push_back(std::move(rec));
        model.stage_count = stage;
        if (stop) break;
    }

    model.f_hat = detail::erm_on_table(values, all_queried, ids, labels);
    return model;
}

inline GeneralModel general_bbq_fit(std::span<const LabeledSample> pool, const FiniteFunctionClass& F,
                                    const GeneralConfig& config) {
    return general_bbq_select(pool, [&](std::size_t i) { return pool[i].y; }, F, config);
}

// Drops requested ids from the queried set and refits ERM on what is left. Requests that
// miss the queried set leave the model untouched.
inline GeneralModel general_deletion_update(GeneralModel model, std::span<const SampleId> ids,
                                            const FiniteFunctionClass& F) {
    std::unordered_set<SampleId> drop(ids.begin(), ids.end());
    const bool hits = std::any_of(model.queried.begin(), model.queried.end(),
                                  [&](const QueriedSample& q) { return drop.contains(q.sample.id); });
    if (!hits) return model;
    std::erase_if(model.queried, [&](const QueriedSample& q) { return drop.contains(q.sample.id); });
    auto scrub = [&](std::vector<SampleId>& v) { std::erase_if(v, [&](SampleId id) { return drop.contains(id); }); };
    for (auto& st : model.stages) {
        for (std::size_t k = st.queried.size(); k-- > 0;) {
            if (drop.contains(st.queried[k])) {
                st.queried.erase(st.queried.begin() + static_cast<std::ptrdiff_t>(k));
                st.selection_d2.erase(st.selection_d2.begin() + static_cast<std::ptrdiff_t>(k));
            }
        }
        scrub(st.confident);
        scrub(st.pool);
        scrub(st.survivors);
    }
    model.f_hat = erm_fit(F, model.queried_samples());
    return model;
}

inline constexpr std::size_t kUnboundedCapacity = std::numeric_limits<std::size_t>::max();

// floor(sqrt(R) / (sqrt(N_T) * beta(N_T))); unbounded when nothing was queried.
inline std::size_t general_capacity(std::size_t queried_count, double rate,
                                    const std::function<double(double)>& beta) {
    if (queried_count == 0) return kUnboundedCapacity;
    const double n = static_cast<double>(queried_count);
    const double b = beta(n);
    if (!(b > 0.0)) throw InvalidArgument("stability rate must be positive");
    const double k = std::sqrt(rate) / (std::sqrt(n) * b);
    // guard against 7.999999 from floating roundoff on exact integer results
    return static_cast<std::size_t>(std::floor(k * (1.0 + 1e-12)));
}

}  // namespace saul
