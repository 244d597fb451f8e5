#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "saul/gram_state.hpp"
#include "saul/sample.hpp"

namespace saul {

// Hyperparameters of a fitted linear sampler. `horizon` is the stream length T the
// query threshold T^{-kappa} was computed from; it stays fixed for replays and deletions.
struct BbqParams {
    std::size_t horizon = 0;
    double kappa = 0.5;
    double cap_k = 32.0;  // capacity budget K; the ridge regularizer is lambda = K
    std::size_t refresh_period = GramState::kDefaultRefreshPeriod;

    double lambda() const { return cap_k; }
    double threshold() const { return std::pow(static_cast<double>(horizon), -kappa); }

    void validate() const {
        if (horizon == 0) throw InvalidArgument("horizon must be positive");
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw InvalidArgument("kappa must lie in [0, 1]");
        if (!(cap_k >= 1.0)) throw InvalidArgument("capacity K must be at least 1");
    }
};

struct QueryRecord {
    SampleId id = 0;
    bool queried = false;
    double leverage = 0.0;  // x^T A_{t-1}^{-1} x at decision time
};

struct DeletionStats {
    std::size_t coreset_deletions = 0;
    std::size_t free_deletions = 0;
};

// The attacker-visible part of the system: the model and the samples it still stores.
struct SystemState {
    Vector weight;
    std::vector<LabeledSample> stored;
};

// Stored sets identical (same samples, same order) and weights within `tol` in max-norm.
inline bool equivalent(const SystemState& a, const SystemState& b, double tol) {
    if (a.stored != b.stored) return false;
    if (a.weight.size() != b.weight.size()) return false;
    if (a.weight.size() == 0) return true;
    return (a.weight - b.weight).cwiseAbs().maxCoeff() <= tol;
}

// Gram state plus the ordered core set (queried points in query order).
class BbqModel {
public:
    BbqModel(Eigen::Index dim, BbqParams params)
        : params_(params), gram_(dim, (params.validate(), params.lambda()), params.refresh_period) {}

    const BbqParams& params() const { return params_; }
    const GramState& gram() const { return gram_; }
    const Vector& weight() const { return gram_.weight(); }
    Eigen::Index dim() const { return gram_.dim(); }
    std::size_t coreset_size() const { return coreset_.size(); }
    bool in_coreset(SampleId id) const { return rank_of_.contains(id); }
    const std::vector<QueryRecord>& query_log() const { return query_log_; }
    const DeletionStats& deletion_stats() const { return stats_; }

    std::vector<LabeledSample> coreset() const {
        std::vector<LabeledSample> out;
        out.reserve(coreset_.size());
        for (const auto& [rank, s] : coreset_) out.push_back(s);
        return out;
    }

    std::vector<SampleId> coreset_ids() const {
        std::vector<SampleId> out;
        out.reserve(coreset_.size());
        for (const auto& [rank, s] : coreset_) out.push_back(s.id);
        return out;
    }

    const LabeledSample* find(SampleId id) const {
        auto it = rank_of_.find(id);
        return it == rank_of_.end() ? nullptr : &coreset_.at(it->second);
    }

    // sign(w^T x), ties to +1
    int predict(const Vector& x) const {
        if (x.size() != dim()) throw InvalidArgument("predict: dimension mismatch");
        return sign_label(weight().dot(x));
    }

    double score(const Vector& x) const {
        if (x.size() != dim()) throw InvalidArgument("score: dimension mismatch");
        return weight().dot(x);
    }

    // Removes every requested id that is in the core set via a rank-one downdate. Ids
    // outside the core set cost a hash lookup and nothing else.
    DeletionStats delete_samples(std::span<const SampleId> ids) {
        DeletionStats local;
        for (const SampleId id : ids) {
            if (delete_one(id)) {
                ++local.coreset_deletions;
            } else {
                ++local.free_deletions;
            }
        }
        return local;
    }

    // Returns true when `id` was a core-set member.
    bool delete_one(SampleId id) {
        auto it = rank_of_.find(id);
        if (it == rank_of_.end()) {
            ++stats_.free_deletions;
            return false;
        }
        auto node = coreset_.find(it->second);
        gram_.downdate(node->second.x, static_cast<double>(node->second.y));
        coreset_.erase(node);
        rank_of_.erase(it);
        ++stats_.coreset_deletions;
        return true;
    }

    SystemState state_of_system() const { return SystemState{weight(), coreset()}; }

    // Scalars kept in memory: stored samples (d features + label each) plus the Gram state.
    std::size_t stored_scalars() const {
        return coreset_.size() * static_cast<std::size_t>(dim() + 1) + gram_.stored_scalars();
    }

    void refresh_inverse() { gram_.refresh_inverse(); }

    // Fit-time bookkeeping; used by the fitting routines and the model loader only.
    void record_decision(QueryRecord rec) { query_log_.push_back(rec); }
    void admit(const LabeledSample& s) {
        gram_.update(s.x, static_cast<double>(s.y));
        append_stored(s);
    }
    void append_stored(const LabeledSample& s) {
        if (rank_of_.contains(s.id)) throw InvalidArgument("duplicate sample id " + std::to_string(s.id));
        const std::size_t rank = next_rank_++;
        coreset_.emplace(rank, s);
        rank_of_.emplace(s.id, rank);
    }
    void restore(GramState gram, DeletionStats stats) {
        gram_ = std::move(gram);
        stats_ = stats;
    }

private:
    BbqParams params_;
    GramState gram_;
    std::map<std::size_t, LabeledSample> coreset_;  // keyed by query rank
    std::unordered_map<SampleId, std::size_t> rank_of_;
    std::size_t next_rank_ = 0;
    std::vector<QueryRecord> query_log_;
    DeletionStats stats_;
};

struct NoStepObserver {
    void operator()(std::size_t, const GramState&) const {}
};

// Runs the leverage-threshold selective sampler over `features` in order. `label_of(i)` is
// only invoked for indices whose leverage strictly exceeds T^{-kappa}. `observe(t, A_{t-1})`
// sees the Gram state before each decision.
template <typename LabelOracle, typename StepObserver = NoStepObserver>
BbqModel bbq_select(std::span<const SampleId> ids, std::span<const Vector> features, LabelOracle&& label_of,
                    const BbqParams& params, StepObserver&& observe = {}) {
    if (ids.size() != features.size()) throw InvalidArgument("ids and features differ in length");
    if (features.empty()) throw InvalidArgument("stream must be nonempty");
    BbqModel model(features.front().size(), params);
    const double threshold = params.threshold();
    for (std::size_t t = 0; t < features.size(); ++t) {
        const Vector& x = features[t];
        check_unit_ball(x);
        observe(t, model.gram());
        const double lev = model.gram().leverage(x);
        const bool query = lev > threshold;
        model.record_decision({ids[t], query, lev});
        if (query) {
            const int y = label_of(t);
            check_label(y);
            model.admit(LabeledSample{ids[t], x, y});
        }
    }
    return model;
}

inline BbqModel bbq_fit(std::span<const LabeledSample> stream, const BbqParams& params) {
    if (stream.empty()) throw InvalidArgument("stream must be nonempty");
    std::vector<SampleId> ids;
    std::vector<Vector> xs;
    ids.reserve(stream.size());
    xs.reserve(stream.size());
    for (const auto& s : stream) {
        if (s.x.size() != stream.front().x.size()) throw InvalidArgument("inconsistent feature dimension");
        ids.push_back(s.id);
        xs.push_back(s.x);
    }
    return bbq_select(ids, xs, [&](std::size_t t) { return stream[t].y; }, params);
}

// Fit with T = |stream|.
inline BbqModel bbq_fit(std::span<const LabeledSample> stream, double cap_k, double kappa,
                        std::size_t refresh_period = GramState::kDefaultRefreshPeriod) {
    return bbq_fit(stream, BbqParams{stream.size(), kappa, cap_k, refresh_period});
}

inline BbqModel deletion_update(BbqModel model, std::span<const SampleId> ids) {
    model.delete_samples(ids);
    return model;
}

// Fresh fit on the surviving core set in query order, keeping the original horizon T.
// Verification oracle for the re-query property.
inline BbqModel replay_on_coreset(const BbqModel& model, std::span<const SampleId> removed) {
    std::unordered_set<SampleId> drop(removed.begin(), removed.end());
    std::vector<LabeledSample> survivors;
    for (auto& s : model.coreset()) {
        if (!drop.contains(s.id)) survivors.push_back(std::move(s));
    }
    if (survivors.empty()) return BbqModel(model.dim(), model.params());
    return bbq_fit(survivors, model.params());
}

}  // namespace saul
