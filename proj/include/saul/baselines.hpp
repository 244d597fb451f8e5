#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "saul/gram_state.hpp"
#include "saul/sample.hpp"

namespace saul {

inline constexpr double kBaselineLambda = 1.0;

// w = (lambda I + sum x x^T)^{-1} sum y x by a direct Cholesky solve.
inline Vector ridge_retrain(std::span<const LabeledSample> samples, double lambda, Eigen::Index dim) {
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
    if (dim < 1) throw InvalidArgument("dimension must be positive");
    Matrix A = lambda * Matrix::Identity(dim, dim);
    Vector b = Vector::Zero(dim);
    for (const auto& s : samples) {
        if (s.x.size() != dim) throw InvalidArgument("inconsistent feature dimension");
        A.selfadjointView<Eigen::Lower>().rankUpdate(s.x);
        b.noalias() += static_cast<double>(s.y) * s.x;
    }
    return A.selfadjointView<Eigen::Lower>().llt().solve(b);
}

inline Vector ridge_retrain(std::span<const LabeledSample> samples, double lambda = kBaselineLambda) {
    if (samples.empty()) throw InvalidArgument("ridge_retrain needs a nonempty dataset");
    return ridge_retrain(samples, lambda, samples.front().x.size());
}

// Full-data ridge classifier. Deletions are exact: each one is a rank-one downdate of the
// full Gram state.
class ExactRetrainModel {
public:
    ExactRetrainModel(std::span<const LabeledSample> samples, double lambda = kBaselineLambda)
        : gram_((samples.empty() ? throw InvalidArgument("dataset must be nonempty") : samples.front().x.size()), lambda) {
        validate_samples(samples);
        members_.reserve(samples.size());
        for (const auto& s : samples) {
            gram_.update(s.x, static_cast<double>(s.y));
            members_.emplace(s.id, s);
        }
    }

    const Vector& weight() const { return gram_.weight(); }
    const GramState& gram() const { return gram_; }
    Eigen::Index dim() const { return gram_.dim(); }
    std::size_t size() const { return members_.size(); }
    bool contains(SampleId id) const { return members_.contains(id); }

    int predict(const Vector& x) const { return sign_label(weight().dot(x)); }

    void exact_unlearn(SampleId id) {
        auto it = members_.find(id);
        if (it == members_.end()) throw InvalidArgument("unknown sample id " + std::to_string(id));
        gram_.downdate(it->second.x, static_cast<double>(it->second.y));
        members_.erase(it);
    }

    void exact_unlearn(std::span<const SampleId> ids) {
        for (const SampleId id : ids) exact_unlearn(id);
    }

    std::size_t stored_scalars() const {
        return members_.size() * static_cast<std::size_t>(dim() + 1) + gram_.stored_scalars();
    }

private:
    GramState gram_;
    std::unordered_map<SampleId, LabeledSample> members_;
};

// Functional form: ridge solution on S \ U via downdates.
inline Vector exact_unlearn(std::span<const LabeledSample> samples, std::span<const SampleId> ids,
                            double lambda = kBaselineLambda) {
    ExactRetrainModel m(samples, lambda);
    m.exact_unlearn(ids);
    return m.weight();
}

// Sharded ensemble: seeded shuffle, round-robin shards, one ridge model per shard,
// majority vote with ties to +1.
class SisaModel {
public:
    SisaModel(std::span<const LabeledSample> samples, std::size_t shards, std::uint64_t seed,
              double lambda = kBaselineLambda)
        : lambda_(lambda) {
        if (shards == 0) throw InvalidArgument("shard count must be at least 1");
        if (samples.empty()) throw InvalidArgument("dataset must be nonempty");
        validate_samples(samples);
        dim_ = samples.front().x.size();
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        shards_.resize(shards);
        weights_.assign(shards, Vector::Zero(dim_));
        for (std::size_t i = 0; i < order.size(); ++i) {
            const auto& s = samples[order[i]];
            const std::size_t k = i % shards;
            shard_of_.emplace(s.id, k);
            shards_[k].push_back(s);
        }
        for (std::size_t k = 0; k < shards; ++k) retrain(k);
    }

    std::size_t shard_count() const { return shards_.size(); }
    std::size_t shard_of(SampleId id) const {
        auto it = shard_of_.find(id);
        if (it == shard_of_.end()) throw InvalidArgument("unknown sample id " + std::to_string(id));
        return it->second;
    }
    const std::vector<LabeledSample>& shard(std::size_t k) const { return shards_.at(k); }
    const Vector& shard_weight(std::size_t k) const { return weights_.at(k); }
    std::size_t size() const { return shard_of_.size(); }

    int predict(const Vector& x) const {
        long votes = 0;
        for (const auto& w : weights_) votes += sign_label(w.dot(x));
        return votes >= 0 ? 1 : -1;
    }

    // Retrains only the shard that held `id`; returns its index.
    std::size_t unlearn(SampleId id) {
        const std::size_t k = shard_of(id);
        auto& members = shards_[k];
        members.erase(std::find_if(members.begin(), members.end(), [&](const LabeledSample& s) { return s.id == id; }));
        shard_of_.erase(id);
        retrain(k);
        return k;
    }

    void unlearn(std::span<const SampleId> ids) {
        for (const SampleId id : ids) unlearn(id);
    }

    std::size_t stored_scalars() const {
        return shard_of_.size() * static_cast<std::size_t>(dim_ + 1) + shards_.size() * static_cast<std::size_t>(dim_);
    }

private:
    void retrain(std::size_t k) {
        weights_[k] = shards_[k].empty() ? Vector::Zero(dim_) : ridge_retrain(shards_[k], lambda_, dim_);
    }

    double lambda_;
    Eigen::Index dim_ = 0;
    std::vector<std::vector<LabeledSample>> shards_;
    std::vector<Vector> weights_;
    std::unordered_map<SampleId, std::size_t> shard_of_;
};

}  // namespace saul
