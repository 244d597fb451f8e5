#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saul/binary_io.hpp"
#include "saul/sample.hpp"

namespace saul {

enum class DatasetKind { RealizableLinear, Margin, Clusters };

inline std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::RealizableLinear: return "realizable";
        case DatasetKind::Margin: return "margin";
        case DatasetKind::Clusters: return "clusters";
    }
    return "unknown";
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "realizable" || s == "realizable-linear") return DatasetKind::RealizableLinear;
    if (s == "margin") return DatasetKind::Margin;
    if (s == "clusters") return DatasetKind::Clusters;
    throw InvalidArgument("unknown dataset kind '" + s + "'");
}

// `clusters` is a non-margin workload: a Gaussian mixture pulled back into the unit ball.
struct DatasetSpec {
    DatasetKind kind = DatasetKind::Margin;
    std::size_t size = 1000;  // T
    Eigen::Index dim = 10;
    std::uint64_t seed = 0;
    double gamma = 0.1;            // margin kind only
    std::optional<Vector> planted;  // u; drawn uniformly on the sphere when absent
    std::size_t clusters = 8;
};

struct Dataset {
    DatasetKind kind = DatasetKind::Margin;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    Vector u;
    std::vector<LabeledSample> samples;

    std::size_t size() const { return samples.size(); }
    Eigen::Index dim() const { return u.size(); }
};

namespace detail {

inline Vector gaussian_vector(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n01;
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = n01(rng);
    return z;
}

inline Vector uniform_in_ball(std::mt19937_64& rng, Eigen::Index d) {
    Vector z = gaussian_vector(rng, d);
    double norm = z.norm();
    while (norm == 0.0) {
        z = gaussian_vector(rng, d);
        norm = z.norm();
    }
    std::uniform_real_distribution<double> u01;
    const double r = std::pow(u01(rng), 1.0 / static_cast<double>(d));
    return (r / norm) * z;
}

inline constexpr std::size_t kMaxConsecutiveRejections = 100000;

}  // namespace detail

// Deterministic under `spec.seed`. Labels follow P(y = +1 | x) = (1 + u^T x) / 2.
inline Dataset gen_dataset(const DatasetSpec& spec) {
    if (spec.size == 0) throw InvalidArgument("dataset size must be positive");
    if (spec.dim < 1) throw InvalidArgument("dimension must be positive");
    if (spec.kind == DatasetKind::Margin && !(spec.gamma >= 0.0 && spec.gamma < 1.0)) {
        throw InvalidArgument("margin gamma must lie in [0, 1)");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u01;

    Dataset ds;
    ds.kind = spec.kind;
    ds.gamma = spec.kind == DatasetKind::Margin ? spec.gamma : 0.0;
    ds.seed = spec.seed;
    if (spec.planted) {
        if (spec.planted->size() != spec.dim) throw InvalidArgument("planted u has wrong dimension");
        if (spec.planted->norm() > 1.0 + kNormTolerance) throw InvalidArgument("planted u must satisfy |u| <= 1");
        ds.u = *spec.planted;
    } else {
        Vector z = detail::gaussian_vector(rng, spec.dim);
        ds.u = z / z.norm();
    }

    std::vector<Vector> centers;
    if (spec.kind == DatasetKind::Clusters) {
        if (spec.clusters == 0) throw InvalidArgument("cluster count must be positive");
        for (std::size_t c = 0; c < spec.clusters; ++c) centers.push_back(0.7 * detail::uniform_in_ball(rng, spec.dim));
    }

    ds.samples.reserve(spec.size);
    std::size_t rejections = 0;
    while (ds.samples.size() < spec.size) {
        Vector x;
        if (spec.kind == DatasetKind::Clusters) {
            const auto c = static_cast<std::size_t>(rng() % centers.size());
            x = centers[c] + 0.15 * detail::gaussian_vector(rng, spec.dim);
            const double n = x.norm();
            if (n > 1.0) x /= n;
        } else {
            x = detail::uniform_in_ball(rng, spec.dim);
        }
        const double margin = ds.u.dot(x);
        if (spec.kind == DatasetKind::Margin && !(std::abs(margin) > spec.gamma)) {
            if (++rejections >= detail::kMaxConsecutiveRejections) {
                throw GenerationInfeasible("margin gamma=" + std::to_string(spec.gamma) + " infeasible in d=" +
                                           std::to_string(spec.dim) + " after " + std::to_string(rejections) +
                                           " consecutive rejections");
            }
            continue;
        }
        rejections = 0;
        const int y = u01(rng) < 0.5 * (1.0 + margin) ? 1 : -1;
        ds.samples.push_back(LabeledSample{static_cast<SampleId>(ds.samples.size()), std::move(x), y});
    }
    return ds;
}

// Deletion-request law. Draws are always without replacement.
struct DeletionDistribution {
    enum class Kind { Uniform, ByLabel, Weighted };
    Kind kind = Kind::Uniform;
    int target_label = -1;
    std::vector<double> weights;  // per sample, dataset order; normalized internally

    static DeletionDistribution uniform() { return {}; }
    static DeletionDistribution by_label(int y) { return {Kind::ByLabel, y, {}}; }
    static DeletionDistribution weighted(std::vector<double> w) { return {Kind::Weighted, -1, std::move(w)}; }
};

// Ordered deletion requests. Uniform: seeded shuffle prefix. By-label: shuffle among samples
// with the target label. Weighted: sequential weighted sampling without replacement.
inline std::vector<SampleId> deletion_stream(std::span<const LabeledSample> samples, const DeletionDistribution& dist,
                                             std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<SampleId> out;
    switch (dist.kind) {
        case DeletionDistribution::Kind::Uniform:
        case DeletionDistribution::Kind::ByLabel: {
            std::vector<SampleId> eligible;
            for (const auto& s : samples) {
                if (dist.kind == DeletionDistribution::Kind::Uniform || s.y == dist.target_label) eligible.push_back(s.id);
            }
            if (count > eligible.size()) {
                throw InvalidArgument("requested " + std::to_string(count) + " deletions from " +
                                      std::to_string(eligible.size()) + " eligible samples");
            }
            std::shuffle(eligible.begin(), eligible.end(), rng);
            eligible.resize(count);
            return eligible;
        }
        case DeletionDistribution::Kind::Weighted: {
            if (dist.weights.size() != samples.size()) throw InvalidArgument("weights must match the dataset size");
            // Exponential keys E_i / w_i: ascending order is a weighted draw without replacement.
            std::vector<std::pair<double, SampleId>> keyed;
            std::exponential_distribution<double> expo(1.0);
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const double w = dist.weights[i];
                if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be nonnegative");
                const double e = expo(rng);
                if (w > 0.0) keyed.emplace_back(e / w, samples[i].id);
            }
            if (count > keyed.size()) {
                throw InvalidArgument("requested " + std::to_string(count) + " deletions from " +
                                      std::to_string(keyed.size()) + " samples with positive weight");
            }
            std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end());
            out.reserve(count);
            for (std::size_t i = 0; i < count; ++i) out.push_back(keyed[i].second);
            return out;
        }
    }
    return out;
}

// Dataset file: magic "SADS1\n", one JSON header line {T,d,kind,gamma,seed,u}, then T rows of
// (id: u64, y: i8, x: d x f64), all little-endian.
inline constexpr std::string_view kDatasetMagic = "SADS1\n";

inline std::string encode_dataset(const Dataset& ds) {
    nlohmann::json header = {{"T", ds.size()},       {"d", ds.dim()},   {"kind", to_string(ds.kind)},
                             {"gamma", ds.gamma},    {"seed", ds.seed}, {"u", std::vector<double>(ds.u.data(), ds.u.data() + ds.u.size())}};
    io::ByteWriter w;
    w.raw(kDatasetMagic);
    w.raw(header.dump());
    w.raw("\n");
    for (const auto& s : ds.samples) {
        w.u64(s.id);
        w.i8(static_cast<std::int8_t>(s.y));
        for (Eigen::Index i = 0; i < s.x.size(); ++i) w.f64(s.x[i]);
    }
    return w.bytes();
}

inline Dataset decode_dataset(std::string_view bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < kDatasetMagic.size() || r.raw(kDatasetMagic.size()) != kDatasetMagic) {
        throw FormatError("not a dataset file (bad magic)");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.line());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed dataset header: ") + e.what());
    }
    Dataset ds;
    std::size_t count = 0;
    Eigen::Index d = 0;
    try {
        count = header.at("T").get<std::size_t>();
        d = header.at("d").get<Eigen::Index>();
        ds.kind = parse_dataset_kind(header.at("kind").get<std::string>());
        ds.gamma = header.at("gamma").get<double>();
        ds.seed = header.at("seed").get<std::uint64_t>();
        const auto u = header.at("u").get<std::vector<double>>();
        ds.u = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset header missing fields: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
    if (d < 1 || ds.u.size() != d) throw FormatError("dataset header dimension mismatch");
    const std::size_t row = 8 + 1 + 8 * static_cast<std::size_t>(d);
    if (r.remaining() < count * row) {
        throw TruncationError("dataset payload holds " + std::to_string(r.remaining()) + " bytes, header promises " +
                              std::to_string(count * row));
    }
    if (r.remaining() != count * row) throw FormatError("dataset payload length does not match header T");
    ds.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        LabeledSample s;
        s.id = r.u64();
        s.y = r.i8();
        if (s.y != 1 && s.y != -1) throw FormatError("invalid label in dataset row " + std::to_string(i));
        s.x.resize(d);
        for (Eigen::Index k = 0; k < d; ++k) s.x[k] = r.f64();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds) { io::write_file(path, encode_dataset(ds)); }

inline Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace saul
