#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "saul/baselines.hpp"
#include "saul/bbq.hpp"
#include "saul/capacity.hpp"
#include "saul/datastreams.hpp"

namespace saul {

inline constexpr int kReportVersion = 1;

struct DeletionSpec {
    DeletionDistribution::Kind kind = DeletionDistribution::Kind::ByLabel;
    int label = -1;
    double fraction = 0.4;  // of the training split
};

struct ExperimentConfig {
    std::optional<std::filesystem::path> dataset_path;  // takes precedence over `dataset`
    DatasetSpec dataset{DatasetKind::Margin, 20000, 20, 0, 0.1, std::nullopt, 8};
    std::vector<std::string> methods{"bbq", "sisa", "retrain"};
    double kappa = 0.5;
    double cap_k = 32.0;
    double delta = 0.01;
    std::size_t shards = 16;
    double baseline_lambda = kBaselineLambda;
    DeletionSpec deletions{};
    std::size_t cadence = 400;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;  // split, deletion stream, shuffles
    bool gate = true;
    ExhaustionPolicy policy = ExhaustionPolicy::Refit;
    std::size_t probe_size = 512;

    void validate() const {
        if (methods.empty()) throw InvalidArgument("at least one method is required");
        for (const auto& m : methods) {
            if (m != "bbq" && m != "sisa" && m != "retrain") throw InvalidArgument("unknown method '" + m + "'");
        }
        std::unordered_set<std::string> seen(methods.begin(), methods.end());
        if (seen.size() != methods.size()) throw InvalidArgument("duplicate method");
        if (cadence == 0) throw InvalidArgument("cadence must be at least 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test fraction must lie in (0, 1)");
        if (!(deletions.fraction >= 0.0 && deletions.fraction <= 1.0)) {
            throw InvalidArgument("deletion fraction must lie in [0, 1]");
        }
        if (shards == 0) throw InvalidArgument("shard count must be at least 1");
        if (deletions.kind == DeletionDistribution::Kind::Weighted) {
            throw InvalidArgument("weighted deletion streams are not available in experiments");
        }
        BbqParams{1, kappa, cap_k}.validate();
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    }
};

struct CurvePoint {
    std::size_t deletions = 0;
    double accuracy = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct MethodReport {
    std::string method;
    double train_seconds = 0.0;
    double deletion_seconds = 0.0;  // accumulated over the stream, unlearning path only
    double refit_seconds = 0.0;     // gate-triggered refits (bbq only)
    std::size_t stored_samples = 0;
    double stored_fraction = 0.0;
    std::size_t stored_scalars = 0;
    std::vector<CurvePoint> curve;
    std::size_t coreset_deletions = 0;
    std::size_t free_deletions = 0;
    std::size_t refused_deletions = 0;
    std::size_t gate_events = 0;
    std::size_t refits = 0;
    std::size_t capacity = 0;     // gate capacity at fit time
    double margin_estimate = 0.0;  // gate margin at fit time

    friend bool operator==(const MethodReport&, const MethodReport&) = default;
};

struct ExperimentReport {
    int report_version = kReportVersion;
    std::uint64_t seed = 0;
    std::size_t dim = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t deletions = 0;
    std::size_t cadence = 1;
    std::vector<MethodReport> methods;

    const MethodReport* find(const std::string& name) const {
        for (const auto& m : methods) {
            if (m.method == name) return &m;
        }
        return nullptr;
    }

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

struct Split {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
};

// Seeded split stratified by label; each class contributes round(fraction * n_class) test points.
// Both halves keep the original stream order.
inline Split stratified_split(std::span<const LabeledSample> samples, double test_fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].y > 0 ? pos : neg).push_back(i);
    std::vector<char> is_test(samples.size(), 0);
    for (auto* cls : {&pos, &neg}) {
        std::shuffle(cls->begin(), cls->end(), rng);
        const auto n = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(cls->size())));
        for (std::size_t k = 0; k < n; ++k) is_test[(*cls)[k]] = 1;
    }
    Split s;
    for (std::size_t i = 0; i < samples.size(); ++i) (is_test[i] ? s.test : s.train).push_back(samples[i]);
    return s;
}

template <typename Predictor>
double accuracy(const Predictor& model, std::span<const LabeledSample> test) {
    if (test.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : test) hits += model.predict(s.x) == s.y;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Curve sampling points: 0, cadence, 2 cadence, ..., and the final count.
inline bool on_cadence(std::size_t done, std::size_t total, std::size_t cadence) {
    return done % cadence == 0 || done == total;
}

inline MethodReport run_bbq(const ExperimentConfig& cfg, std::span<const LabeledSample> train,
                            std::span<const LabeledSample> test, std::span<const SampleId> stream) {
    MethodReport r;
    r.method = "bbq";
    const BbqParams params{train.size(), cfg.kappa, cfg.cap_k};
    { auto warm = bbq_fit(train, params); }
    const auto t0 = Clock::now();
    BbqModel model = bbq_fit(train, params);
    r.train_seconds = seconds_since(t0);

    std::optional<CapacityGate> gate;
    CapacityParams cap{train.size(), static_cast<Eigen::Index>(model.dim()), cfg.kappa, cfg.delta, 0.0, cfg.cap_k};
    if (cfg.gate) {
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(cfg.seed ^ 0x70726f6265ULL);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<LabeledSample> probe;
        for (const std::size_t i : order) {
            if (probe.size() >= cfg.probe_size) break;
            if (!model.in_coreset(train[i].id)) probe.push_back(train[i]);
        }
        if (!probe.empty()) {
            gate.emplace(model, std::move(probe), cap);
            r.capacity = gate->capacity();
            r.margin_estimate = gate->margin_estimate();
        }
    }

    MetricSet since_reset;
    bool halted = false;
    r.curve.push_back({0, accuracy(model, test)});
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const SampleId id = stream[k];
        if (halted) {
            ++r.refused_deletions;
        } else {
            const auto t1 = Clock::now();
            const bool hit = model.delete_one(id);
            r.deletion_seconds += seconds_since(t1);
            if (hit) {
                ++r.coreset_deletions;
                ++since_reset.coreset_deletions;
            } else {
                ++r.free_deletions;
                ++since_reset.free_deletions;
                if (gate) gate->forget(id);
            }
            if (gate && hit && gate->check(model, since_reset) == GateDecision::BudgetExhausted) {
                ++r.gate_events;
                if (cfg.policy == ExhaustionPolicy::Halt) {
                    halted = true;
                } else {
                    const auto t2 = Clock::now();
                    model = replay_on_coreset(model, {});
                    r.refit_seconds += seconds_since(t2);
                    ++r.refits;
                    since_reset = {};
                    if (gate->probe_size() > 0) {
                        auto alive = gate->probe();
                        gate.emplace(model, std::move(alive), cap);
                    } else {
                        gate.reset();
                    }
                }
            }
        }
        if (on_cadence(k + 1, stream.size(), cfg.cadence)) r.curve.push_back({k + 1, accuracy(model, test)});
    }
    r.stored_samples = model.coreset_size();
    r.stored_fraction = static_cast<double>(r.stored_samples) / static_cast<double>(train.size());
    r.stored_scalars = model.stored_scalars();
    return r;
}

inline MethodReport run_retrain(const ExperimentConfig& cfg, std::span<const LabeledSample> train,
                                std::span<const LabeledSample> test, std::span<const SampleId> stream) {
    MethodReport r;
    r.method = "retrain";
    { ExactRetrainModel warm(train, cfg.baseline_lambda); }
    const auto t0 = Clock::now();
    ExactRetrainModel model(train, cfg.baseline_lambda);
    r.train_seconds = seconds_since(t0);
    r.curve.push_back({0, accuracy(model, test)});
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const auto t1 = Clock::now();
        model.exact_unlearn(stream[k]);
        r.deletion_seconds += seconds_since(t1);
        if (on_cadence(k + 1, stream.size(), cfg.cadence)) r.curve.push_back({k + 1, accuracy(model, test)});
    }
    r.stored_samples = model.size();
    r.stored_fraction = 1.0;  // every live sample is kept
    r.stored_scalars = model.stored_scalars();
    return r;
}

inline MethodReport run_sisa(const ExperimentConfig& cfg, std::span<const LabeledSample> train,
                             std::span<const LabeledSample> test, std::span<const SampleId> stream) {
    MethodReport r;
    r.method = "sisa";
    { SisaModel warm(train, cfg.shards, cfg.seed, cfg.baseline_lambda); }
    const auto t0 = Clock::now();
    SisaModel model(train, cfg.shards, cfg.seed, cfg.baseline_lambda);
    r.train_seconds = seconds_since(t0);
    r.curve.push_back({0, accuracy(model, test)});
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const auto t1 = Clock::now();
        model.unlearn(stream[k]);
        r.deletion_seconds += seconds_since(t1);
        if (on_cadence(k + 1, stream.size(), cfg.cadence)) r.curve.push_back({k + 1, accuracy(model, test)});
    }
    r.stored_samples = model.size();
    r.stored_fraction = 1.0;
    r.stored_scalars = model.stored_scalars();
    return r;
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Dataset ds = cfg.dataset_path ? load_dataset(*cfg.dataset_path) : gen_dataset(cfg.dataset);
    validate_samples(ds.samples);
    const Split split = stratified_split(ds.samples, cfg.test_fraction, cfg.seed);
    if (split.train.empty()) throw InvalidArgument("training split is empty");

    DeletionDistribution dist = cfg.deletions.kind == DeletionDistribution::Kind::Uniform
                                    ? DeletionDistribution::uniform()
                                    : DeletionDistribution::by_label(cfg.deletions.label);
    const auto count =
        static_cast<std::size_t>(std::llround(cfg.deletions.fraction * static_cast<double>(split.train.size())));
    const auto stream = deletion_stream(split.train, dist, count, cfg.seed + 1);

    ExperimentReport rep;
    rep.seed = cfg.seed;
    rep.dim = static_cast<std::size_t>(ds.dim());
    rep.train_size = split.train.size();
    rep.test_size = split.test.size();
    rep.deletions = stream.size();
    rep.cadence = cfg.cadence;
    for (const auto& m : cfg.methods) {
        if (m == "bbq") rep.methods.push_back(detail::run_bbq(cfg, split.train, split.test, stream));
        if (m == "retrain") rep.methods.push_back(detail::run_retrain(cfg, split.train, split.test, stream));
        if (m == "sisa") rep.methods.push_back(detail::run_sisa(cfg, split.train, split.test, stream));
    }
    return rep;
}

inline nlohmann::json to_json(const MethodReport& m) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : m.curve) curve.push_back({p.deletions, p.accuracy});
    return {{"method", m.method},
            {"train_seconds", m.train_seconds},
            {"deletion_seconds", m.deletion_seconds},
            {"refit_seconds", m.refit_seconds},
            {"stored_samples", m.stored_samples},
            {"stored_fraction", m.stored_fraction},
            {"stored_scalars", m.stored_scalars},
            {"curve", curve},
            {"counters",
             {{"coreset_deletions", m.coreset_deletions},
              {"free_deletions", m.free_deletions},
              {"refused_deletions", m.refused_deletions},
              {"gate_events", m.gate_events},
              {"refits", m.refits},
              {"capacity", m.capacity},
              {"margin_estimate", m.margin_estimate}}}};
}

inline nlohmann::json to_json(const ExperimentReport& r) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : r.methods) methods.push_back(to_json(m));
    return {{"report_version", r.report_version},
            {"seed", r.seed},
            {"d", r.dim},
            {"train_size", r.train_size},
            {"test_size", r.test_size},
            {"deletions", r.deletions},
            {"cadence", r.cadence},
            {"methods", methods}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
    try {
        ExperimentReport r;
        r.report_version = j.at("report_version").get<int>();
        if (r.report_version != kReportVersion) throw FormatError("unsupported report_version");
        r.seed = j.at("seed").get<std::uint64_t>();
        r.dim = j.at("d").get<std::size_t>();
        r.train_size = j.at("train_size").get<std::size_t>();
        r.test_size = j.at("test_size").get<std::size_t>();
        r.deletions = j.at("deletions").get<std::size_t>();
        r.cadence = j.at("cadence").get<std::size_t>();
        for (const auto& mj : j.at("methods")) {
            MethodReport m;
            m.method = mj.at("method").get<std::string>();
            m.train_seconds = mj.at("train_seconds").get<double>();
            m.deletion_seconds = mj.at("deletion_seconds").get<double>();
            m.refit_seconds = mj.at("refit_seconds").get<double>();
            m.stored_samples = mj.at("stored_samples").get<std::size_t>();
            m.stored_fraction = mj.at("stored_fraction").get<double>();
            m.stored_scalars = mj.at("stored_scalars").get<std::size_t>();
            for (const auto& p : mj.at("curve")) m.curve.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
            const auto& c = mj.at("counters");
            m.coreset_deletions = c.at("coreset_deletions").get<std::size_t>();
            m.free_deletions = c.at("free_deletions").get<std::size_t>();
            m.refused_deletions = c.at("refused_deletions").get<std::size_t>();
            m.gate_events = c.at("gate_events").get<std::size_t>();
            m.refits = c.at("refits").get<std::size_t>();
            m.capacity = c.at("capacity").get<std::size_t>();
            m.margin_estimate = c.at("margin_estimate").get<double>();
            r.methods.push_back(std::move(m));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

inline std::string format_accuracy(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", a);
    return buf;
}

// CSV text for one method's curve.
inline std::string curve_csv(const MethodReport& m) {
    std::ostringstream out;
    out << "deletions,accuracy,method\n";
    for (const auto& p : m.curve) out << p.deletions << ',' << format_accuracy(p.accuracy) << ',' << m.method << '\n';
    return out.str();
}

enum class ReportFormat { Json, Csv };

// Json: writes `out` as a file. Csv: `out` is a directory receiving curve_<method>.csv.
// Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const ExperimentReport& r, ReportFormat format,
                                                      const std::filesystem::path& out) {
    std::vector<std::filesystem::path> written;
    try {
        if (format == ReportFormat::Json) {
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            io::write_file(out, to_json(r).dump(2) + "\n");
            written.push_back(out);
        } else {
            std::filesystem::create_directories(out);
            for (const auto& m : r.methods) {
                const auto path = out / ("curve_" + m.method + ".csv");
                io::write_file(path, curve_csv(m));
                written.push_back(path);
            }
        }
    } catch (const std::filesystem::filesystem_error& e) {
        throw std::runtime_error("cannot write report to " + out.string() + ": " + e.what());
    }
    return written;
}

inline ExperimentReport load_report(const std::filesystem::path& path) {
    try {
        return report_from_json(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace saul
