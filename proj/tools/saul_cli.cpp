#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saul/capacity.hpp"
#include "saul/datastreams.hpp"
#include "saul/harness.hpp"
#include "saul/model_io.hpp"
#include "saul/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kVerifyFailed = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenOptions {
    std::string kind = "margin";
    std::size_t t = 1000;
    long d = 10;
    double gamma = 0.1;
    std::uint64_t seed = 0;
    std::size_t clusters = 8;
    std::string out;
};

struct FitOptions {
    std::string data;
    double kappa = 0.5;
    double cap_k = 32.0;
    std::size_t horizon = 0;
    std::string out;
};

struct UnlearnOptions {
    std::string model;
    std::string data;
    std::string ids_file;
    std::string dist = "uniform";
    int label = -1;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string out;
};

struct BenchOptions {
    std::string data;
    std::string kind = "margin";
    std::size_t t = 20000;
    long d = 20;
    double gamma = 0.1;
    std::vector<std::string> methods;
    double kappa = 0.5;
    double cap_k = 32.0;
    double delta = 0.01;
    std::size_t shards = 16;
    std::string dist = "label";
    int label = -1;
    double fraction = 0.4;
    std::size_t cadence = 400;
    std::uint64_t seed = 0;
    std::string policy = "refit";
    bool no_gate = false;
    std::string format = "both";
    std::string out = "bench_out";
};

struct CapacityOptions {
    std::string data;
    std::size_t t = 2000;
    long d = 10;
    double kappa = 0.5;
    double cap_k = 10.0;
    double delta = 0.01;
    double c = 0.2;
    std::size_t trials = 200;
    std::vector<std::size_t> totals;
    std::uint64_t seed = 0;
    std::string out;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t trials = 50;
};

saul::Dataset dataset_from(const std::string& path, const std::string& kind, std::size_t t, long d, double gamma,
                           std::uint64_t seed) {
    if (!path.empty()) return saul::load_dataset(path);
    saul::DatasetSpec spec;
    spec.kind = saul::parse_dataset_kind(kind);
    spec.size = t;
    spec.dim = d;
    spec.gamma = gamma;
    spec.seed = seed;
    return saul::gen_dataset(spec);
}

int cmd_gen(const GenOptions& o) {
    saul::DatasetSpec spec;
    try {
        spec.kind = saul::parse_dataset_kind(o.kind);
    } catch (const saul::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    spec.size = o.t;
    spec.dim = o.d;
    spec.gamma = o.gamma;
    spec.seed = o.seed;
    spec.clusters = o.clusters;
    const auto ds = saul::gen_dataset(spec);
    saul::save_dataset(o.out, ds);
    std::cout << "wrote " << ds.size() << " samples (d=" << ds.dim() << ") to " << o.out << "\n";
    return kOk;
}

int cmd_fit(const FitOptions& o) {
    const auto ds = saul::load_dataset(o.data);
    saul::validate_samples(ds.samples);
    const saul::BbqParams p{o.horizon == 0 ? ds.size() : o.horizon, o.kappa, o.cap_k};
    try {
        p.validate();
    } catch (const saul::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const auto m = saul::bbq_fit(ds.samples, p);
    saul::save_model(o.out, m);
    std::cout << "queried " << m.coreset_size() << " of " << ds.size() << " samples; model written to " << o.out
              << "\n";
    return kOk;
}

std::vector<saul::SampleId> read_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<saul::SampleId> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ids.push_back(std::stoull(line));
    }
    return ids;
}

int cmd_unlearn(const UnlearnOptions& o) {
    auto m = saul::load_model(o.model);
    std::vector<saul::SampleId> ids;
    if (!o.ids_file.empty()) {
        ids = read_ids(o.ids_file);
    } else {
        if (o.data.empty()) throw UsageError("unlearn needs --ids or --data");
        const auto ds = saul::load_dataset(o.data);
        saul::DeletionDistribution dist;
        if (o.dist == "uniform") {
            dist = saul::DeletionDistribution::uniform();
        } else if (o.dist == "label") {
            dist = saul::DeletionDistribution::by_label(o.label);
        } else {
            throw UsageError("unknown --dist '" + o.dist + "'");
        }
        ids = saul::deletion_stream(ds.samples, dist, o.count, o.seed);
    }
    const auto stats = m.delete_samples(ids);
    saul::save_model(o.out, m);
    nlohmann::json j = {{"deletions", ids.size()},
                        {"coreset_deletions", stats.coreset_deletions},
                        {"free_deletions", stats.free_deletions},
                        {"coreset_size", m.coreset_size()}};
    std::cout << j.dump() << "\n";
    return kOk;
}

int cmd_bench(const BenchOptions& o) {
    saul::ExperimentConfig cfg;
    if (!o.data.empty()) cfg.dataset_path = o.data;
    try {
        cfg.dataset.kind = saul::parse_dataset_kind(o.kind);
        cfg.policy = saul::parse_policy(o.policy);
    } catch (const saul::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    cfg.dataset.size = o.t;
    cfg.dataset.dim = o.d;
    cfg.dataset.gamma = o.gamma;
    cfg.dataset.seed = o.seed;
    cfg.methods = o.methods;
    cfg.kappa = o.kappa;
    cfg.cap_k = o.cap_k;
    cfg.delta = o.delta;
    cfg.shards = o.shards;
    if (o.dist == "uniform") {
        cfg.deletions.kind = saul::DeletionDistribution::Kind::Uniform;
    } else if (o.dist == "label") {
        cfg.deletions.kind = saul::DeletionDistribution::Kind::ByLabel;
    } else {
        throw UsageError("unknown --dist '" + o.dist + "'");
    }
    cfg.deletions.label = o.label;
    cfg.deletions.fraction = o.fraction;
    cfg.cadence = o.cadence;
    cfg.seed = o.seed;
    cfg.gate = !o.no_gate;
    if (o.format != "json" && o.format != "csv" && o.format != "both") throw UsageError("unknown --format");
    try {
        cfg.validate();
    } catch (const saul::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const auto rep = saul::run_experiment(cfg);
    const std::filesystem::path out(o.out);
    if (o.format != "csv") saul::emit_report(rep, saul::ReportFormat::Json, out / "report.json");
    if (o.format != "json") saul::emit_report(rep, saul::ReportFormat::Csv, out);
    for (const auto& m : rep.methods) {
        std::printf("%-8s train %.4fs  deletions %.4fs  refits %.4fs  stored %.2f%%  final acc %.4f\n", m.method.c_str(),
                    m.train_seconds, m.deletion_seconds, m.refit_seconds, 100.0 * m.stored_fraction,
                    m.curve.back().accuracy);
    }
    return kOk;
}

int cmd_capacity(const CapacityOptions& o) {
    const auto ds = dataset_from(o.data, "margin", o.t, o.d, 0.1, o.seed);
    saul::CapacityParams p{ds.size(), ds.dim(), o.kappa, o.delta, 0.1, o.cap_k};
    try {
        p.validate();
    } catch (const saul::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    saul::MonteCarloOptions mc;
    mc.trials = o.trials;
    mc.seed = o.seed;
    mc.kappa = o.kappa;
    mc.cap_k = o.cap_k;
    mc.totals = o.totals;
    const std::size_t predicted = saul::expected_capacity_uniform(p, o.c);
    if (mc.totals.empty()) {
        for (std::size_t k = 1; k <= 8; ++k) mc.totals.push_back(std::max<std::size_t>(predicted, 1) * k / 2);
        mc.totals.push_back(predicted);
        std::sort(mc.totals.begin(), mc.totals.end());
        mc.totals.erase(std::unique(mc.totals.begin(), mc.totals.end()), mc.totals.end());
    }
    const auto r = saul::expected_capacity_mc(ds.samples, saul::DeletionDistribution::uniform(),
                                              static_cast<std::size_t>(o.cap_k), mc);
    auto j = saul::capacity_report_json(p, r);
    j["K_total_predicted"] = predicted;
    j["c"] = o.c;
    if (!o.out.empty()) {
        saul::io::write_file(o.out, j.dump(2) + "\n");
    } else {
        std::cout << j.dump(2) << "\n";
    }
    return kOk;
}

int cmd_verify(const VerifyOptions& o) {
    bool ok = true;
    for (const auto& r : saul::run_verify(o.seed, o.trials)) {
        std::printf("%-26s %zu/%zu %s\n", r.name.c_str(), r.trials - r.failures, r.trials, r.ok() ? "ok" : "FAIL");
        if (!r.ok()) {
            std::printf("  %s\n", r.first_failure.c_str());
            ok = false;
        }
    }
    return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"system-aware unlearning toolkit"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
    g->add_option("--kind", gen.kind, "realizable | margin | clusters")->capture_default_str();
    g->add_option("--t", gen.t, "number of samples")->capture_default_str();
    g->add_option("--d", gen.d, "dimension")->capture_default_str();
    g->add_option("--gamma", gen.gamma, "margin for --kind margin")->capture_default_str();
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("--clusters", gen.clusters)->capture_default_str();
    g->add_option("--out", gen.out)->required();

    FitOptions fit;
    auto* f = app.add_subcommand("fit", "fit the selective sampler and save the model");
    f->add_option("--data", fit.data)->required();
    f->add_option("--kappa", fit.kappa)->capture_default_str();
    f->add_option("--cap-k", fit.cap_k, "capacity budget K (also the regularizer)")->capture_default_str();
    f->add_option("--horizon", fit.horizon, "T for the query threshold; defaults to the dataset size");
    f->add_option("--out", fit.out)->required();

    UnlearnOptions un;
    auto* u = app.add_subcommand("unlearn", "apply deletions to a saved model");
    u->add_option("--model", un.model)->required();
    u->add_option("--ids", un.ids_file, "file with one sample id per line");
    u->add_option("--data", un.data, "dataset to draw a deletion stream from");
    u->add_option("--dist", un.dist, "uniform | label")->capture_default_str();
    u->add_option("--label", un.label)->capture_default_str();
    u->add_option("--count", un.count)->capture_default_str();
    u->add_option("--seed", un.seed)->capture_default_str();
    u->add_option("--out", un.out)->required();

    BenchOptions bench;
    auto* b = app.add_subcommand("bench", "run the deletion benchmark");
    b->add_option("--data", bench.data, "dataset file; otherwise one is generated");
    b->add_option("--kind", bench.kind)->capture_default_str();
    b->add_option("--t", bench.t)->capture_default_str();
    b->add_option("--d", bench.d)->capture_default_str();
    b->add_option("--gamma", bench.gamma)->capture_default_str();
    b->add_option("--methods", bench.methods, "bbq, sisa, retrain")->required()->delimiter(',');
    b->add_option("--kappa", bench.kappa)->capture_default_str();
    b->add_option("--cap-k", bench.cap_k)->capture_default_str();
    b->add_option("--delta", bench.delta)->capture_default_str();
    b->add_option("--shards", bench.shards)->capture_default_str();
    b->add_option("--dist", bench.dist, "label | uniform")->capture_default_str();
    b->add_option("--label", bench.label)->capture_default_str();
    b->add_option("--fraction", bench.fraction, "deletions as a fraction of the training split")->capture_default_str();
    b->add_option("--cadence", bench.cadence)->capture_default_str();
    b->add_option("--seed", bench.seed)->capture_default_str();
    b->add_option("--policy", bench.policy, "refit | halt")->capture_default_str();
    b->add_flag("--no-gate", bench.no_gate);
    b->add_option("--format", bench.format, "json | csv | both")->capture_default_str();
    b->add_option("--out", bench.out, "output directory")->capture_default_str();

    CapacityOptions cap;
    auto* c = app.add_subcommand("capacity", "Monte Carlo capacity curves");
    c->add_option("--data", cap.data);
    c->add_option("--t", cap.t)->capture_default_str();
    c->add_option("--d", cap.d)->capture_default_str();
    c->add_option("--kappa", cap.kappa)->capture_default_str();
    c->add_option("--cap-k", cap.cap_k)->capture_default_str();
    c->add_option("--delta", cap.delta)->capture_default_str();
    c->add_option("--c", cap.c, "failure level")->capture_default_str();
    c->add_option("--trials", cap.trials)->capture_default_str();
    c->add_option("--totals", cap.totals, "K_total grid")->delimiter(',');
    c->add_option("--seed", cap.seed)->capture_default_str();
    c->add_option("--out", cap.out);

    VerifyOptions ver;
    auto* v = app.add_subcommand("verify", "run the randomized invariant suites");
    v->add_option("--seed", ver.seed)->capture_default_str();
    v->add_option("--trials", ver.trials)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*f) return cmd_fit(fit);
        if (*u) return cmd_unlearn(un);
        if (*b) return cmd_bench(bench);
        if (*c) return cmd_capacity(cap);
        if (*v) return cmd_verify(ver);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
