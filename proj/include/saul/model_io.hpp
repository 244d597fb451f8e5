#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "saul/bbq.hpp"
#include "saul/binary_io.hpp"

namespace saul {

// Model file layout (little-endian):
//   "SAUL1\n"
//   u64 horizon, f64 kappa, f64 cap_k, u64 refresh_period
//   u64 d, u64 coreset_deletions, u64 free_deletions, u64 downdates_since_refresh
//   u64 n, then n rows of (u64 id, i8 y, d x f64)        core set in query order
//   d*d f64 A (column-major), d*d f64 A^{-1}, d f64 b, d f64 w
// The fit-time query log is not stored.
inline constexpr std::string_view kModelMagic = "SAUL1\n";

inline std::string encode_model(const BbqModel& m) {
    io::ByteWriter w;
    w.raw(kModelMagic);
    const auto& p = m.params();
    w.u64(p.horizon);
    w.f64(p.kappa);
    w.f64(p.cap_k);
    w.u64(p.refresh_period);
    const auto d = m.dim();
    w.u64(static_cast<std::uint64_t>(d));
    w.u64(m.deletion_stats().coreset_deletions);
    w.u64(m.deletion_stats().free_deletions);
    w.u64(m.gram().downdates_since_refresh());
    const auto core = m.coreset();
    w.u64(core.size());
    for (const auto& s : core) {
        w.u64(s.id);
        w.i8(static_cast<std::int8_t>(s.y));
        for (Eigen::Index i = 0; i < d; ++i) w.f64(s.x[i]);
    }
    const auto put = [&](const auto& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v.data()[i]);
    };
    put(m.gram().gram());
    put(m.gram().gram_inv());
    put(m.gram().b());
    put(m.weight());
    return w.bytes();
}

inline BbqModel decode_model(std::string_view bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < kModelMagic.size() || r.raw(kModelMagic.size()) != kModelMagic) {
        throw FormatError("not a model file (bad magic)");
    }
    BbqParams p;
    p.horizon = r.u64();
    p.kappa = r.f64();
    p.cap_k = r.f64();
    p.refresh_period = r.u64();
    const auto d64 = r.u64();
    if (d64 == 0 || d64 > (1u << 16)) throw FormatError("implausible model dimension");
    const auto d = static_cast<Eigen::Index>(d64);
    DeletionStats stats;
    stats.coreset_deletions = r.u64();
    stats.free_deletions = r.u64();
    const auto since = r.u64();
    const auto n = r.u64();
    const std::size_t row = 8 + 1 + 8 * static_cast<std::size_t>(d);
    if (n > r.remaining() / row) throw TruncationError("model core set exceeds file size");
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid model parameters: ") + e.what());
    }
    BbqModel m(d, p);
    for (std::uint64_t i = 0; i < n; ++i) {
        LabeledSample s;
        s.id = r.u64();
        s.y = r.i8();
        if (s.y != 1 && s.y != -1) throw FormatError("invalid label in model core set");
        s.x.resize(d);
        for (Eigen::Index k = 0; k < d; ++k) s.x[k] = r.f64();
        try {
            m.append_stored(s);
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what());
        }
    }
    const auto get = [&](auto& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = r.f64();
    };
    Matrix A(d, d), Ainv(d, d);
    Vector b(d), w(d);
    get(A);
    get(Ainv);
    get(b);
    get(w);
    if (r.remaining() != 0) throw FormatError("trailing bytes after model payload");
    m.restore(GramState::from_parts(p.lambda(), std::move(A), std::move(Ainv), std::move(b), std::move(w),
                                    p.refresh_period, since),
              stats);
    return m;
}

inline void save_model(const std::filesystem::path& path, const BbqModel& m) { io::write_file(path, encode_model(m)); }

inline BbqModel load_model(const std::filesystem::path& path) { return decode_model(io::read_file(path)); }

}  // namespace saul
