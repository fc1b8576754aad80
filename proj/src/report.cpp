#include "r2ch/report.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "r2ch/core_model.hpp"

namespace r2ch {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string diagnostics_csv(std::span<const DiagnosticRow> samples) {
    std::string out = kDiagnosticsHeader;
    out += '\n';
    for (const auto& r : samples) {
        const double cells[] = {r.t,           r.dt,          r.E,           r.E_drift_rel, r.sup_ux,
                                r.inf_ux,      r.x_at_sup_ux, r.x_at_inf_ux, r.sup_abs_eta, r.min_rho,
                                r.m3,          r.f_sup_abs,   r.lemma31_ceiling.value_or(std::nan("")),
                                r.boundary_leak};
        for (std::size_t i = 0; i < std::size(cells); ++i) {
            if (i) out += ',';
            out += format_double(cells[i]);
        }
        out += '\n';
    }
    return out;
}

std::string track_csv(const ExtremumTrack& tr) {
    std::string out = "t,xi,M,gamma,f_along,u_along,rho_x_along\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        const double cells[] = {tr.t[i], tr.xi[i], tr.M[i], tr.gamma[i], tr.f_along[i], tr.u_along[i],
                                tr.rho_x_along[i]};
        for (std::size_t c = 0; c < std::size(cells); ++c) {
            if (c) out += ',';
            out += format_double(cells[c]);
        }
        out += '\n';
    }
    return out;
}

std::string series_csv(const std::string& name_a, std::span<const double> a, const std::string& name_b,
                       std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("series columns differ in length");
    std::string out = name_a + "," + name_b + "\n";
    for (std::size_t i = 0; i < a.size(); ++i) out += format_double(a[i]) + "," + format_double(b[i]) + "\n";
    return out;
}

namespace {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <class T>
T get_le(std::span<const unsigned char> in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw InvalidArgument("snapshot stream is truncated");
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

std::vector<unsigned char> encode_snapshots(std::span<const FieldState> snapshots, std::size_t n) {
    std::vector<unsigned char> out(std::begin(kSnapshotMagic), std::end(kSnapshotMagic));
    put_le<std::uint32_t>(out, kSnapshotVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    out.reserve(out.size() + snapshots.size() * (2 * n + 1) * sizeof(double));
    for (const auto& s : snapshots) {
        if (s.u.size() != n || s.eta.size() != n) throw InvalidArgument("snapshot length does not match n");
        put_le<double>(out, s.t);
        for (double v : s.u) put_le<double>(out, v);
        for (double v : s.eta) put_le<double>(out, v);
    }
    return out;
}

std::vector<FieldState> decode_snapshots(std::span<const unsigned char> in) {
    if (in.size() < 16 || std::memcmp(in.data(), kSnapshotMagic, 8) != 0)
        throw InvalidArgument("not a snapshot stream (bad magic)");
    std::size_t pos = 8;
    const auto version = get_le<std::uint32_t>(in, pos);
    if (version != kSnapshotVersion) throw InvalidArgument("unsupported snapshot version " + std::to_string(version));
    const std::size_t n = get_le<std::uint32_t>(in, pos);
    const std::size_t record = (2 * n + 1) * sizeof(double);
    if (n == 0 || (in.size() - pos) % record != 0) throw InvalidArgument("snapshot stream is truncated");
    std::vector<FieldState> out((in.size() - pos) / record);
    for (auto& s : out) {
        s.t = get_le<double>(in, pos);
        s.u.resize(n);
        s.eta.resize(n);
        for (auto& v : s.u) v = get_le<double>(in, pos);
        for (auto& v : s.eta) v = get_le<double>(in, pos);
    }
    return out;
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_file(const std::string& path, std::span<const unsigned char> contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<unsigned char> read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace r2ch
