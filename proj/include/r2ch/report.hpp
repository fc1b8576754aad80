#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "r2ch/characteristics.hpp"
#include "r2ch/evolution.hpp"

namespace r2ch {

/// Column order of diagnostics.csv.
inline constexpr const char* kDiagnosticsHeader =
    "t,dt,E,E_drift_rel,sup_ux,inf_ux,x_at_sup_ux,x_at_inf_ux,sup_abs_eta,min_rho,m3,f_sup_abs,lemma31_ceiling,"
    "boundary_leak";

/// %.17g, with "nan", "inf" and "-inf" spelled out.
std::string format_double(double v);

std::string diagnostics_csv(std::span<const DiagnosticRow> samples);

/// t, xi, M, gamma, f_along, u_along, rho_x_along.
std::string track_csv(const ExtremumTrack& track);

/// Two named columns of equal length.
std::string series_csv(const std::string& name_a, std::span<const double> a, const std::string& name_b,
                       std::span<const double> b);

inline constexpr char kSnapshotMagic[8] = {'R', '2', 'C', 'H', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/**
 * Binary field dump: the 8-byte magic, u32 version and u32 n, followed for
 * each snapshot by t, u[0..n), eta[0..n) as little-endian f64. All integers
 * are little-endian too.
 */
std::vector<unsigned char> encode_snapshots(std::span<const FieldState> snapshots, std::size_t n);
std::vector<FieldState> decode_snapshots(std::span<const unsigned char> bytes);

void write_file(const std::string& path, const std::string& contents);
void write_file(const std::string& path, std::span<const unsigned char> contents);
std::vector<unsigned char> read_binary(const std::string& path);

}  // namespace r2ch
