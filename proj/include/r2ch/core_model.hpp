#pragma once

#include <cstddef>
#include <optional>
#include <array>
#include <span>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

namespace r2ch {

/// Raised for any violated precondition on model inputs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Dimensionless parameters of the rotating two-component system.
 *
 *   A      linear shear of the underlying current
 *   sigma  balance index between steepening and stretching
 *   mu     dispersion parameter
 *   Omega  rotation speed (nonnegative)
 *
 * Construction enforces 1 - 2*Omega*A > 0, the standing hypothesis of every
 * bound evaluated by this library.
 */
class PhysParams {
public:
    PhysParams(double A, double sigma, double mu, double Omega);

    double A() const { return A_; }
    double sigma() const { return sigma_; }
    double mu() const { return mu_; }
    double Omega() const { return Omega_; }

    /// 1 - 2*Omega*A, strictly positive.
    double stiffness() const { return 1.0 - 2.0 * Omega_ * A_; }

    bool operator==(const PhysParams&) const = default;

private:
    double A_, sigma_, mu_, Omega_;
};

struct RegimeFlags {
    bool scenario_sigma_pos = false;  ///< sigma > 0: gradient ceiling and inf-branch scenario
    bool blowup_sigma_neg = false;    ///< sigma < 0: threshold blow-up and rate law
    bool blowup_sigma_one = false;    ///< sigma = 1, mu = 0: cubic-moment blow-up

    bool operator==(const RegimeFlags&) const = default;
};

RegimeFlags classify_regime(const PhysParams& params);

/// Periodic box [-L, L) with n equispaced samples standing in for the real line.
class Grid {
public:
    Grid(double half_length, std::size_t n);

    double half_length() const { return L_; }
    std::size_t n() const { return n_; }
    double dx() const { return dx_; }
    double x(std::size_t j) const { return -L_ + static_cast<double>(j) * dx_; }
    std::vector<double> nodes() const;

    /// Number of stored real-to-complex modes, n/2 + 1.
    std::size_t modes() const { return n_ / 2 + 1; }
    /// k_m = pi*m/L for m = 0..n/2.
    const std::vector<double>& wavenumbers() const { return k_; }

    bool operator==(const Grid& o) const { return L_ == o.L_ && n_ == o.n_; }

private:
    double L_;
    std::size_t n_;
    double dx_;
    std::vector<double> k_;
};

Grid build_grid(double half_length, std::size_t n);

/// Time stamp plus samples of the velocity u and the surface deviation eta = rho - 1.
struct FieldState {
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> eta;
};

bool all_finite(std::span<const double> v);

/// Largest |u| or |eta| over the outer 5% of the box on either side.
double boundary_magnitude(const FieldState& state, const Grid& grid);

enum class ProfileKind { gaussian_bump, slope_bump, eta_bump };

/// One closed-form term of an initial profile. Amplitude is a (or b for eta).
struct ProfileTerm {
    ProfileKind kind = ProfileKind::gaussian_bump;
    double amplitude = 0.0;
    double width = 1.0;
    double center = 0.0;

    double value(double x) const;
    double derivative(double x) const;
};

/**
 * Initial data as sums of closed-form terms. Gaussian and slope bumps feed u;
 * eta bumps feed eta. eta_zero replaces eta by -1 everywhere (rho = 0), a
 * test-only mode that deliberately violates the far-field condition.
 */
struct InitialDataSpec {
    std::vector<ProfileTerm> u_terms;
    std::vector<ProfileTerm> eta_terms;
    bool eta_zero = false;
    double decay_tol = 1e-10;

    double u0(double x) const;
    double u0_x(double x) const;
    double eta0(double x) const;
};

/// Thrown by synthesize when the profile is not negligible at the box edge.
class DecayViolation : public InvalidArgument {
public:
    DecayViolation(double magnitude, double tol);
    double magnitude() const { return magnitude_; }

private:
    double magnitude_;
};

FieldState synthesize(const InitialDataSpec& spec, const Grid& grid);

/// Location and value of a discrete extremum after three-point parabolic refinement.
struct Extremum {
    std::size_t index = 0;
    double x = 0.0;
    double value = 0.0;
};

enum class Branch { sup, inf };

/**
 * Grid argmax (Branch::sup) or argmin (Branch::inf) of periodic samples,
 * refined by the parabola through the extremal node and its two neighbours.
 * Ties resolve to the smallest x.
 */
Extremum refine_extremum(std::span<const double> samples, const Grid& grid, Branch branch);

/// Same grid extremum, polished with the quartic through five nodes (error O(dx^5) for smooth data).
Extremum refine_extremum_quartic(std::span<const double> samples, const Grid& grid, Branch branch);

/**
 * Stationary point of the quartic through five (x, y) pairs with distinct x,
 * searched by Newton's method from x_start and confined to [x[1], x[3]].
 * Returns {x, value}; falls back to the middle sample if Newton fails.
 */
std::pair<double, double> quartic_extremum(const std::array<double, 5>& x, const std::array<double, 5>& y,
                                           double x_start);

}  // namespace r2ch
