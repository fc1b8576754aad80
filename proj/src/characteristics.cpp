#include "r2ch/characteristics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "r2ch/spectral.hpp"

namespace r2ch {

namespace {

constexpr std::size_t kUpsample = 8;

double wrap(double x, double L) {
    const double span = 2.0 * L;
    double y = std::fmod(x + L, span);
    if (y < 0.0) y += span;
    return y - L;
}

struct LagrangeStencil {
    std::array<std::size_t, 8> idx{};
    std::array<double, 8> w{};

    double apply(std::span<const double> f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i) acc += w[i] * f[idx[i]];
        return acc;
    }
};

LagrangeStencil make_stencil(std::size_t n, double x0, double h, double x) {
    const double s = (x - x0) / h;
    const double base = std::floor(s) - 3.0;
    const double r = s - base;  // position relative to node 0 of the stencil, in [3, 4)
    LagrangeStencil st;
    const long long nn = static_cast<long long>(n);
    long long first = static_cast<long long>(base) % nn;
    if (first < 0) first += nn;
    for (std::size_t i = 0; i < 8; ++i) {
        st.idx[i] = static_cast<std::size_t>((first + static_cast<long long>(i)) % nn);
        double w = 1.0;
        for (std::size_t j = 0; j < 8; ++j)
            if (j != i) w *= (r - static_cast<double>(j)) / (static_cast<double>(i) - static_cast<double>(j));
        st.w[i] = w;
    }
    return st;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}

}  // namespace

double lagrange_periodic(std::span<const double> samples, double x0, double h, double x) {
    if (samples.size() < 8) throw InvalidArgument("Lagrange interpolation needs at least 8 samples");
    return make_stencil(samples.size(), x0, h, x).apply(samples);
}

SnapshotFlow::SnapshotFlow(std::span<const FieldState> snapshots, const PhysParams& params, const Grid& grid)
    : snaps_(snapshots), params_(params), grid_(grid), fine_grid_(grid.half_length(), grid.n() * kUpsample) {
    if (snapshots.size() < 2) throw InvalidArgument("at least two snapshots are needed for a flow");
    knots_.reserve(snapshots.size());
    std::vector<double> grad(snapshots.size());
    auto& sp = spectral_for(grid_);
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        if (i > 0 && !(snapshots[i].t > snapshots[i - 1].t))
            throw InvalidArgument("snapshot times must be strictly increasing");
        knots_.push_back(snapshots[i].t);
        grad[i] = max_abs(sp.deriv(snapshots[i].u));
    }
    cadence_.resize(snapshots.size() - 1);
    for (std::size_t i = 0; i + 1 < snapshots.size(); ++i)
        cadence_[i] = (knots_[i + 1] - knots_[i]) * std::max(grad[i], grad[i + 1]);
}

const SnapshotFlow::Fine& SnapshotFlow::fine(std::size_t snapshot) {
    for (auto& c : cache_)
        if (c.index == snapshot) return c;
    Fine& slot = cache_[next_slot_];
    next_slot_ = 1 - next_slot_;

    auto& sp = spectral_for(grid_);
    const FieldState& s = snaps_[snapshot];
    const Tendency tend = rhs(s, params_, grid_);
    const auto ux = sp.deriv(s.u);
    const auto uxx = sp.deriv(ux);
    const auto uxt = sp.deriv(tend.du_dt);
    const auto uxxt = sp.deriv(uxt);
    slot.u = sp.upsample(s.u, kUpsample);
    slot.ux = sp.upsample(ux, kUpsample);
    slot.uxx = sp.upsample(uxx, kUpsample);
    slot.ut = sp.upsample(tend.du_dt, kUpsample);
    slot.uxt = sp.upsample(uxt, kUpsample);
    slot.uxxt = sp.upsample(uxxt, kUpsample);
    slot.index = snapshot;
    return slot;
}

FlowSample SnapshotFlow::sample(std::size_t interval, double t, double x) {
    if (interval + 1 >= knots_.size()) throw InvalidArgument("flow interval out of range");
    const double t0 = knots_[interval];
    const double h = knots_[interval + 1] - t0;
    const double tau = (t - t0) / h;
    const double tau2 = tau * tau, tau3 = tau2 * tau;
    const double h00 = 2 * tau3 - 3 * tau2 + 1, h10 = tau3 - 2 * tau2 + tau;
    const double h01 = -2 * tau3 + 3 * tau2, h11 = tau3 - tau2;
    // Time derivatives of the basis, already divided by h where needed.
    const double d00 = (6 * tau2 - 6 * tau) / h, d10 = 3 * tau2 - 4 * tau + 1;
    const double d01 = (-6 * tau2 + 6 * tau) / h, d11 = 3 * tau2 - 2 * tau;

    const Fine& a = fine(interval);
    const Fine& b = fine(interval + 1);
    const double xw = wrap(x, grid_.half_length());
    const auto st = make_stencil(fine_grid_.n(), -fine_grid_.half_length(), fine_grid_.dx(), xw);

    auto hermite = [&](const std::vector<double>& f0, const std::vector<double>& df0, const std::vector<double>& f1,
                       const std::vector<double>& df1, double& value, double& rate) {
        const double v0 = st.apply(f0), v1 = st.apply(f1);
        const double r0 = st.apply(df0), r1 = st.apply(df1);
        value = h00 * v0 + h10 * h * r0 + h01 * v1 + h11 * h * r1;
        rate = d00 * v0 + d10 * r0 + d01 * v1 + d11 * r1;
    };

    FlowSample out;
    double unused = 0.0;
    hermite(a.u, a.ut, b.u, b.ut, out.u, out.ut);
    hermite(a.ux, a.uxt, b.ux, b.uxt, out.ux, out.uxt);
    hermite(a.uxx, a.uxxt, b.uxx, b.uxxt, out.uxx, unused);
    return out;
}

Trajectory advect(std::span<const double> seeds, FlowField& flow) {
    const double L = flow.half_length();
    for (double s : seeds)
        if (!(s >= -L && s < L)) throw InvalidArgument("seed outside the periodic box");
    const auto& knots = flow.knots();
    if (knots.size() < 2) throw InvalidArgument("flow needs at least two time knots");

    const std::size_t ns = seeds.size(), nt = knots.size();
    Trajectory tr;
    tr.seeds.assign(seeds.begin(), seeds.end());
    tr.times = knots;
    auto alloc = [&](std::vector<std::vector<double>>& v) { v.assign(ns, std::vector<double>(nt)); };
    alloc(tr.path);
    alloc(tr.jac_ode);
    alloc(tr.u_x_along);
    alloc(tr.u_x_rate_along);

    std::vector<double> q(seeds.begin(), seeds.end()), J(ns, 1.0);
    for (std::size_t s = 0; s < ns; ++s) {
        const FlowSample fs = flow.sample(0, knots[0], q[s]);
        tr.path[s][0] = q[s];
        tr.jac_ode[s][0] = 1.0;
        tr.u_x_along[s][0] = fs.ux;
        tr.u_x_rate_along[s][0] = fs.uxt + fs.u * fs.uxx;
    }

    for (std::size_t i = 0; i + 1 < nt; ++i) {
        const double t0 = knots[i], h = knots[i + 1] - t0;
        double worst = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            const FlowSample f1 = flow.sample(i, t0, q[s]);
            const double kq1 = f1.u, kj1 = f1.ux * J[s];
            const FlowSample f2 = flow.sample(i, t0 + 0.5 * h, q[s] + 0.5 * h * kq1);
            const double kq2 = f2.u, kj2 = f2.ux * (J[s] + 0.5 * h * kj1);
            const FlowSample f3 = flow.sample(i, t0 + 0.5 * h, q[s] + 0.5 * h * kq2);
            const double kq3 = f3.u, kj3 = f3.ux * (J[s] + 0.5 * h * kj2);
            const FlowSample f4 = flow.sample(i, t0 + h, q[s] + h * kq3);
            const double kq4 = f4.u, kj4 = f4.ux * (J[s] + h * kj3);
            q[s] += h / 6.0 * (kq1 + 2 * kq2 + 2 * kq3 + kq4);
            J[s] += h / 6.0 * (kj1 + 2 * kj2 + 2 * kj3 + kj4);

            const FlowSample fe = flow.sample(i, knots[i + 1], q[s]);
            tr.path[s][i + 1] = q[s];
            tr.jac_ode[s][i + 1] = J[s];
            tr.u_x_along[s][i + 1] = fe.ux;
            tr.u_x_rate_along[s][i + 1] = fe.uxt + fe.u * fe.uxx;
            worst = std::max({worst, std::abs(f1.ux), std::abs(fe.ux)});
        }
        if (h * worst > kCadenceLimit) ++tr.coarse_intervals;
    }
    return tr;
}

double jacobian_consistency(const Trajectory& traj) {
    double worst = 0.0;
    for (std::size_t s = 0; s < traj.seeds.size(); ++s) {
        double integral = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            if (k > 0) {
                const double h = traj.times[k] - traj.times[k - 1];
                const auto& g = traj.u_x_along[s];
                const auto& dg = traj.u_x_rate_along[s];
                integral += 0.5 * h * (g[k - 1] + g[k]) + h * h / 12.0 * (dg[k - 1] - dg[k]);
            }
            const double expected = std::exp(integral);
            worst = std::max(worst, std::abs(traj.jac_ode[s][k] - expected) / expected);
        }
    }
    return worst;
}

double min_seed_gap(const Trajectory& traj) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        for (std::size_t s = 0; s + 1 < traj.seeds.size(); ++s)
            gap = std::min(gap, traj.path[s + 1][k] - traj.path[s][k]);
    return gap;
}

double sup_transport_error(const Trajectory& traj, std::span<const double> reference) {
    if (reference.size() != traj.times.size())
        throw InvalidArgument("reference series must have one entry per recorded time");
    const std::size_t ns = traj.seeds.size();
    if (ns < 3) throw InvalidArgument("sup transport needs at least three seeds");
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < ns; ++s)
            if (traj.u_x_along[s][k] > traj.u_x_along[best][k]) best = s;
        double value = traj.u_x_along[best][k];
        if (best >= 2 && best + 2 < ns) {
            std::array<double, 5> xs{}, ys{};
            for (std::size_t o = 0; o < 5; ++o) {
                xs[o] = traj.path[best + o - 2][k];
                ys[o] = traj.u_x_along[best + o - 2][k];
            }
            value = std::max(value, quartic_extremum(xs, ys, xs[2]).second);
        }
        worst = std::max(worst, std::abs(value - reference[k]));
    }
    return worst;
}

ExtremumTracker::ExtremumTracker(const PhysParams& params, const Grid& grid, Branch branch)
    : params_(params), grid_(grid) {
    track_.branch = branch;
    track_.dx = grid.dx();
}

void ExtremumTracker::operator()(const FieldState& state, std::size_t) {
    auto& sp = spectral_for(grid_);
    const auto ux = sp.deriv(state.u);
    const Extremum e = refine_extremum(ux, grid_, track_.branch);
    const double x0 = -grid_.half_length(), h = grid_.dx();
    const auto f = eval_f(state, params_, grid_);
    track_.t.push_back(state.t);
    track_.xi.push_back(e.x);
    track_.M.push_back(e.value);
    track_.gamma.push_back(1.0 + lagrange_periodic(state.eta, x0, h, e.x));
    track_.f_along.push_back(lagrange_periodic(f, x0, h, e.x));
    track_.u_sup_abs.push_back(max_abs(state.u));
    track_.u_along.push_back(lagrange_periodic(state.u, x0, h, e.x));
    const auto eta_x = sp.deriv(state.eta);
    track_.rho_x_along.push_back(lagrange_periodic(eta_x, x0, h, e.x));
}

ExtremumTrack track_extremum(std::span<const FieldState> snapshots, const PhysParams& params, const Grid& grid,
                             Branch branch) {
    ExtremumTracker tracker(params, grid, branch);
    for (std::size_t i = 0; i < snapshots.size(); ++i) tracker(snapshots[i], i);
    return tracker.take();
}

double OdeResiduals::max_abs_M() const {
    double m = 0.0;
    for (std::size_t i = 0; i < res_M.size(); ++i)
        if (!excluded[i]) m = std::max(m, std::abs(res_M[i]));
    return m;
}

double OdeResiduals::max_abs_gamma() const {
    double m = 0.0;
    for (std::size_t i = 0; i < res_gamma.size(); ++i)
        if (!excluded[i]) m = std::max(m, std::abs(res_gamma[i]));
    return m;
}

double OdeResiduals::max_abs_gamma_transport() const {
    double m = 0.0;
    for (std::size_t i = 0; i < res_gamma_transport.size(); ++i)
        if (!excluded[i]) m = std::max(m, std::abs(res_gamma_transport[i]));
    return m;
}

std::size_t OdeResiduals::excluded_count() const {
    return static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), true));
}

OdeResiduals ode_residuals(const ExtremumTrack& track, const PhysParams& params) {
    OdeResiduals out;
    const std::size_t n = track.t.size();
    if (n < 3) return out;
    const double sigma = params.sigma();
    const double stiff = params.stiffness();
    auto centered = [&](const std::vector<double>& y, std::size_t i) {
        const double h1 = track.t[i] - track.t[i - 1], h2 = track.t[i + 1] - track.t[i];
        return -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] + h1 / (h2 * (h1 + h2)) * y[i + 1];
    };
    // A step is a jump when it is long and much faster than the steps beside it.
    std::vector<bool> jump(n - 1, false);
    auto speed = [&](std::size_t j) { return std::abs(track.xi[j + 1] - track.xi[j]) / (track.t[j + 1] - track.t[j]); };
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double dt = track.t[j + 1] - track.t[j];
        const double reach = 10.0 * track.dx + 2.0 * dt * std::max(track.u_sup_abs[j], track.u_sup_abs[j + 1]);
        double neighbour = 0.0;
        if (j > 0) neighbour = std::max(neighbour, speed(j - 1));
        if (j + 2 < n) neighbour = std::max(neighbour, speed(j + 1));
        jump[j] = std::abs(track.xi[j + 1] - track.xi[j]) > reach && speed(j) > 4.0 * neighbour;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double M = track.M[i], g = track.gamma[i];
        out.t.push_back(track.t[i]);
        out.res_M.push_back(centered(track.M, i) + 0.5 * sigma * M * M - 0.5 * stiff * g * g - track.f_along[i]);
        out.res_gamma.push_back(centered(track.gamma, i) + M * g);
        const double drift = centered(track.xi, i) - track.u_along[i];
        out.res_gamma_transport.push_back(out.res_gamma.back() - track.rho_x_along[i] * drift);
        out.excluded.push_back(jump[i - 1] || jump[i]);
    }
    return out;
}

std::vector<double> cumulative_integral(std::span<const double> t, std::span<const double> y) {
    if (t.size() != y.size()) throw InvalidArgument("time and value series differ in length");
    const std::size_t n = t.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a = t[i], b = t[i + 1];
        double piece;
        if (n < 4) {
            piece = 0.5 * (b - a) * (y[i] + y[i + 1]);
        } else {
            const std::size_t j0 = std::min(i > 0 ? i - 1 : 0, n - 4);
            // Two-point Gauss-Legendre integrates the interpolating cubic exactly.
            const double mid = 0.5 * (a + b), half = 0.5 * (b - a), off = half / std::sqrt(3.0);
            piece = 0.0;
            for (double x : {mid - off, mid + off}) {
                double v = 0.0;
                for (std::size_t p = j0; p < j0 + 4; ++p) {
                    double w = 1.0;
                    for (std::size_t q = j0; q < j0 + 4; ++q)
                        if (q != p) w *= (x - t[q]) / (t[p] - t[q]);
                    v += w * y[p];
                }
                piece += half * v;
            }
        }
        out[i + 1] = out[i] + piece;
    }
    return out;
}

double gamma_decay_error(const ExtremumTrack& track) {
    if (track.t.empty()) return 0.0;
    const auto I = cumulative_integral(track.t, track.M);
    double worst = 0.0;
    for (std::size_t i = 0; i < track.t.size(); ++i) {
        const double predicted = track.gamma[0] * std::exp(-I[i]);
        worst = std::max(worst, std::abs(track.gamma[i] - predicted) / std::abs(predicted));
    }
    return worst;
}

}  // namespace r2ch
