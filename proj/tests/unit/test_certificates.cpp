#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "r2ch/certificates.hpp"

using namespace r2ch;

namespace {

// Transcriptions collected by powers of E0 (C) and by powers of M (N).
double C_by_energy_power(double E, double r, const PhysParams& p) {
    const double A = p.A(), s = p.sigma(), mu = p.mu(), W = p.Omega(), k = p.stiffness();
    const double e0 = 3.0 * (1.0 - W * A) + W * W * r * r * r * r;
    const double e1 = (A - mu) * (A - mu) / 2.0 + std::abs(3.0 - s) + 1.5 + std::abs(s) / 2.0 + W + 1.5 * W / k +
                      W * W + W * r * (0.5 / k + 0.5);
    const double e15 = W * std::numbers::sqrt2 / (2.0 * k);
    return std::sqrt(e0 + e1 * E + e15 * E * std::sqrt(E));
}

double N_by_mass_power(double E, double M, const PhysParams& p) {
    const double A = p.A(), W = p.Omega(), k = p.stiffness(), r2 = std::numbers::sqrt2;
    const double m2 = 1.5 * E * k + 1.5 * r2 * W * E * std::sqrt(E);
    const double m1 = 1.5 * W * E * E * (1.0 - W * A) / k;
    const double m0 = 2.25 * E + 0.75 * r2 * W * E * E * std::sqrt(E) / k +
                      E * E * ((6.0 + 3.0 * A * A + 6.0 * W * W) / 4.0 + 1.5 * r2 * W / std::sqrt(k) +
                               1.5 * W * (1.0 - W * A) / k);
    return m2 * M * M + m1 * M + m0;
}

PhysParams draw(std::mt19937_64& rng, bool sigma_one) {
    std::uniform_real_distribution<double> A(-1, 1), s(-3, 3), mu(-1, 1), W(0, 1);
    for (;;) {
        const double a = A(rng), w = W(rng);
        if (1.0 - 2.0 * w * a <= 0.05) continue;
        return PhysParams(a, sigma_one ? 1.0 : s(rng), sigma_one ? 0.0 : mu(rng), w);
    }
}

ExtremumTrack exact_sup_track(double sigma, double T, double M_stop) {
    ExtremumTrack tr;
    tr.branch = sigma < 0 ? Branch::sup : Branch::inf;
    for (int i = 0; i < 1000; ++i) {
        const double t = T * (1.0 - std::pow(0.98, i));
        const double M = -2.0 / (sigma * (T - t));
        if (std::abs(M) > M_stop) break;
        tr.t.push_back(t);
        tr.M.push_back(M);
    }
    return tr;
}

}  // namespace

TEST_SUITE("certificates") {
    TEST_CASE("energy functional") {
        const PhysParams p(0.5, 1.0, 0.2, 0.1);
        const Grid g(20.0, 4096);
        FieldState rest{0.0, std::vector<double>(g.n(), 0.0), std::vector<double>(g.n(), 0.0)};
        CHECK(energy(rest, p, g) == 0.0);

        const Grid box(std::numbers::pi, 64);
        FieldState s{0.0, std::vector<double>(box.n()), std::vector<double>(box.n(), 0.0)};
        for (std::size_t j = 0; j < box.n(); ++j) s.u[j] = std::sin(box.x(j));
        CHECK(energy(s, p, box) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));

        const double a = 0.5, w = 2.0;
        FieldState gs{0.0, std::vector<double>(g.n()), std::vector<double>(g.n(), 0.0)};
        for (std::size_t j = 0; j < g.n(); ++j) gs.u[j] = a * std::exp(-g.x(j) * g.x(j) / (w * w));
        const double exact = a * a * std::sqrt(std::numbers::pi / 2.0) * (w + 1.0 / w);
        CHECK(std::abs(energy(gs, p, g) - exact) / exact <= 1e-10);

        for (std::size_t j = 0; j < g.n(); ++j) gs.eta[j] = 0.3 * std::exp(-g.x(j) * g.x(j));
        const double with_eta = exact + p.stiffness() * 0.09 * std::sqrt(std::numbers::pi / 2.0);
        CHECK(energy(gs, p, g) == doctest::Approx(with_eta).epsilon(1e-10));
    }

    TEST_CASE("constant C examples") {
        for (double A : {-0.7, 0.0, 0.5})
            for (double sigma : {-2.0, 1.0, 3.0})
                CHECK(constant_C(0.0, 1.0, PhysParams(A, sigma, 0.3, 0.0)) == doctest::Approx(std::sqrt(3.0)));
        CHECK(constant_C(0.0, 1.0, PhysParams(0.5, 1.0, 0.0, 0.2)) ==
              doctest::Approx(std::sqrt(3.0 * (1.0 - 0.1) + 0.04)).epsilon(1e-15));
        const PhysParams g(0.5, 1.0, 0.0, 0.1);
        CHECK(constant_C(1.0, 1.5, g) == doctest::Approx(C_by_energy_power(1.0, 1.5, g)).epsilon(1e-14));
        CHECK_THROWS_AS(constant_C(-1.0, 1.0, g), InvalidArgument);
    }

    TEST_CASE("ceiling and K2 examples") {
        const double C = std::sqrt(3.0);
        CHECK(lemma31_ceiling(0.0, 1.0, C, PhysParams(0.0, 1.0, 0.0, 0.0)) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(lemma31_ceiling(0.0, 1.0, C, PhysParams(0.0, 4.0, 0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(lemma31_ceiling(1.5, 1.0, C, PhysParams(0.0, 4.0, 0.0, 0.0)) == doctest::Approx(2.5).epsilon(1e-15));
        CHECK(k2_bound(C, 1.0, PhysParams(0.0, 1.0, 0.0, 0.0)) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(k2_bound(1.7, 0.0, PhysParams(0.5, 1.0, 0.0, 0.3)) == doctest::Approx(1.7 * 1.7 / 2.0));
    }

    TEST_CASE("sigma < 0 certificate") {
        const Grid g(10.0, 256);
        const PhysParams p(0.0, -1.0, 0.0, 0.0);
        const std::vector<double> zero(g.n(), 0.0);
        const auto r = thm41_certificate(zero, g, std::sqrt(3.0), p);
        CHECK_FALSE(r.T1_bound);
        CHECK(r.threshold == doctest::Approx(std::sqrt(3.0)));

        CHECK(thm41_T1_bound(4.0, std::sqrt(3.0), p) ==
              doctest::Approx(2.0 / (4.0 + std::sqrt(4.0 * std::sqrt(3.0)))).epsilon(1e-15));

        std::vector<double> u0(g.n());
        for (std::size_t j = 0; j < g.n(); ++j) u0[j] = 4.0 * g.x(j) * std::exp(-g.x(j) * g.x(j));
        const auto c = thm41_certificate(u0, g, std::sqrt(3.0), p);
        REQUIRE(c.T1_bound);
        CHECK(c.u0x_at_witness == doctest::Approx(4.0).epsilon(1e-8));
        CHECK(std::abs(c.witness_x0) <= g.dx());
        CHECK(*c.T1_bound == doctest::Approx(thm41_T1_bound(c.u0x_at_witness, std::sqrt(3.0), p)));
        CHECK_THROWS_AS(thm41_certificate(u0, g, 1.0, PhysParams(0.0, 1.0, 0.0, 0.0)), InvalidArgument);
    }

    TEST_CASE("cubic-moment certificate") {
        const PhysParams p(0.0, 1.0, 0.0, 0.0);
        CHECK(thm42_constant_N(0.0, 2.0, PhysParams(0.3, 1.0, 0.0, 0.4)) == 0.0);
        CHECK(thm42_constant_N(1.0, 0.0, p) == doctest::Approx(15.0 / 4.0).epsilon(1e-15));
        CHECK_THROWS_AS(thm42_constant_N(1.0, 0.0, PhysParams(0.0, 1.0, 0.1, 0.0)), InvalidArgument);
        CHECK_THROWS_AS(thm42_constant_N(1.0, 0.0, PhysParams(0.0, 2.0, 0.0, 0.0)), InvalidArgument);

        CHECK(thm42_T_bound(-2.0, 1.0, 1.0) ==
              doctest::Approx(std::sqrt(0.5) * std::log((-2.0 - std::sqrt(2.0)) / (-2.0 + std::sqrt(2.0))))
                  .epsilon(1e-15));

        const Grid g(10.0, 512);
        std::vector<double> even(g.n());
        for (std::size_t j = 0; j < g.n(); ++j) even[j] = std::exp(-g.x(j) * g.x(j));
        const auto e = thm42_certificate(even, g, 1.0, 1.0);
        CHECK(std::abs(e.m0) <= 1e-12);
        CHECK_FALSE(e.condition_met);
        CHECK_FALSE(e.T_bound);
        CHECK(thm42_certificate(even, g, 0.0, 1.0).condition_met);

        std::vector<double> steep(g.n());
        for (std::size_t j = 0; j < g.n(); ++j) steep[j] = -30.0 * g.x(j) * std::exp(-g.x(j) * g.x(j) / 0.01);
        const auto s = thm42_certificate(steep, g, 1.0, 1.0);
        CHECK(s.m0 < -std::sqrt(2.0));
        CHECK(s.condition_met);
        REQUIRE(s.T_bound);
        CHECK(*s.T_bound > 0.0);
    }

    TEST_CASE("formulas agree with a third transcription") {
        std::mt19937_64 rng(314159);
        std::uniform_real_distribution<double> E(0.0, 20.0), r(0.0, 3.0), M(0.0, 4.0);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const PhysParams p = draw(rng, false);
            const double e = E(rng), rho = r(rng);
            const double C = constant_C(e, rho, p);
            worst = std::max(worst, std::abs(C - C_by_energy_power(e, rho, p)) / C);
            const PhysParams q = draw(rng, true);
            const double e1 = E(rng), m = M(rng);
            const double N = thm42_constant_N(e1, m, q);
            if (N > 0.0) worst = std::max(worst, std::abs(N - N_by_mass_power(e1, m, q)) / N);
        }
        CHECK(worst <= 1e-12);
    }

    TEST_CASE("monotonicity and positivity of the constants") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> E(0.0, 10.0), r(0.0, 3.0), M(0.0, 4.0), d(0.01, 1.0);
        for (int i = 0; i < 300; ++i) {
            const PhysParams p = draw(rng, false);
            const double e = E(rng), rho = r(rng), de = d(rng);
            const double C = constant_C(e, rho, p);
            CHECK(C > 0.0);
            CHECK(constant_C(e + de, rho, p) >= C);
            CHECK(constant_C(e, rho + de, p) >= C);
            CHECK(k2_bound(C, rho, p) > 0.0);
            if (p.sigma() > 0.0) CHECK(lemma31_ceiling(1.0, rho, C, p) > 1.0);
            if (p.sigma() < 0.0) {
                const double th = C / std::sqrt(-p.sigma());
                const double s1 = th * (1.0 + de), s2 = th * (1.0 + 2.0 * de);
                CHECK(thm41_T1_bound(s1, C, p) > thm41_T1_bound(s2, C, p));
                CHECK(thm41_T1_bound(s1, C, p) > 0.0);
            }
            const PhysParams q = draw(rng, true);
            const double m = M(rng);
            const double N = thm42_constant_N(e, m, q);
            CHECK(N >= 0.0);
            CHECK(thm42_constant_N(e + de, m, q) >= N);
            CHECK(thm42_constant_N(e, m + de, q) >= N);
        }
    }

    TEST_CASE("certificate assembly") {
        const Grid g(20.0, 1024);
        InitialDataSpec spec;
        spec.u_terms.push_back({ProfileKind::gaussian_bump, 0.3, 2.0, 0.0});
        spec.eta_terms.push_back({ProfileKind::eta_bump, 0.1, 2.0, 0.0});
        const FieldState s = synthesize(spec, g);

        const PhysParams pos(0.5, 1.0, 0.2, 0.1);
        const auto c = build_certificate(s, pos, g);
        CHECK(c.E0 == doctest::Approx(energy(s, pos, g)));
        CHECK(c.rho0_sup == doctest::Approx(1.1).epsilon(1e-12));
        REQUIRE(c.lemma31_ceiling);
        CHECK_FALSE(c.thm41);
        CHECK_FALSE(c.thm42);
        CHECK_FALSE(c.rate_target);
        CHECK(c.regime == classify_regime(pos));

        const PhysParams neg(0.5, -1.0, 0.0, 0.1);
        const auto n = build_certificate(s, neg, g);
        CHECK_FALSE(n.lemma31_ceiling);
        REQUIRE(n.thm41);
        REQUIRE(n.rate_target);
        CHECK(*n.rate_target == 2.0);

        const PhysParams one(0.5, 1.0, 0.0, 0.1);
        CHECK_FALSE(build_certificate(s, one, g).thm42);
        const auto t = build_certificate(s, one, g, 2.0);
        REQUIRE(t.thm42);
        CHECK(t.thm42->M_assumed == 2.0);
        CHECK(t.thm42->N == doctest::Approx(thm42_constant_N(t.E0, 2.0, one)));
    }

    TEST_CASE("monitors stay quiet at rest and on ceiling and forcing for smooth data") {
        const Grid g(20.0, 512);
        const PhysParams p(0.5, 1.0, 0.2, 0.1);
        FieldState rest{0.0, std::vector<double>(g.n(), 0.0), std::vector<double>(g.n(), 0.0)};
        IntegratorConfig c;
        c.t_end = 1.0;
        const auto cert0 = build_certificate(rest, p, g);
        c.lemma31_ceiling = cert0.lemma31_ceiling;
        ExtremumTracker tr0(p, g, Branch::sup);
        const auto rec0 = run(rest, p, g, c, [&](const FieldState& s, std::size_t k) { tr0(s, k); });
        CHECK(monitor_bounds(rec0.samples, cert0, &tr0.track(), p).clean());

        InitialDataSpec spec;
        spec.u_terms.push_back({ProfileKind::gaussian_bump, 0.3, 2.0, 0.0});
        spec.eta_terms.push_back({ProfileKind::eta_bump, 0.1, 2.0, 0.0});
        const FieldState s = synthesize(spec, g);
        const auto cert = build_certificate(s, p, g);
        c.lemma31_ceiling = cert.lemma31_ceiling;
        c.t_end = 2.0;
        ExtremumTracker tr(p, g, Branch::sup);
        const auto rec = run(s, p, g, c, [&](const FieldState& st, std::size_t k) { tr(st, k); });
        const auto rep = monitor_bounds(rec.samples, cert, &tr.track(), p);
        CHECK(rep.count("ceiling") == 0);
        CHECK(rep.count("forcing") == 0);
        CHECK(std::find(rep.checks_run.begin(), rep.checks_run.end(), "density") != rep.checks_run.end());
    }

    TEST_CASE("monotone check flags a decreasing sup branch") {
        const Grid g(10.0, 256);
        const PhysParams p(0.0, -1.0, 0.0, 0.0);
        Certificate cert;
        cert.C = 1.0;
        cert.rho0_sup = 1.0;
        cert.regime = classify_regime(p);
        cert.thm41 = Thm41Result{1.0, 0.0, 3.0, 0.5};
        std::vector<DiagnosticRow> rows(5);
        ExtremumTrack tr;
        tr.branch = Branch::sup;
        const double Ms[] = {3.0, 4.0, 5.0, 4.5, 6.0};
        for (std::size_t i = 0; i < 5; ++i) {
            rows[i].t = 0.1 * i;
            rows[i].sup_ux = Ms[i];
            tr.t.push_back(0.1 * i);
            tr.M.push_back(Ms[i]);
            tr.gamma.push_back(1.0);
            tr.f_along.push_back(0.0);
        }
        const auto rep = monitor_bounds(rows, cert, &tr, p);
        CHECK(rep.count("monotone") == 1);
    }

    TEST_CASE("rate product on exact profiles") {
        const PhysParams p(0.0, -1.0, 0.0, 0.0);
        const auto tr = exact_sup_track(p.sigma(), 3.0, 250.0);
        const auto rep = rate_check(tr, 3.0, p);
        CHECK(rep.target == 2.0);
        CHECK(rep.validated);
        REQUIRE(rep.window_samples >= 8);
        for (double v : rep.product) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(rep.final_value == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(rep.rel_error <= 1e-12);

        const PhysParams q(0.0, -0.5, 0.0, 0.0);
        CHECK(rate_check(exact_sup_track(q.sigma(), 1.0, 250.0), 1.0, q).final_value ==
              doctest::Approx(4.0).epsilon(1e-12));

        const PhysParams pos(0.0, 1.0, 0.0, 0.0);
        const auto un = rate_check_unvalidated(exact_sup_track(pos.sigma(), 2.0, 250.0), 2.0, pos);
        CHECK_FALSE(un.validated);
        CHECK(std::isnan(un.target));
        CHECK(un.final_value == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK_THROWS_AS(rate_check(tr, 3.0, pos), InvalidArgument);
    }
}
