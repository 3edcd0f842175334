// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "lpflow/errors.hpp"
#include "lpflow/measures.hpp"
#include "lpflow/orbits.hpp"
#include "lpflow/pipeline.hpp"
#include "support.hpp"

using namespace lpflow;
using namespace testing_support;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_seconds) {
        r.pass = false;
        r.detail += "; runtime over limit";
    }
    failures += !r.pass;
    std::printf("%s %2d %s: %s [%.2f s, limit %.0f s]\n", r.pass ? "PASS" : "FAIL", id, name, r.detail.c_str(), secs,
                limit_seconds);
    std::fflush(stdout);
}

std::string num(double x)
{
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

PeriodicOrbit hopf_orbit()
{
    const auto f = VectorField::hopf_cylinder();
    const Trajectory seg = integrate_flow(f, vec({1.05, 0.0, 0.01}), 0.0, kTwoPi, {}, 0.05);
    return close_orbit(f, seg);
}

// Closed Lorenz orbits from the best near returns with durations in [lo, hi].
PeriodicOrbit lorenz_orbit(double lo, double hi)
{
    const auto f = VectorField::lorenz();
    const double dt = 0.01;
    const Trajectory tr = integrate_flow(f, lorenz_attractor_point(), 0.0, 100.0, {}, dt);
    const auto a = static_cast<std::size_t>(lo / dt), b = static_cast<std::size_t>(hi / dt);
    std::size_t bi = 0, bj = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        for (std::size_t j = i + a; j <= i + b && j < tr.size(); ++j) {
            const double d = (tr.states[i] - tr.states[j]).norm();
            if (d < best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    }
    return close_orbit(f, tr.slice(bi, bj));
}

Outcome floquet_oracle()
{
    const PeriodicOrbit o = hopf_orbit();
    const PeriodicSpectrum ps = periodic_spectrum(VectorField::hopf_cylinder(), o, {});
    const double period_err = std::abs(o.period - kTwoPi);
    double spec_err = 1e300;
    if (ps.spectrum.size() == 2) {
        spec_err = std::max(std::abs(ps.spectrum.exponents[0] + 2.0), std::abs(ps.spectrum.exponents[1] + 1.0));
    }
    return {spec_err <= 1e-3 && period_err <= 1e-6,
            "spectrum error " + num(spec_err) + " (tol 1e-3), period error " + num(period_err) + " (tol 1e-6)"};
}

Outcome constant_spectra()
{
    const std::size_t n = 10000;
    double worst = 0.0;
    auto check = [&](const Matrix& a, std::vector<double> expected) {
        const auto s = benettin_spectrum(CocycleSequence::constant(a, 1.0, n));
        std::sort(expected.begin(), expected.end());
        for (std::size_t i = 0; i < expected.size(); ++i) worst = std::max(worst, std::abs(s.exponents[i] - expected[i]));
    };
    check(diag({2.0, 0.5, 1.3}), {std::log(2.0), std::log(0.5), std::log(1.3)});
    check(diag({-3.0, 0.25}), {std::log(3.0), std::log(0.25)});
    Matrix tri(3, 3);
    tri << 0.5, 0.7, -1.3, 0, 1.5, 2.1, 0, 0, 3;
    check(tri, {std::log(0.5), std::log(1.5), std::log(3.0)});
    Matrix lower(3, 3);
    lower << 2, 0, 0, 5, 0.3, 0, -1, 4, 1.1;
    check(lower, {std::log(2.0), std::log(0.3), std::log(1.1)});
    check(rotation(0.7), {0.0, 0.0});
    check(1.5 * rotation(2.0), {std::log(1.5), std::log(1.5)});
    return {worst <= 1e-6, "worst exponent error " + num(worst) + " over 6 cocycles at n = 1e4 (tol 1e-6)"};
}

Outcome exterior_sums()
{
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto base = separated_exponents(rng, 4, 0.3);
        const auto c = CocycleSequence::constant(block_with_exponents(random_basis(rng, 4), base), 1.0, 4000);
        for (int n : {2, 3}) {
            const auto got = exterior_spectrum(c, n).exponents;
            const auto want = fold_sums(base, n);
            if (got.size() != want.size()) return {false, "wrong number of exponents"};
            for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        }
    }
    return {worst <= 1e-6, "worst gap to n-fold sums " + num(worst) + " over 20 cocycles, n = 2, 3 (tol 1e-6)"};
}

Outcome time_reversal()
{
    std::mt19937_64 rng(77);
    double worst_const = 0.0;
    for (int k = 0; k < 10; ++k) {
        const int m = 2 + k % 3;
        const auto c = CocycleSequence::constant(
            block_with_exponents(random_basis(rng, m), separated_exponents(rng, m, 0.3)), 1.0, 4000);
        const auto pred = time_reversal_spectrum(benettin_spectrum(c));
        const auto back = benettin_spectrum(reversed_inverse_cocycle(c));
        for (std::size_t i = 0; i < pred.size(); ++i)
            worst_const = std::max(worst_const, std::abs(back.exponents[i] - pred.exponents[i]));
    }

    // Hopf orbit: repeat the one-period cocycle and reverse it
    const auto f = VectorField::hopf_cylinder();
    const PeriodicOrbit o = hopf_orbit();
    const CocycleSequence one = periodic_cocycle(f, o, {});
    CocycleSequence rep;
    const std::size_t periods = 200;
    for (std::size_t p = 0; p < periods; ++p) rep.blocks.insert(rep.blocks.end(), one.blocks.begin(), one.blocks.end());
    rep.step = o.period / static_cast<double>(one.size());
    BenettinOptions whole_periods;
    whole_periods.burn_in = static_cast<long>(20 * one.size());
    const auto pred = time_reversal_spectrum(periodic_spectrum(f, o, {}).spectrum);
    const auto back = benettin_spectrum(reversed_inverse_cocycle(rep), whole_periods);
    double worst_orbit = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        worst_orbit = std::max(worst_orbit, std::abs(back.exponents[i] - pred.exponents[i]));
    return {worst_const <= 1e-6 && worst_orbit <= 1e-3,
            "constant cocycles " + num(worst_const) + " (tol 1e-6), Hopf orbit " + num(worst_orbit) + " (tol 1e-3)"};
}

Outcome perturbation_claim()
{
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    double tightest = 1e300;
    for (int k = 0; k < 1000; ++k) {
        const int m = 2 + k % 4;
        Matrix a(m, m), e(m, m);
        for (int i = 0; i < m * m; ++i) a(i / m, i % m) = n(rng);
        for (int i = 0; i < m * m; ++i) e(i / m, i % m) = n(rng);
        const double eps1 = 0.01 + u(rng);
        const double sigma = perturbation_margin(a, eps1);
        const Matrix b = Matrix::Identity(m, m) + (sigma * std::sqrt(u(rng)) / operator_norm(e)) * e;
        Vector v(m);
        for (int i = 0; i < m; ++i) v(i) = n(rng);
        const double lhs = (a * b * v).norm(), rhs = std::exp(-eps1) * (a * v).norm();
        tightest = std::min(tightest, lhs / rhs);
        violations += lhs < rhs;
    }
    return {violations == 0, std::to_string(violations) + " violations in 1000 triples, min ratio " + num(tightest)};
}

Outcome flow_invariants()
{
    const auto f = VectorField::lorenz();
    const Trajectory tr = integrate_flow(f, lorenz_attractor_point(), 0.0, 200.0, {}, 2.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    // the composed and direct routes end at separately integrated points, and
    // the output frames must be normal there to 1e-6, so the law is checked
    // with tight tolerances
    PoincareConfig cfg;
    cfg.integrator = ClosingOptions::tight_integrator();
    double equiv = 0.0, law = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        const Vector& x = tr.states[k];
        const TangentState ts = propagate_tangent(f, x, 1.0, {});
        equiv = std::max(equiv, (ts.phi * f.value(x) - f.value(ts.state)).norm() / f.value(ts.state).norm());

        const double s = u(rng), t = u(rng);
        const Vector xs = flow_map(f, x, s, cfg.integrator);
        const Vector xst = flow_map(f, xs, t, cfg.integrator);
        const NormalFrame f0 = NormalFrame::at(f, x), f1 = NormalFrame::at(f, xs), f2 = NormalFrame::at(f, xst);
        const Matrix ps = linear_poincare(f, x, s, {f0, f1}, cfg);
        const Matrix pt = linear_poincare(f, xs, t, {f1, f2}, cfg);
        const Matrix pst = linear_poincare(f, x, s + t, {f0, f2}, cfg);
        law = std::max(law, (pst - pt * ps).norm() / pst.norm());
    }
    double mono = 0.0;
    const std::vector<std::pair<VectorField, PeriodicOrbit>> orbits = {
        {VectorField::hopf_cylinder(), hopf_orbit()},
        {f, lorenz_orbit(1.4, 1.7)},
        {f, lorenz_orbit(2.2, 2.5)},
    };
    for (const auto& [field, o] : orbits) {
        const Matrix m = monodromy(field, o, {}, false);
        const Matrix ms = monodromy(field, o, {}, true);
        mono = std::max(mono, (m - ms).norm() / m.norm());
    }
    return {equiv <= 1e-5 && law <= 1e-5 && mono <= 1e-10,
            "equivariance " + num(equiv) + ", psi cocycle law " + num(law) + " (tol 1e-5, 100 samples); psi vs psi* " +
                "monodromy " + num(mono) + " over 3 orbits (tol 1e-10)"};
}

Outcome domination_vs_cones()
{
    std::mt19937_64 rng(404);
    int disagreements = 0, dominated = 0, cones = 0;
    std::size_t max_multiple = 1;
    for (int k = 0; k < 20; ++k) {
        const Matrix v = random_basis(rng, 3);
        const auto ex = separated_exponents(rng, 3, 0.5);
        const auto c = CocycleSequence::constant(block_with_exponents(v, ex), 1.0, 100);
        const auto split3 = oseledec_filtration(c, benettin_spectrum(c));
        if (split3.groups() != 3) return {false, "splitting does not resolve three exponents"};
        // both ways of cutting three directions into E + F
        for (int cut : {1, 2}) {
            std::vector<std::vector<Matrix>> bases(split3.samples());
            for (std::size_t j = 0; j < split3.samples(); ++j)
                bases[j] = {split3.subspace(j, 0, cut), split3.subspace(j, cut, 3)};
            SplittingEstimate split = split3;
            split.bases = bases;
            split.dims = {cut, 3 - cut};
            const DominationReport rep = check_domination(c, split, 1);
            const bool dom = rep.satisfied;
            // cones are tested for the time-NT map once the domination constant is absorbed
            const std::size_t n = dom ? cone_block_multiple(rep, c.step) : 1;
            max_multiple = std::max(max_multiple, n);
            const bool cone =
                search_invariant_cone(coarsen(c, n), coarsen(split, n), 200, static_cast<std::uint64_t>(k + 1)).has_value();
            dominated += dom;
            cones += cone;
            disagreements += dom != cone;
        }
    }
    return {disagreements == 0, std::to_string(disagreements) + " disagreements over 40 splittings (" +
                                    std::to_string(dominated) + " dominated, " + std::to_string(cones) +
                                    " with an invariant cone, block multiple up to " +
                                    std::to_string(max_multiple) + ")"};
}

// One full Lorenz pipeline run shared by criteria 8 to 10.
struct LorenzRun {
    PipelineSettings settings;
    Trajectory traj;
    MeasureSpectrum ms;
    ScanResult scan;
    std::vector<ClosureAttempt> attempts;
    double seconds = 0.0;
};

const std::vector<double> kTiers = {4.0, 7.0, 10.0};

const LorenzRun& lorenz_run()
{
    static const LorenzRun run = [] {
        const auto t0 = std::chrono::steady_clock::now();
        LorenzRun r;
        auto& s = r.settings;
        s.field = VectorField::lorenz();
        s.integrator.box = {vec({-50, -50, -10}), vec({50, 50, 80})};
        s.initial = vec({1.0, 1.0, 20.0});
        s.duration = 5000.0;  // 1e5 samples at dt = 0.05
        s.sample_dt = 0.05;
        s.D_rel = 0.05;
        s.shadow_eps = 0.1;
        s.validate();
        r.traj = simulate(s);
        r.ms = measure_spectrum(s, r.traj);
        r.scan = scan_returns(s, r.traj, r.ms);
        const auto per_tier = (s.max_closures + kTiers.size() - 1) / kTiers.size();
        for (std::size_t id : select_by_period(r.scan.candidates, r.traj, kTiers, return_options(s).min_separation, per_tier))
            r.attempts.push_back(close_candidate(s, r.traj, r.scan.candidates[id]));
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return run;
}

Outcome lorenz_shadowing()
{
    const LorenzRun& r = lorenz_run();
    std::size_t closed = 0, shadowed = 0;
    std::optional<ComparisonReport> best;
    double best_score = 1e300, best_period = 0.0;
    for (const auto& a : r.attempts) {
        if (!a.closed || !a.failure.empty()) continue;
        ++closed;
        if (!a.shadowing.pass) continue;
        ++shadowed;
        const auto rep = compare_spectra(r.ms.spectrum, a.spectrum.spectrum, 0.1);
        double score = 0.0;
        for (std::size_t i = 0; i < rep.gaps.size(); ++i)
            score = std::max(score, rep.gaps[i] / (1.0 + std::abs(rep.measure_spectrum[i])));
        if (score < best_score) {
            best_score = score;
            best = rep;
            best_period = a.orbit.period;
        }
    }
    std::string detail = std::to_string(r.traj.size()) + " samples, " + std::to_string(r.scan.candidates.size()) +
                         " near returns, " + std::to_string(closed) + "/" + std::to_string(r.attempts.size()) +
                         " closed, " + std::to_string(shadowed) + " shadowing";
    if (!best) return {false, detail + "; no orbit passes shadowing"};
    detail += "; best orbit period " + num(best_period) + ", gaps";
    for (double g : best->gaps) detail += " " + num(g);
    detail += ", max gap/(1+|lambda(mu)|) " + num(best_score) + " (tol 0.2); pipeline " + num(r.seconds) + " s";
    return {best_score < 0.2, detail};
}

Outcome weak_star_trend()
{
    const LorenzRun& r = lorenz_run();
    const EmpiricalMeasure mu = empirical_measure(r.traj);
    const TestFunctionFamily fam(r.settings.integrator.box, r.settings.family_size);
    std::vector<std::pair<double, double>> per_orbit;  // (period, d_M)
    for (const auto& a : r.attempts) {
        if (!a.closed || !a.failure.empty()) continue;
        per_orbit.emplace_back(a.orbit.period, weak_star_distance(mu, periodic_measure(a.orbit), fam));
    }
    std::vector<std::optional<double>> mins;
    std::string detail = "min d_M by period tier:";
    for (double bound : kTiers) {
        std::optional<double> m;
        for (const auto& [per, dm] : per_orbit)
            if (per <= bound) m = m ? std::min(*m, dm) : dm;
        mins.push_back(m);
        detail += " <=" + num(bound) + ": " + (m ? num(*m) : std::string("none"));
    }
    bool pass = mins.front().has_value();
    for (std::size_t i = 1; i < mins.size(); ++i) pass = pass && mins[i] && *mins[i] <= *mins[i - 1];
    return {pass, detail};
}

Outcome scanner_soundness()
{
    const LorenzRun& r = lorenz_run();
    std::size_t certs = r.scan.certificates.size(), cands = r.scan.candidates.size();
    std::size_t fails = r.scan.certificate_failures + r.scan.candidate_failures;

    // independent recomputation on a second orbit with a shorter block time
    PipelineSettings s = r.settings;
    s.initial = vec({-3.0, 2.0, 25.0});
    s.duration = 1000.0;
    s.block_time = 0.5;
    s.string_gap = 1.0;
    s.validate();
    const Trajectory tr = simulate(s);
    const MeasureSpectrum ms = measure_spectrum(s, tr);
    const ScanResult second = scan_returns(s, tr, ms);
    for (const auto& c : second.certificates) fails += !verify_certificate(ms.cocycle, ms.split, ms.split_group, c);
    for (const auto& c : second.candidates) fails += !verify_candidate(tr, second.members, return_options(s), c);
    certs += second.certificates.size();
    cands += second.candidates.size();
    return {fails == 0 && certs > 0 && cands > 0, std::to_string(fails) + " re-check failures over " +
                                                      std::to_string(certs) + " string certificates and " +
                                                      std::to_string(cands) + " near returns"};
}

}  // namespace

int main()
{
    criterion(1, "Floquet oracle on the Hopf cylinder", 10, floquet_oracle);
    criterion(2, "constant-cocycle spectra", 5, constant_spectra);
    criterion(3, "exterior-power spectra are n-fold sums", 30, exterior_sums);
    criterion(4, "time reversal", 60, time_reversal);
    criterion(5, "perturbation margin", 60, perturbation_claim);
    criterion(6, "flow and cocycle invariants", 120, flow_invariants);
    criterion(7, "domination and cone invariance agree", 120, domination_vs_cones);
    criterion(8, "Lorenz orbits shadow and match the measure spectrum", 600, lorenz_shadowing);
    criterion(9, "weak* distance does not grow with the period tier", 600, weak_star_trend);
    criterion(10, "scanner certificates re-verify", 600, scanner_soundness);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
