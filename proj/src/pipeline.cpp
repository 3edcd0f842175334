#include "lpflow/pipeline.hpp"

#include <cmath>

#include "lpflow/errors.hpp"

namespace lpflow {

namespace {

// n with |value - n * unit| tiny, or ConfigError.
std::size_t whole_multiple(double value, double unit, const char* what)
{
    const double r = value / unit;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r)) throw ConfigError(what);
    return static_cast<std::size_t>(n);
}

}  // namespace

void PipelineSettings::validate() const
{
    integrator.validate();
    pesin.validate();
    if (!(transient >= 0.0)) throw ConfigError("transient must be nonnegative");
    if (!(duration > 0.0) || !(sample_dt > 0.0) || !(block_time > 0.0)) {
        throw ConfigError("duration, sample_dt and block_time must be positive");
    }
    stride();
    whole_multiple(string_gap, block_time, "string gap must be a whole multiple of block_time");
    if (!(string_eta > 0.0)) throw ConfigError("string eta must be positive");
    if (!(D_rel > 0.0)) throw ConfigError("D_rel must be positive");
    if (!(min_return_time > 0.0) || !(max_return_time >= min_return_time)) {
        throw ConfigError("need 0 < min_return_time <= max_return_time");
    }
    if (!(shadow_eps > 0.0 && shadow_eps < 1.0)) throw ConfigError("shadowing eps must be in (0, 1)");
    if (family_size == 0) throw ConfigError("test function family must be nonempty");
    if (initial.size() != 0 && initial.size() != field.dimension()) throw ConfigError("initial point has wrong dimension");
}

std::size_t PipelineSettings::stride() const
{
    return whole_multiple(block_time, sample_dt, "block_time must be a whole multiple of sample_dt");
}

Trajectory simulate(const PipelineSettings& s)
{
    s.validate();
    const Vector x0 = s.initial.size() ? s.initial : Vector::Ones(s.field.dimension());
    const Vector start = s.transient > 0.0 ? flow_map(s.field, x0, s.transient, s.integrator) : x0;
    return integrate_flow(s.field, start, 0.0, s.duration, s.integrator, s.sample_dt);
}

MeasureSpectrum measure_spectrum(const PipelineSettings& s, const Trajectory& traj)
{
    MeasureSpectrum ms;
    const PoincareConfig cfg = PoincareConfig::for_field(s.field, s.integrator);
    ms.cocycle = build_cocycle_along(s.field, traj, s.stride(), cfg);
    ms.spectrum = benettin_spectrum(ms.cocycle, s.benettin);
    ms.split = oseledec_filtration(ms.cocycle, ms.spectrum, s.filtration);
    ms.split_group = stable_group_count(ms.spectrum);
    return ms;
}

NearReturnOptions return_options(const PipelineSettings& s)
{
    NearReturnOptions o;
    o.D_rel = s.D_rel;
    o.min_separation = static_cast<std::size_t>(std::ceil(s.min_return_time / s.sample_dt - 1e-9));
    o.max_separation = static_cast<std::size_t>(std::floor(s.max_return_time / s.sample_dt + 1e-9));
    o.max_candidates = s.max_candidates;
    return o;
}

ScanResult scan_returns(const PipelineSettings& s, const Trajectory& traj, const MeasureSpectrum& ms)
{
    ScanResult r;
    const std::size_t stride = s.stride();
    r.blocks = pesin_block_scan(ms.cocycle, ms.split, ms.split_group, s.pesin);
    for (const auto& b : r.blocks) {
        if (b.member) r.members.push_back(b.start * stride);
    }
    r.certificates = quasi_hyperbolic_scan(ms.cocycle, ms.split, ms.split_group, s.string_eta, s.string_gap);
    for (const auto& c : r.certificates) r.certificate_failures += !verify_certificate(ms.cocycle, ms.split, ms.split_group, c);
    const NearReturnOptions opts = return_options(s);
    r.candidates = near_return_detect(traj, r.members, opts);
    for (const auto& c : r.candidates) r.candidate_failures += !verify_candidate(traj, r.members, opts, c);
    return r;
}

std::vector<std::size_t> distinct_candidates(const std::vector<ReturnCandidate>& cands, std::size_t separation,
                                             std::size_t limit)
{
    std::vector<std::size_t> picked;
    auto near = [&](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= separation; };
    for (std::size_t k = 0; k < cands.size() && picked.size() < limit; ++k) {
        bool dup = false;
        for (std::size_t p : picked) dup = dup || (near(cands[k].i, cands[p].i) && near(cands[k].j, cands[p].j));
        if (!dup) picked.push_back(k);
    }
    return picked;
}

std::vector<std::size_t> select_by_period(const std::vector<ReturnCandidate>& cands, const Trajectory& traj,
                                          const std::vector<double>& tiers, std::size_t separation,
                                          std::size_t per_tier)
{
    std::vector<std::size_t> out;
    double lo = 0.0;
    for (double hi : tiers) {
        std::vector<ReturnCandidate> band;
        std::vector<std::size_t> where;
        for (std::size_t k = 0; k < cands.size(); ++k) {
            const double dur = traj.times.at(cands[k].j) - traj.times.at(cands[k].i);
            if (dur > lo && dur <= hi) {
                band.push_back(cands[k]);
                where.push_back(k);
            }
        }
        for (std::size_t b : distinct_candidates(band, separation, per_tier)) out.push_back(where[b]);
        lo = hi;
    }
    return out;
}

ClosureAttempt close_candidate(const PipelineSettings& s, const Trajectory& traj, const ReturnCandidate& cand)
{
    ClosureAttempt a;
    a.candidate = cand;
    if (!(cand.i < cand.j) || cand.j >= traj.size()) throw ConfigError("candidate outside the trajectory");
    const Trajectory segment = traj.slice(cand.i, cand.j);
    try {
        ClosingOptions co = s.closing;
        co.integrator.box = s.integrator.box;
        a.orbit = close_orbit(s.field, segment, co);
        a.closed = true;
        FitOptions fo = s.fit;
        fo.block_time = s.block_time;
        a.theta = fit_reparametrization(segment, a.orbit, fo);
        a.shadowing = validate_shadowing(segment, a.orbit, a.theta, s.shadow_eps, s.block_time);
        a.spectrum = periodic_spectrum(s.field, a.orbit, PoincareConfig::for_field(s.field, s.integrator), s.block_time);
    } catch (const ClosingError& e) {
        a.failure = std::string("closing: ") + e.what();
    } catch (const FitError& e) {
        a.failure = std::string("fit: ") + e.what();
    } catch (const NumericalError& e) {
        a.failure = std::string("numerical: ") + e.what();
    }
    return a;
}

}  // namespace lpflow
