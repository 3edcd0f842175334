#include "lpflow/pesin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "lpflow/errors.hpp"

namespace lpflow {

void PesinBlockParams::validate() const
{
    if (!(eta > 0.0)) throw ConfigError("Pesin block rate eta must be positive");
    if (!(C >= 1.0)) throw ConfigError("Pesin block constant C must be at least 1");
    if (horizon == 0) throw ConfigError("Pesin block horizon must be at least one block");
}

int stable_group_count(const LyapunovSpectrum& s)
{
    int g = 0;
    while (g < static_cast<int>(s.groups()) && s.values[static_cast<std::size_t>(g)] < -s.tolerance) ++g;
    return g;
}

namespace {

// Inequalities are decided on computed logarithms; exact-boundary cases
// (e.g. constant blocks with |A|E| = e^{-eta}) must not flip on rounding.
constexpr double kLogSlack = 1e-12;

struct ReliableBlocks {
    std::size_t lo = 0;  // first block index
    std::size_t hi = 0;  // one past the last block index
};

ReliableBlocks reliable_blocks(const CocycleSequence& c, const SplittingEstimate& split, int split_group)
{
    if (split_group <= 0 || split_group >= split.groups()) {
        throw ConfigError("stable/unstable split index out of range (needs both E^s and E^u)");
    }
    if (split.samples() < c.size() + 1) throw ConfigError("splitting does not cover the cocycle");
    const std::size_t lo = split.reliable_begin;
    const std::size_t end_sample = std::min(split.reliable_end, c.size() + 1);
    return {lo, end_sample > lo ? end_sample - 1 : lo};
}

double clearance_of(const CocycleSequence& c, std::size_t i, double C)
{
    const double dist = i < c.singularity_distances.size() ? c.singularity_distances[i]
                                                           : std::numeric_limits<double>::infinity();
    return dist - 1.0 / C;
}

}  // namespace

BlockTestResult pesin_block_test(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                                 const PesinBlockParams& p, std::size_t start)
{
    p.validate();
    const ReliableBlocks rb = reliable_blocks(c, split, split_group);
    if (start < rb.lo || start >= rb.hi) throw InsufficientDataError("Pesin block window shorter than one block");
    const std::size_t J = std::min(p.horizon, rb.hi - start);
    const int k = split.groups();

    BlockTestResult r;
    r.start = start;
    r.checked = J;
    r.stable_margin = std::numeric_limits<double>::infinity();
    r.unstable_margin = std::numeric_limits<double>::infinity();
    // extended precision keeps products of strongly contracting norms out of the subnormal range
    long double stable = 1.0L, unstable = 1.0L;
    for (std::size_t n = 1; n <= J; ++n) {
        const std::size_t i = start + n - 1;
        stable *= static_cast<long double>(operator_norm(c.blocks[i] * split.subspace(i, 0, split_group)));
        unstable *= static_cast<long double>(co_norm(c.blocks[i] * split.subspace(i, split_group, k)));
        const double bound = std::log(p.C) - static_cast<double>(n) * p.eta;
        r.stable_margin = std::min(r.stable_margin, bound - static_cast<double>(std::log(stable)));
        r.unstable_margin = std::min(r.unstable_margin, static_cast<double>(std::log(unstable)) + bound);
    }
    r.clearance = clearance_of(c, start, p.C);
    r.member = r.stable_margin >= -kLogSlack && r.unstable_margin >= -kLogSlack && r.clearance >= 0.0;
    return r;
}

std::vector<BlockTestResult> pesin_block_scan(const CocycleSequence& c, const SplittingEstimate& split,
                                              int split_group, const PesinBlockParams& p)
{
    p.validate();
    const ReliableBlocks rb = reliable_blocks(c, split, split_group);
    const int k = split.groups();
    std::vector<double> log_e(c.size(), 0.0), log_f(c.size(), 0.0);
    for (std::size_t i = rb.lo; i < rb.hi; ++i) {
        log_e[i] = std::log(operator_norm(c.blocks[i] * split.subspace(i, 0, split_group)));
        log_f[i] = std::log(co_norm(c.blocks[i] * split.subspace(i, split_group, k)));
    }
    std::vector<BlockTestResult> out;
    out.reserve(rb.hi - rb.lo);
    const double log_c = std::log(p.C);
    for (std::size_t s = rb.lo; s < rb.hi; ++s) {
        BlockTestResult r;
        r.start = s;
        r.checked = std::min(p.horizon, rb.hi - s);
        r.stable_margin = std::numeric_limits<double>::infinity();
        r.unstable_margin = std::numeric_limits<double>::infinity();
        double se = 0.0, sf = 0.0;
        for (std::size_t n = 1; n <= r.checked; ++n) {
            se += log_e[s + n - 1];
            sf += log_f[s + n - 1];
            const double bound = log_c - static_cast<double>(n) * p.eta;
            r.stable_margin = std::min(r.stable_margin, bound - se);
            r.unstable_margin = std::min(r.unstable_margin, sf + bound);
        }
        r.clearance = clearance_of(c, s, p.C);
        r.member = r.stable_margin >= -kLogSlack && r.unstable_margin >= -kLogSlack && r.clearance >= 0.0;
        out.push_back(r);
    }
    return out;
}

namespace {

std::size_t gap_blocks_for(const CocycleSequence& c, double T)
{
    if (!(T > 0.0)) throw ConfigError("quasi-hyperbolic gap T must be positive");
    const double ratio = T / c.step;
    const auto g = static_cast<std::size_t>(std::llround(ratio));
    if (g == 0 || std::abs(static_cast<double>(g) - ratio) > 1e-9 * ratio) {
        throw ConfigError("quasi-hyperbolic gap must be a whole number of cocycle blocks");
    }
    return g;
}

}  // namespace

std::vector<StringCertificate> quasi_hyperbolic_scan(const CocycleSequence& c, const SplittingEstimate& split,
                                                     int split_group, double eta, double T)
{
    if (!(eta > 0.0)) throw ConfigError("quasi-hyperbolic rate eta must be positive");
    const std::size_t g = gap_blocks_for(c, T);
    const ReliableBlocks rb = reliable_blocks(c, split, split_group);
    const int k = split.groups();
    std::vector<StringCertificate> out;
    if (rb.hi < rb.lo + 2 * g) return out;

    // gap maps starting at every reliable block index
    const std::size_t last_gap = rb.hi - g;  // inclusive
    std::vector<double> a(rb.hi, 0.0), b(rb.hi, 0.0);
    for (std::size_t p = rb.lo; p <= last_gap; ++p) {
        const Matrix m = cocycle_product(c, p, g);
        a[p] = std::log(operator_norm(m * split.subspace(p, 0, split_group)));
        b[p] = std::log(co_norm(m * split.subspace(p, split_group, k)));
    }
    const double step = eta * T;

    std::size_t covered = rb.lo;  // end block of the last emitted certificate
    for (std::size_t s = rb.lo; s + 2 * g <= rb.hi; ++s) {
        // prefix conditions (contraction and per-gap ratio) decide the longest candidate
        std::size_t kmax = 0;
        double sum_a = 0.0;
        while (true) {
            const std::size_t p = s + kmax * g;
            if (p > last_gap) break;
            if (sum_a > -step * static_cast<double>(kmax) + kLogSlack) break;
            if (a[p] - b[p] > -step + kLogSlack) break;
            sum_a += a[p];
            ++kmax;
        }
        if (kmax < 2) continue;
        // expansion tail: P_K >= max_{n<K} P_n with P_n = sum_{i<n} (b_i - eta T)
        std::size_t best = 0;
        double prefix = 0.0, running_max = 0.0;
        for (std::size_t K = 1; K <= kmax; ++K) {
            prefix += b[s + (K - 1) * g] - step;
            if (K >= 2 && prefix >= running_max - kLogSlack) best = K;
            running_max = std::max(running_max, prefix);
        }
        if (best < 2) continue;
        const std::size_t end = s + best * g;
        if (end <= covered) continue;
        covered = end;

        StringCertificate cert;
        cert.start = s;
        cert.gap_blocks = g;
        cert.eta = eta;
        for (std::size_t n = 0; n <= best; ++n) cert.times.push_back(static_cast<double>(n) * T);
        double ca = 0.0;
        for (std::size_t n = 0; n < best; ++n) {
            const std::size_t p = s + n * g;
            cert.stable_norms.push_back(std::exp(a[p]));
            cert.unstable_conorms.push_back(std::exp(b[p]));
            cert.contraction_margins.push_back(-eta * cert.times[n] - ca);
            cert.ratio_margins.push_back(-step - (a[p] - b[p]));
            ca += a[p];
        }
        double tail = 0.0;
        cert.expansion_margins.assign(best, 0.0);
        for (std::size_t n = best; n-- > 0;) {
            tail += b[s + n * g];
            cert.expansion_margins[n] = tail - eta * (cert.times[best] - cert.times[n]);
        }
        out.push_back(std::move(cert));
    }
    return out;
}

bool verify_certificate(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                        const StringCertificate& cert)
{
    const double slack = 1e-10;
    const std::size_t k = cert.gaps();
    if (k < 2 || cert.times.size() != k + 1 || cert.unstable_conorms.size() != k ||
        cert.contraction_margins.size() != k || cert.expansion_margins.size() != k || cert.ratio_margins.size() != k) {
        return false;
    }
    const double T = static_cast<double>(cert.gap_blocks) * c.step;
    if (cert.times.front() != 0.0) return false;
    for (std::size_t n = 0; n < k; ++n) {
        const double gap = cert.times[n + 1] - cert.times[n];
        if (!(gap > 0.0) || gap > T * (1.0 + 1e-12)) return false;
    }
    if (cert.end_block() > c.size() || cert.start < split.reliable_begin || cert.end_block() >= split.reliable_end) {
        return false;
    }

    std::vector<double> la(k), lb(k);
    for (std::size_t n = 0; n < k; ++n) {
        const std::size_t p = cert.start + n * cert.gap_blocks;
        Matrix m = c.blocks[p];
        for (std::size_t q = 1; q < cert.gap_blocks; ++q) m = c.blocks[p + q] * m;
        const Eigen::JacobiSVD<Matrix> se(m * split.subspace(p, 0, split_group));
        const Eigen::JacobiSVD<Matrix> sf(m * split.subspace(p, split_group, split.groups()));
        const double ne = se.singularValues()(0);
        const double mf = sf.singularValues()(sf.singularValues().size() - 1);
        if (std::abs(ne - cert.stable_norms[n]) > 1e-9 * ne) return false;
        if (std::abs(mf - cert.unstable_conorms[n]) > 1e-9 * mf) return false;
        la[n] = std::log(ne);
        lb[n] = std::log(mf);
    }
    const double eta = cert.eta;
    for (std::size_t n = 0; n < k; ++n) {
        double head = 0.0;
        for (std::size_t i = 0; i < n; ++i) head += la[i];
        double tail = 0.0;
        for (std::size_t i = n; i < k; ++i) tail += lb[i];
        const double dt = cert.times[n + 1] - cert.times[n];
        const double contraction = -eta * cert.times[n] - head;
        const double expansion = tail - eta * (cert.times[k] - cert.times[n]);
        const double ratio = -eta * dt - (la[n] - lb[n]);
        if (contraction < -slack || expansion < -slack || ratio < -slack) return false;
        if (std::abs(contraction - cert.contraction_margins[n]) > 1e-8 * (1.0 + std::abs(contraction))) return false;
        if (std::abs(expansion - cert.expansion_margins[n]) > 1e-8 * (1.0 + std::abs(expansion))) return false;
        if (std::abs(ratio - cert.ratio_margins[n]) > 1e-8 * (1.0 + std::abs(ratio))) return false;
    }
    return true;
}

namespace {

struct CellHash {
    std::size_t operator()(const std::vector<long long>& key) const
    {
        std::size_t h = 1469598103934665603ULL;
        for (long long v : key) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace

std::vector<ReturnCandidate> near_return_detect(const Trajectory& traj, const std::vector<std::size_t>& members,
                                                const NearReturnOptions& opts)
{
    if (!(opts.D_rel > 0.0)) throw ConfigError("near-return threshold D_rel must be positive");
    std::vector<std::size_t> idx = members;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (!idx.empty() && idx.back() >= traj.size()) throw ConfigError("block member index outside the trajectory");
    std::vector<ReturnCandidate> out;
    if (idx.size() < 2) return out;
    auto order = [](const ReturnCandidate& x, const ReturnCandidate& y) {
        if (x.rel_gap != y.rel_gap) return x.rel_gap < y.rel_gap;
        return x.i != y.i ? x.i < y.i : x.j < y.j;
    };
    // With a cap, keep a max-heap of the best candidates so memory stays bounded.
    auto keep = [&](const ReturnCandidate& c) {
        if (opts.max_candidates == 0) {
            out.push_back(c);
        } else if (out.size() < opts.max_candidates) {
            out.push_back(c);
            std::push_heap(out.begin(), out.end(), order);
        } else if (order(c, out.front())) {
            std::pop_heap(out.begin(), out.end(), order);
            out.back() = c;
            std::push_heap(out.begin(), out.end(), order);
        }
    };

    std::vector<double> speeds;
    speeds.reserve(idx.size());
    for (std::size_t i : idx) speeds.push_back(traj.field_norm(i));
    std::vector<double> sorted = speeds;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double cell = opts.D_rel * sorted[sorted.size() / 2];
    if (!(cell > 0.0)) return out;

    const int d = traj.dimension();
    auto key_of = [&](const Vector& x) {
        std::vector<long long> key(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a) key[static_cast<std::size_t>(a)] = static_cast<long long>(std::floor(x[a] / cell));
        return key;
    };
    std::unordered_map<std::vector<long long>, std::vector<std::size_t>, CellHash> grid;
    for (std::size_t m = 0; m < idx.size(); ++m) grid[key_of(traj.states[idx[m]])].push_back(m);

    for (std::size_t m = 0; m < idx.size(); ++m) {
        const std::size_t i = idx[m];
        const Vector& xi = traj.states[i];
        const double radius = opts.D_rel * speeds[m];
        const long long reach = static_cast<long long>(std::ceil(radius / cell));
        const std::vector<long long> base = key_of(xi);
        std::vector<long long> off(static_cast<std::size_t>(d), -reach);
        while (true) {
            std::vector<long long> key = base;
            for (int a = 0; a < d; ++a) key[static_cast<std::size_t>(a)] += off[static_cast<std::size_t>(a)];
            const auto it = grid.find(key);
            if (it != grid.end()) {
                for (std::size_t q : it->second) {
                    const std::size_t j = idx[q];
                    if (j <= i || j - i < opts.min_separation) continue;
                    if (opts.max_separation > 0 && j - i > opts.max_separation) continue;
                    const double dist = (traj.states[j] - xi).norm();
                    if (dist <= radius) keep({i, j, dist, dist / speeds[m]});
                }
            }
            int a = 0;
            while (a < d && off[static_cast<std::size_t>(a)] == reach) off[static_cast<std::size_t>(a++)] = -reach;
            if (a == d) break;
            ++off[static_cast<std::size_t>(a)];
        }
    }
    std::sort(out.begin(), out.end(), order);
    return out;
}

bool verify_candidate(const Trajectory& traj, const std::vector<std::size_t>& members,
                      const NearReturnOptions& opts, const ReturnCandidate& cand)
{
    if (!(cand.i < cand.j) || cand.j >= traj.size()) return false;
    if (cand.j - cand.i < opts.min_separation) return false;
    if (opts.max_separation > 0 && cand.j - cand.i > opts.max_separation) return false;
    const bool mi = std::find(members.begin(), members.end(), cand.i) != members.end();
    const bool mj = std::find(members.begin(), members.end(), cand.j) != members.end();
    if (!mi || !mj) return false;
    double sq = 0.0;
    for (int a = 0; a < traj.dimension(); ++a) {
        const double diff = traj.states[cand.j][a] - traj.states[cand.i][a];
        sq += diff * diff;
    }
    const double dist = std::sqrt(sq);
    const double speed = traj.field_norm(cand.i);
    if (std::abs(dist - cand.abs_gap) > 1e-12 * (1.0 + dist)) return false;
    if (std::abs(dist / speed - cand.rel_gap) > 1e-12 * (1.0 + cand.rel_gap)) return false;
    return dist <= opts.D_rel * speed;
}

}  // namespace lpflow
