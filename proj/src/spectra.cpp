#include "lpflow/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <type_traits>

#include "lpflow/errors.hpp"

namespace lpflow {

double operator_norm(const Matrix& a)
{
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

double co_norm(const Matrix& a)
{
    if (a.size() == 0) return 0.0;
    const auto sv = Eigen::JacobiSVD<Matrix>(a).singularValues();
    return sv(sv.size() - 1);
}

void CocycleSequence::validate() const
{
    if (!(step > 0.0)) throw ConfigError("cocycle step must be positive");
    if (blocks.empty()) return;
    const Eigen::Index m = blocks.front().rows();
    for (const auto& b : blocks) {
        if (b.rows() != m || b.cols() != m) throw ConfigError("cocycle blocks must be square and equal-sized");
        if (!b.allFinite()) throw NumericalError("non-finite cocycle block");
        const auto sv = Eigen::JacobiSVD<Matrix>(b).singularValues();
        if (!(sv(m - 1) > 0.0) || !std::isfinite(sv(0) / sv(m - 1))) {
            throw NumericalError("singular cocycle block");
        }
    }
}

CocycleSequence CocycleSequence::constant(const Matrix& a, double step, std::size_t n)
{
    CocycleSequence c;
    c.step = step;
    c.blocks.assign(n, a);
    return c;
}

namespace {

void push_point(CocycleSequence& c, const VectorField& f, const NormalFrame& frame)
{
    c.points.push_back(frame.base);
    c.speeds.push_back(frame.field.norm());
    c.singularity_distances.push_back(f.singularity_distance(frame.base));
    c.frames.push_back(frame);
}

}  // namespace

CocycleSequence build_cocycle(const VectorField& f, const Vector& x0, double T, std::size_t n,
                              const PoincareConfig& cfg, bool scaled)
{
    if (!(T > 0.0)) throw ConfigError("cocycle block time must be positive");
    CocycleSequence c;
    c.step = T;
    NormalFrame frame = NormalFrame::at(f, x0);
    push_point(c, f, frame);
    for (std::size_t i = 0; i < n; ++i) {
        const FramedTangent ft = transport_along(f, frame, T, cfg);
        c.blocks.push_back(scaled ? ft.scaled_lpf() : ft.lpf());
        frame = ft.end_frame;
        push_point(c, f, frame);
    }
    return c;
}

CocycleSequence build_cocycle_along(const VectorField& f, const Trajectory& traj, std::size_t stride,
                                    const PoincareConfig& cfg, bool scaled)
{
    if (stride == 0) throw ConfigError("cocycle stride must be positive");
    if (traj.size() < stride + 1) throw InsufficientDataError("trajectory shorter than one cocycle block");
    const std::size_t n = (traj.size() - 1) / stride;
    const double T = traj.times[stride] - traj.times[0];
    CocycleSequence c;
    c.step = T;
    NormalFrame frame = NormalFrame::at(f, traj.states[0]);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = i * stride;
        const double Ti = traj.times[s + stride] - traj.times[s];
        if (std::abs(Ti - T) > 1e-9 * std::max(1.0, T)) {
            throw ConfigError("trajectory samples are not uniformly spaced in time");
        }
        if (i > 0) frame = frame.transported_to(traj.states[s], traj.velocities[s]);
        push_point(c, f, frame);
        const FramedTangent ft = transport_along(f, frame, T, cfg);
        c.blocks.push_back(scaled ? ft.scaled_lpf() : ft.lpf());
        frame = ft.end_frame;
    }
    // last point is the stored sample; the frame is the transported output frame
    c.points.push_back(traj.states[n * stride]);
    c.speeds.push_back(traj.velocities[n * stride].norm());
    c.singularity_distances.push_back(f.singularity_distance(traj.states[n * stride]));
    c.frames.push_back(frame);
    return c;
}

Matrix cocycle_product(const CocycleSequence& c, std::size_t first, std::size_t count)
{
    if (first + count > c.size()) throw ConfigError("cocycle product range out of bounds");
    Matrix p = Matrix::Identity(c.dim(), c.dim());
    for (std::size_t i = first; i < first + count; ++i) p = c.blocks[i] * p;
    return p;
}

LyapunovSpectrum LyapunovSpectrum::from_exponents(std::vector<double> exponents, std::vector<double> std_errors,
                                                  double min_tol)
{
    const std::size_t m = exponents.size();
    if (std_errors.empty()) std_errors.assign(m, 0.0);
    if (std_errors.size() != m) throw ConfigError("standard errors and exponents differ in length");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return exponents[a] < exponents[b]; });
    LyapunovSpectrum s;
    for (std::size_t i : order) {
        s.exponents.push_back(exponents[i]);
        s.std_errors.push_back(std_errors[i]);
    }
    const double max_se = m ? *std::max_element(s.std_errors.begin(), s.std_errors.end()) : 0.0;
    s.tolerance = std::max(min_tol, 5.0 * max_se);

    std::size_t begin = 0;
    for (std::size_t i = 1; i <= m; ++i) {
        bool split = i == m;
        if (!split) {
            const double tol = std::max(min_tol, 5.0 * std::max(s.std_errors[i - 1], s.std_errors[i]));
            split = s.exponents[i] - s.exponents[i - 1] >= tol;
        }
        if (split) {
            double sum = 0.0;
            for (std::size_t k = begin; k < i; ++k) sum += s.exponents[k];
            s.values.push_back(sum / static_cast<double>(i - begin));
            s.multiplicities.push_back(static_cast<int>(i - begin));
            begin = i;
        }
    }
    s.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t g = 1; g < s.values.size(); ++g) s.min_gap = std::min(s.min_gap, s.values[g] - s.values[g - 1]);
    return s;
}

namespace {

double batch_standard_error(const std::vector<double>& xs)
{
    const std::size_t n = xs.size();
    if (n < 4) return 0.0;
    const std::size_t batches = std::min<std::size_t>(20, n / 2);
    const std::size_t len = n / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t k = 0; k < len; ++k) means[b] += xs[b * len + k];
        means[b] /= static_cast<double>(len);
    }
    const double mu = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
    double var = 0.0;
    for (double v : means) var += (v - mu) * (v - mu);
    var /= static_cast<double>(batches - 1);
    return std::sqrt(var / static_cast<double>(batches));
}

}  // namespace

LyapunovSpectrum benettin_spectrum(const CocycleSequence& c, const BenettinOptions& opts)
{
    const std::size_t n = c.size();
    if (n == 0) throw InsufficientDataError("benettin_spectrum needs at least one block");
    const int m = c.dim();
    std::size_t burn = 0;
    if (opts.burn_in < 0) {
        burn = n >= 50 ? n / 10 : 0;
    } else {
        burn = std::min<std::size_t>(static_cast<std::size_t>(opts.burn_in), n - 1);
    }

    Matrix q = Matrix::Identity(m, m);
    Matrix w(m, m);
    std::vector<std::vector<double>> incr(static_cast<std::size_t>(m));
    for (auto& v : incr) v.reserve(n - burn);
    for (std::size_t i = 0; i < n; ++i) {
        w.noalias() = c.blocks[i] * q;
        Eigen::HouseholderQR<Matrix> qr(w);
        q = qr.householderQ();
        const Matrix& r = qr.matrixQR();
        for (int j = 0; j < m; ++j) {
            const double d = std::abs(r(j, j));
            if (!(d > 0.0) || !std::isfinite(d)) throw NumericalError("non-finite R diagonal in QR iteration");
            if (i >= burn) incr[static_cast<std::size_t>(j)].push_back(std::log(d) / c.step);
        }
    }
    std::vector<double> ex(static_cast<std::size_t>(m)), se(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j) {
        ex[j] = std::accumulate(incr[j].begin(), incr[j].end(), 0.0) / static_cast<double>(incr[j].size());
        se[j] = batch_standard_error(incr[j]);
    }
    return LyapunovSpectrum::from_exponents(std::move(ex), std::move(se), opts.min_tolerance);
}

int SplittingEstimate::ambient_dim() const { return std::accumulate(dims.begin(), dims.end(), 0); }

Matrix SplittingEstimate::subspace(std::size_t sample, int g_begin, int g_end) const
{
    if (sample >= bases.size() || g_begin < 0 || g_end > groups() || g_begin >= g_end) {
        throw ConfigError("splitting subspace request out of range");
    }
    int cols = 0;
    for (int g = g_begin; g < g_end; ++g) cols += dims[static_cast<std::size_t>(g)];
    Matrix b(ambient_dim(), cols);
    int at = 0;
    for (int g = g_begin; g < g_end; ++g) {
        const Matrix& e = bases[sample][static_cast<std::size_t>(g)];
        b.middleCols(at, e.cols()) = e;
        at += static_cast<int>(e.cols());
    }
    if (g_end - g_begin == 1) return b;
    Eigen::HouseholderQR<Matrix> qr(b);
    return qr.householderQ() * Matrix::Identity(b.rows(), cols);
}

Matrix SplittingEstimate::adapted_basis(std::size_t sample) const
{
    Matrix b(ambient_dim(), ambient_dim());
    int at = 0;
    for (const Matrix& e : bases.at(sample)) {
        b.middleCols(at, e.cols()) = e;
        at += static_cast<int>(e.cols());
    }
    return b;
}

SplittingEstimate SplittingEstimate::uniform(std::size_t samples, const std::vector<Matrix>& group_bases)
{
    SplittingEstimate s;
    for (const Matrix& b : group_bases) s.dims.push_back(static_cast<int>(b.cols()));
    s.bases.assign(samples, group_bases);
    s.reliable_begin = 0;
    s.reliable_end = samples;
    return s;
}

namespace {

Matrix generic_orthonormal(int m)
{
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal;
    Matrix g(m, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ();
}

Matrix thin_q(const Matrix& a)
{
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

}  // namespace

SplittingEstimate oseledec_filtration(const CocycleSequence& c, const FiltrationOptions& opts)
{
    return oseledec_filtration(c, benettin_spectrum(c), opts);
}

SplittingEstimate oseledec_filtration(const CocycleSequence& c, const LyapunovSpectrum& spectrum,
                                      const FiltrationOptions& opts)
{
    const std::size_t n = c.size();
    if (n == 0) throw InsufficientDataError("oseledec_filtration needs at least one block");
    const int m = c.dim();
    if (static_cast<int>(spectrum.size()) != m) throw ConfigError("spectrum size does not match cocycle dimension");
    if (spectrum.groups() > 1 && !(spectrum.min_gap > spectrum.tolerance)) {
        throw DegenerateError("spectral gap not resolved above the grouping tolerance");
    }
    const std::size_t window = std::max<std::size_t>(1, std::min(opts.window, std::max<std::size_t>(1, n / 2)));
    const Matrix start = generic_orthonormal(m);

    SplittingEstimate out;
    out.dims = spectrum.multiplicities;
    const int k = out.groups();
    std::vector<int> offset(static_cast<std::size_t>(k) + 1, 0);
    for (int g = 0; g < k; ++g) offset[static_cast<std::size_t>(g) + 1] = offset[static_cast<std::size_t>(g)] + out.dims[static_cast<std::size_t>(g)];

    out.bases.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const std::size_t p = std::min(j, window);
        const std::size_t q = std::min(n - j, window);
        // fast filtration from the past: leading columns span the fastest directions
        Matrix qpast = start;
        for (std::size_t i = j - p; i < j; ++i) {
            Eigen::HouseholderQR<Matrix> qr(c.blocks[i] * qpast);
            qpast = qr.householderQ();
        }
        // slow filtration from the future: trailing columns of the transposed iteration
        Matrix qfut = start;
        for (std::size_t i = j + q; i-- > j;) {
            Eigen::HouseholderQR<Matrix> qr(c.blocks[i].transpose() * qfut);
            qfut = qr.householderQ();
        }
        const Matrix& uperp_src = p > 0 ? qpast : qfut;
        const Matrix& slow_src = q > 0 ? qfut : qpast;

        out.bases[j].resize(static_cast<std::size_t>(k));
        for (int g = 0; g < k; ++g) {
            const int dg = out.dims[static_cast<std::size_t>(g)];
            const int below = offset[static_cast<std::size_t>(g)];
            const Matrix slow = slow_src.rightCols(below + dg);
            if (below == 0) {
                out.bases[j][static_cast<std::size_t>(g)] = slow;
                continue;
            }
            const Matrix uperp = uperp_src.rightCols(below);
            Eigen::JacobiSVD<Matrix> svd(uperp.transpose() * slow, Eigen::ComputeFullV);
            const Matrix coeff = svd.matrixV().rightCols(dg);
            out.bases[j][static_cast<std::size_t>(g)] = thin_q(slow * coeff);
        }
    }
    if (n + 1 > 2 * window) {
        out.reliable_begin = window;
        out.reliable_end = n + 1 - window;
    } else {
        out.reliable_begin = 0;
        out.reliable_end = n + 1;
    }
    out.equivariance_residual = equivariance_residual(c, out, out.reliable_begin, out.reliable_end);
    return out;
}

double equivariance_residual(const CocycleSequence& c, const SplittingEstimate& split, std::size_t first,
                             std::size_t last)
{
    double worst = 0.0;
    for (std::size_t j = first; j < last && j < c.size() && j + 1 < split.samples(); ++j) {
        for (int g = 0; g < split.groups(); ++g) {
            const Matrix img = thin_q(c.blocks[j] * split.bases[j][static_cast<std::size_t>(g)]);
            const Matrix& next = split.bases[j + 1][static_cast<std::size_t>(g)];
            const Matrix resid = img - next * (next.transpose() * img);
            worst = std::max(worst, operator_norm(resid));
        }
    }
    return worst;
}

namespace {

// log-scaled product of blocks restricted to a subspace family:
// R_i = B_{i+1}^T A_i B_i with orthonormal bases B_i of the subspace at sample i.
// Projecting at every step keeps rounding errors from being amplified by the
// complementary directions (pushing an estimated E forward would otherwise
// pick up the expanding F component at machine precision).
class RestrictedProduct {
public:
    explicit RestrictedProduct(Eigen::Index dim) : p_(Matrix::Identity(dim, dim)) {}

    void apply(const Matrix& a, const Matrix& from, const Matrix& to)
    {
        p_ = (to.transpose() * a * from) * p_;
        const double s = p_.norm();
        if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("restricted product degenerated");
        p_ /= s;
        log_scale_ += std::log(s);
    }

    double log_norm() const { return log_scale_ + std::log(operator_norm(p_)); }
    double log_conorm() const { return log_scale_ + std::log(co_norm(p_)); }

private:
    Matrix p_;
    double log_scale_ = 0.0;
};

}  // namespace

DominationReport check_domination(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                                  const DominationOptions& opts)
{
    const std::size_t n = c.size();
    const int k = split.groups();
    if (split_group <= 0 || split_group >= k) throw ConfigError("domination split index out of range");
    if (split.samples() < n + 1) throw ConfigError("splitting does not cover the cocycle");
    // only samples where the splitting estimate is reliable take part
    const std::size_t lo = split.reliable_begin;
    const std::size_t hi = std::min(split.reliable_end, n + 1);
    const std::size_t window = hi > lo ? std::min(opts.max_window, hi - lo - 1) : 0;
    if (window == 0) throw InsufficientDataError("domination check needs at least one block");

    // |psi_{-t}|F(phi_t x)| = 1 / m(psi_t|F(x)) for an invariant F; the forward
    // co-norm is used because F attracts under forward iteration while
    // backward iteration amplifies any error in the estimated F.
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> le(n + 1, std::vector<double>(window + 1, ninf));
    std::vector<std::vector<double>> lf(n + 1, std::vector<double>(window + 1, ninf));
    std::vector<Matrix> e_basis(hi), f_basis(hi);
    for (std::size_t i = lo; i < hi; ++i) {
        e_basis[i] = split.subspace(i, 0, split_group);
        f_basis[i] = split.subspace(i, split_group, k);
    }
    for (std::size_t i = lo; i + 1 < hi; ++i) {
        RestrictedProduct e_img(e_basis[i].cols());
        RestrictedProduct f_img(f_basis[i].cols());
        for (std::size_t j = 1; j <= window && i + j < hi; ++j) {
            const std::size_t b = i + j - 1;
            e_img.apply(c.blocks[b], e_basis[b], e_basis[b + 1]);
            f_img.apply(c.blocks[b], f_basis[b], f_basis[b + 1]);
            le[i][j] = e_img.log_norm();
            lf[i][j] = -f_img.log_conorm();
        }
    }

    DominationReport rep;
    for (std::size_t j = 1; j <= window; ++j) {
        double worst = ninf;
        for (std::size_t i = lo; i + j < hi; ++i) worst = std::max(worst, le[i][j] + lf[i][j]);
        rep.window_times.push_back(static_cast<double>(j) * c.step);
        rep.worst_log_ratio.push_back(worst);
    }

    const std::size_t J = rep.window_times.size();
    double slope = 0.0;
    if (J == 1) {
        slope = rep.worst_log_ratio[0] / rep.window_times[0];
    } else {
        const double tm = std::accumulate(rep.window_times.begin(), rep.window_times.end(), 0.0) / J;
        const double ym = std::accumulate(rep.worst_log_ratio.begin(), rep.worst_log_ratio.end(), 0.0) / J;
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            sxy += (rep.window_times[j] - tm) * (rep.worst_log_ratio[j] - ym);
            sxx += (rep.window_times[j] - tm) * (rep.window_times[j] - tm);
        }
        slope = sxy / sxx;
    }
    rep.lambda = -slope;
    double logc = 0.0;
    for (std::size_t j = 0; j < J; ++j) logc = std::max(logc, rep.worst_log_ratio[j] + rep.lambda * rep.window_times[j]);
    rep.constant = std::exp(logc);
    if (J >= 2) {
        const std::size_t mid = (J - 1) / 2;
        rep.tail_rate = -(rep.worst_log_ratio[J - 1] - rep.worst_log_ratio[mid]) /
                        (rep.window_times[J - 1] - rep.window_times[mid]);
    } else {
        rep.tail_rate = rep.lambda;
    }
    rep.satisfied = rep.lambda > 1e-8 && rep.tail_rate >= (1.0 - opts.slack) * rep.lambda;
    return rep;
}

void ConeParams::validate() const
{
    if (!(rho > 1.0)) throw ConfigError("cone aperture rho must exceed 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("cone gamma must lie in (0, 1)");
    if (!(gamma * rho > 1.0)) throw ConfigError("cone parameters need gamma * rho > 1");
}

bool check_cone_invariance(const CocycleSequence& c, const SplittingEstimate& split, const ConeParams& cone,
                           int samples_per_block, std::uint64_t seed)
{
    cone.validate();
    const int k = split.groups();
    if (k < 2) throw ConfigError("cone test needs at least two splitting groups");
    if (split.samples() < c.size() + 1) throw ConfigError("splitting does not cover the cocycle");
    const int top = k - 1;
    std::vector<int> offset(static_cast<std::size_t>(k) + 1, 0);
    for (int g = 0; g < k; ++g) offset[static_cast<std::size_t>(g) + 1] = offset[static_cast<std::size_t>(g)] + split.dims[static_cast<std::size_t>(g)];

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, top - 1);
    auto random_unit = [&](int dim) {
        Vector u(dim);
        for (int i = 0; i < dim; ++i) u[i] = normal(rng);
        return Vector(u / u.norm());
    };
    auto block_norm = [&](const Vector& coords, int g) {
        return coords.segment(offset[static_cast<std::size_t>(g)], split.dims[static_cast<std::size_t>(g)]).norm();
    };

    const double wide = cone.gamma * cone.rho;
    const std::size_t last = std::min(c.size(), split.reliable_end == 0 ? 0 : split.reliable_end - 1);
    if (split.reliable_begin >= last) throw InsufficientDataError("no block inside the reliable range of the splitting");
    for (std::size_t i = split.reliable_begin; i < last; ++i) {
        const Matrix b_in = split.adapted_basis(i);
        const auto lu_out = split.adapted_basis(i + 1).partialPivLu();
        for (int s = 0; s < samples_per_block; ++s) {
            Vector coords = Vector::Zero(b_in.cols());
            const int lead = pick(rng);
            for (int g = 0; g < top; ++g) {
                const double scale = g == lead ? 1.0 : unif(rng);
                coords.segment(offset[static_cast<std::size_t>(g)], split.dims[static_cast<std::size_t>(g)]) =
                    scale * random_unit(split.dims[static_cast<std::size_t>(g)]);
            }
            coords.segment(offset[static_cast<std::size_t>(top)], split.dims[static_cast<std::size_t>(top)]) =
                wide * random_unit(split.dims[static_cast<std::size_t>(top)]);
            const Vector image = lu_out.solve(c.blocks[i] * (b_in * coords));
            double others = 0.0;
            for (int g = 0; g < top; ++g) others = std::max(others, block_norm(image, g));
            if (block_norm(image, top) < cone.rho * others * (1.0 - 1e-12)) return false;
        }
    }
    return true;
}

std::optional<ConeParams> search_invariant_cone(const CocycleSequence& c, const SplittingEstimate& split,
                                                int samples_per_block, std::uint64_t seed)
{
    for (double rho : {1.5, 2.0, 4.0, 8.0, 16.0, 64.0}) {
        for (double gamma : {0.9, 0.75, 0.5, 0.25}) {
            if (!(gamma * rho > 1.0)) continue;
            const ConeParams cone{rho, gamma};
            if (check_cone_invariance(c, split, cone, samples_per_block, seed)) return cone;
        }
    }
    return std::nullopt;
}

CocycleSequence coarsen(const CocycleSequence& c, std::size_t factor)
{
    if (factor == 0) throw ConfigError("coarsening factor must be positive");
    CocycleSequence out;
    out.step = c.step * static_cast<double>(factor);
    const std::size_t n = c.size() / factor;
    for (std::size_t i = 0; i < n; ++i) out.blocks.push_back(cocycle_product(c, i * factor, factor));
    auto every = [&](const auto& v) {
        std::decay_t<decltype(v)> w;
        if (v.size() == c.size() + 1)
            for (std::size_t i = 0; i <= n; ++i) w.push_back(v[i * factor]);
        return w;
    };
    out.points = every(c.points);
    out.speeds = every(c.speeds);
    out.singularity_distances = every(c.singularity_distances);
    out.frames = every(c.frames);
    return out;
}

SplittingEstimate coarsen(const SplittingEstimate& split, std::size_t factor)
{
    if (factor == 0) throw ConfigError("coarsening factor must be positive");
    SplittingEstimate out;
    out.dims = split.dims;
    for (std::size_t j = 0; j < split.samples(); j += factor) out.bases.push_back(split.bases[j]);
    out.reliable_begin = (split.reliable_begin + factor - 1) / factor;
    out.reliable_end = split.reliable_end == 0 ? 0 : (split.reliable_end - 1) / factor + 1;
    out.equivariance_residual = split.equivariance_residual;
    return out;
}

std::size_t cone_block_multiple(const DominationReport& d, double step)
{
    if (!d.satisfied || !(d.lambda > 0.0)) throw DegenerateError("splitting is not dominated");
    const double t = std::log(4.0 * d.constant) / d.lambda;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / step - 1e-9)));
}

namespace {

std::vector<std::vector<int>> combinations(int m, int n)
{
    std::vector<std::vector<int>> out;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        out.push_back(idx);
        int i = n - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - n + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j) - 1] + 1;
    }
    return out;
}

}  // namespace

Matrix exterior_power(const Matrix& a, int n)
{
    const int m = static_cast<int>(a.rows());
    if (a.cols() != m) throw ConfigError("exterior_power needs a square matrix");
    if (n < 1 || n > m) throw ConfigError("exterior power degree out of range");
    const auto sets = combinations(m, n);
    const Eigen::Index size = static_cast<Eigen::Index>(sets.size());
    Matrix out(size, size);
    Matrix sub(n, n);
    for (Eigen::Index r = 0; r < size; ++r) {
        for (Eigen::Index s = 0; s < size; ++s) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    sub(i, j) = a(sets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)],
                                  sets[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)]);
                }
            }
            out(r, s) = sub.determinant();
        }
    }
    return out;
}

CocycleSequence exterior_cocycle(const CocycleSequence& c, int n)
{
    CocycleSequence out;
    out.step = c.step;
    out.blocks.reserve(c.size());
    for (const auto& b : c.blocks) out.blocks.push_back(exterior_power(b, n));
    return out;
}

LyapunovSpectrum exterior_spectrum(const CocycleSequence& c, int n, const BenettinOptions& opts)
{
    return benettin_spectrum(exterior_cocycle(c, n), opts);
}

LyapunovSpectrum time_reversal_spectrum(const LyapunovSpectrum& s)
{
    LyapunovSpectrum r;
    r.exponents.assign(s.exponents.rbegin(), s.exponents.rend());
    for (double& v : r.exponents) v = -v;
    r.std_errors.assign(s.std_errors.rbegin(), s.std_errors.rend());
    r.values.assign(s.values.rbegin(), s.values.rend());
    for (double& v : r.values) v = -v;
    r.multiplicities.assign(s.multiplicities.rbegin(), s.multiplicities.rend());
    r.min_gap = s.min_gap;
    r.tolerance = s.tolerance;
    return r;
}

CocycleSequence reversed_inverse_cocycle(const CocycleSequence& c)
{
    CocycleSequence out;
    out.step = c.step;
    out.blocks.reserve(c.size());
    for (auto it = c.blocks.rbegin(); it != c.blocks.rend(); ++it) out.blocks.push_back(it->partialPivLu().inverse());
    return out;
}

int index_of(const LyapunovSpectrum& s)
{
    int ind = 0;
    for (std::size_t g = 0; g < s.values.size(); ++g) {
        if (s.values[g] < -s.tolerance) ind += s.multiplicities[g];
    }
    return ind;
}

double perturbation_margin(const Matrix& a, double eps1)
{
    if (!(eps1 > 0.0)) throw ConfigError("perturbation margin needs eps1 > 0");
    const auto sv = Eigen::JacobiSVD<Matrix>(a).singularValues();
    const double big = sv(0), small = sv(sv.size() - 1);
    if (!(small > 0.0) || !std::isfinite(big / small)) throw NumericalError("perturbation margin of a singular map");
    return (small / big) * (1.0 - std::exp(-eps1));
}

}  // namespace lpflow
