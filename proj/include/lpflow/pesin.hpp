#pragma once

#include <cstddef>
#include <vector>

#include "lpflow/flow.hpp"
#include "lpflow/spectra.hpp"

namespace lpflow {

/// Finite-horizon Pesin block Lambda^T_eta(C): for J = 1..horizon,
///   prod_{i<J} |psi*_T|E^s(x_i)| <= C e^{-J eta},
///   prod_{i<J} m(psi*_T|E^u(x_i)) >= C^{-1} e^{J eta},
/// and d(x, Sing) >= 1/C. The block time T is the cocycle step and eta is a
/// rate per block.
struct PesinBlockParams {
    double eta = 0.5;
    double C = 10.0;
    std::size_t horizon = 20;

    void validate() const;
};

struct BlockTestResult {
    bool member = false;
    std::size_t start = 0;
    std::size_t checked = 0;           // J values inspected
    double stable_margin = 0.0;        // min_J (log C - J eta - log prod |.|E^s|)
    double unstable_margin = 0.0;      // min_J (log prod m(.|E^u) - J eta + log C)
    double clearance = 0.0;            // d(x, Sing) - 1/C
};

/// Number of groups with negative value: E^s = groups [0, s), E^u = groups [s, k).
int stable_group_count(const LyapunovSpectrum& s);

/// Direct evaluation at one block index. Needs start + 1 <= reliable_end - 1,
/// i.e. at least one block inside the reliable range of the splitting.
BlockTestResult pesin_block_test(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                                 const PesinBlockParams& p, std::size_t start);

/// Block test at every block index of the reliable range, from cached per-block
/// restricted norms. Windows shorter than the horizon near the end of the data
/// are checked up to the available length.
std::vector<BlockTestResult> pesin_block_scan(const CocycleSequence& c, const SplittingEstimate& split,
                                              int split_group, const PesinBlockParams& p);

/// An (eta, T) quasi-hyperbolic string with uniform gaps of `gap_blocks` blocks.
struct StringCertificate {
    std::size_t start = 0;       // block index of t_0
    std::size_t gap_blocks = 1;  // blocks per partition gap
    double eta = 0.0;            // rate per unit time
    std::vector<double> times;   // t_0 = 0 < t_1 < ... < t_k
    std::vector<double> stable_norms;    // |psi*_{gap}|E(x_{t_i})|, i < k
    std::vector<double> unstable_conorms;  // m(psi*_{gap}|F(x_{t_i})), i < k
    std::vector<double> contraction_margins;  // -eta t_n - sum_{i<n} log|.|E|, n < k
    std::vector<double> expansion_margins;    // sum_{i=n}^{k-1} log m(.|F) - eta (t_k - t_n), n < k
    std::vector<double> ratio_margins;        // -eta gap - log(|.|E| / m(.|F)), n < k

    std::size_t gaps() const { return stable_norms.size(); }
    std::size_t end_block() const { return start + gaps() * gap_blocks; }
    double duration() const { return times.back(); }
};

/// Greedy scan: for each start, extend while the contraction and per-gap ratio
/// inequalities hold, then take the longest prefix whose expansion tail also
/// holds. Certificates contained in an earlier one are dropped. Gap length is
/// T (a whole multiple of the cocycle step), eta is per unit time.
std::vector<StringCertificate> quasi_hyperbolic_scan(const CocycleSequence& c, const SplittingEstimate& split,
                                                     int split_group, double eta, double T);

/// Recomputes all gap maps and inequalities from the cocycle. True iff the
/// certificate's stored data and all three inequality families check out.
bool verify_certificate(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                        const StringCertificate& cert);

struct ReturnCandidate {
    std::size_t i = 0;  // trajectory sample indices, i < j
    std::size_t j = 0;
    double abs_gap = 0.0;
    double rel_gap = 0.0;  // abs_gap / |X(x_i)|
};

struct NearReturnOptions {
    double D_rel = 0.05;
    std::size_t min_separation = 3;  // samples
    std::size_t max_separation = 0;  // samples, 0 = unlimited
    std::size_t max_candidates = 0;  // 0 keeps all; otherwise the best ones by relative gap
};

/// Pairs of member samples with |x_i - x_j| <= D_rel |X(x_i)| and min_separation <= j - i <= max_separation,
/// found through a grid hash with cell size D_rel * median|X|; sorted by relative gap.
std::vector<ReturnCandidate> near_return_detect(const Trajectory& traj, const std::vector<std::size_t>& members,
                                                const NearReturnOptions& opts);

bool verify_candidate(const Trajectory& traj, const std::vector<std::size_t>& members,
                      const NearReturnOptions& opts, const ReturnCandidate& cand);

}  // namespace lpflow
