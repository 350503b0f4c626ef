#pragma once
// Two-sided perturbation bounds for normal functionals, support compression, and the finite
// orthogonal extraction built on them.

#include "vnl1/algebra.hpp"
#include "vnl1/l1_geometry.hpp"
#include "vnl1/predual.hpp"

#include <array>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

namespace vnl1 {

struct BoundReport {
    std::string label;
    double      lhs   = 0;
    double      rhs   = 0;
    double      slack = 0; ///< rhs - lhs
    std::string digest;
};

// For positive omega and contractions a, b (g_a = | ||omega|| - omega(a) |, c = (2||omega||)^{1/2}):
//   ||a omega - omega||, ||omega a - omega|| <= c g_a^{1/2},  ||b omega a - omega|| <= c (g_a^{1/2} + g_b^{1/2}).
std::array<BoundReport, 3> bound_A4(const Functional &omega, const Element &a, const Element &b, double tol = -1);

// For any phi = u|phi| and contractions a, b:
//   ||phi - a|phi| ||  <= c | ||phi|| - phi*(a) |^{1/2}
//   || |phi| - a phi || <= c | ||phi|| - phi(a) |^{1/2}
//   ||b phi a - phi||   <= c ( | ||phi|| - |phi|(a) |^{1/2} + | ||phi|| - |phi*|(b) |^{1/2} )
std::array<BoundReport, 3> bound_A3(const Functional &phi, const Element &a, const Element &b, double tol = -1);

struct CompressResult {
    Functional  tau;
    BoundReport report; ///< ||sigma - tau|| against 5 beta^{1/2}
    double      beta       = 0;
    double      right_mass = 0; ///< |sigma|(r)
    double      left_mass  = 0; ///< |sigma*|(l)
};
// tau = l sigma r / ||l sigma r||; requires |sigma|(r), |sigma*|(l) >= 1 - beta.
CompressResult compress_normalize(const Functional &sigma, const Projection &l, const Projection &r, double beta, double tol = -1);

// delta_1 = eps and delta_{k+1} the largest 2^-m with delta_{k+1} + (32 k delta_{k+1})^{1/2} < delta_k.
// Entries are kept as base-2 logarithms since they leave the double range after a few steps.
struct DeltaSchedule {
    double              epsilon = 0;
    std::vector<double> log2_values;

    [[nodiscard]] std::size_t         size() const { return log2_values.size(); }
    [[nodiscard]] double              value(std::size_t k) const; ///< 1-based; underflows to 0 when tiny
    [[nodiscard]] std::vector<double> values() const;
    // Checks every consecutive pair in the log domain.
    [[nodiscard]] bool replay() const;
};
DeltaSchedule delta_schedule(int n, double eps);

struct ExtractionOptions {
    double   delta_start = -1;    ///< first spectral cut; default min(eps, 1/2)/n
    double   delta_floor = 1e-12;
    double   gate_delta  = -1;    ///< reject if 1 - (measured span constant) exceeds this; default eps
    L1Budget budget;
};

struct SearchLogEntry {
    double delta        = 0;
    double max_distance = 0;
    double min_mass     = 0; ///< smallest p_k(|t phi_k s|) / ||t phi_k s||
    double eta          = 0.5;
    bool   orthogonal   = false;
    bool   accepted     = false;
};

struct ExtractionResult {
    std::vector<std::size_t>    indices; ///< 1-based
    std::vector<Projection>     left;    ///< q_k <= t
    std::vector<Projection>     right;   ///< p_k <= s
    std::vector<Functional>     outputs; ///< psi_k = q_k phi_k p_k / ||q_k phi_k p_k||
    std::vector<double>         distances;
    std::vector<SearchLogEntry> log;
    double                      epsilon                = 0;
    double                      measured_span_constant = 0;
    double                      theory_delta_log2      = 0;
    bool                        theory_gate_met        = false; ///< 1 - measured constant below delta(n, eps)
    bool                        certified              = false;
    std::string                 diagnostic;
};

// Pairwise orthogonal p_k <= s, q_k <= t from the positive-case splitting applied to |t phi_k s|
// and |s phi_k* t|; every output is re-verified before return.
ExtractionResult finite_orthogonal_extraction(std::span<const Functional> phis, const Projection &s, const Projection &t, double eps,
                                              const ExtractionOptions &opt = {});

// Pairwise orthogonal projections p_k <= e with p_k capturing the k-th positive density, via
// repeated sign splits of mean(F_1..F_{m-1}) - F_m cut at delta * ||.||.
std::vector<Projection> positive_split(std::vector<Element> densities, const Projection &e, double delta);

struct WitnessOptions {
    std::size_t count      = 4;
    std::size_t max_blocks = 8;
    L1Budget    budget;
    double      tol = 1e-9;
};

struct WitnessResult {
    std::vector<std::size_t> indices; ///< 1-based m_n
    std::vector<Element>     a;
    std::vector<Element>     b;
    std::vector<double>      attained_a; ///< |phi_{m_n}|(a_n)
    std::vector<double>      attained_b; ///< |phi*_{m_n}|(b_n)
    double                   threshold   = 0;
    double                   measured_r  = 0;
    bool                     selfadjoint = false;
    bool                     certified   = false;
    std::string              diagnostic;
};

WitnessResult positive_witnesses(std::span<const Functional> phis, double r, double eps, bool selfadjoint_mode, const WitnessOptions &opt = {});

nlohmann::json report_to_json(const BoundReport &r);
nlohmann::json delta_schedule_to_json(const DeltaSchedule &d);
nlohmann::json extraction_to_json(const ExtractionResult &e);
nlohmann::json witnesses_to_json(const WitnessResult &w);

} // namespace vnl1
