#pragma once
// Orthogonal perturbations of sequence prefixes: the tau-null construction, the finite-depth
// induction for almost isometric l1 families, and a descriptive probe of prefixes.

#include "vnl1/algebra.hpp"
#include "vnl1/l1_geometry.hpp"
#include "vnl1/predual.hpp"
#include "vnl1/sequence.hpp"

#include <iosfwd>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

namespace vnl1 {

struct StageRecord {
    std::string stage; ///< "right-pass", "adjoint-pass", "select", "recompress"
    std::size_t l     = 0;
    std::size_t index = 0; ///< 1-based index in the input prefix
    double      bound    = 0;
    double      measured = 0;
    std::string note;
};

struct OrthogonalizationLedger {
    std::string              kind;
    std::vector<std::size_t> indices; ///< 1-based n_{k_l} or m_k
    std::vector<Element>     outputs; ///< y_l, or densities of psi_k
    std::vector<double>      bounds;    ///< recorded bound on the distance to the selected input
    std::vector<double>      distances; ///< measured ||x_{n_l} - y_l||_1
    std::vector<double>      gauges;    ///< gauge of each output
    std::vector<double>      theory_bounds; ///< 2^-(l-1), or eta_k + sum_{l>k} eta_l
    std::vector<double>      epsilons;  ///< eps_l (tau-null) / unused
    std::vector<double>      deltas;    ///< delta_l (tau-null) / delta_0 and delta_1 per step
    std::vector<double>      etas;      ///< eta_n (almost isometric)
    double                   eta_sum = 0;
    std::vector<Projection>  right;     ///< right supports s_l of the outputs
    std::vector<Projection>  left;      ///< left supports t_l of the outputs
    std::vector<StageRecord> stages;
    std::size_t              requested_depth = 0;
    std::size_t              achieved_depth  = 0;
    bool                     orthogonal = false; ///< two-sided, pairwise, re-verified
    bool                     certified  = false;
    std::string              diagnostic;
};

// Selects n_{k_1} < n_{k_2} < ... left to right with exceedance(x, eps_l) < delta_l, cuts each
// selection to p_l and q_l = 1 - join_{m>l} p_m, then repeats on adjoints.
OrthogonalizationLedger tau_null_orthogonalize(const ElementSequence &xs, std::size_t depth);

struct AlmostIsometricOptions {
    std::vector<double> eta;            ///< eta_1..eta_N; default eps*2^-n
    double              epsilon = 0.1;
    double              delta0  = -1;   ///< span gate on the prefix; default eta_1
    std::size_t         window  = 8;    ///< candidates examined per induction step
    L1Budget            budget;
};

// Finite-depth induction: keeps psi_1..psi_n pairwise orthogonal and normalized, adds psi_{n+1}
// from the candidate least charged by the current |psi_k|, |psi_k*|, then re-orthogonalizes the
// old members inside the complementary corners.
OrthogonalizationLedger almost_isometric_orthogonalize(std::span<const Functional> phis, std::size_t depth,
                                                       const AlmostIsometricOptions &opt = {});

struct ProbeThresholds {
    double      norm_null_ratio = 1e-3; ///< final norm below this fraction of the largest norm
    double      pair_constant   = 0.9;  ///< pairwise constant required in the probe subsequence
    double      delta_max       = 0.2;  ///< tail deltas allowed for l1 evidence
    std::size_t max_subsequence = 12;
};

struct ProbeReport {
    std::string              name;
    std::vector<double>      norms;
    std::vector<double>      gauges;
    double                   inf_norm = 0;
    bool                     gauge_decreasing = false; ///< last gauge <= half the largest one
    std::vector<std::size_t> subsequence;              ///< 1-based
    L1Certificate            tail;
    std::string              verdict; ///< norm-null-evidence | almost-isometric-evidence | mixed/inconclusive
    ProbeThresholds          thresholds;
};

ProbeReport trichotomy_probe(const ElementSequence &xs, const ProbeThresholds &th = {}, const L1Budget &budget = {});

void           write_ledger_csv(std::ostream &os, const OrthogonalizationLedger &led);
nlohmann::json ledger_to_json(const OrthogonalizationLedger &led);
nlohmann::json probe_to_json(const ProbeReport &p);

} // namespace vnl1
