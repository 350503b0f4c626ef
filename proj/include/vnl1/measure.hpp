#pragma once
// Convergence in measure for a finite trace: exceedance masses tau(chi_{]eps,inf[}(|x|)) and a scalar gauge.

#include "vnl1/algebra.hpp"
#include "vnl1/sequence.hpp"

#include <iosfwd>
#include <nlohmann/json_fwd.hpp>
#include <vector>

namespace vnl1 {

double exceedance(const Element &x, double eps);

struct ExceedanceProfile {
    std::vector<double> thresholds;
    std::vector<double> masses;
};
ExceedanceProfile exceedance_profile(const Element &x, std::vector<double> thresholds);

// inf{eps > 0 : exceedance(x, eps) <= eps}, read off the singular value staircase.
double gauge(const Element &x);
// Same, from weighted singular values (value, weight) of |x|.
double gauge_from_staircase(std::vector<std::pair<double, double>> levels);

// 2^-k for k = 0..20, ascending.
std::vector<double> default_epsilon_grid();

struct EvidenceRow {
    std::size_t n;
    double      epsilon;
    double      mass;
    double      norm1;
    double      gauge;
};

struct TauNullEvidence {
    std::vector<double>      epsilons;
    std::vector<std::size_t> indices;
    std::vector<EvidenceRow> rows;           ///< index-major, epsilon-minor
    std::vector<double>      gauges;         ///< per index
    std::vector<double>      norms;          ///< per index
    bool                     monotone_trend = false; ///< every epsilon column non-increasing along the prefix
    std::vector<char>        final_mass_below;       ///< per epsilon: last mass <= mass_threshold
    double                   mass_threshold  = 0.05;
    double                   gauge_threshold = 0.1;
    bool                     tau_null_evidence = false; ///< last gauge <= gauge_threshold and gauge did not grow
};

TauNullEvidence tau_null_evidence(const ElementSequence &xs, std::vector<double> epsilons = default_epsilon_grid(),
                                  const std::vector<std::size_t> &indices = {});

void           write_evidence_csv(std::ostream &os, const TauNullEvidence &ev);
nlohmann::json evidence_to_json(const TauNullEvidence &ev);

} // namespace vnl1
