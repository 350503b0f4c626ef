#pragma once
// Randomized audits, experiment configuration and the pipeline runner behind the command line tool.

#include "vnl1/algebra.hpp"
#include "vnl1/l1_geometry.hpp"

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace vnl1 {

struct AuditSummary {
    std::string check;
    std::size_t trials     = 0;
    std::size_t violations = 0;
    double      min_slack  = 0; ///< smallest rhs - lhs seen (or -residual for identities)
    double      seconds    = 0;
};

// Shapes used when an audit is not pinned to one algebra.
std::vector<Shape> audit_shapes();

// Six rows: the three A4 and three A3 inequalities over `trials` random in-contract instances each.
// A violation is slack < -violation_tol.
std::vector<AuditSummary> lemma_audit(std::size_t trials, std::uint64_t seed, const std::vector<Shape> &shapes, double violation_tol = 1e-8);
// Planted sigma with support leakage beta; a violation is ||sigma - tau|| >= 5 beta^{1/2}.
AuditSummary compress_audit(double beta, std::size_t trials, std::uint64_t seed);
// |tau(p - p^q) - tau(p v q - q)| > tol counts as a violation.
AuditSummary lattice_audit(std::size_t trials, std::uint64_t seed, double tol = 1e-9);
// Orthogonal normalized pairs: | ||a phi + b psi|| - (|a| + |b|) | > tol counts as a violation.
AuditSummary isometry_audit(std::size_t pairs, std::size_t coefficients, std::uint64_t seed, double tol = 1e-9);

nlohmann::json audit_to_json(const AuditSummary &a);

struct ExperimentConfig {
    std::optional<nlohmann::json> algebra; ///< {"dims": [...], "weights": [...]}
    std::string                   generator;
    nlohmann::json                params = nlohmann::json::object();
    std::vector<std::string>      pipeline;
    std::uint64_t                 seed    = 1;
    std::size_t                   depth   = 8;
    std::size_t                   trials  = 1000;
    double                        tol     = 1e-9;
    double                        epsilon = 0.1;
    std::vector<double>           eta;
    std::string                   orthogonalize_mode = "tau-null";
    L1Budget                      budget;
    std::string                   output = "out";
};

const std::vector<std::string> &pipeline_ops();

// Validates the document against the schema in the README; throws ValidationError with the offending key.
ExperimentConfig config_from_json(const nlohmann::json &j);
nlohmann::json   config_to_json(const ExperimentConfig &c);

struct ResultBundle {
    nlohmann::json                     summary = nlohmann::json::object();
    std::map<std::string, std::string> files;     ///< relative path -> contents
    bool                               certified = true;
    std::vector<std::string>           diagnostics;
};

ResultBundle run_experiment(const ExperimentConfig &cfg);
// Writes every file of the bundle plus summary.json below `dir`; throws std::runtime_error on IO failure.
void emit_report(const ResultBundle &bundle, const std::string &dir);

} // namespace vnl1
