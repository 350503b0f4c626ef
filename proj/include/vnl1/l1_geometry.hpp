#pragma once
// Lower l1 constants of finite families: min ||sum a_k x_k/||x_k|| ||_1 over sum |a_k| = 1,
// tail schedules, blocking and perturbation certificates.

#include "vnl1/algebra.hpp"
#include "vnl1/predual.hpp"

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

namespace vnl1 {

struct L1Budget {
    int           phases             = 24;
    int           simplex_resolution = 32;
    int           refine_steps       = 200;
    std::size_t   max_grid_points    = 400000; ///< full phase x simplex grid only below this size
    int           random_starts      = 32;
    int           seeds_kept         = 16;
    bool          real_mode          = false;  ///< coefficients restricted to reals (signs x simplex)
    bool          normalize          = true;   ///< false: use the raw family, no division by ||x_k||
    std::uint64_t seed               = 0x5eedull;
};

struct L1Certificate {
    double              r_estimate = 1.0;   ///< best value found; an upper bound on the true constant
    std::vector<double> delta_schedule;     ///< delta_m = 1 - constant of the tail from m (1-based m)
    std::vector<cplx>   witness_alpha;      ///< sum |alpha| = 1
    std::string         method;
    std::size_t         grid_points       = 0;
    std::size_t         evaluations       = 0;
    int                 refine_iterations = 0;
    L1Budget            budget;
    bool                almost_isometric_trend = false;
    std::vector<double> measured_delta; ///< perturbation certificates: re-measured tail schedule
    bool                validated = true;
};

// ||sum alpha_k xhat_k||_1 for a fixed family, with identical blocks across the family merged.
class L1Evaluator {
  public:
    L1Evaluator(std::span<const Element> xs, bool normalize);

    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t entries() const { return entries_; }
    [[nodiscard]] double      scale(std::size_t k) const { return scale_[k]; } ///< original ||x_k||_1
    [[nodiscard]] double      norm(std::span<const cplx> alpha) const;
    [[nodiscard]] double      norm_of(const std::vector<cplx> &buf) const;
    void                      axpy(std::vector<cplx> &buf, std::size_t k, cplx a) const;
    void                      combine(std::span<const cplx> alpha, std::vector<cplx> &buf) const;
    // sum_g w_g tr (X_g* X_g + mu^2)^{1/2} for X = sum alpha_k x_k; grad[k] = d/d Re alpha_k + i d/d Im alpha_k.
    double smoothed(std::span<const cplx> alpha, double mu, std::vector<cplx> &grad) const;

  private:
    std::vector<int>               dims_;
    std::vector<double>            weights_;
    std::vector<std::size_t>       offsets_;
    std::size_t                    entries_ = 0;
    std::vector<std::vector<cplx>> data_;
    std::vector<double>            scale_;
};

L1Certificate l1_lower_constant(std::span<const Element> xs, const L1Budget &budget = {});
L1Certificate l1_lower_constant(std::span<const Functional> phis, const L1Budget &budget = {});

// delta_m = 1 - l1_lower_constant(x_m, ..., x_n) for m = 1..n.
L1Certificate tail_delta_schedule(std::span<const Element> xs, const L1Budget &budget = {});
L1Certificate tail_delta_schedule(std::span<const Functional> phis, const L1Budget &budget = {});

struct Block {
    std::vector<std::size_t> indices; ///< 0-based positions in the input family
    std::vector<cplx>        lambda;  ///< y = sum lambda_i x_i has ||y||_1 = 1
    double                   combination_norm = 0; ///< ||z|| of the unit-l1 combination before normalizing
    double                   pool_constant    = 0;
};

struct BlockSpec {
    std::vector<Block>  blocks;
    std::vector<double> requested_delta;
    std::vector<double> measured_delta;  ///< tail schedule re-measured on the emitted blocks
    double              r          = 0;
    bool                complete   = false; ///< one block per requested delta
    bool                certified  = false; ///< complete, lambda sums <= 1/r, measured deltas within request
    std::string         diagnostic;
};

// Greedy blocking: repeatedly take the shortest prefix of unused indices whose best combination
// comes within the requested delta of the constant of all unused indices.
BlockSpec james_blocks(std::span<const Element> xs, double r, std::span<const double> target_delta, const L1Budget &budget = {},
                       std::size_t max_block_len = 8);
Element   block_element(std::span<const Element> xs, const Block &b);

// delta'_m = delta_m + sup_{n>=m} |1 - ||x_n||/||x_n+y_n|| | + sup_{n>=m} ||y_n||/||x_n+y_n||, then re-measured.
L1Certificate perturbation_certificate(const L1Certificate &x_cert, std::span<const Element> xs, std::span<const Element> ys,
                                       const L1Budget &budget = {});

nlohmann::json budget_to_json(const L1Budget &b);
L1Budget       budget_from_json(const nlohmann::json &j, L1Budget base = {});
nlohmann::json certificate_to_json(const L1Certificate &c);
nlohmann::json blockspec_to_json(const BlockSpec &b);

} // namespace vnl1
