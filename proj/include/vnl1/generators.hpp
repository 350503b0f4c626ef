#pragma once
// Named sequence generators: commutative models on N atoms of weight 1/N and noncommutative families.

#include "vnl1/algebra.hpp"
#include "vnl1/predual.hpp"
#include "vnl1/sequence.hpp"

#include <cstdint>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace vnl1 {

// x_n = n 1_[0,1/n]: value n on the first floor(N/n) atoms.
class Remark1Sequence final : public ElementSequence {
  public:
    Remark1Sequence(std::size_t atoms, std::size_t length);

    [[nodiscard]] const Shape &shape() const override { return shape_; }
    [[nodiscard]] std::size_t  size() const override { return length_; }
    [[nodiscard]] Element      at(std::size_t n) const override;
    [[nodiscard]] std::string  name() const override { return "remark1"; }
    [[nodiscard]] double       exceedance(std::size_t n, double eps) const override;
    [[nodiscard]] double       op_norm(std::size_t n) const override;
    [[nodiscard]] double       norm1(std::size_t n) const override;

  private:
    std::size_t support(std::size_t n) const { return atoms_ / n; }
    Shape       shape_;
    std::size_t atoms_, length_;
};

// x_n = c_n (n^2 1_[1/(n+1),1/n[ + 1/n), c_n = 1 or n^2 for the unbounded variant.
class Remark2Sequence final : public ElementSequence {
  public:
    Remark2Sequence(std::size_t atoms, std::size_t length, bool unbounded);

    [[nodiscard]] const Shape &shape() const override { return shape_; }
    [[nodiscard]] std::size_t  size() const override { return length_; }
    [[nodiscard]] Element      at(std::size_t n) const override;
    [[nodiscard]] std::string  name() const override { return unbounded_ ? "remark2_unbounded" : "remark2"; }
    [[nodiscard]] double       exceedance(std::size_t n, double eps) const override;
    [[nodiscard]] double       op_norm(std::size_t n) const override;
    [[nodiscard]] double       norm1(std::size_t n) const override;

  private:
    struct Levels {
        std::size_t lo, hi; ///< atoms [lo, hi) carry the peak
        double      peak, floor;
    };
    Levels      levels(std::size_t n) const;
    Shape       shape_;
    std::size_t atoms_, length_;
    bool        unbounded_;
};

const std::vector<std::string> &generator_names();

// Parameters are generator specific (see README); `shape` overrides the generator's default algebra
// where the generator accepts one.
std::unique_ptr<ElementSequence> generate_sequence(const std::string &name, const nlohmann::json &params, const Shape &shape,
                                                   std::uint64_t seed);

// Planted families used by the l1 and witness checks.
// x_{2k-1} = (u_k + v_k)/2, x_{2k} = (u_k - v_k)/2 with u_k, v_k disjoint flat densities: constant 1/2.
std::vector<Element> planted_duplicated(std::size_t pairs, std::size_t atoms_per_piece = 2);
// Pairwise two-sided orthogonal rank-one densities of trace norm 1 (positive if requested).
std::vector<Element> planted_orthogonal(const Shape &shape, std::size_t count, bool positive, std::uint64_t seed);

std::vector<Functional> to_functionals(const ElementSequence &xs);
std::vector<Functional> to_functionals(const std::vector<Element> &xs);

} // namespace vnl1
