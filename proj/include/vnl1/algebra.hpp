#pragma once
// Finite-dimensional von Neumann algebras N = M_{n_1} (+) ... (+) M_{n_k} with the faithful trace
// tau(x) = sum_j w_j tr(x_j).  Elements keep all blocks in one contiguous column-major buffer.

#include "vnl1/errors.hpp"

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <random>
#include <span>
#include <vector>

namespace vnl1 {

using cplx           = std::complex<double>;
using Matrix         = Eigen::MatrixXcd;
using MatrixMap      = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

inline constexpr double kBaseTol = 1e-9;
inline constexpr double kTieRel  = 1e-12; ///< relative tie margin for spectral thresholds

class AlgebraShape {
  public:
    AlgebraShape(std::vector<int> dims, std::vector<double> weights);

    [[nodiscard]] std::size_t num_blocks() const { return dims_.size(); }
    [[nodiscard]] int         dim(std::size_t j) const { return dims_[j]; }
    [[nodiscard]] double      weight(std::size_t j) const { return weights_[j]; }
    [[nodiscard]] std::size_t offset(std::size_t j) const { return offsets_[j]; }     ///< first entry of block j
    [[nodiscard]] std::size_t row_offset(std::size_t j) const { return rows_[j]; }    ///< first eigenvalue slot of block j
    [[nodiscard]] std::size_t num_entries() const { return offsets_.back(); }
    [[nodiscard]] std::size_t total_dim() const { return rows_.back(); }
    [[nodiscard]] int         max_dim() const { return max_dim_; }
    [[nodiscard]] double      tau_unit() const { return tau_unit_; }
    [[nodiscard]] bool        commutative() const { return max_dim_ == 1; }
    [[nodiscard]] const std::vector<int>    &dims() const { return dims_; }
    [[nodiscard]] const std::vector<double> &weights() const { return weights_; }

    // Default absolute tolerance: kBaseTol * max(1, scale) * largest block size.
    [[nodiscard]] double tol(double scale = 1.0) const;

    bool operator==(const AlgebraShape &other) const { return dims_ == other.dims_ && weights_ == other.weights_; }

  private:
    std::vector<int>         dims_;
    std::vector<double>      weights_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> rows_;
    int                      max_dim_  = 0;
    double                   tau_unit_ = 0;
};

using Shape = std::shared_ptr<const AlgebraShape>;

Shape build_algebra(std::vector<int> dims, std::vector<double> weights);
// n atoms of weight 1/n: the discretized L^1([0,1]).
Shape diagonal_algebra(std::size_t atoms);
bool  same_shape(const Shape &a, const Shape &b);
void  require_same_shape(const Shape &a, const Shape &b, const char *where);

class Element {
  public:
    Element() = default;
    explicit Element(Shape shape);

    static Element identity(const Shape &shape);
    static Element scalar(const Shape &shape, cplx value);
    static Element from_blocks(const Shape &shape, const std::vector<Matrix> &blocks);
    // Diagonal element; `values` indexed like eigenvalue slots (row_offset(j) + i).
    static Element diagonal(const Shape &shape, std::span<const double> values);

    [[nodiscard]] const Shape  &shape() const { return shape_; }
    [[nodiscard]] bool          empty() const { return !shape_; }
    [[nodiscard]] std::size_t   num_blocks() const { return shape_->num_blocks(); }
    [[nodiscard]] MatrixMap      block(std::size_t j);
    [[nodiscard]] ConstMatrixMap block(std::size_t j) const;
    [[nodiscard]] cplx          *block_data(std::size_t j) { return data_.data() + shape_->offset(j); }
    [[nodiscard]] const cplx    *block_data(std::size_t j) const { return data_.data() + shape_->offset(j); }
    [[nodiscard]] std::span<cplx>       data() { return data_; }
    [[nodiscard]] std::span<const cplx> data() const { return data_; }

    [[nodiscard]] Element adjoint() const;
    [[nodiscard]] bool    is_zero() const;

    Element &operator+=(const Element &other);
    Element &operator-=(const Element &other);
    Element &operator*=(cplx s);

  private:
    Shape             shape_;
    std::vector<cplx> data_;
};

Element operator+(Element a, const Element &b);
Element operator-(Element a, const Element &b);
Element operator-(Element a);
Element operator*(cplx s, Element a);
Element operator*(const Element &a, const Element &b);

cplx trace(const Element &x);
// tau(ab) without forming the product.
cplx trace_product(const Element &a, const Element &b);

// Largest entrywise deviation from selfadjointness, relative to the largest entry.
double selfadjoint_defect(const Element &x);

// x = V diag(values) V*, values ascending inside each block.
struct Spectrum {
    Shape               shape;
    std::vector<double> values;
    Element             vectors;
};
Spectrum eigh(const Element &x, double tol = -1);
Element  spectral_function(const Spectrum &s, const std::function<double(double)> &f);

// x = left diag(values) right*, values descending inside each block.
struct SingularSystem {
    Shape               shape;
    std::vector<double> values;
    Element             left;
    Element             right;
};
SingularSystem      svd(const Element &x);
std::vector<double> singular_values(const Element &x);

struct Polar {
    Element u;
    Element abs;
};
// u is the partial isometry vanishing on ker|x| (u = 0 for x = 0).
Polar abs_polar(const Element &x);

double trace_norm_block(const cplx *data, int n);
double operator_norm_block(const cplx *data, int n);
double trace_norm(const Element &x);
double operator_norm(const Element &x);
// Weighted Schatten norm; p = infinity gives the operator norm.
double schatten_norm(const Element &x, double p);

class Projection {
  public:
    Projection() = default;
    // Validates p = p* = p^2 within tol.
    explicit Projection(Element p, double tol = -1);
    // Caller guarantees the invariants (e.g. p was built from orthonormal vectors).
    static Projection trusted(Element p, std::vector<int> ranks);
    static Projection zero(const Shape &shape);
    static Projection identity(const Shape &shape);

    [[nodiscard]] const Element          &element() const { return p_; }
    [[nodiscard]] const Shape            &shape() const { return p_.shape(); }
    [[nodiscard]] const std::vector<int> &ranks() const { return ranks_; }
    [[nodiscard]] double                  trace() const;
    [[nodiscard]] bool                    is_zero() const;
    [[nodiscard]] Projection              complement() const;

  private:
    Element          p_;
    std::vector<int> ranks_;
};

enum class SpectralMode { strict_above, at_or_above };

// chi of a selfadjoint x on ]eps, inf[ (strict) or [eps, inf[.  Ties use eps +- kTieRel*|x|_inf.
Projection spectral_projection(const Element &x, double eps, SpectralMode mode = SpectralMode::strict_above);
// chi_{]eps,inf[}(|x|), computed from right singular vectors.
Projection abs_spectral_projection(const Element &x, double eps, SpectralMode mode = SpectralMode::strict_above);
// Projection onto the range of x (left support); singular values below kTieRel*|x|_inf count as zero.
Projection range_projection(const Element &x);
// sum of v_i v_i* over the columns of the per-block unitary `vecs` whose slot has keep != 0.
Projection projection_from_columns(const Element &vecs, const std::vector<char> &keep);

struct MeetJoin {
    Projection meet;
    Projection join;
};
MeetJoin   proj_meet_join(const Projection &p, const Projection &q, double tol = -1);
Projection proj_join_all(std::span<const Projection> ps);
// p + q for orthogonal p, q (checked).
Projection proj_orthogonal_sum(const Projection &p, const Projection &q);
bool       projections_orthogonal(const Projection &p, const Projection &q, double tol = -1);

// ||a b*|| and ||a* b|| at most tol * max(||a||, ||b||)^2, so a rounding-level member counts as zero.
bool is_orthogonal_elements(const Element &a, const Element &b, double tol);

enum class RandomKind { generic, selfadjoint, positive, projection, unitary, contraction };
RandomKind random_kind_from_string(const std::string &name);

Element random_suite(const Shape &shape, RandomKind kind, std::uint64_t seed);
Element random_suite(const Shape &shape, RandomKind kind, std::mt19937_64 &rng);

nlohmann::json shape_to_json(const AlgebraShape &shape);
Shape          shape_from_json(const nlohmann::json &j);
// {"dims":[...], "weights":[...], "blocks":[[[re,im],...],...]}, entries of each block row-major.
nlohmann::json element_to_json(const Element &x);
Element        element_from_json(const nlohmann::json &j);

// FNV-1a over raw element bytes; used as an inputs digest in reports.
std::uint64_t digest(std::span<const Element *const> xs);

} // namespace vnl1
