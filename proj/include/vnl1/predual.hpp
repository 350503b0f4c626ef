#pragma once
// Normal functionals on N represented by densities: phi(y) = tau(D y).

#include "vnl1/algebra.hpp"

#include <memory>
#include <nlohmann/json_fwd.hpp>

namespace vnl1 {

enum class Side { left, right };

struct SupportPair {
    Projection left;  ///< range projection of D D*
    Projection right; ///< range projection of D* D
};

class Functional {
  public:
    Functional() = default;
    // Computes norm, polar data and supports eagerly.
    explicit Functional(Element density);

    [[nodiscard]] bool               empty() const { return !d_; }
    [[nodiscard]] const Shape       &shape() const { return d_->density.shape(); }
    [[nodiscard]] const Element     &density() const { return d_->density; }
    [[nodiscard]] double             norm() const { return d_->norm; }
    [[nodiscard]] const Element     &phase() const { return d_->u; }             ///< D = u|D|
    [[nodiscard]] const Element     &abs_density() const { return d_->abs; }     ///< |D|
    [[nodiscard]] const Element     &abs_adjoint_density() const { return d_->abs_adj; } ///< |D*|
    [[nodiscard]] const SupportPair &supports() const { return d_->supports; }

    cplx operator()(const Element &y) const { return trace_product(d_->density, y); }
    // phi*(a) = conj(phi(a*)), the functional with density D*.
    [[nodiscard]] cplx adjoint_value(const Element &a) const;
    // |phi|(a) and |phi*|(a).
    [[nodiscard]] cplx abs_value(const Element &a) const { return trace_product(d_->abs, a); }
    [[nodiscard]] cplx abs_adjoint_value(const Element &a) const { return trace_product(d_->abs_adj, a); }

  private:
    struct Data {
        Element     density, u, abs, abs_adj;
        double      norm = 0;
        SupportPair supports;
    };
    std::shared_ptr<const Data> d_;
};

Functional from_density(Element d);
// Left action a.phi = phi(. a) has density aD; right action phi.a has density Da.
Functional act(const Element &a, const Functional &phi, Side side);
// l phi r, the functional with density l D r.
Functional compress(const Functional &phi, const Projection &l, const Projection &r);
Functional scaled(const Functional &phi, cplx s);
Functional difference(const Functional &a, const Functional &b);
double     distance(const Functional &a, const Functional &b);
// Rejects ||phi|| < 1e-12 tau(1).
Functional normalized(const Functional &phi);

struct AbsAdjoint {
    Functional abs;
    Functional adjoint;
    Functional abs_adjoint;
};
AbsAdjoint  abs_and_adjoint(const Functional &phi);
SupportPair supports(const Functional &phi);

// Orthogonal left and right supports.
bool are_orthogonal(const Functional &phi, const Functional &psi, double tol = -1);
bool is_positive(const Functional &phi, double tol = -1);

nlohmann::json functional_to_json(const Functional &phi);
Functional     functional_from_json(const nlohmann::json &j);

} // namespace vnl1
