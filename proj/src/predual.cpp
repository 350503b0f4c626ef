#include "vnl1/predual.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace vnl1 {

Functional::Functional(Element density) {
    if(density.empty()) throw ValidationError("Functional: empty density");
    auto data     = std::make_shared<Data>();
    const auto &s = *density.shape();
    auto sv       = svd(density);
    double mx     = 0;
    for(double v : sv.values) mx = std::max(mx, v);
    double cut = kTieRel * mx;

    std::vector<char> keep(sv.values.size());
    for(std::size_t i = 0; i < keep.size(); ++i) keep[i] = sv.values[i] > cut;

    data->u       = Element(density.shape());
    data->abs     = Element(density.shape());
    data->abs_adj = Element(density.shape());
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            double a                    = sv.values[row];
            data->abs.block_data(j)[0]     = a;
            data->abs_adj.block_data(j)[0] = a;
            data->u.block_data(j)[0]       = keep[row] ? sv.left.block_data(j)[0] : cplx(0);
            data->norm += s.weight(j) * a;
            continue;
        }
        auto            U = sv.left.block(j);
        auto            V = sv.right.block(j);
        Eigen::VectorXd d(n), k(n);
        for(int i = 0; i < n; ++i) {
            d(i) = sv.values[row + static_cast<std::size_t>(i)];
            k(i) = keep[row + static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        }
        data->abs.block(j).noalias()     = V * d.cast<cplx>().asDiagonal() * V.adjoint();
        data->abs_adj.block(j).noalias() = U * d.cast<cplx>().asDiagonal() * U.adjoint();
        data->u.block(j).noalias()       = U * k.cast<cplx>().asDiagonal() * V.adjoint();
        data->norm += s.weight(j) * d.sum();
    }
    data->supports.right = projection_from_columns(sv.right, keep);
    data->supports.left  = projection_from_columns(sv.left, keep);
    data->density        = std::move(density);
    d_                   = std::move(data);
}

cplx Functional::adjoint_value(const Element &a) const { return std::conj(trace_product(d_->density, a.adjoint())); }

Functional from_density(Element d) { return Functional(std::move(d)); }

Functional act(const Element &a, const Functional &phi, Side side) {
    require_same_shape(a.shape(), phi.shape(), "act");
    return Functional(side == Side::left ? a * phi.density() : phi.density() * a);
}

Functional compress(const Functional &phi, const Projection &l, const Projection &r) {
    return Functional(l.element() * phi.density() * r.element());
}

Functional scaled(const Functional &phi, cplx s) { return Functional(s * phi.density()); }

Functional difference(const Functional &a, const Functional &b) { return Functional(a.density() - b.density()); }

double distance(const Functional &a, const Functional &b) { return trace_norm(a.density() - b.density()); }

Functional normalized(const Functional &phi) {
    double floor = 1e-12 * phi.shape()->tau_unit();
    if(phi.norm() < floor) throw PreconditionError("normalized: functional norm below 1e-12 tau(1)", phi.norm());
    return scaled(phi, 1.0 / phi.norm());
}

AbsAdjoint abs_and_adjoint(const Functional &phi) {
    return {Functional(phi.abs_density()), Functional(phi.density().adjoint()), Functional(phi.abs_adjoint_density())};
}

SupportPair supports(const Functional &phi) { return phi.supports(); }

bool are_orthogonal(const Functional &phi, const Functional &psi, double tol) {
    require_same_shape(phi.shape(), psi.shape(), "are_orthogonal");
    return projections_orthogonal(phi.supports().right, psi.supports().right, tol) &&
           projections_orthogonal(phi.supports().left, psi.supports().left, tol);
}

bool is_positive(const Functional &phi, double tol) {
    const auto &s = *phi.shape();
    if(tol < 0) tol = s.tol(phi.norm());
    return trace_norm(phi.density() - phi.abs_density()) <= tol;
}

nlohmann::json functional_to_json(const Functional &phi) {
    auto j    = element_to_json(phi.density());
    j["norm"] = phi.norm();
    return j;
}

Functional functional_from_json(const nlohmann::json &j) { return Functional(element_from_json(j)); }

} // namespace vnl1
