#include "vnl1/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vnl1 {

namespace {

// Orthonormal basis of the range of a (numerically exact) projection block.
Matrix range_basis(ConstMatrixMap p) {
    int    n = static_cast<int>(p.rows());
    Matrix h = (p + p.adjoint()) * 0.5;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if(es.info() != Eigen::Success) throw NumericError("range_basis: eigensolver failed");
    int count = 0;
    for(int i = 0; i < n; ++i) count += es.eigenvalues()(i) > 0.5;
    return es.eigenvectors().rightCols(count);
}

} // namespace

Projection::Projection(Element p, double tol) : p_(std::move(p)) {
    if(p_.empty()) throw ValidationError("Projection: empty element");
    const auto &s = *p_.shape();
    if(tol < 0) tol = s.tol();
    Element adj = p_.adjoint();
    if(operator_norm(p_ - adj) > tol) throw ValidationError("Projection: not selfadjoint");
    if(operator_norm(p_ * p_ - p_) > tol) throw ValidationError("Projection: not idempotent");
    auto sp = eigh(p_, tol);
    ranks_.assign(s.num_blocks(), 0);
    for(std::size_t j = 0; j < s.num_blocks(); ++j)
        for(int i = 0; i < s.dim(j); ++i) {
            double l = sp.values[s.row_offset(j) + static_cast<std::size_t>(i)];
            if(std::min(std::abs(l), std::abs(l - 1)) > tol) throw ValidationError("Projection: eigenvalue away from {0,1}");
            ranks_[j] += l > 0.5;
        }
}

Projection Projection::trusted(Element p, std::vector<int> ranks) {
    Projection out;
    out.p_     = std::move(p);
    out.ranks_ = std::move(ranks);
    return out;
}

Projection Projection::zero(const Shape &shape) { return trusted(Element(shape), std::vector<int>(shape->num_blocks(), 0)); }

Projection Projection::identity(const Shape &shape) { return trusted(Element::identity(shape), shape->dims()); }

double Projection::trace() const { return vnl1::trace(p_).real(); }

bool Projection::is_zero() const {
    return std::all_of(ranks_.begin(), ranks_.end(), [](int r) { return r == 0; });
}

Projection Projection::complement() const {
    std::vector<int> r(ranks_.size());
    for(std::size_t j = 0; j < r.size(); ++j) r[j] = shape()->dim(j) - ranks_[j];
    return trusted(Element::identity(shape()) - p_, std::move(r));
}

MeetJoin proj_meet_join(const Projection &p, const Projection &q, double tol) {
    require_same_shape(p.shape(), q.shape(), "proj_meet_join");
    const auto &s = *p.shape();
    if(tol < 0) tol = s.tol();
    Element          meet(p.shape()), join(p.shape());
    std::vector<int> mr(s.num_blocks(), 0), jr(s.num_blocks(), 0);
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int rp = p.ranks()[j], rq = q.ranks()[j];
        if(s.dim(j) == 1) {
            mr[j] = rp && rq;
            jr[j] = rp || rq;
            meet.block_data(j)[0] = static_cast<double>(mr[j]);
            join.block_data(j)[0] = static_cast<double>(jr[j]);
            continue;
        }
        if(rp == 0 || rq == 0) {
            join.block(j) = rp ? p.element().block(j) : q.element().block(j);
            jr[j]         = rp + rq;
            continue;
        }
        Matrix bp = range_basis(p.element().block(j));
        Matrix bq = range_basis(q.element().block(j));
        // Components of range(q) orthogonal to range(p); their singular values are the sines of
        // the principal angles, and right singular vectors with zero sine span the intersection.
        Matrix                   r = bq - bp * (bp.adjoint() * bq);
        Eigen::JacobiSVD<Matrix> sv(r, Eigen::ComputeThinU | Eigen::ComputeFullV);
        const auto              &sines = sv.singularValues();
        std::vector<int>         inter, outer;
        for(int i = 0; i < static_cast<int>(bq.cols()); ++i) (i < sines.size() && sines(i) > tol ? outer : inter).push_back(i);
        Matrix mv(bq.rows(), static_cast<Eigen::Index>(inter.size()));
        for(std::size_t c = 0; c < inter.size(); ++c) mv.col(static_cast<Eigen::Index>(c)) = bq * sv.matrixV().col(inter[c]);
        Matrix jv(bq.rows(), static_cast<Eigen::Index>(outer.size()));
        for(std::size_t c = 0; c < outer.size(); ++c) jv.col(static_cast<Eigen::Index>(c)) = sv.matrixU().col(outer[c]);
        meet.block(j).noalias() = mv * mv.adjoint();
        join.block(j).noalias() = bp * bp.adjoint() + jv * jv.adjoint();
        mr[j]                   = static_cast<int>(inter.size());
        jr[j]                   = rp + static_cast<int>(outer.size());
    }
    return {Projection::trusted(std::move(meet), std::move(mr)), Projection::trusted(std::move(join), std::move(jr))};
}

Projection proj_join_all(std::span<const Projection> ps) {
    if(ps.empty()) throw ValidationError("proj_join_all: empty list");
    Projection acc = ps.front();
    for(std::size_t i = 1; i < ps.size(); ++i) acc = proj_meet_join(acc, ps[i]).join;
    return acc;
}

bool projections_orthogonal(const Projection &p, const Projection &q, double tol) {
    require_same_shape(p.shape(), q.shape(), "projections_orthogonal");
    if(tol < 0) tol = p.shape()->tol();
    return operator_norm(p.element() * q.element()) <= tol;
}

Projection proj_orthogonal_sum(const Projection &p, const Projection &q) {
    if(!projections_orthogonal(p, q)) throw ValidationError("proj_orthogonal_sum: projections are not orthogonal");
    std::vector<int> r(p.ranks().size());
    for(std::size_t j = 0; j < r.size(); ++j) r[j] = p.ranks()[j] + q.ranks()[j];
    return Projection::trusted(p.element() + q.element(), std::move(r));
}

bool is_orthogonal_elements(const Element &a, const Element &b, double tol) {
    require_same_shape(a.shape(), b.shape(), "is_orthogonal_elements");
    double m     = std::max(operator_norm(a), operator_norm(b));
    double bound = tol * m * m;
    return operator_norm(a * b.adjoint()) <= bound && operator_norm(a.adjoint() * b) <= bound;
}

} // namespace vnl1
