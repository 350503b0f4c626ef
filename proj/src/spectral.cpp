#include "vnl1/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vnl1 {

namespace {

using JSVD = Eigen::JacobiSVD<Matrix>;

JSVD block_svd(ConstMatrixMap m, std::size_t j, bool vectors) {
    JSVD s;
    if(vectors) s.compute(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    else s.compute(m);
    if(!s.singularValues().allFinite()) throw NumericError("svd failed on block " + std::to_string(j), static_cast<int>(j));
    return s;
}

} // namespace

Projection projection_from_columns(const Element &vecs, const std::vector<char> &keep) {
    const auto      &s = *vecs.shape();
    Element          p(vecs.shape());
    std::vector<int> ranks(s.num_blocks(), 0);
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            if(keep[row]) {
                p.block_data(j)[0] = 1.0;
                ranks[j]           = 1;
            }
            continue;
        }
        std::vector<int> cols;
        for(int i = 0; i < n; ++i)
            if(keep[row + static_cast<std::size_t>(i)]) cols.push_back(i);
        ranks[j] = static_cast<int>(cols.size());
        if(cols.empty()) continue;
        auto   v = vecs.block(j);
        Matrix b(n, static_cast<Eigen::Index>(cols.size()));
        for(std::size_t c = 0; c < cols.size(); ++c) b.col(static_cast<Eigen::Index>(c)) = v.col(cols[c]);
        p.block(j).noalias() = b * b.adjoint();
    }
    return Projection::trusted(std::move(p), std::move(ranks));
}

namespace {

double max_abs(const std::vector<double> &v) {
    double m = 0;
    for(double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool passes(double value, double eps, double scale, SpectralMode mode) {
    double margin = kTieRel * scale;
    return mode == SpectralMode::strict_above ? value > eps + margin : value >= eps - margin;
}

} // namespace

Spectrum eigh(const Element &x, double tol) {
    const auto &s = *x.shape();
    if(tol < 0) tol = s.tol();
    double defect = selfadjoint_defect(x);
    if(defect > tol) throw ValidationError("eigh: element is not selfadjoint (defect " + std::to_string(defect) + ")");
    Spectrum out{x.shape(), std::vector<double>(s.total_dim()), Element(x.shape())};
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            out.values[row]              = x.block_data(j)[0].real();
            out.vectors.block_data(j)[0] = 1.0;
            continue;
        }
        auto   m = x.block(j);
        Matrix h = (m + m.adjoint()) * 0.5;
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        if(es.info() != Eigen::Success) throw NumericError("eigh failed on block " + std::to_string(j), static_cast<int>(j));
        for(int i = 0; i < n; ++i) out.values[row + static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        out.vectors.block(j) = es.eigenvectors();
    }
    return out;
}

Element spectral_function(const Spectrum &sp, const std::function<double(double)> &f) {
    const auto &s = *sp.shape;
    Element     y(sp.shape);
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            y.block_data(j)[0] = f(sp.values[row]);
            continue;
        }
        Eigen::VectorXd d(n);
        for(int i = 0; i < n; ++i) d(i) = f(sp.values[row + static_cast<std::size_t>(i)]);
        auto v             = sp.vectors.block(j);
        y.block(j).noalias() = v * d.cast<cplx>().asDiagonal() * v.adjoint();
    }
    return y;
}

SingularSystem svd(const Element &x) {
    const auto    &s = *x.shape();
    SingularSystem out{x.shape(), std::vector<double>(s.total_dim()), Element(x.shape()), Element(x.shape())};
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            cplx   z = x.block_data(j)[0];
            double a = std::abs(z);
            out.values[row]           = a;
            out.left.block_data(j)[0] = a > 0 ? z / a : cplx(1);
            out.right.block_data(j)[0] = 1.0;
            continue;
        }
        auto sv = block_svd(x.block(j), j, true);
        for(int i = 0; i < n; ++i) out.values[row + static_cast<std::size_t>(i)] = sv.singularValues()(i);
        out.left.block(j)  = sv.matrixU();
        out.right.block(j) = sv.matrixV();
    }
    return out;
}

std::vector<double> singular_values(const Element &x) {
    const auto         &s = *x.shape();
    std::vector<double> out(s.total_dim());
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            out[row] = std::abs(x.block_data(j)[0]);
            continue;
        }
        auto sv = block_svd(x.block(j), j, false);
        for(int i = 0; i < n; ++i) out[row + static_cast<std::size_t>(i)] = sv.singularValues()(i);
    }
    return out;
}

Polar abs_polar(const Element &x) {
    const auto &s  = *x.shape();
    auto        sv = svd(x);
    double      cut = kTieRel * max_abs(sv.values);
    Polar       out{Element(x.shape()), Element(x.shape())};
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n   = s.dim(j);
        std::size_t row = s.row_offset(j);
        if(n == 1) {
            double a               = sv.values[row];
            out.abs.block_data(j)[0] = a;
            out.u.block_data(j)[0]   = a > cut ? sv.left.block_data(j)[0] : cplx(0);
            continue;
        }
        auto            U = sv.left.block(j);
        auto            V = sv.right.block(j);
        Eigen::VectorXd d(n);
        Eigen::VectorXd keep(n);
        for(int i = 0; i < n; ++i) {
            d(i)    = sv.values[row + static_cast<std::size_t>(i)];
            keep(i) = d(i) > cut ? 1.0 : 0.0;
        }
        out.abs.block(j).noalias() = V * d.cast<cplx>().asDiagonal() * V.adjoint();
        out.u.block(j).noalias()   = U * keep.cast<cplx>().asDiagonal() * V.adjoint();
    }
    return out;
}

double trace_norm_block(const cplx *data, int n) {
    if(n == 1) return std::abs(data[0]);
    if(n == 2) {
        double f = std::norm(data[0]) + std::norm(data[1]) + std::norm(data[2]) + std::norm(data[3]);
        double d = std::abs(data[0] * data[3] - data[1] * data[2]);
        return std::sqrt(f + 2 * d);
    }
    ConstMatrixMap m(data, n, n);
    return block_svd(m, 0, false).singularValues().sum();
}

double operator_norm_block(const cplx *data, int n) {
    if(n == 1) return std::abs(data[0]);
    if(n == 2) {
        // (s1 -+ s2)^2 = f -+ 2|det| = |a -+ e d*|^2 + |b +- e c*|^2 with e = det/|det|; no cancellation near s1 = s2
        cplx det = data[0] * data[3] - data[1] * data[2];
        cplx e   = std::abs(det) > 0 ? det / std::abs(det) : cplx(1);
        double sum  = std::sqrt(std::norm(data[0] + e * std::conj(data[3])) + std::norm(data[2] - e * std::conj(data[1])));
        double diff = std::sqrt(std::norm(data[0] - e * std::conj(data[3])) + std::norm(data[2] + e * std::conj(data[1])));
        return 0.5 * (sum + diff);
    }
    ConstMatrixMap m(data, n, n);
    return block_svd(m, 0, false).singularValues()(0);
}

double trace_norm(const Element &x) {
    const auto &s = *x.shape();
    double      t = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) t += s.weight(j) * trace_norm_block(x.block_data(j), s.dim(j));
    return t;
}

double operator_norm(const Element &x) {
    const auto &s = *x.shape();
    double      m = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) m = std::max(m, operator_norm_block(x.block_data(j), s.dim(j)));
    return m;
}

double schatten_norm(const Element &x, double p) {
    if(std::isnan(p) || p < 1) throw ValidationError("schatten_norm: p must be >= 1");
    if(std::isinf(p)) return operator_norm(x);
    if(p == 1) return trace_norm(x);
    const auto &s  = *x.shape();
    auto        sv = singular_values(x);
    double      mx = max_abs(sv);
    if(mx == 0) return 0;
    double acc = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j)
        for(int i = 0; i < s.dim(j); ++i) acc += s.weight(j) * std::pow(sv[s.row_offset(j) + static_cast<std::size_t>(i)] / mx, p);
    return mx * std::pow(acc, 1.0 / p);
}

Projection spectral_projection(const Element &x, double eps, SpectralMode mode) {
    auto              sp    = eigh(x);
    double            scale = max_abs(sp.values);
    std::vector<char> keep(sp.values.size());
    for(std::size_t i = 0; i < keep.size(); ++i) keep[i] = passes(sp.values[i], eps, scale, mode);
    return projection_from_columns(sp.vectors, keep);
}

Projection abs_spectral_projection(const Element &x, double eps, SpectralMode mode) {
    const auto &s = *x.shape();
    if(s.commutative()) {
        double scale = 0;
        for(const auto &z : x.data()) scale = std::max(scale, std::abs(z));
        Element          p(x.shape());
        std::vector<int> ranks(s.num_blocks(), 0);
        for(std::size_t j = 0; j < s.num_blocks(); ++j)
            if(passes(std::abs(x.data()[j]), eps, scale, mode)) {
                p.data()[j] = 1.0;
                ranks[j]    = 1;
            }
        return Projection::trusted(std::move(p), std::move(ranks));
    }
    auto              sv    = svd(x);
    double            scale = max_abs(sv.values);
    std::vector<char> keep(sv.values.size());
    for(std::size_t i = 0; i < keep.size(); ++i) keep[i] = passes(sv.values[i], eps, scale, mode);
    return projection_from_columns(sv.right, keep);
}

Projection range_projection(const Element &x) {
    auto              sv    = svd(x);
    double            scale = max_abs(sv.values);
    std::vector<char> keep(sv.values.size());
    for(std::size_t i = 0; i < keep.size(); ++i) keep[i] = sv.values[i] > kTieRel * scale;
    return projection_from_columns(sv.left, keep);
}

} // namespace vnl1
