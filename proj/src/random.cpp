#include "vnl1/algebra.hpp"

#include <cmath>
#include <string>

namespace vnl1 {

namespace {

Matrix gaussian(int rows, int cols, std::mt19937_64 &rng) {
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(2.0));
    Matrix                           m(rows, cols);
    for(int c = 0; c < cols; ++c)
        for(int r = 0; r < rows; ++r) {
            double re = nd(rng);
            double im = nd(rng);
            m(r, c)   = cplx(re, im);
        }
    return m;
}

// Haar-distributed: QR of a Gaussian matrix with the phases of diag(R) absorbed.
Matrix orthonormal_columns(int rows, int cols, std::mt19937_64 &rng) {
    Matrix                          g = gaussian(rows, cols, rng);
    Eigen::HouseholderQR<Matrix>    qr(g);
    Matrix                          q = qr.householderQ() * Matrix::Identity(rows, cols);
    const Matrix                   &r = qr.matrixQR();
    for(int c = 0; c < cols; ++c) {
        double a = std::abs(r(c, c));
        if(a > 0) q.col(c) *= r(c, c) / a;
    }
    return q;
}

} // namespace

RandomKind random_kind_from_string(const std::string &name) {
    if(name == "generic") return RandomKind::generic;
    if(name == "selfadjoint") return RandomKind::selfadjoint;
    if(name == "positive") return RandomKind::positive;
    if(name == "projection") return RandomKind::projection;
    if(name == "unitary") return RandomKind::unitary;
    if(name == "contraction") return RandomKind::contraction;
    throw ValidationError("unknown random kind: " + name);
}

Element random_suite(const Shape &shape, RandomKind kind, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_suite(shape, kind, rng);
}

Element random_suite(const Shape &shape, RandomKind kind, std::mt19937_64 &rng) {
    const auto       &s = *shape;
    Element           x(shape);
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int n = s.dim(j);
        switch(kind) {
            case RandomKind::generic:
            case RandomKind::contraction: x.block(j) = gaussian(n, n, rng); break;
            case RandomKind::selfadjoint: {
                Matrix g   = gaussian(n, n, rng);
                x.block(j) = (g + g.adjoint()) * 0.5;
                break;
            }
            case RandomKind::positive: {
                Matrix g   = gaussian(n, n, rng);
                x.block(j) = g * g.adjoint() / static_cast<double>(n);
                break;
            }
            case RandomKind::projection: {
                int k    = std::uniform_int_distribution<int>(0, n)(rng);
                if(k == 0) break;
                Matrix q   = orthonormal_columns(n, k, rng);
                x.block(j) = q * q.adjoint();
                break;
            }
            case RandomKind::unitary: x.block(j) = orthonormal_columns(n, n, rng); break;
        }
    }
    if(kind == RandomKind::contraction) {
        double nrm = operator_norm(x);
        double t   = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        if(nrm > 0) x *= (1.0 - t) / nrm; // scale uniform in ]0, 1]
    }
    switch(kind) {
        case RandomKind::selfadjoint:
            if(selfadjoint_defect(x) > s.tol()) throw NumericError("random_suite: selfadjoint sample failed its check");
            break;
        case RandomKind::positive: {
            auto sp = eigh(x);
            for(double l : sp.values)
                if(l < -s.tol()) throw NumericError("random_suite: positive sample has negative eigenvalue");
            break;
        }
        case RandomKind::projection: Projection(x, s.tol()); break;
        case RandomKind::unitary:
            if(operator_norm(x * x.adjoint() - Element::identity(shape)) > s.tol())
                throw NumericError("random_suite: unitary sample failed its check");
            break;
        case RandomKind::contraction:
            if(operator_norm(x) > 1 + s.tol()) throw NumericError("random_suite: contraction sample left the unit ball");
            break;
        case RandomKind::generic: break;
    }
    return x;
}

} // namespace vnl1
