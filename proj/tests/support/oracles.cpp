#include "oracles.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace oracle {

Matrix naive_multiply(const Matrix &a, const Matrix &b) {
    Matrix c = Matrix::Zero(a.rows(), b.cols());
    for(Eigen::Index i = 0; i < a.rows(); ++i)
        for(Eigen::Index j = 0; j < b.cols(); ++j) {
            cplx s = 0;
            for(Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Divide-and-conquer SVD; the library uses one-sided Jacobi.
std::vector<double> singular_values(const Matrix &a) {
    Eigen::BDCSVD<Matrix> svd(a);
    std::vector<double>   out(svd.singularValues().data(), svd.singularValues().data() + svd.singularValues().size());
    std::sort(out.rbegin(), out.rend());
    return out;
}

namespace {

// sigma_1 + sigma_2 of a 2x2 block from the eigenvalues of a*a.
double trace_norm_2x2(const cplx *d) {
    double f   = std::norm(d[0]) + std::norm(d[1]) + std::norm(d[2]) + std::norm(d[3]);
    double det = std::norm(d[0] * d[3] - d[1] * d[2]);
    double disc = std::sqrt(std::max(0.0, f * f - 4 * det));
    // sigma_2 = |det| / sigma_1 avoids the cancellation in (f - disc) / 2
    double s1 = std::sqrt(std::max(0.0, (f + disc) / 2));
    return s1 > 0 ? s1 + std::sqrt(det) / s1 : 0.0;
}

double block_trace_norm(const cplx *d, int n) {
    if(n == 1) return std::abs(d[0]);
    if(n == 2) return trace_norm_2x2(d);
    Eigen::Map<const Matrix> m(d, n, n);
    auto                     s = singular_values(m);
    return std::accumulate(s.begin(), s.end(), 0.0);
}

} // namespace

double trace_norm(const Element &x) {
    const auto &s = *x.shape();
    double      t = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) t += s.weight(j) * block_trace_norm(x.block_data(j), s.dim(j));
    return t;
}

double eigen_count_above(const Element &h, double eps) {
    const auto &s = *h.shape();
    double      c = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        Eigen::Map<const Matrix>              m(h.block_data(j), s.dim(j), s.dim(j));
        Eigen::SelfAdjointEigenSolver<Matrix> es((m + m.adjoint()) * 0.5, Eigen::EigenvaluesOnly);
        for(Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) c += s.weight(j) * (es.eigenvalues()(i) > eps);
    }
    return c;
}

std::vector<int> intersection_dims(const Element &p, const Element &q) {
    const auto      &s = *p.shape();
    std::vector<int> out;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int                      n = s.dim(j);
        Eigen::Map<const Matrix> P(p.block_data(j), n, n), Q(q.block_data(j), n, n);
        Eigen::ColPivHouseholderQR<Matrix> qp(P), qq(Q);
        qp.setThreshold(1e-8);
        qq.setThreshold(1e-8);
        int    rp = static_cast<int>(qp.rank()), rq = static_cast<int>(qq.rank());
        if(rp == 0 || rq == 0) {
            out.push_back(0);
            continue;
        }
        Matrix bp = (qp.householderQ() * Matrix::Identity(n, n)).leftCols(rp);
        Matrix bq = (qq.householderQ() * Matrix::Identity(n, n)).leftCols(rq);
        Matrix both(n, rp + rq);
        both << bp, bq;
        Eigen::ColPivHouseholderQR<Matrix> qb(both);
        qb.setThreshold(1e-8);
        out.push_back(rp + rq - static_cast<int>(qb.rank()));
    }
    return out;
}

namespace {

struct Family {
    std::vector<Element> xs;
    Element              buf;

    double eval(const std::vector<cplx> &alpha) {
        buf = Element(xs.front().shape());
        for(std::size_t k = 0; k < xs.size(); ++k) buf += alpha[k] * xs[k];
        return oracle::trace_norm(buf);
    }
};

// alpha_k = |v_k| / sum |v| * exp(i theta_k), theta_1 = 0; params = (v_1..v_n, theta_2..theta_n).
std::vector<cplx> to_alpha(const std::vector<double> &prm, std::size_t n) {
    double sum = 0;
    for(std::size_t k = 0; k < n; ++k) sum += std::abs(prm[k]);
    std::vector<cplx> a(n);
    for(std::size_t k = 0; k < n; ++k) a[k] = std::polar(sum > 0 ? std::abs(prm[k]) / sum : 1.0 / n, k ? prm[n + k - 1] : 0.0);
    return a;
}

std::vector<double> nelder_mead(const std::function<double(const std::vector<double> &)> &f, std::vector<double> x0, double step) {
    std::size_t                      d = x0.size();
    std::vector<std::vector<double>> pts{x0};
    for(std::size_t i = 0; i < d; ++i) {
        auto p = x0;
        p[i] += step;
        pts.push_back(p);
    }
    std::vector<double> val;
    for(auto &p : pts) val.push_back(f(p));
    for(int it = 0; it < 6000; ++it) {
        std::vector<std::size_t> idx(d + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return val[a] < val[b]; });
        std::vector<std::vector<double>> p2;
        std::vector<double>              v2;
        for(auto i : idx) {
            p2.push_back(pts[i]);
            v2.push_back(val[i]);
        }
        pts = p2;
        val = v2;
        if(val[d] - val[0] < 1e-14) break;
        std::vector<double> c(d, 0.0);
        for(std::size_t i = 0; i < d; ++i)
            for(std::size_t k = 0; k < d; ++k) c[k] += pts[i][k] / static_cast<double>(d);
        auto along = [&](double t) {
            std::vector<double> p(d);
            for(std::size_t k = 0; k < d; ++k) p[k] = c[k] + t * (pts[d][k] - c[k]);
            return p;
        };
        auto   xr = along(-1);
        double fr = f(xr);
        if(fr < val[0]) {
            auto   xe = along(-2);
            double fe = f(xe);
            if(fe < fr) pts[d] = xe, val[d] = fe;
            else pts[d] = xr, val[d] = fr;
        } else if(fr < val[d - 1]) {
            pts[d] = xr, val[d] = fr;
        } else {
            auto   xc = along(fr < val[d] ? -0.5 : 0.5);
            double fc = f(xc);
            if(fc < std::min(fr, val[d])) {
                pts[d] = xc, val[d] = fc;
            } else {
                for(std::size_t i = 1; i <= d; ++i) {
                    for(std::size_t k = 0; k < d; ++k) pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
                    val[i] = f(pts[i]);
                }
            }
        }
    }
    return pts[std::min_element(val.begin(), val.end()) - val.begin()];
}

} // namespace

double dense_l1_constant(const std::vector<Element> &xs_in) {
    std::size_t n = xs_in.size();
    if(n < 2 || n > 3) throw std::invalid_argument("dense_l1_constant: n must be 2 or 3");
    Family fam;
    for(const auto &x : xs_in) {
        double nx = oracle::trace_norm(x);
        fam.xs.push_back((1.0 / nx) * x);
    }
    const int   simplex = n == 2 ? 200 : 30;
    const int   phases  = n == 2 ? 180 : 60;
    const double two_pi = 2 * M_PI;
    struct Pt {
        double              v;
        std::vector<double> prm;
    };
    std::vector<Pt> best;
    auto            keep = [&](double v, std::vector<double> prm) {
        best.push_back({v, std::move(prm)});
        if(best.size() > 64) {
            std::nth_element(best.begin(), best.begin() + 12, best.end(), [](const Pt &a, const Pt &b) { return a.v < b.v; });
            best.resize(12);
        }
    };
    std::vector<cplx> alpha(n);
    if(n == 2) {
        for(int i = 0; i <= simplex; ++i)
            for(int p = 0; p < phases; ++p) {
                double t = static_cast<double>(i) / simplex, th = two_pi * p / phases;
                alpha    = {t, std::polar(1 - t, th)};
                keep(fam.eval(alpha), {t, 1 - t, th});
            }
    } else {
        for(int i = 0; i <= simplex; ++i)
            for(int j = 0; i + j <= simplex; ++j)
                for(int p = 0; p < phases; ++p)
                    for(int q = 0; q < phases; ++q) {
                        double t1 = static_cast<double>(i) / simplex, t2 = static_cast<double>(j) / simplex, t3 = 1 - t1 - t2;
                        double a = two_pi * p / phases, b = two_pi * q / phases;
                        alpha    = {t1, std::polar(t2, a), std::polar(t3, b)};
                        keep(fam.eval(alpha), {t1, t2, t3, a, b});
                    }
    }
    std::sort(best.begin(), best.end(), [](const Pt &a, const Pt &b) { return a.v < b.v; });
    double out = best.front().v;
    auto   f   = [&](const std::vector<double> &prm) { return fam.eval(to_alpha(prm, n)); };
    for(std::size_t s = 0; s < std::min<std::size_t>(best.size(), 8); ++s) {
        auto x = nelder_mead(f, best[s].prm, 0.05);
        x      = nelder_mead(f, x, 0.005);
        out    = std::min(out, f(x));
    }
    return out;
}

std::string data_path(const std::string &name) { return std::string(VNL1_TEST_DATA_DIR) + "/" + name; }

} // namespace oracle
