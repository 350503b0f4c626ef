#include "vnl1/l1_geometry.hpp"

#include "vnl1/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>
#include <unordered_map>

namespace vnl1 {

L1Evaluator::L1Evaluator(std::span<const Element> xs, bool normalize) {
    if(xs.empty()) throw ValidationError("l1: empty family");
    const Shape &shape = xs.front().shape();
    for(const auto &x : xs) require_same_shape(x.shape(), shape, "l1 family");
    const auto &s = *shape;
    for(std::size_t k = 0; k < xs.size(); ++k) {
        double nrm = trace_norm(xs[k]);
        if(normalize && !(nrm > 0)) throw ValidationError("l1: member " + std::to_string(k + 1) + " has zero norm");
        scale_.push_back(nrm);
    }

    // Blocks on which every member agrees bitwise contribute identically; merge them.
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    std::vector<std::size_t>                                    rep;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        std::size_t   bytes = static_cast<std::size_t>(s.dim(j)) * static_cast<std::size_t>(s.dim(j)) * sizeof(cplx);
        std::uint64_t h     = 14695981039346656037ull ^ static_cast<std::uint64_t>(s.dim(j));
        for(const auto &x : xs) {
            const auto *c = reinterpret_cast<const unsigned char *>(x.block_data(j));
            for(std::size_t b = 0; b < bytes; ++b) {
                h ^= c[b];
                h *= 1099511628211ull;
            }
        }
        auto &bucket = buckets[h];
        bool  merged = false;
        for(std::size_t g : bucket) {
            std::size_t jr = rep[g];
            if(s.dim(jr) != s.dim(j)) continue;
            bool equal = std::all_of(xs.begin(), xs.end(), [&](const Element &x) { return std::memcmp(x.block_data(jr), x.block_data(j), bytes) == 0; });
            if(equal) {
                weights_[g] += s.weight(j);
                merged = true;
                break;
            }
        }
        if(merged) continue;
        bucket.push_back(rep.size());
        rep.push_back(j);
        dims_.push_back(s.dim(j));
        weights_.push_back(s.weight(j));
        offsets_.push_back(entries_);
        entries_ += static_cast<std::size_t>(s.dim(j)) * static_cast<std::size_t>(s.dim(j));
    }
    data_.resize(xs.size());
    for(std::size_t k = 0; k < xs.size(); ++k) {
        auto  &d = data_[k];
        double f = normalize ? 1.0 / scale_[k] : 1.0;
        d.resize(entries_);
        for(std::size_t g = 0; g < rep.size(); ++g) {
            std::size_t len = static_cast<std::size_t>(dims_[g]) * static_cast<std::size_t>(dims_[g]);
            const cplx *src = xs[k].block_data(rep[g]);
            for(std::size_t e = 0; e < len; ++e) d[offsets_[g] + e] = src[e] * f;
        }
    }
}

double L1Evaluator::norm_of(const std::vector<cplx> &buf) const {
    double t = 0;
    for(std::size_t g = 0; g < dims_.size(); ++g) t += weights_[g] * trace_norm_block(buf.data() + offsets_[g], dims_[g]);
    return t;
}

void L1Evaluator::axpy(std::vector<cplx> &buf, std::size_t k, cplx a) const {
    if(a == cplx(0)) return;
    const auto &d = data_[k];
    for(std::size_t e = 0; e < entries_; ++e) buf[e] += a * d[e];
}

void L1Evaluator::combine(std::span<const cplx> alpha, std::vector<cplx> &buf) const {
    buf.assign(entries_, cplx(0));
    for(std::size_t k = 0; k < alpha.size(); ++k) axpy(buf, k, alpha[k]);
}

double L1Evaluator::norm(std::span<const cplx> alpha) const {
    std::vector<cplx> buf;
    combine(alpha, buf);
    return norm_of(buf);
}

double L1Evaluator::smoothed(std::span<const cplx> alpha, double mu, std::vector<cplx> &grad) const {
    std::vector<cplx> buf;
    combine(alpha, buf);
    std::vector<cplx> m(entries_); // (X*X + mu^2)^{-1/2} X* per block, column-major
    double            f = 0;
    for(std::size_t g = 0; g < dims_.size(); ++g) {
        int    n = dims_[g];
        double w = weights_[g];
        if(n == 1) {
            cplx   x = buf[offsets_[g]];
            double r = std::sqrt(std::norm(x) + mu * mu);
            f += w * r;
            m[offsets_[g]] = w * std::conj(x) / r;
            continue;
        }
        Eigen::Map<const Matrix>                     x(buf.data() + offsets_[g], n, n);
        Eigen::SelfAdjointEigenSolver<Matrix>        es(x.adjoint() * x);
        Eigen::VectorXd                              r = (es.eigenvalues().array().max(0.0) + mu * mu).sqrt();
        f += w * r.sum();
        Eigen::Map<Matrix>(m.data() + offsets_[g], n, n) =
            w * es.eigenvectors() * r.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint() * x.adjoint();
    }
    grad.assign(alpha.size(), cplx(0));
    for(std::size_t k = 0; k < alpha.size(); ++k) {
        // c = sum_g w_g tr(M_g x_k); dF = Re(c d alpha)
        cplx c = 0;
        for(std::size_t g = 0; g < dims_.size(); ++g) {
            int n = dims_[g];
            for(int i = 0; i < n; ++i)
                for(int j = 0; j < n; ++j) c += m[offsets_[g] + static_cast<std::size_t>(j) * n + i] * data_[k][offsets_[g] + static_cast<std::size_t>(i) * n + j];
        }
        grad[k] = std::conj(c);
    }
    return f;
}

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

struct Candidate {
    double            value = std::numeric_limits<double>::infinity();
    std::vector<cplx> alpha;
};

bool lex_less(const std::vector<cplx> &a, const std::vector<cplx> &b) {
    for(std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        if(a[i].real() != b[i].real()) return a[i].real() < b[i].real();
        if(a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
    }
    return a.size() < b.size();
}

bool better(const Candidate &a, const Candidate &b) {
    if(a.value != b.value) return a.value < b.value;
    return lex_less(a.alpha, b.alpha);
}

cplx phase(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Keeps the best `cap` candidates with distinct values.
class SeedPool {
  public:
    // Members closer than `radius` (up to a common phase) compete; only the better one stays,
    // so the refinement starts from distinct basins instead of neighbouring grid points.
    explicit SeedPool(std::size_t cap, double radius = 0) : cap_(cap), radius_(radius) {}
    void offer(const Candidate &c) {
        for(const auto &e : items_)
            if(std::abs(e.value - c.value) <= 1e-13 && !lex_less(c.alpha, e.alpha)) return;
        if(radius_ > 0) {
            for(std::size_t i = 0; i < items_.size(); ++i) {
                if(distance(items_[i].alpha, c.alpha) >= radius_) continue;
                if(!better(c, items_[i])) return;
                items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i--));
            }
        }
        items_.push_back(c);
        std::sort(items_.begin(), items_.end(), better);
        if(items_.size() > cap_) items_.resize(cap_);
    }
    [[nodiscard]] const std::vector<Candidate> &items() const { return items_; }

  private:
    static double distance(const std::vector<cplx> &a, const std::vector<cplx> &b) {
        double na = 0, nb = 0;
        cplx   ip = 0;
        for(std::size_t k = 0; k < a.size(); ++k) {
            na += std::norm(a[k]);
            nb += std::norm(b[k]);
            ip += std::conj(a[k]) * b[k];
        }
        return std::sqrt(std::max(0.0, na + nb - 2 * std::abs(ip)));
    }

    std::size_t            cap_;
    double                 radius_;
    std::vector<Candidate> items_;
};

std::size_t binom(std::size_t n, std::size_t k) {
    if(k > n) return 0;
    double r = 1;
    for(std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r > 1e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(std::llround(r));
}

void compositions(int total, std::size_t parts, std::vector<int> &cur, std::vector<std::vector<int>> &out) {
    if(cur.size() + 1 == parts) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for(int c = 0; c <= total; ++c) {
        cur.push_back(c);
        compositions(total - c, parts, cur, out);
        cur.pop_back();
    }
}

struct Search {
    const L1Evaluator &ev;
    const L1Budget    &b;
    std::size_t        evaluations = 0;
    int                iterations  = 0;

    [[nodiscard]] std::vector<double> phase_set() const {
        std::vector<double> th;
        if(b.real_mode) return {0.0, std::numbers::pi};
        for(int m = 0; m < b.phases; ++m) th.push_back(kTwoPi * m / b.phases);
        return th;
    }

    Candidate refine(const Candidate &seed) {
        std::size_t         n = ev.size();
        std::vector<double> t(n), th(n);
        for(std::size_t k = 0; k < n; ++k) {
            t[k]  = std::abs(seed.alpha[k]);
            th[k] = t[k] > 0 ? std::arg(seed.alpha[k]) : 0.0;
        }
        std::vector<cplx> alpha = seed.alpha, buf, tmp;
        ev.combine(alpha, buf);
        double cur = ev.norm_of(buf);
        ++evaluations;
        double ht  = 1.0 / b.simplex_resolution;
        double hth = kTwoPi / b.phases;
        const std::vector<double> fresh = b.real_mode ? std::vector<double>{0.0, std::numbers::pi}
                                                      : std::vector<double>{0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
        for(int it = 0; it < b.refine_steps; ++it) {
            ++iterations;
            double      best = cur;
            std::size_t bk = 0, bl = 0;
            double      bval_t = 0, bval_th = 0, bval_th2 = 0;
            int         kind   = -1;
            auto        eval2  = [&](std::size_t k, cplx ak, std::size_t l, cplx al) {
                tmp = buf;
                ev.axpy(tmp, k, ak - alpha[k]);
                if(l != k) ev.axpy(tmp, l, al - alpha[l]);
                ++evaluations;
                return ev.norm_of(tmp);
            };
            for(std::size_t k = 0; k < n; ++k) {
                if(t[k] <= 0) continue;
                double d = std::min(ht, t[k]);
                for(std::size_t l = 0; l < n; ++l) {
                    if(l == k) continue;
                    const std::vector<double> &phs = t[l] > 0 ? std::vector<double>{th[l]} : fresh;
                    for(double ph : phs) {
                        double v = eval2(k, (t[k] - d) * phase(th[k]), l, (t[l] + d) * phase(ph));
                        if(v < best) {
                            best = v, bk = k, bl = l, bval_t = d, bval_th = ph, kind = 0;
                        }
                    }
                }
                std::vector<double> moves = b.real_mode ? std::vector<double>{th[k] + std::numbers::pi}
                                                        : std::vector<double>{th[k] + hth, th[k] - hth};
                for(double ph : moves) {
                    double v = eval2(k, t[k] * phase(ph), k, 0);
                    if(v < best) {
                        best = v, bk = k, bval_th2 = ph, kind = 1;
                    }
                }
            }
            if(kind < 0 || best >= cur - 1e-15) {
                ht *= 0.5;
                hth *= 0.5;
                if(ht < 1e-10) break;
                continue;
            }
            if(kind == 0) {
                t[bk] -= bval_t;
                if(t[bl] <= 0) th[bl] = bval_th;
                t[bl] += bval_t;
            } else {
                th[bk] = b.real_mode ? std::fmod(bval_th2, kTwoPi) : bval_th2;
            }
            for(std::size_t k : {bk, bl}) {
                cplx a = t[k] * phase(th[k]);
                ev.axpy(buf, k, a - alpha[k]);
                alpha[k] = a;
            }
            cur = ev.norm_of(buf);
        }
        // Recompute from scratch so accumulated updates do not drift.
        double s = 0;
        for(const auto &a : alpha) s += std::abs(a);
        for(auto &a : alpha) a /= s;
        return polish({ev.norm(alpha), alpha});
    }

    // Quasi-Newton descent on the smoothed ratio sum_g w_g tr (X*X + mu^2)^{1/2} / sum_k (|alpha_k|^2 + mu^2)^{1/2}
    // with mu decreasing; coordinate moves stall on the kinks of the trace norm, the smoothed problem has none.
    Candidate polish(const Candidate &start) {
        std::size_t n   = ev.size();
        std::size_t dim = 2 * n;
        auto        unpack = [&](const Eigen::VectorXd &p) {
            std::vector<cplx> a(n);
            for(std::size_t k = 0; k < n; ++k) a[k] = b.real_mode ? cplx(p[k], 0) : cplx(p[k], p[n + k]);
            return a;
        };
        std::vector<cplx> gF;
        auto              objective = [&](const Eigen::VectorXd &p, double mu, Eigen::VectorXd &grad) {
            auto   a = unpack(p);
            double F = ev.smoothed(a, mu, gF);
            double S = 0;
            for(const auto &ak : a) S += std::sqrt(std::norm(ak) + mu * mu);
            ++evaluations;
            grad.setZero(static_cast<Eigen::Index>(dim));
            for(std::size_t k = 0; k < n; ++k) {
                double r     = std::sqrt(std::norm(a[k]) + mu * mu);
                grad[k]      = (gF[k].real() * S - F * a[k].real() / r) / (S * S);
                grad[n + k]  = b.real_mode ? 0.0 : (gF[k].imag() * S - F * a[k].imag() / r) / (S * S);
            }
            return F / S;
        };
        Eigen::VectorXd p(dim);
        for(std::size_t k = 0; k < n; ++k) {
            p[k]     = start.alpha[k].real();
            p[n + k] = b.real_mode ? 0.0 : start.alpha[k].imag();
        }
        Candidate best = start;
        for(double mu = 1e-3; mu >= 1e-9; mu *= 0.1) {
            Eigen::VectorXd g, gn, pn;
            double          f = objective(p, mu, g);
            Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
            for(int it = 0; it < b.refine_steps; ++it) {
                ++iterations;
                Eigen::VectorXd d = -H * g;
                if(g.dot(d) >= 0) {
                    H.setIdentity();
                    d = -g;
                }
                double step = 1, fn = f;
                bool   ok   = false;
                for(int ls = 0; ls < 40; ++ls, step *= 0.5) {
                    pn = p + step * d;
                    fn = objective(pn, mu, gn);
                    if(fn <= f + 1e-4 * step * g.dot(d)) {
                        ok = true;
                        break;
                    }
                }
                if(!ok || f - fn < 1e-16) break;
                Eigen::VectorXd sv = pn - p, yv = gn - g;
                double          sy = sv.dot(yv);
                if(sy > 1e-300) {
                    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
                    H = (I - sv * yv.transpose() / sy) * H * (I - yv * sv.transpose() / sy) + sv * sv.transpose() / sy;
                }
                p = pn, g = gn, f = fn;
            }
            auto   a = unpack(p);
            double s = 0;
            for(const auto &ak : a) s += std::abs(ak);
            if(s <= 0) break;
            for(auto &ak : a) ak /= s;
            for(std::size_t k = 0; k < n; ++k) {
                p[k]     = a[k].real();
                p[n + k] = a[k].imag();
            }
            Candidate c{ev.norm(a), a};
            if(better(c, best)) best = c;
        }
        return best;
    }
};

Candidate full_grid(const L1Evaluator &ev, const L1Budget &b, std::size_t &evals, SeedPool &pool) {
    std::size_t                   n = ev.size();
    std::vector<std::vector<int>> comps;
    std::vector<int>              cur;
    compositions(b.simplex_resolution, n, cur, comps);
    std::vector<double> phs;
    if(b.real_mode) phs = {0.0, std::numbers::pi};
    else
        for(int m = 0; m < b.phases; ++m) phs.push_back(kTwoPi * m / b.phases);
    std::size_t combos = 1;
    for(std::size_t k = 1; k < n; ++k) combos *= phs.size();
    std::vector<SeedPool> local(combos, SeedPool(static_cast<std::size_t>(b.seeds_kept), 3.0 / b.simplex_resolution));
    parallel_for(combos, [&](std::size_t c) {
        std::vector<cplx> rot(n, cplx(1));
        std::size_t       rest = c;
        for(std::size_t k = 1; k < n; ++k) {
            rot[k] = phase(phs[rest % phs.size()]);
            rest /= phs.size();
        }
        std::vector<cplx> alpha(n), buf;
        for(const auto &comp : comps) {
            for(std::size_t k = 0; k < n; ++k) alpha[k] = rot[k] * (static_cast<double>(comp[k]) / b.simplex_resolution);
            ev.combine(alpha, buf);
            local[c].offer({ev.norm_of(buf), alpha});
        }
    });
    evals += combos * comps.size();
    for(const auto &l : local)
        for(const auto &c : l.items()) pool.offer(c);
    return pool.items().front();
}

} // namespace

L1Certificate l1_lower_constant(std::span<const Element> xs, const L1Budget &budget) {
    if(budget.phases < 1 || budget.simplex_resolution < 1) throw ValidationError("l1 budget: phases and resolution must be positive");
    L1Evaluator   ev(xs, budget.normalize);
    std::size_t   n = ev.size();
    L1Certificate cert;
    cert.budget = budget;
    Search   search{ev, budget};
    SeedPool pool(static_cast<std::size_t>(std::max(1, budget.seeds_kept)), 3.0 / budget.simplex_resolution);

    for(std::size_t k = 0; k < n; ++k) {
        std::vector<cplx> alpha(n, cplx(0));
        alpha[k] = 1;
        pool.offer({ev.norm(alpha), alpha});
        ++search.evaluations;
    }
    std::size_t phase_count = budget.real_mode ? 2 : static_cast<std::size_t>(budget.phases);
    std::size_t grid        = binom(static_cast<std::size_t>(budget.simplex_resolution) + n - 1, n - 1);
    for(std::size_t k = 1; k < n && grid <= budget.max_grid_points; ++k) grid *= phase_count;

    if(n == 1) {
        cert.method = "single";
    } else if(grid <= budget.max_grid_points) {
        cert.method      = "full-grid";
        cert.grid_points = grid;
        full_grid(ev, budget, search.evaluations, pool);
    } else {
        cert.method   = "pairs+multistart";
        auto phs      = search.phase_set();
        int  R        = budget.simplex_resolution;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for(std::size_t k = 0; k < n; ++k)
            for(std::size_t l = k + 1; l < n; ++l) pairs.emplace_back(k, l);
        std::vector<SeedPool> local(pairs.size(), SeedPool(static_cast<std::size_t>(budget.seeds_kept), 3.0 / budget.simplex_resolution));
        parallel_for(pairs.size(), [&](std::size_t p) {
            auto [k, l] = pairs[p];
            std::vector<cplx> alpha(n, cplx(0)), buf(ev.entries());
            for(int c = 1; c < R; ++c)
                for(double ph : phs) {
                    double t = static_cast<double>(c) / R;
                    std::fill(buf.begin(), buf.end(), cplx(0));
                    alpha[k] = t;
                    alpha[l] = (1 - t) * phase(ph);
                    ev.axpy(buf, k, alpha[k]);
                    ev.axpy(buf, l, alpha[l]);
                    local[p].offer({ev.norm_of(buf), alpha});
                }
        });
        cert.grid_points = pairs.size() * static_cast<std::size_t>(R - 1) * phs.size();
        search.evaluations += cert.grid_points;
        for(const auto &l : local)
            for(const auto &c : l.items()) pool.offer(c);

        std::mt19937_64                        rng(budget.seed);
        std::exponential_distribution<double>  expo(1.0);
        std::uniform_real_distribution<double> uni(0.0, kTwoPi);
        for(int s = 0; s < budget.random_starts; ++s) {
            std::vector<cplx> alpha(n);
            double            sum = 0;
            std::vector<double> t(n);
            for(auto &v : t) sum += (v = expo(rng));
            for(std::size_t k = 0; k < n; ++k) {
                double th = budget.real_mode ? (uni(rng) < std::numbers::pi ? 0.0 : std::numbers::pi) : uni(rng);
                alpha[k]  = (t[k] / sum) * phase(th);
            }
            pool.offer({ev.norm(alpha), alpha});
            ++search.evaluations;
        }
    }

    Candidate best = pool.items().front();
    if(n > 1)
        for(const auto &seed : pool.items()) {
            Candidate c = search.refine(seed);
            if(better(c, best)) best = c;
        }
    cert.r_estimate        = best.value;
    cert.witness_alpha     = best.alpha;
    cert.evaluations       = search.evaluations;
    cert.refine_iterations = search.iterations;
    return cert;
}

L1Certificate l1_lower_constant(std::span<const Functional> phis, const L1Budget &budget) {
    std::vector<Element> xs;
    for(const auto &p : phis) xs.push_back(p.density());
    return l1_lower_constant(xs, budget);
}

L1Certificate tail_delta_schedule(std::span<const Element> xs, const L1Budget &budget) {
    if(xs.size() < 2) throw ValidationError("tail_delta_schedule: prefix length must be >= 2");
    L1Certificate cert = l1_lower_constant(xs, budget);
    cert.delta_schedule.clear();
    for(std::size_t m = 0; m < xs.size(); ++m) {
        double r = m == 0 ? cert.r_estimate : l1_lower_constant(xs.subspan(m), budget).r_estimate;
        cert.delta_schedule.push_back(std::clamp(1.0 - r, 0.0, 1.0));
    }
    // Evidence for delta_m -> 0: the later half never exceeds the earlier half, and the last
    // nontrivial tail (length 2) is below 0.1.
    const auto &d    = cert.delta_schedule;
    std::size_t half = d.size() / 2;
    double      first = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(half, 1)));
    double      later = *std::max_element(d.begin() + static_cast<std::ptrdiff_t>(half), d.end() - 1);
    cert.almost_isometric_trend = later <= first + 1e-9 && d[d.size() - 2] <= 0.1;
    return cert;
}

L1Certificate tail_delta_schedule(std::span<const Functional> phis, const L1Budget &budget) {
    std::vector<Element> xs;
    for(const auto &p : phis) xs.push_back(p.density());
    return tail_delta_schedule(xs, budget);
}

Element block_element(std::span<const Element> xs, const Block &b) {
    Element y(xs.front().shape());
    for(std::size_t i = 0; i < b.indices.size(); ++i) {
        Element t = xs[b.indices[i]];
        t *= b.lambda[i];
        y += t;
    }
    return y;
}

BlockSpec james_blocks(std::span<const Element> xs, double r, std::span<const double> target_delta, const L1Budget &budget,
                       std::size_t max_block_len) {
    if(!(r > 0 && r <= 1)) throw ValidationError("james_blocks: r must lie in ]0,1]");
    BlockSpec spec;
    spec.r               = r;
    spec.requested_delta.assign(target_delta.begin(), target_delta.end());
    double tol           = 1e-9;
    auto   full          = l1_lower_constant(xs, budget);
    if(full.r_estimate < r - tol) throw PreconditionError("james_blocks: measured constant below r", full.r_estimate);

    std::vector<double> scale;
    for(const auto &x : xs) scale.push_back(trace_norm(x));
    std::vector<std::size_t> pool(xs.size());
    for(std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    auto family = [&](std::span<const std::size_t> idx) {
        std::vector<Element> f;
        for(std::size_t i : idx) f.push_back(xs[i]);
        return f;
    };

    for(std::size_t m = 0; m < target_delta.size(); ++m) {
        if(pool.empty()) {
            spec.diagnostic = "indices exhausted after " + std::to_string(spec.blocks.size()) + " blocks";
            break;
        }
        double k_pool = m == 0 ? full.r_estimate : l1_lower_constant(family(pool), budget).r_estimate;
        double target = k_pool * (1 + target_delta[m]);
        Block  best;
        double best_ratio = std::numeric_limits<double>::infinity();
        bool   hit        = false;
        for(std::size_t len = 1; len <= std::min(max_block_len, pool.size()); ++len) {
            std::span<const std::size_t> pre(pool.data(), len);
            auto                         fam = family(pre);
            auto                         c   = l1_lower_constant(fam, budget);
            if(c.r_estimate / k_pool < best_ratio) {
                best_ratio = c.r_estimate / k_pool;
                best.indices.assign(pre.begin(), pre.end());
                best.lambda.clear();
                for(std::size_t i = 0; i < len; ++i) best.lambda.push_back(c.witness_alpha[i] / (scale[pre[i]] * c.r_estimate));
                best.combination_norm = c.r_estimate;
                best.pool_constant    = k_pool;
            }
            if(c.r_estimate <= target + 1e-12) {
                hit = true;
                break;
            }
        }
        if(!hit) spec.diagnostic += "block " + std::to_string(m + 1) + " missed its target within " + std::to_string(max_block_len) + " indices; ";
        pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(best.indices.size()));
        spec.blocks.push_back(std::move(best));
    }
    spec.complete = spec.blocks.size() == target_delta.size();

    bool ok = spec.complete;
    for(const auto &b : spec.blocks) {
        double s = 0;
        for(const auto &l : b.lambda) s += std::abs(l);
        if(s > 1 / r + tol) ok = false;
    }
    if(spec.blocks.size() >= 2) {
        std::vector<Element> ys;
        for(const auto &b : spec.blocks) ys.push_back(block_element(xs, b));
        spec.measured_delta = tail_delta_schedule(ys, budget).delta_schedule;
    } else {
        spec.measured_delta.assign(spec.blocks.size(), 0.0);
    }
    for(std::size_t m = 0; m < spec.measured_delta.size() && m < target_delta.size(); ++m)
        if(spec.measured_delta[m] > target_delta[m] + tol) ok = false;
    spec.certified = ok;
    return spec;
}

L1Certificate perturbation_certificate(const L1Certificate &x_cert, std::span<const Element> xs, std::span<const Element> ys,
                                       const L1Budget &budget) {
    std::size_t n = xs.size();
    if(ys.size() != n || x_cert.delta_schedule.size() != n)
        throw ValidationError("perturbation_certificate: xs, ys and the schedule must have equal length");
    std::vector<Element> sums;
    std::vector<double>  ratio(n), rel(n);
    for(std::size_t i = 0; i < n; ++i) {
        double nx = trace_norm(xs[i]);
        if(!(nx > 0)) throw ValidationError("perturbation_certificate: x_" + std::to_string(i + 1) + " is zero");
        Element s  = xs[i] + ys[i];
        double  ns = trace_norm(s);
        if(!(ns > 0)) throw ValidationError("perturbation_certificate: x_" + std::to_string(i + 1) + " + y_" + std::to_string(i + 1) + " is zero");
        ratio[i] = std::abs(1 - nx / ns);
        rel[i]   = trace_norm(ys[i]) / ns;
        sums.push_back(std::move(s));
    }
    L1Certificate out = x_cert;
    out.budget        = budget;
    double sup_ratio = 0, sup_rel = 0;
    for(std::size_t i = n; i-- > 0;) {
        sup_ratio                 = std::max(sup_ratio, ratio[i]);
        sup_rel                   = std::max(sup_rel, rel[i]);
        out.delta_schedule[i]     = x_cert.delta_schedule[i] + sup_ratio + sup_rel;
    }
    if(n >= 2) {
        auto measured      = tail_delta_schedule(sums, budget);
        out.measured_delta = measured.delta_schedule;
        out.r_estimate     = measured.r_estimate;
        out.witness_alpha  = measured.witness_alpha;
        out.validated      = true;
        for(std::size_t i = 0; i < n; ++i)
            if(out.measured_delta[i] > out.delta_schedule[i] + 1e-9) out.validated = false;
    }
    return out;
}

nlohmann::json budget_to_json(const L1Budget &b) {
    return nlohmann::json{{"phases", b.phases},
                          {"simplex_resolution", b.simplex_resolution},
                          {"refine_steps", b.refine_steps},
                          {"max_grid_points", b.max_grid_points},
                          {"random_starts", b.random_starts},
                          {"seeds_kept", b.seeds_kept},
                          {"real_mode", b.real_mode},
                          {"normalize", b.normalize},
                          {"seed", b.seed}};
}

L1Budget budget_from_json(const nlohmann::json &j, L1Budget b) {
    if(j.is_null()) return b;
    if(!j.is_object()) throw ValidationError("budget must be an object");
    b.phases             = j.value("phases", b.phases);
    b.simplex_resolution = j.value("simplex_resolution", b.simplex_resolution);
    b.refine_steps       = j.value("refine_steps", b.refine_steps);
    b.max_grid_points    = j.value("max_grid_points", b.max_grid_points);
    b.random_starts      = j.value("random_starts", b.random_starts);
    b.seeds_kept         = j.value("seeds_kept", b.seeds_kept);
    b.real_mode          = j.value("real_mode", b.real_mode);
    b.normalize          = j.value("normalize", b.normalize);
    b.seed               = j.value("seed", b.seed);
    return b;
}

nlohmann::json certificate_to_json(const L1Certificate &c) {
    nlohmann::json alpha = nlohmann::json::array();
    for(const auto &a : c.witness_alpha) alpha.push_back({a.real(), a.imag()});
    nlohmann::json j{{"r", c.r_estimate},
                     {"delta", c.delta_schedule},
                     {"witness_alpha", alpha},
                     {"budget", budget_to_json(c.budget)},
                     {"method", c.method},
                     {"grid_points", c.grid_points},
                     {"evaluations", c.evaluations},
                     {"refine_iterations", c.refine_iterations},
                     {"almost_isometric_trend", c.almost_isometric_trend}};
    if(!c.measured_delta.empty()) {
        j["measured_delta"] = c.measured_delta;
        j["validated"]      = c.validated;
    }
    return j;
}

nlohmann::json blockspec_to_json(const BlockSpec &b) {
    nlohmann::json blocks = nlohmann::json::array();
    for(const auto &blk : b.blocks) {
        nlohmann::json lam = nlohmann::json::array();
        for(const auto &l : blk.lambda) lam.push_back({l.real(), l.imag()});
        std::vector<std::size_t> one_based;
        for(auto i : blk.indices) one_based.push_back(i + 1);
        blocks.push_back({{"indices", one_based}, {"lambda", lam}, {"combination_norm", blk.combination_norm}, {"pool_constant", blk.pool_constant}});
    }
    return nlohmann::json{{"r", b.r},
                          {"blocks", blocks},
                          {"requested_delta", b.requested_delta},
                          {"measured_delta", b.measured_delta},
                          {"complete", b.complete},
                          {"certified", b.certified},
                          {"diagnostic", b.diagnostic}};
}

} // namespace vnl1
