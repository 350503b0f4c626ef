#include "vnl1/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>

namespace vnl1 {

namespace {

std::string hex_digest(std::initializer_list<const Element *> xs) {
    std::vector<const Element *> v(xs);
    char                         buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(v)));
    return buf;
}

BoundReport make_report(std::string label, double lhs, double rhs, const std::string &dig) {
    return {std::move(label), lhs, rhs, rhs - lhs, dig};
}

void require_contraction(const Element &a, const char *name, double tol) {
    double n = operator_norm(a);
    if(n > 1 + tol) throw ValidationError(std::string(name) + " is outside the unit ball (norm " + std::to_string(n) + ")");
}

Element hermitian_part(const Element &x) {
    Element h = x + x.adjoint();
    h *= 0.5;
    return h;
}

double mass(const Element &density, const Projection &p) { return trace_product(density, p.element()).real(); }

} // namespace

std::array<BoundReport, 3> bound_A4(const Functional &omega, const Element &a, const Element &b, double tol) {
    require_same_shape(omega.shape(), a.shape(), "bound_A4");
    require_same_shape(omega.shape(), b.shape(), "bound_A4");
    const auto &s = *omega.shape();
    if(tol < 0) tol = s.tol();
    if(!is_positive(omega, s.tol(omega.norm()))) throw ValidationError("bound_A4: omega is not positive");
    require_contraction(a, "bound_A4: a", tol);
    require_contraction(b, "bound_A4: b", tol);
    const Element &D   = omega.density();
    double         w   = omega.norm();
    double         c   = std::sqrt(2 * w);
    double         ga  = std::abs(w - omega(a));
    double         gb  = std::abs(w - omega(b));
    std::string    dig = hex_digest({&D, &a, &b});
    return {make_report("a.omega", trace_norm(a * D - D), c * std::sqrt(ga), dig),
            make_report("omega.a", trace_norm(D * a - D), c * std::sqrt(ga), dig),
            make_report("b.omega.a", trace_norm(b * D * a - D), c * (std::sqrt(ga) + std::sqrt(gb)), dig)};
}

std::array<BoundReport, 3> bound_A3(const Functional &phi, const Element &a, const Element &b, double tol) {
    require_same_shape(phi.shape(), a.shape(), "bound_A3");
    require_same_shape(phi.shape(), b.shape(), "bound_A3");
    const auto &s = *phi.shape();
    if(tol < 0) tol = s.tol();
    require_contraction(a, "bound_A3: a", tol);
    require_contraction(b, "bound_A3: b", tol);
    const Element &D   = phi.density();
    const Element &A   = phi.abs_density();
    double         w   = phi.norm();
    double         c   = std::sqrt(2 * w);
    std::string    dig = hex_digest({&D, &a, &b});
    double         g4  = std::abs(w - phi.adjoint_value(a));
    double         g5  = std::abs(w - phi(a));
    double         ga  = std::abs(w - phi.abs_value(a));
    double         gb  = std::abs(w - phi.abs_adjoint_value(b));
    return {make_report("phi-a|phi|", trace_norm(D - a * A), c * std::sqrt(g4), dig),
            make_report("|phi|-a.phi", trace_norm(A - a * D), c * std::sqrt(g5), dig),
            make_report("b.phi.a", trace_norm(b * D * a - D), c * (std::sqrt(ga) + std::sqrt(gb)), dig)};
}

CompressResult compress_normalize(const Functional &sigma, const Projection &l, const Projection &r, double beta, double tol) {
    require_same_shape(sigma.shape(), l.shape(), "compress_normalize");
    require_same_shape(sigma.shape(), r.shape(), "compress_normalize");
    const auto &s = *sigma.shape();
    if(tol < 0) tol = s.tol();
    if(!(beta > 0 && beta < 1)) throw ValidationError("compress_normalize: beta must lie in ]0,1[");
    if(sigma.norm() > 1 + tol) throw ValidationError("compress_normalize: ||sigma|| > 1");
    CompressResult out;
    out.beta       = beta;
    out.right_mass = mass(sigma.abs_density(), r);
    out.left_mass  = mass(sigma.abs_adjoint_density(), l);
    double low     = std::min(out.right_mass, out.left_mass);
    if(low < 1 - beta - tol) throw PreconditionError("compress_normalize: support mass below 1 - beta", low);
    Functional lsr = compress(sigma, l, r);
    if(lsr.norm() <= tol) throw PreconditionError("compress_normalize: l sigma r vanishes", lsr.norm());
    out.tau    = scaled(lsr, 1.0 / lsr.norm());
    out.report = make_report("compress", distance(sigma, out.tau), 5 * std::sqrt(beta),
                             hex_digest({&sigma.density(), &l.element(), &r.element()}));
    return out;
}

double DeltaSchedule::value(std::size_t k) const { return std::exp2(log2_values.at(k - 1)); }

std::vector<double> DeltaSchedule::values() const {
    std::vector<double> v;
    for(double l : log2_values) v.push_back(std::exp2(l));
    return v;
}

namespace {

// log2(d + (32 k d)^{1/2}) for d = 2^ld, stable for very negative ld.
double log2_step(double ld, int k) {
    double root = 0.5 * (std::log2(32.0 * k) + ld);
    return root + std::log2(1 + std::exp2(ld - root));
}

} // namespace

bool DeltaSchedule::replay() const {
    if(log2_values.empty() || std::abs(std::exp2(log2_values.front()) - epsilon) > 1e-15) return false;
    for(std::size_t k = 1; k < log2_values.size(); ++k) {
        if(!(log2_values[k] < log2_values[k - 1])) return false;
        if(!(log2_step(log2_values[k], static_cast<int>(k)) < log2_values[k - 1])) return false;
    }
    return true;
}

DeltaSchedule delta_schedule(int n, double eps) {
    if(n < 1) throw ValidationError("delta_schedule: n must be >= 1");
    if(!(eps > 0 && eps < 1)) throw ValidationError("delta_schedule: eps must lie in ]0,1[");
    DeltaSchedule d;
    d.epsilon = eps;
    d.log2_values.push_back(std::log2(eps));
    for(int k = 1; k < n; ++k) {
        double prev = d.log2_values.back();
        // smallest integer m with log2_step(-m, k) < prev; the margin keeps the strict inequality robust
        double m = std::max(1.0, std::floor(2 * (0.5 * std::log2(32.0 * k) - prev)) - 4);
        while(!(log2_step(-m, k) < prev - 1e-9)) m += 1;
        d.log2_values.push_back(-m);
    }
    return d;
}

std::vector<Projection> positive_split(std::vector<Element> F, const Projection &e, double delta) {
    std::size_t             m = F.size();
    std::vector<Projection> out(m);
    if(m == 0) return out;
    Projection corner = e;
    for(auto &f : F) f = hermitian_part(corner.element() * f * corner.element());
    for(std::size_t top = m; top-- > 0;) {
        if(top == 0) {
            double nrm = operator_norm(F[0]);
            out[0]     = nrm > 0 ? spectral_projection(F[0], delta * nrm) : Projection::zero(e.shape());
            break;
        }
        Element mean(F[0].shape());
        for(std::size_t k = 0; k < top; ++k) mean += F[k];
        mean *= 1.0 / static_cast<double>(top);
        Element diff = hermitian_part(mean - F[top]);
        double  nrm  = operator_norm(diff);
        if(nrm == 0) {
            out[top] = Projection::zero(e.shape());
            continue;
        }
        Projection plus  = spectral_projection(diff, delta * nrm);
        out[top]         = spectral_projection(-1.0 * diff, delta * nrm);
        corner           = plus;
        for(std::size_t k = 0; k < top; ++k) F[k] = hermitian_part(corner.element() * F[k] * corner.element());
    }
    return out;
}

ExtractionResult finite_orthogonal_extraction(std::span<const Functional> phis, const Projection &s, const Projection &t, double eps,
                                              const ExtractionOptions &opt) {
    std::size_t n = phis.size();
    if(n == 0) throw ValidationError("extraction: empty family");
    if(!(eps > 0 && eps < 1)) throw ValidationError("extraction: eps must lie in ]0,1[");
    const Shape &shape = phis.front().shape();
    require_same_shape(shape, s.shape(), "extraction");
    require_same_shape(shape, t.shape(), "extraction");
    const double     tol = shape->tol();
    ExtractionResult res;
    res.epsilon = eps;

    std::vector<Functional> c;
    std::vector<Element>    cd;
    for(std::size_t k = 0; k < n; ++k) {
        require_same_shape(shape, phis[k].shape(), "extraction");
        if(phis[k].norm() > 1 + tol) throw ValidationError("extraction: phi_" + std::to_string(k + 1) + " outside the unit ball");
        c.push_back(compress(phis[k], t, s));
        if(!(c.back().norm() > 1e-12 * shape->tau_unit()))
            throw PreconditionError("extraction: t phi_" + std::to_string(k + 1) + " s vanishes", c.back().norm());
        cd.push_back(c.back().density());
    }
    L1Budget raw  = opt.budget;
    raw.normalize = false;
    res.measured_span_constant = n == 1 ? c[0].norm() : l1_lower_constant(cd, raw).r_estimate;
    double gate                = opt.gate_delta < 0 ? eps : opt.gate_delta;
    if(1 - res.measured_span_constant > gate)
        throw PreconditionError("extraction: compressed family is not (1-delta)-isometric", res.measured_span_constant);
    auto sched            = delta_schedule(static_cast<int>(n), eps);
    res.theory_delta_log2 = sched.log2_values.back();
    double defect         = 1 - res.measured_span_constant;
    res.theory_gate_met   = defect <= 0 || std::log2(defect) < res.theory_delta_log2;

    std::vector<Element> P, Q;
    for(const auto &f : c) {
        P.push_back((1.0 / f.norm()) * f.abs_density());
        Q.push_back((1.0 / f.norm()) * f.abs_adjoint_density());
    }
    double delta = opt.delta_start > 0 ? opt.delta_start : std::min(eps, 0.5) / static_cast<double>(n);
    struct Attempt {
        std::vector<Projection> p, q;
        std::vector<Functional> psi;
        std::vector<double>     dist;
        double                  max_dist = std::numeric_limits<double>::infinity();
    } best;
    bool have_best = false;
    for(; delta >= opt.delta_floor; delta *= 0.5) {
        SearchLogEntry entry;
        entry.delta = delta;
        Attempt a;
        a.p            = positive_split(P, s, delta);
        a.q            = positive_split(Q, t, delta);
        entry.min_mass = 1;
        bool ok        = true;
        for(std::size_t k = 0; k < n && ok; ++k) {
            entry.min_mass = std::min({entry.min_mass, mass(P[k], a.p[k]), mass(Q[k], a.q[k])});
            Functional z   = compress(phis[k], a.q[k], a.p[k]);
            if(!(z.norm() > 1e-12 * shape->tau_unit())) {
                ok = false;
                break;
            }
            a.psi.push_back(scaled(z, 1.0 / z.norm()));
            a.dist.push_back(distance(phis[k], a.psi.back()));
        }
        if(ok) {
            a.max_dist = *std::max_element(a.dist.begin(), a.dist.end());
            for(std::size_t i = 0; i < n && ok; ++i)
                for(std::size_t j = i + 1; j < n && ok; ++j)
                    ok = projections_orthogonal(a.p[i], a.p[j], tol) && projections_orthogonal(a.q[i], a.q[j], tol) &&
                         are_orthogonal(a.psi[i], a.psi[j], tol) && is_orthogonal_elements(a.psi[i].density(), a.psi[j].density(), tol);
            entry.orthogonal = ok;
        }
        entry.max_distance = a.max_dist;
        entry.accepted     = ok && a.max_dist < eps;
        res.log.push_back(entry);
        if(ok && (!have_best || a.max_dist < best.max_dist)) {
            best      = std::move(a);
            have_best = true;
        }
        if(entry.accepted) break;
    }
    for(std::size_t k = 1; k <= n; ++k) res.indices.push_back(k);
    if(have_best) {
        res.right     = std::move(best.p);
        res.left      = std::move(best.q);
        res.outputs   = std::move(best.psi);
        res.distances = std::move(best.dist);
        res.certified = best.max_dist < eps;
    }
    if(!res.certified)
        res.diagnostic = have_best ? "delta search exhausted; best max distance " + std::to_string(best.max_dist)
                                   : "delta search exhausted without an orthogonal candidate";
    return res;
}

WitnessResult positive_witnesses(std::span<const Functional> phis, double r, double eps, bool selfadjoint_mode, const WitnessOptions &opt) {
    if(phis.empty()) throw ValidationError("positive_witnesses: empty family");
    if(!(r > 0 && r <= 1)) throw ValidationError("positive_witnesses: r must lie in ]0,1]");
    if(!(eps > 0 && eps < 1)) throw ValidationError("positive_witnesses: eps must lie in ]0,1[");
    const Shape &shape = phis.front().shape();
    for(const auto &p : phis) {
        require_same_shape(shape, p.shape(), "positive_witnesses");
        if(std::abs(p.norm() - 1) > 1e-9) throw ValidationError("positive_witnesses: functionals must be normalized");
        if(selfadjoint_mode && selfadjoint_defect(p.density()) > shape->tol())
            throw ValidationError("positive_witnesses: selfadjoint mode needs selfadjoint functionals");
    }
    WitnessResult res;
    res.selfadjoint = selfadjoint_mode;
    res.threshold   = selfadjoint_mode ? (1 - eps) * r : (1 - eps) * r * r;
    L1Budget budget = opt.budget;
    budget.real_mode = budget.real_mode || selfadjoint_mode;
    res.measured_r  = l1_lower_constant(phis, budget).r_estimate;
    if(res.measured_r < r - opt.tol) throw PreconditionError("positive_witnesses: measured span constant below r", res.measured_r);

    Projection               s_cur = Projection::identity(shape), t_cur = Projection::identity(shape);
    std::vector<std::size_t> pool(phis.size());
    for(std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    for(std::size_t step = 0; step < opt.count; ++step) {
        double eps_n = eps * std::ldexp(1.0, -static_cast<int>(step) - 1);
        // Members still visible inside the remaining corner.
        std::vector<std::size_t> live;
        std::vector<Element>     family;
        for(std::size_t m : pool) {
            Element c  = t_cur.element() * phis[m].density() * s_cur.element();
            double  nc = trace_norm(c);
            if(nc > 1e-9) {
                live.push_back(m);
                family.push_back((1.0 / nc) * c);
            }
        }
        if(live.empty()) {
            res.diagnostic = "pool exhausted after " + std::to_string(step) + " witnesses";
            break;
        }
        double k_pool = family.size() == 1 ? 1.0 : l1_lower_constant(family, budget).r_estimate;
        std::vector<double> targets(std::min(opt.max_blocks, family.size()), eps_n * eps_n / 4);
        BlockSpec blocks = james_blocks(family, std::min(k_pool, 1.0), targets, budget);
        std::vector<Functional> block_fns;
        for(const auto &b : blocks.blocks) block_fns.push_back(from_density(block_element(family, b)));
        ExtractionOptions eo;
        eo.gate_delta = 1.0; // blocks are measured by the blocking step itself
        eo.budget     = budget;
        auto ext      = finite_orthogonal_extraction(block_fns, s_cur, t_cur, std::max(eps_n, 1e-6), eo);
        if(ext.right.empty()) {
            res.diagnostic = "extraction produced no orthogonal candidate at witness " + std::to_string(step + 1);
            break;
        }

        // Pick the block whose best member scores highest, breaking near-ties by the mass it takes from the rest of the pool.
        double      best_score = -1, best_load = 0;
        std::size_t best_block = 0, best_member = 0;
        Element     best_a, best_b;
        for(std::size_t j = 0; j < blocks.blocks.size(); ++j) {
            const Projection &pj = ext.right[j];
            const Projection &qj = ext.left[j];
            Element           a  = pj.element(), b = qj.element();
            if(selfadjoint_mode) {
                Element dj = hermitian_part(pj.element() * block_fns[j].density() * pj.element());
                double  nd = operator_norm(dj);
                if(nd > 0) {
                    auto plus  = spectral_projection(dj, kTieRel * nd);
                    auto minus = spectral_projection(-1.0 * dj, kTieRel * nd);
                    a          = plus.element() + minus.element(); // |x| for the sign element x = plus - minus
                    b          = a;
                }
            }
            double      score = -1;
            std::size_t member = 0;
            for(std::size_t i : blocks.blocks[j].indices) {
                std::size_t m  = live[i];
                double      va = trace_product(phis[m].abs_density(), a).real();
                double      vb = trace_product(phis[m].abs_adjoint_density(), b).real();
                double      v  = std::min(va, vb);
                if(v > score) {
                    score  = v;
                    member = m;
                }
            }
            double load = 0;
            for(std::size_t m : live) {
                bool in_block = false;
                for(std::size_t i : blocks.blocks[j].indices) in_block |= live[i] == m;
                if(!in_block) load += mass(phis[m].abs_density(), pj) + mass(phis[m].abs_adjoint_density(), qj);
            }
            if(score > best_score + 1e-12 || (std::abs(score - best_score) <= 1e-12 && load < best_load)) {
                best_score  = score;
                best_load   = load;
                best_block  = j;
                best_member = member;
                best_a      = a;
                best_b      = b;
            }
        }
        res.indices.push_back(best_member + 1);
        res.attained_a.push_back(trace_product(phis[best_member].abs_density(), best_a).real());
        res.attained_b.push_back(trace_product(phis[best_member].abs_adjoint_density(), best_b).real());
        res.a.push_back(best_a);
        res.b.push_back(best_b);

        const Projection &pj = ext.right[best_block];
        const Projection &qj = ext.left[best_block];
        s_cur                = Projection::trusted(s_cur.element() - pj.element(), [&] {
            std::vector<int> rk(s_cur.ranks());
            for(std::size_t i = 0; i < rk.size(); ++i) rk[i] -= pj.ranks()[i];
            return rk;
        }());
        t_cur = Projection::trusted(t_cur.element() - qj.element(), [&] {
            std::vector<int> rk(t_cur.ranks());
            for(std::size_t i = 0; i < rk.size(); ++i) rk[i] -= qj.ranks()[i];
            return rk;
        }());
        // Keep members whose mass on the consumed projections is below the leakage allowance.
        double                   allowance = eps_n * eps_n / 4;
        std::vector<std::size_t> next;
        for(std::size_t m : live) {
            bool used = false;
            for(std::size_t i : blocks.blocks[best_block].indices) used |= live[i] == m;
            if(used) continue;
            double leak = mass(phis[m].abs_density(), pj) + mass(phis[m].abs_adjoint_density(), qj);
            if(leak <= allowance) next.push_back(m);
        }
        pool = std::move(next);
    }

    bool ok = res.a.size() == opt.count;
    for(std::size_t i = 0; i < res.a.size(); ++i) {
        ok = ok && res.attained_a[i] > res.threshold - opt.tol && res.attained_b[i] > res.threshold - opt.tol;
        ok = ok && std::abs(operator_norm(res.a[i]) - 1) <= opt.tol && std::abs(operator_norm(res.b[i]) - 1) <= opt.tol;
        for(std::size_t j = i + 1; j < res.a.size(); ++j)
            ok = ok && operator_norm(res.a[i] * res.a[j]) <= shape->tol() && operator_norm(res.b[i] * res.b[j]) <= shape->tol();
    }
    res.certified = ok;
    if(!ok && res.diagnostic.empty()) res.diagnostic = "witness thresholds or orthogonality not met";
    return res;
}

nlohmann::json report_to_json(const BoundReport &r) {
    return nlohmann::json{{"label", r.label}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack}, {"digest", r.digest}};
}

nlohmann::json delta_schedule_to_json(const DeltaSchedule &d) {
    return nlohmann::json{{"epsilon", d.epsilon}, {"log2_values", d.log2_values}, {"values", d.values()}, {"replay", d.replay()}};
}

nlohmann::json extraction_to_json(const ExtractionResult &e) {
    nlohmann::json log = nlohmann::json::array();
    for(const auto &l : e.log)
        log.push_back({{"delta", l.delta},
                       {"max_distance", std::isfinite(l.max_distance) ? nlohmann::json(l.max_distance) : nlohmann::json(nullptr)},
                       {"min_mass", l.min_mass},
                       {"eta", l.eta},
                       {"orthogonal", l.orthogonal},
                       {"accepted", l.accepted}});
    nlohmann::json outs = nlohmann::json::array();
    for(const auto &o : e.outputs) outs.push_back(functional_to_json(o));
    std::vector<double> ptr, qtr;
    for(const auto &p : e.right) ptr.push_back(p.trace());
    for(const auto &q : e.left) qtr.push_back(q.trace());
    return nlohmann::json{{"indices", e.indices},
                          {"epsilon", e.epsilon},
                          {"distances", e.distances},
                          {"right_traces", ptr},
                          {"left_traces", qtr},
                          {"measured_span_constant", e.measured_span_constant},
                          {"theory_delta_log2", e.theory_delta_log2},
                          {"theory_gate_met", e.theory_gate_met},
                          {"certified", e.certified},
                          {"diagnostic", e.diagnostic},
                          {"search_log", log},
                          {"outputs", outs}};
}

nlohmann::json witnesses_to_json(const WitnessResult &w) {
    return nlohmann::json{{"indices", w.indices},
                          {"attained_a", w.attained_a},
                          {"attained_b", w.attained_b},
                          {"threshold", w.threshold},
                          {"measured_r", w.measured_r},
                          {"selfadjoint", w.selfadjoint},
                          {"certified", w.certified},
                          {"diagnostic", w.diagnostic}};
}

} // namespace vnl1
