#include "vnl1/orthogonalize.hpp"

#include "vnl1/csv.hpp"
#include "vnl1/measure.hpp"
#include "vnl1/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

namespace vnl1 {

namespace {

struct CutPass {
    std::vector<Element> outputs;
    std::vector<double>  chain;   ///< eps_l tau(1) + ||x_l||_inf sum_{m>l} tau(p_m)
    std::vector<double>  refined; ///< eps_l tau(s_l - p_l) + ||x_l||_inf tau(p_l - p_l ^ q_l), s_l the right support
};

// x_l (p_l ^ q_l) with p_l = chi_{]eps_l,inf[}(|x_l|) and q_l = 1 - join_{m>l} p_m.
CutPass cut_pass(const std::vector<Element> &xs, const std::vector<double> &eps) {
    std::size_t             k = xs.size();
    CutPass                 out{std::vector<Element>(k), std::vector<double>(k), std::vector<double>(k)};
    std::vector<Projection> p;
    std::vector<double>     ptr(k);
    for(std::size_t l = 0; l < k; ++l) {
        p.push_back(abs_spectral_projection(xs[l], eps[l]));
        ptr[l] = p.back().trace();
    }
    const Shape &shape = xs.front().shape();
    Projection   later = Projection::zero(shape);
    double       later_trace = 0;
    for(std::size_t l = k; l-- > 0;) {
        Projection q   = later.complement();
        auto       mj  = proj_meet_join(p[l], q);
        out.outputs[l] = xs[l] * mj.meet.element();
        double norm    = operator_norm(xs[l]);
        out.chain[l]   = eps[l] * shape->tau_unit() + norm * later_trace;
        // x - x(p ^ q) = x(1 - p) + x(p - p ^ q), and ||x(1 - p)||_inf <= eps_l
        double below   = std::max(0.0, abs_spectral_projection(xs[l], 0).trace() - ptr[l]);
        out.refined[l] = eps[l] * below + norm * std::max(0.0, ptr[l] - mj.meet.trace());
        later          = proj_meet_join(later, p[l]).join;
        later_trace += ptr[l];
    }
    return out;
}

bool pairwise_orthogonal(const std::vector<Element> &ys, double tol) {
    for(std::size_t i = 0; i < ys.size(); ++i)
        for(std::size_t j = i + 1; j < ys.size(); ++j)
            if(!is_orthogonal_elements(ys[i], ys[j], tol)) return false;
    return true;
}

} // namespace

OrthogonalizationLedger tau_null_orthogonalize(const ElementSequence &xs, std::size_t depth) {
    if(depth == 0) throw ValidationError("tau_null_orthogonalize: depth must be >= 1");
    if(xs.size() == 0) throw ValidationError("tau_null_orthogonalize: empty prefix");
    const Shape &shape = xs.shape();
    const double tau1  = shape->tau_unit();
    OrthogonalizationLedger led;
    led.kind            = "tau-null";
    led.requested_depth = depth;

    std::size_t first = 0;
    for(std::size_t n = 1; n <= xs.size() && !first; ++n)
        if(xs.op_norm(n) > 0) first = n;
    if(!first) {
        // Only zero members: y_l = 0 is admissible at every step.
        std::size_t k = std::min(depth, xs.size());
        for(std::size_t l = 1; l <= k; ++l) {
            led.indices.push_back(l);
            led.outputs.emplace_back(shape);
            led.bounds.push_back(0);
            led.distances.push_back(0);
            led.gauges.push_back(0);
            led.theory_bounds.push_back(std::ldexp(1.0, -static_cast<int>(l) + 1));
            led.epsilons.push_back(std::ldexp(1.0, -static_cast<int>(l)) / tau1);
            led.deltas.push_back(0);
            led.stages.push_back({"right-pass", l, l, 0, 0, "zero member"});
        }
        led.achieved_depth = k;
        led.orthogonal     = true;
        led.certified      = k == depth;
        if(!led.certified) led.diagnostic = "prefix shorter than depth";
        return led;
    }

    // Index selection, left to right.
    double max_inf = xs.op_norm(first);
    led.indices.push_back(first);
    led.epsilons.push_back(0.5 / tau1);
    led.deltas.push_back(2 * tau1);
    led.stages.push_back({"select", 1, first, led.deltas[0], xs.exceedance(first, led.epsilons[0]), "delta_1 exceeds tau(p_1)"});
    for(std::size_t l = 2; l <= depth; ++l) {
        double      eps   = std::ldexp(1.0, -static_cast<int>(l)) / tau1;
        double      delta = std::ldexp(1.0, -static_cast<int>(l)) / max_inf;
        std::size_t pick  = 0;
        double      mass  = 0;
        for(std::size_t n = led.indices.back() + 1; n <= xs.size(); ++n) {
            if(xs.op_norm(n) == 0) continue;
            mass = xs.exceedance(n, eps);
            if(mass < delta) {
                pick = n;
                break;
            }
        }
        if(!pick) {
            led.diagnostic = "prefix exhausted before depth " + std::to_string(l) + " (no index with exceedance below delta_l)";
            break;
        }
        led.indices.push_back(pick);
        led.epsilons.push_back(eps);
        led.deltas.push_back(delta);
        led.stages.push_back({"select", l, pick, delta, mass, ""});
        max_inf = std::max(max_inf, xs.op_norm(pick));
    }
    std::size_t k = led.indices.size();
    led.achieved_depth = k;

    std::vector<Element> sel;
    for(std::size_t n : led.indices) sel.push_back(xs.at(n));
    CutPass right = cut_pass(sel, led.epsilons);
    std::vector<Element> adj;
    for(const auto &y : right.outputs) adj.push_back(y.adjoint());
    CutPass second = cut_pass(adj, led.epsilons);

    const double tol = shape->tol();
    bool         within = true;
    for(std::size_t l = 0; l < k; ++l) {
        Element y  = second.outputs[l].adjoint();
        double  d1 = trace_norm(sel[l] - right.outputs[l]);
        double  d2 = trace_norm(right.outputs[l] - y);
        double  d  = trace_norm(sel[l] - y);
        led.stages.push_back({"right-pass", l + 1, led.indices[l], right.refined[l], d1, "chain " + csv_num(right.chain[l])});
        led.stages.push_back({"adjoint-pass", l + 1, led.indices[l], second.refined[l], d2, "chain " + csv_num(second.chain[l])});
        led.bounds.push_back(right.refined[l] + second.refined[l]);
        led.distances.push_back(d);
        led.theory_bounds.push_back(std::ldexp(1.0, -static_cast<int>(l)));
        led.gauges.push_back(gauge(y));
        within = within && d <= led.bounds.back() + tol && right.chain[l] <= led.theory_bounds.back() + tol;
        led.outputs.push_back(std::move(y));
    }
    sel.clear();
    led.orthogonal = pairwise_orthogonal(led.outputs, tol);
    led.certified  = k == depth && led.orthogonal && within;
    if(led.diagnostic.empty() && !led.certified) led.diagnostic = led.orthogonal ? "recorded bound exceeded" : "outputs not orthogonal";
    return led;
}

OrthogonalizationLedger almost_isometric_orthogonalize(std::span<const Functional> phis_in, std::size_t depth,
                                                       const AlmostIsometricOptions &opt) {
    if(depth == 0) throw ValidationError("almost_isometric_orthogonalize: depth must be >= 1");
    if(phis_in.size() < depth) throw ValidationError("almost_isometric_orthogonalize: prefix shorter than depth");
    const Shape &shape = phis_in.front().shape();
    const double tol   = shape->tol();
    std::vector<Functional> phis;
    for(const auto &p : phis_in) {
        require_same_shape(shape, p.shape(), "almost_isometric_orthogonalize");
        phis.push_back(normalized(p));
    }
    OrthogonalizationLedger led;
    led.kind            = "almost-isometric";
    led.requested_depth = depth;
    led.etas            = opt.eta;
    if(led.etas.empty())
        for(std::size_t n = 1; n <= depth; ++n) led.etas.push_back(opt.epsilon * std::ldexp(1.0, -static_cast<int>(n)));
    if(led.etas.size() < depth) throw ValidationError("almost_isometric_orthogonalize: eta schedule shorter than depth");
    for(double e : led.etas)
        if(!(e > 0 && e < 1)) throw ValidationError("almost_isometric_orthogonalize: eta_n must lie in ]0,1[");
    for(std::size_t n = 0; n < depth; ++n) led.eta_sum += led.etas[n];
    const double delta0 = opt.delta0 > 0 ? opt.delta0 : led.etas[0];

    double r = phis.size() == 1 ? 1.0 : l1_lower_constant(phis, opt.budget).r_estimate;
    led.deltas.push_back(delta0);
    led.stages.push_back({"select", 0, 0, delta0, 1 - r, "span gate on the prefix"});
    if(1 - r > delta0) throw PreconditionError("almost_isometric_orthogonalize: prefix is not (1-delta0)-isometric", r);

    std::vector<Functional>  psi{phis[0]};
    std::vector<std::size_t> m{0};
    bool                     steps_ok = true;
    for(std::size_t n = 1; n < depth; ++n) {
        double      eta  = led.etas[n];
        std::size_t need = depth - n - 1; // indices still required after this step
        std::size_t lo = m.back() + 1, hi = std::min(phis.size() - need, lo + opt.window);
        if(lo >= hi) {
            led.diagnostic = "prefix exhausted at step " + std::to_string(n + 1);
            break;
        }
        std::vector<Functional> window(phis.begin() + static_cast<std::ptrdiff_t>(lo), phis.begin() + static_cast<std::ptrdiff_t>(hi));
        ExtractionOptions       eo;
        eo.gate_delta = delta0;
        eo.budget     = opt.budget;
        Projection       one = Projection::identity(shape);
        ExtractionResult ext;
        try {
            ext = finite_orthogonal_extraction(window, one, one, eta, eo);
        } catch(const PreconditionError &e) {
            led.diagnostic = std::string("step ") + std::to_string(n + 1) + ": " + e.what();
            break;
        }
        if(ext.right.empty()) {
            led.diagnostic = "step " + std::to_string(n + 1) + ": no orthogonal candidate";
            break;
        }
        // Pigeonhole: the candidate whose projections carry the least mass of the current psi_k.
        std::size_t best = 0;
        double      best_leak = 1e300;
        for(std::size_t c = 0; c < window.size(); ++c) {
            double leak = 0;
            for(const auto &p : psi)
                leak = std::max({leak, p.abs_value(ext.right[c].element()).real(), p.abs_adjoint_value(ext.left[c].element()).real()});
            if(leak < best_leak - 1e-15) {
                best_leak = leak;
                best      = c;
            }
        }
        Functional  fresh = ext.outputs[best];
        std::size_t pick  = lo + best;
        double      dnew  = ext.distances[best];
        led.stages.push_back({"select", n + 1, pick + 1, eta, dnew, "leakage " + csv_num(best_leak)});
        steps_ok = steps_ok && dnew < eta;

        Projection s = ext.right[best].complement(), t = ext.left[best].complement();
        for(std::size_t k = 0; k < psi.size(); ++k) {
            double a  = std::abs(1 - psi[k].abs_value(s.element()).real());
            double b  = std::abs(1 - psi[k].abs_adjoint_value(t.element()).real());
            double pb = std::sqrt(2.0) * (std::sqrt(a) + std::sqrt(b));
            led.stages.push_back({"recompress", n + 1, m[k] + 1, pb, distance(compress(psi[k], t, s), psi[k]), "t psi s"});
        }
        ExtractionOptions ro;
        ro.gate_delta = eta / 2;
        ro.budget     = opt.budget;
        ExtractionResult re;
        try {
            re = finite_orthogonal_extraction(psi, s, t, eta, ro);
        } catch(const PreconditionError &e) {
            led.diagnostic = std::string("step ") + std::to_string(n + 1) + " re-orthogonalization: " + e.what();
            break;
        }
        if(re.right.empty()) {
            led.diagnostic = "step " + std::to_string(n + 1) + ": re-orthogonalization failed";
            break;
        }
        for(std::size_t k = 0; k < psi.size(); ++k) {
            led.stages.push_back({"right-pass", n + 1, m[k] + 1, eta, re.distances[k], "psi^(n+1) vs psi^(n)"});
            steps_ok = steps_ok && re.distances[k] < eta;
            psi[k]   = re.outputs[k];
        }
        psi.push_back(fresh);
        m.push_back(pick);
        led.deltas.push_back(eta / 2);
    }

    led.achieved_depth = psi.size();
    for(std::size_t k = 0; k < psi.size(); ++k) {
        double tail = led.etas[k];
        for(std::size_t l = k + 1; l < psi.size(); ++l) tail += led.etas[l];
        led.indices.push_back(m[k] + 1);
        led.outputs.push_back(psi[k].density());
        led.distances.push_back(distance(phis[m[k]], psi[k]));
        led.theory_bounds.push_back(tail);
        led.bounds.push_back(tail);
        led.gauges.push_back(gauge(psi[k].density()));
        led.right.push_back(psi[k].supports().right);
        led.left.push_back(psi[k].supports().left);
    }
    bool orth = true;
    for(std::size_t i = 0; i < psi.size(); ++i)
        for(std::size_t j = i + 1; j < psi.size(); ++j)
            orth = orth && are_orthogonal(psi[i], psi[j], tol) && is_orthogonal_elements(psi[i].density(), psi[j].density(), tol);
    led.orthogonal = orth;
    bool within    = true;
    for(std::size_t k = 0; k < psi.size(); ++k) within = within && led.distances[k] <= led.bounds[k] + tol;
    led.certified = led.achieved_depth == depth && orth && within && steps_ok;
    if(!led.certified && led.diagnostic.empty())
        led.diagnostic = !orth ? "outputs not orthogonal" : !steps_ok ? "an induction step exceeded eta_n" : "distance bound exceeded";
    return led;
}

ProbeReport trichotomy_probe(const ElementSequence &xs, const ProbeThresholds &th, const L1Budget &budget) {
    if(xs.size() == 0) throw ValidationError("trichotomy_probe: empty prefix");
    ProbeReport rep;
    rep.name       = xs.name();
    rep.thresholds = th;
    std::vector<Element> els;
    for(std::size_t n = 1; n <= xs.size(); ++n) {
        els.push_back(xs.at(n));
        rep.norms.push_back(trace_norm(els.back()));
        rep.gauges.push_back(gauge(els.back()));
    }
    double max_norm      = *std::max_element(rep.norms.begin(), rep.norms.end());
    rep.inf_norm         = *std::min_element(rep.norms.begin(), rep.norms.end());
    double max_gauge     = *std::max_element(rep.gauges.begin(), rep.gauges.end());
    rep.gauge_decreasing = rep.gauges.back() <= 0.5 * max_gauge && max_gauge > 0;
    if(max_norm == 0 || rep.norms.back() <= th.norm_null_ratio * max_norm) {
        rep.verdict = "norm-null-evidence";
        return rep;
    }

    // Backward greedy: later members first, keep those with a good pairwise constant against all kept ones.
    std::vector<std::size_t> chosen;
    for(std::size_t n = xs.size(); n-- > 0 && chosen.size() < th.max_subsequence;) {
        if(rep.norms[n] <= th.norm_null_ratio * max_norm) continue;
        bool ok = true;
        for(std::size_t c : chosen) {
            std::vector<Element> pair{els[n], els[c]};
            if(l1_lower_constant(pair, budget).r_estimate < th.pair_constant) {
                ok = false;
                break;
            }
        }
        if(ok) chosen.push_back(n);
    }
    std::reverse(chosen.begin(), chosen.end());
    for(std::size_t c : chosen) rep.subsequence.push_back(c + 1);
    if(chosen.size() < 2) {
        rep.verdict = "mixed/inconclusive";
        return rep;
    }
    std::vector<Element> sub;
    for(std::size_t c : chosen) sub.push_back(els[c]);
    rep.tail = tail_delta_schedule(sub, budget);
    bool small = std::all_of(rep.tail.delta_schedule.begin(), rep.tail.delta_schedule.end(), [&](double d) { return d <= th.delta_max; });
    rep.verdict = small && rep.tail.almost_isometric_trend ? "almost-isometric-evidence" : "mixed/inconclusive";
    return rep;
}

void write_ledger_csv(std::ostream &os, const OrthogonalizationLedger &led) {
    os << "l,index,bound,measured_distance,gauge\n";
    for(std::size_t l = 0; l < led.indices.size(); ++l)
        os << (l + 1) << ',' << led.indices[l] << ',' << csv_num(led.bounds[l]) << ',' << csv_num(led.distances[l]) << ','
           << csv_num(led.gauges[l]) << '\n';
}

nlohmann::json ledger_to_json(const OrthogonalizationLedger &led) {
    nlohmann::json st = nlohmann::json::array();
    for(const auto &s : led.stages)
        st.push_back({{"stage", s.stage}, {"l", s.l}, {"index", s.index}, {"bound", s.bound}, {"measured", s.measured}, {"note", s.note}});
    return nlohmann::json{{"kind", led.kind},
                          {"indices", led.indices},
                          {"bounds", led.bounds},
                          {"distances", led.distances},
                          {"gauges", led.gauges},
                          {"theory_bounds", led.theory_bounds},
                          {"epsilons", led.epsilons},
                          {"deltas", led.deltas},
                          {"etas", led.etas},
                          {"eta_sum", led.eta_sum},
                          {"requested_depth", led.requested_depth},
                          {"achieved_depth", led.achieved_depth},
                          {"orthogonal", led.orthogonal},
                          {"certified", led.certified},
                          {"diagnostic", led.diagnostic},
                          {"stages", st}};
}

nlohmann::json probe_to_json(const ProbeReport &p) {
    return nlohmann::json{{"name", p.name},
                          {"norms", p.norms},
                          {"gauges", p.gauges},
                          {"inf_norm", p.inf_norm},
                          {"gauge_decreasing", p.gauge_decreasing},
                          {"subsequence", p.subsequence},
                          {"tail_delta", p.tail.delta_schedule},
                          {"tail_trend_ok", p.tail.almost_isometric_trend},
                          {"verdict", p.verdict},
                          {"thresholds",
                           {{"norm_null_ratio", p.thresholds.norm_null_ratio},
                            {"pair_constant", p.thresholds.pair_constant},
                            {"delta_max", p.thresholds.delta_max},
                            {"max_subsequence", p.thresholds.max_subsequence}}}};
}

} // namespace vnl1
