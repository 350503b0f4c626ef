#include "vnl1/measure.hpp"

#include "vnl1/csv.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

namespace vnl1 {

namespace {

std::vector<std::pair<double, double>> weighted_singular_values(const Element &x) {
    const auto &s = *x.shape();
    std::vector<std::pair<double, double>> out;
    out.reserve(s.total_dim());
    if(s.commutative()) {
        for(std::size_t j = 0; j < s.num_blocks(); ++j) out.emplace_back(std::abs(x.data()[j]), s.weight(j));
        return out;
    }
    auto sv = singular_values(x);
    for(std::size_t j = 0; j < s.num_blocks(); ++j)
        for(int i = 0; i < s.dim(j); ++i) out.emplace_back(sv[s.row_offset(j) + static_cast<std::size_t>(i)], s.weight(j));
    return out;
}

} // namespace

double exceedance(const Element &x, double eps) {
    if(!(eps > 0)) throw ValidationError("exceedance: eps must be > 0");
    auto   levels = weighted_singular_values(x);
    double scale  = 0;
    for(const auto &[v, w] : levels) scale = std::max(scale, v);
    double cut  = eps + kTieRel * scale;
    double mass = 0;
    for(const auto &[v, w] : levels)
        if(v > cut) mass += w;
    return mass;
}

ExceedanceProfile exceedance_profile(const Element &x, std::vector<double> thresholds) {
    std::sort(thresholds.begin(), thresholds.end());
    ExceedanceProfile p{thresholds, {}};
    for(double e : thresholds) p.masses.push_back(exceedance(x, e));
    return p;
}

double gauge_from_staircase(std::vector<std::pair<double, double>> levels) {
    std::sort(levels.begin(), levels.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
    // Distinct levels s_1 > s_2 > ... > s_m > 0 with cumulative masses W_k; exceedance equals W_k on [s_{k+1}, s_k).
    std::vector<double> s, W;
    double              cum = 0;
    for(std::size_t i = 0; i < levels.size();) {
        double v = levels[i].first;
        if(v <= 0) break;
        while(i < levels.size() && levels[i].first == v) cum += levels[i++].second;
        s.push_back(v);
        W.push_back(cum);
    }
    if(s.empty()) return 0.0;
    double best = s.front(); // k = 0: exceedance is 0 from s_1 on
    for(std::size_t k = 0; k < s.size(); ++k) {
        double lo   = k + 1 < s.size() ? s[k + 1] : 0.0;
        double cand = std::max(lo, W[k]);
        if(cand < s[k]) best = std::min(best, cand);
    }
    return best;
}

double gauge(const Element &x) { return gauge_from_staircase(weighted_singular_values(x)); }

std::vector<double> default_epsilon_grid() {
    std::vector<double> g;
    for(int k = 20; k >= 0; --k) g.push_back(std::ldexp(1.0, -k));
    return g;
}

TauNullEvidence tau_null_evidence(const ElementSequence &xs, std::vector<double> epsilons, const std::vector<std::size_t> &indices) {
    if(xs.size() == 0) throw ValidationError("tau_null_evidence: empty prefix");
    std::sort(epsilons.begin(), epsilons.end());
    TauNullEvidence ev;
    ev.epsilons = epsilons;
    if(indices.empty())
        for(std::size_t n = 1; n <= xs.size(); ++n) ev.indices.push_back(n);
    else ev.indices = indices;

    std::vector<std::vector<double>> masses(epsilons.size());
    for(std::size_t n : ev.indices) {
        Element x  = xs.at(n);
        double  g  = gauge(x);
        double  n1 = trace_norm(x);
        ev.gauges.push_back(g);
        ev.norms.push_back(n1);
        for(std::size_t e = 0; e < epsilons.size(); ++e) {
            double m = exceedance(x, epsilons[e]);
            masses[e].push_back(m);
            ev.rows.push_back({n, epsilons[e], m, n1, g});
        }
    }
    double tol        = 1e-12 * xs.shape()->tau_unit();
    ev.monotone_trend = true;
    for(const auto &col : masses)
        for(std::size_t i = 1; i < col.size(); ++i)
            if(col[i] > col[i - 1] + tol) ev.monotone_trend = false;
    for(const auto &col : masses) ev.final_mass_below.push_back(col.back() <= ev.mass_threshold);
    ev.tau_null_evidence = ev.gauges.back() <= ev.gauge_threshold && ev.gauges.back() <= ev.gauges.front() + tol;
    return ev;
}

void write_evidence_csv(std::ostream &os, const TauNullEvidence &ev) {
    os << "n,epsilon,mass,norm1,gauge\n";
    for(const auto &r : ev.rows)
        os << r.n << ',' << csv_num(r.epsilon) << ',' << csv_num(r.mass) << ',' << csv_num(r.norm1) << ',' << csv_num(r.gauge) << '\n';
}

nlohmann::json evidence_to_json(const TauNullEvidence &ev) {
    std::vector<bool> below(ev.final_mass_below.begin(), ev.final_mass_below.end());
    return nlohmann::json{{"epsilons", ev.epsilons},
                          {"indices", ev.indices},
                          {"gauges", ev.gauges},
                          {"norms", ev.norms},
                          {"monotone_trend", ev.monotone_trend},
                          {"final_mass_below", below},
                          {"mass_threshold", ev.mass_threshold},
                          {"gauge_threshold", ev.gauge_threshold},
                          {"tau_null_evidence", ev.tau_null_evidence}};
}

void ElementSequence::check_index(std::size_t n) const {
    if(n < 1 || n > size()) throw ValidationError("sequence index " + std::to_string(n) + " outside 1.." + std::to_string(size()));
}

double ElementSequence::exceedance(std::size_t n, double eps) const { return vnl1::exceedance(at(n), eps); }
double ElementSequence::op_norm(std::size_t n) const { return operator_norm(at(n)); }
double ElementSequence::norm1(std::size_t n) const { return trace_norm(at(n)); }

VectorSequence::VectorSequence(std::vector<Element> xs, std::string name) : xs_(std::move(xs)), name_(std::move(name)) {
    if(xs_.empty()) throw ValidationError("VectorSequence: empty");
    for(const auto &x : xs_) require_same_shape(x.shape(), xs_.front().shape(), "VectorSequence");
}

Element VectorSequence::at(std::size_t n) const {
    check_index(n);
    return xs_[n - 1];
}

PrefixSequence::PrefixSequence(const ElementSequence &base, std::size_t length) : base_(base), length_(length) {
    if(length == 0 || length > base.size()) throw ValidationError("PrefixSequence: length must lie in 1.." + std::to_string(base.size()));
}

Element PrefixSequence::at(std::size_t n) const {
    check_index(n);
    return base_.at(n);
}
double PrefixSequence::exceedance(std::size_t n, double eps) const {
    check_index(n);
    return base_.exceedance(n, eps);
}
double PrefixSequence::op_norm(std::size_t n) const {
    check_index(n);
    return base_.op_norm(n);
}
double PrefixSequence::norm1(std::size_t n) const {
    check_index(n);
    return base_.norm1(n);
}

} // namespace vnl1
