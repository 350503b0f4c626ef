#include "vnl1/harness.hpp"

#include "vnl1/csv.hpp"
#include "vnl1/generators.hpp"
#include "vnl1/measure.hpp"
#include "vnl1/orthogonalize.hpp"
#include "vnl1/parallel.hpp"
#include "vnl1/perturbation.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace vnl1 {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// A contraction drawn from one of several regimes so that both loose and nearly tight instances occur.
Element random_contraction(const Shape &shape, std::mt19937_64 &rng) {
    std::uniform_int_distribution<int>     pick(0, 3);
    std::uniform_real_distribution<double> u(0, 1);
    switch(pick(rng)) {
    case 0: return random_suite(shape, RandomKind::contraction, rng);
    case 1: return random_suite(shape, RandomKind::unitary, rng);
    case 2: {
        double  s = std::pow(u(rng), 3);
        Element c = random_suite(shape, RandomKind::contraction, rng);
        Element a = Element::identity(shape);
        a *= 1 - s;
        c *= s;
        return a + c;
    }
    default: return random_suite(shape, RandomKind::projection, rng);
    }
}

Element unit_trace_norm(Element x) {
    double n = trace_norm(x);
    if(n > 0) x *= 1.0 / n;
    return x;
}

// Orthonormal columns spanning the range of a projection block.
Matrix range_columns(ConstMatrixMap p) {
    Eigen::SelfAdjointEigenSolver<Matrix> es((p + p.adjoint()) * 0.5);
    int                                   n = static_cast<int>(p.rows()), k = 0;
    for(int i = 0; i < n; ++i) k += es.eigenvalues()(i) > 0.5;
    return es.eigenvectors().rightCols(k);
}

Matrix gaussian(int rows, int cols, std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0, std::sqrt(0.5));
    Matrix                           m(rows, cols);
    for(int c = 0; c < cols; ++c)
        for(int r = 0; r < rows; ++r) m(r, c) = cplx(g(rng), g(rng));
    return m;
}

// A projection whose range contains a random part of range(p) plus random directions.
Projection overlapping_projection(const Projection &p, std::mt19937_64 &rng) {
    const auto      &s = *p.shape();
    Element          q(p.shape());
    std::vector<int> ranks(s.num_blocks(), 0);
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int    n    = s.dim(j);
        Matrix base = range_columns(p.element().block(j));
        int    keep = std::uniform_int_distribution<int>(0, static_cast<int>(base.cols()))(rng);
        int    more = std::uniform_int_distribution<int>(0, n - keep)(rng);
        if(keep + more == 0) continue;
        Matrix cols(n, keep + more);
        if(keep) cols.leftCols(keep) = base.leftCols(keep) * gaussian(keep, keep, rng);
        if(more) cols.rightCols(more) = gaussian(n, more, rng);
        Eigen::HouseholderQR<Matrix> qr(cols);
        Matrix                       Q = qr.householderQ() * Matrix::Identity(n, keep + more);
        q.block(j).noalias()           = Q * Q.adjoint();
        ranks[j]                       = keep + more;
    }
    return Projection::trusted(std::move(q), std::move(ranks));
}

} // namespace

std::vector<Shape> audit_shapes() {
    return {build_algebra(std::vector<int>(16, 1), std::vector<double>(16, 1.0 / 16)), build_algebra({4}, {1.0}),
            build_algebra({2, 3}, {1.0, 2.0}), build_algebra({2, 2, 2}, {0.5, 1.0, 2.5})};
}

std::vector<AuditSummary> lemma_audit(std::size_t trials, std::uint64_t seed, const std::vector<Shape> &shapes, double violation_tol) {
    if(shapes.empty()) throw ValidationError("lemma_audit: no shapes");
    auto                               t0 = Clock::now();
    std::vector<std::array<double, 6>> slack(trials);
    parallel_for(trials, [&](std::size_t t) {
        std::mt19937_64                        rng(trial_seed(seed, t));
        const Shape                           &sh = shapes[t % shapes.size()];
        std::uniform_real_distribution<double> scale(0.2, 1.0);
        Functional omega = from_density(scale(rng) * unit_trace_norm(random_suite(sh, RandomKind::positive, rng)));
        Functional phi   = from_density(scale(rng) * unit_trace_norm(random_suite(sh, RandomKind::generic, rng)));
        Element    a = random_contraction(sh, rng), b = random_contraction(sh, rng);
        auto       r4 = bound_A4(omega, a, b);
        auto       r3 = bound_A3(phi, a, b);
        for(int i = 0; i < 3; ++i) {
            slack[t][i]     = r4[i].slack;
            slack[t][3 + i] = r3[i].slack;
        }
    });
    static const char *names[6] = {"A4.left", "A4.right", "A4.two-sided", "A3.phase-left", "A3.abs-left", "A3.two-sided"};
    std::vector<AuditSummary> out;
    double                    secs = seconds_since(t0);
    for(int i = 0; i < 6; ++i) {
        AuditSummary a{names[i], trials, 0, trials ? 1e300 : 0, secs};
        for(const auto &s : slack) {
            a.min_slack = std::min(a.min_slack, s[i]);
            a.violations += s[i] < -violation_tol;
        }
        out.push_back(a);
    }
    return out;
}

AuditSummary compress_audit(double beta, std::size_t trials, std::uint64_t seed) {
    if(!(beta > 0 && beta < 1)) throw ValidationError("compress_audit: beta must lie in ]0,1[");
    auto               t0     = Clock::now();
    std::vector<Shape> shapes = {build_algebra({4}, {1.0}), build_algebra({2, 3}, {1.0, 0.5}), build_algebra({2, 2, 2}, {0.5, 1.0, 2.5})};
    std::vector<double> slack(trials);
    parallel_for(trials, [&](std::size_t t) {
        std::mt19937_64 rng(trial_seed(seed, t));
        const Shape    &sh = shapes[t % shapes.size()];
        const auto     &s  = *sh;
        // r = Q diag(1..1, 0..0) Q*, |D| = (1-beta) A + beta B with A under r and B under 1 - r, D = W |D|.
        Element Q = random_suite(sh, RandomKind::unitary, rng), W = random_suite(sh, RandomKind::unitary, rng);
        std::vector<double> diag(s.total_dim(), 0.0);
        std::vector<int>    ranks(s.num_blocks());
        for(std::size_t j = 0; j < s.num_blocks(); ++j) {
            ranks[j] = (s.dim(j) + 1) / 2;
            for(int i = 0; i < ranks[j]; ++i) diag[s.row_offset(j) + static_cast<std::size_t>(i)] = 1;
        }
        Projection r  = Projection::trusted(Q * Element::diagonal(sh, diag) * Q.adjoint(), ranks);
        Projection rc = r.complement();
        Element    A  = unit_trace_norm(r.element() * random_suite(sh, RandomKind::positive, rng) * r.element());
        Element    B  = unit_trace_norm(rc.element() * random_suite(sh, RandomKind::positive, rng) * rc.element());
        Element    absD = (1 - beta) * A + beta * B;
        Functional sigma = from_density(W * absD);
        sigma            = scaled(sigma, 1.0 / std::max(1.0, sigma.norm()));
        Projection l     = Projection::trusted(W * r.element() * W.adjoint(), ranks);
        double     right = sigma.abs_value(r.element()).real(), left = sigma.abs_adjoint_value(l.element()).real();
        double     measured = std::clamp(1 - std::min(right, left), 1e-300, 0.999);
        auto       res      = compress_normalize(sigma, l, r, measured);
        slack[t]            = res.report.slack;
    });
    AuditSummary a{"compress beta=" + csv_num(beta), trials, 0, trials ? 1e300 : 0, seconds_since(t0)};
    for(double s : slack) {
        a.min_slack = std::min(a.min_slack, s);
        a.violations += !(s > 0);
    }
    return a;
}

AuditSummary lattice_audit(std::size_t trials, std::uint64_t seed, double tol) {
    auto                t0     = Clock::now();
    auto                shapes = audit_shapes();
    shapes.push_back(build_algebra({4}, {0.25}));
    std::vector<double> residual(trials);
    parallel_for(trials, [&](std::size_t t) {
        std::mt19937_64 rng(trial_seed(seed, t));
        const Shape    &sh = shapes[t % shapes.size()];
        Projection      p  = Projection(random_suite(sh, RandomKind::projection, rng));
        Projection      q  = t % 2 ? overlapping_projection(p, rng) : Projection(random_suite(sh, RandomKind::projection, rng));
        auto            mj = proj_meet_join(p, q);
        residual[t]        = std::abs((p.trace() - mj.meet.trace()) - (mj.join.trace() - q.trace()));
    });
    AuditSummary a{"lattice trace identity", trials, 0, trials ? 1e300 : 0, seconds_since(t0)};
    for(double r : residual) {
        a.min_slack = std::min(a.min_slack, tol - r);
        a.violations += r > tol;
    }
    return a;
}

AuditSummary isometry_audit(std::size_t pairs, std::size_t coefficients, std::uint64_t seed, double tol) {
    auto                t0     = Clock::now();
    auto                shapes = audit_shapes();
    std::vector<double> worst(pairs);
    parallel_for(pairs, [&](std::size_t t) {
        std::mt19937_64 rng(trial_seed(seed, t));
        const Shape    &sh = shapes[t % shapes.size()];
        const auto     &s  = *sh;
        // Split the diagonal slots into two non-empty random sets and rotate both sides.
        std::size_t              m = s.total_dim();
        std::vector<std::size_t> slot(m);
        for(std::size_t i = 0; i < m; ++i) slot[i] = i;
        std::shuffle(slot.begin(), slot.end(), rng);
        std::size_t                            cut = std::uniform_int_distribution<std::size_t>(1, m - 1)(rng);
        std::uniform_real_distribution<double> u(0.1, 1.0), ang(0, 2 * M_PI);
        Element                                U = random_suite(sh, RandomKind::unitary, rng), V = random_suite(sh, RandomKind::unitary, rng);
        Element                                d1(sh), d2(sh);
        for(std::size_t i = 0; i < m; ++i) {
            // locate slot[i] in its block
            std::size_t j = 0;
            while(j + 1 < s.num_blocks() && s.row_offset(j + 1) <= slot[i]) ++j;
            auto    k = static_cast<Eigen::Index>(slot[i] - s.row_offset(j));
            Element &d = i < cut ? d1 : d2;
            d.block(j)(k, k) = std::polar(u(rng), ang(rng));
        }
        Functional phi = normalized(from_density(U * d1 * V.adjoint()));
        Functional psi = normalized(from_density(U * d2 * V.adjoint()));
        std::normal_distribution<double> g(0, 1);
        double                           w = 0;
        for(std::size_t c = 0; c < coefficients; ++c) {
            cplx al(g(rng), g(rng)), be(g(rng), g(rng));
            w = std::max(w, std::abs(trace_norm(al * phi.density() + be * psi.density()) - (std::abs(al) + std::abs(be))));
        }
        worst[t] = w;
    });
    AuditSummary a{"orthogonal pair isometry", pairs, 0, pairs ? 1e300 : 0, seconds_since(t0)};
    for(double w : worst) {
        a.min_slack = std::min(a.min_slack, tol - w);
        a.violations += w > tol;
    }
    return a;
}

nlohmann::json audit_to_json(const AuditSummary &a) {
    return nlohmann::json{{"check", a.check}, {"trials", a.trials}, {"violations", a.violations}, {"min_slack", a.min_slack}};
}

const std::vector<std::string> &pipeline_ops() {
    static const std::vector<std::string> ops{"props", "orthogonalize", "l1const", "extract", "probe"};
    return ops;
}

namespace {

template <class T> T take(const nlohmann::json &j, const char *key, T def) {
    if(!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch(const nlohmann::json::exception &) {
        throw ValidationError(std::string("config: '") + key + "' has the wrong type");
    }
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json &j) {
    if(!j.is_object()) throw ValidationError("config: top level must be an object");
    static const std::set<std::string> known{"algebra", "generator", "pipeline", "seed",  "depth",  "trials",
                                             "tol",     "epsilon",   "eta",      "orthogonalize", "budget", "output"};
    for(const auto &[k, v] : j.items())
        if(!known.count(k)) throw ValidationError("config: unknown key '" + k + "'");
    ExperimentConfig c;
    if(j.contains("algebra")) {
        c.algebra = j.at("algebra");
        shape_from_json(*c.algebra); // validates
    }
    if(j.contains("generator")) {
        const auto &g = j.at("generator");
        if(!g.is_object() || !g.contains("name") || !g.at("name").is_string()) throw ValidationError("config: generator needs a string 'name'");
        c.generator = g.at("name").get<std::string>();
        const auto &names = generator_names();
        if(std::find(names.begin(), names.end(), c.generator) == names.end()) throw ValidationError("config: unknown generator '" + c.generator + "'");
        if(g.contains("params")) {
            if(!g.at("params").is_object()) throw ValidationError("config: generator params must be an object");
            c.params = g.at("params");
        }
    }
    c.pipeline = take<std::vector<std::string>>(j, "pipeline", {});
    if(c.pipeline.empty()) throw ValidationError("config: 'pipeline' must list at least one operation");
    for(const auto &op : c.pipeline) {
        const auto &ops = pipeline_ops();
        if(std::find(ops.begin(), ops.end(), op) == ops.end()) throw ValidationError("config: unknown pipeline operation '" + op + "'");
        if(op != "props" && c.generator.empty()) throw ValidationError("config: operation '" + op + "' needs a generator");
    }
    c.seed    = take<std::uint64_t>(j, "seed", c.seed);
    c.depth   = take<std::size_t>(j, "depth", c.depth);
    c.trials  = take<std::size_t>(j, "trials", c.trials);
    c.tol     = take<double>(j, "tol", c.tol);
    c.epsilon = take<double>(j, "epsilon", c.epsilon);
    c.eta     = take<std::vector<double>>(j, "eta", {});
    c.output  = take<std::string>(j, "output", c.output);
    if(j.contains("orthogonalize")) c.orthogonalize_mode = take<std::string>(j.at("orthogonalize"), "mode", c.orthogonalize_mode);
    if(c.orthogonalize_mode != "tau-null" && c.orthogonalize_mode != "almost-isometric")
        throw ValidationError("config: orthogonalize.mode must be 'tau-null' or 'almost-isometric'");
    if(j.contains("budget")) c.budget = budget_from_json(j.at("budget"));
    if(c.depth == 0) throw ValidationError("config: depth must be >= 1");
    if(!(c.epsilon > 0 && c.epsilon < 1)) throw ValidationError("config: epsilon must lie in ]0,1[");
    if(!(c.tol > 0)) throw ValidationError("config: tol must be positive");
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig &c) {
    nlohmann::json j{{"pipeline", c.pipeline}, {"seed", c.seed},     {"depth", c.depth},   {"trials", c.trials},
                     {"tol", c.tol},           {"epsilon", c.epsilon}, {"output", c.output}, {"orthogonalize", {{"mode", c.orthogonalize_mode}}},
                     {"budget", budget_to_json(c.budget)}};
    if(c.algebra) j["algebra"] = *c.algebra;
    if(!c.generator.empty()) j["generator"] = {{"name", c.generator}, {"params", c.params}};
    if(!c.eta.empty()) j["eta"] = c.eta;
    return j;
}

ResultBundle run_experiment(const ExperimentConfig &cfg) {
    ResultBundle out;
    out.summary["config"] = config_to_json(cfg);
    Shape shape           = cfg.algebra ? shape_from_json(*cfg.algebra) : Shape{};
    std::unique_ptr<ElementSequence> seq;
    if(!cfg.generator.empty()) seq = generate_sequence(cfg.generator, cfg.params, shape, cfg.seed);
    auto fail = [&](const std::string &op, const std::string &why) {
        out.certified = false;
        out.diagnostics.push_back(op + ": " + why);
    };

    for(const auto &op : cfg.pipeline) {
        nlohmann::json res;
        if(op == "props") {
            std::vector<AuditSummary> rows = lemma_audit(cfg.trials, cfg.seed, shape ? std::vector<Shape>{shape} : audit_shapes());
            for(double beta : {1e-2, 1e-4, 1e-6}) rows.push_back(compress_audit(beta, cfg.trials, trial_seed(cfg.seed, 1)));
            rows.push_back(lattice_audit(cfg.trials, trial_seed(cfg.seed, 2), cfg.tol));
            rows.push_back(isometry_audit(std::max<std::size_t>(1, cfg.trials / 10), 100, trial_seed(cfg.seed, 3), cfg.tol));
            std::ostringstream csv;
            csv << "check,trials,violations,min_slack\n";
            res["checks"] = nlohmann::json::array();
            for(const auto &r : rows) {
                csv << r.check << ',' << r.trials << ',' << r.violations << ',' << csv_num(r.min_slack) << '\n';
                res["checks"].push_back(audit_to_json(r));
                if(r.violations) fail(op, r.check + " has " + std::to_string(r.violations) + " violations");
            }
            out.files["props.csv"] = csv.str();
        } else if(op == "orthogonalize") {
            OrthogonalizationLedger led;
            if(cfg.orthogonalize_mode == "tau-null") {
                led = tau_null_orthogonalize(*seq, cfg.depth);
            } else {
                std::size_t     len = std::min<std::size_t>(seq->size(), 64);
                PrefixSequence  pre(*seq, len);
                AlmostIsometricOptions o;
                o.eta     = cfg.eta;
                o.epsilon = cfg.epsilon;
                o.budget  = cfg.budget;
                try {
                    led = almost_isometric_orthogonalize(to_functionals(pre), std::min(cfg.depth, len), o);
                } catch(const PreconditionError &e) {
                    led.kind       = "almost-isometric";
                    led.diagnostic = e.what();
                }
            }
            std::ostringstream csv;
            write_ledger_csv(csv, led);
            out.files["orthogonalize.csv"] = csv.str();
            res                            = ledger_to_json(led);
            if(!led.certified) fail(op, led.diagnostic);
        } else if(op == "l1const") {
            std::size_t          len = std::min(seq->size(), cfg.depth);
            std::vector<Element> fam;
            for(std::size_t n = 1; n <= len; ++n) fam.push_back(seq->at(n));
            auto               cert = tail_delta_schedule(fam, cfg.budget);
            std::ostringstream csv;
            csv << "m,delta\n";
            for(std::size_t m = 0; m < cert.delta_schedule.size(); ++m) csv << (m + 1) << ',' << csv_num(cert.delta_schedule[m]) << '\n';
            out.files["l1const.csv"] = csv.str();
            res                      = certificate_to_json(cert);
        } else if(op == "extract") {
            std::size_t             len = std::min(seq->size(), cfg.depth);
            std::vector<Functional> fam;
            for(std::size_t n = 1; n <= len; ++n) fam.push_back(normalized(from_density(seq->at(n))));
            ExtractionOptions eo;
            eo.budget = cfg.budget;
            std::ostringstream csv;
            csv << "k,index,distance,right_trace,left_trace\n";
            try {
                Projection one = Projection::identity(fam.front().shape());
                auto       ext = finite_orthogonal_extraction(fam, one, one, cfg.epsilon, eo);
                for(std::size_t k = 0; k < ext.distances.size(); ++k)
                    csv << (k + 1) << ',' << ext.indices[k] << ',' << csv_num(ext.distances[k]) << ',' << csv_num(ext.right[k].trace()) << ','
                        << csv_num(ext.left[k].trace()) << '\n';
                res = extraction_to_json(ext);
                res.erase("outputs");
                if(!ext.certified) fail(op, ext.diagnostic);
            } catch(const PreconditionError &e) {
                res = {{"certified", false}, {"diagnostic", e.what()}, {"measured", e.measured()}};
                fail(op, e.what());
            }
            out.files["extract.csv"] = csv.str();
        } else if(op == "probe") {
            std::size_t    len = std::min<std::size_t>(seq->size(), 64);
            PrefixSequence pre(*seq, len);
            auto           rep = trichotomy_probe(pre, {}, cfg.budget);
            auto           ev  = tau_null_evidence(pre);
            std::ostringstream csv;
            write_evidence_csv(csv, ev);
            out.files["evidence.csv"] = csv.str();
            res                       = probe_to_json(rep);
            res["tau_null"]           = evidence_to_json(ev);
        }
        out.summary["results"][op] = res;
    }
    out.summary["certified"]   = out.certified;
    out.summary["diagnostics"] = out.diagnostics;
    return out;
}

void emit_report(const ResultBundle &bundle, const std::string &dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if(ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    auto write = [&](const std::string &name, const std::string &text) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if(!f) throw std::runtime_error("cannot write '" + (fs::path(dir) / name).string() + "'");
        f << text;
        if(!f) throw std::runtime_error("write failed for '" + name + "'");
    };
    for(const auto &[name, text] : bundle.files) write(name, text);
    write("summary.json", bundle.summary.dump(2) + "\n");
}

} // namespace vnl1
