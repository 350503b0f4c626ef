// vnl1: command line front end for the experiment harness.
// Exit status: 0 everything certified, 2 some ledger or criterion not certified, 1 bad input or IO failure.
#include "CLI11.hpp"
#include "criteria.hpp"
#include "vnl1/csv.hpp"
#include "vnl1/errors.hpp"
#include "vnl1/generators.hpp"
#include "vnl1/harness.hpp"
#include "vnl1/measure.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace vnl1;

struct Common {
    std::string                  config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t>   depth, trials;
    std::optional<double>        tol;
    std::string                  out;
};

void add_common(CLI::App *sub, Common &c, bool with_config = true) {
    if(with_config) sub->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--depth", c.depth, "orthogonalization depth / prefix length")->check(CLI::PositiveNumber);
    sub->add_option("--trials", c.trials, "trials per randomized audit")->check(CLI::PositiveNumber);
    sub->add_option("--tol", c.tol, "violation tolerance")->check(CLI::PositiveNumber);
}

nlohmann::json read_json(const std::string &path) {
    std::ifstream f(path);
    if(!f) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(f);
    } catch(const nlohmann::json::parse_error &e) {
        throw ValidationError("config: " + std::string(e.what()));
    }
}

// Loads the config (or an empty pipeline) and applies command line overrides; `op` replaces the pipeline.
ExperimentConfig load(const Common &c, const std::string &op) {
    nlohmann::json j = c.config.empty() ? nlohmann::json::object() : read_json(c.config);
    if(!j.is_object()) throw ValidationError("config: top level must be an object");
    if(!op.empty()) j["pipeline"] = {op};
    if(c.seed) j["seed"] = *c.seed;
    if(c.depth) j["depth"] = *c.depth;
    if(c.trials) j["trials"] = *c.trials;
    if(c.tol) j["tol"] = *c.tol;
    if(!c.out.empty()) j["output"] = c.out;
    return config_from_json(j);
}

int finish(const ResultBundle &res, const std::string &dir) {
    emit_report(res, dir);
    for(const auto &d : res.diagnostics) std::cerr << "not certified: " << d << '\n';
    std::cout << (res.certified ? "certified" : "not certified") << "; wrote " << res.files.size() + 1 << " files to " << dir << '\n';
    return res.certified ? 0 : 2;
}

int run_pipeline(const Common &c, const std::string &op) {
    auto cfg = load(c, op);
    return finish(run_experiment(cfg), cfg.output);
}

// Writes per-member statistics and, for small algebras, the members themselves.
int run_gen(const Common &c) {
    auto  cfg   = load(c, "props");
    if(cfg.generator.empty()) throw ValidationError("gen: the config must name a generator");
    Shape shape = cfg.algebra ? shape_from_json(*cfg.algebra) : Shape{};
    auto  seq   = generate_sequence(cfg.generator, cfg.params, shape, cfg.seed);
    std::size_t len = std::min(seq->size(), cfg.depth);

    std::ostringstream csv;
    csv << "n,norm1,op_norm,gauge\n";
    nlohmann::json doc{{"generator", cfg.generator}, {"params", cfg.params}, {"seed", cfg.seed}, {"shape", shape_to_json(*seq->shape())}};
    bool           small = seq->shape()->total_dim() <= 4096;
    nlohmann::json members = nlohmann::json::array();
    for(std::size_t n = 1; n <= len; ++n) {
        Element x = seq->at(n);
        csv << n << ',' << csv_num(seq->norm1(n)) << ',' << csv_num(seq->op_norm(n)) << ',' << csv_num(gauge(x)) << '\n';
        if(small) members.push_back(element_to_json(x));
    }
    if(small) doc["members"] = members;

    ResultBundle res;
    res.files["sequence.csv"] = csv.str();
    res.files["sequence.json"] = doc.dump(1) + "\n";
    res.summary = {{"config", config_to_json(cfg)}, {"certified", true}, {"diagnostics", nlohmann::json::array()}};
    return finish(res, cfg.output);
}

int run_report(const Common &c, const std::vector<int> &ids) {
    std::uint64_t seed = c.seed.value_or(20240601);
    std::string   dir  = c.out.empty() ? "report" : c.out;
    std::vector<acceptance::CriterionResult> rs;
    for(int id : ids.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10} : ids) {
        if(id < 1 || id > 10) throw ValidationError("report: criterion ids lie in 1..10");
        rs.push_back(acceptance::run_criterion(id, seed));
        const auto &r = rs.back();
        std::printf("criterion %2d %s  %s  [%.1f s]  %s\n", r.id, r.pass ? "PASS" : "FAIL", r.title.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
    }
    ResultBundle res;
    std::ostringstream csv;
    csv << "id,pass,title,detail\n";
    for(const auto &r : rs) {
        res.certified = res.certified && r.pass;
        csv << r.id << ',' << (r.pass ? 1 : 0) << ",\"" << r.title << "\",\"" << r.detail << "\"\n";
        if(!r.pass) res.diagnostics.push_back("criterion " + std::to_string(r.id) + ": " + r.detail);
    }
    res.files["acceptance.csv"] = csv.str();
    res.summary                 = acceptance::acceptance_to_json(rs);
    res.summary["seed"]         = seed;
    res.summary["certified"]    = res.certified;
    res.summary["diagnostics"]  = res.diagnostics;
    return finish(res, dir);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Finite-dimensional von Neumann algebra L1 workbench"};
    app.require_subcommand(1);
    Common common;

    auto *gen = app.add_subcommand("gen", "materialize a generator prefix (sequence.csv, sequence.json)");
    add_common(gen, common);
    std::vector<std::pair<std::string, std::string>> ops{{"props", "randomized inequality, compression, lattice and isometry audits"},
                                                         {"l1const", "tail l1 constants of the generator prefix"},
                                                         {"extract", "finite orthogonal extraction on the normalized prefix"},
                                                         {"orthogonalize", "orthogonalization ledger (mode from config)"},
                                                         {"probe", "trichotomy probe and tau-null evidence"}};
    std::vector<CLI::App *> op_cmds;
    for(const auto &[name, help] : ops) {
        op_cmds.push_back(app.add_subcommand(name, help));
        add_common(op_cmds.back(), common);
    }
    auto *run = app.add_subcommand("run", "run the pipeline listed in the config");
    add_common(run, common);
    auto            *report = app.add_subcommand("report", "run the acceptance criteria and write summary.json");
    std::vector<int> ids;
    add_common(report, common, false);
    report->add_option("--criteria", ids, "subset of criterion ids (default: all)");

    try {
        app.parse(argc, argv);
    } catch(const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if(gen->parsed()) return run_gen(common);
        if(run->parsed()) {
            if(common.config.empty()) throw ValidationError("run: --config is required");
            return run_pipeline(common, "");
        }
        if(report->parsed()) return run_report(common, ids);
        for(std::size_t i = 0; i < ops.size(); ++i)
            if(op_cmds[i]->parsed()) return run_pipeline(common, ops[i].first);
    } catch(const ValidationError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch(const std::exception &e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
