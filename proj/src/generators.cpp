#include "vnl1/generators.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

namespace vnl1 {

Remark1Sequence::Remark1Sequence(std::size_t atoms, std::size_t length)
    : shape_(diagonal_algebra(atoms)), atoms_(atoms), length_(length) {
    if(length == 0 || length > atoms) throw ValidationError("remark1: length must lie in [1, atoms]");
}

Element Remark1Sequence::at(std::size_t n) const {
    check_index(n);
    Element     x(shape_);
    std::size_t k = support(n);
    for(std::size_t i = 0; i < k; ++i) x.data()[i] = static_cast<double>(n);
    return x;
}

double Remark1Sequence::exceedance(std::size_t n, double eps) const {
    check_index(n);
    double v = static_cast<double>(n);
    return v > eps + kTieRel * v ? static_cast<double>(support(n)) / static_cast<double>(atoms_) : 0.0;
}

double Remark1Sequence::op_norm(std::size_t n) const {
    check_index(n);
    return support(n) ? static_cast<double>(n) : 0.0;
}

double Remark1Sequence::norm1(std::size_t n) const {
    check_index(n);
    return static_cast<double>(n) * static_cast<double>(support(n)) / static_cast<double>(atoms_);
}

Remark2Sequence::Remark2Sequence(std::size_t atoms, std::size_t length, bool unbounded)
    : shape_(diagonal_algebra(atoms)), atoms_(atoms), length_(length), unbounded_(unbounded) {
    if(length == 0) throw ValidationError("remark2: length must be >= 1");
    if(levels(length).hi <= levels(length).lo) throw ValidationError("remark2: too few atoms to resolve [1/(n+1), 1/n[ at n = length");
}

Remark2Sequence::Levels Remark2Sequence::levels(std::size_t n) const {
    // Atom i stands for [i/N, (i+1)/N); it belongs to the interval when i/N lies in [1/(n+1), 1/n[.
    auto   N  = static_cast<double>(atoms_);
    auto   nd = static_cast<double>(n);
    double c  = unbounded_ ? nd * nd : 1.0;
    return {static_cast<std::size_t>(std::ceil(N / (nd + 1))), static_cast<std::size_t>(std::ceil(N / nd)), c * (nd * nd + 1 / nd), c / nd};
}

Element Remark2Sequence::at(std::size_t n) const {
    check_index(n);
    auto    lv = levels(n);
    Element x(shape_);
    for(std::size_t i = 0; i < atoms_; ++i) x.data()[i] = i >= lv.lo && i < lv.hi ? lv.peak : lv.floor;
    return x;
}

double Remark2Sequence::exceedance(std::size_t n, double eps) const {
    check_index(n);
    auto   lv     = levels(n);
    double margin = kTieRel * lv.peak;
    double count  = 0;
    if(lv.peak > eps + margin) count += static_cast<double>(lv.hi - lv.lo);
    if(lv.floor > eps + margin) count += static_cast<double>(atoms_ - (lv.hi - lv.lo));
    return count / static_cast<double>(atoms_);
}

double Remark2Sequence::op_norm(std::size_t n) const {
    check_index(n);
    return levels(n).peak;
}

double Remark2Sequence::norm1(std::size_t n) const {
    check_index(n);
    auto   lv = levels(n);
    double c  = static_cast<double>(lv.hi - lv.lo);
    return (lv.peak * c + lv.floor * (static_cast<double>(atoms_) - c)) / static_cast<double>(atoms_);
}

const std::vector<std::string> &generator_names() {
    static const std::vector<std::string> names{"remark1",        "remark2",       "remark2_unbounded", "disjoint_supports",
                                                "orthogonal_plus_noise", "matrix_corner", "random_density",  "planted_duplicated"};
    return names;
}

namespace {

Element random_unitary(const Shape &shape, std::mt19937_64 &rng) { return random_suite(shape, RandomKind::unitary, rng); }

std::size_t get_size(const nlohmann::json &p, const char *key, std::size_t def) {
    if(!p.contains(key)) return def;
    const auto &v = p.at(key);
    if(!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(std::string("parameter '") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

double get_real(const nlohmann::json &p, const char *key, double def) {
    if(!p.contains(key)) return def;
    if(!p.at(key).is_number()) throw ValidationError(std::string("parameter '") + key + "' must be a number");
    return p.at(key).get<double>();
}

bool get_bool(const nlohmann::json &p, const char *key, bool def) {
    if(!p.contains(key)) return def;
    if(!p.at(key).is_boolean()) throw ValidationError(std::string("parameter '") + key + "' must be a boolean");
    return p.at(key).get<bool>();
}

Shape default_shape(const Shape &given, std::vector<int> dims, std::vector<double> weights) {
    return given ? given : build_algebra(std::move(dims), std::move(weights));
}

} // namespace

std::vector<Element> planted_orthogonal(const Shape &shape, std::size_t count, bool positive, std::uint64_t seed) {
    const auto &s = *shape;
    if(count > s.total_dim()) throw ValidationError("planted_orthogonal: at most " + std::to_string(s.total_dim()) + " members fit the shape");
    std::mt19937_64                        rng(seed);
    Element                                U = random_unitary(shape, rng), V = positive ? U : random_unitary(shape, rng);
    std::uniform_real_distribution<double> angle(0, 2 * M_PI);
    std::vector<Element>                   out;
    for(std::size_t k = 0; k < count; ++k) {
        // Members take diagonal slots round-robin over blocks so that early members spread out.
        std::size_t j = k % s.num_blocks(), i = k / s.num_blocks();
        while(i >= static_cast<std::size_t>(s.dim(j))) {
            i -= static_cast<std::size_t>(s.dim(j));
            j = (j + 1) % s.num_blocks();
        }
        Element e(shape);
        e.block(j)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = positive ? cplx(1) : std::polar(1.0, angle(rng));
        Element x = U * e * V.adjoint();
        x *= 1.0 / s.weight(j);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Element> planted_duplicated(std::size_t pairs, std::size_t atoms_per_piece) {
    if(pairs == 0 || atoms_per_piece == 0) throw ValidationError("planted_duplicated: sizes must be positive");
    std::size_t          atoms = 2 * pairs * atoms_per_piece;
    Shape                shape = diagonal_algebra(atoms);
    std::vector<Element> out;
    // u_k, v_k are flat on their pieces with trace norm 1, so (u_k +- v_k)/2 has trace norm 1.
    double h = static_cast<double>(atoms) / static_cast<double>(atoms_per_piece) / 2;
    for(std::size_t k = 0; k < pairs; ++k) {
        Element a(shape), b(shape);
        for(std::size_t i = 0; i < atoms_per_piece; ++i) {
            a.data()[2 * k * atoms_per_piece + i]                   = h;
            a.data()[(2 * k + 1) * atoms_per_piece + i]             = h;
            b.data()[2 * k * atoms_per_piece + i]                   = h;
            b.data()[(2 * k + 1) * atoms_per_piece + i]             = -h;
        }
        out.push_back(std::move(a));
        out.push_back(std::move(b));
    }
    return out;
}

std::unique_ptr<ElementSequence> generate_sequence(const std::string &name, const nlohmann::json &params_in, const Shape &shape,
                                                   std::uint64_t seed) {
    const nlohmann::json params = params_in.is_null() ? nlohmann::json::object() : params_in;
    if(!params.is_object()) throw ValidationError("generator parameters must be a JSON object");
    if(name == "remark1") {
        std::size_t atoms = get_size(params, "atoms", std::size_t{1} << 20);
        return std::make_unique<Remark1Sequence>(atoms, get_size(params, "length", atoms));
    }
    if(name == "remark2" || name == "remark2_unbounded") {
        std::size_t atoms = get_size(params, "atoms", std::size_t{1} << 16);
        return std::make_unique<Remark2Sequence>(atoms, get_size(params, "length", 32), name == "remark2_unbounded");
    }
    if(name == "disjoint_supports" || name == "orthogonal_plus_noise") {
        Shape       sh    = default_shape(shape, {4, 4}, {1.0, 1.0});
        std::size_t len   = get_size(params, "length", sh->total_dim());
        bool        pos   = get_bool(params, "positive", false);
        auto        xs    = planted_orthogonal(sh, len, pos, seed);
        double      noise = name == "orthogonal_plus_noise" ? get_real(params, "noise", 1e-3) : 0.0;
        if(noise < 0) throw ValidationError("orthogonal_plus_noise: noise must be >= 0");
        if(noise > 0) {
            std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
            for(auto &x : xs) {
                Element g = random_suite(sh, pos ? RandomKind::positive : RandomKind::generic, rng);
                g *= noise / trace_norm(g);
                x += g;
            }
        }
        return std::make_unique<VectorSequence>(std::move(xs), name);
    }
    if(name == "matrix_corner") {
        int         dim = static_cast<int>(get_size(params, "dim", 16));
        std::size_t len = get_size(params, "length", static_cast<std::size_t>(dim));
        if(dim < 1 || len < 1 || len > static_cast<std::size_t>(dim)) throw ValidationError("matrix_corner: need 1 <= length <= dim");
        Shape           sh = build_algebra({dim}, {1.0 / dim});
        std::mt19937_64 rng(seed);
        Element         U = random_unitary(sh, rng), V = random_unitary(sh, rng);
        std::vector<Element> xs;
        for(std::size_t k = 1; k <= len; ++k) {
            // Corner e_{11} + ... + e_{dd}, d = dim - k + 1, rotated and scaled to trace norm 1.
            int     d = dim - static_cast<int>(k) + 1;
            Element c(sh);
            for(int i = 0; i < d; ++i) c.block(0)(i, i) = 1.0;
            Element x = U * c * V.adjoint();
            x *= static_cast<double>(dim) / d;
            xs.push_back(std::move(x));
        }
        return std::make_unique<VectorSequence>(std::move(xs), name);
    }
    if(name == "random_density") {
        Shape           sh   = default_shape(shape, {2, 3}, {1.0, 0.5});
        std::size_t     len  = get_size(params, "length", 8);
        RandomKind      kind = random_kind_from_string(params.value("kind", std::string("generic")));
        std::mt19937_64 rng(seed);
        std::vector<Element> xs;
        for(std::size_t k = 0; k < len; ++k) {
            Element x = random_suite(sh, kind, rng);
            double  n = trace_norm(x);
            if(n > 0) x *= 1.0 / n;
            xs.push_back(std::move(x));
        }
        if(xs.empty()) throw ValidationError("random_density: length must be >= 1");
        return std::make_unique<VectorSequence>(std::move(xs), name);
    }
    if(name == "planted_duplicated")
        return std::make_unique<VectorSequence>(planted_duplicated(get_size(params, "pairs", 32), get_size(params, "atoms_per_piece", 2)), name);
    throw ValidationError("unknown generator '" + name + "'");
}

std::vector<Functional> to_functionals(const std::vector<Element> &xs) {
    std::vector<Functional> out;
    for(const auto &x : xs) out.push_back(from_density(x));
    return out;
}

std::vector<Functional> to_functionals(const ElementSequence &xs) {
    std::vector<Functional> out;
    for(std::size_t n = 1; n <= xs.size(); ++n) out.push_back(from_density(xs.at(n)));
    return out;
}

} // namespace vnl1
