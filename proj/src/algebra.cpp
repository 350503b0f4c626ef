#include "vnl1/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

namespace vnl1 {

AlgebraShape::AlgebraShape(std::vector<int> dims, std::vector<double> weights) : dims_(std::move(dims)), weights_(std::move(weights)) {
    if(dims_.empty()) throw ValidationError("algebra: empty block list");
    if(dims_.size() != weights_.size())
        throw ValidationError("algebra: " + std::to_string(dims_.size()) + " dims but " + std::to_string(weights_.size()) + " weights");
    offsets_.reserve(dims_.size() + 1);
    rows_.reserve(dims_.size() + 1);
    offsets_.push_back(0);
    rows_.push_back(0);
    for(std::size_t j = 0; j < dims_.size(); ++j) {
        if(dims_[j] < 1) throw ValidationError("algebra: block " + std::to_string(j) + " has dimension < 1");
        if(!(weights_[j] > 0) || !std::isfinite(weights_[j]))
            throw ValidationError("algebra: block " + std::to_string(j) + " has non-positive weight");
        auto n = static_cast<std::size_t>(dims_[j]);
        offsets_.push_back(offsets_.back() + n * n);
        rows_.push_back(rows_.back() + n);
        max_dim_ = std::max(max_dim_, dims_[j]);
        tau_unit_ += weights_[j] * static_cast<double>(n);
    }
}

double AlgebraShape::tol(double scale) const { return kBaseTol * std::max(1.0, scale) * max_dim_; }

Shape build_algebra(std::vector<int> dims, std::vector<double> weights) {
    return std::make_shared<const AlgebraShape>(std::move(dims), std::move(weights));
}

Shape diagonal_algebra(std::size_t atoms) {
    if(atoms == 0) throw ValidationError("diagonal_algebra: zero atoms");
    return build_algebra(std::vector<int>(atoms, 1), std::vector<double>(atoms, 1.0 / static_cast<double>(atoms)));
}

bool same_shape(const Shape &a, const Shape &b) { return a == b || (a && b && *a == *b); }

void require_same_shape(const Shape &a, const Shape &b, const char *where) {
    if(!same_shape(a, b)) throw ShapeMismatch(std::string(where) + ": shape mismatch");
}

Element::Element(Shape shape) : shape_(std::move(shape)) {
    if(!shape_) throw ValidationError("Element: null shape");
    data_.assign(shape_->num_entries(), cplx(0));
}

Element Element::identity(const Shape &shape) { return scalar(shape, 1.0); }

Element Element::scalar(const Shape &shape, cplx value) {
    Element x(shape);
    for(std::size_t j = 0; j < shape->num_blocks(); ++j) {
        int   n = shape->dim(j);
        cplx *d = x.block_data(j);
        for(int i = 0; i < n; ++i) d[i * n + i] = value;
    }
    return x;
}

Element Element::from_blocks(const Shape &shape, const std::vector<Matrix> &blocks) {
    if(blocks.size() != shape->num_blocks()) throw ShapeMismatch("from_blocks: block count mismatch");
    Element x(shape);
    for(std::size_t j = 0; j < blocks.size(); ++j) {
        if(blocks[j].rows() != shape->dim(j) || blocks[j].cols() != shape->dim(j))
            throw ShapeMismatch("from_blocks: block " + std::to_string(j) + " has wrong size");
        x.block(j) = blocks[j];
    }
    return x;
}

Element Element::diagonal(const Shape &shape, std::span<const double> values) {
    if(values.size() != shape->total_dim()) throw ShapeMismatch("diagonal: expected " + std::to_string(shape->total_dim()) + " values");
    Element x(shape);
    for(std::size_t j = 0; j < shape->num_blocks(); ++j) {
        int   n = shape->dim(j);
        cplx *d = x.block_data(j);
        for(int i = 0; i < n; ++i) d[i * n + i] = values[shape->row_offset(j) + static_cast<std::size_t>(i)];
    }
    return x;
}

MatrixMap Element::block(std::size_t j) {
    int n = shape_->dim(j);
    return {block_data(j), n, n};
}

ConstMatrixMap Element::block(std::size_t j) const {
    int n = shape_->dim(j);
    return {block_data(j), n, n};
}

Element Element::adjoint() const {
    Element y(shape_);
    for(std::size_t j = 0; j < num_blocks(); ++j) {
        if(shape_->dim(j) == 1) y.block_data(j)[0] = std::conj(block_data(j)[0]);
        else y.block(j) = block(j).adjoint();
    }
    return y;
}

bool Element::is_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](const cplx &z) { return z == cplx(0); });
}

Element &Element::operator+=(const Element &other) {
    require_same_shape(shape_, other.shape_, "add");
    for(std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Element &Element::operator-=(const Element &other) {
    require_same_shape(shape_, other.shape_, "sub");
    for(std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Element &Element::operator*=(cplx s) {
    for(auto &z : data_) z *= s;
    return *this;
}

Element operator+(Element a, const Element &b) { return a += b; }
Element operator-(Element a, const Element &b) { return a -= b; }
Element operator-(Element a) { return a *= -1.0; }
Element operator*(cplx s, Element a) { return a *= s; }

Element operator*(const Element &a, const Element &b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Element c(a.shape());
    for(std::size_t j = 0; j < a.num_blocks(); ++j) {
        if(a.shape()->dim(j) == 1) c.block_data(j)[0] = a.block_data(j)[0] * b.block_data(j)[0];
        else c.block(j).noalias() = a.block(j) * b.block(j);
    }
    return c;
}

cplx trace(const Element &x) {
    const auto &s = *x.shape();
    cplx        t = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n = s.dim(j);
        const cplx *d = x.block_data(j);
        cplx        b = 0;
        for(int i = 0; i < n; ++i) b += d[i * n + i];
        t += s.weight(j) * b;
    }
    return t;
}

cplx trace_product(const Element &a, const Element &b) {
    require_same_shape(a.shape(), b.shape(), "trace_product");
    const auto &s = *a.shape();
    cplx        t = 0;
    for(std::size_t j = 0; j < s.num_blocks(); ++j) {
        int         n  = s.dim(j);
        const cplx *da = a.block_data(j);
        const cplx *db = b.block_data(j);
        cplx        acc = 0;
        // tr(AB) = sum_{r,c} A(r,c) B(c,r); column-major A(r,c) = da[c*n + r]
        for(int c = 0; c < n; ++c)
            for(int r = 0; r < n; ++r) acc += da[c * n + r] * db[r * n + c];
        t += s.weight(j) * acc;
    }
    return t;
}

double selfadjoint_defect(const Element &x) {
    double dev = 0, scale = 0;
    for(std::size_t j = 0; j < x.num_blocks(); ++j) {
        int         n = x.shape()->dim(j);
        const cplx *d = x.block_data(j);
        for(int c = 0; c < n; ++c)
            for(int r = 0; r < n; ++r) {
                dev   = std::max(dev, std::abs(d[c * n + r] - std::conj(d[r * n + c])));
                scale = std::max(scale, std::abs(d[c * n + r]));
            }
    }
    return scale > 0 ? dev / scale : 0.0;
}

nlohmann::json shape_to_json(const AlgebraShape &shape) {
    return nlohmann::json{{"dims", shape.dims()}, {"weights", shape.weights()}};
}

Shape shape_from_json(const nlohmann::json &j) {
    if(!j.is_object() || !j.contains("dims") || !j.contains("weights")) throw ValidationError("shape json: need \"dims\" and \"weights\"");
    return build_algebra(j.at("dims").get<std::vector<int>>(), j.at("weights").get<std::vector<double>>());
}

nlohmann::json element_to_json(const Element &x) {
    nlohmann::json j      = shape_to_json(*x.shape());
    nlohmann::json blocks = nlohmann::json::array();
    for(std::size_t b = 0; b < x.num_blocks(); ++b) {
        int            n   = x.shape()->dim(b);
        auto           m   = x.block(b);
        nlohmann::json arr = nlohmann::json::array();
        for(int r = 0; r < n; ++r)
            for(int c = 0; c < n; ++c) arr.push_back({m(r, c).real(), m(r, c).imag()});
        blocks.push_back(std::move(arr));
    }
    j["blocks"] = std::move(blocks);
    return j;
}

Element element_from_json(const nlohmann::json &j) {
    Shape shape = shape_from_json(j);
    if(!j.contains("blocks") || !j.at("blocks").is_array() || j.at("blocks").size() != shape->num_blocks())
        throw ValidationError("element json: \"blocks\" must list one entry array per block");
    Element x(shape);
    for(std::size_t b = 0; b < shape->num_blocks(); ++b) {
        int         n   = shape->dim(b);
        const auto &arr = j.at("blocks")[b];
        if(!arr.is_array() || arr.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
            throw ValidationError("element json: block " + std::to_string(b) + " has wrong entry count");
        auto m = x.block(b);
        for(int r = 0; r < n; ++r)
            for(int c = 0; c < n; ++c) {
                const auto &e = arr[static_cast<std::size_t>(r * n + c)];
                if(!e.is_array() || e.size() != 2) throw ValidationError("element json: entries are [re, im] pairs");
                m(r, c) = cplx(e[0].get<double>(), e[1].get<double>());
            }
    }
    return x;
}

std::uint64_t digest(std::span<const Element *const> xs) {
    std::uint64_t h = 14695981039346656037ull;
    auto          mix = [&h](const void *p, std::size_t len) {
        const auto *c = static_cast<const unsigned char *>(p);
        for(std::size_t i = 0; i < len; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    };
    for(const Element *x : xs) {
        if(!x || x->empty()) continue;
        mix(x->data().data(), x->data().size_bytes());
    }
    return h;
}

} // namespace vnl1
