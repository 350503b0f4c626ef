#pragma once
// Lazily materialized sequence prefixes x_1, ..., x_size (1-based, as in the theory).

#include "vnl1/algebra.hpp"

#include <string>
#include <vector>

namespace vnl1 {

class ElementSequence {
  public:
    virtual ~ElementSequence() = default;

    [[nodiscard]] virtual const Shape &shape() const = 0;
    [[nodiscard]] virtual std::size_t  size() const  = 0;
    [[nodiscard]] virtual Element      at(std::size_t n) const = 0;
    [[nodiscard]] virtual std::string  name() const { return "sequence"; }

    // Generators with closed forms override these; the defaults materialize x_n.
    [[nodiscard]] virtual double exceedance(std::size_t n, double eps) const;
    [[nodiscard]] virtual double op_norm(std::size_t n) const;
    [[nodiscard]] virtual double norm1(std::size_t n) const;

  protected:
    void check_index(std::size_t n) const;
};

class VectorSequence final : public ElementSequence {
  public:
    explicit VectorSequence(std::vector<Element> xs, std::string name = "vector");

    [[nodiscard]] const Shape &shape() const override { return xs_.front().shape(); }
    [[nodiscard]] std::size_t  size() const override { return xs_.size(); }
    [[nodiscard]] Element      at(std::size_t n) const override;
    [[nodiscard]] std::string  name() const override { return name_; }
    [[nodiscard]] const std::vector<Element> &elements() const { return xs_; }

  private:
    std::vector<Element> xs_;
    std::string          name_;
};

// The first `length` members of another sequence, which must outlive the view.
class PrefixSequence final : public ElementSequence {
  public:
    PrefixSequence(const ElementSequence &base, std::size_t length);

    [[nodiscard]] const Shape &shape() const override { return base_.shape(); }
    [[nodiscard]] std::size_t  size() const override { return length_; }
    [[nodiscard]] Element      at(std::size_t n) const override;
    [[nodiscard]] std::string  name() const override { return base_.name(); }
    [[nodiscard]] double       exceedance(std::size_t n, double eps) const override;
    [[nodiscard]] double       op_norm(std::size_t n) const override;
    [[nodiscard]] double       norm1(std::size_t n) const override;

  private:
    const ElementSequence &base_;
    std::size_t            length_;
};

} // namespace vnl1
