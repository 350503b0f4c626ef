#include "oracles.hpp"
#include "vnl1/predual.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <random>

using namespace vnl1;

namespace {

double max_abs(const Element &x) {
    double m = 0;
    for(auto c : x.data()) m = std::max(m, std::abs(c));
    return m;
}

std::vector<Shape> shapes() {
    return {build_algebra({1, 1, 1, 1}, {0.25, 0.25, 0.25, 0.25}), build_algebra({4}, {1.0}), build_algebra({2, 3}, {1.0, 2.0}),
            build_algebra({2, 2, 2}, {0.5, 1.0, 2.5})};
}

} // namespace

TEST(FromDensity, TraceStateAndZero) {
    auto       s   = build_algebra({2, 3}, {1, 2});
    Functional tr  = from_density(Element::scalar(s, 1.0 / s->tau_unit()));
    EXPECT_NEAR(tr.norm(), 1.0, 1e-14);
    EXPECT_NEAR(tr(Element::identity(s)).real(), 1.0, 1e-14);
    EXPECT_EQ(from_density(Element(s)).norm(), 0.0);
}

TEST(FromDensity, EvaluateAndNormMatchOracle) {
    for(const auto &s : shapes())
        for(std::uint64_t seed = 0; seed < 10; ++seed) {
            Element    D = random_suite(s, RandomKind::generic, seed), y = random_suite(s, RandomKind::generic, seed + 9);
            Functional phi = from_density(D);
            EXPECT_LE(std::abs(phi(y) - trace(D * y)), 1e-10);
            EXPECT_NEAR(phi.norm(), oracle::trace_norm(D), 1e-9);
        }
}

TEST(Act, IdentityAndSupportReproduce) {
    auto       s   = build_algebra({2, 3}, {1, 2});
    Element    D   = random_suite(s, RandomKind::generic, 1) * random_suite(s, RandomKind::projection, 2);
    Functional phi = from_density(D);
    EXPECT_EQ(max_abs(act(Element::identity(s), phi, Side::left).density() - D), 0.0);
    Functional pr = act(phi.supports().right.element(), phi, Side::right);
    for(std::uint64_t seed = 0; seed < 5; ++seed) {
        Element y = random_suite(s, RandomKind::generic, 30 + seed);
        EXPECT_LE(std::abs(pr(y) - phi(y)), 1e-10);
    }
}

TEST(Act, EvaluationRoutesAgree) {
    for(const auto &s : shapes())
        for(std::uint64_t seed = 0; seed < 10; ++seed) {
            Element    a = random_suite(s, RandomKind::generic, seed), y = random_suite(s, RandomKind::generic, seed + 1);
            Functional phi = from_density(random_suite(s, RandomKind::generic, seed + 2));
            // a.phi = phi(. a), phi.a = phi(a .)
            EXPECT_LE(std::abs(act(a, phi, Side::left)(y) - phi(y * a)), 1e-10);
            EXPECT_LE(std::abs(act(a, phi, Side::right)(y) - phi(a * y)), 1e-10);
        }
}

TEST(AbsAdjoint, PositiveAndSignedExamples) {
    auto       s   = build_algebra({2, 2}, {1, 1});
    Functional pos = from_density(random_suite(s, RandomKind::positive, 3));
    auto       aa  = abs_and_adjoint(pos);
    EXPECT_LE(max_abs(aa.abs.density() - pos.density()), 1e-10);
    EXPECT_LE(max_abs(aa.adjoint.density() - pos.density()), 1e-10);

    auto       m2  = build_algebra({2}, {1.0});
    std::vector<double> v{0.5, -0.5};
    Functional phi = from_density(Element::diagonal(m2, v));
    auto       ab  = abs_and_adjoint(phi);
    EXPECT_LE(max_abs(ab.abs.density() - Element::scalar(m2, 0.5)), 1e-12);
    EXPECT_NEAR(ab.abs.norm(), 1.0, 1e-12);
}

TEST(AbsAdjoint, RelationsOnRandomDensities) {
    for(const auto &s : shapes())
        for(std::uint64_t seed = 0; seed < 10; ++seed) {
            Functional phi = from_density(random_suite(s, RandomKind::generic, seed));
            auto       aa  = abs_and_adjoint(phi);
            EXPECT_TRUE(is_positive(aa.abs));
            EXPECT_TRUE(is_positive(aa.abs_adjoint));
            EXPECT_NEAR(aa.abs.norm(), phi.norm(), 1e-9);
            EXPECT_NEAR(phi.abs_value(Element::identity(s)).real(), oracle::trace_norm(phi.density()), 1e-9);
            // phi = u|phi| and |phi| = u* phi at the density level
            EXPECT_LE(trace_norm(phi.density() - phi.phase() * phi.abs_density()), 1e-9);
            EXPECT_LE(trace_norm(phi.abs_density() - phi.phase().adjoint() * phi.density()), 1e-9);
            EXPECT_LE(max_abs(aa.adjoint.density() - phi.density().adjoint()), 1e-14);
            Element a = random_suite(s, RandomKind::generic, seed + 40);
            EXPECT_LE(std::abs(phi.adjoint_value(a) - aa.adjoint(a)), 1e-10);
        }
}

TEST(AbsAdjoint, AbsoluteValueContinuousAlongPaths) {
    for(const auto &s : shapes())
        for(std::uint64_t seed = 0; seed < 5; ++seed) {
            Element             D = random_suite(s, RandomKind::generic, seed), E = random_suite(s, RandomKind::generic, seed + 20);
            Functional          phi = from_density(D);
            std::vector<double> gaps;
            for(double h : {1e-2, 1e-3, 1e-4}) {
                Functional psi = from_density(D + (h / trace_norm(E)) * E);
                // trace-norm rounding is absolute, of order 1e-12 * ||D||_1
                EXPECT_NEAR(distance(phi, psi), h, 1e-12 * std::max(1.0, trace_norm(D)));
                gaps.push_back(trace_norm(phi.abs_density() - psi.abs_density()));
            }
            EXPECT_LT(gaps[1], gaps[0]);
            EXPECT_LT(gaps[2], gaps[1]);
        }
}

TEST(Supports, InvertibleAndMatrixUnit) {
    auto       s   = build_algebra({2, 3}, {1, 2});
    Functional inv = from_density(random_suite(s, RandomKind::generic, 5));
    EXPECT_LE(max_abs(inv.supports().left.element() - Element::identity(s)), 1e-9);
    EXPECT_LE(max_abs(inv.supports().right.element() - Element::identity(s)), 1e-9);

    auto    m2 = build_algebra({2}, {1.0});
    Element e12(m2);
    e12.block(0)(0, 1) = 1.0;
    auto sp            = supports(from_density(e12));
    std::vector<double> d1{1, 0}, d2{0, 1};
    EXPECT_LE(max_abs(sp.left.element() - Element::diagonal(m2, d1)), 1e-12);
    EXPECT_LE(max_abs(sp.right.element() - Element::diagonal(m2, d2)), 1e-12);
}

TEST(Supports, RankAndReproduction) {
    auto s = build_algebra({4, 3}, {1.0, 0.5});
    for(std::uint64_t seed = 0; seed < 10; ++seed) {
        Element    p   = random_suite(s, RandomKind::projection, seed);
        Element    D   = random_suite(s, RandomKind::generic, seed + 1) * p;
        Functional phi = from_density(D);
        // x is generic, so rank(x p) = rank p = tr p on each block
        int        rank0 = static_cast<int>(std::lround(p.block(0).trace().real()));
        EXPECT_EQ(phi.supports().right.ranks()[0], rank0);
        EXPECT_EQ(phi.supports().left.ranks()[0], rank0);
        Functional tps = compress(phi, phi.supports().left, phi.supports().right);
        EXPECT_LE(distance(tps, phi), 1e-9);
    }
}

TEST(Orthogonal, Examples) {
    auto    s = build_algebra({2, 2}, {1, 1});
    Element a = random_suite(s, RandomKind::positive, 1), b = random_suite(s, RandomKind::positive, 2);
    a.block(1).setZero();
    b.block(0).setZero();
    Functional phi = from_density(a), psi = from_density(b);
    EXPECT_TRUE(are_orthogonal(phi, psi));
    EXPECT_FALSE(are_orthogonal(phi, phi));
    EXPECT_NEAR(distance(phi, psi), phi.norm() + psi.norm(), 1e-9);
}

TEST(Orthogonal, AgreesWithDensityCriterion) {
    for(const auto &s : shapes())
        for(std::uint64_t seed = 0; seed < 10; ++seed) {
            Projection p(random_suite(s, RandomKind::projection, seed));
            Element    x  = random_suite(s, RandomKind::generic, seed + 3);
            Element    a  = p.element() * x * p.element();
            Element    b  = p.complement().element() * x * p.complement().element();
            Element    c  = random_suite(s, RandomKind::generic, seed + 4);
            // p = 0 or 1 leaves a rounding-level corner whose support is noise
            if(p.is_zero() || p.complement().is_zero()) continue;
            EXPECT_EQ(are_orthogonal(from_density(a), from_density(b)), is_orthogonal_elements(a, b, 1e-9));
            EXPECT_EQ(are_orthogonal(from_density(a), from_density(c)), is_orthogonal_elements(a, c, 1e-9));
        }
}

TEST(Invariants, SpanIsometryForOrthogonalFamilies) {
    auto            s = build_algebra({2, 3}, {1.0, 0.5});
    std::mt19937_64 rng(7);
    Element         U = random_suite(s, RandomKind::unitary, rng), V = random_suite(s, RandomKind::unitary, rng);
    std::vector<Functional> fam;
    for(std::size_t i = 0; i < s->total_dim(); ++i) {
        std::vector<double> d(s->total_dim(), 0.0);
        d[i] = 1;
        fam.push_back(normalized(from_density(U * Element::diagonal(s, d) * V.adjoint())));
    }
    std::normal_distribution<double> g(0, 1);
    for(int t = 0; t < 100; ++t) {
        Element sum(s);
        double  l1 = 0;
        for(const auto &f : fam) {
            cplx a(g(rng), g(rng));
            sum += a * f.density();
            l1 += std::abs(a);
        }
        EXPECT_NEAR(trace_norm(sum), l1, 1e-9 * l1);
    }
}

TEST(Normalized, RejectsZero) {
    auto s = build_algebra({2}, {1.0});
    EXPECT_THROW(normalized(from_density(Element(s))), PreconditionError);
    EXPECT_NEAR(normalized(from_density(random_suite(s, RandomKind::generic, 1))).norm(), 1.0, 1e-12);
}

TEST(Serialization, FunctionalRoundTrip) {
    auto       s   = build_algebra({2, 3}, {1, 2});
    Functional phi = from_density(random_suite(s, RandomKind::generic, 2));
    EXPECT_EQ(max_abs(functional_from_json(functional_to_json(phi)).density() - phi.density()), 0.0);
}
