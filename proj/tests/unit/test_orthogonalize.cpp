#include "oracles.hpp"
#include "vnl1/generators.hpp"
#include "vnl1/measure.hpp"
#include "vnl1/orthogonalize.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sstream>

using namespace vnl1;

namespace {

bool two_sided_orthogonal(const std::vector<Element> &ys) {
    for(std::size_t i = 0; i < ys.size(); ++i)
        for(std::size_t j = i + 1; j < ys.size(); ++j) {
            double scale = std::max(1.0, operator_norm(ys[i]) * operator_norm(ys[j]));
            if(operator_norm(ys[i] * ys[j].adjoint()) > 1e-10 * scale || operator_norm(ys[i].adjoint() * ys[j]) > 1e-10 * scale) return false;
        }
    return true;
}

std::vector<double> dyadic_etas(std::size_t n, double scale) {
    std::vector<double> e;
    for(std::size_t k = 1; k <= n; ++k) e.push_back(scale * std::ldexp(1.0, -static_cast<int>(k)));
    return e;
}

} // namespace

TEST(TauNull, ZeroSequenceGivesZeroOutputs) {
    auto           s = build_algebra({2, 2}, {1.0, 1.0});
    VectorSequence seq(std::vector<Element>(6, Element(s)));
    auto           led = tau_null_orthogonalize(seq, 4);
    EXPECT_TRUE(led.certified);
    ASSERT_EQ(led.outputs.size(), 4u);
    for(std::size_t l = 0; l < 4; ++l) {
        EXPECT_TRUE(led.outputs[l].is_zero());
        EXPECT_EQ(led.bounds[l], 0.0);
    }
}

TEST(TauNull, Remark1ChainBound) {
    Remark1Sequence seq(1 << 14, 1 << 14);
    auto            led = tau_null_orthogonalize(seq, 10);
    ASSERT_GE(led.achieved_depth, 3u);
    for(std::size_t l = 1; l <= led.achieved_depth; ++l) {
        double d = oracle::trace_norm(seq.at(led.indices[l - 1]) - led.outputs[l - 1]);
        EXPECT_LE(d, std::ldexp(1.0, -static_cast<int>(l - 1)) + 1e-9);
        EXPECT_NEAR(d, led.distances[l - 1], 1e-12);
        EXPECT_LE(d, led.bounds[l - 1] + 1e-9);
        EXPECT_LE(led.bounds[l - 1], std::ldexp(1.0, -static_cast<int>(l - 1)) + 1e-9);
        if(l > 1) EXPECT_GT(led.indices[l - 1], led.indices[l - 2]);
    }
    EXPECT_TRUE(two_sided_orthogonal(led.outputs));
    EXPECT_TRUE(led.orthogonal);
    // not enough indices for depth 10 at this discretization
    EXPECT_FALSE(led.certified);
    EXPECT_FALSE(led.diagnostic.empty());
}

TEST(TauNull, OrthogonalInputOnlyLosesSpectralTail) {
    auto                 s = diagonal_algebra(32);
    std::vector<Element> xs;
    for(std::size_t n = 0; n < 32; ++n) {
        std::vector<double> d(32, 0.0);
        d[n] = 4 * std::ldexp(1.0, -static_cast<int>(n + 1));
        xs.push_back(Element::diagonal(s, d));
    }
    VectorSequence seq(xs);
    auto           led = tau_null_orthogonalize(seq, 4);
    EXPECT_TRUE(led.certified) << led.diagnostic;
    for(std::size_t l = 1; l <= led.achieved_depth; ++l) {
        EXPECT_LE(led.distances[l - 1], std::ldexp(1.0, -static_cast<int>(l)) + 1e-12);
        EXPECT_LE(led.bounds[l - 1], std::ldexp(1.0, -static_cast<int>(l)) + 1e-12);
    }
}

TEST(TauNull, NoncommutativeCornersStayOrthogonal) {
    auto seq = generate_sequence("matrix_corner", {{"dim", 12}}, nullptr, 3);
    auto led = tau_null_orthogonalize(*seq, 3);
    EXPECT_GE(led.achieved_depth, 1u);
    EXPECT_TRUE(two_sided_orthogonal(led.outputs));
    for(std::size_t l = 0; l < led.achieved_depth; ++l) EXPECT_LE(led.distances[l], led.bounds[l] + 1e-9);
}

TEST(TauNull, OutputGaugesDecay) {
    Remark1Sequence seq(1 << 14, 1 << 14);
    auto            led = tau_null_orthogonalize(seq, 6);
    ASSERT_GE(led.outputs.size(), 3u);
    for(std::size_t l = 0; l < led.outputs.size(); ++l) EXPECT_NEAR(led.gauges[l], gauge(led.outputs[l]), 1e-15);
    EXPECT_LT(led.gauges.back(), led.gauges.front());
}

TEST(TauNull, RejectsZeroDepth) {
    Remark1Sequence seq(64, 64);
    EXPECT_THROW(tau_null_orthogonalize(seq, 0), ValidationError);
}

TEST(AlmostIsometric, OrthogonalInputIsFixed) {
    auto s    = build_algebra({4, 4}, {1.0, 1.0});
    auto phis = to_functionals(planted_orthogonal(s, 6, false, 4));
    auto led  = almost_isometric_orthogonalize(phis, 4);
    EXPECT_TRUE(led.certified) << led.diagnostic;
    for(double d : led.distances) EXPECT_LE(d, 1e-9);
}

TEST(AlmostIsometric, DepthOneKeepsFirstMember) {
    auto seq  = generate_sequence("random_density", {{"length", 3}}, nullptr, 5);
    auto phis = to_functionals(*seq);
    AlmostIsometricOptions o;
    o.delta0 = 0.99;
    auto led = almost_isometric_orthogonalize(std::span(phis).first(1), 1, o);
    ASSERT_EQ(led.outputs.size(), 1u);
    EXPECT_EQ(led.indices[0], 1u);
    EXPECT_LE(oracle::trace_norm(led.outputs[0] - normalized(phis[0]).density()), 1e-12);
}

TEST(AlmostIsometric, PlantedNoiseWithinCauchyBound) {
    auto seq  = generate_sequence("orthogonal_plus_noise", {{"noise", 1e-4}, {"length", 5}}, nullptr, 6);
    auto phis = to_functionals(*seq);
    AlmostIsometricOptions o;
    o.eta    = dyadic_etas(5, 1.0);
    auto led = almost_isometric_orthogonalize(phis, 5, o);
    EXPECT_TRUE(led.certified) << led.diagnostic;
    ASSERT_EQ(led.achieved_depth, 5u);
    std::vector<Element> outs = led.outputs;
    EXPECT_TRUE(two_sided_orthogonal(outs));
    for(std::size_t k = 0; k < 5; ++k) {
        double tail = 0;
        for(std::size_t l = k; l < 5; ++l) tail += o.eta[l];
        double d = oracle::trace_norm(normalized(phis[led.indices[k] - 1]).density() - led.outputs[k]);
        EXPECT_LE(d, tail + 1e-9);
        EXPECT_NEAR(oracle::trace_norm(led.outputs[k]), 1.0, 1e-9);
    }
}

TEST(AlmostIsometric, RejectsNonIsometricPrefix) {
    auto phis = to_functionals(planted_duplicated(3));
    EXPECT_THROW(almost_isometric_orthogonalize(phis, 3), PreconditionError);
}

TEST(AlmostIsometric, TruncationConsistency) {
    auto                   s    = build_algebra({8, 8}, {1.0, 1.0});
    auto                   seq  = generate_sequence("orthogonal_plus_noise", {{"noise", 1e-4}, {"length", 12}}, s, 7);
    auto                   phis = to_functionals(*seq);
    AlmostIsometricOptions o;
    o.eta      = dyadic_etas(4, 0.1);
    auto short_ = almost_isometric_orthogonalize(phis, 3, o);
    auto long_  = almost_isometric_orthogonalize(phis, 4, o);
    ASSERT_EQ(short_.achieved_depth, 3u);
    ASSERT_EQ(long_.achieved_depth, 4u);
    for(std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(short_.indices[k], long_.indices[k]);
        EXPECT_LE(oracle::trace_norm(short_.outputs[k] - long_.outputs[k]), o.eta[3] + 1e-9);
    }
}

TEST(Probe, DyadicScalarsAreNormNull) {
    auto                 s = build_algebra({2}, {0.5});
    std::vector<Element> xs;
    for(int n = 1; n <= 20; ++n) xs.push_back(Element::scalar(s, std::ldexp(1.0, -n)));
    auto rep = trichotomy_probe(VectorSequence(xs));
    EXPECT_EQ(rep.verdict, "norm-null-evidence");
}

TEST(Probe, Remark1IsAlmostIsometric) {
    Remark1Sequence seq(1 << 12, 64);
    auto            rep = trichotomy_probe(seq);
    EXPECT_EQ(rep.verdict, "almost-isometric-evidence");
    EXPECT_TRUE(rep.tail.almost_isometric_trend);
    EXPECT_TRUE(rep.gauge_decreasing);
}

TEST(Probe, Remark2UnboundedKeepsGauge) {
    auto seq = generate_sequence("remark2_unbounded", nullptr, nullptr, 1);
    auto rep = trichotomy_probe(*seq);
    EXPECT_EQ(rep.verdict, "almost-isometric-evidence");
    EXPECT_FALSE(rep.gauge_decreasing);
}

TEST(Ledger, CsvAndJson) {
    Remark1Sequence    seq(1 << 10, 1 << 10);
    auto               led = tau_null_orthogonalize(seq, 3);
    std::ostringstream os;
    write_ledger_csv(os, led);
    std::string csv = os.str();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "l,index,bound,measured_distance,gauge");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), led.achieved_depth + 1);
    auto j = ledger_to_json(led);
    EXPECT_EQ(j["kind"], "tau-null");
    EXPECT_EQ(j["indices"].size(), led.achieved_depth);
}
