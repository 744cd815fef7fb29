#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "causallab/causal_sampler.hpp"
#include "causallab/dataset_io.hpp"
#include "test_support.hpp"

using namespace causallab;
using causallab::testing::ks_statistic;
using causallab::testing::scratch_dir;
using causallab::testing::uniform_cdf;

namespace {

constexpr double kRank1Tol = 1e-12;

double second_singular_value(const JointTable& j) {
    Eigen::MatrixXd m(j.k_x(), j.k_y());
    for (std::size_t x = 0; x < j.k_x(); ++x) {
        for (std::size_t y = 0; y < j.k_y(); ++y) m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = j(x, y);
    }
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(1);
}

void expect_valid(const JointTable& j) {
    double s = 0.0;
    for (double v : j.entries()) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GE(v, 0.0);
        s += v;
    }
    ASSERT_NEAR(s, 1.0, kSumTolerance);
}

} // namespace

TEST(Structure, NamesAndCodesRoundTrip) {
    for (auto s : kAllStructures) {
        EXPECT_EQ(parse_structure(name(s)), s);
        EXPECT_EQ(structure_from_code(code(s)), s);
        EXPECT_EQ(parse_structure(std::to_string(code(s))), s);
    }
    EXPECT_THROW(parse_structure("sideways"), InvariantError);
    EXPECT_THROW(structure_from_code(6), InvariantError);
}

TEST(SampleInstance, IndependentHasZeroMutualInformation) {
    RngStream rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto item = sample_instance(CausalStructure::kIndependent, 2, 2, {}, rng);
        ASSERT_NEAR(mutual_information(item.joint), 0.0, 1e-12);
        ASSERT_FALSE(item.h_cardinality.has_value());
    }
}

TEST(SampleInstance, DegenerateConfounderGivesRankOne) {
    SamplerOptions opt;
    RngStream rng(2);
    for (const auto& forced : {std::vector<double>{1.0, 0.0}, std::vector<double>{1.0}}) {
        opt.forced_confounder_marginal = forced;
        for (std::size_t k : {2u, 4u}) {
            const auto item = sample_instance(CausalStructure::kConfounded, k, k + 1, {}, rng, opt);
            EXPECT_LT(second_singular_value(item.joint), kRank1Tol);
            EXPECT_EQ(item.h_cardinality, static_cast<int>(forced.size()));
        }
    }
}

TEST(SampleInstance, ConfoundedMarginalIsMixtureOfRows) {
    // Replay the stream: P(x|h) rows are the first |H| mechanism draws.
    SamplerOptions opt;
    opt.forced_confounder_marginal = std::vector<double>{0.2, 0.5, 0.3};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream rng(seed), replay(seed);
        const auto item = sample_instance(CausalStructure::kConfounded, 3, 4, {}, rng, opt);
        const auto mix = DirichletMixture::flat(3);
        std::vector<double> expected(3, 0.0);
        for (double ph : *opt.forced_confounder_marginal) {
            const auto row = sample_from_mixture(mix, replay);
            for (std::size_t x = 0; x < 3; ++x) expected[x] += ph * row[x];
        }
        const auto mx = marginal_x(item.joint);
        for (std::size_t x = 0; x < 3; ++x) ASSERT_NEAR(mx[x], expected[x], 1e-12);
    }
}

TEST(SampleInstance, FlatXToYCauseMarginalIsUniform) {
    RngStream root(3);
    std::vector<double> a(100000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        RngStream rng = root.split(i);
        const auto j = sample_instance(CausalStructure::kXToY, 2, 2, {}, rng).joint;
        a[i] = j(0, 0) + j(0, 1);
    }
    EXPECT_LT(ks_statistic(a, uniform_cdf), 0.01);
}

TEST(SampleInstance, YToXIsTransposedXToYStreamForStream) {
    HyperpriorDescriptor hp{4.0, 10, 99};
    for (auto [direct, reversed] : {std::pair{CausalStructure::kXToY, CausalStructure::kYToX},
                                    std::pair{CausalStructure::kXToYConfounded, CausalStructure::kYToXConfounded}}) {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            RngStream a(seed), b(seed);
            const auto fwd = sample_instance(direct, 3, 5, hp, a);
            const auto rev = sample_instance(reversed, 5, 3, hp, b);
            const auto t = transpose(fwd.joint);
            ASSERT_EQ(t.k_x(), rev.joint.k_x());
            // equal up to the rounding of the final normalisation
            for (std::size_t i = 0; i < t.entries().size(); ++i) ASSERT_NEAR(t.entries()[i], rev.joint.entries()[i], 1e-15);
            ASSERT_EQ(fwd.h_cardinality, rev.h_cardinality);
        }
    }
}

TEST(SampleInstance, ConfounderCardinalityInRange) {
    RngStream rng(4);
    int lo = 1000, hi = 0;
    for (int i = 0; i < 5000; ++i) {
        const auto item = sample_instance(CausalStructure::kConfounded, 2, 2, {}, rng);
        lo = std::min(lo, *item.h_cardinality);
        hi = std::max(hi, *item.h_cardinality);
    }
    EXPECT_EQ(lo, 2);
    EXPECT_EQ(hi, 100);
}

TEST(SampleInstance, ValiditySweepPerStructure) {
    // 10^6 draws for the cheap structures, 10^5 for those that draw up to
    // 100 confounder states per item; tables are binary.
    for (auto s : kAllStructures) {
        const std::size_t n = is_confounded(s) ? 100000 : 1000000;
        const RngStream root(static_cast<std::uint64_t>(code(s)) + 100);
        for (std::size_t i = 0; i < n; ++i) {
            RngStream rng = root.split(i);
            expect_valid(sample_instance(s, 2, 2, {}, rng).joint);
            if (::testing::Test::HasFatalFailure()) return;
        }
    }
}

TEST(SampleInstance, ValidityUnderExtremeHyperpriors) {
    for (auto variant : {ConfoundingVariant::kCanonical, ConfoundingVariant::kFactorProduct}) {
        SamplerOptions opt;
        opt.variant = variant;
        for (std::uint64_t h = 0; h < 10; ++h) {
            const HyperpriorDescriptor hp{8.0, 10, h};
            RngStream rng(h);
            for (auto s : kAllStructures) {
                for (int i = 0; i < 200; ++i) {
                    expect_valid(sample_instance(s, 3, 4, hp, rng, opt).joint);
                    if (::testing::Test::HasFatalFailure()) return;
                }
            }
        }
    }
}

TEST(Hyperprior, DescriptorIsDeterministicAndFlatWhenZero) {
    const HyperpriorDescriptor hp{3.0, 10, 5};
    const auto a = hp.root_prior(4), b = hp.root_prior(4);
    ASSERT_EQ(a.n_components(), 10u);
    for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(a.components()[c], b.components()[c]);
    EXPECT_FALSE(hp.root_prior(4).components()[0] == hp.mechanism_prior(4).components()[0]);
    const HyperpriorDescriptor flat{};
    EXPECT_EQ(flat.mechanism_prior(7).n_components(), 1u);
    EXPECT_EQ(flat.mechanism_prior(7).components()[0], DirichletParams::flat(7));
}

TEST(BuildDataset, CountsAndOrder) {
    const auto ds = build_dataset(2, 2, 10000, kAllStructures, {}, 1);
    EXPECT_EQ(ds.size(), 60000u);
    for (auto c : ds.class_counts()) EXPECT_EQ(c, 10000u);
    EXPECT_EQ(ds.items()[0].label, CausalStructure::kIndependent);
    EXPECT_EQ(ds.items()[59999].label, CausalStructure::kYToXConfounded);
}

TEST(BuildDataset, BinaryTaskSubset) {
    const std::array classes{CausalStructure::kXToY, CausalStructure::kConfounded};
    const auto ds = build_dataset(3, 3, 50, classes, {}, 2);
    EXPECT_EQ(ds.classes(), (std::vector<CausalStructure>{CausalStructure::kXToY, CausalStructure::kConfounded}));
    EXPECT_EQ(ds.class_counts()[1], 50u);
    EXPECT_EQ(ds.class_counts()[3], 50u);
    EXPECT_EQ(ds.class_counts()[0], 0u);
}

TEST(BuildDataset, DeterministicAndThreadInvariant) {
    const HyperpriorDescriptor hp{2.0, 10, 3};
    const auto a = build_dataset(4, 4, 200, kAllStructures, hp, 7, {}, 1);
    const auto b = build_dataset(4, 4, 200, kAllStructures, hp, 7, {}, 1);
    const auto c = build_dataset(4, 4, 200, kAllStructures, hp, 7, {}, 3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    const auto d = build_dataset(4, 4, 200, kAllStructures, hp, 8, {}, 1);
    EXPECT_FALSE(a == d);
}

TEST(LabeledDataset, RejectsInconsistentItems) {
    RngStream rng(5);
    auto item = sample_instance(CausalStructure::kXToY, 2, 2, {}, rng);
    EXPECT_THROW(LabeledDataset(3, 3, {item}), InvariantError);
    item.h_cardinality = 4;
    EXPECT_THROW(LabeledDataset(2, 2, {item}), InvariantError);
}

TEST(DatasetIo, RoundTripIsExact) {
    const auto dir = scratch_dir("dataset_io");
    const HyperpriorDescriptor hp{5.0, 7, 123};
    SamplerOptions opt;
    opt.variant = ConfoundingVariant::kFactorProduct;
    const auto ds = build_dataset(3, 2, 1000 / 6 + 1, kAllStructures, hp, 77, opt);
    const auto path = (dir / "ds.jsonl").string();
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    EXPECT_EQ(back, ds);
    EXPECT_EQ(back.hyperprior(), hp);
    EXPECT_EQ(back.variant(), ConfoundingVariant::kFactorProduct);
    EXPECT_EQ(back.seed(), 77u);
}

TEST(DatasetIo, TruncatedFileNamesTheRecord) {
    const auto dir = scratch_dir("dataset_trunc");
    const auto ds = build_dataset(2, 2, 5, kAllStructures, {}, 1);
    const auto path = (dir / "ds.jsonl").string();
    save_dataset(ds, path);
    std::vector<std::string> lines;
    {
        std::ifstream in(path);
        for (std::string l; std::getline(in, l);) lines.push_back(l);
    }
    {
        std::ofstream out(path);
        for (std::size_t i = 0; i < 13; ++i) out << lines[i] << '\n';
    }
    try {
        load_dataset(path);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.record(), 13u);
        EXPECT_NE(std::string(e.what()).find("record 13"), std::string::npos) << e.what();
    }
    {
        std::ofstream out(path);
        for (std::size_t i = 0; i < lines.size(); ++i) out << (i == 4 ? std::string("{\"label\":1}") : lines[i]) << '\n';
    }
    try {
        load_dataset(path);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.record(), 4u);
    }
}

TEST(DatasetIo, RejectsOtherSchemaVersions) {
    const auto dir = scratch_dir("dataset_version");
    const auto path = (dir / "ds.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"schema_version":2,"k_x":2,"k_y":2,"n_items":0,"seed":0,)"
            << R"("hyperprior":{"alpha_max":0,"n_components":10,"seed":0}})" << '\n';
    }
    try {
        load_dataset(path);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported schema version"), std::string::npos);
    }
}
