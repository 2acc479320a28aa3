#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "chainloc/instance.hpp"

namespace chainloc {
namespace {

TEST(GenerateInstanceTest, CoordinatesFollowSpreadsheetRule) {
  // Coordinates in [0,10] are r / 100000, consumed x then y from one stream.
  GeneratorSeeds seeds;
  seeds.demand = LcgState(1);
  const Instance inst = generate_instance(2, seeds);
  const std::int64_t r2 = 314227;
  const std::int64_t r3 = (314227LL * r2) % 1000000LL;
  const std::int64_t r4 = (314227LL * r3) % 1000000LL;
  EXPECT_DOUBLE_EQ(inst.demand[0].location.x, 1.0 / 100000.0);
  EXPECT_DOUBLE_EQ(inst.demand[0].location.y, r2 / 100000.0);
  EXPECT_DOUBLE_EQ(inst.demand[1].location.x, r3 / 100000.0);
  EXPECT_DOUBLE_EQ(inst.demand[1].location.y, r4 / 100000.0);
}

TEST(GenerateInstanceTest, DefaultCounts) {
  const Instance inst = generate_instance(100);
  EXPECT_EQ(inst.demand.size(), 100u);
  EXPECT_EQ(inst.competitors.size(), 10u);
  EXPECT_EQ(inst.clusters.size(), 10u);
  EXPECT_TRUE(inst.fixed_chain.empty());
  EXPECT_NO_THROW(validate_instance(inst));
}

TEST(GenerateInstanceTest, Deterministic) {
  GeneratorSeeds seeds;
  seeds.clusters = LcgState(13);
  EXPECT_EQ(generate_instance(57, seeds), generate_instance(57, seeds));
  EXPECT_FALSE(generate_instance(57, seeds) == generate_instance(57));
}

TEST(GenerateInstanceTest, ValuesWithinConfiguredRanges) {
  GeneratorConfig config;
  config.buying_power = {0.5, 1.5};
  config.competitor_attractiveness = {1.0, 3.0};
  config.cluster_attractiveness = {0.2, 0.4};
  for (std::int64_t seed : {1, 2, 3, 97531, 999999}) {
    GeneratorSeeds seeds;
    seeds.demand = LcgState(seed);
    seeds.buying_power = LcgState(seed == 1 ? 7 : seed);
    const Instance inst = generate_instance(300, seeds, config);
    for (const auto& d : inst.demand) {
      EXPECT_GE(d.location.x, 0.0);
      EXPECT_LE(d.location.x, 10.0);
      EXPECT_GE(d.location.y, 0.0);
      EXPECT_LE(d.location.y, 10.0);
      EXPECT_GT(d.buying_power, 0.5);
      EXPECT_LT(d.buying_power, 1.5);
    }
    for (const auto& c : inst.competitors) {
      EXPECT_GT(c.attractiveness, 1.0);
      EXPECT_LT(c.attractiveness, 3.0);
    }
    for (const auto& c : inst.clusters) {
      EXPECT_GT(c.attractiveness, 0.2);
      EXPECT_LT(c.attractiveness, 0.4);
    }
  }
}

TEST(GenerateInstanceTest, RejectsBadArguments) {
  EXPECT_THROW(generate_instance(0), InvalidArgument);
  GeneratorConfig none;
  none.competitors = 0;
  EXPECT_THROW(generate_instance(10, {}, none), InvalidArgument);
  GeneratorConfig empty_range;
  empty_range.buying_power = {1.0, 1.0};
  EXPECT_THROW(generate_instance(10, {}, empty_range), InvalidArgument);
}

TEST(InstanceFileTest, RoundTripIsExact) {
  Instance inst = generate_instance(100);
  inst.fixed_chain.push_back({{1.0 / 3.0, 2.0 / 7.0}, 0.1 + 0.2});
  std::stringstream buf;
  write_instance(inst, buf);
  const Instance back = read_instance(buf);
  EXPECT_EQ(back, inst);
  EXPECT_EQ(fingerprint(back), fingerprint(inst));
}

TEST(InstanceFileTest, ZeroBuyingPowerRejected) {
  std::istringstream in(
      "DEMAND\nx,y,b\n1,1,0\nCOMPETITORS\nx,y,attractiveness\n2,2,1\n");
  EXPECT_THROW(read_instance(in), ValidationError);
}

TEST(InstanceFileTest, NoCompetitorsAndNoFixedChainRejected) {
  std::istringstream in("DEMAND\nx,y,b\n1,1,1\nCLUSTERS\nx,y,attractiveness\n2,2,1\n");
  EXPECT_THROW(read_instance(in), ValidationError);
}

TEST(InstanceFileTest, FixedChainAloneIsEnough) {
  std::istringstream in("DEMAND\nx,y,b\n1,1,1\nFIXED_CHAIN\nx,y,attractiveness\n2,2,1\n");
  const Instance inst = read_instance(in);
  EXPECT_EQ(inst.fixed_chain.size(), 1u);
}

TEST(InstanceFileTest, ParseErrorNamesLineAndField) {
  std::istringstream in(
      "# header\nDEMAND\nx,y,b\n1,1,1\n2,abc,1\nCOMPETITORS\n3,3,1\n");
  try {
    read_instance(in, "bad.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
    EXPECT_EQ(e.field(), "y");
    EXPECT_NE(std::string(e.what()).find("bad.csv:5"), std::string::npos);
  }
}

TEST(InstanceFileTest, WrongFieldCountAndStrayRecords) {
  std::istringstream short_row("DEMAND\n1,1\n");
  EXPECT_THROW(read_instance(short_row), ParseError);
  std::istringstream no_section("1,1,1\n");
  EXPECT_THROW(read_instance(no_section), ParseError);
  std::istringstream dup("DEMAND\n1,1,1\nDEMAND\n");
  EXPECT_THROW(read_instance(dup), ParseError);
  std::istringstream weight("DEMAND\n1,1,1\nCOMPETITORS\n2,2,1x\n");
  try {
    read_instance(weight);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "attractiveness");
  }
}

TEST(InstanceFileTest, MissingFile) {
  EXPECT_THROW(read_instance(std::filesystem::path("/nonexistent/chainloc.csv")), Error);
}

}  // namespace
}  // namespace chainloc
