#include "envq/ct_solver.hpp"
#include "envq/io.hpp"
#include "envq/models.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace envq;

namespace {

json two_state_dense() {
    return json::parse(R"({
        "name": "two",
        "states": ["on", "off"],
        "blocking": ["off"],
        "V": [[-0.5, 0.5], [2.0, -2.0]],
        "R": [[1, 0], [0, 1]],
        "lambda": 1.0,
        "mu": [2.0]
    })");
}

} // namespace

TEST(ModelFile, DenseMatrices) {
    const auto m = model_from_json(two_state_dense());
    EXPECT_EQ(m.name, "two");
    EXPECT_EQ(m.env.num_working(), 1u);
    EXPECT_EQ(m.env.V()(m.env.index_of("off"), m.env.index_of("on")), 2.0);
    EXPECT_FALSE(m.queue.capacity.has_value());
    EXPECT_TRUE(validate(m).accepted());
}

TEST(ModelFile, BlockingStatesMovedBehindWorking) {
    auto j = two_state_dense();
    j["states"] = {"off", "on"};
    j["V"] = {{-2.0, 2.0}, {0.5, -0.5}};
    const auto m = model_from_json(j);
    EXPECT_EQ(m.env.label(0), "on");
    EXPECT_EQ(m.env.label(1), "off");
    EXPECT_EQ(m.env.internal_index(0), 1u);
    EXPECT_EQ(m.env.V()(0, 1), 0.5);
}

TEST(ModelFile, SparseTriplesCompleteDiagonal) {
    auto j = two_state_dense();
    j["V"] = json::parse(R"([{"from": "on", "to": "off", "rate": 0.5}, {"from": "off", "to": "on", "rate": 2.0}])");
    const auto m = model_from_json(j);
    EXPECT_EQ(m.env.V()(0, 0), -0.5);
    EXPECT_EQ(m.env.V()(1, 1), -2.0);
    EXPECT_TRUE(validate(m).accepted());
}

TEST(ModelFile, IntegerLabelsAndCapacity) {
    const auto j = json::parse(R"({
        "states": [0, 1, 2],
        "blocking": [0],
        "V": [{"from": 0, "to": 2, "rate": 3.0}],
        "R": [[1,0,0],[1,0,0],[0,1,0]],
        "lambda": [1.0, 0.5],
        "mu": 2.0,
        "capacity": 4
    })");
    const auto m = model_from_json(j);
    EXPECT_EQ(m.env.label(2), "0");
    ASSERT_TRUE(m.queue.capacity.has_value());
    EXPECT_EQ(*m.queue.capacity, 4u);
    EXPECT_EQ(m.queue.arrival(7), 0.5);
}

TEST(ModelFile, InfiniteCapacityString) {
    auto j = two_state_dense();
    j["capacity"] = "infinite";
    EXPECT_FALSE(model_from_json(j).queue.capacity.has_value());
}

TEST(ModelFile, RoundTripPreservesSolution) {
    const auto built = build_rs(2, 5, 1.0, {2.0}, {3.0});
    const auto back = model_from_json(json::parse(model_to_json(built.model).dump()));
    EXPECT_EQ(back.env.labels(), built.model.env.labels());
    EXPECT_TRUE(back.env.V() == built.model.env.V());
    EXPECT_TRUE(back.env.R() == built.model.env.R());
    const auto a = solve_product_form(built.model), b = solve_product_form(back);
    ASSERT_TRUE(b.ok());
    EXPECT_TRUE(a.theta == b.theta);
}

TEST(ModelFile, Errors) {
    auto missing = two_state_dense();
    missing.erase("R");
    EXPECT_THROW(model_from_json(missing), InvalidModel);

    auto short_row = two_state_dense();
    short_row["R"] = {{1.0}, {0.0, 1.0}};
    EXPECT_THROW(model_from_json(short_row), InvalidModel);

    auto unknown = two_state_dense();
    unknown["V"] = json::parse(R"([{"from": "on", "to": "nowhere", "rate": 1.0}])");
    try {
        model_from_json(unknown);
        FAIL();
    } catch (const InvalidModel& e) {
        EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
    }

    auto bad_block = two_state_dense();
    bad_block["blocking"] = {"idle"};
    EXPECT_THROW(model_from_json(bad_block), InvalidModel);

    auto bad_rate = two_state_dense();
    bad_rate["mu"] = -1.0;
    EXPECT_THROW(model_from_json(bad_rate), InvalidModel);

    EXPECT_THROW(load_model("/nonexistent/model.json"), InvalidModel);
}

// Parsing succeeds; validation reports the row.
TEST(ModelFile, MalformedRIsReportedByValidate) {
    auto j = two_state_dense();
    j["R"] = {{0.7, 0.2}, {0.0, 1.0}};
    const auto report = validate(model_from_json(j));
    ASSERT_FALSE(report.accepted());
    EXPECT_NE(report.violations.front().find("R"), std::string::npos);
}

TEST(Table, NumbersRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324}) EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
    const auto path = std::filesystem::temp_directory_path() / "envq_table_test.csv";
    {
        TableWriter w(path.string());
        w.row("0", "a", 0.25);
        w.row("", "b", 1.0);
    }
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(all, "level,state,value\n0,a,0.25\n,b,1\n");
    std::filesystem::remove(path);
}
