#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "rilab/experiments.hpp"

using namespace rilab;
using namespace rilab::experiments;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.seeds = {1, 2};
    c.episodes = 30;
    c.rolling_window = 10;
    return c;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

}  // namespace

TEST(RollingMean, Examples) {
    const std::vector<double> flat(20, 3.5);
    for (double v : rolling_mean(flat, 7)) EXPECT_DOUBLE_EQ(v, 3.5);
    std::vector<double> ramp(100);
    std::iota(ramp.begin(), ramp.end(), 1.0);
    const auto r = rolling_mean(ramp, 50);
    ASSERT_EQ(r.size(), 51u);
    EXPECT_DOUBLE_EQ(r.front(), 25.5);
    EXPECT_DOUBLE_EQ(r.back(), 75.5);
    const auto whole = rolling_mean(ramp, 100);
    ASSERT_EQ(whole.size(), 1u);
    EXPECT_DOUBLE_EQ(whole[0], 50.5);
    EXPECT_THROW(rolling_mean(ramp, 0), std::invalid_argument);
    EXPECT_THROW(rolling_mean(ramp, 101), std::invalid_argument);
}

TEST(Arms, NamesStreamsAndOverrides) {
    EXPECT_EQ(arm_name(Arm::vanilla_ri), "vanilla-RI");
    EXPECT_EQ(arm_name(Arm::pomdp_non_ri), "pomdp-nonRI");
    for (Arm a : kAllArms) EXPECT_EQ(parse_arm(arm_name(a)), a);
    EXPECT_THROW(parse_arm("oracle"), std::invalid_argument);
    EXPECT_NE(arm_stream(Arm::vanilla_ri), arm_stream(Arm::pomdp_ri));
    const grid::GridConfig base;
    EXPECT_EQ(env_for(Arm::vanilla_non_ri, base).variant, grid::Variant::non_ignorable);
    EXPECT_EQ(env_for(Arm::pomdp_ri, base).variant, grid::Variant::relatively_ignorable);
    EXPECT_EQ(agent_for(Arm::pomdp_ri, {}).input_slice, agents::InputSlice::position_and_belief);
    EXPECT_EQ(agent_for(Arm::vanilla_non_ri, {}).input_slice, agents::InputSlice::position_only);
}

TEST(ExperimentConfig, Validation) {
    EXPECT_NO_THROW(ExperimentConfig{}.validate());
    auto c = small_config();
    c.rolling_window = 31;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.seeds = {1, 1};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.arms.clear();
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.episodes = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ExperimentConfig, JsonRoundTrip) {
    auto c = small_config();
    c.arms = {Arm::pomdp_non_ri};
    c.raw_output = "out/raw.csv";
    const nlohmann::json j = c;
    const auto back = j.get<ExperimentConfig>();
    EXPECT_EQ(back.arms, c.arms);
    EXPECT_EQ(back.seeds, c.seeds);
    EXPECT_EQ(back.episodes, c.episodes);
    EXPECT_EQ(back.raw_output, c.raw_output);
    EXPECT_EQ(back.output, c.output);
}

TEST(RunExperiment, RowCountsAndAggregation) {
    const auto c = small_config();
    const auto curve = run_experiment(c);
    EXPECT_EQ(curve.raw.size(), 4u * 2 * 30);
    EXPECT_EQ(curve.aggregate.size(), 4u * 30);
    std::map<std::pair<Arm, std::size_t>, double> sum;
    for (const auto& r : curve.raw) sum[{r.arm, r.episode}] += r.episode_return / 2.0;
    for (const auto& row : curve.aggregate) {
        EXPECT_NEAR(row.mean_return, (sum[{row.arm, row.episode}]), 1e-12);
        EXPECT_EQ(row.rolling_mean.has_value(), row.episode >= 10);
    }
    for (Arm arm : kAllArms) {
        std::vector<double> means;
        for (const auto& row : curve.aggregate)
            if (row.arm == arm) means.push_back(row.mean_return);
        const auto want = rolling_mean(means, 10);
        const auto got = curve.rolling(arm);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
        EXPECT_EQ(curve.final_rolling(arm), got.back());
    }
}

TEST(RunExperiment, ArmAndSeedSubsetsCommute) {
    const auto full = run_experiment(small_config());
    auto c = small_config();
    c.arms = {Arm::pomdp_ri};
    c.seeds = {2};
    c.workers = 1;
    const auto subset = run_experiment(c);
    std::vector<double> from_full, from_subset;
    for (const auto& r : full.raw)
        if (r.arm == Arm::pomdp_ri && r.seed == 2) from_full.push_back(r.episode_return);
    for (const auto& r : subset.raw) from_subset.push_back(r.episode_return);
    EXPECT_EQ(from_full, from_subset);
    EXPECT_THROW(subset.final_rolling(Arm::vanilla_ri), std::invalid_argument);
}

TEST(RewardCurve, SustainedFrom) {
    RewardCurve curve;
    curve.rolling_window = 1;
    const std::vector<double> values{9, 1, 9, 9, 9};
    for (std::size_t i = 0; i < values.size(); ++i)
        curve.aggregate.push_back({Arm::vanilla_ri, i + 1, values[i], values[i]});
    EXPECT_EQ(curve.sustained_from(Arm::vanilla_ri, 8.0), 3u);
    EXPECT_EQ(curve.sustained_from(Arm::vanilla_ri, 9.5), std::nullopt);
}

TEST(Csv, Schemas) {
    const auto curve = run_experiment(small_config());
    std::ostringstream agg, raw;
    write_aggregate_csv(agg, curve);
    write_raw_csv(raw, curve);

    const auto a = lines_of(agg.str());
    ASSERT_EQ(a.size(), 1u + 4 * 30);
    EXPECT_EQ(a[0], "arm,episode,mean_return,rolling_mean");
    for (std::size_t i = 1; i < a.size(); ++i) {
        const auto f = split(a[i]);
        ASSERT_EQ(f.size(), 4u) << a[i];
        EXPECT_NO_THROW(parse_arm(f[0]));
        const auto ep = std::stoul(f[1]);
        EXPECT_EQ(f[3].empty(), ep < 10) << a[i];
    }

    const auto r = lines_of(raw.str());
    std::size_t k = 0;
    while (k < r.size() && r[k].starts_with("#")) ++k;
    EXPECT_GE(k, 1u);
    ASSERT_LT(k, r.size());
    EXPECT_EQ(r[k], "arm,seed,episode,return");
    EXPECT_EQ(r.size() - k - 1, 4u * 2 * 30);
}

TEST(Csv, WriteOutputsCreatesDirectories) {
    const auto dir = std::filesystem::temp_directory_path() / "rilab_exp_test";
    std::filesystem::remove_all(dir);
    auto c = small_config();
    c.arms = {Arm::vanilla_ri};
    c.output = (dir / "nested" / "figure.csv").string();
    c.raw_output = (dir / "raw.csv").string();
    write_outputs(c, run_experiment(c));
    EXPECT_TRUE(std::filesystem::exists(c.output));
    EXPECT_TRUE(std::filesystem::exists(*c.raw_output));
    std::ifstream in(c.output);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "arm,episode,mean_return,rolling_mean");
    std::filesystem::remove_all(dir);
}

TEST(TwoStateDemo, DiscountedPreference) {
    const auto report = run_two_state_demo(0.9);
    EXPECT_EQ(report.better, 0u);
    EXPECT_NEAR(report.initial_values[0], 1.8 / 0.82, 1e-12);
    EXPECT_NEAR(report.initial_values[0], 2.195122, 1e-6);
    EXPECT_NEAR(report.initial_values[1], 1.2 / 0.55, 1e-12);
    EXPECT_NEAR(report.optimal(0, 1), 2.0 + 0.09 * 2.0 / 0.91, 1e-8);
    for (const auto& q : report.policy_values) EXPECT_NEAR(q(1, 2), 0.0, 1e-12);
    // the class fixed point dominates both members
    for (const auto& q : report.policy_values)
        for (std::size_t p = 0; p < q.size(); ++p) EXPECT_GE(report.class_fixed_point[p], q[p] - 1e-9);
}

TEST(TwoStateDemo, NearlyMyopicDiscount) {
    const auto report = run_two_state_demo(1e-6);
    EXPECT_NEAR(report.initial_values[0], 1.8, 1e-5);
    EXPECT_NEAR(report.initial_values[1], 1.2, 1e-5);
    EXPECT_EQ(report.better, 0u);
    const nlohmann::json j = report;
    EXPECT_TRUE(j.contains("gamma"));
    EXPECT_THROW(run_two_state_demo(1.0), std::invalid_argument);
}
