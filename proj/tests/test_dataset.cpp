#include <gtest/gtest.h>

#include "smi/dataset.hpp"

using namespace smi;

TEST(Csv, ParsesAndSplitsTarget) {
    const Dataset d = parse_csv_dataset("a,y,b\n1,10,4\n3,20,5\n", "y", false);
    ASSERT_EQ(d.size(), 2);
    ASSERT_EQ(d.input_dim(), 2);
    EXPECT_EQ(d.inputs(1, 0), 3.0);
    EXPECT_EQ(d.inputs(1, 1), 5.0);
    EXPECT_EQ(d.targets(0, 0), 10.0);
}

TEST(Csv, StandardizesInputsNotTargets) {
    const Dataset d = parse_csv_dataset("x,c,y\n1,7,100\n3,7,200\n", "y", true);
    EXPECT_DOUBLE_EQ(d.inputs(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(d.inputs(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.inputs(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(d.inputs(1, 1), 0.0);
    EXPECT_EQ(d.targets(1, 0), 200.0);
}

TEST(Csv, ToleratesCrlfBomAndBlankLines) {
    const Dataset d = parse_csv_dataset("\xEF\xBB\xBFx,y\r\n1,2\r\n\r\n 3 , 4 \r\n", "y", false);
    ASSERT_EQ(d.size(), 2);
    EXPECT_EQ(d.inputs(1, 0), 3.0);
    EXPECT_EQ(d.targets(1, 0), 4.0);
}

TEST(Csv, ErrorsCarryRowAndColumn) {
    try {
        parse_csv_dataset("x,y\n1,2\n3,abc\n", "y", false);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.column(), 2u);
    }
    try {
        parse_csv_dataset("x,y\n1,2,3\n", "y", false);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
    }
    EXPECT_THROW(parse_csv_dataset("x,y\n1,2\n", "z", false), ParseError);
    EXPECT_THROW(parse_csv_dataset("", "y", false), ParseError);
    EXPECT_THROW(parse_csv_dataset("x,y\n", "y", false), ParseError);
    EXPECT_THROW(parse_csv_dataset("x,y\n1,nan\n", "y", false), ParseError);
    EXPECT_THROW(load_csv_dataset("/nonexistent/file.csv", "y", false), ParseError);
}

TEST(Regions, IntervalsAndSizes) {
    EXPECT_EQ(region_intervals(WaveRegion::In).size(), 2u);
    EXPECT_EQ(region_intervals(WaveRegion::Between)[0].low, -0.5);
    EXPECT_EQ(region_intervals(WaveRegion::Between)[0].high, 1.3);
    EXPECT_EQ(region_eval_size(WaveRegion::Entire), 120);
    EXPECT_EQ(wave_region_from_string(to_string(WaveRegion::Between)), WaveRegion::Between);
    const Dataset pts = sample_wave_points(region_intervals(WaveRegion::In), 500, 4);
    for (Index i = 0; i < pts.size(); ++i) {
        const double x = pts.inputs(i, 0);
        EXPECT_TRUE((x >= -1.5 && x <= -0.5) || (x >= 1.3 && x <= 1.7)) << x;
    }
}
