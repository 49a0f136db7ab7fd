#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "noisecast/dataio.hpp"
#include "test_support.hpp"

using namespace noisecast;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name, const std::string& content) {
        path = fs::temp_directory_path() / name;
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("load_csv: toy file with index, target and two features") {
    TempFile f("nc_toy.csv",
               "date,y,x1,x2\n"
               "2001,1.5,0.1,10\n"
               "2002,2.5,0.2,20\n"
               "2003,3.5,0.3,30\n");
    const Dataset d = load_csv(f.path.string(), "y", std::string("date"));
    CHECK(d.rows() == 3);
    CHECK(d.cols() == 2);
    CHECK(d.feature_names == std::vector<std::string>{"x1", "x2"});
    CHECK(d.index == std::vector<std::string>{"2001", "2002", "2003"});
    CHECK(d.y(1) == 2.5);
    CHECK(d.X(2, 1) == 30.0);
    CHECK(d.dropped_rows == 0);
}

TEST_CASE("load_csv: missing target cell drops the row and logs it") {
    TempFile f("nc_missing.csv",
               "date,y,x1\n"
               "2001,1.5,0.1\n"
               "2002,,0.2\n"
               "2003,3.5,0.3\n");
    const Dataset d = load_csv(f.path.string(), "y", std::string("date"));
    CHECK(d.rows() == 2);
    CHECK(d.dropped_rows == 1);
    REQUIRE(d.transform_log.size() == 1);
    CHECK(d.transform_log[0].find("dropped 1") != std::string::npos);
}

TEST_CASE("load_csv error paths carry positions and names") {
    TempFile bad_target("nc_t.csv", "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(bad_target.path.string(), "y", {}), DataError);

    TempFile dup("nc_dup.csv", "y,x1,x1\n1,2,3\n");
    CHECK_THROWS_AS(load_csv(dup.path.string(), "y", {}), DataError);

    TempFile cell("nc_cell.csv", "y,x1\n1,2\n3,abc\n");
    try {
        load_csv(cell.path.string(), "y", {});
        CHECK(false);
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("abc") != std::string::npos);
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("x1") != std::string::npos);
    }

    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "y", {}), DataError);
}

TEST_CASE("load_csv rejects comma-decimal cells instead of misparsing") {
    TempFile f("nc_locale.csv", "y,x1\n\"1,5\",2\n");
    CHECK_THROWS_AS(load_csv(f.path.string(), "y", {}), DataError);
}

TEST_CASE("save/load round trip preserves full precision") {
    Dataset d = dataset_from_arrays(test::random_matrix(7, 3, 5),
                                    test::random_vector(7, 6));
    const fs::path csv = fs::temp_directory_path() / "nc_rt.csv";
    const fs::path side = fs::temp_directory_path() / "nc_rt.json";
    save_dataset(d, csv.string(), side.string());
    const Dataset back = load_csv(csv.string(), "y", std::string("t"));
    REQUIRE(back.rows() == d.rows());
    REQUIRE(back.cols() == d.cols());
    CHECK((back.X.array() == d.X.array()).all());
    CHECK((back.y.array() == d.y.array()).all());
    std::ifstream sj(side);
    nlohmann::json meta;
    sj >> meta;
    CHECK(meta.at("target") == "y");
    CHECK(meta.at("rows") == 7);
    fs::remove(csv);
    fs::remove(side);
}

TEST_CASE("lag transform aligns predictors with future targets") {
    Matrix X(5, 1);
    X << 1, 2, 3, 4, 5;
    Vector y(5);
    y << 10, 20, 30, 40, 50;
    const Dataset d = dataset_from_arrays(X, y);
    TransformSpec spec;
    TransformStep lag;
    lag.op = TransformStep::Op::Lag;
    lag.k = 1;
    spec.steps.push_back(lag);
    const Dataset out = apply_transforms(d, spec);
    REQUIRE(out.rows() == 4);
    CHECK(out.X(0, 0) == 1.0);
    CHECK(out.y(0) == 20.0);  // target shifted one step ahead
    CHECK(out.X(3, 0) == 4.0);
    CHECK(out.y(3) == 50.0);
    CHECK(out.index.front() == "0");

    TransformStep too_long = lag;
    too_long.k = 5;
    TransformSpec bad;
    bad.steps.push_back(too_long);
    CHECK_THROWS_AS(apply_transforms(d, bad), InvalidInput);
}

TEST_CASE("pct_change matches the arithmetic oracle") {
    Matrix X(3, 1);
    X << 100.0, 110.0, 99.0;
    Vector y(3);
    y << 100.0, 110.0, 99.0;
    TransformSpec spec;
    TransformStep step;
    step.op = TransformStep::Op::PctChange;
    spec.steps.push_back(step);
    const Dataset out = apply_transforms(dataset_from_arrays(X, y), spec);
    REQUIRE(out.rows() == 2);
    CHECK(out.X(0, 0) == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(out.X(1, 0) == doctest::Approx(-0.10).epsilon(1e-12));
    CHECK(out.y(0) == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("standardize and demean transforms") {
    const Dataset d = dataset_from_arrays(test::random_matrix(50, 4, 9),
                                          test::random_vector(50, 10));
    TransformSpec spec;
    TransformStep step;
    step.op = TransformStep::Op::Standardize;
    spec.steps.push_back(step);
    const Dataset out = apply_transforms(d, spec);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(out.X.col(j).mean()) < 1e-10);
        CHECK(out.X.col(j).squaredNorm() / 50.0 == doctest::Approx(1.0).epsilon(1e-10));
    }

    Dataset constant = d;
    constant.X.col(2).setConstant(3.0);
    try {
        apply_transforms(constant, spec);
        CHECK(false);
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("x3") != std::string::npos);
    }

    TransformSpec demean_spec;
    TransformStep demean;
    demean.op = TransformStep::Op::Demean;
    demean_spec.steps.push_back(demean);
    const Dataset dm = apply_transforms(d, demean_spec);
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(dm.X.col(j).mean()) < 1e-10);
}

TEST_CASE("select keeps named columns in order; unknown names error") {
    const Dataset d = dataset_from_arrays(test::random_matrix(10, 4, 11),
                                          test::random_vector(10, 12));
    TransformSpec spec;
    TransformStep step;
    step.op = TransformStep::Op::Select;
    step.columns = {"x3", "x1"};
    spec.steps.push_back(step);
    const Dataset out = apply_transforms(d, spec);
    REQUIRE(out.cols() == 2);
    CHECK(out.feature_names == std::vector<std::string>{"x3", "x1"});
    CHECK((out.X.col(0).array() == d.X.col(2).array()).all());

    step.columns = {"nope"};
    TransformSpec bad;
    bad.steps.push_back(step);
    CHECK_THROWS_AS(apply_transforms(d, bad), InvalidInput);
}

TEST_CASE("drop_na removes poisoned rows") {
    Dataset d = dataset_from_arrays(test::random_matrix(8, 2, 13),
                                    test::random_vector(8, 14));
    d.X(3, 1) = std::numeric_limits<double>::quiet_NaN();
    d.y(5) = std::numeric_limits<double>::infinity();
    TransformSpec spec;
    TransformStep step;
    step.op = TransformStep::Op::DropNa;
    spec.steps.push_back(step);
    const Dataset out = apply_transforms(d, spec);
    CHECK(out.rows() == 6);
    CHECK(out.dropped_rows == 2);
    CHECK(out.X.allFinite());
}

TEST_CASE("replaying the applied steps reproduces the dataset bitwise") {
    const Dataset raw = dataset_from_arrays(test::random_matrix(30, 3, 15),
                                            test::random_vector(30, 16));
    TransformSpec spec;
    TransformStep lag;
    lag.op = TransformStep::Op::Lag;
    lag.k = 2;
    TransformStep std_step;
    std_step.op = TransformStep::Op::Standardize;
    spec.steps = {lag, std_step};
    const Dataset once = apply_transforms(raw, spec);

    TransformSpec replay;
    replay.steps = once.applied_steps;
    const Dataset twice = apply_transforms(raw, replay);
    CHECK((once.X.array() == twice.X.array()).all());
    CHECK((once.y.array() == twice.y.array()).all());
    CHECK(once.index == twice.index);

    // Steps serialize through JSON losslessly.
    const TransformSpec via_json = TransformSpec::from_json(replay.to_json());
    const Dataset thrice = apply_transforms(raw, via_json);
    CHECK((once.X.array() == thrice.X.array()).all());
}
