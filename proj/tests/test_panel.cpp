#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "premia/errors.hpp"
#include "premia/panel.hpp"

using namespace premia;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/premia_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv parses a small panel") {
  TempFile f("small.csv",
             "date,x,y\n"
             "1963Q3,1.5,2.5\n"
             "1963Q4,0.5,-1.0\n"
             "1964Q1,2.0,0.25\n");
  const RawPanel p = load_csv(f.path, PanelKind::returns);
  CHECK(p.T() == 3);
  CHECK(p.M() == 2);
  CHECK(p.names[0] == "x");
  CHECK(p.dates.front() == "1963Q3");
  CHECK(p.dates.back() == "1964Q1");
  CHECK(p.values(1, 1) == -1.0);
}

TEST_CASE("load_csv rejects blank cells naming row and column") {
  TempFile f("blank.csv",
             "date,x,y\n"
             "1963Q3,1.5,2.5\n"
             "1963Q4,,2.0\n");
  try {
    load_csv(f.path, PanelKind::returns);
    CHECK(false);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("'x'") != std::string::npos);
  }
}

TEST_CASE("load_csv rejects duplicate and non-increasing dates") {
  TempFile dup("dup.csv", "date,x\n1963Q3,1\n1963Q3,2\n");
  CHECK_THROWS_AS(load_csv(dup.path, PanelKind::returns), ValidationError);
  TempFile dec("dec.csv", "date,x\n1964Q1,1\n1963Q3,2\n");
  CHECK_THROWS_AS(load_csv(dec.path, PanelKind::returns), ValidationError);
}

TEST_CASE("load_csv rejects unparseable and non-finite values") {
  TempFile bad("bad.csv", "date,x\n1963Q3,1\n1963Q4,abc\n");
  CHECK_THROWS_AS(load_csv(bad.path, PanelKind::returns), ValidationError);
  TempFile inf("inf.csv", "date,x\n1963Q3,1\n1963Q4,inf\n");
  CHECK_THROWS_AS(load_csv(inf.path, PanelKind::returns), ValidationError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", PanelKind::factors), ValidationError);
}

TEST_CASE("write_csv round-trips values exactly") {
  RawPanel p;
  p.dates = {"001", "002", "003"};
  p.names = {"x", "y"};
  p.values.resize(3, 2);
  p.values << 0.1, -1.0 / 3.0, 1e-17, 12345.678901234567, 2.0 / 7.0, -0.0625;
  write_csv(p, "/tmp/premia_test_rt.csv");
  const RawPanel q = load_csv("/tmp/premia_test_rt.csv", PanelKind::returns);
  std::remove("/tmp/premia_test_rt.csv");
  REQUIRE(q.T() == 3);
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 2; ++j) CHECK(q.values(i, j) == p.values(i, j));
}

TEST_CASE("align restricts to the common date range") {
  RawPanel r;
  r.dates = {"1963Q3", "1963Q4", "1964Q1", "1964Q2"};
  r.names = {"a"};
  r.values.resize(4, 1);
  r.values << 1, 2, 3, 4;
  RawPanel f;
  f.dates = {"1963Q4", "1964Q1", "1964Q2", "1964Q3"};
  f.names = {"g"};
  f.values.resize(4, 1);
  f.values << 10, 20, 30, 40;

  const AlignedDataset ds = align(r, f);
  CHECK(ds.T() == 3);
  CHECK(ds.dates.front() == "1963Q4");
  CHECK(ds.returns(0, 0) == 2);
  CHECK(ds.factors(0, 0) == 10);
  CHECK(ds.zero_beta_mode == ZeroBetaMode::intercept_estimated);

  SUBCASE("identical date sets are unchanged") {
    const AlignedDataset same = align(r, r);
    CHECK(same.T() == 4);
    CHECK(same.returns == r.values);
  }

  SUBCASE("align is idempotent") {
    RawPanel r2;
    r2.dates = ds.dates;
    r2.names = ds.return_names;
    r2.values = ds.returns;
    RawPanel f2;
    f2.dates = ds.dates;
    f2.names = ds.factor_names;
    f2.values = ds.factors;
    const AlignedDataset again = align(r2, f2);
    CHECK(again.T() == ds.T());
    CHECK(again.returns == ds.returns);
    CHECK(again.factors == ds.factors);
  }
}

TEST_CASE("align rejects disjoint date sets") {
  RawPanel r;
  r.dates = {"1963Q3", "1963Q4"};
  r.names = {"a"};
  r.values.resize(2, 1);
  r.values << 1, 2;
  RawPanel f;
  f.dates = {"1999Q1", "1999Q2"};
  f.names = {"g"};
  f.values.resize(2, 1);
  f.values << 1, 2;
  CHECK_THROWS_AS(align(r, f), ValidationError);

  SUBCASE("mixed label formats are reported as a frequency mismatch") {
    f.dates = {"196307", "196308"};
    try {
      align(r, f);
      CHECK(false);
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("formats differ") != std::string::npos);
    }
  }
}

TEST_CASE("reference differencing") {
  AlignedDataset ds;
  ds.dates = {"1", "2"};
  ds.return_names = {"r1", "r2", "r3"};
  ds.factor_names = {"f"};
  ds.returns.resize(2, 3);
  ds.returns << 1.0, 2.0, 0.5, 0.1, 0.2, 0.3;
  ds.factors.resize(2, 1);
  ds.factors << 1, 2;

  const AlignedDataset diff = reference_difference(ds, "r3");
  CHECK(diff.N() == 2);
  CHECK(diff.zero_beta_mode == ZeroBetaMode::reference_differenced);
  CHECK(diff.reference_asset.value() == "r3");
  CHECK(diff.returns(0, 0) == doctest::Approx(0.5));
  CHECK(diff.returns(0, 1) == doctest::Approx(1.5));
  CHECK(diff.returns(1, 0) == doctest::Approx(-0.2));

  SUBCASE("identical columns produce an all-zero matrix") {
    ds.returns.col(0) = ds.returns.col(2);
    ds.returns.col(1) = ds.returns.col(2);
    const AlignedDataset z = reference_difference(ds, "r3");
    CHECK(z.returns.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("unknown reference errors") {
    CHECK_THROWS_AS(reference_difference(ds, "nope"), ValidationError);
  }
}

TEST_CASE("set_zero_beta_mode toggling") {
  AlignedDataset ds;
  ds.dates = {"1", "2"};
  ds.return_names = {"r1"};
  ds.factor_names = {"f"};
  ds.returns.resize(2, 1);
  ds.returns << 1, 2;
  ds.factors.resize(2, 1);
  ds.factors << 1, 2;
  ds.zero_beta_mode = ZeroBetaMode::intercept_estimated;

  const AlignedDataset a = set_zero_beta_mode(ds, ZeroBetaMode::imposed_zero);
  CHECK(a.zero_beta_mode == ZeroBetaMode::imposed_zero);
  const AlignedDataset b = set_zero_beta_mode(a, ZeroBetaMode::intercept_estimated);
  CHECK(b.zero_beta_mode == ds.zero_beta_mode);
  CHECK_THROWS_AS(set_zero_beta_mode(ds, ZeroBetaMode::reference_differenced), ValidationError);
}
