#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using nlohmann::json;

namespace {

std::string premia_bin() {
  const char* env = std::getenv("PREMIA_BIN");
  REQUIRE_MESSAGE(env != nullptr, "PREMIA_BIN must point at the premia binary");
  return env;
}

std::string schema_dir() {
  const char* env = std::getenv("PREMIA_SCHEMA_DIR");
  REQUIRE_MESSAGE(env != nullptr, "PREMIA_SCHEMA_DIR must point at the schemas directory");
  return env;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = premia_bin() + " " + args + " 2>/dev/null";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// Minimal JSON-schema checker for the subset the shipped schemas use:
// type (string or list), required, properties, items.
bool type_matches(const json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
  if (type == "number") return value.is_number();
  if (type == "null") return value.is_null();
  return false;
}

void validate_schema(const json& value, const json& schema, const std::string& where) {
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(value, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || type_matches(value, alt.get<std::string>());
    }
    REQUIRE_MESSAGE(ok, "type mismatch at ", where, ": got ", value.type_name());
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        REQUIRE_MESSAGE(value.contains(key.get<std::string>()), "missing key '",
                        key.get<std::string>(), "' at ", where);
    if (schema.contains("properties"))
      for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
        if (value.contains(it.key()))
          validate_schema(value[it.key()], it.value(), where + "." + it.key());
  }
  if (value.is_array() && schema.contains("items")) {
    std::size_t i = 0;
    for (const auto& item : value)
      validate_schema(item, schema["items"], where + "[" + std::to_string(i++) + "]");
  }
}

void check_against_schema(const std::string& out, const std::string& schema_name) {
  std::ifstream in(schema_dir() + "/" + schema_name);
  REQUIRE_MESSAGE(in.good(), "schema file missing: ", schema_name);
  json schema;
  in >> schema;
  const json value = json::parse(out);
  validate_schema(value, schema, schema_name);
}

struct Fixture {
  std::string returns_path = "/tmp/premia_cli_r.csv";
  std::string factors_path = "/tmp/premia_cli_f.csv";

  Fixture() {
    std::ostringstream r, f;
    r << "date,a1,a2,a3,a4,a5,a6\n";
    f << "date,f1,f2\n";
    // deterministic synthetic panel with real factor structure
    unsigned state = 12345;
    auto unif = [&state]() {
      state = state * 1664525u + 1013904223u;
      return static_cast<double>(state >> 8) / 16777216.0 - 0.5;
    };
    for (int t = 1; t <= 60; ++t) {
      const double f1 = unif() * 2.0 + 0.3;
      const double f2 = unif() * 1.5 - 0.1;
      char date[16];
      std::snprintf(date, sizeof date, "%03d", t);
      r << date;
      for (int i = 0; i < 6; ++i) {
        const double beta1 = 0.5 + 0.2 * i;
        const double beta2 = 1.2 - 0.25 * i;
        r << ',' << (0.2 * i + beta1 * f1 + beta2 * f2 + unif());
      }
      r << "\n";
      f << date << ',' << f1 << ',' << f2 << "\n";
    }
    write_file(returns_path, r.str());
    write_file(factors_path, f.str());
  }

  ~Fixture() {
    std::remove(returns_path.c_str());
    std::remove(factors_path.c_str());
  }

  std::string inputs() const {
    return "--returns " + returns_path + " --factors " + factors_path;
  }
};

}  // namespace

TEST_CASE("version flag") {
  const RunResult r = run("--version");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("premia") != std::string::npos);
  CHECK(r.out.find("schema") != std::string::npos);
}

TEST_CASE("missing file exits 2 with the path in the message") {
  const RunResult r = run("jis --returns /nonexistent/r.csv --factors /nonexistent/f.csv");
  CHECK(r.exit_code == 2);
}

TEST_CASE("jis on a synthetic panel") {
  Fixture fx;
  const RunResult r = run("jis " + fx.inputs() + " --zero-beta intercept");
  REQUIRE(r.exit_code == 0);
  check_against_schema(r.out, "jis.schema.json");
  const json j = json::parse(r.out);
  CHECK(j["J"].get<double>() <= j["IS"].get<double>() + 1e-8);
  CHECK(j["df_J"].get<int>() == 6 - 1 - 2);
  CHECK(j["df_IS"].get<int>() == 6 - 1 - 2 + 1);

  SUBCASE("byte-identical across runs") {
    const RunResult again = run("jis " + fx.inputs() + " --zero-beta intercept");
    CHECK(again.out == r.out);
  }
}

TEST_CASE("firstpass emits matrices and an optional CSV table") {
  Fixture fx;
  const std::string table = "/tmp/premia_cli_table.csv";
  const RunResult r = run("firstpass " + fx.inputs() + " --csv " + table);
  REQUIRE(r.exit_code == 0);
  check_against_schema(r.out, "firstpass.schema.json");
  const json j = json::parse(r.out);
  CHECK(j["T"].get<int>() == 60);
  CHECK(j["N"].get<int>() == 6);
  CHECK(j["K"].get<int>() == 2);
  CHECK(j["beta"]["data"].size() == 12);

  std::ifstream in(table);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "asset,beta_f1,t_f1,beta_f2,t_f2");
  std::remove(table.c_str());
}

TEST_CASE("estimate with plain and shanken standard errors") {
  Fixture fx;
  const RunResult plain = run("estimate --method fm --se plain " + fx.inputs());
  REQUIRE(plain.exit_code == 0);
  check_against_schema(plain.out, "estimate.schema.json");
  const RunResult shanken = run("estimate --method fm --se shanken " + fx.inputs());
  REQUIRE(shanken.exit_code == 0);
  const json jp = json::parse(plain.out);
  const json js = json::parse(shanken.out);
  CHECK(jp["se_kind"] == "plain");
  CHECK(js["se_kind"] == "shanken");
  CHECK(jp["lambda_f"] == js["lambda_f"]);
  CHECK(jp["lambda_0"].is_number());  // intercept mode is the default

  SUBCASE("cue method has no standard errors") {
    const RunResult cue = run("estimate --method cue " + fx.inputs());
    REQUIRE(cue.exit_code == 0);
    const json jc = json::parse(cue.out);
    CHECK(jc["method"] == "CUE");
    CHECK(jc["se"].is_null());
    CHECK(jc["lambda_0"].is_null());
  }
}

TEST_CASE("rank-deficient design exits 3") {
  const std::string rp = "/tmp/premia_cli_dup_r.csv";
  const std::string fp = "/tmp/premia_cli_dup_f.csv";
  std::ostringstream r, f;
  r << "date,a1,a2\n";
  f << "date,f1\n";
  for (int t = 1; t <= 20; ++t) {
    const double x = 0.1 * t;
    const double v = x + (t % 3) * 0.05;
    char date[16];
    std::snprintf(date, sizeof date, "%03d", t);
    r << date << ',' << v << ',' << v << "\n";  // identical assets
    f << date << ',' << x << "\n";
  }
  write_file(rp, r.str());
  write_file(fp, f.str());
  const RunResult res =
      run("estimate --method fm --se plain --returns " + rp + " --factors " + fp +
          " --zero-beta intercept");
  CHECK(res.exit_code == 3);
  std::remove(rp.c_str());
  std::remove(fp.c_str());
}

TEST_CASE("drlm-cs produces projections and a long CSV") {
  Fixture fx;
  const std::string csv = "/tmp/premia_cli_cs.csv";
  const RunResult r = run("drlm-cs " + fx.inputs() +
                          " --zero-beta zero --alpha 0.05 --grid \"-3:3:0.25\" --csv " + csv);
  REQUIRE(r.exit_code == 0);
  check_against_schema(r.out, "drlm-cs.schema.json");
  const json j = json::parse(r.out);
  CHECK(j["n_grid_points"].get<int>() == 25 * 25);
  CHECK(j["projections"].size() == 2);

  std::ifstream in(csv);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "l1,l2,drlm,reject_raw,reject_final");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 25 * 25);
  std::remove(csv.c_str());

  SUBCASE("deterministic output") {
    const RunResult again = run("drlm-cs " + fx.inputs() +
                                " --zero-beta zero --alpha 0.05 --grid \"-3:3:0.25\"");
    const RunResult again2 = run("drlm-cs " + fx.inputs() +
                                 " --zero-beta zero --alpha 0.05 --grid \"-3:3:0.25\"");
    CHECK(again.out == again2.out);
  }
}

TEST_CASE("simulate theorem2 and contours run end to end") {
  const std::string csv = "/tmp/premia_cli_sim.csv";
  const RunResult th = run(
      "simulate --experiment theorem2 --reps 200 --seed 4 --T 500 --N 8 "
      "--beta-scale 0.3 --e-scale 0.2 --out " + csv);
  REQUIRE(th.exit_code == 0);
  check_against_schema(th.out, "simulate.schema.json");
  const json j = json::parse(th.out);
  CHECK(j.contains("ks_distance"));

  SUBCASE("fixed seed reproduces byte-identical JSON and CSV") {
    std::ifstream in1(csv);
    std::stringstream first;
    first << in1.rdbuf();
    const RunResult again = run(
        "simulate --experiment theorem2 --reps 200 --seed 4 --T 500 --N 8 "
        "--beta-scale 0.3 --e-scale 0.2 --out " + csv);
    CHECK(again.out == th.out);
    std::ifstream in2(csv);
    std::stringstream second;
    second << in2.rdbuf();
    CHECK(first.str() == second.str());
  }

  const RunResult ct = run(
      "simulate --experiment contours --grid-res 11 --reps 100 --seed 4 --N 8 --out " + csv);
  REQUIRE(ct.exit_code == 0);
  check_against_schema(ct.out, "simulate.schema.json");
  std::remove(csv.c_str());
}

TEST_CASE("zoo-scan and zoo-summarize round trip") {
  Fixture fx;
  const std::string shard = "/tmp/premia_cli_shard.bin";
  const RunResult scan = run("zoo-scan " + fx.inputs() +
                             " --zero-beta zero --k 1 --out " + shard + " --audit 2");
  REQUIRE(scan.exit_code == 0);
  check_against_schema(scan.out, "zoo-scan.schema.json");
  const json js = json::parse(scan.out);
  CHECK(js["n_models_total"].get<int>() == 2);
  CHECK(js["audit"]["max_dj"].get<double>() < 1e-8);

  const std::string hist = "/tmp/premia_cli_hist.csv";
  const RunResult sum =
      run("zoo-summarize --inputs " + shard + " --bins 5 --hist-csv " + hist);
  REQUIRE(sum.exit_code == 0);
  check_against_schema(sum.out, "zoo-summarize.schema.json");
  const json jm = json::parse(sum.out);
  CHECK(jm["n_records"].get<int>() == 2);
  std::remove(shard.c_str());
  std::remove(hist.c_str());
}

TEST_CASE("unknown flags and missing subcommand exit 2") {
  CHECK(run("jis --bogus x").exit_code == 2);
  CHECK(run("").exit_code == 2);
}
