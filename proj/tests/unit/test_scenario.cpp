#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "endotrack/error.hpp"
#include "endotrack/sim/scenario.hpp"

using namespace endotrack;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json quiescent() { return json::parse(slurp(fs::path(ENDOTRACK_SCENARIO_DIR) / "quiescent.json")); }

std::string config_error(const json& doc) {
  try {
    sim::parse_scenario(doc.dump());
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigInvalid);
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ENDOTRACK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("every bundled scenario parses and validates") {
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(ENDOTRACK_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    const auto sc = sim::load_scenario(e.path().string());
    CHECK_NOTHROW(sc.validate());
    CHECK(!sc.name.empty());
    ++n;
  }
  CHECK(n >= 8);
}

TEST_CASE("bundled scenario values reach the config") {
  const auto sc = sim::parse_scenario(quiescent().dump());
  CHECK(sc.name == "quiescent");
  CHECK(sc.duration == doctest::Approx(60.0));
  CHECK(sc.control_rate == doctest::Approx(100.0));
  CHECK(sc.joints.l == doctest::Approx(0.06));
  CHECK(sc.sensor.rate == doctest::Approx(9.0));
  CHECK(sc.sensor.delay == doctest::Approx(0.34));
  CHECK(sc.servo.method == servo::Method::HYBRID);
  CHECK(sc.ait.w_d == doctest::Approx(0.5));
  CHECK(sc.ait.z_star == doctest::Approx(0.08));
}

TEST_CASE("invalid documents name the offending key") {
  SUBCASE("unknown top-level key") {
    auto d = quiescent();
    d["bogus"] = 1;
    CHECK(config_error(d).find("bogus") != std::string::npos);
  }
  SUBCASE("unknown nested key") {
    auto d = quiescent();
    d["servo"]["gain"] = 2.0;
    CHECK(config_error(d).find("servo.gain") != std::string::npos);
  }
  SUBCASE("negative insertion depth") {
    auto d = quiescent();
    d["joints"]["l"] = -0.01;
    CHECK(config_error(d).find("joints.l") != std::string::npos);
  }
  SUBCASE("wrong type") {
    auto d = quiescent();
    d["sensor"]["rate"] = "fast";
    CHECK(config_error(d).find("sensor.rate") != std::string::npos);
  }
  SUBCASE("unknown servo method") {
    auto d = quiescent();
    d["servo"]["method"] = "MPC";
    CHECK(!config_error(d).empty());
  }
  SUBCASE("zone fractions must be ordered and positive") {
    auto d = quiescent();
    d["ait"]["zone_a"] = -0.1;
    CHECK(config_error(d).find("ait") != std::string::npos);
  }
  SUBCASE("dropout probability") {
    auto d = quiescent();
    d["sensor"]["dropout"] = 1.5;
    CHECK(config_error(d).find("sensor.dropout") != std::string::npos);
  }
  SUBCASE("not JSON") {
    try {
      sim::parse_scenario("{\"name\": ");
      FAIL("accepted truncated JSON");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ConfigInvalid);
    }
  }
}

TEST_CASE("CLI maps configuration errors to exit code 2") {
  const fs::path out = fs::temp_directory_path() / "endotrack_test_scenario";
  fs::remove_all(out);
  CHECK(run_cli("simulate " + std::string(ENDOTRACK_FIXTURE_DIR) + "/negative_l.json -o " + out.string()) == 2);
  CHECK(!fs::exists(out / "runlog.csv"));
  CHECK(run_cli("simulate " + (out / "missing.json").string() + " -o " + out.string()) == 2);
  CHECK(run_cli("simulate") == 2);
  CHECK(run_cli("no-such-command") == 2);
}

TEST_CASE("CLI simulate writes the run log and metrics") {
  const fs::path out = fs::temp_directory_path() / "endotrack_test_simulate";
  fs::remove_all(out);
  REQUIRE(run_cli("simulate " + std::string(ENDOTRACK_FIXTURE_DIR) + "/short_quiescent.json -o " + out.string()) == 0);
  std::ifstream csv(out / "runlog.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("t,", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 51);  // t = 0 through t = duration inclusive
  const auto m = json::parse(slurp(out / "metrics.json"));
  CHECK(m.is_object());
  CHECK(m.contains("hysteresis_violations"));
}

TEST_CASE("CSV column order matches the golden headers") {
  const auto first_line = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
  };
  const fs::path fixtures(ENDOTRACK_FIXTURE_DIR);
  const fs::path out = fs::temp_directory_path() / "endotrack_test_columns";
  fs::remove_all(out);
  REQUIRE(run_cli("simulate " + (fixtures / "short_quiescent.json").string() + " -o " + (out / "sim").string()) == 0);
  REQUIRE(run_cli("servo-compare -o " + (out / "servo").string()) == 0);

  const std::string runlog = first_line(fixtures / "runlog_columns.csv");
  CHECK(first_line(out / "sim" / "runlog.csv") == runlog);
  const std::string servo = first_line(fixtures / "servo_columns.csv");
  int files = 0;
  for (const auto& e : fs::directory_iterator(out / "servo")) {
    if (e.path().extension() != ".csv") continue;
    CAPTURE(e.path().string());
    CHECK(first_line(e.path()) == servo);
    ++files;
  }
  CHECK(files == 10);

  std::ifstream csv(out / "sim" / "runlog.csv");
  const auto fields = [](const std::string& s) { return std::count(s.begin(), s.end(), ',') + 1; };
  std::string line;
  std::getline(csv, line);
  const auto width = fields(line);
  while (std::getline(csv, line)) CHECK(fields(line) == width);
}
