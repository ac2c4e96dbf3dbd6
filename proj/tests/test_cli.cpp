#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("iontrap_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Run run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt", err = work_dir() / "stderr.txt";
  const std::string cmd =
      std::string("'") + IONTRAP_EXE + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data(const std::string& name) { return std::string(IONTRAP_DATA_DIR) + "/" + name; }

std::string path(const std::string& name) { return (work_dir() / name).string(); }

// CSV lines that are not comments.
std::vector<std::string> rows(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 2 and --version exits 0") {
  CHECK(run("--version").code == 0);
  CHECK(run("").code == 2);
  CHECK(run("report").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("map " + data("surface.json") + " --box-um 1,2,3").code == 2);
}

TEST_CASE("malformed geometry JSON reports line and column") {
  write(path("bad.json"), "{\n  \"design\": \"surface\",\n  \"electrodes\": [,]\n}\n");
  const Run r = run("report " + path("bad.json") + " --out " + path("bad"));
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.json:3:") != std::string::npos);
  CHECK(run("report " + path("missing.json")).code == 2);
}

TEST_CASE("an ill-conditioned geometry exits 3 naming the solve stage") {
  write(path("tiny.json"), R"({"design": "custom", "units": "um",
    "params": {"mesh": {"fine_element": 50, "coarse_element": 50, "fine_region_size": [400, 400, 400]}},
    "electrodes": [
      {"name": "rf", "role": "rf", "rects": [{"origin": [-100, 0, -100], "u": [200, 0, 0], "v": [0, 0, 200]}]},
      {"name": "g", "role": "ground", "rects": [{"origin": [500, 0, 0], "u": [1e-11, 0, 0], "v": [0, 0, 1e-11]}]}]})");
  const Run r = run("report " + path("tiny.json") + " --no-depth --no-reference --out " + path("tiny"));
  CHECK(r.code == 3);
  CHECK(r.err.find("solve") != std::string::npos);
}

TEST_CASE("validate names each failing invariant and exits 1 iff one fails") {
  const Run clean = run("validate");
  const Run faulty = run("validate --inject-eps0-scale 1.01");
  for (const char* name : {"kernel.far_field_potential", "kernel.far_field_field", "kernel.square_self_potential"}) {
    CHECK(clean.out.find(std::string("PASS  ") + name) != std::string::npos);
    CHECK(faulty.out.find(std::string("FAIL  ") + name) != std::string::npos);
  }
  CHECK(faulty.code == 1);
  const bool any_fail = clean.out.find("FAIL") != std::string::npos;
  CHECK(clean.code == (any_fail ? 1 : 0));
  CHECK(clean.out.find("checks passed") != std::string::npos);
}

TEST_CASE("build writes the three default geometries with manifests") {
  const Run r = run("build --out " + path("geo"));
  REQUIRE(r.code == 0);
  for (const char* f : {"surface.json", "gnd_surface.json", "cross_rf.json"}) {
    const auto j = nlohmann::json::parse(slurp(work_dir() / "geo" / f));
    CHECK(j.contains("manifest"));
    CHECK(j.at("electrodes").size() > 0);
  }
  CHECK(fs::exists(work_dir() / "geo" / "build.manifest.json"));
}

TEST_CASE("report output is byte-identical across runs") {
  const std::string args = "report " + data("cross_rf.json") + " --no-depth --no-reference --out ";
  REQUIRE(run(args + path("rep_a")).code == 0);
  const std::string first_csv = slurp(path("rep_a.csv")), first_json = slurp(path("rep_a.json"));
  REQUIRE(run(args + path("rep_a")).code == 0);
  CHECK(slurp(path("rep_a.csv")) == first_csv);
  CHECK(slurp(path("rep_a.json")) == first_json);
  CHECK(rows(first_csv).front() == "geometry,d_um,k,q,omega_MHz,V_kV,Omega_MHz,P_norm");
  CHECK(fs::exists(path("rep_a.manifest.json")));
}

TEST_CASE("a single-h sweep matches the report for the same geometry") {
  write(path("one.json"), R"({"design": "cross-rf", "h_um": [200], "depth": false})");
  const Run s = run("sweep " + path("one.json") + " --out " + path("one.csv"));
  REQUIRE(s.code == 0);
  REQUIRE(run("report " + data("cross_rf.json") + " --no-depth --no-reference --out " + path("rep_b")).code == 0);
  const auto rep = nlohmann::json::parse(slurp(path("rep_b.json")));
  const auto lines = rows(slurp(path("one.csv")));
  REQUIRE(lines.size() == 2);
  const auto cells = split(lines[1]);
  REQUIRE(cells.size() == 8);
  CHECK(cells[7] == "ok");
  CHECK(std::stod(cells[1]) == doctest::Approx(rep.at("d_um").get<double>()).epsilon(1e-5));
  CHECK(std::stod(cells[2]) == doctest::Approx(rep.at("k").get<double>()).epsilon(1e-4));
  CHECK(std::stod(cells[4]) == doctest::Approx(rep.at("omega_rad_MHz").get<double>()).epsilon(1e-4));
  CHECK(fs::exists(path("one.manifest.json")));
}

TEST_CASE("sweep spec validation") {
  write(path("order.json"), R"({"design": "cross-rf", "h_um": [200, 100], "depth": false})");
  CHECK(run("sweep " + path("order.json") + " --out " + path("order.csv")).code == 2);
  write(path("empty.json"), R"({"design": "cross-rf", "h_um": [], "depth": false})");
  CHECK(run("sweep " + path("empty.json") + " --out " + path("empty.csv")).code == 2);
  write(path("neg.json"), R"({"design": "cross-rf", "h_um": [-5, 100], "depth": false})");
  CHECK(run("sweep " + path("neg.json") + " --out " + path("neg.csv")).code == 2);
}

TEST_CASE("map at zero drive voltage is all zeros") {
  const Run r = run("map " + data("cross_rf.json") + " --voltage-V 0 --box-um -20,20,80,120,0,0 --resolution-um 10 --out " +
                    path("zero"));
  REQUIRE(r.code == 0);
  const auto lines = rows(slurp(path("zero.csv")));
  REQUIRE(lines.size() == 1 + 25);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(std::stod(split(lines[i]).at(3)) == 0.0);
  const auto header = nlohmann::json::parse(slurp(path("zero.json")));
  CHECK(header.contains("manifest"));
}

TEST_CASE("map plane outside the domain exits 2") {
  CHECK(run("map " + data("cross_rf.json") + " --plane z=1000000 --out " + path("far")).code == 2);
  CHECK(run("map " + data("cross_rf.json") + " --plane w=3 --out " + path("far")).code == 2);
}
