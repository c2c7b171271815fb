#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dmap/grid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int exit_code = -1;
    std::string out;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "dmap_cli_tests";
        fs::remove_all(d);
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

CliRun run_cli(const std::string& args) {
    static int invocation = 0;
    const fs::path out_file = work_dir() / ("stdout_" + std::to_string(invocation++));
    const std::string cmd = std::string(DMAP_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    return r;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

}  // namespace

TEST_CASE("gen writes a DMF1 map and reports the integral") {
    const fs::path ann = work_dir() / "scene.json";
    const fs::path map = work_dir() / "scene.dmf1";
    write_file(ann, R"({"width":64,"height":64,)"
                    R"("points":[[10,10],[30,20],[50,40],[12,50],[40,55]]})");

    const CliRun r = run_cli("gen --annotations " + ann.string() + " --out " +
                             map.string() + " --sigma fixed:3");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc["n"] == 5);
    CHECK(std::abs(doc["integral"].get<double>() - 5.0) < 1e-4);

    const dmap::DensityMap loaded = dmap::read_density_map(map.string());
    CHECK(loaded.width() == 64);
    CHECK(std::abs(dmap::integral_count(loaded) - 5.0) < 1e-3);
}

TEST_CASE("gen honors fixed:15 and errors on missing input") {
    const fs::path ann = work_dir() / "pair.json";
    write_file(ann, R"({"width":128,"height":128,"points":[[60,60],[70,70]]})");
    const CliRun ok = run_cli("gen --annotations " + ann.string() + " --out " +
                              (work_dir() / "pair.dmf1").string() + " --sigma fixed:15");
    CHECK(ok.exit_code == 0);

    const CliRun missing = run_cli("gen --annotations /nonexistent.json --out " +
                                   (work_dir() / "x.dmf1").string());
    CHECK(missing.exit_code != 0);
    const json err = json::parse(missing.out);
    CHECK(err.contains("error"));
}

TEST_CASE("localize is byte-deterministic and eval closes the loop") {
    const fs::path ann = work_dir() / "loc.json";
    const fs::path map = work_dir() / "loc.dmf1";
    const fs::path centers_a = work_dir() / "centers_a.json";
    write_file(ann, R"({"width":96,"height":96,)"
                    R"("points":[[20,20],[70,20],[20,70],[70,70]]})");
    REQUIRE(run_cli("gen --annotations " + ann.string() + " --out " + map.string() +
                    " --sigma fixed:2").exit_code == 0);

    for (const std::string method : {"isolated", "kmeans"}) {
        const std::string args = "localize --density " + map.string() + " --method " +
                                 method + " --seed 11 --out ";
        const CliRun a = run_cli(args + centers_a.string());
        const std::string bytes_a = slurp(centers_a);
        const CliRun b = run_cli(args + centers_a.string());
        REQUIRE(a.exit_code == 0);
        REQUIRE(b.exit_code == 0);
        CHECK(a.out == b.out);
        CHECK(slurp(centers_a) == bytes_a);
        const json doc = json::parse(slurp(centers_a));
        CHECK(doc["K"] == 4);

        const CliRun ev = run_cli("eval --centers " + centers_a.string() +
                                  " --annotations " + ann.string());
        REQUIRE(ev.exit_code == 0);
        const json report = json::parse(ev.out);
        CHECK(report["count_gt"] == 4);
        CHECK(report["ap"].contains("10"));
        CHECK(report["ap"].contains("20"));
        CHECK(report["ap"].contains("40"));
        CHECK(report["ap"]["40"].get<double>() == 1.0);
    }
}

TEST_CASE("eval scores hand-written centers equal to ground truth at AP 1") {
    const fs::path ann = work_dir() / "gt_eval.json";
    const fs::path centers = work_dir() / "gt_centers.json";
    write_file(ann, R"({"width":64,"height":64,"points":[[8,8],[40,12],[20,50]]})");
    write_file(centers, R"({"K":3,"centers":[[8,8,9],[40,12,5],[20,50,2]]})");
    const CliRun r = run_cli("eval --centers " + centers.string() +
                             " --annotations " + ann.string());
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    for (const char* delta : {"10", "20", "40"})
        CHECK(doc["ap"][delta].get<double>() == 1.0);
}

TEST_CASE("bench single-trial sparse clean scene localizes perfectly") {
    const CliRun r = run_cli(
        "bench --trials 1 --width 256 --height 256 --heads 10:10 --placement uniform"
        " --noise-sigma 0 --sigma fixed:2.5 --seed 3");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc["methods"]["isolated"]["ap"]["40"].get<double>() == 1.0);
    CHECK(doc["methods"]["isolated"]["mae"].get<double>() == 0.0);
}

TEST_CASE("localize on an empty map returns K=0") {
    const fs::path map = work_dir() / "empty.dmf1";
    dmap::write_density_map(dmap::DensityMap(16, 16), map.string());
    const fs::path centers = work_dir() / "empty_centers.json";
    const CliRun r = run_cli("localize --density " + map.string() + " --out " +
                             centers.string());
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(slurp(centers));
    CHECK(doc["K"] == 0);
    CHECK(doc["centers"].empty());
}

TEST_CASE("attention subcommand covers both modes") {
    const fs::path ann = work_dir() / "att.json";
    const fs::path att = work_dir() / "att.dmf1";
    write_file(ann, R"({"width":20,"height":20,"points":[[5,5]]})");
    const CliRun w = run_cli("attention --mode window --annotations " + ann.string() +
                             " --out " + att.string() + " --window 25");
    REQUIRE(w.exit_code == 0);
    CHECK(json::parse(w.out)["ones"] == 18 * 18);

    const fs::path map = work_dir() / "att_src.dmf1";
    dmap::write_density_map(dmap::DensityMap(5, 1, {0.0, 0.0, 0.0, 1.0, 2.0}),
                            map.string());
    const CliRun t = run_cli("attention --mode threshold --density " + map.string() +
                             " --out " + att.string() + " --quantile 0.4");
    REQUIRE(t.exit_code == 0);
    CHECK(json::parse(t.out)["ones"] == 2);
}

TEST_CASE("losses subcommand computes the named kernels") {
    const fs::path a = work_dir() / "loss_a.dmf1";
    const fs::path b = work_dir() / "loss_b.dmf1";
    dmap::write_density_map(
        dmap::DensityMap(16, 16, std::vector<double>(256, 0.5)), a.string());
    dmap::write_density_map(dmap::DensityMap(16, 16), b.string());

    const CliRun mse = run_cli("losses --pred " + a.string() + " --gt " + b.string() +
                               " --loss mse");
    REQUIRE(mse.exit_code == 0);
    CHECK(json::parse(mse.out)["value"].get<double>() == doctest::Approx(0.25));

    const CliRun self = run_cli("losses --pred " + a.string() + " --gt " + a.string() +
                                " --loss ssim");
    REQUIRE(self.exit_code == 0);
    CHECK(std::abs(json::parse(self.out)["value"].get<double>()) <= 1e-9);

    const CliRun sal = run_cli("losses --pred " + a.string() + " --gt " + b.string() +
                               " --loss sal --levels 3 --pooling avg");
    REQUIRE(sal.exit_code == 0);
    CHECK(json::parse(sal.out)["value"].get<double>() == doctest::Approx(0.75));
}

TEST_CASE("viz emits a valid P5 image") {
    const fs::path map = work_dir() / "viz.dmf1";
    const fs::path img = work_dir() / "viz.pgm";
    dmap::write_density_map(dmap::DensityMap(8, 4, [] {
                                std::vector<double> v(32, 0.0);
                                v[9] = 2.0;  // peak maps to 255
                                return v;
                            }()),
                            map.string());
    const CliRun r = run_cli("viz --density " + map.string() + " --out " + img.string());
    REQUIRE(r.exit_code == 0);
    const std::string pgm = slurp(img);
    CHECK(pgm.rfind("P5\n8 4\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n8 4\n255\n").size() + 32);
    CHECK(static_cast<unsigned char>(pgm[std::string("P5\n8 4\n255\n").size() + 9]) == 255);

    SUBCASE("all-zero maps render black") {
        const fs::path zmap = work_dir() / "viz0.dmf1";
        const fs::path zimg = work_dir() / "viz0.pgm";
        dmap::write_density_map(dmap::DensityMap(4, 4), zmap.string());
        REQUIRE(run_cli("viz --density " + zmap.string() + " --out " +
                        zimg.string()).exit_code == 0);
        const std::string zpgm = slurp(zimg);
        const std::size_t header = std::string("P5\n4 4\n255\n").size();
        for (std::size_t i = header; i < zpgm.size(); ++i)
            CHECK(zpgm[i] == '\0');
    }
}

TEST_CASE("bench emits identical CSVs for identical seeds") {
    const fs::path csv_a = work_dir() / "bench_a.csv";
    const fs::path csv_b = work_dir() / "bench_b.csv";
    const std::string flags =
        " --trials 2 --width 72 --height 72 --heads 8:16 --noise-sigma 0.0005"
        " --sigma fixed:2.5 --seed 42 --threads 2 --csv ";
    const CliRun a = run_cli("bench" + flags + csv_a.string());
    const CliRun b = run_cli("bench" + flags + csv_b.string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(slurp(csv_a) == slurp(csv_b));

    const json doc = json::parse(a.out);
    CHECK(doc["trials"] == 2);
    CHECK(doc["methods"].contains("kmeans"));
    CHECK(doc["methods"].contains("isolated"));
    CHECK(doc["methods"]["isolated"]["ap"].contains("20"));

    const std::string csv = slurp(csv_a);
    CHECK(csv.rfind("trial,seed,heads,method,count_est,ap10,ap20,ap40\n", 0) == 0);
}

TEST_CASE("unknown arguments produce an error JSON and nonzero exit") {
    const CliRun r = run_cli("localize --no-such-flag");
    CHECK(r.exit_code != 0);
    CHECK(json::parse(r.out).contains("error"));
}
