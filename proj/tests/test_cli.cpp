#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "util.hpp"

namespace {

const std::string kBin = DADE_CLI_BINARY;

int run(const std::string& args) {
    const int status = std::system((kBin + " " + args).c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

// One shared artifact set: synth -> fit (both kinds) -> calibrate -> build
// (both indexes) -> gt. Built on first use; every later case reads from it.
struct Pipeline {
    testutil::TempDir dir;
    std::string base, queries, pca, rnd, cal, ivf, hnsw, gt;
    bool ok = false;
    std::string failed_step;

    Pipeline() {
        base = dir.file("base.fvecs").string();
        queries = dir.file("q.fvecs").string();
        pca = dir.file("pca.transform").string();
        rnd = dir.file("rnd.transform").string();
        cal = dir.file("table.cal").string();
        ivf = dir.file("index.ivf").string();
        hnsw = dir.file("index.hnsw").string();
        gt = dir.file("gt.ivecs").string();

        spit(dir.file("synth.cfg"),
             "count = 600\n"
             "dim = 16\n"
             "queries = 20\n"
             "seed = 11\n"
             "spectrum = power\n"
             "alpha = 1.0\n"
             "rotate = true\n");

        const std::string quiet = " >/dev/null 2>&1";
        const std::vector<std::pair<std::string, std::string>> steps = {
            {"synth", "synth --config " + dir.file("synth.cfg").string() + " --out " + base +
                          " --queries " + queries},
            {"fit pca", "fit --data " + base + " --out " + pca + " --kind pca"},
            {"fit random", "fit --data " + base + " --out " + rnd + " --kind random --seed 5"},
            {"calibrate", "calibrate --data " + base + " --transform " + pca + " --out " + cal +
                              " --p-s 0.1 --delta-d 4 --pairs 20000 --seed 3"},
            {"build ivf", "build --data " + base + " --transform " + pca + " --out " + ivf +
                              " --index ivf --clusters 10 --seed 9"},
            {"build hnsw", "build --data " + base + " --transform " + pca + " --out " + hnsw +
                               " --index hnsw --m 8 --ef-construction 60 --seed 7"},
            {"gt", "gt --data " + base + " --queries " + queries + " --out " + gt + " --k 10"},
        };
        for (const auto& [name, args] : steps) {
            const int status = std::system((kBin + " " + args + quiet).c_str());
            if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                failed_step = name;
                return;
            }
        }
        ok = true;
    }
};

const Pipeline& pipe() {
    static const Pipeline p;
    return p;
}

}  // namespace

TEST_CASE("the full pipeline produces every artifact") {
    const auto& p = pipe();
    INFO("failed step: ", p.failed_step);
    REQUIRE(p.ok);
    for (const std::string* f : {&p.base, &p.queries, &p.pca, &p.rnd, &p.cal, &p.ivf, &p.hnsw,
                                 &p.gt})
        CHECK(std::filesystem::file_size(*f) > 0);
}

TEST_CASE("an ivf sweep through the binary is byte-reproducible without timing") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const auto csv1 = p.dir.file("s1.csv");
    const auto csv2 = p.dir.file("s2.csv");

    const std::string common = "sweep --index " + p.ivf + " --transform " + p.pca +
                               " --calibration " + p.cal + " --queries " + p.queries + " --gt " +
                               p.gt + " --dco dade --delta-d 4 --n-probe 2,5,10 --k 10" +
                               " --no-timing >/dev/null 2>&1";
    CHECK(run(common + " --out " + csv1.string()) == 0);
    CHECK(run(common + " --out " + csv2.string()) == 0);

    const std::string text = slurp(csv1);
    CHECK(text == slurp(csv2));

    const auto lines = lines_of(text);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "# dade sweep v1");
    CHECK(lines[2].find("ivf,contiguous,-,dade,n_probe,2,10,1,") == 0);
    CHECK(lines[4].find(",n_probe,10,") != std::string::npos);

    SUBCASE("timing fills the empty columns") {
        const auto timed = p.dir.file("timed.csv");
        const std::string cmd = "sweep --index " + p.ivf + " --transform " + p.pca +
                                " --calibration " + p.cal + " --queries " + p.queries +
                                " --dco dade --delta-d 4 --n-probe 10 --out " + timed.string() +
                                " >/dev/null 2>&1";
        CHECK(run(cmd) == 0);
        const auto row = lines_of(slurp(timed))[2];
        // recall and failure_rate stay empty without --gt, timing is present
        CHECK(row.find(",,") != std::string::npos);
        CHECK(row.find("n_probe,10,10,1,,") != std::string::npos);
    }
}

TEST_CASE("an hnsw sweep is recognized from the file magic") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const auto csv = p.dir.file("hnsw.csv");
    const std::string cmd = "sweep --index " + p.hnsw + " --transform " + p.pca +
                            " --calibration " + p.cal + " --queries " + p.queries + " --gt " +
                            p.gt + " --dco dade --delta-d 4 --n-ef 20:60:40 --decoupled" +
                            " --no-timing --out " + csv.string() + " >/dev/null 2>&1";
    CHECK(run(cmd) == 0);

    const auto lines = lines_of(slurp(csv));
    REQUIRE(lines.size() == 4);  // grid 20:60:40 expands to {20, 60}
    CHECK(lines[2].find("hnsw,-,1,dade,n_ef,20,") == 0);
    CHECK(lines[3].find("hnsw,-,1,dade,n_ef,60,") == 0);
}

TEST_CASE("a linear sweep scans the raw vectors through the transform") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const auto csv = p.dir.file("linear.csv");
    const std::string cmd = "sweep --data " + p.base + " --transform " + p.pca + " --queries " +
                            p.queries + " --gt " + p.gt + " --dco fixed-pca --d-fixed 4,8,16" +
                            " --no-timing --out " + csv.string() + " >/dev/null 2>&1";
    CHECK(run(cmd) == 0);

    const auto lines = lines_of(slurp(csv));
    REQUIRE(lines.size() == 5);
    CHECK(lines[2].find("linear,-,-,fixed-pca,d_fixed,4,") == 0);
    CHECK(lines[4].find(",1.000000,") != std::string::npos);  // full-width scan is exact

    SUBCASE("omitting both --index and --data is a config error") {
        const auto err = p.dir.file("noindex.err");
        const std::string bad = "sweep --transform " + p.pca + " --queries " + p.queries +
                                " --dco fd >/dev/null 2>" + err.string();
        CHECK(run(bad) == 2);
        CHECK(slurp(err).find("linear sweep needs --data") != std::string::npos);
    }
}

TEST_CASE("feasibility curves come out of one self-contained command") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const auto csv1 = p.dir.file("feas1.csv");
    const auto csv2 = p.dir.file("feas2.csv");
    const std::string common = "feasibility --data " + p.base + " --queries " + p.queries +
                               " --d-fixed 4,16 --eps0-grid 2.1 --p-s-grid 0.1,0.3" +
                               " --delta-d 4 --k 10 --pairs 5000 --no-timing >/dev/null 2>&1";
    CHECK(run(common + " --out " + csv1.string()) == 0);
    CHECK(run(common + " --out " + csv2.string()) == 0);
    CHECK(slurp(csv1) == slurp(csv2));

    const auto lines = lines_of(slurp(csv1));
    // fd + 2 fixed-random + 2 fixed-pca + 1 ads + 2 dade rows after 2 headers
    REQUIRE(lines.size() == 10);
    CHECK(lines[0] == "# dade feasibility v1");
    CHECK(lines[2].find("fd,") == 0);
    CHECK(lines[8].find("dade,4,p_s,0.1,") == 0);
    CHECK(lines[9].find("dade,4,p_s,0.3,") == 0);

    SUBCASE("an unknown strategy name is rejected") {
        const auto err = p.dir.file("strategy.err");
        const std::string bad = "feasibility --data " + p.base + " --queries " + p.queries +
                                " --strategies fd,pq >/dev/null 2>" + err.string();
        CHECK(run(bad) == 2);
        CHECK(slurp(err).find("unknown strategy 'pq'") != std::string::npos);
    }
}

TEST_CASE("mismatched artifacts exit with the configuration code") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const std::string tail = " --queries " + p.queries + " --no-timing >/dev/null 2>&1";

    SUBCASE("calibration stride differs from the requested one") {
        CHECK(run("sweep --index " + p.ivf + " --transform " + p.pca + " --calibration " + p.cal +
                  " --dco dade --delta-d 8 --n-probe 5" + tail) == 2);
    }
    SUBCASE("dade without a calibration table") {
        CHECK(run("sweep --index " + p.ivf + " --transform " + p.pca +
                  " --dco dade --delta-d 4 --n-probe 5" + tail) == 2);
    }
    SUBCASE("ads on a pca transform") {
        CHECK(run("sweep --index " + p.ivf + " --transform " + p.pca +
                  " --dco ads --delta-d 4 --n-probe 5" + tail) == 2);
    }
    SUBCASE("ground truth computed for a different k") {
        CHECK(run("sweep --index " + p.ivf + " --transform " + p.pca + " --calibration " + p.cal +
                  " --gt " + p.gt + " --dco dade --delta-d 4 --n-probe 5 --k 5" + tail) == 2);
    }
    SUBCASE("transform dimensionality differs from the data") {
        spit(p.dir.file("small.cfg"), "count = 80\ndim = 8\nseed = 2\n");
        REQUIRE(run("synth --config " + p.dir.file("small.cfg").string() + " --out " +
                    p.dir.file("small.fvecs").string() + " >/dev/null 2>&1") == 0);
        const auto err = p.dir.file("dim.err");
        CHECK(run("build --data " + p.dir.file("small.fvecs").string() + " --transform " + p.pca +
                  " --out " + p.dir.file("bad.ivf").string() + " >/dev/null 2>" + err.string()) ==
              2);
        CHECK(slurp(err).find("does not match transform dim") != std::string::npos);
    }
}

TEST_CASE("missing and malformed inputs exit with the right codes") {
    const auto& p = pipe();
    REQUIRE(p.ok);
    const auto absent = p.dir.file("absent.fvecs").string();

    SUBCASE("missing files are runtime errors") {
        CHECK(run("fit --data " + absent + " --out " + p.dir.file("t.out").string() +
                  " >/dev/null 2>&1") == 1);
        CHECK(run("sweep --index " + absent + " --transform " + p.pca + " --queries " + p.queries +
                  " >/dev/null 2>&1") == 1);
    }
    SUBCASE("a file with a foreign magic is a config error") {
        const auto garbage = p.dir.file("garbage.idx");
        spit(garbage, "XXXXnot an index");
        const auto err = p.dir.file("magic.err");
        CHECK(run("sweep --index " + garbage.string() + " --transform " + p.pca + " --queries " +
                  p.queries + " >/dev/null 2>" + err.string()) == 2);
        CHECK(slurp(err).find("not a recognized index file") != std::string::npos);
    }
    SUBCASE("a file too short to sniff is a runtime error") {
        const auto stub = p.dir.file("stub.idx");
        spit(stub, "DI");
        CHECK(run("sweep --index " + stub.string() + " --transform " + p.pca + " --queries " +
                  p.queries + " >/dev/null 2>&1") == 1);
    }
    SUBCASE("config parse failures are config errors") {
        spit(p.dir.file("bad.cfg"), "count = 10\ndim = 4\nwavelength = 3\n");
        CHECK(run("synth --config " + p.dir.file("bad.cfg").string() + " --out " + absent +
                  " >/dev/null 2>&1") == 2);
    }
    SUBCASE("requesting query output without queries in the config") {
        spit(p.dir.file("noq.cfg"), "count = 10\ndim = 4\n");
        CHECK(run("synth --config " + p.dir.file("noq.cfg").string() + " --out " +
                  p.dir.file("noq.fvecs").string() + " --queries " +
                  p.dir.file("noq_q.fvecs").string() + " >/dev/null 2>&1") == 2);
    }
    SUBCASE("malformed grids are config errors") {
        CHECK(run("sweep --index " + p.ivf + " --transform " + p.pca + " --queries " + p.queries +
                  " --dco fd --n-probe banana >/dev/null 2>&1") == 2);
    }
}

TEST_CASE("usage errors and help behave like a normal unix tool") {
    CHECK(run("--help >/dev/null 2>&1") == 0);
    CHECK(run("sweep --help >/dev/null 2>&1") == 0);
    CHECK(run(">/dev/null 2>&1") == 2);               // a subcommand is required
    CHECK(run("frobnicate >/dev/null 2>&1") == 2);    // unknown subcommand
    CHECK(run("fit >/dev/null 2>&1") == 2);           // missing required options
    CHECK(run("sweep --dco pq >/dev/null 2>&1") == 2);
}
