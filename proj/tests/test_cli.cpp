#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

const std::string kCli = COSA_CLI;
const std::string kSource = COSA_SOURCE_DIR;

struct Result {
    int code;
    std::string out;
};

/// Runs the CLI with stderr discarded.
Result run(const std::string& args) {
    const std::string cmd = "'" + kCli + "' " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string layer(const std::string& name) { return "--layer '" + kSource + "/configs/layers/" + name + ".layer'"; }

std::string temp_file(const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream(path) << text;
    return path;
}

}  // namespace

TEST_CASE("solve prints the report and the loop nest") {
    const auto r = run("solve " + layer("table2"));
    CHECK(r.code == 0);
    CHECK(r.out.rfind("status\toptimal\n", 0) == 0);
    CHECK(r.out.find("latency_cycles\t") != std::string::npos);
    CHECK(r.out.find("// layer R=3 S=1 P=1 Q=1 C=1 K=4 N=3 stride=1 on simba") != std::string::npos);
}

TEST_CASE("solved schedules can be evaluated again") {
    const auto out = (std::filesystem::temp_directory_path() / "cosa_cli_listing1.sched").string();
    const auto s = run("solve " + layer("listing1") + " --out '" + out + "'");
    REQUIRE(s.code == 0);
    const auto e = run("evaluate --schedule '" + out + "' --arch '" + kSource + "/configs/simba.arch'");
    CHECK(e.code == 0);
    const auto line = [](const std::string& text) {
        const auto at = text.find("latency_cycles\t");
        return text.substr(at, text.find('\n', at) - at);
    };
    CHECK(line(e.out) == line(s.out));
    std::filesystem::remove(out);
}

TEST_CASE("exit codes") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("solve").code == 2);
    CHECK(run("solve --layer /nonexistent/x.layer").code == 5);
    const auto bad = temp_file("cosa_cli_bad.layer", "[layer]\nR = 3\nS = one\n");
    CHECK(run("solve --layer '" + bad + "'").code == 2);
    CHECK(run("solve " + layer("table2") + " --budget 0").code == 3);
    CHECK(run("partition " + layer("table2") + " --budget 1").code == 3);
    CHECK(run("solve " + layer("table2") + " --obj nonsense").code == 2);
    CHECK(run("solve " + layer("table2") + " --time-limit 0").code == 2);
    CHECK(run("solve " + layer("fig8") + " --obj traffic --time-limit 0.2").code == 4);
    CHECK(run("compare " + layer("table2") + " --metric energy").code == 2);
    std::filesystem::remove(bad);
}

TEST_CASE("evaluate reports violations") {
    const auto path = temp_file("cosa_cli_bad.sched",
                                "cosa-schedule 1\narch simba\nlayer R=3 S=1 P=1 Q=1 C=1 K=4 N=3 stride=1\n"
                                "padded R=3 S=1 P=1 Q=1 C=1 K=4 N=3 stride=1\nlevel 0 Register\nlevel 1 AccumBuf\n"
                                "level 2 WeightBuf\nlevel 3 InputBuf\nlevel 4 GlobalBuf\nlevel 5 DRAM\n"
                                "loop 5 0 K 4 t\nend\n");
    const auto r = run("evaluate --schedule '" + path + "'");
    CHECK(r.code == 2);
    CHECK(r.out.find("violation\tdimension underflow") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("compare is deterministic") {
    const std::string args = "compare " + layer("table2") + " " + layer("tiny") + " --seed 3";
    const auto a = run(args), b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("geomean") != std::string::npos);
}

TEST_CASE("enumerate counts valid schedules") {
    const auto r = run("enumerate " + layer("table2"));
    CHECK(r.code == 0);
    CHECK(r.out.find("valid_schedules\t7794\n") != std::string::npos);
    CHECK(run("enumerate " + layer("listing1") + " --limit 100").code == 2);
}

TEST_CASE("sweep and partition tables") {
    const auto s = run("sweep " + layer("table2") + " --grid-u 1 --grid-c 1,2 --grid-t 0");
    CHECK(s.code == 0);
    CHECK(s.out.find("*") != std::string::npos);
    const auto p = run("partition " + layer("table2"));
    CHECK(p.code == 0);
    CHECK(p.out.find("fixed_objective") != std::string::npos);
}
