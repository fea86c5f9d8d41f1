#include "corpus.hpp"

#include "pips/fixtures.hpp"
#include "pips/io.hpp"
#include "pips_cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace pips;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "pips_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = pips::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pips-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
        toggle_ = path("toggle2.json");
        io::save_model(fixtures::toggle2(), toggle_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string write(const std::string& name, const std::string& content) const {
        io::write_file(path(name), content);
        return path(name);
    }

    fs::path dir_;
    std::string toggle_;
};

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

} // namespace

TEST(Io, ModelRoundTripIsExact) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = corpus::random_instance(seed).model;
        const auto back = io::model_from_json(io::parse_json(io::model_to_string(m), "mem"));
        EXPECT_EQ(back, m);
    }
}

TEST(Io, PolicyRoundTripAndIndexing) {
    const FiniteHorizonPolicy p({{1, 0}, {0, 1}, {1, 1}});
    const auto j = io::policy_to_json(p);
    EXPECT_EQ(j.at("indexing"), "remaining-horizon");
    EXPECT_EQ(io::policy_from_json(j), p);
    auto bad = j;
    bad["indexing"] = "time";
    EXPECT_THROW(io::policy_from_json(bad), io::IoError);
    bad = j;
    bad["horizon"] = 2;
    EXPECT_THROW(io::policy_from_json(bad), io::IoError);
}

TEST(Io, ScheduleParsing) {
    EXPECT_EQ(io::parse_schedule("0 1\n2  0"), (std::vector<State>{0, 1, 2, 0}));
    EXPECT_THROW(io::parse_schedule("0 x"), io::IoError);
    EXPECT_THROW(io::parse_schedule("-1"), io::IoError);
}

TEST(Io, FormatUsesTwelveSignificantDigits) {
    EXPECT_EQ(io::fmt(2.0), "2");
    EXPECT_EQ(io::fmt(1.0 / 3.0), "0.333333333333");
}

TEST_F(CliTest, SolveToggle2) {
    const auto r = run({"solve", toggle_, "-H", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "V*[2] = (2, 3)"));
    EXPECT_TRUE(contains(r.out, "pi*[2] = (1, 0)"));
}

TEST_F(CliTest, PipsSyncToggle2) {
    const auto r = run({"pips-sync", toggle_, "-H", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "iterations: 1"));
    EXPECT_TRUE(contains(r.out, "V[2] = (2, 3)"));
}

TEST_F(CliTest, PipsAsyncSchedules) {
    auto r = run({"pips-async", toggle_, "-H", "2", "--schedule", "improvable"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "terminated: yes"));
    const auto sched = write("sched.txt", "1\n");
    const auto report = path("report.jsonl");
    r = run({"pips-async", toggle_, "-H", "2", "--schedule", "file:" + sched, "--max-steps", "10", "--report",
             report});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "terminated: no"));
    EXPECT_EQ(io::read_file(report), "");
    r = run({"pips-async", toggle_, "-H", "2", "--schedule", "embedded", "--seed", "3"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "V[2] = (2, 3)"));
    EXPECT_EQ(run({"pips-async", toggle_, "-H", "2", "--schedule", "bogus"}).code, 64);
}

TEST_F(CliTest, OnlineFromStateOneReportsLocalOptimum) {
    const auto trace = path("trace.jsonl");
    const auto r = run({"online", toggle_, "-H", "2", "--steps", "100", "--start", "1", "--trace", trace});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "K: 0"));
    EXPECT_TRUE(contains(r.out, "class {1} recurrent locally optimal"));
    EXPECT_TRUE(contains(r.out, "globally optimal: no"));
    std::istringstream lines(io::read_file(trace));
    std::string line, last;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        const auto j = io::parse_json(line, "trace");
        if (!j.contains("summary")) {
            for (const char* key : {"k", "state", "action", "reward", "changed_levels", "suggestions_accepted",
                                    "suggestions_rejected", "value_at_state"})
                EXPECT_TRUE(j.contains(key)) << key;
            ++count;
        }
        last = line;
    }
    EXPECT_EQ(count, 8u);
    EXPECT_EQ(io::parse_json(last, "trace").at("K"), 0);
}

TEST_F(CliTest, OnlineIsDeterministic) {
    const auto model = path("gen.json");
    ASSERT_EQ(run({"gen", "--states", "5", "--actions", "3", "--density", "0.5", "--seed", "4", "-o", model}).code, 0);
    const std::vector<std::string> args{"online", model, "-H", "3", "--steps", "300", "--seed", "8",
                                        "--supervisor", "random", "--trace", path("t.jsonl")};
    const auto a = run(args);
    const auto first = io::read_file(path("t.jsonl"));
    const auto b = run(args);
    EXPECT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(first, io::read_file(path("t.jsonl")));
    EXPECT_EQ(run({"online", model, "-H", "3", "--steps", "10", "--supervisor", "nobody"}).code, 64);
    EXPECT_EQ(run({"online", model, "-H", "3", "--steps", "10", "--supervisor", "oracle"}).code, 0);
}

TEST_F(CliTest, AnalyzeToggle2) {
    auto r = run({"analyze", toggle_, "--exhaustive"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(contains(r.out, "communicating: no (exhaustive)"));
    EXPECT_TRUE(contains(r.out, "witness: (0, 0)"));
    const auto phi = write("phi.json", "[1, 0]");
    r = run({"analyze", toggle_, "--policy", phi});
    EXPECT_TRUE(contains(r.out, "{0} transient"));
    EXPECT_TRUE(contains(r.out, "{1} recurrent"));
    EXPECT_TRUE(contains(r.out, "communicating: unknown"));
    EXPECT_EQ(run({"analyze", toggle_, "--exhaustive", "--cap", "2"}).code, 3);
}

TEST_F(CliTest, ErrorBoundCsv) {
    const auto csv = path("err.csv");
    const auto r = run({"errorbound", toggle_, "--hmin", "1", "--hmax", "3", "-o", csv});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(io::read_file(csv), "H,error\n1,0\n2,0\n3,0\n");
    EXPECT_EQ(run({"errorbound", toggle_, "--hmin", "3", "--hmax", "1"}).code, 3);
}

TEST_F(CliTest, GenIsByteIdentical) {
    const std::vector<std::string> base{"gen", "--states", "4", "--actions", "2", "--ensure-positive", "--seed", "7"};
    auto a = base, b = base;
    a.insert(a.end(), {"-o", path("a.json")});
    b.insert(b.end(), {"-o", path("b.json")});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
    EXPECT_EQ(run({"validate", path("a.json")}).code, 0);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run({"solve", path("missing.json"), "-H", "2"}).code, 2);
    EXPECT_EQ(run({"solve", write("junk.json", "{not json"), "-H", "2"}).code, 2);
    EXPECT_EQ(run({"solve", write("shape.json", "{\"gamma\": 0.5}"), "-H", "2"}).code, 2);

    auto j = io::model_to_json(fixtures::toggle2());
    j["transitions"][1][0] = {0.0, 0.9};
    const auto bad = write("bad.json", j.dump());
    const auto r = run({"validate", bad});
    EXPECT_EQ(r.code, 3);
    EXPECT_TRUE(contains(r.err, "(x=1, a=0)"));
    EXPECT_EQ(run({"solve", bad, "-H", "2"}).code, 3);

    EXPECT_EQ(run({}).code, 64);
    EXPECT_EQ(run({"solve", toggle_}).code, 64);
    EXPECT_EQ(run({"frobnicate"}).code, 64);
    EXPECT_EQ(run({"solve", toggle_, "-H", "0"}).code, 3);

    const auto init = write("init.json", io::policy_to_json(FiniteHorizonPolicy(3, 2, 0)).dump());
    EXPECT_EQ(run({"pips-sync", toggle_, "-H", "2", "--init", init}).code, 3);
}
