#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "multivariance/cli.hpp"

namespace mv = multivariance;
namespace fs = std::filesystem;

namespace {

struct cli_result {
    int code;
    std::string out;
    std::string err;
};

cli_result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = mv::cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream file(path);
    file << content;
    return path;
}

const std::string three_col_csv =
    "a,b,c\n"
    "0,0,0\n"
    "0,1,1\n"
    "1,0,1\n"
    "1,1,0\n"
    "0,0,0\n"
    "1,0,1\n"
    "0,1,1\n"
    "1,1,0\n";

}  // namespace

TEST_CASE("compute on a CSV file") {
    const auto path = temp_file("mv_cli_basic.csv", three_col_csv);

    SECTION("default spec: one group per column") {
        const auto r = run_cli({"compute", "--in", path.string(), "--kind", "multi"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.contains("statistic"));
        CHECK(j["n"] == 3);
        CHECK(j["N"] == 8);
        CHECK(j["groups"].size() == 3);
        CHECK(j["tool_version"].is_string());
        CHECK(j.contains("seed"));
        CHECK(j["psi"].size() == 3);
    }
    SECTION("grouping spec x:1-2,y:3") {
        const auto r = run_cli(
            {"compute", "--in", path.string(), "--kind", "multi", "--groups", "x:1-2,y:3"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["n"] == 2);
        CHECK(j["groups"][0]["dim"] == 2);
        CHECK(j["groups"][1]["dim"] == 1);
    }
    SECTION("correlation kinds expose value and squared_value") {
        const auto r = run_cli({"compute", "--in", path.string(), "--kind", "mcor2"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.contains("value"));
        CHECK(j.contains("squared_value"));
    }
    SECTION("unknown kind is a usage error") {
        const auto r = run_cli({"compute", "--in", path.string(), "--kind", "bogus"});
        CHECK(r.code == 1);
        CHECK(r.err.find("kind") != std::string::npos);
    }
}

TEST_CASE("csv ingestion errors carry locations") {
    SECTION("non-numeric cell points at row 5, column 2") {
        const auto path = temp_file("mv_cli_badcell.csv",
                                    "a,b\n1,2\n3,4\n5,6\n7,8\n9,oops\n11,12\n");
        const auto r = run_cli({"compute", "--in", path.string(), "--kind", "multi"});
        CHECK(r.code == 2);
        CHECK(r.err.find("row 5") != std::string::npos);
        CHECK(r.err.find("column 2") != std::string::npos);
        CHECK(r.err.find("oops") != std::string::npos);
    }
    SECTION("ragged row") {
        const auto path = temp_file("mv_cli_ragged.csv", "a,b\n1,2\n3\n");
        const auto r = run_cli({"compute", "--in", path.string(), "--kind", "multi"});
        CHECK(r.code == 2);
        CHECK(r.err.find("row 2") != std::string::npos);
    }
    SECTION("overlapping group ranges") {
        const auto path = temp_file("mv_cli_overlap.csv", three_col_csv);
        const auto r = run_cli(
            {"compute", "--in", path.string(), "--kind", "multi", "--groups", "x:1-2,y:2-3"});
        CHECK(r.code == 1);
        CHECK(r.err.find("more than one range") != std::string::npos);
    }
    SECTION("missing file") {
        const auto r = run_cli({"compute", "--in", "/nonexistent.csv", "--kind", "multi"});
        CHECK(r.code == 2);
    }
}

TEST_CASE("test subcommand") {
    const auto path = temp_file("mv_cli_test.csv", three_col_csv);

    SECTION("alpha above 0.215 exits with usage error") {
        const auto r = run_cli({"test", "--in", path.string(), "--kind", "total", "--method",
                                "conservative", "--alpha", "0.3"});
        CHECK(r.code == 1);
        CHECK(r.err.find("0.215") != std::string::npos);
    }
    SECTION("conservative outcome JSON") {
        const auto r = run_cli({"test", "--in", path.string(), "--kind", "multi", "--method",
                                "conservative", "--alpha", "0.05"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["method"] == "conservative");
        CHECK(j.contains("rejection_level"));
        CHECK(j.contains("p_value"));
        CHECK(j.contains("reject"));
    }
    SECTION("seeded resampling output is byte-identical across runs") {
        const std::vector<std::string> args{"test",     "--in",   path.string(), "--kind",
                                            "multi",    "--method", "resampling", "--alpha",
                                            "0.05",     "--L",     "50",          "--seed", "7"};
        const auto r1 = run_cli(args);
        const auto r2 = run_cli(args);
        REQUIRE(r1.code == 0);
        CHECK(r1.out == r2.out);
        const auto j = nlohmann::json::parse(r1.out);
        CHECK(j["L"] == 50);
        CHECK(j["seed"] == 7);
    }
    SECTION("combined test over m2/m3") {
        const auto r = run_cli({"test", "--in", path.string(), "--kind", "comb", "--method",
                                "conservative", "--alpha", "0.05"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        REQUIRE(j["components"].size() == 2);
        CHECK(j.contains("adjusted_p"));
        CHECK(j["reject"].is_boolean());
    }
    SECTION("consistent method") {
        const auto r = run_cli({"test", "--in", path.string(), "--kind", "multi", "--method",
                                "consistent", "--beta", "0.5", "--C", "2"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["beta"] == 0.5);
        CHECK_FALSE(j.contains("p_value"));
    }
}

TEST_CASE("structure subcommand") {
    const auto path = temp_file("mv_cli_struct.csv", three_col_csv);
    const auto out_json = fs::temp_directory_path() / "mv_cli_graph.json";
    const auto out_dot = fs::temp_directory_path() / "mv_cli_graph.dot";

    SECTION("json output parses and carries metadata") {
        const auto r = run_cli({"structure", "--in", path.string(), "--mode", "full",
                                "--decision", "conservative", "--alpha", "0.05", "--out",
                                out_json.string(), "--seed", "3"});
        REQUIRE(r.code == 0);
        std::ifstream file(out_json);
        std::stringstream buffer;
        buffer << file.rdbuf();
        const auto graph = mv::graph_from_json(buffer.str());
        CHECK(graph.nodes.size() >= 3);
        CHECK(graph.metadata.seed == 3);
        CHECK(graph.metadata.psi.size() == 3);
    }
    SECTION("dot output") {
        const auto r = run_cli({"structure", "--in", path.string(), "--mode", "clustered",
                                "--decision", "conservative", "--out", out_dot.string()});
        REQUIRE(r.code == 0);
        std::ifstream file(out_dot);
        std::stringstream buffer;
        buffer << file.rdbuf();
        CHECK(buffer.str().find("graph dependence_structure") == 0);
    }
    SECTION("unknown extension is a usage error") {
        const auto r = run_cli({"structure", "--in", path.string(), "--out", "graph.xml"});
        CHECK(r.code == 1);
    }
}

TEST_CASE("simulate and power subcommands") {
    SECTION("simulate writes a coins CSV") {
        const auto out = fs::temp_directory_path() / "mv_cli_sim.csv";
        const auto r = run_cli({"simulate", "--scenario", "coins:2", "--N", "50", "--out",
                                out.string(), "--seed", "5"});
        REQUIRE(r.code == 0);
        std::ifstream file(out);
        std::string header;
        std::getline(file, header);
        CHECK(header == "Coin1,Coin2,Parity");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(file, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 50);
    }
    SECTION("simulate round trips through compute") {
        const auto out = fs::temp_directory_path() / "mv_cli_sim2.csv";
        REQUIRE(run_cli({"simulate", "--scenario", "coins:2", "--N", "80", "--out", out.string(),
                         "--seed", "5"})
                    .code == 0);
        const auto r = run_cli({"compute", "--in", out.string(), "--kind", "multi"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["statistic"].get<double>() > 10.0);  // parity triple is strongly dependent
    }
    SECTION("power table CSV on stdout") {
        const auto r = run_cli({"power", "--scenario", "coins:2", "--kind", "multi,m2",
                                "--method", "conservative", "--alpha", "0.05", "--runs", "20",
                                "--Ns", "50", "--seed", "1"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("N,kind,method,alpha,runs,rate,half_width") == 0);
        CHECK(r.out.find("50,multi,conservative") != std::string::npos);
        CHECK(r.out.find("50,m2,conservative") != std::string::npos);
    }
    SECTION("bad scenario is a usage error") {
        const auto r = run_cli({"simulate", "--scenario", "dice:7", "--out", "x.csv"});
        CHECK(r.code == 1);
    }
}

TEST_CASE("seed falls back to the MULTIVARIANCE_SEED environment variable") {
    const auto path = temp_file("mv_cli_envseed.csv", three_col_csv);
    setenv("MULTIVARIANCE_SEED", "42", 1);
    const auto r = run_cli({"compute", "--in", path.string(), "--kind", "multi"});
    unsetenv("MULTIVARIANCE_SEED");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["seed"] == 42);

    setenv("MULTIVARIANCE_SEED", "not-a-number", 1);
    const auto bad = run_cli({"compute", "--in", path.string(), "--kind", "multi"});
    unsetenv("MULTIVARIANCE_SEED");
    CHECK(bad.code == 1);
}

TEST_CASE("usage errors and help") {
    SECTION("unknown flag") {
        const auto r = run_cli({"compute", "--frobnicate"});
        CHECK(r.code == 1);
    }
    SECTION("no subcommand") {
        const auto r = run_cli({});
        CHECK(r.code == 1);
    }
    SECTION("help exits zero") {
        const auto r = run_cli({"--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("compute") != std::string::npos);
    }
}
