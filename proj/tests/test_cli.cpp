#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "overlapkit/cli.hpp"
#include "overlapkit/matrix_io.hpp"
#include "overlapkit/table.hpp"

using namespace overlapkit;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

Table parse(const Run& r) {
    std::istringstream in(r.out);
    return read_csv(in);
}

double num(const Table& t, std::size_t row, const std::string& col) {
    const Cell& c = t.rows.at(row).at(t.column(col));
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const long long* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    return std::nan("");
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(OVERLAPKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::filesystem::path tmpfile(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("overlapkit_test_" + name);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("density: hand values and edges") {
    const Run r = run({"density", "--q", "1", "--t", "1", "--grid", "3", "--with-edges"});
    REQUIRE(r.code == 0);
    const Table t = parse(r);
    REQUIRE(t.rows.size() == 5);
    CHECK(num(t, 0, "lambda") == doctest::Approx(0.0));
    CHECK(num(t, 4, "lambda") == doctest::Approx(4.0));
    CHECK(num(t, 0, "rho") == doctest::Approx(0.0));
    CHECK(num(t, 4, "rho") == doctest::Approx(0.0));
    CHECK(num(t, 2, "rho") == doctest::Approx(1.0 / (2.0 * 3.14159265358979323846)).epsilon(1e-12));
    CHECK(t.meta_value("command") == "density");
}

TEST_CASE("density: general mode matches mp mode for A = 0") {
    const std::vector<std::string> common{"density", "--grid", "7", "--lo", "1.0", "--hi", "10.0"};
    std::vector<std::string> a = common, b = common;
    b.insert(b.end(), {"--mode", "general"});
    const Table ta = parse(run(a)), tb = parse(run(b));
    REQUIRE(ta.rows.size() == tb.rows.size());
    for (std::size_t k = 0; k < ta.rows.size(); ++k) {
        CHECK(num(tb, k, "rho") == doctest::Approx(num(ta, k, "rho")).epsilon(1e-6));
        CHECK(num(tb, k, "hilbert") == doctest::Approx(num(ta, k, "hilbert")).epsilon(1e-6));
    }
}

TEST_CASE("theory: centred anchor and alpha = beta = 1") {
    const Run r = run({"theory", "--points", "3.8666666666666667:6.3333333333333333"});
    REQUIRE(r.code == 0);
    const Table t = parse(r);
    CHECK(num(t, 0, "vbar") == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(num(t, 0, "ubar") == doctest::Approx(2.5).epsilon(1e-10));

    const Table z = parse(run({"theory", "--alpha", "1", "--beta", "1", "--points", "2.0:5.0,4.0:3.0"}));
    for (std::size_t k = 0; k < z.rows.size(); ++k) {
        CHECK(std::abs(num(z, k, "vbar")) < 1e-12);
        CHECK(std::abs(num(z, k, "ubar")) < 1e-12);
        CHECK(std::abs(num(z, k, "wbar")) < 1e-12);
    }
}

TEST_CASE("theory: general mode matches mp mode") {
    // fixed eigenvalue pairs: the general grid comes from a numerical CDF and would shift
    const std::string pts = "2.0:3.0,3.0:5.0,4.5:8.0,1.2:10.5";
    const Table a = parse(run({"theory", "--points", pts, "--kernel"}));
    const Table b = parse(run({"theory", "--points", pts, "--kernel", "--mode", "general"}));
    REQUIRE(a.rows.size() == 4);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k)
        for (const char* c : {"vbar", "ubar", "wbar", "u1", "u2", "u3"}) {
            const double x = num(a, k, c), y = num(b, k, c);
            if (std::isnan(x) || std::isnan(y)) continue;  // edge rows are nulls in both
            CHECK(y == doctest::Approx(x).epsilon(1e-6));
        }
}

TEST_CASE("simulate: standard errors, reruns and threads") {
    const std::vector<std::string> base{"simulate", "--M", "40", "--trials", "2", "--targets", "0.5:0.5"};
    const Run a = run(base);
    REQUIRE(a.code == 0);
    const Table t = parse(a);
    CHECK(num(t, 0, "v_se") > 0.0);
    CHECK(run(base).out == a.out);

    std::vector<std::string> b1{"simulate", "--M", "60", "--trials", "6", "--threads", "1"};
    std::vector<std::string> b2{"simulate", "--M", "60", "--trials", "6", "--threads", "2"};
    CHECK(run(b1).out == run(b2).out);
}

TEST_CASE("compare: default shape passes the 3-stderr test") {
    const Run r = run({"compare", "--M", "200", "--trials", "100", "--targets",
                       "0.5:0.2,0.5:0.4,0.5:0.6,0.5:0.8"});
    CHECK(r.code == 0);
    const Table t = parse(r);
    REQUIRE(t.rows.size() == 4);
    int pass = 0;
    for (std::size_t k = 0; k < t.rows.size(); ++k) pass += num(t, k, "within_3se") == 1.0;
    CHECK(pass >= 3);
}

TEST_CASE("burgers-check at t = 0") {
    const Run r = run({"burgers-check", "--t", "0", "--M", "50", "--a-diag", "1*20,2*25"});
    CHECK(r.code == 0);
    const Table t = parse(r);
    CHECK(std::stod(t.meta_value("max_dev_sde")) < 1e-12);
}

TEST_CASE("csv and json round trips") {
    const Run c = run({"theory", "--grid", "3"});
    const Table tc = parse(c);
    std::ostringstream o;
    write_csv(tc, o);
    CHECK(o.str() == c.out);

    const Run j = run({"theory", "--grid", "3", "--format", "json"});
    std::istringstream jin(j.out);
    const Table tj = read_json(jin);
    REQUIRE(tj.rows.size() == tc.rows.size());
    CHECK(tj.columns == tc.columns);
    CHECK(tj.meta == tc.meta);
    for (std::size_t k = 0; k < tc.rows.size(); ++k) CHECK(num(tj, k, "vbar") == num(tc, k, "vbar"));
    std::ostringstream jo;
    write_json(tj, jo);
    CHECK(jo.str() == j.out);
}

TEST_CASE("matrix files in both layouts drive the same run") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(30, 27);
    for (int k = 0; k < 27; ++k) A(k, k) = 1.0 + 0.1 * k;
    const auto pc = tmpfile("a.csv"), pb = tmpfile("a.bin");
    write_matrix_csv(pc.string(), A);
    write_matrix_binary(pb.string(), A);
    CHECK((read_matrix(pc.string()) - A).norm() == 0.0);
    CHECK((read_matrix(pb.string()) - A).norm() == 0.0);
    const Run a = run({"density", "--M", "30", "--mode", "general", "--grid", "5", "--a-file", pc.string()});
    const Run b = run({"density", "--M", "30", "--mode", "general", "--grid", "5", "--a-file", pb.string()});
    CHECK(a.code == 0);
    CHECK(b.code == 0);
    CHECK(parse(a).rows == parse(b).rows);
    std::filesystem::remove(pc);
    std::filesystem::remove(pb);
}

TEST_CASE("exit codes from the real binary") {
    CHECK(run_binary("theory --grid 2") == 0);
    CHECK(run_binary("theory --q 1.5") == 1);
    CHECK(run_binary("theory --no-such-flag") == 1);
    CHECK(run_binary("burgers-check --M 60 --t 0.5 --steps 16 --tol 1e-9") == 2);
    CHECK(run_binary("simulate --t 0 --M 30 --trials 2") == 3);
    CHECK(run_binary("--version") == 0);
}

}  // TEST_SUITE
