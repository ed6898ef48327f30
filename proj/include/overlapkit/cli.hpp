#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "overlapkit/ensemble.hpp"
#include "overlapkit/table.hpp"

namespace overlapkit {

inline constexpr const char* kVersion = "0.3.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitAcceptance = 2,
    kExitNumerical = 3,
};

// Everything the subcommands read, mirrored from the flags.
struct RunConfig {
    std::string command;
    double q = 0.9, alpha = 0.4, beta = 0.8, t = 3.0;
    std::size_t M = 300;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    int grid = 0;  // 0: command default
    std::string mode = "mp";
    std::string targets;  // "x:y,x:y"
    std::string points;   // "mu:lambda,..."
    std::string out = "-";
    std::string format = "csv";
    int threads = 0;
    std::string eps_schedule;
    std::string a_file;
    std::string a_diag;  // "v,v,v" or "v*count,..."
    // density
    std::string which = "rho";
    bool with_edges = false;
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    // theory
    bool kernel = false;
    // simulate / compare
    std::string select = "fixed";
    int window = 0;
    double min_pass = 0.9;
    // burgers-check
    std::size_t steps = 2048;
    double tol = 0.05;
    double noise_scale = 1.0;
    std::string z;  // "re:im,..."

    void validate() const;
    Dims dims() const;
    ShapeRatios ratios() const { return {q, alpha, beta, t}; }
    MatrixSpec matrix_spec() const;
    std::vector<std::pair<std::string, std::string>> echo() const;
};

struct CommandResult {
    Table table;
    int code = kExitOk;
    std::string summary;  // printed to stderr when non-empty
};

CommandResult cmd_density(const RunConfig& cfg);
CommandResult cmd_theory(const RunConfig& cfg);
CommandResult cmd_simulate(const RunConfig& cfg);
CommandResult cmd_compare(const RunConfig& cfg);
CommandResult cmd_burgers_check(const RunConfig& cfg);

// Parses "1.5*3,2" into {1.5, 1.5, 1.5, 2}.
std::vector<double> parse_diag(const std::string& s);

// Full CLI: parsing, dispatch, output and exit-code mapping.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace overlapkit
