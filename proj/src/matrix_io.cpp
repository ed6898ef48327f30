#include "overlapkit/matrix_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "overlapkit/errors.hpp"

namespace overlapkit {

static_assert(std::endian::native == std::endian::little, "binary matrix files assume a little-endian host");

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open matrix file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
    const std::string t = trim(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw ParameterError(path + ":" + std::to_string(line) + ": not a number: '" + t + "'");
    return v;
}

Eigen::MatrixXd read_csv(const std::string& text, const std::string& path) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++lineno;
            if (!trim(out).empty()) return true;
        }
        return false;
    };
    if (!next_line(line)) throw ParameterError(path + ": empty matrix file");
    if (trim(line) == "M,N" && !next_line(line)) throw ParameterError(path + ": missing dims line");
    const auto dims = split_csv(line);
    if (dims.size() != 2) throw ParameterError(path + ": first line must be 'M,N'");
    const double Md = parse_double(dims[0], path, lineno), Nd = parse_double(dims[1], path, lineno);
    if (Md < 1 || Nd < 1 || Md != std::floor(Md) || Nd != std::floor(Nd))
        throw ParameterError(path + ": bad dims");
    const auto M = static_cast<Eigen::Index>(Md), N = static_cast<Eigen::Index>(Nd);
    Eigen::MatrixXd A(M, N);
    for (Eigen::Index r = 0; r < M; ++r) {
        if (!next_line(line))
            throw ParameterError(path + ": expected " + std::to_string(M) + " rows, got " + std::to_string(r));
        const auto cells = split_csv(line);
        if (static_cast<Eigen::Index>(cells.size()) != N)
            throw ParameterError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(N) + " columns");
        for (Eigen::Index c = 0; c < N; ++c) A(r, c) = parse_double(cells[c], path, lineno);
    }
    if (next_line(line)) throw ParameterError(path + ": trailing rows after the matrix");
    return A;
}

}  // namespace

Eigen::MatrixXd read_matrix(const std::string& path) {
    const auto bytes = slurp(path);
    if (bytes.size() >= 16) {
        std::uint64_t M = 0, N = 0;
        std::memcpy(&M, bytes.data(), 8);
        std::memcpy(&N, bytes.data() + 8, 8);
        if (M > 0 && N > 0 && M < (1u << 28) && N < (1u << 28) && bytes.size() == 16 + 8 * M * N) {
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> A(M, N);
            std::memcpy(A.data(), bytes.data() + 16, 8 * M * N);
            return A;
        }
    }
    return read_csv(std::string(bytes.begin(), bytes.end()), path);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& A) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path);
    out << A.rows() << ',' << A.cols() << '\n' << std::setprecision(17);
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        for (Eigen::Index c = 0; c < A.cols(); ++c) out << (c ? "," : "") << A(r, c);
        out << '\n';
    }
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& A) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path);
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(A.rows()), static_cast<std::uint64_t>(A.cols())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A;
    out.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(8 * R.size()));
}

}  // namespace overlapkit
