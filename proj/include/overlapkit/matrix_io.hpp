#pragma once

#include <string>

#include <Eigen/Dense>

namespace overlapkit {

// Two accepted layouts, both row-major:
//   CSV: first line "M,N" (optionally preceded by a literal "M,N" header line), then M rows.
//   binary: two little-endian uint64 dims, then M*N little-endian float64.
// The binary layout is recognised by its exact size.
Eigen::MatrixXd read_matrix(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& A);
void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& A);

}  // namespace overlapkit
