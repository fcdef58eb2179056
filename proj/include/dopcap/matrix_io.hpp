// SPDX-License-Identifier: Apache-2.0
//
// dopcap - capacity bounds for Doppler-impaired OFDM channels
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "dopcap/channel_core.hpp"
#include "dopcap/linalg.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace dopcap {

// Text matrix format: a first line "N M", then N*M lines "re im" in
// row-major order.

inline void write_matrix(std::ostream& os, const CMatrix& A) {
    os << A.rows() << ' ' << A.cols() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            os << A(i, j).real() << ' ' << A(i, j).imag() << '\n';
}

inline CMatrix read_matrix(std::istream& is) {
    long rows = -1;
    long cols = -1;
    if (!(is >> rows >> cols) || rows < 0 || cols < 0)
        throw ConfigError("matrix file: bad header, expected \"N M\"");
    CMatrix A(rows, cols);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
            double re = 0.0;
            double im = 0.0;
            if (!(is >> re >> im))
                throw ConfigError("matrix file: expected " + std::to_string(rows * cols) + " entries, got " +
                                  std::to_string(i * cols + j));
            A(i, j) = cplx{re, im};
        }
    }
    std::string extra;
    if (is >> extra)
        throw ConfigError("matrix file: trailing data after " + std::to_string(rows * cols) + " entries");
    return A;
}

inline void save_matrix(const std::string& path, const CMatrix& A) {
    std::ofstream os(path);
    if (!os)
        throw ConfigError("cannot open " + path + " for writing");
    write_matrix(os, A);
}

inline CMatrix load_matrix(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open " + path);
    return read_matrix(is);
}

/// Reads (F, G) from two matrix files; sigma2 is supplied separately.
inline StructuredChannel load_channel(const std::string& f_path, const std::string& g_path, double sigma2) {
    StructuredChannel ch{load_matrix(f_path), load_matrix(g_path), sigma2, false};
    ch.validate();
    return ch;
}

} // namespace dopcap
