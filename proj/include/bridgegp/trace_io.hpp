#ifndef BRIDGEGP_TRACE_IO_HPP
#define BRIDGEGP_TRACE_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bridgegp/errors.hpp"
#include "bridgegp/gibbs.hpp"

namespace bridgegp {

/// Retained-trace CSV: header row of column names, one row per retained
/// iteration, doubles printed with 17 significant digits (round-trip exact).
inline void write_trace_csv(const ChainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArgumentError("write_trace_csv: cannot open " + path);
    for (std::size_t c = 0; c < trace.columns.size(); ++c)
        out << (c ? "," : "") << trace.columns[c];
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < trace.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < trace.values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", trace.values(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

/// Binary sidecar: the retained-value matrix as raw little-endian 64-bit
/// floats in column-major order (all rows of column 1, then column 2, ...).
/// Dimensions come from the companion CSV.
inline void write_trace_bin(const ChainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ArgumentError("write_trace_bin: cannot open " + path);
    // ChainTrace::values is an Eigen column-major matrix; dump its storage
    out.write(reinterpret_cast<const char*>(trace.values.data()),
              static_cast<std::streamsize>(sizeof(double)) * trace.values.size());
}

inline Eigen::MatrixXd read_trace_bin(const std::string& path, Eigen::Index rows,
                                      Eigen::Index cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("read_trace_bin: cannot open " + path);
    Eigen::MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double)) * m.size());
    if (!in) throw ParseError("read_trace_bin: short read from " + path);
    return m;
}

/// Rebuild a ChainTrace (values + inferred layout) from its CSV. Diagnostics
/// are not stored in the CSV and come back defaulted.
inline ChainTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("read_trace_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("read_trace_csv: empty file " + path, 1);

    ChainTrace trace;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) trace.columns.push_back(tok);
    }
    Eigen::Index p = 0, d = 0;
    bool sph = false;
    for (const auto& c : trace.columns) {
        if (c.rfind("beta_", 0) == 0) ++p;
        if (c.rfind("omega_", 0) == 0) ++d;
        if (c == "r_beta") sph = true;
    }
    trace.p = p;
    trace.d = d;
    trace.variant = sph ? Variant::Sph : Variant::Hmc;
    const Eigen::Index cols = static_cast<Eigen::Index>(trace.columns.size());
    if (cols != p + d + 6) throw ParseError("read_trace_csv: unexpected column set in " + path, 1);

    std::vector<double> data;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        Eigen::Index got = 0;
        while (std::getline(ss, tok, ',')) {
            try {
                data.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ParseError("read_trace_csv: bad number '" + tok + "'", lineno);
            }
            ++got;
        }
        if (got != cols) throw ParseError("read_trace_csv: wrong field count", lineno);
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(data.size()) / cols;
    trace.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            trace.values(i, j) = data[static_cast<std::size_t>(i * cols + j)];
    trace.iterations_run = static_cast<int>(rows);
    return trace;
}

} // namespace bridgegp

#endif
