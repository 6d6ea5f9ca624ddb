#ifndef BRIDGEGP_CSV_IO_HPP
#define BRIDGEGP_CSV_IO_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bridgegp/errors.hpp"

namespace bridgegp {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        // trim surrounding whitespace
        const auto b = tok.find_first_not_of(" \t\r");
        const auto e = tok.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline void check_header(const std::vector<std::string>& header, bool with_y,
                         const std::string& path) {
    if (header.empty()) throw ParseError(path + ": empty header", 1);
    std::set<std::string> seen;
    for (const auto& h : header) {
        if (!seen.insert(h).second)
            throw ParseError(path + ": duplicate header name '" + h + "'", 1);
    }
    const std::size_t d = header.size() - (with_y ? 1 : 0);
    if (d < 1) throw ParseError(path + ": no feature columns", 1);
    for (std::size_t k = 0; k < d; ++k) {
        const std::string want = "x" + std::to_string(k + 1);
        if (header[k] != want)
            throw ParseError(path + ": expected column '" + want + "', found '" + header[k] + "'",
                             1);
    }
    if (with_y && header.back() != "y")
        throw ParseError(path + ": expected final column 'y', found '" + header.back() + "'", 1);
}

inline Eigen::MatrixXd read_numeric_rows(std::ifstream& in, std::size_t cols,
                                         const std::string& path) {
    std::vector<double> data;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto toks = split_csv_line(line);
        if (toks.size() != cols)
            throw ParseError(path + ": expected " + std::to_string(cols) + " fields, found " +
                                 std::to_string(toks.size()),
                             lineno);
        for (const auto& t : toks) {
            try {
                std::size_t used = 0;
                const double v = std::stod(t, &used);
                if (used != t.size()) throw std::invalid_argument(t);
                data.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(path + ": bad number '" + t + "'", lineno);
            }
        }
    }
    const Eigen::Index n = static_cast<Eigen::Index>(data.size() / cols);
    if (n == 0) throw ParseError(path + ": no data rows");
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = data[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
    return m;
}

} // namespace detail

/// Read a training CSV with header x1,..,xd,y.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> read_xy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file", 1);
    const auto header = detail::split_csv_line(line);
    detail::check_header(header, /*with_y=*/true, path);
    const Eigen::MatrixXd all = detail::read_numeric_rows(in, header.size(), path);
    return {all.leftCols(all.cols() - 1), all.col(all.cols() - 1)};
}

/// Read a query CSV with header x1,..,xd.
inline Eigen::MatrixXd read_x_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file", 1);
    const auto header = detail::split_csv_line(line);
    detail::check_header(header, /*with_y=*/false, path);
    return detail::read_numeric_rows(in, header.size(), path);
}

inline void write_xy_csv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArgumentError("write_xy_csv: cannot open " + path);
    for (Eigen::Index k = 0; k < X.cols(); ++k) out << "x" << (k + 1) << ",";
    out << "y\n";
    char buf[40];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", X(i, j));
            out << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", y(i));
        out << buf << '\n';
    }
}

inline void write_predictions_csv(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                                  const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArgumentError("write_predictions_csv: cannot open " + path);
    out << "mean,variance\n";
    char buf[40];
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", mean(i));
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", variance(i));
        out << buf << '\n';
    }
}

} // namespace bridgegp

#endif
