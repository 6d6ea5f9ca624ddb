#ifndef BRIDGEGP_BASIS_HPP
#define BRIDGEGP_BASIS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bridgegp/errors.hpp"

namespace bridgegp {

enum class BasisDegree { Constant, Linear, Quadratic };

inline const char* to_string(BasisDegree deg) {
    switch (deg) {
        case BasisDegree::Constant: return "constant";
        case BasisDegree::Linear: return "linear";
        case BasisDegree::Quadratic: return "quadratic";
    }
    return "?";
}

inline BasisDegree basis_degree_from_string(const std::string& s) {
    if (s == "constant") return BasisDegree::Constant;
    if (s == "linear") return BasisDegree::Linear;
    if (s == "quadratic") return BasisDegree::Quadratic;
    throw ArgumentError("unknown basis degree '" + s + "' (constant|linear|quadratic)");
}

/// Polynomial mean basis. Term order is fixed: intercept, x1..xd, then the
/// degree-2 terms rowwise x1^2, x1*x2, ..., x1*xd, x2^2, ..., xd^2.
struct BasisSpec {
    BasisDegree degree = BasisDegree::Linear;
    Eigen::Index d = 1;

    Eigen::Index p() const {
        switch (degree) {
            case BasisDegree::Constant: return 1;
            case BasisDegree::Linear: return 1 + d;
            case BasisDegree::Quadratic: return 1 + d + d * (d + 1) / 2;
        }
        return 0;
    }

    /// Polynomial order of each term (0 intercept, 1 linear, 2 quadratic);
    /// drives the hierarchical shrinkage ladder.
    std::vector<int> term_orders() const {
        std::vector<int> orders{0};
        if (degree == BasisDegree::Constant) return orders;
        for (Eigen::Index k = 0; k < d; ++k) orders.push_back(1);
        if (degree == BasisDegree::Quadratic)
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = i; j < d; ++j) orders.push_back(2);
        return orders;
    }

    std::vector<std::string> term_names() const {
        std::vector<std::string> names{"1"};
        if (degree == BasisDegree::Constant) return names;
        for (Eigen::Index k = 0; k < d; ++k) names.push_back("x" + std::to_string(k + 1));
        if (degree == BasisDegree::Quadratic)
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = i; j < d; ++j)
                    names.push_back(i == j ? "x" + std::to_string(i + 1) + "^2"
                                           : "x" + std::to_string(i + 1) + "*x" +
                                                 std::to_string(j + 1));
        return names;
    }
};

/// g(x) in the fixed term ordering of BasisSpec.
inline Eigen::VectorXd expand_basis(const Eigen::VectorXd& x, const BasisSpec& spec) {
    if (x.size() != spec.d)
        throw ArgumentError("expand_basis: x has length " + std::to_string(x.size()) +
                            ", expected " + std::to_string(spec.d));
    Eigen::VectorXd g(spec.p());
    g(0) = 1.0;
    if (spec.degree == BasisDegree::Constant) return g;
    g.segment(1, spec.d) = x;
    if (spec.degree == BasisDegree::Quadratic) {
        Eigen::Index idx = 1 + spec.d;
        for (Eigen::Index i = 0; i < spec.d; ++i)
            for (Eigen::Index j = i; j < spec.d; ++j) g(idx++) = x(i) * x(j);
    }
    return g;
}

/// Row-stacked basis matrix G with rows g(x_i)^T.
inline Eigen::MatrixXd basis_matrix(const Eigen::MatrixXd& X, const BasisSpec& spec) {
    Eigen::MatrixXd G(X.rows(), spec.p());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        G.row(i) = expand_basis(X.row(i).transpose(), spec).transpose();
    return G;
}

} // namespace bridgegp

#endif
