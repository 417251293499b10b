#pragma once
// Shared numeric types, error hierarchy and symplectic basics.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace wwsc {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I_unit{0.0, 1.0};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct EstimatorError : Error {
    using Error::Error;
};
struct GridError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    double residual;
    ConvergenceError(const std::string& m, double r) : Error(m), residual(r) {}
};
// det(I+M) vanishes: the centre generating function is singular.
struct CausticError : Error {
    double det;
    CausticError(const std::string& m, double d) : Error(m), det(d) {}
};
// det(I-M) vanishes for a periodic orbit.
struct ResonanceError : Error {
    double det;
    ResonanceError(const std::string& m, double d) : Error(m), det(d) {}
};

inline void require_dim(long a, long b, const char* what) {
    if (a != b)
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
}

inline int dof_of(const Vec& x) {
    if (x.size() % 2 != 0 || x.size() == 0)
        throw DimensionError("phase-space vector must have even nonzero length");
    return static_cast<int>(x.size() / 2);
}

// Coordinates are (p_1..p_N, q_1..q_N); J(p,q) = (-q,p).
inline Mat symplectic_J(int N) {
    Mat J = Mat::Zero(2 * N, 2 * N);
    J.topRightCorner(N, N) = -Mat::Identity(N, N);
    J.bottomLeftCorner(N, N) = Mat::Identity(N, N);
    return J;
}

inline Vec apply_J(const Vec& x) {
    const int N = dof_of(x);
    Vec y(2 * N);
    y.head(N) = -x.tail(N);
    y.tail(N) = x.head(N);
    return y;
}

inline double symplecticity_defect(const Mat& M) {
    const int N = static_cast<int>(M.rows() / 2);
    const Mat J = symplectic_J(N);
    return (M.transpose() * J * M - J).cwiseAbs().maxCoeff();
}

inline Vec make_vec(std::initializer_list<double> v) {
    Vec x(static_cast<long>(v.size()));
    long i = 0;
    for (double a : v) x(i++) = a;
    return x;
}

}  // namespace wwsc
