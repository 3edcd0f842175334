#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned working box. An empty box (zero-size bounds) is unbounded.
struct Box {
    Vector lower;
    Vector upper;

    bool bounded() const { return lower.size() > 0; }
    bool contains(const Vector& x) const;
    Vector center() const { return 0.5 * (lower + upper); }
    Vector half_widths() const { return 0.5 * (upper - lower); }
};

enum class FieldFamily { Lorenz, Rossler, HopfCylinder, Linear, Polynomial };

/// c * prod_j x_j^powers[j], contributing to component `component`.
struct PolynomialTerm {
    int component = 0;
    double coefficient = 0.0;
    std::vector<int> powers;
};

/// An autonomous vector field X on R^d together with its analytic Jacobian
/// and its declared singularities. Immutable once built.
class VectorField {
public:
    static VectorField lorenz(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0);
    static VectorField rossler(double a = 0.2, double b = 0.2, double c = 5.7);
    /// x' = x - y - x(x^2+y^2), y' = x + y - y(x^2+y^2), z' = -z.
    /// Unit circle in z = 0 is an attracting cycle of period 2*pi.
    static VectorField hopf_cylinder();
    /// Planar version: r' = r(1 - r^2), angle' = 1.
    static VectorField planar_hopf();
    static VectorField linear(const Matrix& a);
    static VectorField polynomial(int dimension, std::vector<PolynomialTerm> terms,
                                  std::vector<Vector> singularities = {});

    int dimension() const { return dim_; }
    FieldFamily family() const { return family_; }
    std::string family_name() const;
    const std::map<std::string, double>& params() const { return params_; }
    const std::vector<PolynomialTerm>& terms() const { return terms_; }
    const Matrix& linear_matrix() const { return linear_; }
    const std::vector<Vector>& singularities() const { return singularities_; }
    /// +1 for X, -1 for the time-reversed field -X.
    double orientation() const { return orientation_; }

    Vector value(const Vector& x) const;
    void value(const Vector& x, Eigen::Ref<Vector> out) const;
    Matrix jacobian(const Vector& x) const;
    void jacobian(const Vector& x, Eigen::Ref<Matrix> out) const;

    /// Euclidean distance to the nearest declared singularity, +inf if none.
    double singularity_distance(const Vector& x) const;

    VectorField reversed() const;

private:
    VectorField() = default;
    void validate() const;

    FieldFamily family_ = FieldFamily::Polynomial;
    int dim_ = 0;
    std::map<std::string, double> params_;
    std::vector<PolynomialTerm> terms_;
    Matrix linear_;
    std::vector<Vector> singularities_;
    double orientation_ = 1.0;
};

/// Field of -X; singularities are preserved.
VectorField time_reverse(const VectorField& field);

/// K0 = max(|X|, ||DX||) estimated on a Sobol sample of the box.
double field_bound(const VectorField& field, const Box& box, int samples = 10000);

}  // namespace lpflow
