#include "lpflow/field.hpp"

#include <cmath>
#include <limits>

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include "lpflow/errors.hpp"

namespace lpflow {

bool Box::contains(const Vector& x) const
{
    if (!bounded()) return true;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
}

VectorField VectorField::lorenz(double sigma, double rho, double beta)
{
    VectorField f;
    f.family_ = FieldFamily::Lorenz;
    f.dim_ = 3;
    f.params_ = {{"sigma", sigma}, {"rho", rho}, {"beta", beta}};
    f.singularities_.push_back(Vector::Zero(3));
    if (rho > 1.0) {
        const double c = std::sqrt(beta * (rho - 1.0));
        f.singularities_.push_back(Eigen::Vector3d(c, c, rho - 1.0));
        f.singularities_.push_back(Eigen::Vector3d(-c, -c, rho - 1.0));
    }
    f.validate();
    return f;
}

VectorField VectorField::rossler(double a, double b, double c)
{
    VectorField f;
    f.family_ = FieldFamily::Rossler;
    f.dim_ = 3;
    f.params_ = {{"a", a}, {"b", b}, {"c", c}};
    // x^2 - c x + a b = 0, y = -x/a, z = x/a
    const double disc = c * c - 4.0 * a * b;
    if (disc >= 0.0 && a != 0.0) {
        for (double s : {-1.0, 1.0}) {
            const double x = 0.5 * (c + s * std::sqrt(disc));
            f.singularities_.push_back(Eigen::Vector3d(x, -x / a, x / a));
        }
    }
    f.validate();
    return f;
}

VectorField VectorField::hopf_cylinder()
{
    VectorField f;
    f.family_ = FieldFamily::HopfCylinder;
    f.dim_ = 3;
    f.singularities_.push_back(Vector::Zero(3));
    f.validate();
    return f;
}

VectorField VectorField::planar_hopf()
{
    std::vector<PolynomialTerm> t = {
        {0, 1.0, {1, 0}},  {0, -1.0, {0, 1}}, {0, -1.0, {3, 0}}, {0, -1.0, {1, 2}},
        {1, 1.0, {1, 0}},  {1, 1.0, {0, 1}},  {1, -1.0, {2, 1}}, {1, -1.0, {0, 3}},
    };
    return polynomial(2, std::move(t), {Vector::Zero(2)});
}

VectorField VectorField::linear(const Matrix& a)
{
    if (a.rows() != a.cols() || a.rows() < 2) {
        throw ConfigError("linear field needs a square matrix of size >= 2");
    }
    VectorField f;
    f.family_ = FieldFamily::Linear;
    f.dim_ = static_cast<int>(a.rows());
    f.linear_ = a;
    f.singularities_.push_back(Vector::Zero(f.dim_));
    f.validate();
    return f;
}

VectorField VectorField::polynomial(int dimension, std::vector<PolynomialTerm> terms,
                                    std::vector<Vector> singularities)
{
    VectorField f;
    f.family_ = FieldFamily::Polynomial;
    f.dim_ = dimension;
    f.terms_ = std::move(terms);
    f.singularities_ = std::move(singularities);
    f.validate();
    return f;
}

std::string VectorField::family_name() const
{
    switch (family_) {
    case FieldFamily::Lorenz: return "lorenz";
    case FieldFamily::Rossler: return "rossler";
    case FieldFamily::HopfCylinder: return "hopf_cylinder";
    case FieldFamily::Linear: return "linear";
    case FieldFamily::Polynomial: return "polynomial";
    }
    return "unknown";
}

void VectorField::validate() const
{
    if (dim_ < 2) throw ConfigError("field dimension must be >= 2");
    for (const auto& t : terms_) {
        if (t.component < 0 || t.component >= dim_) {
            throw ConfigError("polynomial term component out of range");
        }
        if (static_cast<int>(t.powers.size()) != dim_) {
            throw ConfigError("polynomial term needs one power per coordinate");
        }
        for (int p : t.powers) {
            if (p < 0) throw ConfigError("polynomial powers must be non-negative");
        }
        if (!std::isfinite(t.coefficient)) throw ConfigError("non-finite polynomial coefficient");
    }
    for (const auto& [name, v] : params_) {
        if (!std::isfinite(v)) throw ConfigError("non-finite parameter " + name);
    }
    for (const auto& s : singularities_) {
        if (s.size() != dim_) throw ConfigError("singularity has wrong dimension");
        if (value(s).norm() >= 1e-12) {
            throw ConfigError("declared singularity is not a zero of the field");
        }
    }
}

namespace {

double ipow(double x, int p)
{
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

}  // namespace

void VectorField::value(const Vector& x, Eigen::Ref<Vector> out) const
{
    switch (family_) {
    case FieldFamily::Lorenz: {
        const double s = params_.at("sigma"), r = params_.at("rho"), b = params_.at("beta");
        out[0] = s * (x[1] - x[0]);
        out[1] = x[0] * (r - x[2]) - x[1];
        out[2] = x[0] * x[1] - b * x[2];
        break;
    }
    case FieldFamily::Rossler: {
        const double a = params_.at("a"), b = params_.at("b"), c = params_.at("c");
        out[0] = -x[1] - x[2];
        out[1] = x[0] + a * x[1];
        out[2] = b + x[2] * (x[0] - c);
        break;
    }
    case FieldFamily::HopfCylinder: {
        const double r2 = x[0] * x[0] + x[1] * x[1];
        out[0] = x[0] - x[1] - x[0] * r2;
        out[1] = x[0] + x[1] - x[1] * r2;
        out[2] = -x[2];
        break;
    }
    case FieldFamily::Linear:
        out.noalias() = linear_ * x;
        break;
    case FieldFamily::Polynomial:
        out.setZero();
        for (const auto& t : terms_) {
            double m = t.coefficient;
            for (int j = 0; j < dim_; ++j) m *= ipow(x[j], t.powers[j]);
            out[t.component] += m;
        }
        break;
    }
    if (orientation_ < 0.0) out = -out;
}

Vector VectorField::value(const Vector& x) const
{
    Vector out(dim_);
    value(x, out);
    return out;
}

void VectorField::jacobian(const Vector& x, Eigen::Ref<Matrix> out) const
{
    switch (family_) {
    case FieldFamily::Lorenz: {
        const double s = params_.at("sigma"), r = params_.at("rho"), b = params_.at("beta");
        out << -s, s, 0.0,
               r - x[2], -1.0, -x[0],
               x[1], x[0], -b;
        break;
    }
    case FieldFamily::Rossler: {
        const double a = params_.at("a"), c = params_.at("c");
        out << 0.0, -1.0, -1.0,
               1.0, a, 0.0,
               x[2], 0.0, x[0] - c;
        break;
    }
    case FieldFamily::HopfCylinder: {
        const double xx = x[0], yy = x[1];
        const double r2 = xx * xx + yy * yy;
        out << 1.0 - r2 - 2.0 * xx * xx, -1.0 - 2.0 * xx * yy, 0.0,
               1.0 - 2.0 * xx * yy, 1.0 - r2 - 2.0 * yy * yy, 0.0,
               0.0, 0.0, -1.0;
        break;
    }
    case FieldFamily::Linear:
        out = linear_;
        break;
    case FieldFamily::Polynomial:
        out.setZero();
        for (const auto& t : terms_) {
            for (int k = 0; k < dim_; ++k) {
                if (t.powers[k] == 0) continue;
                double m = t.coefficient * t.powers[k] * ipow(x[k], t.powers[k] - 1);
                for (int j = 0; j < dim_; ++j) {
                    if (j != k) m *= ipow(x[j], t.powers[j]);
                }
                out(t.component, k) += m;
            }
        }
        break;
    }
    if (orientation_ < 0.0) out = -out;
}

Matrix VectorField::jacobian(const Vector& x) const
{
    Matrix out(dim_, dim_);
    jacobian(x, out);
    return out;
}

double VectorField::singularity_distance(const Vector& x) const
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : singularities_) best = std::min(best, (x - s).norm());
    return best;
}

VectorField VectorField::reversed() const
{
    VectorField f = *this;
    f.orientation_ = -orientation_;
    return f;
}

VectorField time_reverse(const VectorField& field) { return field.reversed(); }

double field_bound(const VectorField& field, const Box& box, int samples)
{
    if (!box.bounded()) throw ConfigError("field_bound needs a bounded working box");
    const int d = field.dimension();
    boost::random::sobol gen(d);
    boost::random::uniform_01<double> unit;
    double k0 = 0.0;
    Vector x(d);
    Matrix jac(d, d);
    Vector v(d);
    for (int s = 0; s < samples; ++s) {
        for (int i = 0; i < d; ++i) {
            x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(gen);
        }
        field.value(x, v);
        field.jacobian(x, jac);
        const double op = jac.jacobiSvd().singularValues()[0];
        k0 = std::max({k0, v.norm(), op});
    }
    return k0;
}

}  // namespace lpflow
