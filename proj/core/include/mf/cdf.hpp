#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

// Valuation-distribution families for the auction modules. All families expose
// cdf/pdf pairs; quantile defaults to bisection so tabulated families need no
// extra code.

namespace mf {

class Cdf {
public:
    virtual ~Cdf() = default;
    virtual double cdf(double v) const = 0;
    virtual double pdf(double v) const = 0;
    virtual double v_low() const = 0;
    virtual double v_high() const = 0;
    virtual std::string describe() const = 0;

    // Exponent a if the family is exactly F(v) = v^a on [0, v_high]; the
    // shooting rescaling step is only valid for this scale-invariant case.
    virtual std::optional<double> power_exponent() const { return std::nullopt; }

    // Monotone inverse by bisection; exact enough for sampling (1e-14 width).
    double quantile(double u) const;
};

using CdfPtr = std::shared_ptr<const Cdf>;

CdfPtr make_uniform_cdf(double v_low = 0.0, double v_high = 1.0);
CdfPtr make_power_cdf(double exponent, double v_high = 1.0);  // F = (v/v_high)^a on [0, v_high]

// F(v) = v + sign*eps*(v/2 - 3v^2/2 + v^3) on [0,1]: the antisymmetric cubic
// perturbation pair around the uniform mean. Throws if eps makes the density
// negative somewhere on a dense grid.
CdfPtr make_perturbed_cubic_cdf(double eps, int sign);

// Equally weighted mixture (1/n) sum F_j; this is the "mean CDF" of a model.
CdfPtr make_mean_cdf(std::vector<CdfPtr> components);

// Monotone piecewise-cubic (Fritsch-Carlson) interpolant through sample pairs
// (v_i, F_i); F must be nondecreasing with F(front)=0, F(back)=1.
CdfPtr make_tabulated_cdf(std::vector<double> v, std::vector<double> F);

struct ValuationModel {
    int n = 2;
    double v_low = 0.0;
    double v_high = 1.0;
    std::vector<CdfPtr> cdfs;    // size n
    std::vector<double> alpha;   // spite coefficients in [0,1], default zeros
    CdfPtr mean_cdf;
    double epsilon = 0.0;        // max_j sup_v |F_j(v) - mean(v)|, dense-grid estimate

    // Validates supports, boundary values (1e-9), monotonicity and densities
    // on a dense grid; computes the mean CDF and heterogeneity gap.
    static ValuationModel make(std::vector<CdfPtr> cdfs, std::vector<double> alpha = {});

    bool symmetric() const;                                   // all cdfs identical family+params
    bool all_power(std::vector<double>* exponents = nullptr) const;
};

}  // namespace mf
