#include "mf/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mf {

double Cdf::quantile(double u) const {
    if (u <= 0.0) return v_low();
    if (u >= 1.0) return v_high();
    double lo = v_low(), hi = v_high();
    // Plain bisection: CDFs here are cheap and monotone, and 90 halvings put
    // the bracket width below double resolution on any sane support.
    for (int it = 0; it < 90 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

class UniformCdf final : public Cdf {
public:
    UniformCdf(double lo, double hi) : lo_(lo), hi_(hi) {
        if (!(lo < hi)) throw std::invalid_argument("uniform cdf: empty support");
    }
    double cdf(double v) const override {
        return std::clamp((v - lo_) / (hi_ - lo_), 0.0, 1.0);
    }
    double pdf(double v) const override {
        return (v < lo_ || v > hi_) ? 0.0 : 1.0 / (hi_ - lo_);
    }
    double v_low() const override { return lo_; }
    double v_high() const override { return hi_; }
    std::optional<double> power_exponent() const override {
        if (lo_ == 0.0) return 1.0;
        return std::nullopt;
    }
    std::string describe() const override {
        std::ostringstream os;
        os << "uniform[" << lo_ << "," << hi_ << "]";
        return os.str();
    }

private:
    double lo_, hi_;
};

class PowerCdf final : public Cdf {
public:
    PowerCdf(double a, double hi) : a_(a), hi_(hi) {
        if (!(a > 0)) throw std::invalid_argument("power cdf: exponent must be positive");
        if (!(hi > 0)) throw std::invalid_argument("power cdf: v_high must be positive");
    }
    double cdf(double v) const override {
        if (v <= 0.0) return 0.0;
        if (v >= hi_) return 1.0;
        return std::pow(v / hi_, a_);
    }
    double pdf(double v) const override {
        if (v < 0.0 || v > hi_) return 0.0;
        return a_ * std::pow(v / hi_, a_ - 1.0) / hi_;
    }
    double v_low() const override { return 0.0; }
    double v_high() const override { return hi_; }
    std::optional<double> power_exponent() const override { return a_; }
    std::string describe() const override {
        std::ostringstream os;
        os << "power(a=" << a_ << ",v_high=" << hi_ << ")";
        return os.str();
    }

private:
    double a_, hi_;
};

// gamma(v) = v(1-v)(1/2-v) = v/2 - 3v^2/2 + v^3; gamma' in [-1/4, 1/2] so the
// +/- pair keeps positive density for eps < 2.
class PerturbedCubicCdf final : public Cdf {
public:
    PerturbedCubicCdf(double eps, int sign) : eps_(eps), sign_(sign) {
        if (sign != 1 && sign != -1)
            throw std::invalid_argument("perturbed cubic cdf: sign must be +-1");
        for (int i = 0; i <= 4096; ++i) {
            const double v = static_cast<double>(i) / 4096.0;
            if (pdf(v) < 0.0)
                throw std::domain_error("perturbed cubic cdf: density negative, eps too large");
        }
    }
    double cdf(double v) const override {
        if (v <= 0.0) return 0.0;
        if (v >= 1.0) return 1.0;
        return v + sign_ * eps_ * (0.5 * v - 1.5 * v * v + v * v * v);
    }
    double pdf(double v) const override {
        if (v < 0.0 || v > 1.0) return 0.0;
        return 1.0 + sign_ * eps_ * (0.5 - 3.0 * v + 3.0 * v * v);
    }
    double v_low() const override { return 0.0; }
    double v_high() const override { return 1.0; }
    std::string describe() const override {
        std::ostringstream os;
        os << "uniform" << (sign_ > 0 ? "+" : "-") << eps_ << "*v(1-v)(1/2-v)";
        return os.str();
    }

private:
    double eps_;
    int sign_;
};

class MeanCdf final : public Cdf {
public:
    explicit MeanCdf(std::vector<CdfPtr> parts) : parts_(std::move(parts)) {
        if (parts_.empty()) throw std::invalid_argument("mean cdf: no components");
        for (const auto& c : parts_)
            if (!c) throw std::invalid_argument("mean cdf: null component");
    }
    double cdf(double v) const override {
        double s = 0;
        for (const auto& c : parts_) s += c->cdf(v);
        return s / static_cast<double>(parts_.size());
    }
    double pdf(double v) const override {
        double s = 0;
        for (const auto& c : parts_) s += c->pdf(v);
        return s / static_cast<double>(parts_.size());
    }
    double v_low() const override { return parts_.front()->v_low(); }
    double v_high() const override { return parts_.front()->v_high(); }
    std::optional<double> power_exponent() const override {
        // A mixture of identical powers is that power; otherwise not a power.
        const auto first = parts_.front()->power_exponent();
        if (!first) return std::nullopt;
        for (const auto& c : parts_) {
            const auto e = c->power_exponent();
            if (!e || *e != *first) return std::nullopt;
        }
        return first;
    }
    std::string describe() const override {
        std::string s = "mean(";
        for (std::size_t i = 0; i < parts_.size(); ++i)
            s += (i ? "," : "") + parts_[i]->describe();
        return s + ")";
    }

private:
    std::vector<CdfPtr> parts_;
};

class TabulatedCdf final : public Cdf {
public:
    TabulatedCdf(std::vector<double> v, std::vector<double> F)
        : v_(std::move(v)), f_(std::move(F)) {
        if (v_.size() != f_.size() || v_.size() < 3)
            throw std::invalid_argument("tabulated cdf: need >= 3 matched samples");
        for (std::size_t i = 0; i + 1 < v_.size(); ++i) {
            if (!(v_[i] < v_[i + 1]))
                throw std::invalid_argument("tabulated cdf: abscissae must increase");
            if (f_[i + 1] < f_[i])
                throw std::invalid_argument("tabulated cdf: values must be nondecreasing");
        }
        if (std::abs(f_.front()) > 1e-9 || std::abs(f_.back() - 1.0) > 1e-9)
            throw std::invalid_argument("tabulated cdf: endpoints must be 0 and 1");
        build_slopes();
    }
    double cdf(double x) const override {
        if (x <= v_.front()) return 0.0;
        if (x >= v_.back()) return 1.0;
        const std::size_t i = interval(x);
        const double h = v_[i + 1] - v_[i];
        const double t = (x - v_[i]) / h;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        const double h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        return h00 * f_[i] + h10 * h * d_[i] + h01 * f_[i + 1] + h11 * h * d_[i + 1];
    }
    double pdf(double x) const override {
        if (x < v_.front() || x > v_.back()) return 0.0;
        if (x == v_.back()) return d_.back();
        const std::size_t i = interval(x);
        const double h = v_[i + 1] - v_[i];
        const double t = (x - v_[i]) / h;
        const double g00 = 6 * t * t - 6 * t;
        const double g10 = 3 * t * t - 4 * t + 1;
        const double g01 = -g00;
        const double g11 = 3 * t * t - 2 * t;
        return (g00 * f_[i] + g01 * f_[i + 1]) / h + g10 * d_[i] + g11 * d_[i + 1];
    }
    double v_low() const override { return v_.front(); }
    double v_high() const override { return v_.back(); }
    std::string describe() const override {
        std::ostringstream os;
        os << "tabulated(" << v_.size() << " knots)";
        return os.str();
    }

private:
    std::size_t interval(double x) const {
        const auto it = std::upper_bound(v_.begin(), v_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - v_.begin());
        return std::min(std::max<std::size_t>(i, 1) - 1, v_.size() - 2);
    }
    // Fritsch-Carlson monotone slopes: harmonic-mean interior slopes, clipped
    // one-sided endpoint slopes. Guarantees the interpolant never overshoots,
    // i.e. the pdf stays nonnegative.
    void build_slopes() {
        const std::size_t m = v_.size();
        std::vector<double> sec(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i)
            sec[i] = (f_[i + 1] - f_[i]) / (v_[i + 1] - v_[i]);
        d_.assign(m, 0.0);
        for (std::size_t i = 1; i + 1 < m; ++i) {
            if (sec[i - 1] <= 0.0 || sec[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                const double h0 = v_[i] - v_[i - 1], h1 = v_[i + 1] - v_[i];
                const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
                d_[i] = (w1 + w2) / (w1 / sec[i - 1] + w2 / sec[i]);
            }
        }
        const auto end_slope = [](double h0, double h1, double s0, double s1) {
            double d = ((2 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
            if (d * s0 <= 0) return 0.0;
            if (std::abs(d) > 3 * std::abs(s0)) return 3 * s0;
            return d;
        };
        d_.front() = end_slope(v_[1] - v_[0], v_[2] - v_[1], sec[0], sec[1]);
        d_.back() = end_slope(v_[m - 1] - v_[m - 2], v_[m - 2] - v_[m - 3], sec[m - 2],
                              sec[m - 3]);
    }

    std::vector<double> v_, f_, d_;
};

}  // namespace

CdfPtr make_uniform_cdf(double v_low, double v_high) {
    return std::make_shared<UniformCdf>(v_low, v_high);
}

CdfPtr make_power_cdf(double exponent, double v_high) {
    return std::make_shared<PowerCdf>(exponent, v_high);
}

CdfPtr make_perturbed_cubic_cdf(double eps, int sign) {
    return std::make_shared<PerturbedCubicCdf>(eps, sign);
}

CdfPtr make_mean_cdf(std::vector<CdfPtr> components) {
    return std::make_shared<MeanCdf>(std::move(components));
}

CdfPtr make_tabulated_cdf(std::vector<double> v, std::vector<double> F) {
    return std::make_shared<TabulatedCdf>(std::move(v), std::move(F));
}

ValuationModel ValuationModel::make(std::vector<CdfPtr> cdfs, std::vector<double> alpha) {
    if (cdfs.size() < 2) throw std::invalid_argument("ValuationModel: need n >= 2 bidders");
    for (const auto& c : cdfs)
        if (!c) throw std::invalid_argument("ValuationModel: null cdf");

    ValuationModel vm;
    vm.n = static_cast<int>(cdfs.size());
    vm.v_low = cdfs.front()->v_low();
    vm.v_high = cdfs.front()->v_high();
    if (!(vm.v_low < vm.v_high)) throw std::invalid_argument("ValuationModel: empty support");

    constexpr int kGrid = 2001;
    for (const auto& c : cdfs) {
        if (std::abs(c->v_low() - vm.v_low) > 1e-12 || std::abs(c->v_high() - vm.v_high) > 1e-12)
            throw std::invalid_argument("ValuationModel: bidders must share one support");
        if (std::abs(c->cdf(vm.v_low)) > 1e-9 || std::abs(c->cdf(vm.v_high) - 1.0) > 1e-9)
            throw std::invalid_argument("ValuationModel: cdf endpoints must be 0 and 1");
        double prev = -1e-12;
        for (int i = 0; i < kGrid; ++i) {
            const double v = vm.v_low + (vm.v_high - vm.v_low) * i / (kGrid - 1);
            const double F = c->cdf(v);
            if (F < prev - 1e-12)
                throw std::invalid_argument("ValuationModel: cdf decreasing at " + c->describe());
            if (c->pdf(v) < -1e-12)
                throw std::invalid_argument("ValuationModel: negative density at " + c->describe());
            prev = F;
        }
    }

    if (alpha.empty()) alpha.assign(cdfs.size(), 0.0);
    if (alpha.size() != cdfs.size())
        throw std::invalid_argument("ValuationModel: alpha size mismatch");
    for (double a : alpha)
        if (a < 0.0 || a > 1.0)
            throw std::invalid_argument("ValuationModel: spite coefficients live in [0,1]");

    vm.cdfs = std::move(cdfs);
    vm.alpha = std::move(alpha);
    vm.mean_cdf = make_mean_cdf(vm.cdfs);
    for (int i = 0; i < kGrid; ++i) {
        const double v = vm.v_low + (vm.v_high - vm.v_low) * i / (kGrid - 1);
        const double m = vm.mean_cdf->cdf(v);
        for (const auto& c : vm.cdfs)
            vm.epsilon = std::max(vm.epsilon, std::abs(c->cdf(v) - m));
    }
    return vm;
}

bool ValuationModel::symmetric() const {
    for (const auto& c : cdfs)
        if (c->describe() != cdfs.front()->describe()) return false;
    return true;
}

bool ValuationModel::all_power(std::vector<double>* exponents) const {
    if (v_low != 0.0) return false;
    std::vector<double> exps;
    for (const auto& c : cdfs) {
        const auto e = c->power_exponent();
        if (!e) return false;
        exps.push_back(*e);
    }
    if (exponents) *exponents = std::move(exps);
    return true;
}

}  // namespace mf
