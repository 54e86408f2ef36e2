#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>

namespace oracle {

std::vector<Ids> enumerate_slates(std::size_t p, std::size_t k) {
    std::vector<Ids> out;
    Ids current;
    std::vector<bool> used(p, false);
    std::function<void()> rec = [&] {
        if (current.size() == k) {
            out.push_back(current);
            return;
        }
        for (std::uint32_t a = 0; a < p; ++a) {
            if (used[a]) continue;
            used[a] = true;
            current.push_back(a);
            rec();
            current.pop_back();
            used[a] = false;
        }
    };
    rec();
    return out;
}

double pl_prob(const std::vector<double>& scores, const Ids& slate) {
    long double z = 0.0L;
    for (double s : scores) z += std::exp(static_cast<long double>(s));
    long double prob = 1.0L;
    for (std::uint32_t a : slate) {
        const long double e = std::exp(static_cast<long double>(scores[a]));
        prob *= e / z;
        z -= e;
    }
    return static_cast<double>(prob);
}

double geometric_reward(const Ids& slate, const std::set<std::uint32_t>& hidden) {
    double r = 0.0;
    double w = 1.0;
    for (std::uint32_t a : slate) {
        if (hidden.count(a)) r += w;
        w *= 0.5;
    }
    return r;
}

Ids top_k(const std::vector<double>& scores, std::size_t k) {
    Ids ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0u);
    std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
    ids.resize(k);
    return ids;
}

std::vector<double> linear_scores(const std::vector<double>& beta, std::size_t dim, const std::vector<double>& theta,
                                  const std::vector<double>& m) {
    std::vector<double> h(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) h[j] += m[i] * theta[i * dim + j];
    const std::size_t p = beta.size() / dim;
    std::vector<double> s(p, 0.0);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t j = 0; j < dim; ++j) s[a] += h[j] * beta[a * dim + j];
    return s;
}

double pl_objective(const std::vector<double>& scores, std::size_t k,
                    const std::function<double(const Ids&)>& reward) {
    double total = 0.0;
    for (const Ids& slate : enumerate_slates(scores.size(), k)) total += pl_prob(scores, slate) * reward(slate);
    return total;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = f(x);
        x[i] = keep - step;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double chi_square_pvalue(const std::vector<double>& counts, const std::vector<double>& probs) {
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    double stat = 0.0;
    double pooled_obs = 0.0;
    double pooled_exp = 0.0;
    std::size_t categories = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        if (e < 5.0) {
            pooled_obs += counts[i];
            pooled_exp += e;
            continue;
        }
        stat += (counts[i] - e) * (counts[i] - e) / e;
        ++categories;
    }
    if (pooled_exp > 0.0) {
        stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++categories;
    }
    if (categories < 2) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(categories - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = std::accumulate(a.begin(), a.end(), 0.0);
    const double nb = std::accumulate(b.begin(), b.end(), 0.0);
    double stat = 0.0;
    std::size_t categories = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double total = a[i] + b[i];
        if (total == 0.0) continue;
        const double ea = total * na / (na + nb);
        const double eb = total * nb / (na + nb);
        stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
        ++categories;
    }
    if (categories < 2) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(categories - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(scores[i] - mx);
    for (double& v : p) v /= z;
    return p;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Radial integrals along direction u for z ~ N(mu, sigma^2 I) in 2-D:
// density(phi) = int_0^inf r N(r u) dr and first moment int_0^inf r^2 N(r u) dr.
struct Radial {
    double i1;
    double i2;
};

Radial radial(double phi, std::array<double, 2> mu, double sigma) {
    const double ux = std::cos(phi);
    const double uy = std::sin(phi);
    const double a = ux * mu[0] + uy * mu[1];
    const double mu2 = mu[0] * mu[0] + mu[1] * mu[1];
    const double s2 = sigma * sigma;
    const double outer = std::exp(-(mu2 - a * a) / (2.0 * s2)) / (2.0 * kPi * s2);
    const double j0 = sigma * std::sqrt(kPi / 2.0) * std::erfc(-a / (sigma * std::sqrt(2.0)));
    const double g = std::exp(-a * a / (2.0 * s2));
    const double j1 = s2 * g;
    const double j2 = -s2 * a * g + s2 * j0;
    return {outer * (j1 + a * j0), outer * (j2 + 2.0 * a * j1 + a * a * j0)};
}

}  // namespace

Lgp2d lgp_2d(const std::vector<double>& beta, std::size_t k, std::array<double, 2> mu, double sigma,
             const std::function<double(const Ids&)>& reward) {
    const std::size_t p = beta.size() / 2;
    // Sector boundaries: directions orthogonal to beta_a - beta_b.
    std::vector<double> cuts{0.0, 2.0 * kPi};
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            const double dx = beta[2 * a] - beta[2 * b];
            const double dy = beta[2 * a + 1] - beta[2 * b + 1];
            if (dx == 0.0 && dy == 0.0) continue;
            for (double off : {kPi / 2.0, -kPi / 2.0}) {
                double phi = std::atan2(dy, dx) + off;
                while (phi < 0.0) phi += 2.0 * kPi;
                while (phi >= 2.0 * kPi) phi -= 2.0 * kPi;
                cuts.push_back(phi);
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    Lgp2d out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        if (hi - lo < 1e-15) continue;
        const double mid = 0.5 * (lo + hi);
        std::vector<double> s(p);
        for (std::size_t a = 0; a < p; ++a) s[a] = std::cos(mid) * beta[2 * a] + std::sin(mid) * beta[2 * a + 1];
        const Ids slate = top_k(s, k);
        using Gauss = boost::math::quadrature::gauss<double, 30>;
        const double mass = Gauss::integrate([&](double phi) { return radial(phi, mu, sigma).i1; }, lo, hi);
        const double mx = Gauss::integrate([&](double phi) { return std::cos(phi) * radial(phi, mu, sigma).i2; }, lo, hi);
        const double my = Gauss::integrate([&](double phi) { return std::sin(phi) * radial(phi, mu, sigma).i2; }, lo, hi);
        const double r = reward(slate);
        out.probs[slate] += mass;
        out.value += r * mass;
        // d/dmu E[r] = E[r (z - mu)] / sigma^2.
        out.grad_mu[0] += r * (mx - mu[0] * mass) / (sigma * sigma);
        out.grad_mu[1] += r * (my - mu[1] * mass) / (sigma * sigma);
    }
    return out;
}

Lgp1d lgp_1d(const std::vector<double>& beta, std::size_t k, double mu, double sigma,
             const std::function<double(const Ids&)>& reward) {
    const double r_pos = reward(top_k(beta, k));
    std::vector<double> neg(beta.size());
    for (std::size_t a = 0; a < beta.size(); ++a) neg[a] = -beta[a];
    const double r_neg = reward(top_k(neg, k));
    const double p_pos = 0.5 * std::erfc(-mu / (sigma * std::sqrt(2.0)));
    const double density = std::exp(-mu * mu / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * kPi));
    return {r_pos * p_pos + r_neg * (1.0 - p_pos), (r_pos - r_neg) * density};
}

std::vector<double> linear_theta_grad(const std::vector<double>& m, const std::vector<double>& grad_h) {
    const std::size_t dim = m.size();
    std::vector<double> g(dim * dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) g[i * dim + j] = m[i] * grad_h[j];
    return g;
}

}  // namespace oracle
