#pragma once

// Test oracles computed independently of the library's implementations:
// exhaustive enumeration, finite differences, closed-form Gaussian integrals.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace oracle {

using Ids = std::vector<std::uint32_t>;

/// Every ordered list of k distinct ids from [0, p), lexicographic order.
std::vector<Ids> enumerate_slates(std::size_t p, std::size_t k);

/// Plackett-Luce probability by the direct product of sequential softmaxes
/// (long double, no shift).
double pl_prob(const std::vector<double>& scores, const Ids& slate);

/// sum_k 1[a_k in hidden] 2^-(k-1).
double geometric_reward(const Ids& slate, const std::set<std::uint32_t>& hidden);

/// Top-k by descending score, ties by smaller id.
Ids top_k(const std::vector<double>& scores, std::size_t k);

/// Scores f_a = (m theta)^T beta_a; beta column-major L x P, theta row-major L x L.
std::vector<double> linear_scores(const std::vector<double>& beta, std::size_t dim, const std::vector<double>& theta,
                                  const std::vector<double>& m);

/// Expected reward sum_slates pi(slate) r(slate) for the given scores.
double pl_objective(const std::vector<double>& scores, std::size_t k,
                    const std::function<double(const Ids&)>& reward);

/// Central differences of f at x.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double step = 1e-5);

/// Upper-tail p-value of Pearson's chi-square test; categories with expected
/// count below 5 are pooled into one.
double chi_square_pvalue(const std::vector<double>& counts, const std::vector<double>& probs);

/// Two-sample chi-square homogeneity test p-value over shared categories.
double two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// Exact softmax probabilities.
std::vector<double> softmax(const std::vector<double>& scores);

/// LGP smoothed policy for L = 2: z ~ N(mu, sigma^2 I) and the slate is the
/// top-k of z^T beta_a. Every ordering boundary passes through the origin, so
/// the slate depends only on the angle of z; probabilities and the gradient
/// d/dmu E[r] are integrated over angular sectors with Gauss-Legendre, using
/// the closed-form radial integrals.
struct Lgp2d {
    std::map<Ids, double> probs;
    double value = 0.0;
    std::array<double, 2> grad_mu{};
};
Lgp2d lgp_2d(const std::vector<double>& beta, std::size_t k, std::array<double, 2> mu, double sigma,
             const std::function<double(const Ids&)>& reward);

/// LGP for L = 1: value and d/dmu E[r] in closed form.
struct Lgp1d {
    double value = 0.0;
    double grad_mu = 0.0;
};
Lgp1d lgp_1d(const std::vector<double>& beta, std::size_t k, double mu, double sigma,
             const std::function<double(const Ids&)>& reward);

/// d/dtheta for a Linear map h = m theta given d/dh (row-major theta).
std::vector<double> linear_theta_grad(const std::vector<double>& m, const std::vector<double>& grad_h);

}  // namespace oracle
