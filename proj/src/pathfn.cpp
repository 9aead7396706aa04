#include "bpre/pathfn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bpre {

namespace {

constexpr double kFormulaDelta = 1e-6;  // defining formula above, expansion below
constexpr double kLimitDelta = 1e-9;    // plain limit below

void check_state(const EnvironmentModel& model, int s, const char* what) {
    if (s < 0 || static_cast<std::size_t>(s) >= model.size())
        throw std::out_of_range(std::string(what) + ": state index " + std::to_string(s) +
                                " out of range");
}

double eta_checked(const OffspringLaw& law, double delta) {
    const double g = g_from_delta(law, delta);
    const double m1 = law.mean();
    const double bound = law.second_factorial_moment() / (m1 * m1);
    if (g < -1e-12 || g > bound + 1e-12 * (1.0 + bound))
        throw std::logic_error("eta term " + std::to_string(g) + " escapes [0, " +
                               std::to_string(bound) + "]");
    return g;
}

}  // namespace

EnvPath make_path(const EnvironmentModel& model, int start, std::vector<int> steps) {
    check_state(model, start, "make_path");
    EnvPath p;
    p.start = start;
    p.partial_sums.resize(steps.size() + 1);
    p.partial_sums[0] = 0.0;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        check_state(model, steps[k], "make_path");
        p.partial_sums[k + 1] = p.partial_sums[k] + model.rho[steps[k]];
    }
    p.steps = std::move(steps);
    return p;
}

double g_from_delta(const OffspringLaw& law, double delta) {
    if (delta < 0.0 || delta > 1.0)
        throw std::domain_error("g: argument outside [0,1]");
    const double m1 = law.mean();
    const double m2 = law.second_factorial_moment();
    if (delta > kFormulaDelta)
        return 1.0 / law.survival_map(delta) - 1.0 / (m1 * delta);
    const double limit = m2 / (2.0 * m1 * m1);
    if (delta < kLimitDelta || m2 == 0.0) return limit;
    // first-order correction: g(1-d) = L (1 + (f''/(2f') - f'''/(3f'')) d) + O(d^2)
    const double m3 = law.third_factorial_moment();
    return limit * (1.0 + (m2 / (2.0 * m1) - m3 / (3.0 * m2)) * delta);
}

double g_eval(const OffspringLaw& law, double s) {
    if (s < 0.0 || s > 1.0) throw std::domain_error("g_eval: s outside [0,1]");
    return g_from_delta(law, 1.0 - s);
}

double q_direct(const EnvironmentModel& model, std::span<const int> path, double s) {
    if (s < 0.0 || s >= 1.0) throw std::domain_error("q: s must lie in [0,1)");
    double delta = 1.0 - s;
    for (std::size_t k = path.size(); k-- > 0;)
        delta = model.laws[path[k]].survival_map(delta);
    return delta;
}

QPair q_along_path(const EnvironmentModel& model, std::span<const int> path, double s) {
    const std::size_t n = path.size();
    if (n == 0) throw std::invalid_argument("q_along_path: path must have length >= 1");
    if (s < 0.0 || s >= 1.0) throw std::domain_error("q_along_path: s must lie in [0,1)");
    for (int st : path) check_state(model, st, "q_along_path");

    // delta[k] = 1 - f_{k,n}(s) for k = 1..n+1 (delta[n+1] = 1-s)
    Vec delta(n + 2);
    delta[n + 1] = 1.0 - s;
    for (std::size_t k = n; k >= 1; --k)
        delta[k] = model.laws[path[k - 1]].survival_map(delta[k + 1]);

    // inverse sum: e^{-S_n}/(1-s) + sum_{k=0}^{n-1} e^{-S_k} g_{X_{k+1}}(f_{k+2,n}(s))
    double S = 0.0;
    double inv = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        inv += std::exp(-S) * eta_checked(model.laws[path[k]], delta[k + 2]);
        S += model.rho[path[k]];
    }
    inv += std::exp(-S) / delta[n + 1];
    return QPair{delta[1], 1.0 / inv};
}

DualQ q_dual_along_path(const EnvironmentModel& model, std::span<const int> dual_path,
                        int boundary_state) {
    check_state(model, boundary_state, "q_dual_along_path");
    for (int st : dual_path) check_state(model, st, "q_dual_along_path");
    const std::size_t m = dual_path.size();

    // composition argument: delta_c(k) = 1 - f_{X*_k} o ... o f_{X*_1} o f_j(0)
    double delta_c = model.laws[boundary_state].survival_map(1.0);  // 1 - f_j(0)
    double inv = 1.0 / delta_c;
    double S_star = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const auto& law = model.laws[dual_path[k]];
        S_star -= model.rho[dual_path[k]];
        inv += std::exp(-S_star) * eta_checked(law, delta_c);
        delta_c = law.survival_map(delta_c);
    }
    return DualQ{1.0 / inv, std::exp(S_star) * delta_c};
}

std::optional<int> exit_time(const EnvPath& path, double y) {
    for (std::size_t k = 1; k < path.partial_sums.size(); ++k)
        if (y + path.partial_sums[k] <= 0.0) return static_cast<int>(k);
    return std::nullopt;
}

SurvivalTable enumerate_survival(const EnvironmentModel& model, int n) {
    require_valid(model);
    const std::size_t d = model.size();
    SurvivalTable table;
    table.n = n;
    table.kind = TableKind::exact_enum;
    table.values = Matrix(d, d);
    if (n == 0) {
        for (std::size_t i = 0; i < d; ++i) table.values(i, i) = 1.0;  // Z_0 = 1 at X_0 = i
        return table;
    }
    const double count = std::pow(static_cast<double>(d), n);
    if (count > 1e7)
        throw std::invalid_argument("enumerate_survival: d^n = " + std::to_string(count) +
                                    " exceeds 1e7; use dp_survival_bounds instead");

    // Depth-first from the tail of the path so pgf compositions are shared
    // across all paths with a common suffix. At position k the carried state
    // is (x_k, delta_k = 1 - f_{k,n}(0), prod_k = P(x_k,x_{k+1})...P(x_{n-1},x_n)).
    auto descend = [&](auto&& self, int k, int x_next, double delta_next, double prod_next,
                       int terminal) -> void {
        for (int x = 0; x < static_cast<int>(d); ++x) {
            const double prod = model.P(x, x_next) * prod_next;
            if (prod == 0.0) continue;
            const double delta = model.laws[x].survival_map(delta_next);
            if (k == 1) {
                for (std::size_t i = 0; i < d; ++i)
                    table.values(i, terminal) += model.P(i, x) * prod * delta;
            } else {
                self(self, k - 1, x, delta, prod, terminal);
            }
        }
    };
    for (int xn = 0; xn < static_cast<int>(d); ++xn) {
        const double delta_n = model.laws[xn].survival_map(1.0);
        if (n == 1) {
            for (std::size_t i = 0; i < d; ++i)
                table.values(i, xn) += model.P(i, xn) * delta_n;
        } else {
            descend(descend, n - 1, xn, delta_n, 1.0, xn);
        }
    }
    return table;
}

std::pair<SurvivalTable, SurvivalTable> dp_survival_bounds(const EnvironmentModel& model, int n,
                                                           int M) {
    require_valid(model);
    if (M < 1) throw std::invalid_argument("dp_survival_bounds: M must be >= 1");
    const std::size_t d = model.size();
    const std::size_t W = static_cast<std::size_t>(M) + 1;

    // conv[x][z*W + t] = P(sum of z iid offspring at state x equals t), t <= M;
    // tail[x][z] = P(sum > M). Built by repeated exact convolution with the
    // one-individual pmf; mass past M is absorbed once and stays absorbed.
    std::vector<std::vector<double>> conv(d), ctail(d);
    for (std::size_t x = 0; x < d; ++x) {
        double ptail = 0.0;
        const std::vector<double> p = model.laws[x].pmf_prefix(M, &ptail);
        // suffix_p[a] = P(one individual exceeds M - a) = ptail + sum_{b > M-a} p[b]
        std::vector<double> suffix_p(W, ptail);
        for (std::size_t a = 1; a < W; ++a) {
            suffix_p[a] = suffix_p[a - 1] + p[M - a + 1];
        }
        conv[x].assign(W * W, 0.0);
        ctail[x].assign(W, 0.0);
        conv[x][0] = 1.0;  // z = 0: empty sum
        for (std::size_t z = 1; z < W; ++z) {
            const double* prev = &conv[x][(z - 1) * W];
            double* cur = &conv[x][z * W];
            double esc = 0.0;
            for (std::size_t a = 0; a < W; ++a) {
                const double pa = prev[a];
                if (pa == 0.0) continue;
                for (std::size_t t = a; t < W; ++t) cur[t] += pa * p[t - a];
                esc += pa * suffix_p[a];
            }
            ctail[x][z] = ctail[x][z - 1] + esc;
        }
    }

    SurvivalTable lower{n, Matrix(d, d), TableKind::dp_lower};
    SurvivalTable upper{n, Matrix(d, d), TableKind::dp_upper};

    for (std::size_t start = 0; start < d; ++start) {
        if (n == 0) {
            lower.values(start, start) = 1.0;
            upper.values(start, start) = 1.0;
            continue;
        }
        // alive[x*W + z] = P(X_k = x, Z_k = z, never exceeded M); over[x] likewise beyond M
        std::vector<double> alive(d * W, 0.0), over(d, 0.0);
        alive[start * W + 1] = 1.0;  // Z_0 = 1
        std::vector<double> next_alive(d * W), next_over(d), pre(W);
        for (int k = 0; k < n; ++k) {
            std::fill(next_alive.begin(), next_alive.end(), 0.0);
            std::fill(next_over.begin(), next_over.end(), 0.0);
            for (std::size_t xp = 0; xp < d; ++xp) {
                // environment first: mass reaching x' with population z
                std::fill(pre.begin(), pre.end(), 0.0);
                double over_in = 0.0;
                for (std::size_t x = 0; x < d; ++x) {
                    const double t = model.P(x, xp);
                    if (t == 0.0) continue;
                    for (std::size_t z = 0; z < W; ++z) pre[z] += t * alive[x * W + z];
                    over_in += t * over[x];
                }
                // offspring at x': convolve populations
                double* out = &next_alive[xp * W];
                out[0] += pre[0];  // extinct stays extinct
                double esc = over_in;
                for (std::size_t z = 1; z < W; ++z) {
                    const double pz = pre[z];
                    if (pz == 0.0) continue;
                    const double* row = &conv[xp][z * W];
                    for (std::size_t t = 0; t < W; ++t) out[t] += pz * row[t];
                    esc += pz * ctail[xp][z];
                }
                next_over[xp] = esc;
            }
            alive.swap(next_alive);
            over.swap(next_over);
            double mass = 0.0;
            for (double v : alive) mass += v;
            for (double v : over) mass += v;
            if (std::abs(mass - 1.0) > 1e-12)
                throw std::runtime_error("dp_survival_bounds: mass drifted to " +
                                         std::to_string(mass) + " at step " + std::to_string(k));
        }
        for (std::size_t j = 0; j < d; ++j) {
            double surv = 0.0;
            for (std::size_t z = 1; z < W; ++z) surv += alive[j * W + z];
            lower.values(start, j) = surv;
            upper.values(start, j) = surv + over[j];
        }
    }
    return {lower, upper};
}

}  // namespace bpre
