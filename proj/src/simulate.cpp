#include "bpre/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace bpre {

namespace {

// per-row cumulative sums of a stochastic matrix, for inverse-CDF sampling
Matrix row_cdfs(const Matrix& kernel) {
    Matrix cdf(kernel.rows(), kernel.cols());
    for (std::size_t i = 0; i < kernel.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kernel.cols(); ++j) {
            acc += kernel(i, j);
            cdf(i, j) = acc;
        }
    }
    return cdf;
}

struct Acc {
    double sw = 0.0;   // sum of weights
    double sw2 = 0.0;  // sum of squared weights

    void add(double w) {
        sw += w;
        sw2 += w * w;
    }
    void merge(const Acc& o) {
        sw += o.sw;
        sw2 += o.sw2;
    }
};

// fixed-shape pairwise reduction over chunk results (bit-stable)
template <typename T>
T reduce_tree(std::vector<T>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return std::move(parts[lo]);
    const std::size_t mid = lo + (hi - lo) / 2;
    T left = reduce_tree(parts, lo, mid);
    const T right = reduce_tree(parts, mid, hi);
    left.merge(right);
    return left;
}

struct CellChunk {
    std::vector<Acc> cells;
    std::uint64_t count = 0;

    explicit CellChunk(std::size_t n = 0) : cells(n) {}
    void merge(const CellChunk& o) {
        for (std::size_t i = 0; i < cells.size(); ++i) cells[i].merge(o.cells[i]);
        count += o.count;
    }
};

// runs task(t) for t in [0, n_tasks) on `workers` threads; tasks may finish
// in any order, results must be written to per-task slots by the caller
void run_parallel(int n_tasks, int workers, const std::function<void(int)>& task) {
    workers = std::max(1, std::min(workers, n_tasks));
    if (workers == 1) {
        for (int t = 0; t < n_tasks; ++t) task(t);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int t = next.fetch_add(1);
                if (t >= n_tasks) return;
                try {
                    task(t);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::uint64_t chunk_size(std::uint64_t N, int chunks, int c) {
    const std::uint64_t base = N / chunks, extra = N % chunks;
    return base + (static_cast<std::uint64_t>(c) < extra ? 1 : 0);
}

SurvivalEstimate finalize(const Acc& acc, std::uint64_t N, EstimatorKind kind, double lambda,
                          double log_scale) {
    SurvivalEstimate e;
    e.n_samples = N;
    e.estimator = kind;
    e.lambda = lambda;
    e.log_scale = log_scale;
    e.scaled_mean = acc.sw / static_cast<double>(N);
    double var = 0.0;
    if (N > 1) {
        var = (acc.sw2 - acc.sw * acc.sw / static_cast<double>(N)) / static_cast<double>(N - 1);
        var = std::max(var, 0.0);
    }
    e.scaled_stderr = std::sqrt(var / static_cast<double>(N));
    const double scale = std::exp(log_scale);
    e.mean = scale * e.scaled_mean;
    e.stderr_ = scale * e.scaled_stderr;
    return e;
}

// common driver: for each start state, N samples split over chunks, one
// weight per sample binned by a terminal index in [0, d)
template <typename SampleFn>
EstimateTable estimate_by_start(const EnvironmentModel& model, int n, std::uint64_t N,
                                const McOptions& opts, EstimatorKind kind, double lambda,
                                double log_scale, const SampleFn& sample) {
    if (N < 2) throw std::invalid_argument("estimator: need N >= 2 samples");
    const std::size_t d = model.size();
    const int chunks = std::max(1, opts.chunks);
    EstimateTable table;
    table.n = n;
    table.d = d;
    table.estimator = kind;
    table.lambda = lambda;
    table.cells.resize(d * d);

    std::vector<CellChunk> parts(static_cast<std::size_t>(chunks) * d, CellChunk(d));
    run_parallel(static_cast<int>(d) * chunks, opts.workers, [&](int t) {
        const int start = t / chunks;
        const int c = t % chunks;
        RngStream rng(opts.seed, static_cast<std::uint64_t>(start) * chunks + c);
        CellChunk& out = parts[static_cast<std::size_t>(start) * chunks + c];
        const std::uint64_t m = chunk_size(N, chunks, c);
        std::vector<int> path(static_cast<std::size_t>(std::max(n, 1)));
        for (std::uint64_t s = 0; s < m; ++s) {
            const auto [j, w] = sample(start, path, rng);
            out.cells[j].add(w);
        }
        out.count = m;
    });
    for (std::size_t i = 0; i < d; ++i) {
        CellChunk total =
            reduce_tree(parts, i * chunks, i * chunks + static_cast<std::size_t>(chunks));
        for (std::size_t j = 0; j < d; ++j)
            table.cell(i, j) = finalize(total.cells[j], N, kind, lambda, log_scale);
    }
    return table;
}

}  // namespace

const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::population: return "pop";
        case EstimatorKind::env_marginal: return "env";
        case EstimatorKind::tilted: return "tilted";
        case EstimatorKind::dual: return "dual";
    }
    return "?";
}

EnvPath sample_environment(const Matrix& kernel, const Vec& rho, int start, int n,
                           RngStream& rng) {
    const Matrix cdf = row_cdfs(kernel);
    EnvPath p;
    p.start = start;
    p.steps.resize(n);
    p.partial_sums.resize(n + 1);
    p.partial_sums[0] = 0.0;
    int x = start;
    for (int k = 0; k < n; ++k) {
        x = rng.sample_cdf(cdf.row(x));
        p.steps[k] = x;
        p.partial_sums[k + 1] = p.partial_sums[k] + rho[x];
    }
    return p;
}

BranchResult sample_branching(const EnvironmentModel& model, int start, int n, RngStream& rng,
                              std::uint64_t cap) {
    if (cap < 1) throw std::invalid_argument("sample_branching: cap must be >= 1");
    const Matrix cdf = row_cdfs(model.P);
    int x = start;
    std::uint64_t z = 1;
    for (int k = 0; k < n; ++k) {
        x = rng.sample_cdf(cdf.row(x));
        if (z == 0) continue;  // extinct is absorbing; environment keeps moving
        std::uint64_t next = 0;
        const auto& law = model.laws[x];
        for (std::uint64_t ind = 0; ind < z; ++ind) {
            next += law.sample(rng);
            if (next > cap) break;
        }
        if (next > cap) {
            // the caller decides what a capped population means; finish the
            // environment so x_n is still meaningful
            for (int l = k + 1; l < n; ++l) x = rng.sample_cdf(cdf.row(x));
            return BranchResult{std::nullopt, x};
        }
        z = next;
    }
    return BranchResult{z, x};
}

EstimateTable estimate_population(const EnvironmentModel& model, int n, std::uint64_t N,
                                  const McOptions& opts) {
    require_valid(model);
    const Matrix cdf = row_cdfs(model.P);
    const std::uint64_t cap = opts.cap;
    auto sample = [&](int start, std::vector<int>&, RngStream& rng) -> std::pair<int, double> {
        int x = start;
        std::uint64_t z = 1;
        bool capped = false;
        for (int k = 0; k < n; ++k) {
            x = rng.sample_cdf(cdf.row(x));
            if (z == 0 || capped) continue;
            std::uint64_t next = 0;
            const auto& law = model.laws[x];
            for (std::uint64_t ind = 0; ind < z; ++ind) {
                next += law.sample(rng);
                if (next > cap) break;
            }
            if (next > cap)
                capped = true;  // counted as survived (upper bias ~ P(reach cap then die))
            else
                z = next;
        }
        return {x, (z > 0 || capped) ? 1.0 : 0.0};
    };
    return estimate_by_start(model, n, N, opts, EstimatorKind::population, 0.0, 0.0, sample);
}

EstimateTable estimate_qn_mc(const EnvironmentModel& model, int n, std::uint64_t N,
                             const McOptions& opts) {
    require_valid(model);
    const Matrix cdf = row_cdfs(model.P);
    auto sample = [&](int start, std::vector<int>& path, RngStream& rng) -> std::pair<int, double> {
        int x = start;
        for (int k = 0; k < n; ++k) {
            x = rng.sample_cdf(cdf.row(x));
            path[k] = x;
        }
        double delta = 1.0;
        for (int k = n - 1; k >= 0; --k) delta = model.laws[path[k]].survival_map(delta);
        return {x, delta};
    };
    return estimate_by_start(model, n, N, opts, EstimatorKind::env_marginal, 0.0, 0.0, sample);
}

EstimateTable estimate_qn_tilted(const EnvironmentModel& model, double lambda, int n,
                                 std::uint64_t N, const McOptions& opts) {
    require_valid(model);
    const TiltedChain tc = tilted_chain(model, lambda);
    const Matrix cdf = row_cdfs(tc.kernel);
    const double log_scale = static_cast<double>(n) * std::log(tc.k);
    auto sample = [&](int start, std::vector<int>& path, RngStream& rng) -> std::pair<int, double> {
        int x = start;
        double S = 0.0;
        for (int k = 0; k < n; ++k) {
            x = rng.sample_cdf(cdf.row(x));
            path[k] = x;
            S += model.rho[x];
        }
        double delta = 1.0;
        for (int k = n - 1; k >= 0; --k) delta = model.laws[path[k]].survival_map(delta);
        const double w = delta * std::exp(-lambda * S) * tc.v[start] / tc.v[x];
        return {x, w};
    };
    return estimate_by_start(model, n, N, opts, EstimatorKind::tilted, lambda, log_scale, sample);
}

std::vector<SurvivalEstimate> estimate_dual(const EnvironmentModel& model, int j, int n,
                                            std::uint64_t N, const McOptions& opts) {
    require_valid(model);
    if (N < 2) throw std::invalid_argument("estimate_dual: need N >= 2 samples");
    const std::size_t d = model.size();
    if (j < 0 || static_cast<std::size_t>(j) >= d)
        throw std::out_of_range("estimate_dual: terminal state out of range");
    const TiltedChain tc = tilted_chain(model, 1.0);
    const Matrix cdf = row_cdfs(tc.dual);
    const double log_scale = static_cast<double>(n + 1) * std::log(tc.k);
    const int chunks = std::max(1, opts.chunks);

    std::vector<CellChunk> parts(chunks, CellChunk(d));
    run_parallel(chunks, opts.workers, [&](int c) {
        RngStream rng(opts.seed, static_cast<std::uint64_t>(j) * chunks + c);
        CellChunk& out = parts[c];
        const std::uint64_t m = chunk_size(N, chunks, c);
        for (std::uint64_t s = 0; s < m; ++s) {
            // dual path X*_1..X*_n feeding the recursion, then X*_{n+1} bins i
            int x = j;
            double delta_c = model.laws[j].survival_map(1.0);  // 1 - f_j(0)
            double inv = 1.0 / delta_c;
            double S_star = 0.0;
            for (int k = 0; k < n; ++k) {
                x = rng.sample_cdf(cdf.row(x));
                const auto& law = model.laws[x];
                S_star -= model.rho[x];
                inv += std::exp(-S_star) * g_from_delta(law, delta_c);
                delta_c = law.survival_map(delta_c);
            }
            const int terminal = rng.sample_cdf(cdf.row(x));
            out.cells[terminal].add(1.0 / inv);
        }
        out.count = m;
    });
    CellChunk total = reduce_tree(parts, 0, parts.size());

    std::vector<SurvivalEstimate> col(d);
    for (std::size_t i = 0; i < d; ++i) {
        // prefactor: stat(j) v(i) e^{-rho(j)} / (stat(i) v(j)), k^{n+1} in log_scale
        const double pre =
            tc.stat[j] * tc.v[i] * std::exp(-model.rho[j]) / (tc.stat[i] * tc.v[j]);
        Acc scaled;
        scaled.sw = total.cells[i].sw * pre;
        scaled.sw2 = total.cells[i].sw2 * pre * pre;
        col[i] = finalize(scaled, N, EstimatorKind::dual, 1.0, log_scale);
    }
    return col;
}

ExitStats exit_statistics(const Matrix& kernel, const Vec& rho, int start, double y, int n,
                          std::uint64_t N, const McOptions& opts) {
    const Vec pi = stationary(kernel);
    const double drift = dot(pi, rho);
    if (std::abs(drift) > 1e-6)
        throw std::invalid_argument("exit_statistics: walk is not centred (stationary mean " +
                                    std::to_string(drift) + ")");
    const Matrix cdf = row_cdfs(kernel);
    const int chunks = std::max(1, opts.chunks);

    struct ExitChunk {
        Acc surv;  // indicator of tau_y > n
        Acc vsum;  // (y+S_n) 1{tau_y > n}
        std::uint64_t count = 0;
        void merge(const ExitChunk& o) {
            surv.merge(o.surv);
            vsum.merge(o.vsum);
            count += o.count;
        }
    };
    std::vector<ExitChunk> parts(chunks);
    run_parallel(chunks, opts.workers, [&](int c) {
        RngStream rng(opts.seed, c);
        ExitChunk& out = parts[c];
        const std::uint64_t m = chunk_size(N, chunks, c);
        for (std::uint64_t s = 0; s < m; ++s) {
            int x = start;
            double S = 0.0;
            bool alive = true;
            for (int k = 0; k < n; ++k) {
                x = rng.sample_cdf(cdf.row(x));
                S += rho[x];
                if (y + S <= 0.0) {
                    alive = false;
                    break;
                }
            }
            out.surv.add(alive ? 1.0 : 0.0);
            out.vsum.add(alive ? y + S : 0.0);
        }
        out.count = m;
    });
    ExitChunk total = reduce_tree(parts, 0, parts.size());

    auto moments = [N](const Acc& a) {
        const double mean = a.sw / static_cast<double>(N);
        double var = (a.sw2 - a.sw * a.sw / static_cast<double>(N)) / static_cast<double>(N - 1);
        return std::pair<double, double>(mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(N)));
    };
    ExitStats st;
    st.n_samples = N;
    std::tie(st.p_survive, st.p_stderr) = moments(total.surv);
    std::tie(st.v_hat, st.v_stderr) = moments(total.vsum);
    return st;
}

double rayleigh_ks(const Matrix& kernel, const Vec& rho, double sigma, int start, double y,
                   int n, std::uint64_t N_accept, const McOptions& opts) {
    const Vec pi = stationary(kernel);
    if (std::abs(dot(pi, rho)) > 1e-6)
        throw std::invalid_argument("rayleigh_ks: walk is not centred");
    if (!(sigma > 0.0)) throw std::invalid_argument("rayleigh_ks: sigma must be positive");
    const Matrix cdf = row_cdfs(kernel);
    const int chunks = std::max(1, opts.chunks);
    const double scale = 1.0 / (sigma * std::sqrt(static_cast<double>(n)));

    struct KsChunk {
        std::vector<double> samples;
        std::uint64_t attempts = 0;
        void merge(const KsChunk& o) {
            samples.insert(samples.end(), o.samples.begin(), o.samples.end());
            attempts += o.attempts;
        }
    };
    std::vector<KsChunk> parts(chunks);
    run_parallel(chunks, opts.workers, [&](int c) {
        RngStream rng(opts.seed, c);
        KsChunk& out = parts[c];
        const std::uint64_t quota = chunk_size(N_accept, chunks, c);
        while (out.samples.size() < quota) {
            ++out.attempts;
            int x = start;
            double S = 0.0;
            bool alive = true;
            for (int k = 0; k < n; ++k) {
                x = rng.sample_cdf(cdf.row(x));
                S += rho[x];
                if (y + S <= 0.0) {
                    alive = false;
                    break;
                }
            }
            if (alive) out.samples.push_back((y + S) * scale);
            if (out.attempts >= 1000000 && out.attempts > 10000 * (out.samples.size() + 1))
                throw std::runtime_error(
                    "rayleigh_ks: acceptance rate below 1e-4; reduce n or y");
        }
    });
    KsChunk total = reduce_tree(parts, 0, parts.size());

    std::sort(total.samples.begin(), total.samples.end());
    const double m = static_cast<double>(total.samples.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < total.samples.size(); ++i) {
        const double t = total.samples[i];
        const double F = -std::expm1(-0.5 * t * t);  // Rayleigh CDF 1 - e^{-t^2/2}
        ks = std::max(ks, std::abs(F - static_cast<double>(i) / m));
        ks = std::max(ks, std::abs(F - static_cast<double>(i + 1) / m));
    }
    return ks;
}

}  // namespace bpre
