#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "stomor/errors.hpp"
#include "stomor/experiment.hpp"

namespace stomor {

namespace {

constexpr std::size_t kBlockSize = 8;

// Running mean and sum of squared deviations, mergeable in a fixed order.
struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }

    double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
};

struct BlockResult {
    std::vector<Moments> per_time;
    std::vector<PathSummary> summaries;
    std::vector<std::vector<double>> probe_values;  // [probe][path in block]
};

SteadyStat steady(const std::vector<PathSummary>& paths, double PathSummary::*field) {
    Moments m;
    for (const auto& p : paths) {
        if (!p.diverged) m.add(p.*field);
    }
    SteadyStat s;
    s.mean = m.mean;
    s.se = m.n > 1.0 ? std::sqrt(m.variance() / m.n) : 0.0;
    return s;
}

}  // namespace

void ValidationConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
        throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
    }
    if (n_paths < 1) throw std::invalid_argument("need at least one path");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
        throw std::invalid_argument("tail fraction must lie in (0, 1]");
    }
    if (max_points < 2) throw std::invalid_argument("need at least two stored time points");
}

std::size_t worker_count(std::size_t requested) {
    std::size_t n = requested;
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STOMOR_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    }
    return n;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        // ties collapse onto the last occurrence so F is a proper step function
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        out.emplace_back(samples[i], static_cast<double>(i + 1) / n);
    }
    return out;
}

ValidationReport run_validation(const ModelFile& model, const ValidationConfig& config) {
    config.validate();
    model.sys.validate();
    model.gen.validate();
    model.model.validate();
    const LinearSde& sys = model.sys;
    const SignalGenerator& gen = model.gen;
    const ReducedModel& rom = model.model;
    const Index n = sys.order();
    const Index nu = gen.order();
    if (rom.order() != nu && rom.kind == RomKind::exact) {
        throw DimensionError("exact model order differs from the generator order");
    }

    const MeanMoment Pi = try_solve_mean_moment(sys, gen);
    Mat ref2_row;
    if (Pi.solvable && gen.J.isZero(0.0) && n <= 30) {
        try {
            const SecondMoment K = solve_second_moment(sys, gen, Pi);
            ref2_row = kron(sys.C, sys.C) * K.K;
        } catch (const SingularSystem&) {
        }
    }
    const Vec cpi = Pi.solvable ? Vec((sys.C * Pi.Pi).row(0).transpose()) : Vec::Zero(nu);

    SimulationOptions opts;
    opts.dt = config.dt;
    opts.horizon = config.horizon;
    opts.coupling = config.coupling;
    opts.input = config.square_wave ? InputMode::square_wave : InputMode::generator;
    opts.square_wave = config.wave;
    const std::size_t steps = opts.steps();
    opts.record_every = std::max<std::size_t>(1, (steps + config.max_points - 2) / (config.max_points - 1));
    const std::size_t n_rec = steps / opts.record_every + 1;

    ValidationReport report;
    report.times.resize(n_rec);
    for (std::size_t k = 0; k < n_rec; ++k) {
        report.times[k] = static_cast<double>(k * opts.record_every) * config.dt;
    }
    const double t_end = static_cast<double>(steps) * config.dt;
    auto first_at = [&](double t) {
        return static_cast<std::size_t>(
            std::lower_bound(report.times.begin(), report.times.end(), t - 1e-12) - report.times.begin());
    };
    const std::size_t burn_idx = std::min(first_at(config.burn_in_fraction * t_end), n_rec - 1);
    const std::size_t tail_idx = std::min(first_at((1.0 - config.tail_fraction) * t_end), n_rec - 1);

    std::vector<std::size_t> probe_idx;
    for (double p : config.probe_times) {
        if (p < 0.0 || p > t_end + 1e-12) continue;
        const double pos = p / (static_cast<double>(opts.record_every) * config.dt);
        const auto k = std::min(n_rec - 1, static_cast<std::size_t>(std::llround(pos)));
        probe_idx.push_back(k);
        report.probe_times.push_back(report.times[k]);
    }

    CoSimulationSetup base;
    base.sys = &sys;
    base.gen = &gen;
    base.rom = &rom;
    if (rom.kind == RomKind::exact || config.track_moment) {
        base.X0 = Pi.solvable ? Pi.Pi : Mat::Zero(n, nu);
    }

    const std::size_t n_blocks = (config.n_paths + kBlockSize - 1) / kBlockSize;
    std::vector<BlockResult> blocks(n_blocks);

    auto run_block = [&](std::size_t b) {
        BlockResult& out = blocks[b];
        out.per_time.assign(n_rec, Moments{});
        out.probe_values.assign(probe_idx.size(), {});
        std::vector<double> abs_err(n_rec);
        const std::size_t first = b * kBlockSize;
        const std::size_t last = std::min(config.n_paths, first + kBlockSize);
        for (std::size_t p = first; p < last; ++p) {
            CoSimulationSetup setup = base;
            setup.omega0 = gen.omega0;
            if (config.randomize_omega0) {
                std::mt19937_64 rng(derive_seed(config.seed, p, 2));
                std::uniform_real_distribution<double> dist(-1.0, 1.0);
                for (Index i = 0; i < nu; ++i) setup.omega0[i] = dist(rng);
            }
            PathSummary s;
            s.index = p;
            Moments tail_err, tail_y2, y, yr, y2, yr2, err, ref, ref2;
            try {
                simulate_path(setup, opts, config.seed, p, [&](const PathSample& smp) {
                    const std::size_t k = smp.step / opts.record_every;
                    const double e = std::abs(smp.y - smp.y_rom);
                    abs_err[k] = e;
                    if (k >= tail_idx) {
                        tail_err.add(e);
                        tail_y2.add(smp.y * smp.y);
                    }
                    if (k >= burn_idx) {
                        y.add(smp.y);
                        yr.add(smp.y_rom);
                        y2.add(smp.y * smp.y);
                        yr2.add(smp.y_rom * smp.y_rom);
                        err.add(e);
                        const Vec& w = *smp.omega;
                        ref.add(cpi.dot(w));
                        if (ref2_row.size() > 0) {
                            double r = 0.0;
                            for (Index i = 0; i < nu; ++i) {
                                for (Index j = 0; j < nu; ++j) r += ref2_row(0, i * nu + j) * w[i] * w[j];
                            }
                            ref2.add(r);
                        }
                    }
                });
            } catch (const DivergenceError&) {
                s.diverged = true;
            }
            if (!s.diverged) {
                s.tail_mean_abs_err = tail_err.mean;
                s.tail_rms_y = std::sqrt(tail_y2.mean);
                s.mean_y = y.mean;
                s.mean_y_rom = yr.mean;
                s.mean_y2 = y2.mean;
                s.mean_y_rom2 = yr2.mean;
                s.mean_abs_err = err.mean;
                s.mean_ref = ref.mean;
                s.mean_ref2 = ref2.mean;
                for (std::size_t k = 0; k < n_rec; ++k) out.per_time[k].add(abs_err[k]);
                for (std::size_t q = 0; q < probe_idx.size(); ++q) {
                    out.probe_values[q].push_back(abs_err[probe_idx[q]]);
                }
            }
            out.summaries.push_back(s);
        }
    };

    const std::size_t workers = std::min(worker_count(config.threads), n_blocks);
    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    try {
                        run_block(b);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next.store(n_blocks);
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<Moments> per_time(n_rec);
    report.probe_errors.assign(probe_idx.size(), {});
    for (const auto& blk : blocks) {
        for (std::size_t k = 0; k < n_rec; ++k) per_time[k].merge(blk.per_time[k]);
        for (std::size_t q = 0; q < probe_idx.size(); ++q) {
            report.probe_errors[q].insert(report.probe_errors[q].end(), blk.probe_values[q].begin(),
                                          blk.probe_values[q].end());
        }
        report.paths.insert(report.paths.end(), blk.summaries.begin(), blk.summaries.end());
    }
    for (auto& v : report.probe_errors) std::sort(v.begin(), v.end());
    report.mean_abs_err.resize(n_rec);
    report.var_abs_err.resize(n_rec);
    for (std::size_t k = 0; k < n_rec; ++k) {
        report.mean_abs_err[k] = per_time[k].mean;
        report.var_abs_err[k] = per_time[k].variance();
    }
    report.diverged = static_cast<std::size_t>(
        std::count_if(report.paths.begin(), report.paths.end(), [](const PathSummary& p) { return p.diverged; }));
    if (report.diverged * 10 > config.n_paths) {
        throw DivergenceError(std::to_string(report.diverged) + " of " + std::to_string(config.n_paths) +
                                  " paths diverged",
                              0);
    }
    report.y = steady(report.paths, &PathSummary::mean_y);
    report.y_rom = steady(report.paths, &PathSummary::mean_y_rom);
    report.y2 = steady(report.paths, &PathSummary::mean_y2);
    report.y_rom2 = steady(report.paths, &PathSummary::mean_y_rom2);
    report.abs_err = steady(report.paths, &PathSummary::mean_abs_err);
    report.ref = steady(report.paths, &PathSummary::mean_ref);
    report.ref2 = steady(report.paths, &PathSummary::mean_ref2);
    report.has_ref2 = ref2_row.size() > 0;
    report.tail_mean_abs_err = steady(report.paths, &PathSummary::tail_mean_abs_err).mean;
    report.tail_rms_y = steady(report.paths, &PathSummary::tail_rms_y).mean;
    return report;
}

void emit_validation_csv(const ValidationReport& report, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    const std::filesystem::path base(dir);

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < report.times.size(); ++k) {
        rows.push_back({report.times[k], report.mean_abs_err[k], report.var_abs_err[k]});
    }
    write_csv((base / "errors.csv").string(), {"t", "mean_abs_err", "var_abs_err"}, rows);

    rows.clear();
    for (std::size_t q = 0; q < report.probe_times.size(); ++q) {
        for (const auto& [v, f] : empirical_cdf(report.probe_errors[q])) {
            rows.push_back({report.probe_times[q], v, f});
        }
    }
    write_csv((base / "cdf.csv").string(), {"probe_time", "abs_err", "cdf"}, rows);

    rows.clear();
    for (const auto& p : report.paths) {
        rows.push_back({static_cast<double>(p.index), p.diverged ? 1.0 : 0.0, p.tail_mean_abs_err,
                        p.tail_rms_y, p.mean_y, p.mean_y_rom, p.mean_y2, p.mean_y_rom2,
                        p.mean_abs_err, p.mean_ref, p.mean_ref2});
    }
    write_csv((base / "paths.csv").string(),
              {"path", "diverged", "tail_mean_abs_err", "tail_rms_y", "mean_y", "mean_y_rom",
               "mean_y2", "mean_y_rom2", "mean_abs_err", "mean_ref", "mean_ref2"},
              rows);

    const std::vector<std::string> names{"y", "y_rom", "y2", "y_rom2", "abs_err", "ref", "ref2"};
    const std::vector<SteadyStat> stats{report.y,       report.y_rom, report.y2, report.y_rom2,
                                        report.abs_err, report.ref,   report.ref2};
    std::vector<std::string> header;
    std::vector<double> row;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "ref2" && !report.has_ref2) continue;
        header.push_back(names[i] + "_mean");
        header.push_back(names[i] + "_se");
        row.push_back(stats[i].mean);
        row.push_back(stats[i].se);
    }
    write_csv((base / "moments.csv").string(), header, {row});
}

}  // namespace stomor
