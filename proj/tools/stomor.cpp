// Command-line front end: reduce, validate, check-assumptions, lyapunov and
// assemble-mechanical.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stomor/errors.hpp"
#include "stomor/experiment.hpp"
#include "stomor/io.hpp"

namespace {

using namespace stomor;

enum Exit : int {
    kOk = 0,
    kUsage = 1,
    kCertificate = 2,
    kSingular = 3,
    kDivergence = 4,
    kInput = 5,
};

void print_model_summary(const ReducedModel& m) {
    std::cout << "kind " << to_string(m.kind) << " order " << m.order() << '\n';
    for (const auto& c : m.certificates) {
        std::cout << "certificate " << c.name << ' ' << (c.pass ? "pass" : "fail") << ' '
                  << format_double(c.value) << '\n';
    }
    for (const auto& [k, v] : m.diagnostics) std::cout << "diagnostic " << k << ' ' << format_double(v) << '\n';
}

void print_spectrum(const char* label, const LyapunovSpectrum& s) {
    std::cout << label;
    for (double l : s.exponents) std::cout << ' ' << format_double(l);
    std::cout << (s.converged ? "" : "  (not converged)") << '\n';
}

struct ReduceArgs {
    std::string system;
    std::string generator;
    std::string method = "exact";
    std::string out;
    ReductionSettings settings;
    bool no_exponents = false;
};

int cmd_reduce(ReduceArgs& a) {
    const LinearSde sys = system_from_source(a.system);
    const SignalGenerator gen = generator_from_source(a.generator);
    a.settings.method = parse_rom_kind(a.method);
    a.settings.exact.estimate_exponents = !a.no_exponents;
    const ReductionResult r = run_reduction(sys, gen, a.settings);
    save_model(a.out, r.file);
    print_model_summary(r.file.model);
    for (const auto& note : r.notes) std::cout << note << '\n';
    return kOk;
}

struct ValidateArgs {
    std::string model;
    std::string csv_dir;
    std::string coupling = "shared";
    bool fixed_omega0 = false;
    ValidationConfig config;
};

int cmd_validate(ValidateArgs& a) {
    const ModelFile model = load_model(a.model);
    a.config.coupling = parse_coupling(a.coupling);
    a.config.randomize_omega0 = !a.fixed_omega0;
    const ValidationReport r = run_validation(model, a.config);
    if (!a.csv_dir.empty()) emit_validation_csv(r, a.csv_dir);
    std::cout << "paths " << r.paths.size() << " diverged " << r.diverged << '\n';
    std::cout << "tail_mean_abs_err " << format_double(r.tail_mean_abs_err) << '\n';
    std::cout << "tail_rms_y " << format_double(r.tail_rms_y) << '\n';
    auto stat = [](const char* name, const SteadyStat& s) {
        std::cout << name << ' ' << format_double(s.mean) << " +- " << format_double(s.se) << '\n';
    };
    stat("steady_y", r.y);
    stat("steady_y_rom", r.y_rom);
    stat("steady_y2", r.y2);
    stat("steady_y_rom2", r.y_rom2);
    stat("steady_ref", r.ref);
    if (r.has_ref2) stat("steady_ref2", r.ref2);
    return kOk;
}

struct AssumptionArgs {
    std::string system;
    std::string generator;
    AssumptionOptions opts;
};

int cmd_check(AssumptionArgs& a) {
    const LinearSde sys = system_from_source(a.system);
    const SignalGenerator gen = generator_from_source(a.generator);
    const AssumptionReport r = check_assumptions(sys, gen, a.opts);
    print_spectrum("system_exponents", r.system_spectrum);
    print_spectrum("generator_exponents", r.generator_spectrum);
    std::cout << "system_negative " << (r.system_negative ? "pass" : "fail") << '\n';
    std::cout << "generator_zero " << (r.generator_zero ? "pass" : "fail") << '\n';
    std::cout << "commuting " << (r.commuting ? "yes" : "no") << '\n';
    if (r.commuting) {
        std::cout << "commuting_shortcut " << (r.commuting_shortcut_zero ? "pass" : "fail") << '\n';
    }
    return r.system_negative && r.generator_zero ? kOk : kCertificate;
}

struct LyapunovArgs {
    std::string A;
    std::string F;
    LyapunovOptions opts;
};

int cmd_lyapunov(LyapunovArgs& a) {
    const Mat A = load_matrix(a.A);
    const Mat F = a.F.empty() ? Mat(Mat::Zero(A.rows(), A.cols())) : load_matrix(a.F);
    print_spectrum("exponents", lyapunov_exponents(A, F, a.opts));
    return kOk;
}

struct MechanicalArgs {
    std::string M, K, D, BH, out;
    long output_state = 25;
    double f_scale = 0.01;
    double g_scale = 1.0;
};

int cmd_mechanical(MechanicalArgs& a) {
    const LinearSde sys = assemble_mechanical(load_matrix(a.M), load_matrix(a.K), load_matrix(a.D),
                                              load_matrix(a.BH), a.output_state - 1, a.f_scale, a.g_scale);
    save_system(a.out, sys);
    std::cout << "order " << sys.order() << '\n';
    return kOk;
}

int run(int argc, char** argv) {
    CLI::App app{"Moment-matching model reduction for linear stochastic systems"};
    app.require_subcommand(1);

    ReduceArgs ra;
    auto* reduce = app.add_subcommand("reduce", "Build a reduced model and write it to a model file");
    reduce->set_config("--config", "", "key=value options file");
    reduce->add_option("--system", ra.system, "System file or random:n=..,margin=..,f=..,g=..,seed=..")->required();
    reduce->add_option("--generator", ra.generator, "Generator file, example1:SEED or constant:SEED")->required();
    reduce->add_option("--method", ra.method, "exact | mean | meansquare")
        ->check(CLI::IsMember({"exact", "mean", "meansquare"}))
        ->capture_default_str();
    reduce->add_option("--poles", ra.settings.poles, "nearest | auto | comma-separated pole list")->capture_default_str();
    reduce->add_option("--gr", ra.settings.gr, "zero | scaled:C | poles:auto | poles:LIST");
    reduce->add_option("--fr", ra.settings.fr, "moment-mean Fr rule: j-minus-gl | minus-gl | zero")->capture_default_str();
    reduce->add_flag("--no-exponents", ra.no_exponents, "Skip the Lyapunov certificate of the exact model");
    reduce->add_option("--out", ra.out, "Model file to write")->required();

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Monte Carlo validation of a model file");
    validate->set_config("--config", "", "key=value options file");
    validate->add_option("--model", va.model, "Model file")->required();
    validate->add_option("--paths", va.config.n_paths, "Number of paths")->capture_default_str()->check(CLI::PositiveNumber);
    validate->add_option("--seed", va.config.seed, "Base seed")->capture_default_str();
    validate->add_option("--dt", va.config.dt, "Time step")->capture_default_str();
    validate->add_option("--horizon", va.config.horizon, "Horizon in seconds")->capture_default_str();
    validate->add_option("--burn-in", va.config.burn_in_fraction, "Burn-in fraction of the horizon")->capture_default_str();
    validate->add_flag("--square-wave", va.config.square_wave, "Drive with a square wave instead of the generator");
    validate->add_option("--wave-amplitude", va.config.wave.amplitude, "Square-wave amplitude")->capture_default_str();
    validate->add_option("--wave-period", va.config.wave.period, "Square-wave period")->capture_default_str();
    validate->add_option("--probe-times", va.config.probe_times, "Times for the empirical CDF")
        ->delimiter(',')
        ->capture_default_str();
    validate->add_option("--threads", va.config.threads, "Worker threads (0 = all cores)")->capture_default_str();
    validate->add_flag("--fixed-omega0,!--randomize-omega0", va.fixed_omega0,
                       "Use the generator's omega0 on every path (default draws one per path)");
    validate->add_option("--coupling", va.coupling, "shared | independent")
        ->check(CLI::IsMember({"shared", "independent"}))
        ->capture_default_str();
    validate->add_option("--csv-dir", va.csv_dir, "Directory for CSV output");

    AssumptionArgs aa;
    auto* check = app.add_subcommand("check-assumptions", "Estimate system and generator Lyapunov spectra");
    check->add_option("--system", aa.system, "System source")->required();
    check->add_option("--generator", aa.generator, "Generator source")->required();
    check->add_option("--seed", aa.opts.system.seed, "Seed of the system estimate")->capture_default_str();
    check->add_option("--system-horizon", aa.opts.system.horizon)->capture_default_str();
    check->add_option("--system-dt", aa.opts.system.dt)->capture_default_str();
    check->add_option("--generator-horizon", aa.opts.generator.horizon)->capture_default_str();
    check->add_option("--generator-dt", aa.opts.generator.dt)->capture_default_str();
    check->add_option("--tolerance", aa.opts.tolerance)->capture_default_str();

    LyapunovArgs la;
    auto* lyap = app.add_subcommand("lyapunov", "Lyapunov exponents of dx = A x dt + F x dW");
    lyap->add_option("--A", la.A, "Drift matrix file")->required();
    lyap->add_option("--F", la.F, "Diffusion matrix file (default zero)");
    lyap->add_option("--dt", la.opts.dt)->capture_default_str();
    lyap->add_option("--horizon", la.opts.horizon)->capture_default_str();
    lyap->add_option("--seed", la.opts.seed)->capture_default_str();
    lyap->add_option("--reorth", la.opts.reorth_interval, "Steps between reorthonormalizations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    MechanicalArgs ma;
    auto* mech = app.add_subcommand("assemble-mechanical", "First-order system from M q'' + D q' + K q = B_H u");
    mech->add_option("--M", ma.M)->required();
    mech->add_option("--K", ma.K)->required();
    mech->add_option("--D", ma.D)->required();
    mech->add_option("--BH", ma.BH)->required();
    mech->add_option("--output-state", ma.output_state, "1-based state index of the output")->capture_default_str();
    mech->add_option("--f-scale", ma.f_scale)->capture_default_str();
    mech->add_option("--g-scale", ma.g_scale)->capture_default_str();
    mech->add_option("--out", ma.out, "System file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (reduce->parsed()) return cmd_reduce(ra);
    if (validate->parsed()) return cmd_validate(va);
    if (check->parsed()) return cmd_check(aa);
    if (lyap->parsed()) return cmd_lyapunov(la);
    return cmd_mechanical(ma);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CertificateFailed& e) {
        std::cerr << "certificate failed: " << e.what() << '\n';
        return kCertificate;
    } catch (const SingularSystem& e) {
        std::cerr << "singular system: " << e.what() << '\n';
        return kSingular;
    } catch (const NoSolution& e) {
        std::cerr << "no solution: " << e.what() << '\n';
        return kSingular;
    } catch (const NotPlaceable& e) {
        std::cerr << "not placeable: " << e.what() << '\n';
        return kSingular;
    } catch (const RankDeficient& e) {
        std::cerr << "rank deficient: " << e.what() << '\n';
        return kSingular;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return kSingular;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kInput;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kInput;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << '\n';
        return kInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
