#include "stomor/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

Mat uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

std::string strip(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto r = std::from_chars(first, last, v);
    if (s.empty() || r.ec != std::errc() || r.ptr != last) {
        throw std::invalid_argument("invalid " + what + " '" + s + "'");
    }
    return v;
}

std::uint64_t to_seed(const std::string& s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw std::invalid_argument("invalid seed '" + s + "'");
    }
    return v;
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.rfind(prefix, 0) == 0;
}

Complex parse_complex(const std::string& raw) {
    const std::string s = strip(raw);
    if (s.empty()) throw std::invalid_argument("empty pole entry");
    const char last = s.back();
    if (last != 'i' && last != 'j') return {to_double(s, "pole"), 0.0};
    const std::string body = s.substr(0, s.size() - 1);
    // split at the last sign that is not part of an exponent
    std::size_t split = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    auto imag_of = [](const std::string& t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return to_double(t, "pole");
    };
    if (split == std::string::npos) return {0.0, imag_of(body)};
    return {to_double(body.substr(0, split), "pole"), imag_of(body.substr(split))};
}

std::vector<Complex> gr_targets(const std::string& spec, const LinearSde& sys, Index nu) {
    const std::string list = spec.substr(std::string("poles:").size());
    return list == "auto" ? dominant_poles(sys.F, nu) : parse_pole_list(list);
}

Mat gr_from_rule(const std::string& rule, const Mat& Br, const LinearSde& sys,
                 const SignalGenerator& gen) {
    const Index nu = gen.order();
    if (rule == "zero") return Mat::Zero(nu, 1);
    if (starts_with(rule, "scaled:")) return to_double(rule.substr(7), "Gr scale") * Br;
    if (starts_with(rule, "poles:")) return place_poles(gen.J, gen.L, gr_targets(rule, sys, nu));
    throw std::invalid_argument("unknown Gr rule '" + rule + "'");
}

}  // namespace

LinearSde make_random_system(const RandomSystemSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("random system order must be at least 1");
    std::mt19937_64 rng(derive_seed(spec.seed, 0, 101));
    const Mat M = uniform_matrix(rng, spec.n, spec.n, -1.0, 1.0);
    LinearSde sys;
    const double shift = spectrum(M).max_real_part + spec.margin;
    sys.A = M - shift * identity(spec.n);
    sys.B = uniform_matrix(rng, spec.n, 1, -1.0, 1.0);
    sys.C = uniform_matrix(rng, 1, spec.n, -1.0, 1.0);
    sys.F = spec.f_scale * sys.A;
    sys.G = spec.g_scale * sys.B;
    return sys;
}

SignalGenerator make_oscillator_generator(double c0, double c1, const Mat& L, const Vec& omega0) {
    Mat W(2, 2);
    W << 0.0, 5.0, -5.0, 0.0;
    SignalGenerator gen;
    gen.J = c0 * identity(2) + c1 * W;
    gen.S = W + 0.5 * gen.J * gen.J;
    gen.L = L;
    gen.omega0 = omega0;
    gen.validate();
    return gen;
}

SignalGenerator make_example1_generator(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0, 102));
    std::uniform_real_distribution<double> c0(-0.3, 0.3);
    std::uniform_real_distribution<double> c1(-0.06, 0.06);
    const double a = c0(rng);
    const double b = c1(rng);
    const Mat L = uniform_matrix(rng, 1, 2, -1.0, 1.0);
    const Mat w0 = uniform_matrix(rng, 2, 1, -1.0, 1.0);
    return make_oscillator_generator(a, b, L, Vec(w0.col(0)));
}

SignalGenerator make_constant_generator(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0, 103));
    SignalGenerator gen;
    gen.S = Mat::Zero(1, 1);
    gen.J = Mat::Zero(1, 1);
    gen.L = uniform_matrix(rng, 1, 1, -1.0, 1.0);
    gen.omega0 = Vec::Ones(1);
    return gen;
}

LinearSde assemble_mechanical(const Mat& M, const Mat& K, const Mat& D, const Mat& BH,
                              Index output_state, double f_scale, double g_scale) {
    const Index m = M.rows();
    if (m < 1 || M.cols() != m || K.rows() != m || K.cols() != m || D.rows() != m ||
        D.cols() != m || BH.rows() != m || BH.cols() != 1) {
        throw DimensionError("assemble_mechanical: M, K, D must be mxm and B_H mx1");
    }
    if (output_state < 0 || output_state >= 2 * m) {
        throw DimensionError("assemble_mechanical: output state " + std::to_string(output_state + 1) +
                             " outside 1.." + std::to_string(2 * m));
    }
    Mat rhs(m, 2 * m + 1);
    rhs << K, D, BH;
    const Mat sol = solve_dense(M, rhs).x;
    LinearSde sys;
    sys.A = Mat::Zero(2 * m, 2 * m);
    sys.A.block(0, m, m, m) = identity(m);
    sys.A.block(m, 0, m, m) = -sol.leftCols(m);
    sys.A.block(m, m, m, m) = -sol.middleCols(m, m);
    sys.B = Mat::Zero(2 * m, 1);
    sys.B.bottomRows(m) = -sol.rightCols(1);
    sys.C = Mat::Zero(1, 2 * m);
    sys.C(0, output_state) = 1.0;
    sys.F = f_scale * sys.A;
    sys.G = g_scale * sys.B;
    return sys;
}

RandomSystemSpec parse_random_spec(const std::string& body) {
    RandomSystemSpec spec;
    std::istringstream is(body);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = strip(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("expected key=value in '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "n") {
            const double n = to_double(val, "order");
            if (n < 1 || n != std::floor(n)) throw std::invalid_argument("order must be a positive integer");
            spec.n = static_cast<Index>(n);
        } else if (key == "margin") {
            spec.margin = to_double(val, "margin");
        } else if (key == "f") {
            spec.f_scale = to_double(val, "F scale");
        } else if (key == "g") {
            spec.g_scale = to_double(val, "G scale");
        } else if (key == "seed") {
            spec.seed = to_seed(val);
        } else {
            throw std::invalid_argument("unknown random-system key '" + key + "'");
        }
    }
    return spec;
}

LinearSde system_from_source(const std::string& source) {
    if (starts_with(source, "random:")) return make_random_system(parse_random_spec(source.substr(7)));
    return load_system(source);
}

SignalGenerator generator_from_source(const std::string& source) {
    if (starts_with(source, "example1:")) return make_example1_generator(to_seed(source.substr(9)));
    if (starts_with(source, "constant:")) return make_constant_generator(to_seed(source.substr(9)));
    return load_generator(source);
}

std::vector<Complex> parse_pole_list(const std::string& text) {
    std::vector<Complex> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (strip(item).empty()) continue;
        out.push_back(parse_complex(item));
    }
    if (out.empty()) throw std::invalid_argument("empty pole list");
    return out;
}

std::vector<Complex> dominant_poles(const Mat& A, Index nu) {
    const SpectrumReport rep = spectrum(A);
    std::vector<Complex> eig;
    for (Complex e : rep.eigenvalues) {
        if (std::abs(e.imag()) <= 1e-10 * (1.0 + std::abs(e))) e = {e.real(), 0.0};
        eig.push_back(e);
    }
    std::vector<Complex> out;
    for (const Complex& e : eig) {
        const Index left = nu - static_cast<Index>(out.size());
        if (left == 0) break;
        if (e.imag() == 0.0) {
            out.push_back(e);
        } else if (e.imag() > 0.0 && left >= 2) {
            out.push_back(e);
            out.push_back(std::conj(e));
        }
    }
    // Only complex pairs remained for a single slot: use the dominant real part.
    for (const Complex& e : eig) {
        if (static_cast<Index>(out.size()) == nu) break;
        out.emplace_back(e.real(), 0.0);
    }
    return out;
}

std::vector<Complex> nearest_poles(const Mat& A, const Mat& S) {
    const auto snap = [](Complex e) {
        return std::abs(e.imag()) <= 1e-10 * (1.0 + std::abs(e)) ? Complex(e.real(), 0.0) : e;
    };
    std::vector<Complex> pool;
    for (const Complex& e : spectrum(A).eigenvalues) pool.push_back(snap(e));
    std::vector<bool> used(pool.size(), false);
    const Index nu = S.rows();
    std::vector<Complex> out;
    for (Complex s : spectrum(S).eigenvalues) {
        s = snap(s);
        if (s.imag() < 0.0 || static_cast<Index>(out.size()) == nu) continue;
        const bool want_pair = s.imag() > 0.0 && nu - static_cast<Index>(out.size()) >= 2;
        std::size_t best = pool.size();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i] || (want_pair ? pool[i].imag() <= 0.0 : pool[i].imag() != 0.0)) continue;
            if (best == pool.size() || std::abs(pool[i] - s) < std::abs(pool[best] - s)) best = i;
        }
        if (best == pool.size()) continue;
        used[best] = true;
        out.push_back(pool[best]);
        if (want_pair) {
            out.push_back(std::conj(pool[best]));
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (!used[i] && pool[i] == std::conj(pool[best])) {
                    used[i] = true;
                    break;
                }
            }
        }
    }
    if (static_cast<Index>(out.size()) < nu) {
        for (const Complex& e : dominant_poles(A, A.rows())) {
            if (static_cast<Index>(out.size()) == nu) break;
            const bool taken = std::find(out.begin(), out.end(), e) != out.end();
            const bool pair = e.imag() != 0.0;
            if (taken || (pair && nu - static_cast<Index>(out.size()) < 2) || e.imag() < 0.0) continue;
            out.push_back(e);
            if (pair) out.push_back(std::conj(e));
        }
    }
    if (static_cast<Index>(out.size()) < nu) return dominant_poles(A, nu);
    return out;
}

ReductionResult run_reduction(const LinearSde& sys, const SignalGenerator& gen,
                              const ReductionSettings& settings) {
    sys.validate();
    gen.validate();
    const Index nu = gen.order();
    ReductionResult res;
    res.file.sys = sys;
    res.file.gen = gen;
    res.Pi = try_solve_mean_moment(sys, gen);

    const std::vector<Complex> targets =
        settings.poles == "auto"      ? dominant_poles(sys.A, nu)
        : settings.poles == "nearest" ? nearest_poles(sys.A, gen.S)
                                      : parse_pole_list(settings.poles);
    const std::string gr_rule =
        !settings.gr.empty() ? settings.gr
                             : (settings.method == RomKind::mean_square ? "zero" : "scaled:0.05");

    auto require_pi = [&]() {
        if (!res.Pi.solvable) {
            throw SingularSystem("mean moment equation has no unique solution",
                                 res.Pi.condition_estimate);
        }
    };

    switch (settings.method) {
        case RomKind::exact: {
            const Mat Br = place_poles(gen.S, gen.L, targets);
            const Mat Gr = gr_from_rule(gr_rule, Br, sys, gen);
            res.file.model = build_exact_rom(sys, gen, Br, Gr, settings.exact);
            res.notes.push_back("exact model: output requires co-simulation of the moment process");
            if (res.Pi.solvable) res.file.model.diagnostics.emplace_back("pi_residual", res.Pi.residual);
            break;
        }
        case RomKind::moment_mean: {
            require_pi();
            const Mat Br = place_poles(gen.S, gen.L, targets);
            const Mat Gr = gr_from_rule(gr_rule, Br, sys, gen);
            Mat Fr;
            if (settings.fr == "j-minus-gl") {
                Fr = gen.J - Gr * gen.L;
            } else if (settings.fr == "minus-gl") {
                Fr = -Gr * gen.L;
            } else if (settings.fr == "zero") {
                Fr = Mat::Zero(nu, nu);
            } else {
                throw std::invalid_argument("unknown Fr rule '" + settings.fr + "'");
            }
            res.file.model = build_mean_rom(sys, gen, res.Pi, Br, Fr, Gr);
            break;
        }
        case RomKind::mean_square: {
            require_pi();
            res.K = solve_second_moment(sys, gen, res.Pi);
            if (gr_rule == "zero") {
                res.file.model = build_meansquare_rom(sys, gen, res.Pi, *res.K, targets);
            } else if (starts_with(gr_rule, "scaled:")) {
                const double c = to_double(gr_rule.substr(7), "Gr scale");
                const ReducedModel base = build_meansquare_rom(sys, gen, res.Pi, *res.K, targets);
                res.file.model = build_meansquare_rom(sys, gen, res.Pi, *res.K, targets,
                                                      Mat(c * base.Br));
            } else {
                throw std::invalid_argument("mean-square models accept Gr rules 'zero' and 'scaled:C'");
            }
            break;
        }
    }
    for (const auto& w : res.file.model.warnings) res.notes.push_back("warning: " + w);
    return res;
}

}  // namespace stomor
