#include "stomor/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

void expect_shape(const Mat& m, Index rows, Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
    if (!m.allFinite()) {
        throw Error(std::string(name) + " has non-finite entries");
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

void LinearSde::validate() const {
    const Index n = A.rows();
    if (n < 1) throw DimensionError("system order must be at least 1");
    expect_shape(A, n, n, "A");
    expect_shape(B, n, 1, "B");
    expect_shape(C, 1, n, "C");
    expect_shape(F, n, n, "F");
    expect_shape(G, n, 1, "G");
}

void SignalGenerator::validate() const {
    const Index nu = S.rows();
    if (nu < 1) throw DimensionError("generator order must be at least 1");
    expect_shape(S, nu, nu, "S");
    expect_shape(J, nu, nu, "J");
    expect_shape(L, 1, nu, "L");
    if (omega0.size() != nu) {
        throw DimensionError("omega0 must have " + std::to_string(nu) + " entries");
    }
    if (!omega0.allFinite()) throw Error("omega0 has non-finite entries");
}

std::string to_string(NoiseCoupling c) {
    return c == NoiseCoupling::shared ? "shared" : "independent";
}

NoiseCoupling parse_coupling(const std::string& s) {
    if (s == "shared") return NoiseCoupling::shared;
    if (s == "independent") return NoiseCoupling::independent;
    throw std::invalid_argument("unknown noise coupling '" + s + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t path_index, std::uint64_t stream) {
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ path_index);
    h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
    return h;
}

BrownianStream::BrownianStream(std::uint64_t seed, std::uint64_t path_index, double dt,
                               std::uint64_t stream)
    : dt_(dt), sqrt_dt_(std::sqrt(dt)), engine_(derive_seed(seed, path_index, stream)) {
    if (!(dt > 0.0)) throw std::invalid_argument("Brownian time step must be positive");
}

std::vector<double> BrownianPath::cumulative() const {
    std::vector<double> w(increments.size() + 1, 0.0);
    for (std::size_t k = 0; k < increments.size(); ++k) w[k + 1] = w[k] + increments[k];
    return w;
}

BrownianPath generate_path(std::uint64_t seed, std::uint64_t path_index, double dt,
                           std::size_t n_steps, std::uint64_t stream) {
    BrownianStream source(seed, path_index, dt, stream);
    BrownianPath path;
    path.dt = dt;
    path.n_steps = n_steps;
    path.seed = seed;
    path.path_index = path_index;
    path.increments.resize(n_steps);
    for (auto& dw : path.increments) dw = source.next();
    return path;
}

Vec em_step(const Vec& state, const Vec& drift, const Vec& diffusion, double dt, double dW) {
    if (drift.size() != state.size() || diffusion.size() != state.size()) {
        throw DimensionError("em_step: drift/diffusion do not match state dimension");
    }
    return state + drift * dt + diffusion * dW;
}

}  // namespace stomor
