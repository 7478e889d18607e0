#include "stomor/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string strip_comment(const std::string& line, char mark) {
    const auto pos = line.find(mark);
    return pos == std::string::npos ? line : line.substr(0, pos);
}

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_real(const std::string& tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ParseError("'" + tok + "' is not a number", line);
    }
    return v;
}

Index parse_dim(const std::string& tok, std::size_t line, bool allow_zero = false) {
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < (allow_zero ? 0 : 1)) {
        throw ParseError("'" + tok + "' is not a valid dimension", line);
    }
    return static_cast<Index>(v);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

void write_named(std::ostream& out, const std::string& name, const Mat& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ' ';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

Mat matrix_or(const Bundle& b, const std::string& name, const Mat& fallback) {
    return b.has(name) ? b.at(name) : fallback;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Mat parse_matrix_text(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    Index rows = -1;
    Index cols = -1;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = split_ws(strip_comment(line, '#'));
        if (toks.empty()) continue;
        std::size_t k = 0;
        if (rows < 0) {
            if (toks.size() < 2) throw ParseError("expected 'rows cols'", lineno);
            rows = parse_dim(toks[0], lineno);
            cols = parse_dim(toks[1], lineno);
            k = 2;
        }
        for (; k < toks.size(); ++k) {
            if (static_cast<Index>(values.size()) == rows * cols) {
                throw ParseError("more than " + std::to_string(rows * cols) + " values", lineno);
            }
            values.push_back(parse_real(toks[k], lineno));
        }
    }
    if (rows < 0) throw ParseError("empty matrix file", 0);
    if (static_cast<Index>(values.size()) != rows * cols) {
        throw ParseError("expected " + std::to_string(rows * cols) + " values, found " +
                             std::to_string(values.size()),
                         lineno);
    }
    Mat m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

void write_matrix_text(std::ostream& out, const Mat& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ' ';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

Mat parse_matrix_market(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError("empty Matrix Market file", 0);
    const auto head = split_ws(lower(line));
    if (head.size() != 5 || head[0] != "%%matrixmarket" || head[1] != "matrix") {
        throw ParseError("missing '%%MatrixMarket matrix' banner", lineno);
    }
    const bool coordinate = head[2] == "coordinate";
    if (!coordinate && head[2] != "array") throw ParseError("unknown format '" + head[2] + "'", lineno);
    if (head[3] != "real") throw ParseError("only the real field is supported", lineno);
    const bool symmetric = head[4] == "symmetric";
    if (!symmetric && head[4] != "general") {
        throw ParseError("unsupported symmetry '" + head[4] + "'", lineno);
    }

    std::vector<std::string> toks;
    std::vector<std::size_t> tok_line;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line);
        if (body.empty() || body[0] == '%') continue;
        for (auto& t : split_ws(body)) {
            toks.push_back(t);
            tok_line.push_back(lineno);
        }
    }
    std::size_t pos = 0;
    auto next = [&](const char* what) -> std::pair<std::string, std::size_t> {
        if (pos >= toks.size()) throw ParseError(std::string("missing ") + what, lineno);
        const auto r = std::make_pair(toks[pos], tok_line[pos]);
        ++pos;
        return r;
    };

    auto [rs, rl] = next("size line");
    const Index rows = parse_dim(rs, rl);
    auto [cs, cl] = next("size line");
    const Index cols = parse_dim(cs, cl);
    if (symmetric && rows != cols) throw ParseError("symmetric matrix must be square", rl);
    Mat m = Mat::Zero(rows, cols);

    if (coordinate) {
        auto [ns, nl] = next("entry count");
        const Index nnz = parse_dim(ns, nl, true);
        for (Index e = 0; e < nnz; ++e) {
            auto [is, il] = next("entry");
            auto [js, jl] = next("entry");
            auto [vs, vl] = next("entry value");
            const Index i = parse_dim(is, il) - 1;
            const Index j = parse_dim(js, jl) - 1;
            if (i >= rows || j >= cols) throw ParseError("entry index out of range", il);
            const double v = parse_real(vs, vl);
            m(i, j) += v;
            if (symmetric && i != j) m(j, i) += v;
        }
    } else {
        for (Index j = 0; j < cols; ++j) {
            for (Index i = symmetric ? j : 0; i < rows; ++i) {
                auto [vs, vl] = next("array value");
                m(i, j) = parse_real(vs, vl);
                if (symmetric) m(j, i) = m(i, j);
            }
        }
    }
    if (pos != toks.size()) throw ParseError("trailing data after matrix", tok_line[pos]);
    return m;
}

void write_matrix_market(std::ostream& out, const Mat& m) {
    out << "%%MatrixMarket matrix array real general\n";
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
    }
}

Mat load_matrix(const std::string& path, MatrixFormat format) {
    auto in = open_in(path);
    if (format == MatrixFormat::automatic) {
        const int c = in.peek();
        format = c == '%' ? MatrixFormat::matrix_market : MatrixFormat::structured_text;
    }
    try {
        return format == MatrixFormat::matrix_market ? parse_matrix_market(in) : parse_matrix_text(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

void save_matrix(const std::string& path, const Mat& m, MatrixFormat format) {
    auto out = open_out(path);
    if (format == MatrixFormat::matrix_market) {
        write_matrix_market(out, m);
    } else {
        write_matrix_text(out, m);
    }
    finish(out, path);
}

const Mat& Bundle::at(const std::string& name) const {
    const auto it = matrices.find(name);
    if (it == matrices.end()) throw ParseError("missing matrix '" + name + "'", 0);
    return it->second;
}

std::string Bundle::value(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return v;
    }
    return {};
}

Bundle parse_bundle(std::istream& in) {
    Bundle b;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(strip_comment(line, '#'));
        if (body.empty()) continue;
        const auto toks = split_ws(body);
        if (toks[0] != "matrix") {
            const std::string rest = trim(body.substr(toks[0].size()));
            b.entries.emplace_back(toks[0], rest);
            continue;
        }
        if (toks.size() != 4) throw ParseError("expected 'matrix NAME rows cols'", lineno);
        const std::string& name = toks[1];
        const Index rows = parse_dim(toks[2], lineno);
        const Index cols = parse_dim(toks[3], lineno);
        if (b.has(name)) throw ParseError("duplicate matrix '" + name + "'", lineno);
        Mat m(rows, cols);
        for (Index i = 0; i < rows; ++i) {
            std::vector<std::string> row;
            while (row.empty()) {
                if (!std::getline(in, line)) {
                    throw ParseError("matrix '" + name + "' ends after " + std::to_string(i) + " rows",
                                     lineno);
                }
                ++lineno;
                row = split_ws(strip_comment(line, '#'));
            }
            if (static_cast<Index>(row.size()) != cols) {
                throw ParseError("matrix '" + name + "' row has " + std::to_string(row.size()) +
                                     " values, expected " + std::to_string(cols),
                                 lineno);
            }
            for (Index j = 0; j < cols; ++j) m(i, j) = parse_real(row[j], lineno);
        }
        b.matrices.emplace(name, std::move(m));
    }
    return b;
}

Bundle load_bundle(const std::string& path) {
    auto in = open_in(path);
    try {
        return parse_bundle(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

LinearSde load_system(const std::string& path) {
    const Bundle b = load_bundle(path);
    LinearSde sys;
    try {
        sys.A = b.at("A");
        sys.B = b.at("B");
        sys.C = b.at("C");
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
    const Index n = sys.A.rows();
    sys.F = matrix_or(b, "F", Mat::Zero(n, n));
    sys.G = matrix_or(b, "G", Mat::Zero(n, 1));
    sys.validate();
    return sys;
}

void save_system(const std::string& path, const LinearSde& sys) {
    auto out = open_out(path);
    out << "# linear stochastic system\n";
    write_named(out, "A", sys.A);
    write_named(out, "B", sys.B);
    write_named(out, "C", sys.C);
    write_named(out, "F", sys.F);
    write_named(out, "G", sys.G);
    finish(out, path);
}

SignalGenerator load_generator(const std::string& path) {
    const Bundle b = load_bundle(path);
    SignalGenerator gen;
    try {
        gen.S = b.at("S");
        gen.L = b.at("L");
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
    const Index nu = gen.S.rows();
    gen.J = matrix_or(b, "J", Mat::Zero(nu, nu));
    const Mat w0 = matrix_or(b, "omega0", Mat::Ones(nu, 1));
    if (w0.cols() != 1 && w0.rows() != 1) throw ParseError(path + ": omega0 must be a vector", 0);
    gen.omega0 = Eigen::Map<const Vec>(w0.data(), w0.size());
    gen.validate();
    return gen;
}

void save_generator(const std::string& path, const SignalGenerator& gen) {
    auto out = open_out(path);
    out << "# signal generator\n";
    write_named(out, "S", gen.S);
    write_named(out, "J", gen.J);
    write_named(out, "L", gen.L);
    write_named(out, "omega0", Mat(gen.omega0));
    finish(out, path);
}

void write_model(std::ostream& out, const ModelFile& m) {
    out << "# reduced model\n";
    out << "kind " << to_string(m.model.kind) << '\n';
    write_named(out, "Ar", m.model.Ar);
    write_named(out, "Br", m.model.Br);
    write_named(out, "Fr", m.model.Fr);
    write_named(out, "Gr", m.model.Gr);
    write_named(out, "Cr", m.model.Cr);
    write_named(out, "T", m.model.output_transform);
    for (const auto& c : m.model.certificates) {
        out << "certificate " << c.name << ' ' << (c.pass ? "pass" : "fail") << ' '
            << format_double(c.value) << '\n';
    }
    for (const auto& [name, value] : m.model.diagnostics) {
        out << "diagnostic " << name << ' ' << format_double(value) << '\n';
    }
    for (const auto& w : m.model.warnings) out << "warning " << w << '\n';
    out << "# full system\n";
    write_named(out, "A", m.sys.A);
    write_named(out, "B", m.sys.B);
    write_named(out, "C", m.sys.C);
    write_named(out, "F", m.sys.F);
    write_named(out, "G", m.sys.G);
    out << "# signal generator\n";
    write_named(out, "S", m.gen.S);
    write_named(out, "J", m.gen.J);
    write_named(out, "L", m.gen.L);
    write_named(out, "omega0", Mat(m.gen.omega0));
}

ModelFile parse_model(std::istream& in) {
    const Bundle b = parse_bundle(in);
    ModelFile m;
    const std::string kind = b.value("kind");
    if (kind.empty()) throw ParseError("model file has no 'kind' line", 0);
    try {
        m.model.kind = parse_rom_kind(kind);
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), 0);
    }
    m.model.Ar = b.at("Ar");
    m.model.Br = b.at("Br");
    m.model.Fr = b.at("Fr");
    m.model.Gr = b.at("Gr");
    m.model.Cr = b.at("Cr");
    m.model.output_transform = b.at("T");
    for (const auto& [key, rest] : b.entries) {
        const auto toks = split_ws(rest);
        if (key == "certificate") {
            if (toks.size() != 3 || (toks[1] != "pass" && toks[1] != "fail")) {
                throw ParseError("malformed certificate line '" + rest + "'", 0);
            }
            m.model.certificates.push_back({toks[0], toks[1] == "pass", parse_real(toks[2], 0)});
        } else if (key == "diagnostic") {
            if (toks.size() != 2) throw ParseError("malformed diagnostic line '" + rest + "'", 0);
            m.model.diagnostics.emplace_back(toks[0], parse_real(toks[1], 0));
        } else if (key == "warning") {
            m.model.warnings.push_back(rest);
        } else if (key != "kind") {
            throw ParseError("unknown model entry '" + key + "'", 0);
        }
    }
    m.sys.A = b.at("A");
    m.sys.B = b.at("B");
    m.sys.C = b.at("C");
    m.sys.F = b.at("F");
    m.sys.G = b.at("G");
    m.gen.S = b.at("S");
    m.gen.J = b.at("J");
    m.gen.L = b.at("L");
    const Mat& w0 = b.at("omega0");
    m.gen.omega0 = Eigen::Map<const Vec>(w0.data(), w0.size());
    m.sys.validate();
    m.gen.validate();
    m.model.validate();
    return m;
}

void save_model(const std::string& path, const ModelFile& m) {
    auto out = open_out(path);
    write_model(out, m);
    finish(out, path);
}

ModelFile load_model(const std::string& path) {
    auto in = open_in(path);
    try {
        return parse_model(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    auto out = open_out(path);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j > 0) out << ',';
        out << header[j];
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw DimensionError("write_csv: row width " + std::to_string(row.size()) +
                                 " does not match header width " + std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out << ',';
            out << format_double(row[j]);
        }
        out << '\n';
    }
    finish(out, path);
}

CsvTable read_csv(const std::string& path) {
    auto in = open_in(path);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream is(s);
        while (std::getline(is, cell, ',')) out.push_back(trim(cell));
        return out;
    };
    if (!std::getline(in, line)) throw ParseError(path + ": empty CSV file", 0);
    ++lineno;
    t.header = split(line);
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw ParseError(path + ": row width does not match header", lineno);
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_real(c, lineno));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace stomor
