#pragma once

///
/// \file io.hpp
///
/// Text formats: single matrices, Matrix Market import/export, named-section
/// bundles for systems, generators and reduced models, and CSV.
///

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stomor/linalg.hpp"
#include "stomor/rom.hpp"
#include "stomor/sde.hpp"

namespace stomor {

enum class MatrixFormat { automatic, structured_text, matrix_market };

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

/// "rows cols" line, then row-major values. '#' starts a comment.
Mat parse_matrix_text(std::istream& in);
void write_matrix_text(std::ostream& out, const Mat& m);

/// Real Matrix Market, coordinate or array, general or symmetric.
Mat parse_matrix_market(std::istream& in);
void write_matrix_market(std::ostream& out, const Mat& m);

/// `automatic` picks Matrix Market when the file starts with "%%MatrixMarket".
Mat load_matrix(const std::string& path, MatrixFormat format = MatrixFormat::automatic);
void save_matrix(const std::string& path, const Mat& m,
                 MatrixFormat format = MatrixFormat::structured_text);

/// Named matrices plus free key/value lines of a bundle file.
///
///     # comment
///     key value...
///     matrix NAME rows cols
///     <rows lines of cols values>
struct Bundle {
    std::map<std::string, Mat> matrices;
    std::vector<std::pair<std::string, std::string>> entries;  // in file order

    bool has(const std::string& name) const { return matrices.count(name) != 0; }
    const Mat& at(const std::string& name) const;
    /// First value of `key`, or empty.
    std::string value(const std::string& key) const;
};

Bundle parse_bundle(std::istream& in);
Bundle load_bundle(const std::string& path);

/// System file: A, B, C required; F, G default to zero.
LinearSde load_system(const std::string& path);
void save_system(const std::string& path, const LinearSde& sys);

/// Generator file: S, L required; J defaults to zero, omega0 to ones.
SignalGenerator load_generator(const std::string& path);
void save_generator(const std::string& path, const SignalGenerator& gen);

/// Everything validation needs: the reduced model and the pair it reduces.
struct ModelFile {
    ReducedModel model;
    LinearSde sys;
    SignalGenerator gen;
};

void write_model(std::ostream& out, const ModelFile& m);
ModelFile parse_model(std::istream& in);
void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);

/// Header row then comma-separated rows at 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path);

}  // namespace stomor
