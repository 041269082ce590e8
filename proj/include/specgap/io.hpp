#ifndef SPECGAP_IO_HPP
#define SPECGAP_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "specgap/core.hpp"
#include "specgap/kernel.hpp"

// Kernel and generator import/export.
//
// CSV layout: literal header line "n,tau", one line with the values, then the
// matrix rows in row-major order. JSON layout:
//   {"labels": [...], "tau": t, "rows": [[...], ...]}

namespace specgap {

using json = nlohmann::json;

struct LabelledKernel {
    StateSpace states;
    KernelOperator kernel;
};

inline json kernel_to_json(const KernelOperator& M, const StateSpace& states) {
    json rows = json::array();
    for (Index i = 0; i < M.n(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.n(); ++j) row.push_back(M.entry(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"labels", states.labels()}, {"tau", M.tau()}, {"rows", std::move(rows)}};
}

inline LabelledKernel kernel_from_json(const json& j) {
    if (!j.contains("rows") || !j.contains("tau"))
        throw std::invalid_argument("kernel_from_json: missing 'rows' or 'tau'");
    const auto& rows = j.at("rows");
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw std::invalid_argument("kernel_from_json: empty matrix");
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (static_cast<Index>(row.size()) != n)
            throw std::invalid_argument("kernel_from_json: ragged rows");
        for (Index k = 0; k < n; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    StateSpace states = j.contains("labels")
                            ? StateSpace(j.at("labels").get<std::vector<std::string>>())
                            : StateSpace::indexed(n);
    if (states.size() != n)
        throw std::invalid_argument("kernel_from_json: label count does not match matrix size");
    return LabelledKernel{std::move(states), KernelOperator(std::move(m), j.at("tau").get<double>())};
}

inline std::string kernel_to_csv(const KernelOperator& M) {
    std::ostringstream out;
    out.precision(17);
    out << "n,tau\n" << M.n() << "," << M.tau() << "\n";
    for (Index i = 0; i < M.n(); ++i) {
        for (Index j = 0; j < M.n(); ++j) {
            if (j) out << ",";
            out << M.entry(i, j);
        }
        out << "\n";
    }
    return out.str();
}

namespace detail {

inline std::vector<double> split_csv_line(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell.empty()) continue;
        out.push_back(std::stod(cell));
    }
    return out;
}

}  // namespace detail

inline KernelOperator kernel_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("n,tau", 0) != 0)
        throw std::invalid_argument("kernel_from_csv: expected header 'n,tau'");
    if (!std::getline(in, line)) throw std::invalid_argument("kernel_from_csv: missing size line");
    auto header = detail::split_csv_line(line);
    if (header.size() != 2) throw std::invalid_argument("kernel_from_csv: malformed size line");
    const Index n = static_cast<Index>(header[0]);
    const double tau = header[1];
    if (n <= 0) throw std::invalid_argument("kernel_from_csv: n must be positive");
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
        if (!std::getline(in, line))
            throw std::invalid_argument("kernel_from_csv: truncated matrix");
        auto row = detail::split_csv_line(line);
        if (static_cast<Index>(row.size()) != n)
            throw std::invalid_argument("kernel_from_csv: wrong row length");
        for (Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return KernelOperator(std::move(m), tau);
}

inline KernelOperator kernel_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("kernel_from_csv_file: cannot open " + path);
    return kernel_from_csv(in);
}

/// Write-temp-rename so readers never observe a partial file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write_file: cannot open " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("atomic_write_file: write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace specgap

#endif  // SPECGAP_IO_HPP
