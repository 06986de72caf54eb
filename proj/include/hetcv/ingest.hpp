#pragma once

// CSV ingestion of study-level data. Two layouts are accepted:
//   yi, vi                       pre-computed effects and variances
//   m1, sd1, n1, m2, sd2, n2     two-arm summaries, converted to SMDs
// An optional `study` (or `label`) column names each row. Lines starting
// with '#' and blank lines are ignored.

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hetcv/meta_core.hpp"
#include "hetcv/simulator.hpp"

namespace hetcv {

enum class SmdCorrection {
    Hedges,  ///< d multiplied by the exact small-sample factor J(n1 + n2 − 2)
    None     ///< Cohen's d with pooled SD
};

/// Exact Hedges correction J(m) = Γ(m/2) / (sqrt(m/2) Γ((m−1)/2)).
[[nodiscard]] inline double hedges_factor(double m) {
    if (!(m > 1.0)) throw DomainError("hedges_factor requires m > 1");
    return std::exp(std::lgamma(m / 2.0) - 0.5 * std::log(m / 2.0) - std::lgamma((m - 1.0) / 2.0));
}

struct SmdEstimate {
    double yi = 0.0;
    double vi = 0.0;
};

/// Standardised mean difference (m1 − m2)/s_pooled with variance
/// 1/n1 + 1/n2 + y²/(2(n1 + n2)), the same variance the simulator uses.
[[nodiscard]] inline SmdEstimate smd_from_arms(double m1, double sd1, int n1, double m2, double sd2,
                                               int n2, SmdCorrection corr = SmdCorrection::Hedges) {
    if (n1 < 2 || n2 < 2) throw InputError("each arm needs at least two observations");
    if (!(sd1 > 0.0) || !(sd2 > 0.0)) throw InputError("standard deviations must be positive");
    const double df = n1 + n2 - 2;
    const double sp = std::sqrt(((n1 - 1) * sd1 * sd1 + (n2 - 1) * sd2 * sd2) / df);
    double d = (m1 - m2) / sp;
    if (corr == SmdCorrection::Hedges) d *= hedges_factor(df);
    return {d, smd_variance(d, n1, n2)};
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string where(int line, const std::string& column) {
    return "line " + std::to_string(line) + ", column '" + column + "'";
}

inline double parse_number(const std::string& text, int line, const std::string& column) {
    if (text.empty()) throw InputError(where(line, column) + ": empty value");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw InputError(where(line, column) + ": not a number: '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw InputError(where(line, column) + ": not a finite number: '" + text + "'");
    }
    return v;
}

inline int parse_count(const std::string& text, int line, const std::string& column) {
    const double v = parse_number(text, line, column);
    if (v != std::floor(v) || v < 1.0 || v > 1e9) {
        throw InputError(where(line, column) + ": expected a positive integer, got '" + text + "'");
    }
    return static_cast<int>(v);
}

}  // namespace detail

/// Parses study rows from a CSV stream. Errors carry line and column.
[[nodiscard]] inline MetaDataset read_studies_csv(std::istream& in,
                                                  SmdCorrection corr = SmdCorrection::Hedges) {
    std::string raw;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        header = detail::split_csv_line(line);
        break;
    }
    if (header.empty()) throw InputError("CSV input has no header row");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[detail::lower(header[i])] = i;
    auto find = [&](std::string_view name) -> std::optional<std::size_t> {
        const auto it = col.find(std::string(name));
        if (it == col.end()) return std::nullopt;
        return it->second;
    };

    const bool has_effects = find("yi") && find("vi");
    const bool has_arms = find("m1") && find("sd1") && find("n1") && find("m2") && find("sd2") &&
                          find("n2");
    if (!has_effects && !has_arms) {
        throw InputError("line " + std::to_string(line_no) +
                         ": header must contain yi,vi or m1,sd1,n1,m2,sd2,n2");
    }
    const auto label_col = find("study") ? find("study") : find("label");

    std::vector<StudyRecord> studies;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw InputError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        auto field = [&](std::string_view name) -> const std::string& {
            return fields[*find(name)];
        };
        StudyRecord rec;
        if (has_effects) {
            rec.effect = detail::parse_number(field("yi"), line_no, "yi");
            rec.within_var = detail::parse_number(field("vi"), line_no, "vi");
            if (!(rec.within_var > 0.0)) {
                throw InputError(detail::where(line_no, "vi") + ": variance must be positive");
            }
        } else {
            const double m1 = detail::parse_number(field("m1"), line_no, "m1");
            const double sd1 = detail::parse_number(field("sd1"), line_no, "sd1");
            const int n1 = detail::parse_count(field("n1"), line_no, "n1");
            const double m2 = detail::parse_number(field("m2"), line_no, "m2");
            const double sd2 = detail::parse_number(field("sd2"), line_no, "sd2");
            const int n2 = detail::parse_count(field("n2"), line_no, "n2");
            try {
                const SmdEstimate smd = smd_from_arms(m1, sd1, n1, m2, sd2, n2, corr);
                rec.effect = smd.yi;
                rec.within_var = smd.vi;
            } catch (const InputError& e) {
                throw InputError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (label_col) rec.label = fields[*label_col];
        studies.push_back(std::move(rec));
    }
    return MetaDataset(std::move(studies));
}

[[nodiscard]] inline MetaDataset read_studies_csv_file(const std::string& path,
                                                       SmdCorrection corr = SmdCorrection::Hedges) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file: " + path);
    return read_studies_csv(in, corr);
}

}  // namespace hetcv
