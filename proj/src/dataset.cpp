#include "obtree/dataset.hpp"

#include "obtree/errors.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

namespace obtree {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t begin = 0;
    while (true) {
        const auto comma = line.find(',', begin);
        cells.push_back(trim(line.substr(begin, comma - begin)));
        if (comma == std::string_view::npos) break;
        begin = comma + 1;
    }
    return cells;
}

template <typename T>
bool parse_number(std::string_view cell, T& value) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    return ec == std::errc() && ptr == cell.data() + cell.size() && !cell.empty();
}

template <typename T>
std::string shortest(T value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

}  // namespace

std::size_t Dataset::bytes() const {
    return static_cast<std::size_t>(values.size()) * sizeof(float) +
           (labels ? static_cast<std::size_t>(labels->size()) * sizeof(double) : 0);
}

std::string format_number(double value) { return shortest(value); }
std::string format_number(float value) { return shortest(value); }

Dataset parse_csv(std::istream& in, const std::string& source, std::optional<Eigen::Index> expected_features) {
    std::string line;
    std::size_t line_no = 0;
    const auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };

    if (!std::getline(in, line)) throw DataError(source + ": empty file, expected a header row");
    ++line_no;
    const auto header = split(line);
    Dataset data;
    std::optional<std::size_t> label_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == kLabelColumn) {
            if (label_col) throw DataError(where() + "duplicate label column");
            label_col = c;
        } else {
            data.feature_names.emplace_back(header[c]);
        }
    }
    const auto n_features = static_cast<Eigen::Index>(data.feature_names.size());
    if (expected_features && *expected_features != n_features)
        throw DataError(source + ": " + std::to_string(n_features) + " feature columns, expected " +
                        std::to_string(*expected_features));

    std::vector<float> values;
    std::vector<double> labels;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw DataError(where() + "ragged row with " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            bool ok;
            if (label_col && c == *label_col) {
                double v = 0;
                ok = parse_number(cells[c], v);
                labels.push_back(v);
            } else {
                float v = 0;
                ok = parse_number(cells[c], v);
                values.push_back(v);
            }
            if (!ok)
                throw DataError(where() + "column " + std::to_string(c + 1) + " ('" + std::string(header[c]) +
                                "'): malformed number '" + std::string(cells[c]) + "'");
        }
        ++rows;
    }

    data.values = Eigen::Map<const FeatureMatrix>(values.data(), rows, n_features);
    if (label_col) data.labels = Eigen::Map<const Vector<double>>(labels.data(), rows);
    return data;
}

Dataset ingest_csv(const std::filesystem::path& path, std::optional<Eigen::Index> expected_features) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file " + path.string());
    return parse_csv(in, path.string(), expected_features);
}

void write_csv(const Dataset& data, std::ostream& out) {
    std::string line;
    for (std::size_t c = 0; c < data.feature_names.size(); ++c) line += (c ? "," : "") + data.feature_names[c];
    if (data.labels) line += std::string(line.empty() ? "" : ",") + kLabelColumn;
    out << line << '\n';
    for (Eigen::Index r = 0; r < data.n_rows(); ++r) {
        line.clear();
        for (Eigen::Index c = 0; c < data.n_features(); ++c) line += (c ? "," : "") + format_number(data.values(r, c));
        if (data.labels) line += (line.empty() ? "" : ",") + format_number((*data.labels)(r));
        out << line << '\n';
    }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_csv(data, out);
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace obtree
