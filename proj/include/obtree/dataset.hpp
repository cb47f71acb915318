#pragma once

#include "obtree/dense.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace obtree {

inline constexpr const char* kLabelColumn = "label";

/// Sample-major float features plus an optional label column.
struct Dataset {
    std::vector<std::string> feature_names;
    FeatureMatrix values;
    std::optional<Vector<double>> labels;

    Eigen::Index n_rows() const { return values.rows(); }
    Eigen::Index n_features() const { return values.cols(); }
    std::size_t bytes() const;
};

/// Reads a CSV with a header row. A column named "label" becomes the label
/// vector; every other column is a feature. When `expected_features` is
/// set, a different feature count is an error. Malformed cells and ragged
/// rows throw DataError carrying the 1-based line number.
Dataset ingest_csv(const std::filesystem::path& path, std::optional<Eigen::Index> expected_features = {});
Dataset parse_csv(std::istream& in, const std::string& source, std::optional<Eigen::Index> expected_features = {});

/// Writes features then the label column, numbers in shortest round-trip
/// form.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

std::string format_number(double value);
std::string format_number(float value);

}  // namespace obtree
