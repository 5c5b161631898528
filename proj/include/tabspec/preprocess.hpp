#pragma once

#include "tabspec/common.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tabspec::preprocess {

enum class ColumnKind { categorical, continuous };

/// A raw table cell: missing, numeric or text.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawColumn {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<Cell> values;
};

struct RawTable {
    std::vector<RawColumn> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().values.size(); }
    const RawColumn& column(const std::string& name) const;
    // Equal lengths, m >= 1, continuous columns numeric-or-missing.
    void validate() const;
};

struct NodeMeta {
    std::size_t original_feature = 0;
    std::optional<std::string> category_label;
};

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
    bool constant = false;
};

struct FeatureTable {
    Matrix data;                                      // m x d
    std::vector<NodeMeta> node_meta;                  // one per column
    Groups groups;                                    // one per original feature
    std::vector<std::string> feature_names;           // one per original feature
    std::map<std::size_t, ColumnStats> standardization_stats;  // keyed by column

    std::size_t n_columns() const { return static_cast<std::size_t>(data.cols()); }
    std::size_t n_features() const { return groups.size(); }
    std::vector<std::string> column_names() const;
};

inline constexpr std::size_t kMaxCategories = 10;
inline constexpr const char* kOtherLabel = "Other";
inline constexpr const char* kMissingLabel = "Missing";

struct OneHotEncoding {
    std::vector<std::string> labels;  // column labels in output order
    Matrix columns;                   // m x labels.size(), binary
    bool all_missing = false;         // warning flag
};

// Categories ordered by frequency (desc) then label; top 9 + Other beyond 10
// distinct values; Missing column iff any entry is missing.
OneHotEncoding one_hot_encode(const RawColumn& column);

// Encodes against a previously fitted label set (val/test path, other tables).
Matrix one_hot_apply(const RawColumn& column, const std::vector<std::string>& labels);

struct Standardized {
    Vector values;
    ColumnStats stats;
};

// Population-std standardization; fits stats when none are supplied.
Standardized standardize(std::span<const double> column, std::optional<ColumnStats> stats = std::nullopt);

// Drops columns with more than `max_missing_fraction` missing, then rows
// with a missing continuous entry.
RawTable handle_missing(const RawTable& table, double max_missing_fraction = 0.7);

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Largest-remainder allocation per class; plain shuffled split without labels.
SplitIndices split_stratified(std::size_t n_rows, const std::optional<std::vector<int>>& labels,
                              SplitRatios ratios, std::uint64_t seed);

// One-hot encodes categoricals and standardizes continuous columns with
// stats fitted on `fit_rows` (all rows when empty).
FeatureTable encode(const RawTable& table, std::span<const std::size_t> fit_rows = {});

// Numeric-parse inference: a column is continuous iff every non-missing
// entry parses as a number. Empty field and "NA" are missing.
RawTable table_from_csv(const std::filesystem::path& path,
                        const std::map<std::string, ColumnKind>& declared_kinds = {});

// Separates a target column; returns the remaining feature table.
RawTable drop_column(const RawTable& table, const std::string& name);

// Class ids in order of sorted distinct labels.
struct ClassLabels {
    std::vector<int> ids;
    std::vector<std::string> names;
};
ClassLabels class_labels(const RawColumn& column);
std::vector<double> numeric_target(const RawColumn& column);

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows);

// data.csv + meta.json
void save_feature_table(const FeatureTable& table, const std::filesystem::path& data_csv,
                        const std::filesystem::path& meta_json);
FeatureTable load_feature_table(const std::filesystem::path& data_csv, const std::filesystem::path& meta_json);

}  // namespace tabspec::preprocess
