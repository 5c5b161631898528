#include "tabspec/preprocess.hpp"

#include "tabspec/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace tabspec::preprocess {

const RawColumn& RawTable::column(const std::string& name) const {
    for (const auto& c : columns)
        if (c.name == name) return c;
    throw Error("no column named '" + name + "'");
}

void RawTable::validate() const {
    if (columns.empty()) throw Error("table has no columns");
    const std::size_t m = columns.front().values.size();
    if (m == 0) throw Error("no data");
    for (const auto& c : columns) {
        if (c.values.size() != m) throw Error("column '" + c.name + "' has inconsistent length");
        if (c.kind == ColumnKind::continuous) {
            for (const auto& v : c.values)
                if (std::holds_alternative<std::string>(v))
                    throw Error("continuous column '" + c.name + "' contains text");
        }
    }
}

std::vector<std::string> FeatureTable::column_names() const {
    std::vector<std::string> names;
    names.reserve(node_meta.size());
    for (const auto& meta : node_meta) {
        std::string name = feature_names.at(meta.original_feature);
        if (meta.category_label) name += "=" + *meta.category_label;
        names.push_back(std::move(name));
    }
    return names;
}

static std::string cell_label(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    return io::format_double(std::get<double>(c));
}

OneHotEncoding one_hot_encode(const RawColumn& column) {
    if (column.kind != ColumnKind::categorical) throw Error("one_hot_encode: column '" + column.name + "' is not categorical");
    if (column.values.empty()) throw Error("no data");

    std::map<std::string, std::size_t> freq;
    bool has_missing = false;
    for (const auto& v : column.values) {
        if (is_missing(v))
            has_missing = true;
        else
            ++freq[cell_label(v)];
    }

    OneHotEncoding enc;
    if (freq.empty()) {
        enc.all_missing = true;
        enc.labels = {kMissingLabel};
        enc.columns = Matrix::Ones(static_cast<Eigen::Index>(column.values.size()), 1);
        return enc;
    }

    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });  // map order breaks ties

    const bool capped = ranked.size() > kMaxCategories;
    const std::size_t kept = capped ? kMaxCategories - 1 : ranked.size();
    for (std::size_t i = 0; i < kept; ++i) enc.labels.push_back(ranked[i].first);
    if (capped) enc.labels.emplace_back(kOtherLabel);
    if (has_missing) enc.labels.emplace_back(kMissingLabel);

    enc.columns = one_hot_apply(column, enc.labels);
    return enc;
}

Matrix one_hot_apply(const RawColumn& column, const std::vector<std::string>& labels) {
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], static_cast<Eigen::Index>(i));
    const auto other = std::find(labels.begin(), labels.end(), kOtherLabel);
    const auto missing = std::find(labels.begin(), labels.end(), kMissingLabel);

    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(column.values.size()), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t r = 0; r < column.values.size(); ++r) {
        const auto& v = column.values[r];
        Eigen::Index col = -1;
        if (is_missing(v)) {
            if (missing == labels.end()) throw Error("column '" + column.name + "': missing value without a Missing category");
            col = missing - labels.begin();
        } else if (auto it = index.find(cell_label(v)); it != index.end()) {
            col = it->second;
        } else if (other != labels.end()) {
            col = other - labels.begin();
        } else {
            throw Error("column '" + column.name + "': unseen category '" + cell_label(v) + "'");
        }
        out(static_cast<Eigen::Index>(r), col) = 1.0;
    }
    return out;
}

Standardized standardize(std::span<const double> column, std::optional<ColumnStats> stats) {
    Standardized out;
    if (stats) {
        out.stats = *stats;
    } else {
        const double m = static_cast<double>(column.size());
        if (column.empty()) throw Error("no data");
        const double mean = std::accumulate(column.begin(), column.end(), 0.0) / m;
        double ss = 0.0;
        for (double x : column) ss += (x - mean) * (x - mean);
        out.stats.mean = mean;
        out.stats.std = std::sqrt(ss / m);
        out.stats.constant = out.stats.std < 1e-12;
    }
    out.values.resize(static_cast<Eigen::Index>(column.size()));
    for (std::size_t i = 0; i < column.size(); ++i) {
        out.values[static_cast<Eigen::Index>(i)] =
            out.stats.constant ? 0.0 : (column[i] - out.stats.mean) / out.stats.std;
    }
    return out;
}

namespace {

RawTable drop_sparse_columns(const RawTable& table, double max_missing_fraction) {
    RawTable out;
    for (const auto& c : table.columns) {
        const auto missing = std::count_if(c.values.begin(), c.values.end(), is_missing);
        const double frac = c.values.empty() ? 0.0 : static_cast<double>(missing) / static_cast<double>(c.values.size());
        if (frac <= max_missing_fraction) out.columns.push_back(c);
    }
    return out;
}

RawTable drop_incomplete_rows(const RawTable& table) {
    const std::size_t m = table.rows();
    std::vector<bool> keep(m, true);
    for (const auto& c : table.columns) {
        if (c.kind != ColumnKind::continuous) continue;
        for (std::size_t r = 0; r < m; ++r)
            if (is_missing(c.values[r])) keep[r] = false;
    }
    RawTable out;
    for (const auto& c : table.columns) {
        RawColumn nc{c.name, c.kind, {}};
        for (std::size_t r = 0; r < m; ++r)
            if (keep[r]) nc.values.push_back(c.values[r]);
        out.columns.push_back(std::move(nc));
    }
    return out;
}

}  // namespace

RawTable handle_missing(const RawTable& table, double max_missing_fraction) {
    // Row deletion can push a surviving column over the threshold, so repeat
    // until nothing changes; this keeps the operation idempotent.
    RawTable current = table;
    while (true) {
        RawTable next = drop_incomplete_rows(drop_sparse_columns(current, max_missing_fraction));
        if (next.columns.empty() || next.rows() == 0) throw Error("all rows deleted");
        if (next.columns.size() == current.columns.size() && next.rows() == current.rows()) return next;
        current = std::move(next);
    }
}

static std::array<std::size_t, 3> largest_remainder(std::size_t n, const SplitRatios& r) {
    const std::array<double, 3> ratios{r.train, r.val, r.test};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double exact = static_cast<double>(n) * ratios[s];
        counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[s] = exact - static_cast<double>(counts[s]);
        assigned += counts[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
    return counts;
}

SplitIndices split_stratified(std::size_t n_rows, const std::optional<std::vector<int>>& labels, SplitRatios ratios,
                              std::uint64_t seed) {
    if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw Error("split ratios must be positive and sum to 1");
    }
    std::mt19937_64 rng(seed);
    SplitIndices out;

    auto assign = [&](std::vector<std::size_t> idx) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto counts = largest_remainder(idx.size(), ratios);
        auto it = idx.begin();
        out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(counts[0]));
        it += static_cast<std::ptrdiff_t>(counts[0]);
        out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(counts[1]));
        it += static_cast<std::ptrdiff_t>(counts[1]);
        out.test.insert(out.test.end(), it, idx.end());
    };

    if (!labels) {
        std::vector<std::size_t> idx(n_rows);
        std::iota(idx.begin(), idx.end(), 0);
        assign(std::move(idx));
        return out;
    }
    if (labels->size() != n_rows) throw Error("label count does not match row count");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n_rows; ++i) by_class[(*labels)[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < 3) throw Error("class too small to stratify");
    for (auto& [cls, idx] : by_class) assign(idx);
    return out;
}

FeatureTable encode(const RawTable& table, std::span<const std::size_t> fit_rows) {
    table.validate();
    const std::size_t m = table.rows();
    std::vector<Matrix> blocks;
    FeatureTable out;
    std::size_t next_col = 0;

    for (std::size_t f = 0; f < table.columns.size(); ++f) {
        const auto& col = table.columns[f];
        out.feature_names.push_back(col.name);
        std::vector<std::size_t> group;
        if (col.kind == ColumnKind::continuous) {
            std::vector<double> values(m);
            for (std::size_t r = 0; r < m; ++r) {
                if (is_missing(col.values[r])) throw Error("column '" + col.name + "' has missing values; run handle_missing first");
                values[r] = std::get<double>(col.values[r]);
            }
            std::optional<ColumnStats> stats;
            if (!fit_rows.empty()) {
                std::vector<double> fit;
                fit.reserve(fit_rows.size());
                for (auto r : fit_rows) fit.push_back(values.at(r));
                stats = standardize(fit).stats;
            }
            auto s = standardize(values, stats);
            blocks.emplace_back(s.values);
            out.standardization_stats[next_col] = s.stats;
            out.node_meta.push_back({f, std::nullopt});
            group.push_back(next_col++);
        } else {
            auto enc = one_hot_encode(col);
            blocks.push_back(enc.columns);
            for (const auto& label : enc.labels) {
                out.node_meta.push_back({f, label});
                group.push_back(next_col++);
            }
        }
        out.groups.push_back(std::move(group));
    }

    out.data.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(next_col));
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.data.middleCols(c, b.cols()) = b;
        c += b.cols();
    }
    return out;
}

static bool parse_number(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && *(e - 1) == ' ') --e;
    if (b == e) return false;
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

RawTable table_from_csv(const std::filesystem::path& path, const std::map<std::string, ColumnKind>& declared_kinds) {
    const auto doc = io::read_csv(path);
    RawTable table;
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
        RawColumn col;
        col.name = doc.header[c];
        auto declared = declared_kinds.find(col.name);
        bool numeric = true;
        std::vector<Cell> cells;
        cells.reserve(doc.rows.size());
        for (const auto& row : doc.rows) {
            const std::string& s = row[c];
            if (s.empty() || s == "NA") {
                cells.emplace_back(std::monostate{});
                continue;
            }
            double v = 0.0;
            if (parse_number(s, v)) {
                cells.emplace_back(v);
            } else {
                numeric = false;
                cells.emplace_back(s);
            }
        }
        col.kind = declared != declared_kinds.end() ? declared->second
                                                    : (numeric ? ColumnKind::continuous : ColumnKind::categorical);
        if (col.kind == ColumnKind::continuous && !numeric)
            throw Error("column '" + col.name + "' declared continuous but has non-numeric entries");
        if (col.kind == ColumnKind::categorical) {
            // keep the literal text so labels round-trip as written
            for (std::size_t r = 0; r < cells.size(); ++r)
                if (!is_missing(cells[r])) cells[r] = doc.rows[r][c];
        }
        col.values = std::move(cells);
        table.columns.push_back(std::move(col));
    }
    return table;
}

RawTable drop_column(const RawTable& table, const std::string& name) {
    RawTable out;
    bool found = false;
    for (const auto& c : table.columns) {
        if (c.name == name)
            found = true;
        else
            out.columns.push_back(c);
    }
    if (!found) throw Error("no column named '" + name + "'");
    return out;
}

ClassLabels class_labels(const RawColumn& column) {
    std::set<std::string> distinct;
    for (const auto& v : column.values) {
        if (is_missing(v)) throw Error("target column '" + column.name + "' has missing labels");
        distinct.insert(cell_label(v));
    }
    ClassLabels out;
    out.names.assign(distinct.begin(), distinct.end());
    std::map<std::string, int> id;
    for (std::size_t i = 0; i < out.names.size(); ++i) id[out.names[i]] = static_cast<int>(i);
    for (const auto& v : column.values) out.ids.push_back(id.at(cell_label(v)));
    return out;
}

std::vector<double> numeric_target(const RawColumn& column) {
    std::vector<double> out;
    out.reserve(column.values.size());
    for (const auto& v : column.values) {
        const auto* d = std::get_if<double>(&v);
        if (!d) throw Error("regression target '" + column.name + "' must be numeric and complete");
        out.push_back(*d);
    }
    return out;
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

void save_feature_table(const FeatureTable& table, const std::filesystem::path& data_csv,
                        const std::filesystem::path& meta_json) {
    io::write_atomic(data_csv, io::matrix_to_csv(table.data, table.column_names()));
    nlohmann::json meta;
    meta["feature_names"] = table.feature_names;
    meta["groups"] = table.groups;
    auto& nodes = meta["node_meta"] = nlohmann::json::array();
    for (const auto& n : table.node_meta) {
        nlohmann::json j{{"original_feature", n.original_feature}};
        j["category_label"] = n.category_label ? nlohmann::json(*n.category_label) : nlohmann::json(nullptr);
        nodes.push_back(j);
    }
    auto& stats = meta["standardization_stats"] = nlohmann::json::object();
    for (const auto& [col, s] : table.standardization_stats)
        stats[std::to_string(col)] = {{"mean", s.mean}, {"std", s.std}, {"constant", s.constant}};
    io::write_atomic(meta_json, meta.dump(2) + "\n");
}

FeatureTable load_feature_table(const std::filesystem::path& data_csv, const std::filesystem::path& meta_json) {
    const auto doc = io::read_csv(data_csv);
    FeatureTable t;
    t.data.resize(static_cast<Eigen::Index>(doc.rows.size()), static_cast<Eigen::Index>(doc.header.size()));
    for (std::size_t r = 0; r < doc.rows.size(); ++r)
        for (std::size_t c = 0; c < doc.header.size(); ++c) {
            double v = 0.0;
            if (!parse_number(doc.rows[r][c], v)) throw Error("non-numeric entry in " + data_csv.string());
            t.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    const auto meta = nlohmann::json::parse(io::read_text(meta_json));
    t.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    t.groups = meta.at("groups").get<Groups>();
    for (const auto& n : meta.at("node_meta")) {
        NodeMeta nm;
        nm.original_feature = n.at("original_feature").get<std::size_t>();
        if (!n.at("category_label").is_null()) nm.category_label = n.at("category_label").get<std::string>();
        t.node_meta.push_back(nm);
    }
    for (const auto& [key, s] : meta.at("standardization_stats").items())
        t.standardization_stats[std::stoul(key)] = {s.at("mean").get<double>(), s.at("std").get<double>(),
                                                   s.at("constant").get<bool>()};
    if (t.node_meta.size() != t.n_columns()) throw Error("metadata does not match data width");
    return t;
}

}  // namespace tabspec::preprocess
