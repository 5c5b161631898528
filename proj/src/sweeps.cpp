#include "tabspec/sweeps.hpp"

#include "tabspec/analysis.hpp"
#include "tabspec/io.hpp"
#include "tabspec/preprocess.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace tabspec::analysis {

namespace {

model::DataSplit make_split(const Matrix& X, const Vector& y, const std::vector<std::size_t>& rows) {
    model::DataSplit s;
    s.X = preprocess::take_rows(X, rows);
    s.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) s.y[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
    return s;
}

graphs::FeatureGraph estimate(const Matrix& X, graphs::GraphMethod method) {
    switch (method) {
        case graphs::GraphMethod::pearson: return graphs::pearson_graph(X);
        case graphs::GraphMethod::spearman: return graphs::spearman_graph(X);
        case graphs::GraphMethod::chow_liu: return graphs::chow_liu_tree(X);
        case graphs::GraphMethod::notears: return graphs::notears(X).graph;
        default: break;
    }
    throw Error("graph method not supported for automatic estimation: " + graphs::to_string(method));
}

}  // namespace

PreparedData prepare_regression(const Matrix& X, const Vector& y, std::uint64_t split_seed, graphs::GraphMethod method,
                                std::optional<int> fixed_k) {
    if (X.rows() != y.size()) throw Error("prepare: row count mismatch");
    const auto split = preprocess::split_stratified(static_cast<std::size_t>(X.rows()), std::nullopt, {}, split_seed);

    Matrix Z(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        std::vector<double> train_values;
        for (auto r : split.train) train_values.push_back(X(static_cast<Eigen::Index>(r), c));
        const auto fitted = preprocess::standardize(train_values);
        std::vector<double> all(X.col(c).data(), X.col(c).data() + X.rows());
        const auto applied = preprocess::standardize(all, fitted.stats);
        for (Eigen::Index r = 0; r < X.rows(); ++r) Z(r, c) = applied.values[static_cast<std::size_t>(r)];
    }

    PreparedData out;
    out.train = make_split(Z, y, split.train);
    out.val = make_split(Z, y, split.val);
    out.test = make_split(Z, y, split.test);
    for (Eigen::Index c = 0; c < X.cols(); ++c) out.groups.push_back({static_cast<std::size_t>(c)});

    out.graph = estimate(out.train.X, method);
    const Matrix a_sym = spectral::symmetrize(out.graph.weights.cwiseAbs());
    const auto decomp = spectral::laplacian(a_sym, spectral::LaplacianKind::normalized);
    const std::vector<double> eig(decomp.eigenvalues.data(), decomp.eigenvalues.data() + decomp.eigenvalues.size());
    out.k = fixed_k ? *fixed_k : spectral::auto_select_k(eig).k_first;
    out.pe_base = spectral::build_pe(decomp, out.k, out.k, 1.0).base;
    return out;
}

PreparedData prepare_synthetic(const synthetic::SyntheticSpec& spec, graphs::GraphMethod method,
                               std::optional<int> fixed_k) {
    const auto data = synthetic::generate(spec);
    return prepare_regression(data.X, data.y, spec.seed, method, fixed_k);
}

std::vector<SweepSummary> summarize(const std::vector<SweepRecord>& records) {
    std::map<std::tuple<std::string, double, std::string>, std::vector<double>> buckets;
    std::vector<std::tuple<std::string, double, std::string>> order;
    for (const auto& r : records) {
        auto key = std::make_tuple(r.group, r.alpha, r.metric);
        if (!buckets.count(key)) order.push_back(key);
        buckets[key].push_back(r.value);
    }
    std::vector<SweepSummary> out;
    for (const auto& key : order) {
        const auto& v = buckets[key];
        SweepSummary s;
        std::tie(s.group, s.alpha, s.metric) = key;
        s.n = v.size();
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - s.mean) * (x - s.mean);
            s.half_width = 1.96 * std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
        }
        out.push_back(s);
    }
    return out;
}

double summary_mean(const std::vector<SweepSummary>& summary, const std::string& group, double alpha) {
    for (const auto& s : summary)
        if (s.group == group && s.alpha == alpha) return s.mean;
    throw Error("no summary entry for " + group + " at alpha " + io::format_double(alpha));
}

std::string records_to_csv(const std::vector<SweepRecord>& records) {
    std::string out = "group,alpha,seed,metric,value\n";
    for (const auto& r : records)
        out += io::format_csv_row({r.group, io::format_double(r.alpha), std::to_string(r.seed), r.metric,
                                   io::format_double(r.value)}) + "\n";
    return out;
}

std::vector<SweepRecord> records_from_csv(const std::string& text) {
    const auto doc = io::parse_csv(text);
    const std::vector<std::string> expected{"group", "alpha", "seed", "metric", "value"};
    if (doc.header != expected) throw Error("not a sweep record file");
    std::vector<SweepRecord> out;
    for (const auto& row : doc.rows)
        out.push_back({row[0], std::stod(row[1]), std::stoull(row[2]), row[3], std::stod(row[4])});
    return out;
}

std::string summary_to_csv(const std::vector<SweepSummary>& summary) {
    std::string out = "group,alpha,metric,mean,half_width,n\n";
    for (const auto& s : summary)
        out += io::format_csv_row({s.group, io::format_double(s.alpha), s.metric, io::format_double(s.mean),
                                   io::format_double(s.half_width), std::to_string(s.n)}) + "\n";
    return out;
}

namespace {

model::FTTransformer train_one(const PreparedData& data, model::ModelSpec spec, model::PEMode mode, double alpha,
                               std::uint64_t seed, model::TrainConfig cfg) {
    spec.pe_mode = mode;
    spec.alpha = alpha;
    spec.d_pe = static_cast<int>(data.pe_base.cols());
    spec.seed = seed;
    spec.task = model::Task::regression;
    cfg.seed = seed;
    model::FTTransformer m(spec, data.groups, static_cast<std::size_t>(data.train.X.cols()), data.pe_base);
    model::train(m, data.train, data.val, cfg);
    return m;
}

}  // namespace

std::vector<SweepRecord> rank_sweep(const PreparedData& data, const std::vector<model::PEMode>& modes,
                                    const std::vector<double>& alphas, const model::ModelSpec& spec,
                                    const model::TrainConfig& train_config, const std::vector<std::uint64_t>& seeds,
                                    const Progress& progress) {
    std::vector<SweepRecord> out;
    for (auto seed : seeds) {
        std::optional<double> zero_rank;
        for (auto mode : modes) {
            for (double alpha : alphas) {
                const bool zero = alpha == 0.0 || mode == model::PEMode::none;
                if (mode == model::PEMode::none && alpha != 0.0) continue;
                double r;
                if (zero && zero_rank) {
                    r = *zero_rank;
                } else {
                    const auto m = train_one(data, spec, mode, alpha, seed, train_config);
                    r = effective_rank(m.cls_embeddings(data.test.X));
                    if (zero) zero_rank = r;
                }
                out.push_back({model::to_string(mode), alpha, seed, "effective_rank", r});
                if (progress)
                    progress("rank " + model::to_string(mode) + " alpha=" + io::format_double(alpha) +
                             " seed=" + std::to_string(seed) + " -> " + io::format_double(r));
            }
        }
    }
    return out;
}

std::vector<SweepRecord> alpha_rmse_sweep(const synthetic::SyntheticSpec& base, const std::vector<int>& ks,
                                          const std::vector<double>& alphas, const model::ModelSpec& spec,
                                          const model::TrainConfig& train_config,
                                          const std::vector<std::uint64_t>& seeds, const Progress& progress) {
    std::vector<SweepRecord> out;
    for (int k : ks) {
        const std::string regime = synthetic::to_string(synthetic::structure_regime(base.d, k));
        for (auto seed : seeds) {
            synthetic::SyntheticSpec s = base;
            s.k = k;
            s.seed = seed;
            const PreparedData data = prepare_synthetic(s);
            for (double alpha : alphas) {
                const auto m = train_one(data, spec, alpha == 0.0 ? model::PEMode::none : model::PEMode::fixed, alpha,
                                         seed, train_config);
                const double value = model::evaluate(m, data.test);
                out.push_back({regime, alpha, seed, "rmse", value});
                if (progress)
                    progress("rmse k=" + std::to_string(k) + " alpha=" + io::format_double(alpha) +
                             " seed=" + std::to_string(seed) + " -> " + io::format_double(value));
            }
        }
    }
    return out;
}

model::ModelSpec desk_model_spec() {
    model::ModelSpec spec;
    spec.d_token = 32;
    spec.n_layers = 1;
    spec.n_heads = 1;
    return spec;
}

model::TrainConfig desk_train_config() {
    model::TrainConfig config;
    config.batch_size = 64;
    config.optimizer.lr = 1e-4;
    return config;
}

}  // namespace tabspec::analysis
