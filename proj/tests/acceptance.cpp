// Acceptance checks. Each criterion prints one PASS/FAIL line; `--only N`
// runs a single criterion.

#include "oracles.hpp"
#include "tabspec/analysis.hpp"
#include "tabspec/graphs.hpp"
#include "tabspec/model/metrics.hpp"
#include "tabspec/model/transformer.hpp"
#include "tabspec/spectral.hpp"
#include "tabspec/sweeps.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace tabspec;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

void progress(const std::string& s) { std::cerr << "  " << s << "\n"; }

// 1
Outcome effective_rank_oracle() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> rows(1, 64), cols(1, 192), lowrank(1, 8);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = normal(rng);
        return m;
    };
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int r = rows(rng), c = cols(rng);
        Matrix M = gaussian(r, c);
        if (t % 4 == 2) {
            const int k = lowrank(rng);
            M = gaussian(r, k) * gaussian(k, c);
        }
        if (t % 7 == 5) M.col(0) *= 1e3;
        worst = std::max(worst, std::abs(analysis::effective_rank(M) - oracle::effective_rank(M)));
    }
    return {worst <= 1e-9, "max |diff| = " + fmt(worst, 3) + " over 200 matrices"};
}

std::vector<double> bound_alphas() {
    std::vector<double> a;
    for (int i = 0; i <= 10; ++i) a.push_back(i);
    for (double extra : {20.0, 25.0, 30.0}) a.push_back(extra);
    return a;
}

// 2
Outcome first_bound() {
    const auto rows = analysis::verify_bounds(analysis::BoundKind::thm1, analysis::ConstructedSetting{}, bound_alphas(), 500, 7);
    bool ok = true;
    int asymptotic = 0;
    std::string worst;
    for (const auto& r : rows) {
        if (r.alpha <= 10 && !(r.measured <= r.bound + 1e-6)) {
            ok = false;
            worst += " bound violated at alpha=" + fmt(r.alpha);
        }
        if (r.C >= 1e4) {
            ++asymptotic;
            const double rel = std::abs(r.measured - r.approx) / r.approx;
            if (rel > 0.05) {
                ok = false;
                worst += " asymptotic off by " + fmt(100 * rel, 3) + "% at alpha=" + fmt(r.alpha);
            }
            worst += " [alpha=" + fmt(r.alpha) + " C=" + fmt(r.C, 5) + " rank=" + fmt(r.measured) + " vs " + fmt(r.approx) + "]";
        }
    }
    if (asymptotic == 0) {
        ok = false;
        worst += " no alpha reaches C >= 1e4";
    }
    return {ok, "bound holds for alpha 0..10;" + worst};
}

// 3
Outcome shared_pe_bound() {
    const auto alphas = bound_alphas();
    const auto shared = analysis::verify_bounds(analysis::BoundKind::thm2b, analysis::ConstructedSetting{}, alphas, 500, 7);
    const auto random = analysis::verify_bounds(analysis::BoundKind::thm2a, analysis::ConstructedSetting{}, alphas, 500, 7);
    bool ok = true;
    int asymptotic = 0;
    std::string detail;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto& s = shared[i];
        if (s.C >= 100) {
            ++asymptotic;
            const double rel = std::abs(s.measured - s.approx) / s.approx;
            if (rel > 0.10) ok = false;
            detail += " [alpha=" + fmt(s.alpha) + " rank=" + fmt(s.measured) + " vs " + fmt(s.approx) + "]";
        }
        if (alphas[i] >= 1 && !(s.measured <= random[i].measured)) {
            ok = false;
            detail += " shared > random at alpha=" + fmt(alphas[i]);
        }
    }
    if (asymptotic == 0) ok = false;
    return {ok, "shared <= random for alpha >= 1;" + detail};
}

// nonincreasing with at most one inversion no larger than 2% of the range
bool nearly_nonincreasing(const std::vector<double>& v, std::string& why) {
    const double range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    int inversions = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double rise = v[i] - v[i - 1];
        if (rise <= 0) continue;
        ++inversions;
        if (rise > 0.02 * range) {
            why += " rise " + fmt(rise, 4) + " > 2% of range " + fmt(range, 4);
            return false;
        }
    }
    if (inversions > 1) why += " " + std::to_string(inversions) + " inversions";
    return inversions <= 1;
}

// 4
Outcome rank_ordering() {
    synthetic::SyntheticSpec spec;
    spec.d = 30;
    spec.k = 4;
    spec.n = 2000;
    const auto data = analysis::prepare_synthetic(spec);
    const std::vector<double> alphas{0, 1, 2, 5, 10, 30};
    const auto records =
        analysis::rank_sweep(data, {model::PEMode::fixed, model::PEMode::random}, alphas, analysis::desk_model_spec(),
                             analysis::desk_train_config(), {1, 2, 3, 4, 5}, progress);
    const auto summary = analysis::summarize(records);
    bool ok = true;
    std::string detail;
    for (const char* mode : {"fixed", "random"}) {
        std::vector<double> means;
        detail += std::string(" ") + mode + ":";
        for (double a : alphas) {
            means.push_back(analysis::summary_mean(summary, mode, a));
            detail += " " + fmt(means.back(), 4);
        }
        std::string why;
        if (!nearly_nonincreasing(means, why)) {
            ok = false;
            detail += " (not nonincreasing:" + why + ")";
        }
    }
    for (double a : {5.0, 10.0})
        if (!(analysis::summary_mean(summary, "fixed", a) < analysis::summary_mean(summary, "random", a))) {
            ok = false;
            detail += " fixed >= random at alpha=" + fmt(a);
        }
    return {ok, "mean rank by alpha {0,1,2,5,10,30};" + detail};
}

// 5
Outcome structure_regimes() {
    synthetic::SyntheticSpec base;
    base.d = 30;
    base.n = 2000;
    const std::vector<double> alphas{0, 0.5, 1, 3, 10};
    const auto records = analysis::alpha_rmse_sweep(base, {4, 15, 25}, alphas, analysis::desk_model_spec(),
                                                    analysis::desk_train_config(), {1, 2, 3, 4, 5}, progress);
    const auto summary = analysis::summarize(records);
    std::map<std::string, double> improvement, best;
    std::string detail;
    for (const char* g : {"high", "moderate", "low"}) {
        const double b = analysis::summary_mean(summary, g, 0);
        double m = std::numeric_limits<double>::infinity();
        for (double a : {0.5, 1.0, 3.0}) m = std::min(m, analysis::summary_mean(summary, g, a));
        best[g] = m;
        improvement[g] = model::improvement_percent(b, m, true);
        detail += std::string(" ") + g + " " + fmt(improvement[g], 4) + "%";
    }
    const double high10 = analysis::summary_mean(summary, "high", 10);
    detail += "; high alpha=10 rmse " + fmt(high10, 5) + " vs best " + fmt(best["high"], 5);
    const bool a = improvement["high"] >= 3.0;
    const bool b = improvement["high"] > improvement["low"];
    const bool c = high10 > best["high"];
    if (!a) detail += " [high improvement < 3%]";
    if (!b) detail += " [high improvement does not exceed low]";
    if (!c) detail += " [alpha=10 not worse than best]";
    return {a && b && c, "improvement of best alpha in {0.5,1,3} over alpha=0:" + detail};
}

// Plug-in MI with the documented binning, written independently.
double oracle_mi(const Vector& a, const Vector& b) {
    auto codes = [](const Vector& x, int& bins) {
        std::set<double> distinct(x.data(), x.data() + x.size());
        std::vector<int> out(static_cast<std::size_t>(x.size()));
        if (distinct.size() <= 2) {
            bins = static_cast<int>(distinct.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i] == *distinct.begin() ? 0 : 1;
            return out;
        }
        bins = std::min(32, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.size())))));
        const double lo = x.minCoeff(), w = (x.maxCoeff() - lo) / bins;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            out[i] = std::min(bins - 1, std::max(0, static_cast<int>(std::floor((x[i] - lo) / w))));
        return out;
    };
    int ba = 0, bb = 0;
    const auto ca = codes(a, ba), cb = codes(b, bb);
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ma, mb;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < ca.size(); ++i) {
        joint[{ca[i], cb[i]}] += 1;
        ma[ca[i]] += 1;
        mb[cb[i]] += 1;
    }
    double mi = 0;
    for (const auto& [k, c] : joint) mi += c / n * std::log(c * n / (ma[k.first] * mb[k.second]));
    return std::max(0.0, mi);
}

// 6
Outcome chow_liu_exact() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> dims(2, 6), rows(20, 300), levels(2, 4);
    std::normal_distribution<double> normal(0, 1);
    int mismatches = 0, mi_mismatches = 0, tied = 0;
    for (int t = 0; t < 100; ++t) {
        const int d = dims(rng), m = rows(rng);
        const bool discrete = t % 3 == 0;
        const int lv = levels(rng);
        Matrix X(m, d);
        for (int i = 0; i < m; ++i) {
            const double shared = normal(rng);
            for (int j = 0; j < d; ++j) {
                const double v = 0.7 * shared * (j % 2 ? 1 : -1) + normal(rng);
                X(i, j) = discrete ? std::floor(std::clamp(v + lv / 2.0, 0.0, lv - 1.0)) : v;
            }
        }
        const Matrix mi = graphs::mutual_information_matrix(X);
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j)
                if (std::abs(mi(i, j) - oracle_mi(X.col(i), X.col(j))) > 1e-12) ++mi_mismatches;
        std::set<double> weights;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) weights.insert(mi(i, j));
        if (weights.size() < static_cast<std::size_t>(d * (d - 1) / 2)) ++tied;

        const auto g = graphs::chow_liu_tree(X);
        std::vector<oracle::Edge> edges;
        std::istringstream list(g.params.at("edges"));
        for (std::string item; std::getline(list, item, ';');) {
            const auto dash = item.find('-');
            edges.emplace_back(std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1)));
        }
        std::sort(edges.begin(), edges.end());
        if (edges != oracle::max_spanning_tree(mi)) ++mismatches;
    }
    return {mismatches == 0 && mi_mismatches == 0,
            std::to_string(mismatches) + " tree mismatches, " + std::to_string(mi_mismatches) +
                " MI mismatches over 100 instances (" + std::to_string(tied) + " with tied weights)"};
}

// 7
Outcome notears_recovery() {
    graphs::NotearsOptions opts;
    opts.lambda1 = 0.1;
    opts.w_threshold = 0.3;
    int chain_ok = 0, empty_ok = 0;
    bool acyclic = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0, 1);
        Matrix chain(5000, 2), indep(5000, 2);
        for (int i = 0; i < 5000; ++i) {
            chain(i, 0) = normal(rng);
            chain(i, 1) = 0.9 * chain(i, 0) + normal(rng);
            indep(i, 0) = normal(rng);
            indep(i, 1) = normal(rng);
        }
        const auto a = graphs::notears(chain, opts);
        const auto b = graphs::notears(indep, opts);
        if (a.graph.weights(0, 1) > 0 && a.graph.weights(1, 0) == 0) ++chain_ok;
        if (b.graph.weights.isZero()) ++empty_ok;
        acyclic = acyclic && graphs::is_acyclic(a.graph.weights) && graphs::is_acyclic(b.graph.weights);
    }
    return {chain_ok >= 4 && empty_ok >= 4 && acyclic,
            "chain recovered " + std::to_string(chain_ok) + "/5, independent empty " + std::to_string(empty_ok) +
                "/5, acyclic " + (acyclic ? "always" : "NOT always")};
}

// 8
Outcome diagnostics_exact() {
    auto graph = [](Matrix W) {
        graphs::FeatureGraph g;
        g.weights = std::move(W);
        return g;
    };
    double worst_complete = 0, worst_kn = 0;
    for (int n = 3; n <= 10; ++n) {
        const Matrix K = Matrix::Ones(n, n) - Matrix::Identity(n, n);
        worst_complete = std::max(worst_complete, std::abs(graphs::graph_entropy(graph(0.3 * K)).entropy - 1.0));
        worst_kn = std::max(worst_kn, std::abs(graphs::fiedler_value(graph(K)) - n));
    }
    Matrix P = Matrix::Zero(3, 3);
    P(0, 1) = P(1, 0) = P(1, 2) = P(2, 1) = 1;
    const double path = std::abs(graphs::graph_entropy(graph(P)).entropy - 1.0 / 3.0);
    Matrix D = Matrix::Zero(5, 5);
    D(0, 1) = D(1, 0) = D(2, 3) = D(3, 2) = D(3, 4) = D(4, 3) = 1;
    const double disc = std::abs(graphs::fiedler_value(graph(D)));
    const bool ok = worst_complete <= 1e-12 && path <= 1e-12 && disc <= 1e-9 && worst_kn <= 1e-8;
    return {ok, "complete entropy err " + fmt(worst_complete, 3) + ", path err " + fmt(path, 3) +
                    ", disconnected fiedler " + fmt(disc, 3) + ", K_n fiedler err " + fmt(worst_kn, 3)};
}

// 9
Outcome auto_k_contract() {
    std::mt19937_64 rng(909);
    std::uniform_int_distribution<int> len(1, 60), shape(0, 3);
    std::uniform_real_distribution<double> u(0, 2);
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> ev(static_cast<std::size_t>(len(rng)));
        const int s = shape(rng);
        for (auto& v : ev) v = s == 0 ? u(rng) : s == 1 ? 0.75 * u(rng) / 2 : s == 2 ? 1.25 + 0.75 * u(rng) / 2 : std::round(u(rng) * 4) / 4;
        std::sort(ev.begin(), ev.end());
        ev[0] = 0;
        const auto k = spectral::auto_select_k(ev);
        if (!(k.k_first == k.k_last && k.k_first >= 2 && k.k_first <= 10)) ++bad;
    }
    const std::vector<double> traced{0, 0.1, 0.2, 1.0, 1.8, 1.9};
    const auto a = spectral::auto_select_k(traced);
    const std::vector<double> window{0, 0.8, 0.9, 1.0, 1.1, 1.2};
    const auto b = spectral::auto_select_k(window);
    const bool examples = a.low_count == 2 && a.k_first == 2 && a.k_last == 2 && b.low_count == 0 && b.k_first == 2 &&
                          b.k_last == 2;
    return {bad == 0 && examples, std::to_string(bad) + " contract violations in 1000 spectra; hand-traced examples " +
                                      (examples ? "reproduce" : "DIFFER")};
}

// 10
Outcome parameter_parity() {
    struct Case {
        int d_token, d_pe, layers, heads, features;
        model::Task task;
    };
    const std::vector<Case> cases{{16, 4, 1, 1, 5, model::Task::regression},
                                  {32, 8, 2, 4, 12, model::Task::classification},
                                  {24, 6, 3, 2, 7, model::Task::regression}};
    std::string detail;
    bool ok = true;
    for (const auto& c : cases) {
        Groups groups;
        for (int f = 0; f < c.features; ++f) groups.push_back({static_cast<std::size_t>(f)});
        std::map<model::PEMode, Eigen::Index> count;
        for (auto mode : {model::PEMode::none, model::PEMode::fixed, model::PEMode::random, model::PEMode::learnable}) {
            model::ModelSpec s;
            s.d_token = c.d_token;
            s.d_pe = c.d_pe;
            s.n_layers = c.layers;
            s.n_heads = c.heads;
            s.task = c.task;
            s.n_classes = c.task == model::Task::classification ? 3 : 1;
            s.pe_mode = mode;
            model::FTTransformer m(s, groups, groups.size(), Matrix::Ones(c.features, c.d_pe));
            count[mode] = m.parameter_count();
        }
        const auto base = count[model::PEMode::none];
        ok = ok && count[model::PEMode::fixed] == base && count[model::PEMode::random] == base &&
             count[model::PEMode::learnable] == base + c.features * c.d_pe;
        detail += " " + std::to_string(base) + "/" + std::to_string(count[model::PEMode::learnable]);
    }
    return {ok, "none=fixed=random / learnable counts:" + detail};
}

// 11
Outcome gradient_check() {
    std::mt19937_64 rng(1111);
    std::normal_distribution<double> normal(0, 1);
    Matrix X(4, 3), pe(3, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < pe.size(); ++i) pe.data()[i] = normal(rng);
    double worst = 0;
    std::string worst_name;
    std::size_t groups_checked = 0;
    for (auto mode : {model::PEMode::fixed, model::PEMode::learnable}) {
        for (auto task : {model::Task::regression, model::Task::classification}) {
            model::ModelSpec s;
            s.d_token = 8;
            s.d_pe = 2;
            s.n_layers = 2;
            s.n_heads = 2;
            s.attention_dropout = s.ffn_dropout = s.residual_dropout = 0;
            s.pe_mode = mode;
            s.alpha = 1.3;
            s.task = task;
            s.n_classes = task == model::Task::classification ? 3 : 1;
            model::FTTransformer m(s, {{0}, {1}, {2}}, 3, pe);
            model::Targets t;
            if (task == model::Task::regression) {
                t.y = Vector(4);
                for (int i = 0; i < 4; ++i) t.y[i] = normal(rng);
            } else {
                t.labels = {2, 0, 1, 2};
                t.counts = {1, 1, 2};
            }
            m.params().zero_grad();
            m.loss_and_backward(X, t, nullptr);
            for (auto& p : m.params()) {
                const Matrix numeric = oracle::numeric_gradient(p.value, [&] { return m.loss(X, t); });
                const double err = oracle::relative_error(p.grad, numeric);
                ++groups_checked;
                if (err > worst) {
                    worst = err;
                    worst_name = p.name;
                }
            }
        }
    }
    return {worst < 1e-4, std::to_string(groups_checked) + " parameter tensors; worst relative error " + fmt(worst, 3) +
                              " (" + worst_name + ")"};
}

// 12
Outcome balanced_metrics() {
    std::mt19937_64 rng(1212);
    std::uniform_int_distribution<int> classes(2, 6), size(1, 300);
    int differ = 0;
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const int C = classes(rng), n = size(rng);
        std::uniform_int_distribution<int> lab(0, C - 1);
        std::vector<int> labels(n), preds(n);
        for (int i = 0; i < n; ++i) {
            labels[i] = lab(rng);
            preds[i] = t % 2 ? lab(rng) : (lab(rng) == 0 ? lab(rng) : labels[i]);
        }
        const double a = model::balanced_accuracy(preds, labels), b = model::macro_recall(preds, labels);
        worst = std::max(worst, std::abs(a - b));
        if (a != b) ++differ;
    }
    const Vector w = model::balanced_class_weights({90, 10});
    const bool weights_ok = std::abs(w[0] - 0.5556) <= 1e-4 && std::abs(w[1] - 5.0) <= 1e-4;
    return {differ == 0 && weights_ok, std::to_string(differ) + "/1000 sets differ (max " + fmt(worst, 3) +
                                           "); class weights (" + fmt(w[0], 5) + ", " + fmt(w[1], 5) + ")"};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: none
    Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--only", only, "Run a single criterion (1-12)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "effective rank matches an independent SVD oracle", 10, effective_rank_oracle},
        {2, "first bound holds and is tight for large C", 60, first_bound},
        {3, "shared-PE asymptotics and shared <= random ordering", 60, shared_pe_bound},
        {4, "trained effective rank falls with alpha; fixed < random", 900, rank_ordering},
        {5, "structure regimes: PE gain high > low, large alpha hurts", 1800, structure_regimes},
        {6, "Chow-Liu equals exhaustive spanning-tree search", 60, chow_liu_exact},
        {7, "NOTEARS recovers a chain and leaves noise empty", 120, notears_recovery},
        {8, "graph diagnostics on closed-form graphs", 0, diagnostics_exact},
        {9, "automatic k contract", 0, auto_k_contract},
        {10, "parameter parity across PE modes", 0, parameter_parity},
        {11, "analytic gradients match finite differences", 30, gradient_check},
        {12, "balanced accuracy equals macro recall; class weights", 0, balanced_metrics},
    };

    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        ++ran;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        if (c.limit_seconds > 0 && secs > c.limit_seconds) {
            o.pass = false;
            o.detail += "; exceeded " + fmt(c.limit_seconds) + " s";
        }
        std::printf("criterion %2d: %s - %s (%s; %.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no criterion %d\n", only);
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
