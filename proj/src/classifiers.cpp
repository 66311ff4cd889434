#include "packtriage/classifiers.hpp"

#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace packtriage {

namespace {

constexpr double kVarianceFloor = 1e-9;

void softmax_from_logits(std::vector<double>& v) {
    double hi = v[0];
    for (double s : v) hi = std::max(hi, s);
    double total = 0;
    for (double& s : v) {
        s = std::exp(s - hi);
        total += s;
    }
    for (double& s : v) s /= total;
}

Dataset project_dataset(const Dataset& ds, const std::vector<std::size_t>& cols) {
    Dataset out;
    out.class_names = ds.class_names;
    out.labels = ds.labels;
    for (std::size_t c : cols) out.catalog.entries.push_back(ds.catalog.entries[c]);
    out.rows.reserve(ds.n_rows());
    for (const auto& row : ds.rows) {
        FeatureVector v;
        v.values.reserve(cols.size());
        for (std::size_t c : cols) v.values.push_back(row.values[c]);
        out.rows.push_back(std::move(v));
    }
    return out;
}

FeatureVector project_vector(const TrainedModel& model, const FeatureVector& x) {
    FeatureVector v;
    v.values.reserve(model.feature_indices.size());
    for (std::size_t c : model.feature_indices) v.values.push_back(x.values[c]);
    if (model.standardized)
        for (std::size_t c = 0; c < v.values.size(); ++c)
            v.values[c] = (v.values[c] - model.means[c]) / model.stds[c];
    return v;
}

void fit_standardization(TrainedModel& model, Dataset& proj) {
    const std::size_t d = proj.n_features();
    const double n = double(proj.n_rows());
    model.means.assign(d, 0.0);
    model.stds.assign(d, 1.0);
    for (std::size_t c = 0; c < d; ++c) {
        if (proj.catalog.entries[c].kind == FeatureKind::Categorical) continue;
        double mean = 0;
        for (const auto& row : proj.rows) mean += row.values[c];
        mean /= n;
        double var = 0;
        for (const auto& row : proj.rows) {
            const double dlt = row.values[c] - mean;
            var += dlt * dlt;
        }
        var /= n;
        model.means[c] = mean;
        model.stds[c] = var > 0 ? std::sqrt(var) : 1.0;
    }
    for (auto& row : proj.rows)
        for (std::size_t c = 0; c < d; ++c)
            row.values[c] = (row.values[c] - model.means[c]) / model.stds[c];
    model.standardized = true;
}

void fit_gaussian_nb(TrainedModel& model, const Dataset& proj) {
    const std::size_t k = proj.n_classes();
    const std::size_t d = proj.n_features();
    std::vector<std::size_t> counts(k, 0);
    model.gnb_means.assign(k, std::vector<double>(d, 0.0));
    model.gnb_vars.assign(k, std::vector<double>(d, 0.0));
    model.gnb_priors.assign(k, 0.0);

    for (std::size_t i = 0; i < proj.n_rows(); ++i) {
        const int cls = proj.labels[i];
        ++counts[cls];
        for (std::size_t c = 0; c < d; ++c)
            model.gnb_means[cls][c] += proj.rows[i].values[c];
    }
    for (std::size_t cls = 0; cls < k; ++cls)
        if (counts[cls] > 0)
            for (std::size_t c = 0; c < d; ++c)
                model.gnb_means[cls][c] /= double(counts[cls]);

    for (std::size_t i = 0; i < proj.n_rows(); ++i) {
        const int cls = proj.labels[i];
        for (std::size_t c = 0; c < d; ++c) {
            const double delta = proj.rows[i].values[c] - model.gnb_means[cls][c];
            model.gnb_vars[cls][c] += delta * delta;
        }
    }
    for (std::size_t cls = 0; cls < k; ++cls) {
        model.gnb_priors[cls] = double(counts[cls]) / double(proj.n_rows());
        for (std::size_t c = 0; c < d; ++c) {
            if (counts[cls] > 0) model.gnb_vars[cls][c] /= double(counts[cls]);
            model.gnb_vars[cls][c] = std::max(model.gnb_vars[cls][c], kVarianceFloor);
        }
    }
}

void fit_logistic_regression(TrainedModel& model, const Dataset& proj) {
    const std::size_t k = proj.n_classes();
    const std::size_t d = proj.n_features();
    const std::size_t n = proj.n_rows();
    const std::size_t stride = d + 1; // bias last
    model.logreg_weights.assign(k * stride, 0.0);

    std::vector<double> logits(k), grad(k * stride);
    for (std::size_t iter = 0; iter < model.spec.logreg_iterations; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t cls = 0; cls < k; ++cls) {
                const double* w = model.logreg_weights.data() + cls * stride;
                double z = w[d];
                for (std::size_t c = 0; c < d; ++c) z += w[c] * proj.rows[i].values[c];
                logits[cls] = z;
            }
            softmax_from_logits(logits);
            for (std::size_t cls = 0; cls < k; ++cls) {
                const double err =
                    logits[cls] - (proj.labels[i] == int(cls) ? 1.0 : 0.0);
                double* g = grad.data() + cls * stride;
                for (std::size_t c = 0; c < d; ++c) g[c] += err * proj.rows[i].values[c];
                g[d] += err;
            }
        }
        for (std::size_t cls = 0; cls < k; ++cls) {
            double* w = model.logreg_weights.data() + cls * stride;
            double* g = grad.data() + cls * stride;
            for (std::size_t c = 0; c < d; ++c)
                w[c] -= model.spec.logreg_step *
                        (g[c] / double(n) + model.spec.logreg_l2 * w[c]);
            w[d] -= model.spec.logreg_step * g[d] / double(n);
        }
    }
}

std::vector<double> knn_proba(const TrainedModel& model, const FeatureVector& q) {
    const std::size_t n = model.knn_rows.size();
    const std::size_t k_classes = model.class_names.size();
    const std::size_t k = std::min(model.spec.knn_k, n);

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d2 = 0;
        const auto& row = model.knn_rows[i].values;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (model.projected_catalog.entries[c].kind == FeatureKind::Categorical) {
                d2 += row[c] == q.values[c] ? 0.0 : 1.0;
            } else {
                const double delta = row[c] - q.values[c];
                d2 += delta * delta;
            }
        }
        dist[i] = {std::sqrt(d2), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    std::vector<double> proba(k_classes, 0.0);
    // An exact neighbor decides the vote outright; otherwise neighbors
    // weigh in with inverse distance.
    if (dist[0].first == 0.0) {
        std::size_t zeros = 0;
        for (std::size_t i = 0; i < k && dist[i].first == 0.0; ++i, ++zeros)
            proba[model.knn_labels[dist[i].second]] += 1.0;
        for (double& p : proba) p /= double(zeros);
        return proba;
    }
    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = 1.0 / dist[i].first;
        proba[model.knn_labels[dist[i].second]] += w;
        total += w;
    }
    for (double& p : proba) p /= total;
    return proba;
}

std::vector<double> gnb_proba(const TrainedModel& model, const FeatureVector& q) {
    const std::size_t k = model.class_names.size();
    const std::size_t d = q.values.size();
    std::vector<double> log_post(k, 0.0);
    for (std::size_t cls = 0; cls < k; ++cls) {
        if (model.gnb_priors[cls] == 0.0) {
            log_post[cls] = -1e300;
            continue;
        }
        double lp = std::log(model.gnb_priors[cls]);
        for (std::size_t c = 0; c < d; ++c) {
            const double var = model.gnb_vars[cls][c];
            const double delta = q.values[c] - model.gnb_means[cls][c];
            lp -= 0.5 * (std::log(2.0 * M_PI * var) + delta * delta / var);
        }
        log_post[cls] = lp;
    }
    softmax_from_logits(log_post);
    return log_post;
}

std::vector<double> logreg_proba(const TrainedModel& model, const FeatureVector& q) {
    const std::size_t k = model.class_names.size();
    const std::size_t d = q.values.size();
    const std::size_t stride = d + 1;
    std::vector<double> logits(k);
    for (std::size_t cls = 0; cls < k; ++cls) {
        const double* w = model.logreg_weights.data() + cls * stride;
        double z = w[d];
        for (std::size_t c = 0; c < d; ++c) z += w[c] * q.values[c];
        logits[cls] = z;
    }
    softmax_from_logits(logits);
    return logits;
}

} // namespace

std::string classifier_kind_name(ClassifierKind kind) {
    switch (kind) {
    case ClassifierKind::DecisionTree: return "decision_tree";
    case ClassifierKind::RandomForest: return "random_forest";
    case ClassifierKind::ExtraTrees: return "extra_trees";
    case ClassifierKind::Boosted: return "boosted";
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::GaussianNb: return "gaussian_nb";
    case ClassifierKind::LogisticRegression: return "logistic_regression";
    }
    return "?";
}

std::optional<ClassifierKind> classifier_kind_from_name(std::string_view name) {
    for (ClassifierKind kind :
         {ClassifierKind::DecisionTree, ClassifierKind::RandomForest,
          ClassifierKind::ExtraTrees, ClassifierKind::Boosted, ClassifierKind::Knn,
          ClassifierKind::GaussianNb, ClassifierKind::LogisticRegression})
        if (classifier_kind_name(kind) == name) return kind;
    return std::nullopt;
}

TrainedModel train(const ClassifierSpec& spec, const Dataset& ds,
                   const std::vector<std::string>& features) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "cannot train on an empty dataset");
    if (std::set<int>(ds.labels.begin(), ds.labels.end()).size() < 2)
        throw TrainError(TrainError::Code::SingleClass,
                         "training data contains a single class");

    TrainedModel model;
    model.spec = spec;
    model.catalog = ds.catalog;
    model.class_names = ds.class_names;
    for (const auto& id : features) {
        const auto idx = ds.catalog.index_of(id);
        if (!idx) throw Error("unknown feature id '" + id + "'");
        model.feature_indices.push_back(*idx);
    }

    Dataset proj = project_dataset(ds, model.feature_indices);
    model.projected_catalog = proj.catalog;
    if (spec.wants_standardize()) fit_standardization(model, proj);

    switch (spec.kind) {
    case ClassifierKind::DecisionTree:
        model.tree = build_tree(proj, spec.tree_params);
        break;
    case ClassifierKind::RandomForest: {
        TreeParams params = spec.tree_params;
        params.features_per_node = FeatureSampling::Sqrt;
        model.ensemble = train_random_forest(proj, spec.n_trees, params);
        break;
    }
    case ClassifierKind::ExtraTrees: {
        TreeParams params = spec.tree_params;
        params.features_per_node = FeatureSampling::Sqrt;
        model.ensemble = train_extra_trees(proj, spec.n_trees, params);
        break;
    }
    case ClassifierKind::Boosted:
        model.ensemble = train_boosted(proj, spec.boost_params);
        break;
    case ClassifierKind::Knn:
        model.knn_rows = proj.rows;
        model.knn_labels = proj.labels;
        break;
    case ClassifierKind::GaussianNb:
        fit_gaussian_nb(model, proj);
        break;
    case ClassifierKind::LogisticRegression:
        fit_logistic_regression(model, proj);
        break;
    }
    return model;
}

std::vector<double> predict_proba(const TrainedModel& model, const FeatureVector& x) {
    const FeatureVector q = project_vector(model, x);
    switch (model.spec.kind) {
    case ClassifierKind::DecisionTree: return predict_tree(model.tree, q);
    case ClassifierKind::RandomForest:
    case ClassifierKind::ExtraTrees:
    case ClassifierKind::Boosted: return predict_ensemble(model.ensemble, q);
    case ClassifierKind::Knn: return knn_proba(model, q);
    case ClassifierKind::GaussianNb: return gnb_proba(model, q);
    case ClassifierKind::LogisticRegression: return logreg_proba(model, q);
    }
    return {};
}

int predict_class(const TrainedModel& model, const FeatureVector& x) {
    return argmax_class(predict_proba(model, x));
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
        for (std::size_t c : row) t += c;
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
}

double roc_auc(std::span<const double> scores, std::span<const int> positives,
               std::vector<RocPoint>* points) {
    std::size_t n_pos = 0, n_neg = 0;
    for (int p : positives) (p ? n_pos : n_neg) += 1;
    if (points) {
        points->clear();
        points->push_back({0, 0});
    }
    if (n_pos == 0 || n_neg == 0) {
        if (points) points->push_back({1, 1});
        return 0.5;
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double auc = 0;
    double prev_fpr = 0, prev_tpr = 0;
    std::size_t seen_pos = 0, seen_neg = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        // everyone sharing the score crosses the threshold together
        while (i < order.size() && scores[order[i]] == threshold) {
            (positives[order[i]] ? seen_pos : seen_neg) += 1;
            ++i;
        }
        const double fpr = double(seen_neg) / double(n_neg);
        const double tpr = double(seen_pos) / double(n_pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        if (points) points->push_back({fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    return auc;
}

Metrics compute_metrics(const std::vector<std::vector<double>>& probas,
                        const std::vector<int>& labels, std::size_t n_classes) {
    Metrics m;
    const std::size_t n = labels.size();
    m.confusion.counts.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < n; ++i) {
        const int pred = argmax_class(probas[i]);
        ++m.confusion.counts[labels[i]][pred];
    }
    m.accuracy = double(m.confusion.trace()) / double(n);

    m.per_class.resize(n_classes);
    m.roc.resize(n_classes);
    double f1_sum = 0, auc_sum = 0;
    std::size_t auc_classes = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
        std::size_t tp = m.confusion.counts[k][k], fn = 0, fp = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (c == k) continue;
            fn += m.confusion.counts[k][c];
            fp += m.confusion.counts[c][k];
        }
        const std::size_t tn = n - tp - fn - fp;
        auto& pc = m.per_class[k];
        pc.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
        pc.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
        pc.fpr = fp + tn > 0 ? double(fp) / double(fp + tn) : 0.0;
        pc.f1 = pc.precision + pc.recall > 0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;
        f1_sum += pc.f1;

        std::vector<double> scores(n);
        std::vector<int> positives(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = probas[i][k];
            positives[i] = labels[i] == int(k) ? 1 : 0;
        }
        std::size_t n_pos = std::accumulate(positives.begin(), positives.end(), std::size_t{0});
        pc.auc = roc_auc(scores, positives, &m.roc[k]);
        if (n_pos > 0 && n_pos < n) {
            auc_sum += pc.auc;
            ++auc_classes;
        }
    }
    m.macro_f1 = n_classes > 0 ? f1_sum / double(n_classes) : 0.0;
    m.macro_auc = auc_classes > 0 ? auc_sum / double(auc_classes) : 0.5;
    return m;
}

Metrics evaluate(const TrainedModel& model, const Dataset& test) {
    if (test.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "cannot evaluate on an empty dataset");
    std::vector<std::vector<double>> probas(test.n_rows());
    parallel_for(test.n_rows(), [&](std::size_t i) {
        probas[i] = predict_proba(model, test.rows[i]);
    });
    return compute_metrics(probas, test.labels, test.n_classes());
}

ScenarioGrid run_scenario_grid(const Dataset& train_ds, const Dataset& test_ds,
                               const std::vector<GridSelection>& selections,
                               const std::vector<ClassifierSpec>& specs,
                               std::uint64_t rng_seed) {
    ScenarioGrid grid;
    grid.cells.resize(selections.size() * specs.size());

    parallel_for(grid.cells.size(), [&](std::size_t cell) {
        const std::size_t sel = cell / specs.size();
        const std::size_t sp = cell % specs.size();
        ClassifierSpec spec = specs[sp];
        spec.tree_params.rng_seed = mix_seed(rng_seed, cell);
        const TrainedModel model = train(spec, train_ds, selections[sel].features);
        grid.cells[cell] = {sel, sp, evaluate(model, test_ds)};
    });

    grid.best_index = 0;
    for (std::size_t i = 1; i < grid.cells.size(); ++i) {
        const Metrics& a = grid.cells[i].metrics;
        const Metrics& b = grid.cells[grid.best_index].metrics;
        if (a.accuracy > b.accuracy ||
            (a.accuracy == b.accuracy &&
             (a.macro_f1 > b.macro_f1 ||
              (a.macro_f1 == b.macro_f1 && a.macro_auc > b.macro_auc))))
            grid.best_index = i;
    }
    return grid;
}

} // namespace packtriage
