#include "packtriage/cart.hpp"

#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace packtriage {

namespace {

// n * gini(counts) written as n - (sum of squared counts)/n. Split search
// compares candidates on the sum of this key over both children; the enum-
// eration oracle in the tests evaluates the identical expression, so exact
// ties resolve the same way on both paths.
double weighted_gini_key(double n, double sum_sq) { return n - sum_sq / n; }

double sum_of_squares(std::span<const std::size_t> counts) {
    double s = 0;
    for (std::size_t c : counts) s += double(c) * double(c);
    return s;
}

std::size_t category_count(const CatalogEntry& entry) { return entry.categories.size(); }

// Canonical candidate subsets for one categorical feature, as bitmasks over
// category indices. Exhaustive mode lists every nonempty subset that
// excludes the last declared category (one representative per partition),
// ordered lexicographically by the sorted index list; ordinal mode lists
// the proper prefixes of the declared order. Features with more than 10
// categories always use the ordinal list.
std::vector<std::uint32_t> make_subset_order(std::size_t n_categories,
                                             CategoricalPolicy policy) {
    std::vector<std::uint32_t> masks;
    if (n_categories < 2) return masks;
    if (n_categories > 32)
        throw Error("categorical features are limited to 32 categories");

    const bool ordinal =
        policy == CategoricalPolicy::OrdinalPrefix || n_categories > 10;
    if (ordinal) {
        for (std::size_t len = 1; len + 1 <= n_categories; ++len)
            masks.push_back((1u << len) - 1u);
        return masks;
    }

    const std::uint32_t usable = static_cast<std::uint32_t>(n_categories) - 1;
    for (std::uint32_t m = 1; m < (1u << usable); ++m) masks.push_back(m);
    std::sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        while (a != 0 && b != 0) {
            const int ia = std::countr_zero(a);
            const int ib = std::countr_zero(b);
            if (ia != ib) return ia < ib;
            a &= a - 1;
            b &= b - 1;
        }
        return a == 0 && b != 0;
    });
    return masks;
}

struct SubsetOrders {
    const Dataset& ds;
    CategoricalPolicy policy;
    mutable std::vector<std::vector<std::uint32_t>> cache;

    SubsetOrders(const Dataset& d, CategoricalPolicy p)
        : ds(d), policy(p), cache(d.n_features()) {}

    const std::vector<std::uint32_t>& get(std::size_t feature) const {
        auto& masks = cache[feature];
        if (masks.empty())
            masks = make_subset_order(category_count(ds.catalog.entries[feature]), policy);
        return masks;
    }
};

struct RuleEval {
    SplitRule rule;
    double child_key = 0.0;
};

class ClassSplitScanner {
public:
    ClassSplitScanner(const Dataset& ds, std::span<const std::size_t> rows,
                      std::size_t min_leaf)
        : ds_(ds), rows_(rows), min_leaf_(min_leaf), n_classes_(ds.n_classes()) {}

    // Evaluates one concrete rule by partitioning the node's rows.
    std::optional<double> eval_rule(const SplitRule& rule) const {
        std::vector<std::size_t> left(n_classes_, 0), right(n_classes_, 0);
        for (std::size_t r : rows_) {
            if (rule.goes_left(ds_.value(r, rule.feature_index)))
                ++left[ds_.labels[r]];
            else
                ++right[ds_.labels[r]];
        }
        const std::size_t ln = std::accumulate(left.begin(), left.end(), std::size_t{0});
        const std::size_t rn = rows_.size() - ln;
        if (ln < min_leaf_ || rn < min_leaf_) return std::nullopt;
        return weighted_gini_key(double(ln), sum_of_squares(left)) +
               weighted_gini_key(double(rn), sum_of_squares(right));
    }

    // Best threshold rule for a numeric feature; candidates ascend over
    // midpoints of consecutive distinct values.
    std::optional<RuleEval> scan_numeric(std::size_t feature) const {
        std::vector<std::pair<double, int>> cells;
        cells.reserve(rows_.size());
        for (std::size_t r : rows_)
            cells.emplace_back(ds_.value(r, feature), ds_.labels[r]);
        std::sort(cells.begin(), cells.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::vector<std::size_t> left(n_classes_, 0), right(n_classes_, 0);
        for (const auto& [v, label] : cells) ++right[label];
        double left_sq = 0, right_sq = sum_of_squares(right);

        std::optional<RuleEval> best;
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
            const int label = cells[i].second;
            left_sq += 2.0 * double(left[label]) + 1.0;
            right_sq -= 2.0 * double(right[label]) - 1.0;
            ++left[label];
            --right[label];
            if (cells[i].first == cells[i + 1].first) continue;
            const std::size_t ln = i + 1, rn = cells.size() - ln;
            if (ln < min_leaf_ || rn < min_leaf_) continue;
            const double key = weighted_gini_key(double(ln), left_sq) +
                               weighted_gini_key(double(rn), right_sq);
            if (!best || key < best->child_key) {
                SplitRule rule;
                rule.feature_index = feature;
                rule.kind = SplitRule::Kind::Threshold;
                rule.threshold = (cells[i].first + cells[i + 1].first) / 2.0;
                best = RuleEval{rule, key};
            }
        }
        return best;
    }

    std::optional<RuleEval> scan_categorical(std::size_t feature,
                                             const std::vector<std::uint32_t>& masks) const {
        const std::size_t m = category_count(ds_.catalog.entries[feature]);
        std::vector<std::size_t> per_cat(m * n_classes_, 0);
        for (std::size_t r : rows_) {
            const auto cat = static_cast<std::size_t>(ds_.value(r, feature));
            ++per_cat[cat * n_classes_ + ds_.labels[r]];
        }

        std::optional<RuleEval> best;
        std::vector<std::size_t> left(n_classes_), right(n_classes_);
        for (std::uint32_t mask : masks) {
            std::fill(left.begin(), left.end(), 0);
            std::fill(right.begin(), right.end(), 0);
            for (std::size_t cat = 0; cat < m; ++cat) {
                auto& side = (mask >> cat & 1u) ? left : right;
                for (std::size_t k = 0; k < n_classes_; ++k)
                    side[k] += per_cat[cat * n_classes_ + k];
            }
            const std::size_t ln = std::accumulate(left.begin(), left.end(), std::size_t{0});
            const std::size_t rn = rows_.size() - ln;
            if (ln < min_leaf_ || rn < min_leaf_) continue;
            const double key = weighted_gini_key(double(ln), sum_of_squares(left)) +
                               weighted_gini_key(double(rn), sum_of_squares(right));
            if (!best || key < best->child_key) {
                SplitRule rule;
                rule.feature_index = feature;
                rule.kind = SplitRule::Kind::Subset;
                rule.subset_mask = mask;
                best = RuleEval{rule, key};
            }
        }
        return best;
    }

    std::optional<RuleEval> scan_boolean(std::size_t feature) const {
        SplitRule rule;
        rule.feature_index = feature;
        rule.kind = SplitRule::Kind::Boolean;
        auto key = eval_rule(rule);
        if (!key) return std::nullopt;
        return RuleEval{rule, *key};
    }

private:
    const Dataset& ds_;
    std::span<const std::size_t> rows_;
    std::size_t min_leaf_;
    std::size_t n_classes_;
};

std::optional<RuleEval> search_exhaustive(const Dataset& ds,
                                          std::span<const std::size_t> rows,
                                          std::span<const std::size_t> features,
                                          std::size_t min_leaf,
                                          const SubsetOrders& subsets) {
    const ClassSplitScanner scanner(ds, rows, min_leaf);
    std::optional<RuleEval> best;
    for (std::size_t f : features) {
        std::optional<RuleEval> candidate;
        switch (ds.catalog.entries[f].kind) {
        case FeatureKind::Numeric: candidate = scanner.scan_numeric(f); break;
        case FeatureKind::Categorical:
            candidate = scanner.scan_categorical(f, subsets.get(f));
            break;
        case FeatureKind::Boolean: candidate = scanner.scan_boolean(f); break;
        }
        if (candidate && (!best || candidate->child_key < best->child_key))
            best = candidate;
    }
    return best;
}

// Extra-trees flavor: one uniformly random rule per candidate feature.
std::optional<RuleEval> search_random(const Dataset& ds,
                                      std::span<const std::size_t> rows,
                                      std::span<const std::size_t> features,
                                      std::size_t min_leaf, CategoricalPolicy policy,
                                      Rng& rng) {
    const ClassSplitScanner scanner(ds, rows, min_leaf);
    std::optional<RuleEval> best;
    for (std::size_t f : features) {
        SplitRule rule;
        rule.feature_index = f;
        const auto& entry = ds.catalog.entries[f];
        switch (entry.kind) {
        case FeatureKind::Numeric: {
            double lo = ds.value(rows[0], f), hi = lo;
            for (std::size_t r : rows) {
                const double v = ds.value(r, f);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo == hi) continue;
            rule.kind = SplitRule::Kind::Threshold;
            rule.threshold = rng.uniform_double(lo, hi);
            break;
        }
        case FeatureKind::Categorical: {
            const std::size_t m = category_count(entry);
            if (m < 2) continue;
            rule.kind = SplitRule::Kind::Subset;
            if (policy == CategoricalPolicy::OrdinalPrefix || m > 10) {
                const std::size_t len = 1 + rng.uniform_index(m - 1);
                rule.subset_mask = (1u << len) - 1u;
            } else {
                rule.subset_mask =
                    1u + static_cast<std::uint32_t>(rng.uniform_u64((1ull << m) - 2));
            }
            break;
        }
        case FeatureKind::Boolean: rule.kind = SplitRule::Kind::Boolean; break;
        }
        const auto key = scanner.eval_rule(rule);
        if (key && (!best || *key < best->child_key)) best = RuleEval{rule, *key};
    }
    return best;
}

std::vector<std::size_t> count_classes(const Dataset& ds,
                                       std::span<const std::size_t> rows) {
    std::vector<std::size_t> counts(ds.n_classes(), 0);
    for (std::size_t r : rows) ++counts[ds.labels[r]];
    return counts;
}

enum class RuleSearch { Exhaustive, Random };

class TreeBuilder {
public:
    TreeBuilder(const Dataset& ds, const TreeParams& params, RuleSearch mode,
                std::uint64_t seed)
        : ds_(ds), params_(params), mode_(mode), rng_(seed),
          subsets_(ds, params.categorical_policy) {
        all_features_.resize(ds.n_features());
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        DecisionTree tree;
        tree.catalog = ds_.catalog;
        tree.class_names = ds_.class_names;
        build_node(tree.nodes, rows, 0, rows.size(), 0);
        return tree;
    }

private:
    // Per-node candidate features: all of them, or a sqrt-sized sample
    // (sorted, so the scan order stays the catalog order).
    std::vector<std::size_t> node_features() {
        if (params_.features_per_node == FeatureSampling::All) return all_features_;
        const std::size_t total = all_features_.size();
        std::size_t k = static_cast<std::size_t>(std::sqrt(double(total)));
        if (k < 1) k = 1;
        std::vector<std::size_t> pool = all_features_;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t pick = j + rng_.uniform_index(total - j);
            std::swap(pool[j], pool[pick]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    int build_node(std::vector<TreeNode>& nodes, std::vector<std::size_t>& rows,
                   std::size_t begin, std::size_t end, std::size_t depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const std::span<const std::size_t> span(rows.data() + begin, end - begin);

        auto counts = count_classes_span(span);
        nodes[id].sample_count = span.size();
        nodes[id].class_counts = counts;
        nodes[id].impurity = gini_impurity(counts);

        const bool pure = nodes[id].impurity == 0.0;
        std::optional<RuleEval> found;
        if (!pure && depth < params_.max_depth &&
            span.size() >= params_.min_samples_split) {
            const auto features = node_features();
            found = mode_ == RuleSearch::Exhaustive
                        ? search_exhaustive(ds_, span, features,
                                            params_.min_samples_leaf, subsets_)
                        : search_random(ds_, span, features, params_.min_samples_leaf,
                                        params_.categorical_policy, rng_);
            if (found) {
                const double parent_key =
                    weighted_gini_key(double(span.size()), sum_of_squares(counts));
                const double decrease =
                    (parent_key - found->child_key) / double(span.size());
                if (decrease < params_.min_impurity_decrease) found.reset();
            }
        }

        if (!found) {
            make_leaf(nodes[id]);
            return id;
        }

        const SplitRule rule = found->rule;
        const auto mid_it = std::partition(
            rows.begin() + begin, rows.begin() + end,
            [&](std::size_t r) { return rule.goes_left(ds_.value(r, rule.feature_index)); });
        const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());

        nodes[id].split = rule;
        const int left = build_node(nodes, rows, begin, mid, depth + 1);
        nodes[id].left = left;
        const int right = build_node(nodes, rows, mid, end, depth + 1);
        nodes[id].right = right;
        return id;
    }

    std::vector<std::size_t> count_classes_span(std::span<const std::size_t> rows) {
        return count_classes(ds_, rows);
    }

    void make_leaf(TreeNode& node) {
        node.leaf_distribution.resize(node.class_counts.size());
        for (std::size_t k = 0; k < node.class_counts.size(); ++k)
            node.leaf_distribution[k] =
                double(node.class_counts[k]) / double(node.sample_count);
    }

    const Dataset& ds_;
    const TreeParams& params_;
    RuleSearch mode_;
    Rng rng_;
    SubsetOrders subsets_;
    std::vector<std::size_t> all_features_;
};

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

EnsembleModel train_bagged(const Dataset& ds, std::size_t n_trees, TreeParams params,
                           bool bootstrap, RuleSearch mode, EnsembleKind kind) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "cannot train on an empty dataset");
    EnsembleModel model;
    model.kind = kind;
    model.catalog = ds.catalog;
    model.class_names = ds.class_names;
    model.params = params;
    model.trees.resize(n_trees);

    parallel_for(n_trees, [&](std::size_t i) {
        const std::uint64_t seed = mix_seed(params.rng_seed, i);
        Rng boot(mix_seed(seed, 0x626F6F74));
        std::vector<std::size_t> rows;
        if (bootstrap) {
            rows.resize(ds.n_rows());
            for (auto& r : rows) r = boot.uniform_index(ds.n_rows());
        } else {
            rows = iota_rows(ds.n_rows());
        }
        TreeBuilder builder(ds, params, mode, mix_seed(seed, 0x74726565));
        model.trees[i] = builder.build(std::move(rows));
    });
    return model;
}

// ---- regression trees for boosting ----

struct RegressionTarget {
    std::span<const double> gradient;
    std::span<const double> hessian;
};

struct RegressionRuleEval {
    SplitRule rule;
    double child_sse = 0.0;
};

struct RegSums {
    double n = 0, sum = 0, sum_sq = 0;

    void add(double g) {
        n += 1;
        sum += g;
        sum_sq += g * g;
    }
    double sse() const { return n == 0 ? 0.0 : sum_sq - sum * sum / n; }
};

class RegressionScanner {
public:
    RegressionScanner(const Dataset& ds, std::span<const std::size_t> rows,
                      const RegressionTarget& target, std::size_t min_leaf)
        : ds_(ds), rows_(rows), target_(target), min_leaf_(min_leaf) {}

    std::optional<RegressionRuleEval> scan_numeric(std::size_t feature) const {
        std::vector<std::pair<double, double>> cells; // value, gradient
        cells.reserve(rows_.size());
        for (std::size_t r : rows_)
            cells.emplace_back(ds_.value(r, feature), target_.gradient[r]);
        std::sort(cells.begin(), cells.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        RegSums left, right;
        for (const auto& [v, g] : cells) right.add(g);

        std::optional<RegressionRuleEval> best;
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
            const double g = cells[i].second;
            left.add(g);
            right.n -= 1;
            right.sum -= g;
            right.sum_sq -= g * g;
            if (cells[i].first == cells[i + 1].first) continue;
            if (left.n < double(min_leaf_) || right.n < double(min_leaf_)) continue;
            const double sse = left.sse() + right.sse();
            if (!best || sse < best->child_sse) {
                SplitRule rule;
                rule.feature_index = feature;
                rule.kind = SplitRule::Kind::Threshold;
                rule.threshold = (cells[i].first + cells[i + 1].first) / 2.0;
                best = RegressionRuleEval{rule, sse};
            }
        }
        return best;
    }

    std::optional<RegressionRuleEval> eval_rule(const SplitRule& rule) const {
        RegSums left, right;
        for (std::size_t r : rows_) {
            if (rule.goes_left(ds_.value(r, rule.feature_index)))
                left.add(target_.gradient[r]);
            else
                right.add(target_.gradient[r]);
        }
        if (left.n < double(min_leaf_) || right.n < double(min_leaf_))
            return std::nullopt;
        return RegressionRuleEval{rule, left.sse() + right.sse()};
    }

    std::optional<RegressionRuleEval> scan_categorical(
        std::size_t feature, const std::vector<std::uint32_t>& masks) const {
        std::optional<RegressionRuleEval> best;
        for (std::uint32_t mask : masks) {
            SplitRule rule;
            rule.feature_index = feature;
            rule.kind = SplitRule::Kind::Subset;
            rule.subset_mask = mask;
            const auto eval = eval_rule(rule);
            if (eval && (!best || eval->child_sse < best->child_sse)) best = eval;
        }
        return best;
    }

private:
    const Dataset& ds_;
    std::span<const std::size_t> rows_;
    const RegressionTarget& target_;
    std::size_t min_leaf_;
};

class GradientTreeBuilder {
public:
    GradientTreeBuilder(const Dataset& ds, const RegressionTarget& target,
                        const BoostParams& params)
        : ds_(ds), target_(target), params_(params),
          subsets_(ds, params.categorical_policy) {
        features_.resize(ds.n_features());
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    // Builds the tree and records each training row's leaf value so the
    // caller can update scores without re-routing.
    GradientTree build(std::vector<double>& row_values) {
        GradientTree tree;
        auto rows = iota_rows(ds_.n_rows());
        row_values.assign(ds_.n_rows(), 0.0);
        build_node(tree, rows, 0, rows.size(), 0, row_values);
        return tree;
    }

private:
    int build_node(GradientTree& tree, std::vector<std::size_t>& rows,
                   std::size_t begin, std::size_t end, std::size_t depth,
                   std::vector<double>& row_values) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const std::span<const std::size_t> span(rows.data() + begin, end - begin);

        RegSums sums;
        double hess = 0;
        for (std::size_t r : span) {
            sums.add(target_.gradient[r]);
            hess += target_.hessian[r];
        }
        tree.nodes[id].sample_count = span.size();
        tree.nodes[id].impurity = span.empty() ? 0.0 : sums.sse() / double(span.size());

        std::optional<RegressionRuleEval> found;
        if (depth < params_.max_depth && span.size() >= 2 && sums.sse() > 0) {
            const RegressionScanner scanner(ds_, span, target_, params_.min_samples_leaf);
            for (std::size_t f : features_) {
                std::optional<RegressionRuleEval> candidate;
                switch (ds_.catalog.entries[f].kind) {
                case FeatureKind::Numeric: candidate = scanner.scan_numeric(f); break;
                case FeatureKind::Categorical:
                    candidate = scanner.scan_categorical(f, subsets_.get(f));
                    break;
                case FeatureKind::Boolean: {
                    SplitRule rule;
                    rule.feature_index = f;
                    rule.kind = SplitRule::Kind::Boolean;
                    candidate = scanner.eval_rule(rule);
                    break;
                }
                }
                if (candidate && (!found || candidate->child_sse < found->child_sse))
                    found = candidate;
            }
            if (found && found->child_sse >= sums.sse()) found.reset();
        }

        if (!found) {
            tree.nodes[id].leaf_value = sums.sum / (hess + params_.l2_leaf);
            for (std::size_t r : span) row_values[r] = tree.nodes[id].leaf_value;
            return id;
        }

        const SplitRule rule = found->rule;
        const auto mid_it = std::partition(
            rows.begin() + begin, rows.begin() + end,
            [&](std::size_t r) { return rule.goes_left(ds_.value(r, rule.feature_index)); });
        const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());

        tree.nodes[id].split = rule;
        tree.nodes[id].left = build_node(tree, rows, begin, mid, depth + 1, row_values);
        tree.nodes[id].right = build_node(tree, rows, mid, end, depth + 1, row_values);
        return id;
    }

    const Dataset& ds_;
    const RegressionTarget& target_;
    const BoostParams& params_;
    SubsetOrders subsets_;
    std::vector<std::size_t> features_;
};

double gradient_tree_value(const GradientTree& tree, const FeatureVector& x) {
    int id = 0;
    while (!tree.nodes[id].is_leaf()) {
        const auto& rule = *tree.nodes[id].split;
        id = rule.goes_left(x.values[rule.feature_index]) ? tree.nodes[id].left
                                                          : tree.nodes[id].right;
    }
    return tree.nodes[id].leaf_value;
}

void softmax_inplace(std::span<double> scores) {
    double hi = scores[0];
    for (double s : scores) hi = std::max(hi, s);
    double total = 0;
    for (double& s : scores) {
        s = std::exp(s - hi);
        total += s;
    }
    for (double& s : scores) s /= total;
}

} // namespace

double gini_impurity(std::span<const std::size_t> class_counts) {
    std::size_t total = 0;
    for (std::size_t c : class_counts) total += c;
    if (total == 0)
        throw TrainError(TrainError::Code::EmptyNode,
                         "gini impurity of a node with no samples");
    double sum_sq = 0;
    for (std::size_t c : class_counts) {
        const double p = double(c) / double(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

double weighted_feature_gini(const Dataset& ds, std::string_view feature_id) {
    const auto feature = ds.catalog.index_of(feature_id);
    if (!feature) throw Error("unknown feature id '" + std::string(feature_id) + "'");
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "weighted_feature_gini on empty dataset");

    const auto& entry = ds.catalog.entries[*feature];
    const double n = double(ds.n_rows());

    if (entry.kind == FeatureKind::Numeric) {
        const auto rows = iota_rows(ds.n_rows());
        const ClassSplitScanner scanner(ds, rows, 1);
        const auto best = scanner.scan_numeric(*feature);
        if (!best) {
            const auto counts = count_classes(ds, rows);
            return gini_impurity(counts);
        }
        return best->child_key / n;
    }

    // Multiway: one group per distinct value.
    const std::size_t groups =
        entry.kind == FeatureKind::Boolean ? 2 : category_count(entry);
    std::vector<std::vector<std::size_t>> counts(groups,
                                                 std::vector<std::size_t>(ds.n_classes(), 0));
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        const auto v = static_cast<std::size_t>(ds.value(r, *feature));
        ++counts[v][ds.labels[r]];
    }
    double weighted = 0;
    for (const auto& group : counts) {
        const std::size_t gn =
            std::accumulate(group.begin(), group.end(), std::size_t{0});
        if (gn == 0) continue;
        weighted += double(gn) / n * gini_impurity(group);
    }
    return weighted;
}

std::optional<SplitCandidate> best_split(const Dataset& ds,
                                         std::span<const std::size_t> candidate_features,
                                         const TreeParams& params) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "best_split on empty dataset");
    const auto rows = iota_rows(ds.n_rows());
    const auto counts = count_classes(ds, rows);
    if (gini_impurity(counts) == 0.0) return std::nullopt; // nothing to reduce

    const SubsetOrders subsets(ds, params.categorical_policy);
    const auto found = search_exhaustive(ds, rows, candidate_features,
                                         params.min_samples_leaf, subsets);
    if (!found) return std::nullopt;

    const double parent_key = weighted_gini_key(double(ds.n_rows()), sum_of_squares(counts));
    const double decrease = (parent_key - found->child_key) / double(ds.n_rows());
    if (decrease < params.min_impurity_decrease) return std::nullopt;
    return SplitCandidate{found->rule, decrease};
}

DecisionTree build_tree(const Dataset& ds, const TreeParams& params) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "cannot build a tree on an empty dataset");
    TreeBuilder builder(ds, params, RuleSearch::Exhaustive, params.rng_seed);
    return builder.build(iota_rows(ds.n_rows()));
}

std::size_t route_tree(const DecisionTree& tree, const FeatureVector& x) {
    std::size_t id = 0;
    while (!tree.nodes[id].is_leaf()) {
        const auto& rule = *tree.nodes[id].split;
        id = rule.goes_left(x.values[rule.feature_index])
                 ? static_cast<std::size_t>(tree.nodes[id].left)
                 : static_cast<std::size_t>(tree.nodes[id].right);
    }
    return id;
}

std::vector<double> predict_tree(const DecisionTree& tree, const FeatureVector& x) {
    return tree.nodes[route_tree(tree, x)].leaf_distribution;
}

EnsembleModel train_random_forest(const Dataset& ds, std::size_t n_trees,
                                  TreeParams params, bool bootstrap) {
    return train_bagged(ds, n_trees, params, bootstrap, RuleSearch::Exhaustive,
                        EnsembleKind::RandomForest);
}

EnsembleModel train_extra_trees(const Dataset& ds, std::size_t n_trees,
                                TreeParams params) {
    return train_bagged(ds, n_trees, params, false, RuleSearch::Random,
                        EnsembleKind::ExtraTrees);
}

EnsembleModel train_boosted(const Dataset& ds, const BoostParams& params) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "cannot train on an empty dataset");
    const std::size_t n = ds.n_rows();
    const std::size_t k = ds.n_classes();

    EnsembleModel model;
    model.kind = EnsembleKind::Boosted;
    model.catalog = ds.catalog;
    model.class_names = ds.class_names;
    model.boosted.learning_rate = params.learning_rate;
    model.boosted.base_scores.assign(k, 0.0);
    model.params.rng_seed = 0;

    std::vector<double> scores(n * k, 0.0);
    std::vector<double> probs(n * k, 0.0);

    for (std::size_t round = 0; round < params.rounds; ++round) {
        parallel_for(n, [&](std::size_t i) {
            std::copy_n(scores.begin() + i * k, k, probs.begin() + i * k);
            softmax_inplace(std::span<double>(probs.data() + i * k, k));
        });

        std::vector<GradientTree> layer(k);
        std::vector<std::vector<double>> updates(k);
        parallel_for(k, [&](std::size_t cls) {
            std::vector<double> gradient(n), hessian(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double p = probs[i * k + cls];
                gradient[i] = (ds.labels[i] == int(cls) ? 1.0 : 0.0) - p;
                hessian[i] = p * (1.0 - p);
            }
            const RegressionTarget target{gradient, hessian};
            GradientTreeBuilder builder(ds, target, params);
            layer[cls] = builder.build(updates[cls]);
        });

        for (std::size_t cls = 0; cls < k; ++cls)
            for (std::size_t i = 0; i < n; ++i)
                scores[i * k + cls] += params.learning_rate * updates[cls][i];
        model.boosted.rounds.push_back(std::move(layer));
    }
    return model;
}

std::vector<double> predict_ensemble(const EnsembleModel& model, const FeatureVector& x) {
    const std::size_t k = model.class_names.size();
    std::vector<double> out(k, 0.0);

    if (model.kind == EnsembleKind::Boosted) {
        for (std::size_t c = 0; c < k; ++c) out[c] = model.boosted.base_scores[c];
        for (const auto& layer : model.boosted.rounds)
            for (std::size_t c = 0; c < k; ++c)
                out[c] += model.boosted.learning_rate * gradient_tree_value(layer[c], x);
        softmax_inplace(out);
        return out;
    }

    for (const auto& tree : model.trees) {
        const auto dist = predict_tree(tree, x);
        for (std::size_t c = 0; c < k; ++c) out[c] += dist[c];
    }
    if (!model.trees.empty())
        for (double& v : out) v /= double(model.trees.size());
    return out;
}

double boosted_log_loss(const EnsembleModel& model, const Dataset& ds,
                        std::size_t rounds) {
    const std::size_t k = ds.n_classes();
    double loss = 0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        std::vector<double> scores(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) scores[c] = model.boosted.base_scores[c];
        for (std::size_t r = 0; r < rounds && r < model.boosted.rounds.size(); ++r)
            for (std::size_t c = 0; c < k; ++c)
                scores[c] += model.boosted.learning_rate *
                             gradient_tree_value(model.boosted.rounds[r][c], ds.rows[i]);
        softmax_inplace(scores);
        loss -= std::log(std::max(scores[ds.labels[i]], 1e-300));
    }
    return loss / double(ds.n_rows());
}

} // namespace packtriage
