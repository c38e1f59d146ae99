#include "disagree/dislearn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "disagree/error.hpp"

namespace disagree::dislearn {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

// Relative size below which a Gram-matrix pivot/eigenvalue counts as zero.
constexpr double kRankTolerance = 1e-10;

std::optional<Vec3> solve_cholesky(const Mat3& a, const Vec3& b) {
    const double scale = std::max({a[0][0], a[1][1], a[2][2]});
    if (!(scale > 0.0)) return std::nullopt;
    Mat3 l{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
            if (i == j) {
                if (sum <= kRankTolerance * scale) return std::nullopt;
                l[i][i] = std::sqrt(sum);
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Vec3 z{};
    for (int i = 0; i < 3; ++i) {
        double sum = b[i];
        for (int k = 0; k < i; ++k) sum -= l[i][k] * z[k];
        z[i] = sum / l[i][i];
    }
    Vec3 x{};
    for (int i = 2; i >= 0; --i) {
        double sum = z[i];
        for (int k = i + 1; k < 3; ++k) sum -= l[k][i] * x[k];
        x[i] = sum / l[i][i];
    }
    return x;
}

// Cyclic Jacobi; on return `a` is diagonal (eigenvalues) and the columns of
// `v` are the eigenvectors.
void jacobi_eigen(Mat3& a, Mat3& v) {
    v = Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if (off <= 1e-32 * diag || off == 0.0) return;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

Vec3 solve_pseudoinverse(Mat3 a, const Vec3& b) {
    Mat3 v;
    jacobi_eigen(a, v);
    const double top = std::max({std::abs(a[0][0]), std::abs(a[1][1]), std::abs(a[2][2])});
    Vec3 x{};
    if (top == 0.0) return x;
    for (int k = 0; k < 3; ++k) {
        const double lambda = a[k][k];
        if (lambda <= kRankTolerance * top) continue;
        double proj = 0.0;
        for (int i = 0; i < 3; ++i) proj += v[i][k] * b[i];
        for (int i = 0; i < 3; ++i) x[i] += v[i][k] * proj / lambda;
    }
    return x;
}

}  // namespace

std::optional<double> MetaAverages::at(const std::string& item_id) const {
    const auto it = values.find(item_id);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

MetaAverages avg_metadata(const Dataset& ds, const std::string& field) {
    if (!ds.aux_fields().contains(field)) {
        throw std::invalid_argument(fmt::format("aux field '{}' not present in the dataset", field));
    }
    MetaAverages out;
    out.field = field;
    for (const auto& item : ds.items()) {
        const auto it = item.aux_labels.find(field);
        if (it == item.aux_labels.end() || it->second.empty()) {
            out.undefined.push_back(item.id);
            continue;
        }
        std::size_t ones = 0;
        for (const auto& [_, v] : it->second) ones += static_cast<std::size_t>(v);
        out.values[item.id] = static_cast<double>(ones) / static_cast<double>(it->second.size());
    }
    return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MetadataSelection select_top2_metadata(const Dataset& ds, std::span<const std::string> candidates) {
    const auto available = ds.aux_fields();
    MetadataSelection sel;
    std::vector<std::size_t> usable;
    for (const auto& field : candidates) {
        FieldCorrelation fc{field, 0.0, 0};
        if (available.contains(field)) {
            const auto avg = avg_metadata(ds, field);
            std::vector<double> x, y;
            for (const auto& item : ds.items()) {
                if (const auto m = avg.at(item.id)) {
                    x.push_back(*m);
                    y.push_back(item.soft_label);
                }
            }
            fc.n = x.size();
            if (fc.n >= kMinUsableItems) {
                fc.r = pearson(x, y);
                usable.push_back(sel.correlations.size());
            }
        }
        sel.correlations.push_back(fc);
    }
    if (usable.size() < 2) {
        throw std::invalid_argument(fmt::format(
            "need at least 2 metadata fields with averages on >= {} items; found {}", kMinUsableItems, usable.size()));
    }
    std::stable_sort(usable.begin(), usable.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(sel.correlations[a].r) > std::abs(sel.correlations[b].r);
    });
    sel.first = sel.correlations[usable[0]].field;
    sel.second = sel.correlations[usable[1]].field;
    return sel;
}

double residual_sum_of_squares(double b0, double b1, double b2, std::span<const double> m1,
                               std::span<const double> m2, std::span<const double> y) {
    double rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - (b0 + b1 * m1[i] + b2 * m2[i]);
        rss += r * r;
    }
    return rss;
}

OLSModel fit_ols(std::span<const double> m1, std::span<const double> m2, std::span<const double> y) {
    if (m1.size() != y.size() || m2.size() != y.size()) throw std::invalid_argument("fit_ols: length mismatch");
    if (y.size() < 3) throw std::invalid_argument(fmt::format("fit_ols: need at least 3 points, got {}", y.size()));

    Mat3 gram{};
    Vec3 rhs{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const Vec3 row{1.0, m1[i], m2[i]};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += row[r] * y[i];
            for (int c = 0; c < 3; ++c) gram[r][c] += row[r] * row[c];
        }
    }

    OLSModel model;
    auto coef = solve_cholesky(gram, rhs);
    if (!coef) {
        model.rank_deficient = true;
        coef = solve_pseudoinverse(gram, rhs);
    }
    model.b0 = (*coef)[0];
    model.b1 = (*coef)[1];
    model.b2 = (*coef)[2];
    model.n = y.size();
    model.rss = residual_sum_of_squares(model.b0, model.b1, model.b2, m1, m2, y);
    return model;
}

OLSModel fit_ols(const MetaAverages& m1, const MetaAverages& m2, const std::map<std::string, double>& targets) {
    std::vector<double> x1, x2, y;
    for (const auto& [id, target] : targets) {
        const auto a = m1.at(id);
        const auto b = m2.at(id);
        if (!a || !b) continue;
        x1.push_back(*a);
        x2.push_back(*b);
        y.push_back(target);
    }
    OLSModel model = fit_ols(x1, x2, y);
    model.m1_name = m1.field;
    model.m2_name = m2.field;
    return model;
}

double predict_sl_meta(const OLSModel& model, double m1, double m2) {
    return std::clamp(model.b0 + model.b1 * m1 + model.b2 * m2, 0.0, 1.0);
}

void require_metadata(const Dataset& train) {
    if (train.kind() == DatasetKind::MD || train.kind() == DatasetKind::ArMIS) {
        throw RefusalError(fmt::format(
            "{} data do not contain the related annotation information from the annotators; "
            "Dis-Learning with metadata unavailable",
            to_string(train.kind())));
    }
    if (train.aux_fields().size() < 2) {
        throw RefusalError(fmt::format("training split has {} aux field(s); Dis-Learning with metadata needs 2",
                                       train.aux_fields().size()));
    }
}

Result run_from_scores(const Dataset& train, const Dataset& eval, ScoreTable sl_bert, bool use_meta,
                       double threshold) {
    if (use_meta) require_metadata(train);
    for (const auto& item : eval.items()) {
        if (!sl_bert.entries.contains(item.id)) {
            throw ValidationError("incomplete SL_BERT scores", {fmt::format("no score for eval item '{}'", item.id)});
        }
    }

    Result result;
    result.sl_bert = std::move(sl_bert);
    std::optional<MetaAverages> eval_m1, eval_m2;
    if (use_meta) {
        const auto fields = train.aux_fields();
        const std::vector<std::string> candidates(fields.begin(), fields.end());
        try {
            result.selection = select_top2_metadata(train, candidates);
        } catch (const std::invalid_argument& e) {
            throw RefusalError(std::string("metadata unusable: ") + e.what());
        }
        const auto m1 = avg_metadata(train, result.selection->first);
        const auto m2 = avg_metadata(train, result.selection->second);
        std::map<std::string, double> targets;
        for (const auto& item : train.items()) targets[item.id] = item.soft_label;
        result.ols = fit_ols(m1, m2, targets);

        const auto eval_fields = eval.aux_fields();
        if (eval_fields.contains(m1.field)) eval_m1 = avg_metadata(eval, m1.field);
        if (eval_fields.contains(m2.field)) eval_m2 = avg_metadata(eval, m2.field);
    }

    std::size_t text_only = 0;
    for (const auto& item : eval.items()) {
        double soft = result.sl_bert.at(item.id);
        if (result.ols) {
            const auto a = eval_m1 ? eval_m1->at(item.id) : std::nullopt;
            const auto b = eval_m2 ? eval_m2->at(item.id) : std::nullopt;
            if (a && b) {
                soft = std::clamp(0.5 * (soft + predict_sl_meta(*result.ols, *a, *b)), 0.0, 1.0);
            } else {
                ++text_only;
            }
        }
        result.predictions.push_back({item.id, soft, harden(soft, threshold)});
    }
    if (text_only > 0) {
        result.notes.push_back(
            fmt::format("{} eval items lack metadata averages; their prediction is SL_BERT alone", text_only));
    }
    return result;
}

Result run_dislearn(const Dataset& train, const Dataset& eval, const Hyperparams& hp, bool use_meta,
                    double threshold) {
    if (use_meta) require_metadata(train);
    if (train.empty()) throw std::invalid_argument("run_dislearn: empty training split");
    std::vector<Example> examples;
    examples.reserve(train.size());
    for (const auto& item : train.items()) examples.push_back({item.text, item.soft_label});
    const ScorerModel model = disagree::train(examples, hp);
    return run_from_scores(train, eval, score_dataset(model, eval, std::string(kAggregateTarget)), use_meta,
                           threshold);
}

void write_ols_report(const Result& result, std::ostream& out) {
    if (!result.ols || !result.selection) {
        out << "metadata: unused\n";
        return;
    }
    const auto& m = *result.ols;
    out << fmt::format("m1: {}\nm2: {}\n", m.m1_name, m.m2_name);
    out << fmt::format("b0: {:.12f}\nb1: {:.12f}\nb2: {:.12f}\n", m.b0, m.b1, m.b2);
    out << fmt::format("n: {}\nrss: {:.12f}\nrank_deficient: {}\n", m.n, m.rss, m.rank_deficient);
    for (const auto& c : result.selection->correlations) {
        out << fmt::format("r[{}]: {:.12f} (n={})\n", c.field, c.r, c.n);
    }
}

}  // namespace disagree::dislearn
