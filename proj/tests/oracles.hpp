#pragma once

// Reference implementations used only by tests. Each is written directly
// from the definition, independent of the library code under test.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disagree/dataset.hpp"

namespace oracle {

/// Smoothed positive rate of `annotator` over items whose aux labels equal
/// `combo` field by field.
inline std::optional<double> cond_prob(const disagree::Dataset& ds, const std::string& annotator,
                                       const std::vector<std::string>& fields, const std::vector<int>& combo,
                                       double alpha) {
    long pos = 0, total = 0;
    for (const auto& item : ds.items()) {
        const auto label = item.annotator_labels.find(annotator);
        if (label == item.annotator_labels.end()) continue;
        bool match = true;
        for (std::size_t f = 0; f < fields.size() && match; ++f) {
            const auto field = item.aux_labels.find(fields[f]);
            if (field == item.aux_labels.end()) {
                match = false;
                continue;
            }
            const auto v = field->second.find(annotator);
            match = v != field->second.end() && v->second == combo[f];
        }
        if (!match) continue;
        ++total;
        pos += label->second;
    }
    if (total == 0 && alpha == 0.0) return std::nullopt;
    return (double(pos) + alpha) / (double(total) + 2 * alpha);
}

/// Minimal-norm least squares for y ~ b0 + b1 m1 + b2 m2.
inline Eigen::Vector3d ols(const std::vector<double>& m1, const std::vector<double>& m2,
                           const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = m1[i];
        x(i, 2) = m2[i];
        t(i) = y[i];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
    cod.setThreshold(1e-10);
    return cod.solve(t);
}

inline double rss(const Eigen::Vector3d& b, const std::vector<double>& m1, const std::vector<double>& m2,
                  const std::vector<double>& y) {
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const long double r = (long double)y[i] - b(0) - b(1) * m1[i] - b(2) * m2[i];
        s += r * r;
    }
    return double(s);
}

/// Textbook two-pass Pearson correlation in long double.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return double(sxy / std::sqrt(sxx * syy));
}

/// Share of the item's annotators with field = 1, or nothing if none rated it.
inline std::optional<double> avg_field(const disagree::Item& item, const std::string& field) {
    const auto it = item.aux_labels.find(field);
    if (it == item.aux_labels.end() || it->second.empty()) return std::nullopt;
    double sum = 0;
    for (const auto& [_, v] : it->second) sum += v;
    return sum / double(it->second.size());
}

inline double ensemble(const std::vector<double>& s, const std::vector<double>& p, double w) {
    long double sum = 0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += ((long double)s[i] + w * (long double)p[i]) / (1 + (long double)w);
    return double(sum / s.size());
}

}  // namespace oracle
