#pragma once

// Brute-force reference for the boosted-tree split search, written
// independently of the library's prefix-sum scan: every candidate split
// is evaluated with naive two-pass SSE over the partitioned rows.

#include "ledgercast/closure.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
};

inline double naive_sse(const std::vector<double>& residuals, const std::vector<int>& idx) {
    double mean = 0.0;
    for (int i : idx) mean += residuals[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(idx.size());
    double sse = 0.0;
    for (int i : idx) {
        const double d = residuals[static_cast<std::size_t>(i)] - mean;
        sse += d * d;
    }
    return sse;
}

// Exhaustive scan over all features and all midpoints between distinct
// sorted values, honoring min_samples_leaf. Candidates go feature-ascending
// then threshold-ascending and the incumbent only changes on an improvement
// beyond the documented tie margin, so ties resolve to the lowest feature,
// then the lowest threshold.
inline SplitChoice best_split(const std::vector<ledgercast::closure::FeatureVector>& rows,
                              const std::vector<double>& residuals, const std::vector<int>& idx,
                              const ledgercast::closure::GbtParams& params) {
    using ledgercast::closure::kNumFeatures;
    const int n = static_cast<int>(idx.size());
    const double parent = naive_sse(residuals, idx);
    const double margin = ledgercast::closure::kSplitTieEps * (std::abs(parent) + 1e-12);

    SplitChoice best;
    double best_sse = parent;
    for (int f = 0; f < kNumFeatures; ++f) {
        std::vector<double> values;
        values.reserve(idx.size());
        for (int i : idx) values.push_back(rows[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(f)]);
        std::sort(values.begin(), values.end());

        for (int k = 1; k < n; ++k) {
            if (values[static_cast<std::size_t>(k - 1)] == values[static_cast<std::size_t>(k)]) continue;
            const double threshold = values[static_cast<std::size_t>(k - 1)] +
                                     0.5 * (values[static_cast<std::size_t>(k)] -
                                            values[static_cast<std::size_t>(k - 1)]);
            std::vector<int> left, right;
            for (int i : idx) {
                const double v = rows[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(f)];
                (v < threshold ? left : right).push_back(i);
            }
            if (static_cast<int>(left.size()) < params.min_samples_leaf ||
                static_cast<int>(right.size()) < params.min_samples_leaf) {
                continue;
            }
            const double sse = naive_sse(residuals, left) + naive_sse(residuals, right);
            if (sse < best_sse - margin) {
                best.feature = f;
                best.threshold = threshold;
                best_sse = sse;
            }
        }
    }
    return best;
}

// Walks a fitted tree and checks every internal node's split against the
// brute-force choice and every leaf's value against the subset mean.
// Returns the number of mismatches.
inline int check_tree(const ledgercast::closure::Tree& tree,
                      const std::vector<ledgercast::closure::FeatureVector>& rows,
                      const std::vector<double>& residuals,
                      const ledgercast::closure::GbtParams& params) {
    int mismatches = 0;

    struct Frame {
        int node;
        std::vector<int> idx;
        int depth;
    };
    std::vector<int> all(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) all[i] = static_cast<int>(i);
    std::vector<Frame> stack{{0, std::move(all), 0}};

    while (!stack.empty()) {
        Frame frame = std::move(stack.back());
        stack.pop_back();
        const auto& node = tree.nodes[static_cast<std::size_t>(frame.node)];

        const bool can_split = frame.depth < params.max_depth &&
                               static_cast<int>(frame.idx.size()) >= 2 * params.min_samples_leaf;
        const SplitChoice want =
            can_split ? best_split(rows, residuals, frame.idx, params) : SplitChoice{};

        if (node.leaf) {
            if (want.feature >= 0) {
                ++mismatches; // library declined a split the oracle found
                continue;
            }
            double mean = 0.0;
            for (int i : frame.idx) mean += residuals[static_cast<std::size_t>(i)];
            mean /= static_cast<double>(frame.idx.size());
            if (std::abs(node.value - mean) > 1e-9 * (1.0 + std::abs(mean))) ++mismatches;
            continue;
        }

        if (node.feature != want.feature || node.threshold != want.threshold) {
            ++mismatches;
            continue;
        }

        Frame left{node.left, {}, frame.depth + 1};
        Frame right{node.right, {}, frame.depth + 1};
        for (int i : frame.idx) {
            const double v =
                rows[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(node.feature)];
            (v < node.threshold ? left.idx : right.idx).push_back(i);
        }
        stack.push_back(std::move(left));
        stack.push_back(std::move(right));
    }
    return mismatches;
}

} // namespace oracle
