#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>

#include "rotorsim/numerics.hpp"

namespace rotorsim {

// Finite box in Z^d with free boundaries. Nodes are enumerated
// lexicographically so identical inputs always give identical orderings.
// Spins alternate as (-1)^{|j|_1}; nodes in the defect set may carry an
// arbitrary configured sign.
struct Lattice {
    int dim = 0;
    std::vector<int> extents;
    std::vector<std::vector<int>> nodes;      // lexicographic order
    std::vector<std::vector<int>> neighbors;  // node indices, |j-k|_1 = 1
    std::vector<int> signs;                   // +1 / -1 per node
    std::vector<int> defects;                 // node indices in C_D, sorted
    std::vector<char> in_defect_closure;      // flag per node: within 1 of C_D

    int size() const { return static_cast<int>(nodes.size()); }

    // flat index of a coordinate tuple, -1 if outside the box
    int index_of(const std::vector<int>& c) const {
        if (static_cast<int>(c.size()) != dim) return -1;
        long idx = 0;
        for (int ax = 0; ax < dim; ++ax) {
            if (c[ax] < 0 || c[ax] >= extents[ax]) return -1;
            idx = idx * extents[ax] + c[ax];
        }
        return static_cast<int>(idx);
    }

    int l1_distance(int i, int j) const {
        int d = 0;
        for (int ax = 0; ax < dim; ++ax) d += std::abs(nodes[i][ax] - nodes[j][ax]);
        return d;
    }

    bool is_defect(int i) const {
        return std::binary_search(defects.begin(), defects.end(), i);
    }
};

inline Lattice build_lattice(int dim, const std::vector<int>& extents,
                             const std::vector<std::vector<int>>& defects = {},
                             const std::vector<int>& defect_signs = {}) {
    if (dim < 1) throw std::invalid_argument("build_lattice: dimension must be >= 1");
    if (static_cast<int>(extents.size()) != dim)
        throw std::invalid_argument("build_lattice: extents must have one entry per axis");
    for (int e : extents)
        if (e < 1) throw std::invalid_argument("build_lattice: extents must be positive");
    if (!defect_signs.empty() && defect_signs.size() != defects.size())
        throw std::invalid_argument("build_lattice: defect_signs must match defects");
    for (int s : defect_signs)
        if (s != 1 && s != -1) throw std::invalid_argument("build_lattice: defect sign must be +/-1");

    Lattice lat;
    lat.dim = dim;
    lat.extents = extents;

    long n = 1;
    for (int e : extents) n *= e;
    lat.nodes.reserve(n);
    std::vector<int> c(dim, 0);
    for (long i = 0; i < n; ++i) {
        lat.nodes.push_back(c);
        for (int ax = dim - 1; ax >= 0; --ax) {
            if (++c[ax] < extents[ax]) break;
            c[ax] = 0;
        }
    }

    lat.neighbors.resize(n);
    for (long i = 0; i < n; ++i) {
        std::vector<int> nb = lat.nodes[i];
        for (int ax = 0; ax < dim; ++ax) {
            for (int step : {-1, 1}) {
                nb[ax] += step;
                int k = lat.index_of(nb);
                if (k >= 0) lat.neighbors[i].push_back(k);
                nb[ax] -= step;
            }
        }
        std::sort(lat.neighbors[i].begin(), lat.neighbors[i].end());
    }

    lat.signs.resize(n);
    for (long i = 0; i < n; ++i) {
        int abs1 = 0;
        for (int x : lat.nodes[i]) abs1 += std::abs(x);
        lat.signs[i] = (abs1 % 2 == 0) ? 1 : -1;
    }

    for (std::size_t d = 0; d < defects.size(); ++d) {
        int idx = lat.index_of(defects[d]);
        if (idx < 0) throw std::invalid_argument("build_lattice: defect node outside the box");
        lat.defects.push_back(idx);
        lat.signs[idx] = defect_signs.empty() ? 1 : defect_signs[d];
    }
    std::sort(lat.defects.begin(), lat.defects.end());
    lat.defects.erase(std::unique(lat.defects.begin(), lat.defects.end()), lat.defects.end());

    lat.in_defect_closure.assign(n, 0);
    for (int d : lat.defects) {
        lat.in_defect_closure[d] = 1;
        for (int k : lat.neighbors[d]) lat.in_defect_closure[k] = 1;
    }
    return lat;
}

inline int spin_sign(const Lattice& lat, const std::vector<int>& node) {
    int idx = lat.index_of(node);
    if (idx < 0) throw std::out_of_range("spin_sign: node outside the lattice");
    return lat.signs[idx];
}

// Parameters of the exponentially weighted l_q norm centered at a node.
struct WeightedNormParams {
    double gamma = 0.9;  // in (1/2, 1)
    double q = 2.0;      // >= 1
    int center = 0;
};

inline void validate(const WeightedNormParams& p, const Lattice& lat) {
    if (!(p.gamma > 0.5 && p.gamma < 1.0))
        throw std::invalid_argument("weighted norm: gamma must lie in (1/2, 1)");
    if (!(p.q >= 1.0)) throw std::invalid_argument("weighted norm: q must be >= 1");
    if (p.center < 0 || p.center >= lat.size())
        throw std::invalid_argument("weighted norm: center outside the lattice");
}

inline double weighted_norm(const Lattice& lat, const State& v, const WeightedNormParams& p) {
    validate(p, lat);
    if (static_cast<int>(v.size()) != lat.size())
        throw std::invalid_argument("weighted_norm: state size mismatch");
    KahanSum s;
    for (int k = 0; k < lat.size(); ++k)
        s.add(std::pow(p.gamma, lat.l1_distance(k, p.center)) * std::pow(std::abs(v[k]), p.q));
    return std::pow(s.value(), 1.0 / p.q);
}

inline double weighted_dot(const Lattice& lat, const State& v1, const State& v2, double gamma,
                           int center) {
    WeightedNormParams p{gamma, 2.0, center};
    validate(p, lat);
    if (static_cast<int>(v1.size()) != lat.size() || static_cast<int>(v2.size()) != lat.size())
        throw std::invalid_argument("weighted_dot: state size mismatch");
    KahanSum s;
    for (int k = 0; k < lat.size(); ++k)
        s.add(std::pow(gamma, lat.l1_distance(k, center)) * rdot(v1[k], v2[k]));
    return s.value();
}

// C(gamma) = sum_k gamma^{|k-j|}; the additive constant in the norm
// monotonicity bound.
inline double weight_sum(const Lattice& lat, double gamma, int center) {
    KahanSum s;
    for (int k = 0; k < lat.size(); ++k) s.add(std::pow(gamma, lat.l1_distance(k, center)));
    return s.value();
}

}  // namespace rotorsim
