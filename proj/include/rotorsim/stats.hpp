#pragma once

#include <algorithm>
#include <functional>
#include <string>

#include "rotorsim/numerics.hpp"

namespace rotorsim {

// Per-node scalar samples (actions or angle phases) from an ensemble or a
// thinned long run.
struct EmpiricalMeasure {
    std::vector<std::vector<double>> per_node;
    std::string provenance;

    void validate() const {
        for (const auto& s : per_node) {
            if (s.size() < 2) throw std::invalid_argument("empirical measure: need >= 2 samples");
            if (!all_finite(s)) throw std::invalid_argument("empirical measure: non-finite sample");
        }
    }
};

inline double mean_of(const std::vector<double>& v) {
    KahanSum s;
    for (double x : v) s.add(x);
    return s.value() / v.size();
}

inline double variance_of(const std::vector<double>& v) {
    double mu = mean_of(v);
    KahanSum s;
    for (double x : v) s.add((x - mu) * (x - mu));
    return s.value() / (v.size() - 1);
}

// 1-D Wasserstein-1 via the sorted-sample coupling; unequal sizes are
// aligned on a common quantile grid.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    KahanSum s;
    if (a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) s.add(std::abs(a[i] - b[i]));
        return s.value() / a.size();
    }
    const std::size_t L = std::max(a.size(), b.size());
    auto quantile = [](const std::vector<double>& v, double q) {
        auto idx = static_cast<std::size_t>(q * v.size());
        if (idx >= v.size()) idx = v.size() - 1;
        return v[idx];
    };
    for (std::size_t i = 0; i < L; ++i) {
        double q = (i + 0.5) / L;
        s.add(std::abs(quantile(a, q) - quantile(b, q)));
    }
    return s.value() / L;
}

// Sup distance between the empirical CDF and a reference CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double c = cdf(samples[i]);
        d = std::max(d, std::max(c - i / n, (i + 1) / n - c));
    }
    return d;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

// Asymptotic Kolmogorov critical values: c(alpha) = sqrt(-ln(alpha/2) / 2).
inline double ks_critical_one_sample(double alpha, std::size_t n) {
    return std::sqrt(-std::log(0.5 * alpha) / 2.0) / std::sqrt(static_cast<double>(n));
}

inline double ks_critical_two_sample(double alpha, std::size_t n, std::size_t m) {
    return std::sqrt(-std::log(0.5 * alpha) / 2.0) *
           std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

// Angle uniformity diagnostics: resultant length of the sample mean of
// e^{i phi} (about 1/sqrt(M) under the uniform law) plus a binned chi^2
// test, which also catches mean-zero but non-uniform laws.
struct UniformityReport {
    double resultant = 0.0;
    double chi2_stat = 0.0;
    double chi2_pvalue = 0.0;
    int bins = 0;
};

inline UniformityReport angle_uniformity(const std::vector<double>& phis, int bins = 16) {
    if (phis.empty()) throw std::invalid_argument("angle_uniformity: empty sample");
    if (bins < 2) throw std::invalid_argument("angle_uniformity: need >= 2 bins");
    KahanSum cr, ci;
    std::vector<double> counts(bins, 0.0);
    for (double phi : phis) {
        cr.add(std::cos(phi));
        ci.add(std::sin(phi));
        double w = std::fmod(phi, two_pi);
        if (w < 0.0) w += two_pi;
        int bin = std::min(bins - 1, static_cast<int>(w / two_pi * bins));
        counts[bin] += 1.0;
    }
    UniformityReport rep;
    rep.bins = bins;
    const double n = static_cast<double>(phis.size());
    rep.resultant = std::hypot(cr.value(), ci.value()) / n;
    const double expect = n / bins;
    KahanSum chi;
    for (double c : counts) chi.add((c - expect) * (c - expect) / expect);
    rep.chi2_stat = chi.value();
    rep.chi2_pvalue = chi2_sf(rep.chi2_stat, bins - 1);
    return rep;
}

// Time average after burn-in with a batch-means standard error.
struct ErgodicAverage {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
    int batches = 0;
};

inline ErgodicAverage ergodic_average(const std::vector<double>& times,
                                      const std::vector<double>& values, double burn_in,
                                      int batches = 30) {
    if (times.size() != values.size() || times.empty())
        throw std::invalid_argument("ergodic_average: bad series");
    if (burn_in >= times.back())
        throw std::invalid_argument("ergodic_average: burn-in reaches past the horizon");
    std::vector<double> kept;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= burn_in) kept.push_back(values[i]);
    ErgodicAverage out;
    out.count = kept.size();
    out.mean = mean_of(kept);
    int nb = std::min<std::size_t>(batches, kept.size());
    out.batches = nb;
    if (nb < 2 || variance_of(kept) == 0.0) {
        out.std_error = 0.0;
        return out;
    }
    std::size_t len = kept.size() / nb;
    std::vector<double> bm;
    for (int b = 0; b < nb; ++b) {
        KahanSum s;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s.add(kept[i]);
        bm.push_back(s.value() / len);
    }
    out.std_error = std::sqrt(variance_of(bm) / nb);
    return out;
}

inline double lag1_autocorr(const std::vector<double>& v) {
    if (v.size() < 3) return 0.0;
    double mu = mean_of(v);
    KahanSum num, den;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) num.add((v[i] - mu) * (v[i + 1] - mu));
    for (double x : v) den.add((x - mu) * (x - mu));
    if (den.value() == 0.0) return 0.0;
    return num.value() / den.value();
}

inline double effective_sample_size(std::size_t n, double rho1) {
    double rho = std::clamp(rho1, 0.0, 0.999);
    return n * (1.0 - rho) / (1.0 + rho);
}

// Percentile-bootstrap standard error of W1(a, b).
inline double w1_bootstrap_se(const std::vector<double>& a, const std::vector<double>& b, int reps,
                              std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w1s;
    std::vector<double> ra(a.size()), rb(b.size());
    for (int r = 0; r < reps; ++r) {
        for (auto& x : ra) x = a[static_cast<std::size_t>(rng.uniform() * a.size())];
        for (auto& x : rb) x = b[static_cast<std::size_t>(rng.uniform() * b.size())];
        w1s.push_back(wasserstein1(ra, rb));
    }
    return std::sqrt(variance_of(w1s));
}

// Null calibration for "is W1(a,b) consistent with equal laws": both sides
// are resampled from the pooled sample; returns mean + 2 sd of the null W1.
inline double w1_null_threshold(const std::vector<double>& a, const std::vector<double>& b,
                                int reps, std::uint64_t seed) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    Rng rng(seed);
    std::vector<double> w1s;
    std::vector<double> ra(a.size()), rb(b.size());
    for (int r = 0; r < reps; ++r) {
        for (auto& x : ra) x = pooled[static_cast<std::size_t>(rng.uniform() * pooled.size())];
        for (auto& x : rb) x = pooled[static_cast<std::size_t>(rng.uniform() * pooled.size())];
        w1s.push_back(wasserstein1(ra, rb));
    }
    return mean_of(w1s) + 2.0 * std::sqrt(variance_of(w1s));
}

// --- law comparison -------------------------------------------------------

struct NodeComparison {
    int node = 0;
    double w1 = 0.0;
    double ks = 0.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double se = 0.0;  // standard error of the mean difference
    bool pass = false;
};

struct ComparisonReport {
    std::vector<NodeComparison> nodes;
    bool all_pass = true;
};

struct ComparisonTolerances {
    double w1_tol = 0.05;
    double ks_alpha = 0.01;
};

inline ComparisonReport compare_laws(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                     const ComparisonTolerances& tol = {}) {
    a.validate();
    b.validate();
    if (a.per_node.size() != b.per_node.size())
        throw std::invalid_argument("compare_laws: mismatched node sets");
    ComparisonReport rep;
    for (std::size_t j = 0; j < a.per_node.size(); ++j) {
        const auto& sa = a.per_node[j];
        const auto& sb = b.per_node[j];
        NodeComparison nc;
        nc.node = static_cast<int>(j);
        nc.w1 = wasserstein1(sa, sb);
        nc.ks = ks_two_sample(sa, sb);
        nc.mean_a = mean_of(sa);
        nc.mean_b = mean_of(sb);
        nc.se = std::sqrt(variance_of(sa) / sa.size() + variance_of(sb) / sb.size());
        double crit = ks_critical_two_sample(tol.ks_alpha, sa.size(), sb.size());
        nc.pass = nc.w1 < tol.w1_tol && nc.ks < crit;
        rep.all_pass = rep.all_pass && nc.pass;
        rep.nodes.push_back(nc);
    }
    return rep;
}

}  // namespace rotorsim
