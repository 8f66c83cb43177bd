#pragma once

// Test-only reference computations, independent of the library code paths.

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

struct ClassSpec {
    int procs;
    double demand;
    double think;
};

struct ClassResult {
    double throughput;
    double response;
};

// Closed network of one PS CPU and per-class think, exponential service and
// think times. Builds the CTMC over per-class CPU populations and solves the
// balance equations directly by Gaussian elimination.
inline std::vector<ClassResult> ps_ctmc(const std::vector<ClassSpec>& classes) {
    const std::size_t k = classes.size();
    std::vector<int> lo(k), hi(k);
    std::size_t states = 1;
    for (std::size_t c = 0; c < k; ++c) {
        lo[c] = classes[c].think == 0.0 ? classes[c].procs : 0;
        hi[c] = classes[c].procs;
        states *= static_cast<std::size_t>(hi[c] - lo[c] + 1);
    }
    auto decode = [&](std::size_t idx) {
        std::vector<int> n(k);
        for (std::size_t c = 0; c < k; ++c) {
            const auto span = static_cast<std::size_t>(hi[c] - lo[c] + 1);
            n[c] = lo[c] + static_cast<int>(idx % span);
            idx /= span;
        }
        return n;
    };
    auto encode = [&](const std::vector<int>& n) {
        std::size_t idx = 0;
        for (std::size_t c = k; c-- > 0;) idx = idx * static_cast<std::size_t>(hi[c] - lo[c] + 1) + (n[c] - lo[c]);
        return idx;
    };

    // A[j][i] = rate i -> j (transposed generator), diagonal = -outflow.
    std::vector<std::vector<double>> a(states, std::vector<double>(states, 0.0));
    for (std::size_t i = 0; i < states; ++i) {
        auto n = decode(i);
        int total = 0;
        for (int v : n) total += v;
        for (std::size_t c = 0; c < k; ++c) {
            if (classes[c].think == 0.0) continue;  // completion re-enters instantly
            if (n[c] > 0) {
                const double rate = n[c] / (total * classes[c].demand);
                auto m = n;
                --m[c];
                a[encode(m)][i] += rate;
                a[i][i] -= rate;
            }
            if (n[c] < classes[c].procs) {
                const double rate = (classes[c].procs - n[c]) / classes[c].think;
                auto m = n;
                ++m[c];
                a[encode(m)][i] += rate;
                a[i][i] -= rate;
            }
        }
    }
    // Replace the last balance equation by normalization.
    std::vector<double> b(states, 0.0);
    for (std::size_t j = 0; j < states; ++j) a[states - 1][j] = 1.0;
    b[states - 1] = 1.0;
    for (std::size_t col = 0; col < states; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < states; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        if (std::abs(a[col][col]) < 1e-300) throw std::runtime_error("singular generator");
        for (std::size_t r = 0; r < states; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c2 = col; c2 < states; ++c2) a[r][c2] -= f * a[col][c2];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> pi(states);
    for (std::size_t i = 0; i < states; ++i) pi[i] = b[i] / a[i][i];

    std::vector<ClassResult> out(k, {0.0, 0.0});
    std::vector<double> at_cpu(k, 0.0);
    for (std::size_t i = 0; i < states; ++i) {
        auto n = decode(i);
        int total = 0;
        for (int v : n) total += v;
        for (std::size_t c = 0; c < k; ++c) {
            at_cpu[c] += pi[i] * n[c];
            if (n[c] > 0) out[c].throughput += pi[i] * n[c] / (total * classes[c].demand);
        }
    }
    for (std::size_t c = 0; c < k; ++c) out[c].response = at_cpu[c] / out[c].throughput;
    return out;
}

// Largest amount by which an integer allocation falls short of its quotas.
inline double max_shortfall(const std::vector<double>& quotas, const std::vector<long>& shares) {
    double worst = 0.0;
    for (std::size_t i = 0; i < quotas.size(); ++i) worst = std::max(worst, quotas[i] - static_cast<double>(shares[i]));
    return worst;
}

}  // namespace oracle
