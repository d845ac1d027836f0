#include "mfc/prime_expectation.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace mfc {

void seeded_subsample(int n, int m, const RandomSource& rng, SubsampleId id,
                      std::span<int> out) {
    if (m == n) {
        std::iota(out.begin(), out.end(), 0);
        return;
    }
    // One counter-based draw keys a splitmix64 chain for the whole
    // subsample, so a size-m draw costs one Philox call. Floyd's sampling
    // gives m distinct indices; membership is tracked with a
    // generation-stamped scratch array (no per-call allocation, and the
    // stamps never influence the output).
    std::uint64_t state, unused;
    rng.words(StreamDomain::subsample, id.particle, id.node, 0, 0, state,
              unused);
    const auto next = [&state]() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    };
    thread_local std::vector<std::uint32_t> stamp;
    thread_local std::uint32_t generation = 0;
    if (static_cast<int>(stamp.size()) < n) stamp.assign(n, 0);
    if (++generation == 0) {
        std::fill(stamp.begin(), stamp.end(), 0);
        generation = 1;
    }
    int filled = 0;
    for (int j = n - m; j < n; ++j) {
        int pick = static_cast<int>(next() % (static_cast<std::uint64_t>(j) + 1));
        if (stamp[pick] == generation) pick = j;
        stamp[pick] = generation;
        out[filled++] = pick;
    }
}

double prime_expectation(
    const std::function<double(std::span<const double>, std::span<const double>)>& f,
    const EmpiricalLaw& law, std::span<const double> own_value,
    int interaction_budget, const RandomSource& rng, SubsampleId id) {
    const int n = law.size();
    if (n == 0) throw domain_error("prime_expectation on an empty law");
    const int m = interaction_budget;
    if (m < 2 || m > n) {
        throw domain_error("interaction budget must satisfy 2 <= M <= N");
    }
    double acc = 0.0;
    if (m == n) {
        for (int j = 0; j < n; ++j) acc += f(law.atom(j), own_value);
    } else {
        std::vector<int> sub(m);
        seeded_subsample(n, m, rng, id, sub);
        for (int j : sub) acc += f(law.atom(j), own_value);
    }
    return acc / m;
}

double prime_expectation(const std::function<double(double, double)>& f,
                         const EmpiricalLaw& law, double own_value,
                         int interaction_budget, const RandomSource& rng,
                         SubsampleId id) {
    const auto wrap = [&f](std::span<const double> tp,
                           std::span<const double> t) {
        return f(tp[0], t[0]);
    };
    const double own[1] = {own_value};
    return prime_expectation(wrap, law, std::span<const double>(own, 1),
                             interaction_budget, rng, id);
}

} // namespace mfc
