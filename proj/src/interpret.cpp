#include "tlm/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace tlm {

bool ImpactVector::all_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void ImpactVector::check(int expected_dims) const {
    if (values.size() != static_cast<std::size_t>(expected_dims)) {
        throw DimensionMismatch("impact vector length " + std::to_string(values.size()) +
                                " != view dims " + std::to_string(expected_dims));
    }
    double sum = 0.0;
    for (double v : values) {
        if (v < 0.0) throw Error("impact vector has a negative entry");
        sum += v;
    }
    if (!all_zero() && std::abs(sum - 1.0) > 1e-9) {
        throw Error("impact vector sums to " + std::to_string(sum));
    }
}

double top_k_mass(std::span<const double> values, int top_k) {
    if (top_k < 1) throw Error("top_k must be >= 1");
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), values.size());
    std::vector<double> sorted(values.begin(), values.end());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                      std::greater<double>());
    return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
}

std::vector<double> aggregate_importance(const ImpactVector& iv, const ViewSpec& spec) {
    iv.check(spec.dims());
    if (spec.kind == ViewKind::ConcatTls) return iv.values;
    return offset_importance(iv.values, spec);
}

double concentration(const ImpactVector& iv, const ViewSpec& spec, int top_k) {
    return top_k_mass(aggregate_importance(iv, spec), top_k);
}

LeakerSelection select_leakers(const ImpactVector& iv, const ViewSpec& spec,
                               const LeakerPolicy& policy) {
    const std::vector<double> per_offset = aggregate_importance(iv, spec);

    std::vector<int> order(per_offset.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return per_offset[static_cast<std::size_t>(a)] > per_offset[static_cast<std::size_t>(b)];
    });

    LeakerSelection sel;
    sel.concentration = top_k_mass(per_offset, policy.top_k);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(policy.top_k), order.size());
    for (std::size_t i = 0; i < k; i++) {
        const int offset = order[i];
        const double share = per_offset[static_cast<std::size_t>(offset)];
        if (share >= policy.min_share) {
            sel.offsets.push_back(offset);
            sel.mass_covered += share;
        }
    }
    std::sort(sel.offsets.begin(), sel.offsets.end());
    return sel;
}

void export_impact_csv(const ImpactVector& iv, const ViewSpec& spec, const std::string& path) {
    iv.check(spec.dims());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    char buf[64];
    if (spec.kind == ViewKind::ConcatTls) {
        f << "flat_index,importance\n";
        for (std::size_t i = 0; i < iv.values.size(); i++) {
            std::snprintf(buf, sizeof(buf), "%.12g", iv.values[i]);
            f << i << ',' << buf << '\n';
        }
    } else {
        f << "flat_index,packet,offset,importance\n";
        const int n = spec.bytes_per_packet;
        for (std::size_t i = 0; i < iv.values.size(); i++) {
            std::snprintf(buf, sizeof(buf), "%.12g", iv.values[i]);
            f << i << ',' << (i / static_cast<std::size_t>(n)) << ','
              << (i % static_cast<std::size_t>(n)) << ',' << buf << '\n';
        }
    }
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace tlm
