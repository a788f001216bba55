#pragma once

#include <span>
#include <string>
#include <vector>

#include "tlm/features.hpp"

namespace tlm {

// Normalized per-input-dimension importance. Sums to 1 (within 1e-9) or is
// all zero for a degenerate single-leaf model.
struct ImpactVector {
    std::vector<double> values;

    bool all_zero() const;
    void check(int expected_dims) const;  // throws DimensionMismatch / Error
};

struct LeakerPolicy {
    int top_k = 16;
    double min_share = 0.02;
};

struct LeakerSelection {
    std::vector<int> offsets;   // within-packet offsets, or flat indices for ConcatTls
    double mass_covered = 0.0;  // sum of the selected entries' shares
    double concentration = 0.0; // top-k mass of the aggregated vector
};

// Sum of the top_k largest entries of a non-negative vector.
double top_k_mass(std::span<const double> values, int top_k);

// Per-offset aggregation for packetized views (identity for ConcatTls).
std::vector<double> aggregate_importance(const ImpactVector& iv, const ViewSpec& spec);

// Top-k mass after offset aggregation.
double concentration(const ImpactVector& iv, const ViewSpec& spec, int top_k);

// Offsets among the top_k aggregated entries whose share is >= min_share,
// sorted ascending, with covered mass and concentration recorded.
LeakerSelection select_leakers(const ImpactVector& iv, const ViewSpec& spec,
                               const LeakerPolicy& policy);

// CSV rows "flat_index,packet,offset,importance" (packetized) or
// "flat_index,importance" (ConcatTls), 12 significant digits.
void export_impact_csv(const ImpactVector& iv, const ViewSpec& spec, const std::string& path);

}  // namespace tlm
