#pragma once

#include "diffrl/network.hpp"
#include "diffrl/property.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace diffrl {

/// Deterministic builders for the three case-study policy families,
/// with seeded random weights standing in for trained checkpoints.
struct ZooSpec {
    enum class Family { Pensieve, Cmars, Aurora } family = Family::Pensieve;
    int hidden = 128;       // Pensieve H / Aurora H
    int cmars_depth = 2;    // CMARS: 2 or 3 hidden FC(32) blocks
    int cmars_actions = 15; // CMARS: M in {15, 30}
    int aurora_history = 3; // Aurora: k history steps (input 3k)
    std::uint64_t seed = 0;

    static ZooSpec pensieve(int hidden, std::uint64_t seed);
    static ZooSpec cmars(int depth, int actions, std::uint64_t seed);
    static ZooSpec aurora(int history, int hidden, std::uint64_t seed);
};

Network zoo_build(const ZooSpec &spec);

/// The named properties of each family with its published parameters.
std::vector<PropertySpec> zoo_preset_properties(const ZooSpec &spec);

/// Presets sized against an already-built network of the given family
/// (widths and action counts are inferred from the network).
std::vector<PropertySpec> zoo_preset_properties(ZooSpec::Family family, const Network &net);

ZooSpec::Family zoo_family_from_name(const std::string &name);

} // namespace diffrl
