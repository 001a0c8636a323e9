#pragma once

// JSON file formats: grid functions / weights, sparse collections, and the
// corona dump used for debugging and golden tests.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqlab/corona.hpp"
#include "sqlab/grid.hpp"
#include "sqlab/sparse.hpp"

namespace sqlab {

using json = nlohmann::ordered_json;

/// {"n": int, "L": int, "values": [real, ...]} in lexicographic cell order.
inline json gridfunction_to_json(const GridFunction& f) {
    json j;
    j["n"] = f.spec.n;
    j["L"] = f.spec.L;
    j["values"] = f.values;
    return j;
}

inline GridFunction gridfunction_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("L") || !j.contains("values"))
        throw grid_error("grid function JSON: missing n, L, or values");
    GridSpec spec{j.at("n").get<int>(), j.at("L").get<int>()};
    spec.validate();
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != spec.cell_count())
        throw grid_error("grid function JSON: value count != 2^{nL}");
    return GridFunction(spec, std::move(values));
}

inline Weight weight_from_json(const json& j) { return Weight(gridfunction_from_json(j)); }

inline json cube_to_json(const DyadicCube& q, int n) {
    json j;
    j["k"] = q.level;
    j["i"] = cube_coords(q, n);
    return j;
}

inline DyadicCube cube_from_json(const json& j) {
    return cube_from_coords(j.at("k").get<int>(),
                            j.at("i").get<std::vector<std::uint32_t>>());
}

/// JSON list of {"k": int, "i": [int, ...]}; round-trip stable.
inline json sparse_to_json(const SparseCollection& s) {
    json j = json::array();
    for (const auto& q : s.cubes()) j.push_back(cube_to_json(q, s.spec().n));
    return j;
}

inline SparseCollection sparse_from_json(const GridSpec& g, const json& j) {
    std::vector<DyadicCube> cubes;
    for (const auto& jq : j) cubes.push_back(cube_from_json(jq));
    return SparseCollection::create(g, std::move(cubes));
}

/// {F-cubes, G-cubes, fibers: [(F, G, [Q...])]}.
inline json corona_to_json(const Corona& c, int n) {
    json j;
    j["F"] = json::array();
    for (const auto& q : c.f_cubes.all) j["F"].push_back(cube_to_json(q, n));
    j["G"] = json::array();
    for (const auto& q : c.g_cubes.all) j["G"].push_back(cube_to_json(q, n));
    j["fibers"] = json::array();
    for (const auto& [fg, qs] : c.fibers) {
        DyadicCube F{int(fg.first >> 32), fg.first & 0xffffffffull};
        DyadicCube G{int(fg.second >> 32), fg.second & 0xffffffffull};
        json fiber;
        fiber["F"] = cube_to_json(F, n);
        fiber["G"] = cube_to_json(G, n);
        fiber["Q"] = json::array();
        for (const auto& q : qs) fiber["Q"].push_back(cube_to_json(q, n));
        j["fibers"].push_back(std::move(fiber));
    }
    return j;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw grid_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

inline void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw grid_error("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace sqlab
