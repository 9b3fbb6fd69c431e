/*
 * Copyright 2026 The pdsrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Value, policy and Q tables as JSON documents tagged with their dimensions
// and a hash of the system grids they index.

#include "pdsrl/harness/config.hpp"
#include "pdsrl/mdp_planner.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdsrl::harness {

class TableFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// kind: "values", "pds_values", "policy" or "q".
struct Table {
    std::string kind;
    int rows = 0;
    int cols = 1;
    std::vector<double> data;
};

inline Json table_to_json(const Table& t, const SystemConfig& sys) {
    if (t.data.size() != static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols))
        throw TableFormatError("table: data size does not match dimensions");
    for (double v : t.data)
        if (!std::isfinite(v) && !(t.kind == "q" && v == std::numeric_limits<double>::infinity()))
            throw TableFormatError("table: non-finite entry");
    Json data = Json::array();
    for (double v : t.data) data.push_back(std::isinf(v) ? Json(nullptr) : Json(v));
    return Json{{"format", "pdsrl-table"},
                {"version", 1},
                {"kind", t.kind},
                {"dims", {t.rows, t.cols}},
                {"grids",
                 {{"capacity", sys.capacity()},
                  {"channel_gains_db", sys.channel_gains_db},
                  {"plr_levels", sys.plr_levels},
                  {"z_max", sys.z_max}}},
                {"config_hash", system_hash(sys)},
                {"data", std::move(data)}};
}

/// Parses and checks a table against the expected kind and system. Infeasible Q entries come back as +inf.
inline Table table_from_json(const Json& j, const std::string& kind, const SystemConfig& sys) {
    try {
        if (j.at("format") != "pdsrl-table" || j.at("version") != 1) throw TableFormatError("table: unknown format");
        Table t;
        t.kind = j.at("kind").get<std::string>();
        if (t.kind != kind) throw TableFormatError("table: expected kind '" + kind + "', found '" + t.kind + "'");
        const auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 2) throw TableFormatError("table: dims must have two entries");
        t.rows = dims[0];
        t.cols = dims[1];
        const int states = StateSpace(sys).size();
        const int expected_cols = kind == "q" ? ActionSpace(sys).size() : 1;
        if (t.rows != states || t.cols != expected_cols) throw TableFormatError("table: dimensions do not match config");
        if (j.at("config_hash").get<std::string>() != system_hash(sys))
            throw TableFormatError("table: grids or parameters differ from config");
        const Json& data = j.at("data");
        if (!data.is_array() || data.size() != static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols))
            throw TableFormatError("table: data length does not match dims");
        t.data.reserve(data.size());
        for (const Json& v : data) {
            if (v.is_null() && kind == "q") t.data.push_back(std::numeric_limits<double>::infinity());
            else if (v.is_number()) t.data.push_back(v.get<double>());
            else throw TableFormatError("table: non-numeric entry");
        }
        if (kind == "policy") {
            const ActionSpace A(sys);
            const StateSpace S(sys);
            for (int si = 0; si < t.rows; ++si) {
                const double a = t.data[static_cast<std::size_t>(si)];
                if (a != std::floor(a) || a < 0 || a >= A.feasible_count(S.state(si)))
                    throw TableFormatError("table: policy entry is not a feasible action index");
            }
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw TableFormatError(std::string("table: ") + e.what());
    }
}

inline void save_table(const std::string& path, const Table& t, const SystemConfig& sys) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << table_to_json(t, sys).dump() << '\n';
}

inline Table load_table(const std::string& path, const std::string& kind, const SystemConfig& sys) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw TableFormatError(std::string("table: ") + e.what());
    }
    return table_from_json(j, kind, sys);
}

inline Table values_table(const std::string& kind, const std::vector<double>& v) {
    return {kind, static_cast<int>(v.size()), 1, v};
}

inline Table policy_table(const planner::PolicyTable& pi) {
    return {"policy", static_cast<int>(pi.size()), 1, std::vector<double>(pi.begin(), pi.end())};
}

inline planner::PolicyTable to_policy(const Table& t) {
    return planner::PolicyTable(t.data.begin(), t.data.end());
}

inline Table q_table(const planner::QTable& q) { return {"q", q.num_states, q.num_actions, q.values}; }

inline planner::QTable to_q(const Table& t) {
    planner::QTable q(t.rows, t.cols);
    q.values = t.data;
    return q;
}

}  // namespace pdsrl::harness
