#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "saul/binary_io.hpp"
#include "saul/general_bbq.hpp"

namespace saul {

// Declarative finite function class:
//
//   {
//     "features": ["age", "income"],          // optional; names for feature indices
//     "cap": 256,                             // optional
//     "functions": [
//       {"name": "rich",  "type": "threshold", "feature": "income", "threshold": 0.2,
//        "above": 1.0, "below": 0.0},
//       {"name": "half",  "type": "constant",  "value": 0.5},
//       {"name": "memo",  "type": "table",     "values": {"0": 1.0, "7": 0.0}, "fallback": 0.5}
//     ]
//   }
//
// A threshold feature may be a name from "features" or a zero-based index. Table keys are
// sample ids. All values must lie in [0, 1].
inline FiniteFunctionClass parse_function_class(const nlohmann::json& doc) {
    try {
        std::unordered_map<std::string, Eigen::Index> feature_index;
        if (doc.contains("features")) {
            const auto names = doc.at("features").get<std::vector<std::string>>();
            for (std::size_t i = 0; i < names.size(); ++i) {
                if (!feature_index.emplace(names[i], static_cast<Eigen::Index>(i)).second) {
                    throw FormatError("duplicate feature name '" + names[i] + "'");
                }
            }
        }
        const auto unit = [](double v, const std::string& what) {
            if (!(v >= 0.0 && v <= 1.0)) throw FormatError(what + " must lie in [0, 1]");
            return v;
        };
        std::vector<ClassFunction> fs;
        for (const auto& f : doc.at("functions")) {
            const auto name = f.at("name").get<std::string>();
            const auto type = f.at("type").get<std::string>();
            if (type == "constant") {
                fs.push_back(constant_function(name, unit(f.at("value").get<double>(), name + ".value")));
            } else if (type == "threshold") {
                Eigen::Index feature = 0;
                const auto& ref = f.at("feature");
                if (ref.is_string()) {
                    auto it = feature_index.find(ref.get<std::string>());
                    if (it == feature_index.end()) throw FormatError("unknown feature '" + ref.get<std::string>() + "'");
                    feature = it->second;
                } else {
                    feature = ref.get<Eigen::Index>();
                    if (feature < 0) throw FormatError(name + ".feature must be nonnegative");
                }
                fs.push_back(threshold_function(name, feature, f.at("threshold").get<double>(),
                                                unit(f.at("above").get<double>(), name + ".above"),
                                                unit(f.at("below").get<double>(), name + ".below")));
            } else if (type == "table") {
                std::unordered_map<SampleId, double> table;
                for (const auto& [key, value] : f.at("values").items()) {
                    std::size_t used = 0;
                    const auto id = std::stoull(key, &used);
                    if (used != key.size()) throw FormatError("table key '" + key + "' is not a sample id");
                    table.emplace(id, unit(value.get<double>(), name + "[" + key + "]"));
                }
                fs.push_back(table_function(name, std::move(table), unit(f.value("fallback", 0.5), name + ".fallback")));
            } else {
                throw FormatError("unknown function type '" + type + "'");
            }
        }
        const auto cap = doc.value("cap", FiniteFunctionClass::kDefaultCap);
        return FiniteFunctionClass(std::move(fs), cap);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed function class: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("malformed function class: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw FormatError(std::string("malformed function class: ") + e.what());
    }
}

inline FiniteFunctionClass load_function_class(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return parse_function_class(doc);
}

}  // namespace saul
