#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynclus/metric.hpp"
#include "dynclus/schedule.hpp"

namespace dynclus {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::vector<double>> distanceMatrixFromCoords(
    const std::vector<std::vector<double>>& coords) {
  const std::size_t n = coords.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    if (coords[a].size() != coords[0].size()) throw IoError("inconsistent coordinate dimensions");
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t q = 0; q < coords[a].size(); ++q) {
        double diff = coords[a][q] - coords[b][q];
        s += diff * diff;
      }
      dist[a][b] = dist[b][a] = std::sqrt(s);
    }
  }
  return dist;
}

inline nlohmann::json instanceToJson(const MetricInstance& inst) {
  nlohmann::json j;
  if (!inst.coords.empty())
    j["points"] = inst.coords;
  else
    j["distance_matrix"] = inst.dist;
  j["k"] = inst.k;
  j["gamma"] = inst.gamma;
  if (inst.B) j["B"] = *inst.B;
  j["problem"] = to_string(inst.kind);
  nlohmann::json steps = nlohmann::json::array();
  for (const TimeStep& s : inst.steps) {
    nlohmann::json js;
    js["clients"] = s.clients;
    js["facilities"] = s.facilities;
    if (!s.weights.empty()) js["weights"] = s.weights;
    if (s.outlier_target) js["outlier_target"] = *s.outlier_target;
    if (!s.demands.empty()) js["demands"] = s.demands;
    if (!s.facility_weights.empty()) js["facility_weights"] = s.facility_weights;
    steps.push_back(js);
  }
  j["steps"] = steps;
  return j;
}

inline MetricInstance instanceFromJson(const nlohmann::json& j) {
  MetricInstance inst;
  try {
    if (j.contains("points")) {
      inst.coords = j.at("points").get<std::vector<std::vector<double>>>();
      inst.dist = distanceMatrixFromCoords(inst.coords);
    } else if (j.contains("distance_matrix")) {
      inst.dist = j.at("distance_matrix").get<std::vector<std::vector<double>>>();
    } else {
      throw IoError("instance needs either points or distance_matrix");
    }
    inst.k = j.at("k").get<int>();
    inst.gamma = j.value("gamma", 1.0);
    if (j.contains("B") && !j.at("B").is_null()) inst.B = j.at("B").get<double>();
    inst.kind = problemKindFromString(j.at("problem").get<std::string>());
    for (const auto& js : j.at("steps")) {
      TimeStep s;
      s.clients = js.value("clients", std::vector<int>{});
      s.facilities = js.value("facilities", std::vector<int>{});
      s.weights = js.value("weights", std::vector<double>{});
      if (js.contains("outlier_target")) s.outlier_target = js.at("outlier_target").get<int>();
      s.demands = js.value("demands", std::vector<double>{});
      s.facility_weights = js.value("facility_weights", std::vector<double>{});
      inst.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed instance file: ") + e.what());
  }
  validateInstance(inst); // includes the metric checks; violation is a load error
  return inst;
}

inline MetricInstance loadInstance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open instance file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed instance file: ") + e.what());
  }
  return instanceFromJson(j);
}

inline void saveInstance(const std::string& path, const MetricInstance& inst) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write instance file: " + path);
  out << instanceToJson(inst).dump(2) << "\n";
}

inline nlohmann::json scheduleToJson(const Schedule& s) {
  nlohmann::json j;
  j["open_sets"] = s.open_sets;
  nlohmann::json trans = nlohmann::json::array();
  for (const auto& m : s.transitions) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pr : m) pairs.push_back(nlohmann::json::array({pr.first, pr.second}));
    trans.push_back(pairs);
  }
  j["transitions"] = trans;
  j["costs"] = {{"service", s.service_cost}, {"movement", s.movement_cost}, {"total", s.total_cost}};
  return j;
}

inline Schedule scheduleFromJson(const nlohmann::json& j) {
  Schedule s;
  try {
    s.open_sets = j.at("open_sets").get<std::vector<std::vector<int>>>();
    for (const auto& m : j.at("transitions")) {
      std::vector<std::pair<int, int>> moves;
      for (const auto& pr : m) moves.emplace_back(pr.at(0).get<int>(), pr.at(1).get<int>());
      s.transitions.push_back(std::move(moves));
    }
    if (j.contains("costs")) {
      s.service_cost = j.at("costs").value("service", 0.0);
      s.movement_cost = j.at("costs").value("movement", 0.0);
      s.total_cost = j.at("costs").value("total", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed schedule file: ") + e.what());
  }
  return s;
}

inline void saveSchedule(const std::string& path, const Schedule& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schedule file: " + path);
  out << scheduleToJson(s).dump(2) << "\n";
}

inline Schedule loadSchedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schedule file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed schedule file: ") + e.what());
  }
  return scheduleFromJson(j);
}

// FNV-1a digest of the canonical instance encoding, used in run reports.
inline std::string instanceDigest(const MetricInstance& inst) {
  std::string enc = instanceToJson(inst).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : enc) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace dynclus
