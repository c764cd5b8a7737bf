// Deterministic serialization: JSON/CSV emission with floating-point values
// printed at a fixed 17 significant digits and stable iteration order.

#pragma once

#include "qpr/kam.hpp"
#include "qpr/quantum.hpp"
#include "qpr/spectrum.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace qpr::io {

using json = nlohmann::ordered_json;

// %.17g rendering; used for every floating-point field (stored as strings so
// the byte stream is independent of the JSON library's float printer).
std::string fmt17(double x);

json torus_to_json(const TorusMap& f);
TorusMap torus_from_json(const json& j);

json to_json(const Mat2& m);
json to_json(const ReducedForm& rf);
json to_json(const KamTranscript& tr);
json to_json(const GapRecord& g);
json to_json(const std::vector<GapRecord>& gaps);
json to_json(const EmbeddingResult& r);
json to_json(const GrowthLaw& g);
json to_json(const GrowthFit& g);

// "# seed=N" header, then e,rho,lyap,rho_err,rho_ok,lyap_ok rows.
std::string curve_csv(const std::vector<SweepPoint>& curve, unsigned seed);

// "# seed=N" header, then t, one norm column per s, tail_mass, trusted.
// All traces must share the same time grid.
std::string traces_csv(const std::vector<SobolevTrace>& traces, unsigned seed);

// dump with 2-space indent and trailing newline
std::string dump(const json& j);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace qpr::io
