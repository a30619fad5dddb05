#pragma once

#include "nhim/config.hpp"
#include "nhim/graph_transform.hpp"
#include "nhim/hyperbolicity.hpp"
#include "nhim/persistence.hpp"
#include "nhim/tangent.hpp"

#include <string>
#include <vector>

namespace nhim {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// 17 significant digits; -0 prints as 0, non-finite values as inf/-inf/nan.
std::string format_double(double v);

/// Header theta_1..theta_n, xi_s_1.., xi_u_1.., then t_<k>_<i> (component i
/// of tangent basis vector k) when the manifold carries tangents.
std::string manifold_csv(const ManifoldGrid& manifold);
void write_manifold_csv(const ManifoldGrid& manifold, const std::string& path);

/// Domain coordinates followed by the section values, one row per node.
std::string section_csv(const SectionGrid& section);

/// Manifold columns, tangent columns of `field`, residual and achieved depth.
std::string tangent_csv(const ManifoldGrid& manifold, const TangentField& field);

std::string escape_csv(const std::vector<EscapeResult>& rows);
std::string sweep_csv(const SweepReport& report);

Json to_json(const Vector& v);
Json to_json(const CheckReport& r);
Json to_json(const ClassicalRates& r);
Json to_json(const SplittingEstimate& r);
Json to_json(const TransformReport& r);
Json to_json(const IntersectionReport& r);
Json to_json(const TangentField& t);
Json to_json(const TangentInvariance& t);
Json to_json(const ManifoldComputation& m);
/// Runtimes go to a separate "timing" object so the rest compares byte-exactly.
Json to_json(const SweepReport& r, bool include_timing = true);
Json to_json(const EscapeResult& r);

/// Envelope carrying the tool version, command, config echo and payload.
Json make_report(const std::string& command, const RunConfig& config, Json payload);

void write_text(const std::string& text, const std::string& path);
void write_report_json(const Json& report, const std::string& path);
/// The report without its "timing" object, for determinism comparisons.
Json strip_timing(Json report);

}  // namespace nhim
