#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit {

enum class Region { leaflet0, leaflet1, leaflet2, wall, whole };

inline constexpr std::array<Region, 5> kRegions = {Region::leaflet0, Region::leaflet1,
                                                   Region::leaflet2, Region::wall, Region::whole};

std::string_view region_name(Region r);
std::optional<Region> parse_region(std::string_view name);

// Vertices incident to a quad with the region's label; `whole` is every
// referenced vertex. Seam vertices belong to several regions.
std::vector<int> region_vertices(const QuadMesh& mesh, Region r);

// Mean corresponded distance. Throws CorrespondenceError on topology mismatch.
double appd(const QuadMesh& pred, const QuadMesh& truth, Region r = Region::whole);
double appd(Vertices pred, Vertices truth);

// Half the sum of both mean unsquared nearest-neighbour distances.
double chamfer_metric(Vertices a, Vertices b);
double chamfer_metric(const QuadMesh& pred, const QuadMesh& truth, Region r = Region::whole);

// Chamfer in the same halved, unsquared form between two surfaces: mean
// distance from the predicted vertices to the target triangles plus mean
// distance from the target vertices to the triangulated prediction.
double surface_chamfer(Vertices pred, std::span<const Quad> quads, const TriSurface& target);

// max_a min_b |a - b|
double directed_hausdorff(Vertices a, Vertices b);
double hausdorff(Vertices a, Vertices b);
double hausdorff(const QuadMesh& pred, const QuadMesh& truth, Region r = Region::whole);

// Per-landmark distance for the six valve landmarks. Throws ValidationError
// when either mesh lacks one or their indices differ.
std::map<std::string, double> landmark_errors(const QuadMesh& pred, const QuadMesh& truth);

struct QuadQuality {
  // max/min of the averaged opposite side lengths
  double aspect = 1.0;
  // Largest |corner angle - 90| in degrees.
  double corner_deviation_deg = 0.0;
  // Largest corner distance to the least-squares plane, mm.
  double flatness = 0.0;
  bool inverted = false;
  bool degenerate = false;
};

struct QualityStats {
  std::size_t quads = 0;
  std::size_t degenerate = 0;
  std::size_t inverted = 0;
  double min_aspect = 0.0, mean_aspect = 0.0, max_aspect = 0.0;
  double min_corner_deviation_deg = 0.0, mean_corner_deviation_deg = 0.0,
         max_corner_deviation_deg = 0.0;
  double mean_flatness = 0.0, max_flatness = 0.0;
  std::vector<QuadQuality> per_quad;
};

QuadQuality quad_quality(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Aggregates exclude degenerate quads. A quad is inverted when some corner's
// edge cross product points against its diagonal-cross normal.
QualityStats quality_report(const QuadMesh& mesh);

struct RegionMetrics {
  double appd = 0.0;
  double chamfer = 0.0;
  double hausdorff = 0.0;
};

struct MetricsReport {
  std::map<Region, RegionMetrics> regions;
  std::map<std::string, double> landmarks;
  QualityStats quality;  // of the prediction
};

// Regions without vertices in `truth` are left out.
MetricsReport evaluate(const QuadMesh& pred, const QuadMesh& truth);

struct MetricRow {
  std::string region;
  std::string metric;
  double value = 0.0;
};

// Flat per-case rows: region metrics, landmark errors (region "landmarks"),
// quality statistics (region "quality").
std::vector<MetricRow> report_rows(const MetricsReport& report);

struct AggregateRow {
  std::string region;
  std::string metric;
  double mean = 0.0;
  // Sample standard deviation (n - 1); zero for a single case.
  double stddev = 0.0;
  std::size_t count = 0;
};

// Mean and standard deviation per (region, metric) across cases. Rows keep
// the order of first appearance.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricRow>>& cases);

}  // namespace quadfit
