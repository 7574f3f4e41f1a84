#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quadfit/constraints.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit {

enum class MeshFormat { obj, vtk };

std::string_view mesh_format_name(MeshFormat f);
std::optional<MeshFormat> parse_mesh_format(std::string_view name);
// File extension without the dot.
std::string_view mesh_format_extension(MeshFormat f);
// From the extension (.obj / .vtk); throws ConfigError otherwise.
MeshFormat format_from_path(const std::filesystem::path& path);

// Faces as read, before arity checks for a particular mesh kind.
struct MeshRecord {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;
  // Per face component group name; empty when the file has none.
  std::vector<std::string> groups;
};

// OBJ: v, f (a, a/b, a/b/c and negative indices) and g records; vn, vt, o,
// s, usemtl, mtllib and comments are ignored. VTK: legacy ASCII POLYDATA with
// POINTS, POLYGONS and an optional CELL_DATA int scalar "component".
// Throws IoError when unreadable and ParseError with the line number for
// malformed input or faces that are not triangles or quads.
MeshRecord read_mesh_record(const std::filesystem::path& path, MeshFormat format);

// `<stem>.landmarks.json` next to the mesh file.
std::filesystem::path sidecar_path(const std::filesystem::path& mesh_path);

// All faces must be quads. Groups map to component labels (faces without a
// group are wall). Landmarks and loops come from the sidecar; without one the
// loops are extracted from the connectivity, unless `require_sidecar` is set,
// in which case a missing sidecar is a ValidationError.
QuadMesh read_quad_mesh(const std::filesystem::path& path, MeshFormat format,
                        bool require_sidecar = false);

// Triangles load as is and quads are split along their (0,2) diagonal.
// Vertex normals are recomputed from the geometry.
TriSurface read_tri_surface(const std::filesystem::path& path, MeshFormat format);

// Fixed 9-decimal coordinates with negative zero written as zero, so equal
// meshes give equal bytes. The quad writer also writes the sidecar.
void write_mesh(const QuadMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void write_mesh(const TriSurface& surface, const std::filesystem::path& path, MeshFormat format);

// {"constraints": [{"loop": name, "closed": bool, "points": [[x, y, z], ...]}]}
BoundaryConstraintSet read_constraints(const std::filesystem::path& path);
void write_constraints(const BoundaryConstraintSet& constraints, const std::filesystem::path& path);

// Whole-file helpers; throw IoError.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// "%.9f" with -0 printed as 0.
std::string format_coordinate(double v);

}  // namespace quadfit
