#include "quadfit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "quadfit/errors.hpp"

namespace quadfit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_long(std::string_view s, long long& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Line number of a byte offset, for JSON parse errors.
std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

ojson parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), line_of(text, e.byte), "invalid JSON");
  }
}

MeshRecord read_obj(const fs::path& path, const std::string& text, std::vector<std::size_t>& face_lines) {
  MeshRecord rec;
  const std::string src = path.string();
  std::string group;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string_view key = tok[0];
    if (key == "v") {
      if (tok.size() < 4) throw ParseError(src, lineno, "vertex needs three coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_double(tok[static_cast<std::size_t>(k) + 1], p[k])) {
          throw ParseError(src, lineno, "bad vertex coordinate");
        }
      }
      rec.vertices.push_back(p);
    } else if (key == "f") {
      const std::size_t arity = tok.size() - 1;
      if (arity != 3 && arity != 4) {
        throw ParseError(src, lineno, "face with " + std::to_string(arity) + " vertices (only triangles and quads)");
      }
      std::vector<int> face;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view t = tok[k].substr(0, tok[k].find('/'));
        long long idx = 0;
        if (!parse_long(t, idx) || idx == 0) throw ParseError(src, lineno, "bad face index");
        if (idx < 0) idx += static_cast<long long>(rec.vertices.size()) + 1;
        if (idx < 1 || idx > static_cast<long long>(rec.vertices.size())) {
          throw ParseError(src, lineno, "face index out of range");
        }
        face.push_back(static_cast<int>(idx - 1));
      }
      rec.faces.push_back(std::move(face));
      rec.groups.push_back(group);
      face_lines.push_back(lineno);
    } else if (key == "g") {
      group = tok.size() > 1 ? std::string(tok[1]) : std::string();
    } else if (key == "vn" || key == "vt" || key == "o" || key == "s" || key == "usemtl" ||
               key == "mtllib") {
      continue;
    } else {
      throw ParseError(src, lineno, "unsupported record '" + std::string(key) + "'");
    }
  }
  return rec;
}

struct Tokens {
  std::vector<std::string_view> tok;
  std::vector<std::size_t> line;
  std::size_t pos = 0;
  std::string src;

  bool done() const { return pos >= tok.size(); }
  std::size_t here() const { return done() ? (line.empty() ? 1 : line.back()) : line[pos]; }
  std::string_view next(const char* what) {
    if (done()) throw ParseError(src, here(), std::string("unexpected end of file, expected ") + what);
    return tok[pos++];
  }
  long long integer(const char* what) {
    const std::size_t ln = here();
    long long v = 0;
    if (!parse_long(next(what), v)) throw ParseError(src, ln, std::string("expected integer ") + what);
    return v;
  }
  double real(const char* what) {
    const std::size_t ln = here();
    double v = 0;
    if (!parse_double(next(what), v)) throw ParseError(src, ln, std::string("expected number ") + what);
    return v;
  }
};

MeshRecord read_vtk(const fs::path& path, const std::string& text, std::vector<std::size_t>& face_lines) {
  const std::string src = path.string();
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string l;
    while (std::getline(in, l)) {
      if (!l.empty() && l.back() == '\r') l.pop_back();
      lines.push_back(l);
    }
  }
  if (lines.size() < 4 || lines[0].rfind("# vtk DataFile Version", 0) != 0) {
    throw ParseError(src, 1, "missing VTK header");
  }
  if (split_ws(lines[2]).size() != 1 || split_ws(lines[2])[0] != "ASCII") {
    throw ParseError(src, 3, "only ASCII VTK files are supported");
  }
  Tokens t;
  t.src = src;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    for (std::string_view w : split_ws(lines[i])) {
      t.tok.push_back(w);
      t.line.push_back(i + 1);
    }
  }
  {
    const std::size_t ln = t.here();
    if (t.next("DATASET") != "DATASET" || t.next("POLYDATA") != "POLYDATA") {
      throw ParseError(src, ln, "expected DATASET POLYDATA");
    }
  }
  MeshRecord rec;
  std::vector<int> component_ids;
  while (!t.done()) {
    const std::size_t ln = t.here();
    const std::string_view key = t.next("section");
    if (key == "POINTS") {
      const long long n = t.integer("point count");
      t.next("point type");
      if (n < 0) throw ParseError(src, ln, "negative point count");
      for (long long i = 0; i < n; ++i) {
        Vec3 p;
        for (int k = 0; k < 3; ++k) p[k] = t.real("coordinate");
        rec.vertices.push_back(p);
      }
    } else if (key == "POLYGONS") {
      const long long n = t.integer("polygon count");
      t.integer("polygon size");
      for (long long i = 0; i < n; ++i) {
        const std::size_t fl = t.here();
        const long long arity = t.integer("polygon arity");
        if (arity != 3 && arity != 4) {
          throw ParseError(src, fl, "polygon with " + std::to_string(arity) + " vertices (only triangles and quads)");
        }
        std::vector<int> face;
        for (long long k = 0; k < arity; ++k) {
          const long long idx = t.integer("polygon index");
          if (idx < 0 || idx >= static_cast<long long>(rec.vertices.size())) {
            throw ParseError(src, fl, "polygon index out of range");
          }
          face.push_back(static_cast<int>(idx));
        }
        rec.faces.push_back(std::move(face));
        face_lines.push_back(fl);
      }
    } else if (key == "VERTICES" || key == "LINES" || key == "TRIANGLE_STRIPS") {
      throw ParseError(src, ln, "unsupported POLYDATA section " + std::string(key));
    } else if (key == "CELL_DATA" || key == "POINT_DATA") {
      const bool cells = key == "CELL_DATA";
      const long long n = t.integer("attribute count");
      while (!t.done() && (t.tok[t.pos] == "SCALARS" || t.tok[t.pos] == "NORMALS")) {
        const std::size_t al = t.here();
        const std::string_view kind = t.next("attribute");
        const std::string_view name = t.next("attribute name");
        t.next("attribute type");
        long long comps = 3;
        if (kind == "SCALARS") {
          comps = 1;
          if (!t.done() && t.tok[t.pos] != "LOOKUP_TABLE") comps = t.integer("component count");
          if (t.next("LOOKUP_TABLE") != "LOOKUP_TABLE") throw ParseError(src, al, "expected LOOKUP_TABLE");
          t.next("table name");
        }
        const bool labels = cells && kind == "SCALARS" && name == "component" && comps == 1;
        for (long long i = 0; i < n * comps; ++i) {
          if (labels) {
            component_ids.push_back(static_cast<int>(t.integer("component id")));
          } else {
            t.real("attribute value");
          }
        }
      }
    } else {
      throw ParseError(src, ln, "unsupported VTK keyword '" + std::string(key) + "'");
    }
  }
  rec.groups.assign(rec.faces.size(), std::string());
  if (!component_ids.empty()) {
    if (component_ids.size() != rec.faces.size()) {
      throw ParseError(src, t.here(), "component count differs from polygon count");
    }
    for (std::size_t i = 0; i < component_ids.size(); ++i) {
      const int c = component_ids[i];
      if (c < 0 || c >= static_cast<int>(kComponents.size())) {
        throw ParseError(src, face_lines[i], "unknown component id " + std::to_string(c));
      }
      rec.groups[i] = std::string(component_name(kComponents[static_cast<std::size_t>(c)]));
    }
  }
  return rec;
}

MeshRecord read_record(const fs::path& path, MeshFormat format, std::vector<std::size_t>& face_lines) {
  const std::string text = read_text(path);
  return format == MeshFormat::obj ? read_obj(path, text, face_lines) : read_vtk(path, text, face_lines);
}

bool has_boundary_edge(const std::set<std::pair<int, int>>& edges, int a, int b) {
  return edges.count({std::min(a, b), std::max(a, b)}) > 0;
}

void load_sidecar(QuadMesh& mesh, const fs::path& path) {
  const ojson j = parse_json_file(path);
  const std::string src = path.string();
  if (!j.is_object()) throw ValidationError(src + ": sidecar must be an object");
  for (const auto& [k, v] : j.items()) {
    if (k != "landmarks" && k != "loops") throw ValidationError(src + ": unknown key '" + k + "'");
  }
  const int n = static_cast<int>(mesh.vertices.size());
  auto index = [&](const ojson& v, const std::string& what) {
    if (!v.is_number_integer()) throw ValidationError(src + ": " + what + " must be an integer");
    const long long i = v.get<long long>();
    if (i < 0 || i >= n) throw ValidationError(src + ": " + what + " index out of range");
    return static_cast<int>(i);
  };
  mesh.landmarks.clear();
  if (j.contains("landmarks")) {
    if (!j["landmarks"].is_object()) throw ValidationError(src + ": landmarks must be an object");
    for (const auto& [name, v] : j["landmarks"].items()) mesh.landmarks[name] = index(v, "landmark " + name);
  }
  mesh.boundary_loops.clear();
  if (j.contains("loops")) {
    if (!j["loops"].is_object()) throw ValidationError(src + ": loops must be an object");
    std::set<std::pair<int, int>> edges;
    for (const auto& e : boundary_edges(mesh.quads)) edges.insert({e[0], e[1]});
    for (const auto& [name, v] : j["loops"].items()) {
      if (!v.is_array()) throw ValidationError(src + ": loop " + name + " must be an array");
      BoundaryLoop loop;
      loop.name = name;
      for (const auto& i : v) loop.vertices.push_back(index(i, "loop " + name));
      loop.closed = loop.vertices.size() >= 3 &&
                    has_boundary_edge(edges, loop.vertices.front(), loop.vertices.back());
      mesh.boundary_loops.push_back(std::move(loop));
    }
  }
}

void write_sidecar(const QuadMesh& mesh, const fs::path& path) {
  ojson j;
  j["landmarks"] = ojson::object();
  for (const auto& [name, i] : mesh.landmarks) j["landmarks"][name] = i;
  j["loops"] = ojson::object();
  for (const BoundaryLoop& l : mesh.boundary_loops) j["loops"][l.name] = l.vertices;
  write_text(path, j.dump(2) + "\n");
}

void append_vertex_lines(std::string& out, Vertices vertices, const char* prefix, const char* sep) {
  for (const Vec3& p : vertices) {
    out += prefix;
    out += format_coordinate(p.x());
    out += sep;
    out += format_coordinate(p.y());
    out += sep;
    out += format_coordinate(p.z());
    out += '\n';
  }
}

template <std::size_t K>
std::string obj_text(Vertices vertices, const std::vector<std::array<int, K>>& faces,
                     const std::vector<Component>* labels, const char* title) {
  std::string out = std::string("# ") + title + "\n";
  append_vertex_lines(out, vertices, "v ", " ");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (labels && (f == 0 || (*labels)[f] != (*labels)[f - 1])) {
      out += "g ";
      out += component_name((*labels)[f]);
      out += '\n';
    }
    out += 'f';
    for (int v : faces[f]) out += ' ' + std::to_string(v + 1);
    out += '\n';
  }
  return out;
}

template <std::size_t K>
std::string vtk_text(Vertices vertices, const std::vector<std::array<int, K>>& faces,
                     const std::vector<Component>* labels, const char* title) {
  std::string out = "# vtk DataFile Version 3.0\n";
  out += title;
  out += "\nASCII\nDATASET POLYDATA\n";
  out += "POINTS " + std::to_string(vertices.size()) + " double\n";
  append_vertex_lines(out, vertices, "", " ");
  out += "POLYGONS " + std::to_string(faces.size()) + " " + std::to_string(faces.size() * (K + 1)) + "\n";
  for (const auto& f : faces) {
    out += std::to_string(K);
    for (int v : f) out += ' ' + std::to_string(v);
    out += '\n';
  }
  if (labels) {
    out += "CELL_DATA " + std::to_string(faces.size()) + "\n";
    out += "SCALARS component int 1\nLOOKUP_TABLE default\n";
    for (Component c : *labels) out += std::to_string(static_cast<int>(c)) + "\n";
  }
  return out;
}

}  // namespace

std::string_view mesh_format_name(MeshFormat f) { return f == MeshFormat::obj ? "obj" : "vtk"; }

std::optional<MeshFormat> parse_mesh_format(std::string_view name) {
  if (name == "obj") return MeshFormat::obj;
  if (name == "vtk") return MeshFormat::vtk;
  return std::nullopt;
}

std::string_view mesh_format_extension(MeshFormat f) { return mesh_format_name(f); }

MeshFormat format_from_path(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".vtk") return MeshFormat::vtk;
  throw ConfigError("cannot infer mesh format from '" + path.string() + "' (use .obj or .vtk)");
}

std::string format_coordinate(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

MeshRecord read_mesh_record(const fs::path& path, MeshFormat format) {
  std::vector<std::size_t> lines;
  return read_record(path, format, lines);
}

fs::path sidecar_path(const fs::path& mesh_path) {
  fs::path p = mesh_path;
  p.replace_extension(".landmarks.json");
  return p;
}

QuadMesh read_quad_mesh(const fs::path& path, MeshFormat format, bool require_sidecar) {
  std::vector<std::size_t> lines;
  MeshRecord rec = read_record(path, format, lines);
  QuadMesh mesh;
  mesh.vertices = std::move(rec.vertices);
  for (std::size_t f = 0; f < rec.faces.size(); ++f) {
    const auto& face = rec.faces[f];
    if (face.size() != 4) {
      throw ParseError(path.string(), lines[f], "quad mesh expected, found a face with " +
                                                    std::to_string(face.size()) + " vertices");
    }
    mesh.quads.push_back({face[0], face[1], face[2], face[3]});
    if (rec.groups[f].empty()) {
      mesh.labels.push_back(Component::wall);
    } else if (auto c = parse_component(rec.groups[f])) {
      mesh.labels.push_back(*c);
    } else {
      throw ParseError(path.string(), lines[f], "unknown component group '" + rec.groups[f] + "'");
    }
  }
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    load_sidecar(mesh, side);
  } else if (require_sidecar) {
    throw ValidationError("missing landmark sidecar '" + side.string() + "'");
  } else {
    mesh.boundary_loops = extract_boundary_loops(mesh);
  }
  return mesh;
}

TriSurface read_tri_surface(const fs::path& path, MeshFormat format) {
  std::vector<std::size_t> lines;
  MeshRecord rec = read_record(path, format, lines);
  TriSurface s;
  s.vertices = std::move(rec.vertices);
  for (const auto& f : rec.faces) {
    if (f.size() == 3) {
      s.triangles.push_back({f[0], f[1], f[2]});
    } else {
      s.triangles.push_back({f[0], f[1], f[2]});
      s.triangles.push_back({f[0], f[2], f[3]});
    }
  }
  s.vertex_normals = vertex_normals(s.vertices, s.triangles);
  return s;
}

void write_mesh(const QuadMesh& mesh, const fs::path& path, MeshFormat format) {
  if (mesh.labels.size() != mesh.quads.size()) throw ValidationError("write_mesh: one label per quad required");
  const std::string text = format == MeshFormat::obj
                               ? obj_text(mesh.vertices, mesh.quads, &mesh.labels, "quadfit quad mesh")
                               : vtk_text(mesh.vertices, mesh.quads, &mesh.labels, "quadfit quad mesh");
  write_text(path, text);
  write_sidecar(mesh, sidecar_path(path));
}

void write_mesh(const TriSurface& surface, const fs::path& path, MeshFormat format) {
  const std::string text =
      format == MeshFormat::obj
          ? obj_text<3>(surface.vertices, surface.triangles, nullptr, "quadfit triangle surface")
          : vtk_text<3>(surface.vertices, surface.triangles, nullptr, "quadfit triangle surface");
  write_text(path, text);
}

BoundaryConstraintSet read_constraints(const fs::path& path) {
  const ojson j = parse_json_file(path);
  const std::string src = path.string();
  if (!j.is_object() || j.size() != 1 || !j.contains("constraints") || !j["constraints"].is_array()) {
    throw ValidationError(src + ": expected {\"constraints\": [...]}");
  }
  BoundaryConstraintSet out;
  for (const auto& c : j["constraints"]) {
    if (!c.is_object()) throw ValidationError(src + ": constraint must be an object");
    for (const auto& [k, v] : c.items()) {
      if (k != "loop" && k != "closed" && k != "points") {
        throw ValidationError(src + ": unknown constraint key '" + k + "'");
      }
    }
    if (!c.contains("loop") || !c["loop"].is_string() || !c.contains("points") || !c["points"].is_array()) {
      throw ValidationError(src + ": constraint needs a loop name and points");
    }
    BoundaryConstraint bc;
    bc.loop = c["loop"].get<std::string>();
    if (c.contains("closed")) {
      if (!c["closed"].is_boolean()) throw ValidationError(src + ": closed must be a boolean");
      bc.closed = c["closed"].get<bool>();
    }
    for (const auto& p : c["points"]) {
      if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
        throw ValidationError(src + ": points must be [x, y, z] triples");
      }
      bc.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    out.push_back(std::move(bc));
  }
  return out;
}

void write_constraints(const BoundaryConstraintSet& constraints, const fs::path& path) {
  ojson arr = ojson::array();
  for (const BoundaryConstraint& c : constraints) {
    ojson pts = ojson::array();
    for (const Vec3& p : c.points) {
      pts.push_back(ojson::array({p.x() == 0.0 ? 0.0 : p.x(), p.y() == 0.0 ? 0.0 : p.y(),
                                  p.z() == 0.0 ? 0.0 : p.z()}));
    }
    arr.push_back({{"loop", c.loop}, {"closed", c.closed}, {"points", std::move(pts)}});
  }
  ojson j;
  j["constraints"] = std::move(arr);
  write_text(path, j.dump(2) + "\n");
}

}  // namespace quadfit
