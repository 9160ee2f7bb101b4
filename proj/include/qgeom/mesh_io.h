#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qgeom/types.h"

namespace qgeom {

enum class MeshFormat { Auto, Obj, Off, PlyAscii };
enum class CloudFormat { Auto, Xyz, PlyAscii };

namespace detail {

inline std::string lowercase_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  return ext;
}

inline MeshFormat infer_mesh_format(const std::string& path) {
  const std::string ext = lowercase_ext(path);
  if (ext == "obj") return MeshFormat::Obj;
  if (ext == "off") return MeshFormat::Off;
  if (ext == "ply") return MeshFormat::PlyAscii;
  throw UnsupportedFormat("cannot infer mesh format from '" + path + "'");
}

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

template <typename Scalar>
Scalar parse_scalar(const std::string& tok, const std::string& file, long line) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected a number, got '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError(file, line, "trailing characters in number '" + tok + "'");
  return static_cast<Scalar>(v);
}

inline long parse_count(const std::string& tok, const std::string& file,
                        long line) {
  try {
    return std::stol(tok);
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected an integer, got '" + tok + "'");
  }
}

// Accumulates triangulated faces; polygons are fan-triangulated from their
// first vertex.
struct FaceAccumulator {
  std::vector<Index> flat;

  void add_polygon(const std::vector<Index>& poly, Index vertex_count,
                   const std::string& file, long line) {
    if (poly.size() < 3) throw ParseError(file, line, "face with fewer than 3 vertices");
    for (Index v : poly) {
      if (v < 0 || v >= vertex_count)
        throw ParseError(file, line,
                         "face index " + std::to_string(v) + " out of range (" +
                             std::to_string(vertex_count) + " vertices)");
    }
    for (size_t k = 1; k + 1 < poly.size(); ++k) {
      if (poly[0] == poly[k] || poly[k] == poly[k + 1] || poly[0] == poly[k + 1])
        throw ParseError(file, line, "face repeats a vertex index");
      flat.push_back(poly[0]);
      flat.push_back(poly[k]);
      flat.push_back(poly[k + 1]);
    }
  }

  FaceMatrix matrix() const {
    FaceMatrix F(static_cast<Index>(flat.size() / 3), 3);
    for (Index i = 0; i < F.rows(); ++i)
      for (int k = 0; k < 3; ++k) F(i, k) = flat[3 * i + k];
    return F;
  }
};

template <typename Scalar>
TriangleMesh<Scalar> load_obj(std::istream& in, const std::string& file) {
  std::vector<Scalar> coords;
  FaceAccumulator faces;
  std::string line;
  long line_no = 0;
  std::vector<Index> poly;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) throw ParseError(file, line_no, "vertex needs 3 coordinates");
      for (int k = 1; k <= 3; ++k)
        coords.push_back(parse_scalar<Scalar>(toks[k], file, line_no));
    } else if (toks[0] == "f") {
      poly.clear();
      for (size_t k = 1; k < toks.size(); ++k) {
        // keep only the vertex index before any '/'
        const std::string head = toks[k].substr(0, toks[k].find('/'));
        const long idx = parse_count(head, file, line_no);
        if (idx <= 0)
          throw ParseError(file, line_no, "face index must be positive (1-based)");
        poly.push_back(static_cast<Index>(idx - 1));
      }
      faces.add_polygon(poly, static_cast<Index>(coords.size() / 3), file, line_no);
    }
    // all other directives (vn, vt, usemtl, ...) are ignored
  }
  TriangleMesh<Scalar> mesh;
  mesh.V.resize(static_cast<Index>(coords.size() / 3), 3);
  for (Index i = 0; i < mesh.V.rows(); ++i)
    for (int k = 0; k < 3; ++k) mesh.V(i, k) = coords[3 * i + k];
  mesh.F = faces.matrix();
  return mesh;
}

template <typename Scalar>
TriangleMesh<Scalar> load_off(std::istream& in, const std::string& file) {
  std::string line;
  long line_no = 0;
  auto next_tokens = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = tokenize(line);
      if (toks.empty() || toks[0][0] == '#') continue;
      return toks;
    }
    throw ParseError(file, line_no, "unexpected end of OFF file");
  };

  auto header = next_tokens();
  if (header[0] != "OFF") throw ParseError(file, line_no, "missing OFF header");
  std::vector<std::string> counts(header.begin() + 1, header.end());
  if (counts.empty()) counts = next_tokens();
  if (counts.size() < 2) throw ParseError(file, line_no, "OFF counts line needs at least 2 values");
  const long nv = parse_count(counts[0], file, line_no);
  const long nf = parse_count(counts[1], file, line_no);
  if (nv < 0 || nf < 0) throw ParseError(file, line_no, "negative count");

  TriangleMesh<Scalar> mesh;
  mesh.V.resize(nv, 3);
  for (long i = 0; i < nv; ++i) {
    auto toks = next_tokens();
    if (toks.size() < 3) throw ParseError(file, line_no, "vertex needs 3 coordinates");
    for (int k = 0; k < 3; ++k)
      mesh.V(i, k) = parse_scalar<Scalar>(toks[k], file, line_no);
  }
  FaceAccumulator faces;
  std::vector<Index> poly;
  for (long i = 0; i < nf; ++i) {
    auto toks = next_tokens();
    const long arity = parse_count(toks[0], file, line_no);
    if (arity < 3 || static_cast<long>(toks.size()) < arity + 1)
      throw ParseError(file, line_no, "malformed face line");
    poly.clear();
    for (long k = 1; k <= arity; ++k)
      poly.push_back(static_cast<Index>(parse_count(toks[k], file, line_no)));
    faces.add_polygon(poly, nv, file, line_no);
  }
  mesh.F = faces.matrix();
  return mesh;
}

template <typename Scalar>
TriangleMesh<Scalar> load_ply_ascii(std::istream& in, const std::string& file) {
  std::string line;
  long line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(file, line_no, "unexpected end of PLY file");
    ++line_no;
    return line;
  };

  if (tokenize(next_line()) != std::vector<std::string>{"ply"})
    throw ParseError(file, line_no, "missing 'ply' magic");

  long nv = -1, nf = -1;
  int x_col = -1, y_col = -1, z_col = -1;
  int vertex_props = 0;
  std::string current_element;
  bool ascii = false;
  while (true) {
    auto toks = tokenize(next_line());
    if (toks.empty()) continue;
    if (toks[0] == "comment") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii")
        throw UnsupportedFormat("only ASCII PLY is supported");
      ascii = true;
    } else if (toks[0] == "element" && toks.size() >= 3) {
      current_element = toks[1];
      if (toks[1] == "vertex") nv = parse_count(toks[2], file, line_no);
      else if (toks[1] == "face") nf = parse_count(toks[2], file, line_no);
    } else if (toks[0] == "property" && current_element == "vertex") {
      if (toks.size() >= 2 && toks[1] == "list")
        throw ParseError(file, line_no, "list property on vertex element");
      const std::string& name = toks.back();
      if (name == "x") x_col = vertex_props;
      if (name == "y") y_col = vertex_props;
      if (name == "z") z_col = vertex_props;
      ++vertex_props;
    } else if (toks[0] == "end_header") {
      break;
    }
  }
  if (!ascii) throw UnsupportedFormat("PLY file declares no ascii format");
  if (nv < 0) throw ParseError(file, line_no, "PLY header lacks 'element vertex'");
  if (x_col < 0 || y_col < 0 || z_col < 0)
    throw ParseError(file, line_no, "PLY vertex element lacks x/y/z properties");

  TriangleMesh<Scalar> mesh;
  mesh.V.resize(nv, 3);
  for (long i = 0; i < nv; ++i) {
    auto toks = tokenize(next_line());
    if (static_cast<int>(toks.size()) < vertex_props)
      throw ParseError(file, line_no, "vertex line has too few values");
    mesh.V(i, 0) = parse_scalar<Scalar>(toks[x_col], file, line_no);
    mesh.V(i, 1) = parse_scalar<Scalar>(toks[y_col], file, line_no);
    mesh.V(i, 2) = parse_scalar<Scalar>(toks[z_col], file, line_no);
  }
  FaceAccumulator faces;
  std::vector<Index> poly;
  for (long i = 0; i < std::max<long>(nf, 0); ++i) {
    auto toks = tokenize(next_line());
    const long arity = parse_count(toks[0], file, line_no);
    if (arity < 3 || static_cast<long>(toks.size()) < arity + 1)
      throw ParseError(file, line_no, "malformed face line");
    poly.clear();
    for (long k = 1; k <= arity; ++k)
      poly.push_back(static_cast<Index>(parse_count(toks[k], file, line_no)));
    faces.add_polygon(poly, nv, file, line_no);
  }
  mesh.F = faces.matrix();
  return mesh;
}

inline std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// Loads a triangle mesh, fan-triangulating any polygon faces. Vertex order
/// is preserved from the file. Format is inferred from the extension when
/// Auto.
template <typename Scalar = double>
TriangleMesh<Scalar> load_mesh(const std::string& path,
                               MeshFormat format = MeshFormat::Auto) {
  if (format == MeshFormat::Auto) format = detail::infer_mesh_format(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  TriangleMesh<Scalar> mesh;
  switch (format) {
    case MeshFormat::Obj: mesh = detail::load_obj<Scalar>(in, path); break;
    case MeshFormat::Off: mesh = detail::load_off<Scalar>(in, path); break;
    case MeshFormat::PlyAscii: mesh = detail::load_ply_ascii<Scalar>(in, path); break;
    default: throw UnsupportedFormat("unknown mesh format");
  }
  validate_mesh(mesh);
  return mesh;
}

template <typename Scalar>
void save_mesh(const TriangleMesh<Scalar>& mesh, const std::string& path,
               MeshFormat format = MeshFormat::Auto) {
  if (format == MeshFormat::Auto) format = detail::infer_mesh_format(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const Index nv = mesh.vertex_count(), nf = mesh.face_count();
  if (format == MeshFormat::Off) {
    out << "OFF\n" << nv << " " << nf << " 0\n";
    for (Index i = 0; i < nv; ++i)
      out << detail::format_coord(mesh.V(i, 0)) << " "
          << detail::format_coord(mesh.V(i, 1)) << " "
          << detail::format_coord(mesh.V(i, 2)) << "\n";
    for (Index f = 0; f < nf; ++f)
      out << "3 " << mesh.F(f, 0) << " " << mesh.F(f, 1) << " " << mesh.F(f, 2) << "\n";
  } else if (format == MeshFormat::Obj) {
    for (Index i = 0; i < nv; ++i)
      out << "v " << detail::format_coord(mesh.V(i, 0)) << " "
          << detail::format_coord(mesh.V(i, 1)) << " "
          << detail::format_coord(mesh.V(i, 2)) << "\n";
    for (Index f = 0; f < nf; ++f)
      out << "f " << mesh.F(f, 0) + 1 << " " << mesh.F(f, 1) + 1 << " "
          << mesh.F(f, 2) + 1 << "\n";
  } else if (format == MeshFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\nelement vertex " << nv
        << "\nproperty float x\nproperty float y\nproperty float z\n"
        << "element face " << nf
        << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (Index i = 0; i < nv; ++i)
      out << detail::format_coord(mesh.V(i, 0)) << " "
          << detail::format_coord(mesh.V(i, 1)) << " "
          << detail::format_coord(mesh.V(i, 2)) << "\n";
    for (Index f = 0; f < nf; ++f)
      out << "3 " << mesh.F(f, 0) << " " << mesh.F(f, 1) << " " << mesh.F(f, 2) << "\n";
  } else {
    throw UnsupportedFormat("unknown mesh format");
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace detail {
inline CloudFormat infer_cloud_format(const std::string& path) {
  const std::string ext = lowercase_ext(path);
  if (ext == "xyz") return CloudFormat::Xyz;
  if (ext == "ply") return CloudFormat::PlyAscii;
  throw UnsupportedFormat("cannot infer cloud format from '" + path + "'");
}
}  // namespace detail

/// Writes a point cloud; XYZ lines carry 9 significant digits, so a
/// round-trip reproduces coordinates to well under 1e-6.
template <typename Scalar>
void save_points(const PointMatrix<Scalar>& points, const std::string& path,
                 CloudFormat format = CloudFormat::Auto) {
  if (format == CloudFormat::Auto) format = detail::infer_cloud_format(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (format == CloudFormat::PlyAscii) {
    out << "ply\nformat ascii 1.0\nelement vertex " << points.rows()
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  }
  for (Index i = 0; i < points.rows(); ++i)
    out << detail::format_coord(points(i, 0)) << " "
        << detail::format_coord(points(i, 1)) << " "
        << detail::format_coord(points(i, 2)) << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

template <typename Scalar = double>
PointMatrix<Scalar> load_points(const std::string& path,
                                CloudFormat format = CloudFormat::Auto) {
  if (format == CloudFormat::Auto) format = detail::infer_cloud_format(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  if (format == CloudFormat::PlyAscii) {
    const TriangleMesh<Scalar> mesh = detail::load_ply_ascii<Scalar>(in, path);
    return mesh.V;
  }
  std::vector<Scalar> coords;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = detail::tokenize(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3) throw ParseError(path, line_no, "point needs 3 coordinates");
    for (int k = 0; k < 3; ++k)
      coords.push_back(detail::parse_scalar<Scalar>(toks[k], path, line_no));
  }
  PointMatrix<Scalar> points(static_cast<Index>(coords.size() / 3), 3);
  for (Index i = 0; i < points.rows(); ++i)
    for (int k = 0; k < 3; ++k) points(i, k) = coords[3 * i + k];
  validate_cloud(points);
  return points;
}

}  // namespace qgeom
