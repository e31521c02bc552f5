#include "galerk/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace galerk {

namespace {

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

struct LineReader {
  std::ifstream in;
  std::string path;
  int line_no = 0;
  explicit LineReader(const std::string& p) : in(p), path(p) {
    if (!in) throw std::runtime_error(p + ": cannot open file");
  }
  bool next(std::string& out) {
    if (!std::getline(in, out)) return false;
    ++line_no;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }
  std::string expect(const std::string& what) {
    std::string s;
    if (!next(s)) fail(path, line_no, "unexpected end of file in " + what);
    return s;
  }
};

}  // namespace

Mesh read_msh(const std::string& path, int* skipped_elements) {
  LineReader rd(path);
  std::string line;

  std::unordered_map<long, int> node_id;
  MatX3 vtx;
  // type -> (vertex count); only segments, triangles, tets are meshes here.
  auto nodes_of_type = [](int t) -> int {
    switch (t) {
      case 1: return 2;   // segment
      case 2: return 3;   // triangle
      case 4: return 4;   // tetrahedron
      case 15: return 1;  // point (skipped)
      case 3: return 4;   // quad (skipped)
      case 5: return 8;   // hex (skipped)
      case 6: return 6;   // prism (skipped)
      case 7: return 5;   // pyramid (skipped)
      case 8: return 3;   // 2nd order segment (skipped)
      case 9: return 6;   // 2nd order triangle (skipped)
      case 11: return 10; // 2nd order tet (skipped)
      default: return -1;
    }
  };

  std::vector<std::array<int, 4>> elts[4];  // by dimension 1..3 (index d)
  std::vector<int> colors[4];
  int skipped = 0;
  bool saw_nodes = false, saw_elements = false;

  while (rd.next(line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "$MeshFormat") {
      std::string fmt = rd.expect("$MeshFormat");
      std::istringstream fs(fmt);
      double version = 0;
      int file_type = 0, data_size = 0;
      if (!(fs >> version >> file_type >> data_size))
        fail(path, rd.line_no, "malformed $MeshFormat header");
      if (version < 2.0 || version >= 3.0 || file_type != 0)
        fail(path, rd.line_no, "unsupported .msh format (need v2.x ASCII)");
      if (rd.expect("$MeshFormat") != "$EndMeshFormat")
        fail(path, rd.line_no, "missing $EndMeshFormat");
    } else if (tag == "$Nodes") {
      saw_nodes = true;
      std::istringstream ns(rd.expect("$Nodes"));
      long count = -1;
      if (!(ns >> count) || count < 0)
        fail(path, rd.line_no, "malformed node count in $Nodes");
      vtx.resize(count, 3);
      for (long i = 0; i < count; ++i) {
        std::istringstream es(rd.expect("$Nodes"));
        long id;
        double x, y, z;
        if (!(es >> id >> x >> y >> z))
          fail(path, rd.line_no, "malformed node line in $Nodes");
        node_id[id] = static_cast<int>(i);
        vtx.row(i) << x, y, z;
      }
      if (rd.expect("$Nodes") != "$EndNodes")
        fail(path, rd.line_no, "missing $EndNodes");
    } else if (tag == "$Elements") {
      saw_elements = true;
      std::istringstream ns(rd.expect("$Elements"));
      long count = -1;
      if (!(ns >> count) || count < 0)
        fail(path, rd.line_no, "malformed element count in $Elements");
      for (long i = 0; i < count; ++i) {
        std::istringstream es(rd.expect("$Elements"));
        long id;
        int type, ntags;
        if (!(es >> id >> type >> ntags))
          fail(path, rd.line_no, "malformed element line in $Elements");
        int first_tag = 0;
        for (int t = 0; t < ntags; ++t) {
          int v;
          if (!(es >> v)) fail(path, rd.line_no, "missing element tag in $Elements");
          if (t == 0) first_tag = v;
        }
        const int nn = nodes_of_type(type);
        if (nn < 0) {
          ++skipped;
          continue;
        }
        std::array<int, 4> conn = {0, 0, 0, 0};
        for (int c = 0; c < nn; ++c) {
          long nid;
          if (!(es >> nid)) fail(path, rd.line_no, "missing element node in $Elements");
          auto it = node_id.find(nid);
          if (it == node_id.end())
            fail(path, rd.line_no, "element references unknown node " + std::to_string(nid));
          if (c < 4) conn[c] = it->second;
        }
        int d = (type == 1) ? 1 : (type == 2) ? 2 : (type == 4) ? 3 : 0;
        if (d == 0) {
          ++skipped;  // recognized but non-simplicial (point, quad, ...)
          continue;
        }
        elts[d].push_back(conn);
        colors[d].push_back(first_tag);
      }
      if (rd.expect("$Elements") != "$EndElements")
        fail(path, rd.line_no, "missing $EndElements");
    }
    // Other sections ($PhysicalNames, ...) are skipped line by line.
  }

  if (!saw_nodes) fail(rd.path, rd.line_no, "missing $Nodes section");
  if (!saw_elements) fail(rd.path, rd.line_no, "missing $Elements section");

  int d = 0;
  for (int k = 3; k >= 1; --k)
    if (!elts[k].empty()) {
      d = k;
      break;
    }
  if (d == 0) fail(rd.path, rd.line_no, "no segment/triangle/tetrahedron elements found");
  // Lower-dimension elements present alongside the mesh are reported as skipped.
  for (int k = 1; k < d; ++k) skipped += static_cast<int>(elts[k].size());

  Eigen::MatrixXi elt(elts[d].size(), d + 1);
  Eigen::VectorXi col(elts[d].size());
  for (size_t e = 0; e < elts[d].size(); ++e) {
    for (int c = 0; c <= d; ++c) elt(e, c) = elts[d][e][c];
    col(e) = colors[d][e];
  }
  if (skipped_elements) *skipped_elements = skipped;
  if (skipped > 0 && !skipped_elements)
    std::cerr << path << ": skipped " << skipped << " unsupported element(s)\n";

  Mesh mesh(std::move(vtx), std::move(elt), std::move(col));
  return clean(mesh, 0.0);
}

void write_msh(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.vertex_count() << "\n";
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%ld %.17g %.17g %.17g\n", long(i + 1),
                  mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2));
    out << buf;
  }
  out << "$EndNodes\n$Elements\n" << mesh.element_count() << "\n";
  const int type = mesh.dim() == 1 ? 1 : mesh.dim() == 2 ? 2 : 4;
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    out << (e + 1) << ' ' << type << " 2 " << mesh.colors(e) << ' ' << mesh.colors(e);
    for (Eigen::Index c = 0; c < mesh.elements.cols(); ++c)
      out << ' ' << (mesh.elements(e, c) + 1);
    out << '\n';
  }
  out << "$EndElements\n";
}

void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<VtkField>& fields) {
  for (const auto& f : fields)
    if (f.values.size() != mesh.vertex_count())
      throw std::invalid_argument("write_vtk: field '" + f.name +
                                  "' length does not match vertex count");
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "# vtk DataFile Version 3.0\ngalerk output\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  char buf[160];
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", mesh.vertices(i, 0),
                  mesh.vertices(i, 1), mesh.vertices(i, 2));
    out << buf;
  }
  const int npe = mesh.dim() + 1;
  out << "CELLS " << mesh.element_count() << ' '
      << mesh.element_count() * (npe + 1) << '\n';
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    out << npe;
    for (int c = 0; c < npe; ++c) out << ' ' << mesh.elements(e, c);
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.element_count() << '\n';
  const int cell_type = mesh.dim() == 1 ? 3 : mesh.dim() == 2 ? 5 : 10;
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) out << cell_type << '\n';
  if (!fields.empty()) {
    out << "POINT_DATA " << mesh.vertex_count() << '\n';
    for (const auto& f : fields) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (Eigen::Index i = 0; i < f.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", f.values(i));
        out << buf;
      }
    }
  }
}

std::vector<VtkField> split_complex_field(const std::string& name,
                                          const Eigen::VectorXcd& values) {
  return {{name + "_re", values.real()}, {name + "_im", values.imag()}};
}

}  // namespace galerk
