#include "galerk/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace galerk {

namespace {

void check_tables(const Mesh& m) {
  const int nv = static_cast<int>(m.vertices.rows());
  for (Eigen::Index e = 0; e < m.elements.rows(); ++e)
    for (Eigen::Index c = 0; c < m.elements.cols(); ++c) {
      int v = m.elements(e, c);
      if (v < 0 || v >= nv)
        throw std::invalid_argument("mesh: element vertex index out of range");
    }
}

}  // namespace

Mesh::Mesh(MatX3 vtx, Eigen::MatrixXi elt)
    : vertices(std::move(vtx)), elements(std::move(elt)) {
  colors = Eigen::VectorXi::Zero(elements.rows());
  check_tables(*this);
}

Mesh::Mesh(MatX3 vtx, Eigen::MatrixXi elt, Eigen::VectorXi col)
    : vertices(std::move(vtx)), elements(std::move(elt)), colors(std::move(col)) {
  if (colors.size() != elements.rows())
    throw std::invalid_argument("mesh: color table size mismatch");
  check_tables(*this);
}

Mesh Mesh::empty_mesh(int dim) {
  Mesh m;
  m.vertices.resize(0, 3);
  m.elements.resize(0, dim + 1);
  m.colors.resize(0);
  return m;
}

double Mesh::element_measure(Eigen::Index e) const {
  switch (dim()) {
    case 1: {
      Vec3 a = vertices.row(elements(e, 0)), b = vertices.row(elements(e, 1));
      return (b - a).norm();
    }
    case 2: {
      Vec3 a = vertices.row(elements(e, 0)), b = vertices.row(elements(e, 1)),
           c = vertices.row(elements(e, 2));
      return 0.5 * ((b - a).cross(c - a)).norm();
    }
    case 3: {
      Vec3 a = vertices.row(elements(e, 0)), b = vertices.row(elements(e, 1)),
           c = vertices.row(elements(e, 2)), d = vertices.row(elements(e, 3));
      return std::abs((b - a).cross(c - a).dot(d - a)) / 6.0;
    }
    default:
      throw std::logic_error("mesh: unsupported dimension");
  }
}

double Mesh::total_measure() const {
  double s = 0.0;
  for (Eigen::Index e = 0; e < element_count(); ++e) s += element_measure(e);
  return s;
}

Vec3 Mesh::element_centroid(Eigen::Index e) const {
  Vec3 c = Vec3::Zero();
  for (Eigen::Index i = 0; i < elements.cols(); ++i)
    c += vertices.row(elements(e, i));
  return c / static_cast<double>(elements.cols());
}

double Mesh::element_radius(Eigen::Index e) const {
  Vec3 c = element_centroid(e);
  double r = 0.0;
  for (Eigen::Index i = 0; i < elements.cols(); ++i)
    r = std::max(r, (Vec3(vertices.row(elements(e, i))) - c).norm());
  return r;
}

double Mesh::bounding_box_diagonal() const {
  if (vertices.rows() == 0) return 0.0;
  Vec3 lo = vertices.colwise().minCoeff();
  Vec3 hi = vertices.colwise().maxCoeff();
  return (hi - lo).norm();
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

Mesh build_square(int n_target, const std::array<double, 2>& size) {
  const double lx = size[0], ly = size[1];
  if (n_target < 4) throw std::invalid_argument("build_square: n_target must be >= 4");
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("build_square: sizes must be positive");

  // (nx+1) x (ny+1) grid, aspect following Lx:Ly, vertex count near target.
  int nx1 = std::max(2, static_cast<int>(std::lround(std::sqrt(n_target * lx / ly))));
  int ny1 = std::max(2, static_cast<int>(std::lround(double(n_target) / nx1)));
  const int nx = nx1 - 1, ny = ny1 - 1;

  MatX3 vtx(nx1 * ny1, 3);
  for (int j = 0; j < ny1; ++j)
    for (int i = 0; i < nx1; ++i) {
      const int id = j * nx1 + i;
      vtx(id, 0) = -0.5 * lx + lx * i / nx;
      vtx(id, 1) = -0.5 * ly + ly * j / ny;
      vtx(id, 2) = 0.0;
    }

  Eigen::MatrixXi elt(2 * nx * ny, 3);
  int e = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = j * nx1 + i, v10 = v00 + 1;
      const int v01 = v00 + nx1, v11 = v01 + 1;
      elt.row(e++) << v00, v10, v11;
      elt.row(e++) << v00, v11, v01;
    }
  return Mesh(std::move(vtx), std::move(elt));
}

Mesh build_disk(int n_target, double radius) {
  if (n_target < 4) throw std::invalid_argument("build_disk: n_target must be >= 4");
  if (!(radius > 0.0)) throw std::invalid_argument("build_disk: radius must be positive");

  // Rings i = 0..m at radius i/m, 6i vertices on ring i; total 1 + 3m(m+1).
  auto count = [](int m) { return 1 + 3 * m * (m + 1); };
  int m = 1;
  while (count(m + 1) <= n_target || std::abs(count(m + 1) - n_target) < std::abs(count(m) - n_target))
    ++m;

  std::vector<int> ring_start(m + 1);
  MatX3 vtx(count(m), 3);
  vtx.row(0) << 0.0, 0.0, 0.0;
  ring_start[0] = 0;
  int id = 1;
  for (int i = 1; i <= m; ++i) {
    ring_start[i] = id;
    const int n = 6 * i;
    const double r = radius * i / m;
    for (int j = 0; j < n; ++j) {
      const double th = 2.0 * M_PI * j / n;
      vtx(id, 0) = r * std::cos(th);
      vtx(id, 1) = r * std::sin(th);
      vtx(id, 2) = 0.0;
      ++id;
    }
  }

  std::vector<std::array<int, 3>> tris;
  // Center fan.
  for (int j = 0; j < 6; ++j)
    tris.push_back({0, ring_start[1] + j, ring_start[1] + (j + 1) % 6});
  // Annuli: angular merge walk between ring i (na pts) and ring i+1 (nb pts).
  for (int i = 1; i < m; ++i) {
    const int na = 6 * i, nb = 6 * (i + 1);
    const int sa = ring_start[i], sb = ring_start[i + 1];
    int a = 0, b = 0;
    while (a < na || b < nb) {
      const double next_a = double(a + 1) / na;
      const double next_b = double(b + 1) / nb;
      if (b < nb && (a == na || next_b <= next_a)) {
        tris.push_back({sa + a % na, sb + b % nb, sb + (b + 1) % nb});
        ++b;
      } else {
        tris.push_back({sa + a % na, sb + b % nb, sa + (a + 1) % na});
        ++a;
      }
    }
  }

  Eigen::MatrixXi elt(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    elt.row(t) << tris[t][0], tris[t][1], tris[t][2];
  Mesh mesh(std::move(vtx), std::move(elt));

  // Normalize orientation to +z.
  for (Eigen::Index t = 0; t < mesh.elements.rows(); ++t) {
    Vec3 a = mesh.vertices.row(mesh.elements(t, 0)),
         b = mesh.vertices.row(mesh.elements(t, 1)),
         c = mesh.vertices.row(mesh.elements(t, 2));
    if ((b - a).cross(c - a).z() < 0.0)
      std::swap(mesh.elements(t, 1), mesh.elements(t, 2));
  }
  return mesh;
}

Mesh build_cube(int n_target, const std::array<double, 3>& size) {
  if (n_target < 8) throw std::invalid_argument("build_cube: n_target must be >= 8");
  for (double s : size)
    if (!(s > 0.0)) throw std::invalid_argument("build_cube: sizes must be positive");

  // (n+1)^3 nearest to n_target.
  int n1 = 2;
  auto cube = [](int k) { return static_cast<long>(k) * k * k; };
  while (std::abs(cube(n1 + 1) - n_target) <= std::abs(cube(n1) - n_target)) ++n1;
  const int n = n1 - 1;

  MatX3 vtx(cube(n1), 3);
  auto vid = [&](int i, int j, int k) { return (k * n1 + j) * n1 + i; };
  for (int k = 0; k < n1; ++k)
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) {
        const int id = vid(i, j, k);
        vtx(id, 0) = size[0] * i / n;
        vtx(id, 1) = size[1] * j / n;
        vtx(id, 2) = size[2] * k / n;
      }

  // Kuhn split: 6 tetra per cell, all sharing the main diagonal (000)-(111).
  // Tet p for permutation (p0,p1,p2) of axes: corners reached by unit steps.
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  Eigen::MatrixXi elt(6L * n * n * n, 4);
  Eigen::Index e = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& p : perms) {
          int c[3] = {i, j, k};
          int ids[4];
          ids[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            ids[s + 1] = vid(c[0], c[1], c[2]);
          }
          elt.row(e++) << ids[0], ids[1], ids[2], ids[3];
        }

  Mesh mesh(std::move(vtx), std::move(elt));
  // Positive orientation.
  for (Eigen::Index t = 0; t < mesh.elements.rows(); ++t) {
    Vec3 a = mesh.vertices.row(mesh.elements(t, 0)),
         b = mesh.vertices.row(mesh.elements(t, 1)),
         c = mesh.vertices.row(mesh.elements(t, 2)),
         d = mesh.vertices.row(mesh.elements(t, 3));
    if ((b - a).cross(c - a).dot(d - a) < 0.0)
      std::swap(mesh.elements(t, 2), mesh.elements(t, 3));
  }
  return mesh;
}

Mesh build_sphere(int n_target, double radius) {
  if (n_target < 12) throw std::invalid_argument("build_sphere: n_target must be >= 12");
  if (!(radius > 0.0)) throw std::invalid_argument("build_sphere: radius must be positive");

  // Icosahedron.
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Vec3> pts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  while (static_cast<int>(pts.size()) < n_target) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      pts.push_back(0.5 * (pts[a] + pts[b]));
      int id = static_cast<int>(pts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * tris.size());
    for (const auto& t : tris) {
      const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris.swap(next);
  }

  MatX3 vtx(pts.size(), 3);
  for (size_t i = 0; i < pts.size(); ++i)
    vtx.row(i) = (radius * pts[i].normalized()).transpose();
  Eigen::MatrixXi elt(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    elt.row(t) << tris[t][0], tris[t][1], tris[t][2];

  Mesh mesh(std::move(vtx), std::move(elt));
  // Outward orientation.
  for (Eigen::Index t = 0; t < mesh.elements.rows(); ++t) {
    Vec3 a = mesh.vertices.row(mesh.elements(t, 0)),
         b = mesh.vertices.row(mesh.elements(t, 1)),
         c = mesh.vertices.row(mesh.elements(t, 2));
    if ((b - a).cross(c - a).dot(a + b + c) < 0.0)
      std::swap(mesh.elements(t, 1), mesh.elements(t, 2));
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Boundary extraction
// ---------------------------------------------------------------------------

Mesh boundary(const Mesh& mesh) {
  const int d = mesh.dim();
  if (d < 2) throw std::invalid_argument("boundary: mesh dimension must be >= 2");

  // Faces of each element, oriented so that volume-mesh normals point away
  // from the opposite vertex; triangle-mesh edges keep the cyclic order.
  struct Face {
    std::array<int, 3> key;   // sorted
    std::array<int, 3> vert;  // oriented (third entry unused for edges)
  };
  std::map<std::array<int, 3>, std::pair<int, Face>> faces;  // key -> (count, face)

  auto add = [&](std::array<int, 3> oriented) {
    std::array<int, 3> key = oriented;
    std::sort(key.begin(), key.end());
    auto it = faces.find(key);
    if (it == faces.end())
      faces.emplace(key, std::make_pair(1, Face{key, oriented}));
    else
      it->second.first += 1;
  };

  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    if (d == 2) {
      const int a = mesh.elements(e, 0), b = mesh.elements(e, 1), c = mesh.elements(e, 2);
      add({a, b, -1});
      add({b, c, -1});
      add({c, a, -1});
    } else {
      const int v[4] = {mesh.elements(e, 0), mesh.elements(e, 1),
                        mesh.elements(e, 2), mesh.elements(e, 3)};
      // Opposite-vertex convention; orient each face outward.
      static const int f[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
      for (int k = 0; k < 4; ++k) {
        std::array<int, 3> tri = {v[f[k][0]], v[f[k][1]], v[f[k][2]]};
        Vec3 a = mesh.vertices.row(tri[0]), b = mesh.vertices.row(tri[1]),
             c = mesh.vertices.row(tri[2]), w = mesh.vertices.row(v[k]);
        if ((b - a).cross(c - a).dot(w - a) > 0.0) std::swap(tri[1], tri[2]);
        add(tri);
      }
    }
  }

  std::vector<std::array<int, 3>> picked;
  for (const auto& [key, cf] : faces)
    if (cf.first == 1) picked.push_back(cf.second.vert);

  Eigen::MatrixXi elt(picked.size(), d);
  for (size_t i = 0; i < picked.size(); ++i)
    for (int c = 0; c < d; ++c) elt(i, c) = picked[i][c];

  Mesh bnd(mesh.vertices, std::move(elt));
  return clean(bnd, 0.0);
}

// ---------------------------------------------------------------------------
// Clean / union
// ---------------------------------------------------------------------------

Mesh clean(const Mesh& mesh, double tol) {
  if (tol < 0) throw std::invalid_argument("clean: tol must be >= 0");
  const Eigen::Index nv = mesh.vertex_count();

  // Merge vertices within tol via a uniform grid; representative is the
  // lexicographically smallest coordinate triple of each group.
  std::vector<int> group(nv);
  std::iota(group.begin(), group.end(), 0);
  if (tol > 0 && nv > 0) {
    std::function<int(int)> find = [&](int a) {
      while (group[a] != a) a = group[a] = group[group[a]];
      return a;
    };
    auto unite = [&](int a, int b) {
      a = find(a);
      b = find(b);
      if (a != b) group[std::max(a, b)] = std::min(a, b);
    };
    const double cell = tol;
    auto key_of = [&](const Vec3& p) {
      return std::array<int64_t, 3>{static_cast<int64_t>(std::floor(p.x() / cell)),
                                    static_cast<int64_t>(std::floor(p.y() / cell)),
                                    static_cast<int64_t>(std::floor(p.z() / cell))};
    };
    std::map<std::array<int64_t, 3>, std::vector<int>> grid;
    for (Eigen::Index i = 0; i < nv; ++i)
      grid[key_of(mesh.vertices.row(i))].push_back(static_cast<int>(i));
    const double tol2 = tol * tol;
    for (Eigen::Index i = 0; i < nv; ++i) {
      const Vec3 p = mesh.vertices.row(i);
      auto k = key_of(p);
      for (int64_t dx = -1; dx <= 1; ++dx)
        for (int64_t dy = -1; dy <= 1; ++dy)
          for (int64_t dz = -1; dz <= 1; ++dz) {
            auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
            if (it == grid.end()) continue;
            for (int j : it->second)
              if (j < i && (Vec3(mesh.vertices.row(j)) - p).squaredNorm() <= tol2)
                unite(static_cast<int>(i), j);
          }
    }
    for (Eigen::Index i = 0; i < nv; ++i) group[i] = find(static_cast<int>(i));
  } else if (nv > 0) {
    // Exact duplicates only.
    std::map<std::array<double, 3>, int> seen;
    for (Eigen::Index i = 0; i < nv; ++i) {
      std::array<double, 3> key = {mesh.vertices(i, 0), mesh.vertices(i, 1),
                                   mesh.vertices(i, 2)};
      auto [it, inserted] = seen.emplace(key, static_cast<int>(i));
      group[i] = it->second;
    }
  }

  // Lexicographically smallest representative per group.
  std::vector<int> rep(nv);
  std::iota(rep.begin(), rep.end(), 0);
  auto lex_less = [&](int a, int b) {
    for (int c = 0; c < 3; ++c) {
      if (mesh.vertices(a, c) < mesh.vertices(b, c)) return true;
      if (mesh.vertices(a, c) > mesh.vertices(b, c)) return false;
    }
    return false;
  };
  for (Eigen::Index i = 0; i < nv; ++i) {
    int g = group[i];
    if (lex_less(static_cast<int>(i), rep[g])) rep[g] = static_cast<int>(i);
  }
  for (Eigen::Index i = 0; i < nv; ++i) rep[i] = rep[group[i]];

  // Remap elements, drop degenerate and duplicate ones.
  const int d = mesh.dim();
  std::vector<std::array<int, 4>> kept;
  std::vector<int> kept_color;
  std::map<std::array<int, 4>, bool> seen_elt;
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    std::array<int, 4> v = {0, 0, 0, 0};
    bool degenerate = false;
    for (int c = 0; c <= d; ++c) v[c] = rep[mesh.elements(e, c)];
    for (int a = 0; a <= d && !degenerate; ++a)
      for (int b = a + 1; b <= d; ++b)
        if (v[a] == v[b]) degenerate = true;
    if (degenerate) continue;
    std::array<int, 4> key = v;
    std::sort(key.begin(), key.begin() + d + 1);
    if (seen_elt.count(key)) continue;
    seen_elt[key] = true;
    kept.push_back(v);
    kept_color.push_back(mesh.colors(e));
  }

  // Compact vertex table to referenced representatives.
  std::vector<int> new_id(nv, -1);
  int next = 0;
  for (const auto& v : kept)
    for (int c = 0; c <= d; ++c)
      if (new_id[v[c]] < 0) new_id[v[c]] = next++;
  // Preserve original vertex order.
  std::vector<int> order;
  order.reserve(next);
  for (Eigen::Index i = 0; i < nv; ++i)
    if (new_id[i] >= 0) order.push_back(static_cast<int>(i));
  for (size_t i = 0; i < order.size(); ++i) new_id[order[i]] = static_cast<int>(i);

  MatX3 vtx(order.size(), 3);
  for (size_t i = 0; i < order.size(); ++i) vtx.row(i) = mesh.vertices.row(order[i]);
  Eigen::MatrixXi elt(kept.size(), d + 1);
  Eigen::VectorXi col(kept.size());
  for (size_t e = 0; e < kept.size(); ++e) {
    for (int c = 0; c <= d; ++c) elt(e, c) = new_id[kept[e][c]];
    col(e) = kept_color[e];
  }
  Mesh out(std::move(vtx), std::move(elt), std::move(col));

  // Remove zero-measure elements.
  std::vector<Eigen::Index> good;
  for (Eigen::Index e = 0; e < out.element_count(); ++e) {
    double h = 0.0;
    for (int a = 0; a <= d; ++a)
      for (int b = a + 1; b <= d; ++b)
        h = std::max(h, (Vec3(out.vertices.row(out.elements(e, a))) -
                         Vec3(out.vertices.row(out.elements(e, b)))).norm());
    if (out.element_measure(e) > 1e-14 * std::pow(h, d)) good.push_back(e);
  }
  if (good.size() != static_cast<size_t>(out.element_count())) {
    Eigen::MatrixXi elt2(good.size(), d + 1);
    Eigen::VectorXi col2(good.size());
    for (size_t i = 0; i < good.size(); ++i) {
      elt2.row(i) = out.elements.row(good[i]);
      col2(i) = out.colors(good[i]);
    }
    out = Mesh(out.vertices, std::move(elt2), std::move(col2));
    out = clean(out, 0.0);  // drop vertices orphaned by removed elements
  }
  return out;
}

Mesh union_meshes(const Mesh& a, const Mesh& b) {
  if (a.empty()) return clean(b, 1e-12 * b.bounding_box_diagonal());
  if (b.empty()) return clean(a, 1e-12 * a.bounding_box_diagonal());
  if (a.dim() != b.dim())
    throw std::invalid_argument("union_meshes: dimension mismatch");

  MatX3 vtx(a.vertex_count() + b.vertex_count(), 3);
  vtx.topRows(a.vertex_count()) = a.vertices;
  vtx.bottomRows(b.vertex_count()) = b.vertices;
  Eigen::MatrixXi elt(a.element_count() + b.element_count(), a.dim() + 1);
  elt.topRows(a.element_count()) = a.elements;
  elt.bottomRows(b.element_count()) =
      b.elements.array() + static_cast<int>(a.vertex_count());
  Eigen::VectorXi col(elt.rows());
  col.head(a.element_count()) = a.colors;
  col.tail(b.element_count()) = b.colors;

  Mesh merged(std::move(vtx), std::move(elt), std::move(col));
  return clean(merged, 1e-12 * merged.bounding_box_diagonal());
}

// ---------------------------------------------------------------------------
// Interrogation
// ---------------------------------------------------------------------------

std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  const int d = mesh.dim();
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e)
    for (int a = 0; a <= d; ++a)
      for (int b = a + 1; b <= d; ++b) {
        int u = mesh.elements(e, a), v = mesh.elements(e, b);
        edges.push_back({std::min(u, v), std::max(u, v)});
      }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

EdgeStats edge_stats(const Mesh& mesh) {
  if (mesh.empty()) throw std::invalid_argument("edge_stats: empty mesh");
  auto edges = unique_edges(mesh);
  EdgeStats s;
  s.min_len = std::numeric_limits<double>::infinity();
  double sum = 0.0, sum2 = 0.0;
  for (const auto& e : edges) {
    const double len =
        (Vec3(mesh.vertices.row(e[0])) - Vec3(mesh.vertices.row(e[1]))).norm();
    s.min_len = std::min(s.min_len, len);
    s.max_len = std::max(s.max_len, len);
    sum += len;
    sum2 += len * len;
  }
  const double n = static_cast<double>(edges.size());
  s.mean_len = sum / n;
  s.std_len = std::sqrt(std::max(0.0, sum2 / n - s.mean_len * s.mean_len));
  return s;
}

MatX3 normals(const Mesh& mesh) {
  if (mesh.dim() != 2)
    throw std::invalid_argument("normals: requires a dimension-2 mesh");
  MatX3 n(mesh.element_count(), 3);
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    Vec3 a = mesh.vertices.row(mesh.elements(e, 0)),
         b = mesh.vertices.row(mesh.elements(e, 1)),
         c = mesh.vertices.row(mesh.elements(e, 2));
    Vec3 cr = (b - a).cross(c - a);
    const double nrm = cr.norm();
    if (nrm <= 0.0)
      throw std::invalid_argument("normals: degenerate triangle " + std::to_string(e));
    n.row(e) = (cr / nrm).transpose();
  }
  return n;
}

Mesh swap_orientation(const Mesh& mesh) {
  if (mesh.dim() != 2)
    throw std::invalid_argument("swap: requires a dimension-2 mesh");
  Mesh out = mesh;
  for (Eigen::Index e = 0; e < out.element_count(); ++e)
    std::swap(out.elements(e, 0), out.elements(e, 1));
  return out;
}

}  // namespace galerk
