#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "galerk/mesh.hpp"
#include "galerk/mesh_io.hpp"

using namespace galerk;

namespace {

Mesh translated(const Mesh& m, const Vec3& shift) {
  Mesh out = m;
  out.vertices.rowwise() += shift.transpose();
  return out;
}

}  // namespace

TEST_CASE("build_square basics") {
  Mesh m = build_square(4, {1.0, 1.0});
  CHECK(m.vertex_count() == 4);
  CHECK(m.element_count() == 2);
  CHECK(m.total_measure() == doctest::Approx(1.0).epsilon(1e-12));

  Mesh big = build_square(25, {5.0, 5.0});
  CHECK(big.total_measure() == doctest::Approx(25.0).epsilon(1e-12));

  Mesh huge = build_square(5000, {5.0, 5.0});
  CHECK(huge.vertex_count() >= 3500);
  CHECK(huge.vertex_count() <= 6500);
  CHECK(huge.total_measure() == doctest::Approx(25.0).epsilon(1e-12));

  CHECK_THROWS_AS(build_square(100, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("build_disk area, boundary and radius bound") {
  Mesh m = build_disk(1000, 1.0);
  CHECK(std::abs(m.total_measure() - M_PI) < 0.01);

  Mesh bnd = boundary(m);
  CHECK(bnd.dim() == 1);
  // Closed polyline: every vertex appears in exactly two segments.
  std::vector<int> count(bnd.vertex_count(), 0);
  for (Eigen::Index e = 0; e < bnd.element_count(); ++e) {
    ++count[bnd.elements(e, 0)];
    ++count[bnd.elements(e, 1)];
  }
  for (int c : count) CHECK(c == 2);
  for (Eigen::Index v = 0; v < bnd.vertex_count(); ++v)
    CHECK(Vec3(bnd.vertices.row(v)).norm() == doctest::Approx(1.0).epsilon(1e-12));

  Mesh small = build_disk(10, 2.0);
  for (Eigen::Index v = 0; v < small.vertex_count(); ++v)
    CHECK(Vec3(small.vertices.row(v)).norm() <= 2.0 + 1e-12);
  CHECK_THROWS_AS(build_disk(10, -1.0), std::invalid_argument);
}

TEST_CASE("build_cube counts and volume") {
  Mesh m = build_cube(8, {1.0, 1.0, 1.0});
  CHECK(m.vertex_count() == 8);
  CHECK(m.element_count() == 6);
  CHECK(m.total_measure() == doctest::Approx(1.0).epsilon(1e-12));

  Mesh paper = build_cube(9261, {1.0, 1.0, 1.0});
  CHECK(paper.vertex_count() == 9261);  // 21^3

  Mesh box = build_cube(1000, {1.0, 0.5, 0.5});
  CHECK(box.total_measure() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("build_sphere subdivision counts and area") {
  Mesh ico = build_sphere(12, 1.0);
  CHECK(ico.vertex_count() == 12);
  CHECK(ico.element_count() == 20);
  CHECK(boundary(ico).empty());

  Mesh m = build_sphere(1000, 1.0);
  CHECK(m.vertex_count() == 2562);
  CHECK(std::abs(m.total_measure() - 4.0 * M_PI) / (4.0 * M_PI) < 0.005);
}

TEST_CASE("boundary of volume and surface meshes") {
  Mesh cube = build_cube(8, {1.0, 1.0, 1.0});
  Mesh bnd = boundary(cube);
  CHECK(bnd.dim() == 2);
  CHECK(bnd.element_count() == 12);
  CHECK(bnd.total_measure() == doctest::Approx(6.0).epsilon(1e-12));
  // Outward orientation.
  MatX3 nrm = normals(bnd);
  for (Eigen::Index e = 0; e < bnd.element_count(); ++e) {
    Vec3 c = bnd.element_centroid(e) - Vec3(0.5, 0.5, 0.5);
    CHECK(Vec3(nrm.row(e)).dot(c) > 0.0);
  }
  // Closed surfaces have no boundary; boundary of boundary is empty.
  CHECK(boundary(build_sphere(162, 1.0)).empty());
  CHECK(boundary(bnd).empty());

  Mesh disk_bnd = boundary(build_disk(1000, 1.0));
  CHECK(std::abs(disk_bnd.total_measure() - 2.0 * M_PI) < 0.02);
}

TEST_CASE("clean merges duplicates and is idempotent") {
  Mesh m = build_square(25, {1.0, 1.0});
  // Duplicate the vertex table.
  MatX3 vtx(2 * m.vertex_count(), 3);
  vtx.topRows(m.vertex_count()) = m.vertices;
  vtx.bottomRows(m.vertex_count()) = m.vertices;
  Eigen::MatrixXi elt = m.elements;
  for (Eigen::Index e = 0; e < elt.rows(); ++e)
    if (e % 2 == 0) elt.row(e).array() += static_cast<int>(m.vertex_count());
  Mesh dirty(vtx, elt);
  Mesh cleaned = clean(dirty, 1e-12);
  CHECK(cleaned.vertex_count() == m.vertex_count());
  CHECK(cleaned.element_count() == m.element_count());

  Mesh twice = clean(cleaned, 1e-12);
  CHECK(twice.vertex_count() == cleaned.vertex_count());
  CHECK((twice.vertices.array() == cleaned.vertices.array()).all());
  CHECK((twice.elements.array() == cleaned.elements.array()).all());
}

TEST_CASE("union of meshes") {
  Mesh m = build_square(25, {1.0, 1.0});
  Mesh empty = Mesh::empty_mesh(2);
  Mesh u1 = union_meshes(m, empty);
  CHECK(u1.vertex_count() == m.vertex_count());
  CHECK(u1.element_count() == m.element_count());

  Mesh u2 = union_meshes(m, m);
  CHECK(u2.vertex_count() == m.vertex_count());
  CHECK(u2.element_count() == m.element_count());

  // Two abutting unit squares sharing the edge x = 1/2 (5x5 grids).
  Mesh left = build_square(25, {1.0, 1.0});
  Mesh right = translated(left, Vec3(1.0, 0.0, 0.0));
  Mesh u3 = union_meshes(left, right);
  CHECK(u3.total_measure() == doctest::Approx(2.0).epsilon(1e-12));
  // 5 shared vertices merged on the common edge.
  CHECK(u3.vertex_count() == 2 * 25 - 5);
  CHECK(u3.element_count() == left.element_count() + right.element_count());

  Mesh seg = Mesh::empty_mesh(1);
  CHECK_THROWS_AS(union_meshes(m, boundary(m)), std::invalid_argument);
  (void)seg;
}

TEST_CASE("edge_stats") {
  MatX3 vtx(2, 3);
  vtx << 0, 0, 0, 1, 0, 0;
  Eigen::MatrixXi elt(1, 2);
  elt << 0, 1;
  Mesh seg(vtx, elt);
  EdgeStats s = edge_stats(seg);
  CHECK(s.min_len == doctest::Approx(1.0));
  CHECK(s.max_len == doctest::Approx(1.0));
  CHECK(s.mean_len == doctest::Approx(1.0));
  CHECK(s.std_len == doctest::Approx(0.0));

  EdgeStats cube = edge_stats(build_cube(8, {1.0, 1.0, 1.0}));
  CHECK(cube.min_len == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cube.max_len == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  CHECK_THROWS_AS(edge_stats(Mesh::empty_mesh(2)), std::invalid_argument);
}

TEST_CASE("normals orientation and swap") {
  MatX3 vtx(3, 3);
  vtx << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  Eigen::MatrixXi elt(1, 3);
  elt << 0, 1, 2;
  Mesh tri(vtx, elt);
  MatX3 n = normals(tri);
  CHECK(Vec3(n.row(0)).isApprox(Vec3(0, 0, 1), 1e-14));

  Mesh flipped = swap_orientation(tri);
  CHECK(Vec3(normals(flipped).row(0)).isApprox(Vec3(0, 0, -1), 1e-14));
  CHECK(flipped.element_measure(0) == doctest::Approx(tri.element_measure(0)));

  Mesh twice = swap_orientation(flipped);
  CHECK((twice.elements.array() == tri.elements.array()).all());

  // Sphere normals point outward.
  Mesh sph = build_sphere(162, 1.0);
  MatX3 sn = normals(sph);
  for (Eigen::Index e = 0; e < sph.element_count(); ++e)
    CHECK(Vec3(sn.row(e)).dot(sph.element_centroid(e)) > 0.0);
  // Unit length.
  for (Eigen::Index e = 0; e < sph.element_count(); ++e)
    CHECK(Vec3(sn.row(e)).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("msh round trip and error paths") {
  const std::string dir = std::filesystem::temp_directory_path().string();
  const std::string path = dir + "/galerk_test_cube.msh";
  Mesh cube = build_cube(27, {1.0, 1.0, 1.0});
  write_msh(path, cube);
  Mesh back = read_msh(path);
  REQUIRE(back.vertex_count() == cube.vertex_count());
  REQUIRE(back.element_count() == cube.element_count());
  CHECK((back.vertices - cube.vertices).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((back.elements.array() == cube.elements.array()).all());
  std::remove(path.c_str());

  // Physical tag passthrough on a single tetra.
  const std::string tagged = dir + "/galerk_test_tag.msh";
  {
    std::ofstream out(tagged);
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n"
           "1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n"
           "$Elements\n1\n1 4 2 7 7 1 2 3 4\n$EndElements\n";
  }
  Mesh tet = read_msh(tagged);
  REQUIRE(tet.element_count() == 1);
  CHECK(tet.colors(0) == 7);
  std::remove(tagged.c_str());

  // Truncated file names the failing section.
  const std::string bad = dir + "/galerk_test_bad.msh";
  {
    std::ofstream out(bad);
    out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n5\n1 0 0 0\n";
  }
  CHECK_THROWS_WITH_AS(read_msh(bad), doctest::Contains("$Nodes"),
                       std::runtime_error);
  std::remove(bad.c_str());
}

TEST_CASE("vtk writer emits legacy unstructured grid") {
  const std::string path =
      std::filesystem::temp_directory_path().string() + "/galerk_test.vtk";
  Mesh m = build_square(9, {1.0, 1.0});
  Eigen::VectorXd field = m.vertices.col(0);
  write_vtk(path, m, {{"x_coord", field}});
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(text.find("POINT_DATA") != std::string::npos);
  CHECK(text.find("SCALARS x_coord double 1") != std::string::npos);
  std::remove(path.c_str());

  Eigen::VectorXd short_field(3);
  CHECK_THROWS_AS(write_vtk(path, m, {{"bad", short_field}}),
                  std::invalid_argument);
}
