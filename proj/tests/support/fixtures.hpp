#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "b3d/geometry.hpp"

namespace b3d::testing {

// Sphere-topology ground-truth shapes, normalized to [-1,1]^3 with normals.
Mesh ellipsoid(int subdivisions = 5);
Mesh rounded_box(int subdivisions = 5);
Mesh blob(std::uint64_t seed, int subdivisions = 5);

struct NamedMesh {
  std::string name;
  Mesh mesh;
};
std::vector<NamedMesh> reconstruction_fixtures();

// Decimated copy standing in for an external coarse reconstruction.
Mesh decimate(const Mesh& mesh, double edge_length = 0.2);

// Axis-aligned cube [-h,h]^3 whose face diagonals all belong to one
// inscribed tetrahedron, so every corner sees its three faces equally.
Mesh tetra_split_cube(double half = 1.0);

// Random triangles inside [-extent, extent]^3 (not a closed surface).
Mesh random_triangle_soup(int faces, std::uint64_t seed, double extent = 0.8);

}  // namespace b3d::testing
