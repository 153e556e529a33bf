#pragma once

#include <filesystem>

#include "b3d/geometry.hpp"
#include "b3d/io.hpp"

namespace b3d {

enum class MeshFormat { kObj, kGlb };

// From the file extension (.obj / .glb); kUnsupported otherwise.
MeshFormat mesh_format_for(const std::filesystem::path& path);

// OBJ: v/f records (polygons fan-triangulated, materials and UVs ignored),
// optional "v x y z r g b" colors and vn normals when they index 1:1 with v.
// GLB: every triangle primitive of the first mesh; node transforms ignored.
Mesh load_mesh(const std::filesystem::path& path);

void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               MeshFormat format);
inline void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  save_mesh(mesh, path, mesh_format_for(path));
}

Bytes encode_glb(const Mesh& mesh);
Mesh decode_glb(std::span<const std::uint8_t> bytes);

}  // namespace b3d
