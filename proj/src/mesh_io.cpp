#include "b3d/mesh_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <string>
#include <string_view>

namespace b3d {
namespace fs = std::filesystem;
using nlohmann::json;

MeshFormat mesh_format_for(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::kObj;
  if (ext == ".glb") return MeshFormat::kGlb;
  fail(ErrorKind::kUnsupported, "unsupported mesh extension: " + path.string());
}

// --- OBJ -----------------------------------------------------------------

namespace {

std::string_view next_token(std::string_view& line) {
  const auto start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(start);
  const auto end = line.find_first_of(" \t\r");
  const auto tok = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return tok;
}

double parse_double(std::string_view tok, int line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorKind::kMalformed,
          "obj line " + std::to_string(line_no) + ": bad number '" +
              std::string(tok) + "'");
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index to 0-based.
int resolve_index(std::string_view tok, int count, int line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && v != 0, ErrorKind::kMalformed,
          "obj line " + std::to_string(line_no) + ": bad index");
  const int idx = v > 0 ? v - 1 : count + v;
  require(idx >= 0 && idx < count, ErrorKind::kMalformed,
          "obj line " + std::to_string(line_no) + ": index out of range");
  return idx;
}

Mesh parse_obj(std::string_view text) {
  std::vector<Vec3d> pos, col, nrm;
  std::vector<Vec3i> faces;
  bool normals_aligned = true;
  int line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    const auto tag = next_token(line);
    if (tag == "v") {
      double xyz[6];
      int n = 0;
      for (auto tok = next_token(line); !tok.empty() && n < 6; tok = next_token(line)) {
        xyz[n++] = parse_double(tok, line_no);
      }
      require(n == 3 || n == 4 || n == 6, ErrorKind::kMalformed,
              "obj line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      pos.emplace_back(xyz[0], xyz[1], xyz[2]);
      if (n == 6) col.emplace_back(xyz[3], xyz[4], xyz[5]);
    } else if (tag == "vn") {
      Vec3d n;
      for (int k = 0; k < 3; ++k) {
        const auto tok = next_token(line);
        require(!tok.empty(), ErrorKind::kMalformed,
                "obj line " + std::to_string(line_no) + ": normal needs 3 components");
        n[k] = parse_double(tok, line_no);
      }
      nrm.push_back(n);
    } else if (tag == "f") {
      std::vector<int> poly;
      for (auto tok = next_token(line); !tok.empty(); tok = next_token(line)) {
        const auto slash = tok.find('/');
        const int vi = resolve_index(tok.substr(0, slash), static_cast<int>(pos.size()),
                                     line_no);
        poly.push_back(vi);
        const auto last = tok.rfind('/');
        if (slash != std::string_view::npos && last + 1 < tok.size() &&
            tok.find('/', slash + 1) != std::string_view::npos) {
          const int ni = resolve_index(tok.substr(last + 1),
                                       static_cast<int>(nrm.size()), line_no);
          normals_aligned &= ni == vi;
        } else {
          normals_aligned = false;
        }
      }
      require(poly.size() >= 3, ErrorKind::kMalformed,
              "obj line " + std::to_string(line_no) + ": face needs 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        faces.emplace_back(poly[0], poly[k], poly[k + 1]);
      }
    }
    // everything else (vt, mtllib, usemtl, o, g, s, comments) is ignored
  }
  require(!pos.empty(), ErrorKind::kMalformed, "obj has no vertices");

  Mesh mesh;
  mesh.positions.resize(static_cast<Eigen::Index>(pos.size()), 3);
  for (std::size_t i = 0; i < pos.size(); ++i) mesh.positions.row(i) = pos[i];
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) mesh.faces.row(f) = faces[f];
  if (col.size() == pos.size()) {
    Mesh::Points c(mesh.vertex_count(), 3);
    for (std::size_t i = 0; i < col.size(); ++i) c.row(i) = col[i];
    mesh.colors = std::move(c);
  }
  if (normals_aligned && !faces.empty() && nrm.size() == pos.size()) {
    Mesh::Points n(mesh.vertex_count(), 3);
    for (std::size_t i = 0; i < nrm.size(); ++i) n.row(i) = nrm[i].normalized();
    mesh.normals = std::move(n);
  }
  validate(mesh);
  return mesh;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::string format_obj(const Mesh& mesh) {
  std::string out = "# bundle3d\n";
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
    out += "v";
    for (int k = 0; k < 3; ++k) {
      out += ' ';
      append_number(out, mesh.positions(i, k));
    }
    if (mesh.colors) {
      for (int k = 0; k < 3; ++k) {
        out += ' ';
        append_number(out, (*mesh.colors)(i, k));
      }
    }
    out += '\n';
  }
  if (mesh.normals) {
    for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) {
      out += "vn";
      for (int k = 0; k < 3; ++k) {
        out += ' ';
        append_number(out, (*mesh.normals)(i, k));
      }
      out += '\n';
    }
  }
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    out += 'f';
    for (int k = 0; k < 3; ++k) {
      const std::string idx = std::to_string(mesh.faces(f, k) + 1);
      out += ' ';
      out += idx;
      if (mesh.normals) {
        out += "//";
        out += idx;
      }
    }
    out += '\n';
  }
  return out;
}

// --- GLB -----------------------------------------------------------------

constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;
constexpr int kFloat = 5126;
constexpr int kUnsignedByte = 5121;
constexpr int kUnsignedShort = 5123;
constexpr int kUnsignedInt = 5125;

template <typename T>
void append_pod(Bytes& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void pad_to_4(Bytes& out, std::uint8_t fill) {
  while (out.size() % 4 != 0) out.push_back(fill);
}

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  require(at + 4 <= bytes.size(), ErrorKind::kMalformed, "truncated glb");
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

int component_count(const std::string& type) {
  if (type == "SCALAR") return 1;
  if (type == "VEC2") return 2;
  if (type == "VEC3") return 3;
  if (type == "VEC4") return 4;
  fail(ErrorKind::kUnsupported, "unsupported accessor type " + type);
}

int component_size(int component_type) {
  switch (component_type) {
    case kFloat:
    case kUnsignedInt: return 4;
    case kUnsignedShort: return 2;
    case kUnsignedByte: return 1;
    default:
      fail(ErrorKind::kUnsupported,
           "unsupported component type " + std::to_string(component_type));
  }
}

// Reads an accessor as doubles, row per element. Normalized integer
// components map to [0, 1].
Eigen::MatrixXd read_accessor(const json& doc, std::span<const std::uint8_t> bin,
                              int index) {
  const json& acc = doc.at("accessors").at(index);
  require(acc.contains("bufferView"), ErrorKind::kUnsupported,
          "sparse or empty accessors are not supported");
  const json& view = doc.at("bufferViews").at(acc.at("bufferView").get<int>());
  require(view.value("buffer", 0) == 0, ErrorKind::kUnsupported,
          "glb must reference its embedded buffer");
  const int ctype = acc.at("componentType").get<int>();
  const int ncomp = component_count(acc.at("type").get<std::string>());
  const std::size_t csize = static_cast<std::size_t>(component_size(ctype));
  const std::size_t count = acc.at("count").get<std::size_t>();
  const bool normalized = acc.value("normalized", false);
  const std::size_t stride = view.value("byteStride", csize * ncomp);
  const std::size_t base =
      view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
  require(count == 0 || base + (count - 1) * stride + csize * ncomp <= bin.size(),
          ErrorKind::kMalformed, "accessor runs past the binary chunk");

  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), ncomp);
  for (std::size_t i = 0; i < count; ++i) {
    for (int k = 0; k < ncomp; ++k) {
      const std::uint8_t* p = bin.data() + base + i * stride + k * csize;
      double v = 0.0;
      switch (ctype) {
        case kFloat: {
          float f;
          std::memcpy(&f, p, 4);
          v = f;
          break;
        }
        case kUnsignedInt: {
          std::uint32_t u;
          std::memcpy(&u, p, 4);
          v = normalized ? u / 4294967295.0 : u;
          break;
        }
        case kUnsignedShort: {
          std::uint16_t u;
          std::memcpy(&u, p, 2);
          v = normalized ? u / 65535.0 : u;
          break;
        }
        case kUnsignedByte: v = normalized ? *p / 255.0 : *p; break;
      }
      out(static_cast<Eigen::Index>(i), k) = v;
    }
  }
  return out;
}

}  // namespace

Bytes encode_glb(const Mesh& mesh) {
  validate(mesh);
  Bytes bin;
  json views = json::array();
  json accessors = json::array();
  json attributes = json::object();

  auto add_vec3 = [&](const Mesh::Points& data, const char* name, bool bounds) {
    pad_to_4(bin, 0);
    const std::size_t offset = bin.size();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      for (int k = 0; k < 3; ++k) append_pod(bin, static_cast<float>(data(i, k)));
    }
    views.push_back({{"buffer", 0},
                     {"byteOffset", offset},
                     {"byteLength", bin.size() - offset},
                     {"target", 34962}});
    json acc = {{"bufferView", views.size() - 1},
                {"componentType", kFloat},
                {"count", data.rows()},
                {"type", "VEC3"}};
    if (bounds && data.rows() > 0) {
      Eigen::RowVector3f lo = data.cast<float>().colwise().minCoeff();
      Eigen::RowVector3f hi = data.cast<float>().colwise().maxCoeff();
      acc["min"] = {lo(0), lo(1), lo(2)};
      acc["max"] = {hi(0), hi(1), hi(2)};
    }
    accessors.push_back(acc);
    attributes[name] = accessors.size() - 1;
  };

  add_vec3(mesh.positions, "POSITION", true);
  if (mesh.normals) add_vec3(*mesh.normals, "NORMAL", false);
  if (mesh.colors) add_vec3(*mesh.colors, "COLOR_0", false);

  pad_to_4(bin, 0);
  const std::size_t index_offset = bin.size();
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) append_pod(bin, static_cast<std::uint32_t>(mesh.faces(f, k)));
  }
  views.push_back({{"buffer", 0},
                   {"byteOffset", index_offset},
                   {"byteLength", bin.size() - index_offset},
                   {"target", 34963}});
  accessors.push_back({{"bufferView", views.size() - 1},
                       {"componentType", kUnsignedInt},
                       {"count", mesh.face_count() * 3},
                       {"type", "SCALAR"}});
  pad_to_4(bin, 0);

  const json doc = {
      {"asset", {{"version", "2.0"}, {"generator", "bundle3d"}}},
      {"scene", 0},
      {"scenes", {{{"nodes", {0}}}}},
      {"nodes", {{{"mesh", 0}}}},
      {"meshes",
       {{{"primitives",
          {{{"attributes", attributes},
            {"indices", accessors.size() - 1},
            {"mode", 4}}}}}}},
      {"buffers", {{{"byteLength", bin.size()}}}},
      {"bufferViews", views},
      {"accessors", accessors}};

  Bytes json_chunk;
  const std::string text = doc.dump();
  json_chunk.assign(text.begin(), text.end());
  pad_to_4(json_chunk, ' ');

  Bytes out;
  const auto total = static_cast<std::uint32_t>(12 + 8 + json_chunk.size() + 8 + bin.size());
  append_pod(out, kGlbMagic);
  append_pod(out, std::uint32_t{2});
  append_pod(out, total);
  append_pod(out, static_cast<std::uint32_t>(json_chunk.size()));
  append_pod(out, kChunkJson);
  out.insert(out.end(), json_chunk.begin(), json_chunk.end());
  append_pod(out, static_cast<std::uint32_t>(bin.size()));
  append_pod(out, kChunkBin);
  out.insert(out.end(), bin.begin(), bin.end());
  return out;
}

Mesh decode_glb(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 20 && read_u32(bytes, 0) == kGlbMagic, ErrorKind::kMalformed,
          "not a binary glTF file");
  require(read_u32(bytes, 4) == 2, ErrorKind::kUnsupported, "only glTF 2.0 is supported");
  const std::uint32_t total = read_u32(bytes, 8);
  require(total <= bytes.size(), ErrorKind::kMalformed, "truncated glb");

  const std::uint32_t json_len = read_u32(bytes, 12);
  require(read_u32(bytes, 16) == kChunkJson && 20 + json_len <= total,
          ErrorKind::kMalformed, "glb first chunk must be JSON");
  json doc;
  try {
    doc = json::parse(bytes.begin() + 20, bytes.begin() + 20 + json_len);
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformed, std::string("glb json: ") + e.what());
  }
  std::span<const std::uint8_t> bin;
  const std::size_t bin_at = 20 + json_len;
  if (bin_at + 8 <= total) {
    const std::uint32_t bin_len = read_u32(bytes, bin_at);
    require(read_u32(bytes, bin_at + 4) == kChunkBin && bin_at + 8 + bin_len <= total,
            ErrorKind::kMalformed, "bad glb binary chunk");
    bin = bytes.subspan(bin_at + 8, bin_len);
  }

  Mesh mesh;
  try {
    require(doc.contains("meshes") && !doc["meshes"].empty(), ErrorKind::kMalformed,
            "glb contains no meshes");
    std::vector<Eigen::MatrixXd> pos, nrm, col;
    std::vector<Eigen::MatrixXi> idx;
    bool all_normals = true, all_colors = true;
    for (const json& prim : doc["meshes"][0].at("primitives")) {
      require(prim.value("mode", 4) == 4, ErrorKind::kUnsupported,
              "only triangle-list primitives are supported");
      const json& attr = prim.at("attributes");
      pos.push_back(read_accessor(doc, bin, attr.at("POSITION").get<int>()));
      require(pos.back().cols() == 3, ErrorKind::kMalformed, "POSITION must be VEC3");
      const Eigen::Index n = pos.back().rows();
      if (attr.contains("NORMAL")) {
        nrm.push_back(read_accessor(doc, bin, attr["NORMAL"].get<int>()));
      } else {
        all_normals = false;
      }
      if (attr.contains("COLOR_0")) {
        col.push_back(read_accessor(doc, bin, attr["COLOR_0"].get<int>()).leftCols(3));
      } else {
        all_colors = false;
      }
      Eigen::MatrixXi tri;
      if (prim.contains("indices")) {
        const Eigen::MatrixXd raw = read_accessor(doc, bin, prim["indices"].get<int>());
        require(raw.cols() == 1 && raw.rows() % 3 == 0, ErrorKind::kMalformed,
                "index count must be a multiple of 3");
        tri = raw.cast<int>();
      } else {
        require(n % 3 == 0, ErrorKind::kMalformed, "vertex count must be a multiple of 3");
        tri = Eigen::VectorXi::LinSpaced(n, 0, static_cast<int>(n) - 1);
      }
      require((tri.array() >= 0).all() && (tri.array() < n).all(), ErrorKind::kMalformed,
              "index out of range");
      idx.push_back(tri);
    }

    Eigen::Index nv = 0, nf = 0;
    for (std::size_t p = 0; p < pos.size(); ++p) {
      nv += pos[p].rows();
      nf += idx[p].rows() / 3;
    }
    mesh.positions.resize(nv, 3);
    mesh.faces.resize(nf, 3);
    if (all_normals) mesh.normals = Mesh::Points(nv, 3);
    if (all_colors) mesh.colors = Mesh::Points(nv, 3);
    Eigen::Index vo = 0, fo = 0;
    for (std::size_t p = 0; p < pos.size(); ++p) {
      const Eigen::Index n = pos[p].rows();
      mesh.positions.middleRows(vo, n) = pos[p];
      if (all_normals) {
        require(nrm[p].rows() == n && nrm[p].cols() == 3, ErrorKind::kMalformed,
                "NORMAL count mismatch");
        mesh.normals->middleRows(vo, n) = nrm[p].rowwise().normalized();
      }
      if (all_colors) {
        require(col[p].rows() == n, ErrorKind::kMalformed, "COLOR_0 count mismatch");
        mesh.colors->middleRows(vo, n) = col[p];
      }
      for (Eigen::Index t = 0; t < idx[p].rows() / 3; ++t) {
        for (int k = 0; k < 3; ++k) {
          mesh.faces(fo + t, k) = idx[p](3 * t + k, 0) + static_cast<int>(vo);
        }
      }
      vo += n;
      fo += idx[p].rows() / 3;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformed, std::string("glb structure: ") + e.what());
  }
  validate(mesh);
  return mesh;
}

Mesh load_mesh(const fs::path& path) {
  const MeshFormat format = mesh_format_for(path);
  const Bytes bytes = read_file(path);
  if (format == MeshFormat::kObj) {
    return parse_obj(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                      bytes.size()));
  }
  return decode_glb(bytes);
}

void save_mesh(const Mesh& mesh, const fs::path& path, MeshFormat format) {
  validate(mesh);
  if (format == MeshFormat::kObj) {
    write_text_atomic(path, format_obj(mesh));
  } else {
    write_file_atomic(path, encode_glb(mesh));
  }
}

}  // namespace b3d
