#include "bytes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace gsanim::io {

namespace {

using detail::put_f32;
using detail::put_le;
using detail::put_text;
using detail::Reader;

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8:
      return 1;
    case PlyType::i16:
    case PlyType::u16:
      return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32:
      return 4;
    case PlyType::f64:
      return 8;
  }
  return 0;
}

double read_value(Reader& r, PlyType t) {
  switch (t) {
    case PlyType::i8:
      return r.read_le<std::int8_t>("ply value");
    case PlyType::u8:
      return r.read_le<std::uint8_t>("ply value");
    case PlyType::i16:
      return r.read_le<std::int16_t>("ply value");
    case PlyType::u16:
      return r.read_le<std::uint16_t>("ply value");
    case PlyType::i32:
      return r.read_le<std::int32_t>("ply value");
    case PlyType::u32:
      return r.read_le<std::uint32_t>("ply value");
    case PlyType::f32:
      return r.read_f32("ply value");
    case PlyType::f64:
      return r.read_f64("ply value");
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> properties;
  std::size_t stride() const {  // 0 when rows have variable size
    std::size_t s = 0;
    for (const auto& p : properties) {
      if (p.is_list) return 0;
      s += type_size(p.type);
    }
    return s;
  }
  int find(const std::string& n) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == n) return static_cast<int>(i);
    }
    return -1;
  }
};

struct PlyHeader {
  std::vector<PlyElement> elements;
  std::size_t data_offset = 0;
};

constexpr std::size_t kMaxHeader = 1 << 16;
constexpr std::uint64_t kMaxListLength = 1 << 12;

PlyHeader parse_header(ByteView bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), std::min(bytes.size(), kMaxHeader));
  PlyHeader h;
  std::size_t pos = 0;
  bool first = true, have_format = false;
  while (true) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      throw AssetError(AssetErrorKind::syntax, pos, "ply header is not terminated by end_header");
    }
    std::string line(text.substr(pos, eol - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t line_start = pos;
    pos = eol + 1;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& msg) { throw AssetError(AssetErrorKind::syntax, line_start, msg); };
    if (first) {
      if (line != "ply") fail("missing 'ply' magic");
      first = false;
      continue;
    }
    if (key == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian") fail("only binary_little_endian ply is supported, got '" + fmt + "'");
      if (ver != "1.0") fail("unsupported ply version '" + ver + "'");
      have_format = true;
    } else if (key == "comment" || key == "obj_info" || key.empty()) {
      continue;
    } else if (key == "element") {
      PlyElement e;
      std::string count;
      ls >> e.name >> count;
      if (e.name.empty() || count.empty() || !std::all_of(count.begin(), count.end(), ::isdigit) || count.size() > 18) {
        fail("malformed element line");
      }
      e.count = std::stoull(count);
      h.elements.push_back(std::move(e));
    } else if (key == "property") {
      if (h.elements.empty()) fail("property before any element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        const auto c = ply_type(ct);
        const auto i = ply_type(it);
        if (!c || !i || *c == PlyType::f32 || *c == PlyType::f64) fail("malformed list property");
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        const auto ty = ply_type(t);
        if (!ty) fail("unknown property type '" + t + "'");
        p.type = *ty;
        ls >> p.name;
      }
      if (p.name.empty()) fail("property without a name");
      if (h.elements.back().find(p.name) >= 0) fail("duplicate property '" + p.name + "'");
      h.elements.back().properties.push_back(p);
    } else if (key == "end_header") {
      if (!have_format) fail("missing format line");
      h.data_offset = pos;
      return h;
    } else {
      fail("unknown header keyword '" + key + "'");
    }
  }
}

// Element rows as doubles; list properties go to `lists` (one vector per row).
struct ElementData {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> lists;
};

ElementData read_element(Reader& r, const PlyElement& e) {
  ElementData d;
  const std::size_t stride = e.stride();
  if (stride > 0) {
    const std::uint64_t fit = r.remaining() / stride;
    if (e.count > fit) {
      throw AssetError(AssetErrorKind::bounds, r.pos() + fit * stride,
                       "element '" + e.name + "' declares " + std::to_string(e.count) + " rows but data holds " +
                           std::to_string(fit));
    }
  } else if (e.count > r.remaining()) {
    throw AssetError(AssetErrorKind::bounds, r.pos(), "element '" + e.name + "' count exceeds the data size");
  }
  d.rows.reserve(e.count);
  for (std::uint64_t i = 0; i < e.count; ++i) {
    std::vector<double> row;
    row.reserve(e.properties.size());
    for (const auto& p : e.properties) {
      if (p.is_list) {
        const std::size_t at = r.pos();
        const double n = read_value(r, p.count_type);
        if (n < 0 || n > static_cast<double>(kMaxListLength)) {
          throw AssetError(AssetErrorKind::bounds, at, "list length out of range in element '" + e.name + "'");
        }
        r.require(static_cast<std::size_t>(n) * type_size(p.type), "ply list");
        std::vector<double> list(static_cast<std::size_t>(n));
        for (auto& v : list) v = read_value(r, p.type);
        d.lists.push_back(std::move(list));
        row.push_back(n);
      } else {
        row.push_back(read_value(r, p.type));
      }
    }
    d.rows.push_back(std::move(row));
  }
  return d;
}

const PlyElement* find_element(const PlyHeader& h, const std::string& name) {
  for (const auto& e : h.elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::string float_props(std::initializer_list<const char*> names) {
  std::string s;
  for (const char* n : names) {
    s += "property float ";
    s += n;
    s += '\n';
  }
  return s;
}

const std::array<const char*, 14> kSplatProps = {"x",       "y",       "z",      "opacity", "scale_0",
                                                  "scale_1", "scale_2", "rot_0",  "rot_1",   "rot_2",
                                                  "rot_3",   "f_dc_0",  "f_dc_1", "f_dc_2"};

} // namespace

Mesh parse_mesh_ply(ByteView bytes) {
  const PlyHeader h = parse_header(bytes);
  Reader r(bytes, h.data_offset);
  Mesh m;
  for (const auto& e : h.elements) {
    const std::size_t element_start = r.pos();
    const ElementData d = read_element(r, e);
    if (e.name == "vertex") {
      const int x = e.find("x"), y = e.find("y"), z = e.find("z");
      if (x < 0 || y < 0 || z < 0) {
        throw AssetError(AssetErrorKind::syntax, 0, "vertex element lacks x, y or z");
      }
      const int nx = e.find("nx"), ny = e.find("ny"), nz = e.find("nz");
      int u = e.find("u"), v = e.find("v");
      if (u < 0 || v < 0) {
        u = e.find("s");
        v = e.find("t");
      }
      for (const auto& row : d.rows) {
        m.vertices.emplace_back(row[x], row[y], row[z]);
        if (nx >= 0 && ny >= 0 && nz >= 0) m.normals.emplace_back(row[nx], row[ny], row[nz]);
        if (u >= 0 && v >= 0) m.uv.emplace_back(row[u], row[v]);
      }
    } else if (e.name == "face") {
      int idx = e.find("vertex_indices");
      if (idx < 0) idx = e.find("vertex_index");
      if (idx < 0 || !e.properties[static_cast<std::size_t>(idx)].is_list) {
        throw AssetError(AssetErrorKind::syntax, 0, "face element lacks a vertex_indices list");
      }
      std::size_t list_index = 0;
      int list_slot = 0;
      for (std::size_t k = 0; k < static_cast<std::size_t>(idx); ++k) {
        if (e.properties[k].is_list) ++list_slot;
      }
      int lists_per_row = 0;
      for (const auto& p : e.properties) {
        if (p.is_list) ++lists_per_row;
      }
      for (std::size_t f = 0; f < d.rows.size(); ++f) {
        const auto& poly = d.lists[f * lists_per_row + list_slot];
        list_index = f;
        if (poly.size() < 3) {
          throw AssetError(AssetErrorKind::invariant, element_start, "face " + std::to_string(list_index) + " has fewer than 3 vertices");
        }
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
          m.faces.push_back({static_cast<int>(poly[0]), static_cast<int>(poly[k]), static_cast<int>(poly[k + 1])});
        }
        for (double v : poly) {
          if (v < 0 || v >= static_cast<double>(std::numeric_limits<int>::max())) {
            throw AssetError(AssetErrorKind::bounds, element_start, "face index out of range");
          }
        }
      }
    }
  }
  if (r.remaining() != 0) {
    throw AssetError(AssetErrorKind::bounds, r.pos(), "trailing bytes after the last element");
  }
  for (const auto& f : m.faces) {
    for (int i : f) {
      if (i >= static_cast<int>(m.vertices.size())) {
        throw AssetError(AssetErrorKind::bounds, 0, "face index " + std::to_string(i) + " out of range");
      }
    }
  }
  for (auto& n : m.normals) {
    const double len = n.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw AssetError(AssetErrorKind::invariant, 0, "vertex normal has zero or non-finite length");
    }
    if (std::abs(len - 1.0) > 1e-6) n /= len;
  }
  for (const auto& v : m.vertices) {
    if (!v.allFinite()) throw AssetError(AssetErrorKind::invariant, 0, "non-finite vertex position");
  }
  return m;
}

Bytes format_mesh_ply(const Mesh& m) {
  m.validate();
  std::string header = "ply\nformat binary_little_endian 1.0\ncomment gsanim mesh\n";
  header += "element vertex " + std::to_string(m.vertices.size()) + "\n" + float_props({"x", "y", "z"});
  if (m.has_normals()) header += float_props({"nx", "ny", "nz"});
  if (m.has_uv()) header += float_props({"u", "v"});
  header += "element face " + std::to_string(m.faces.size()) + "\nproperty list uchar int vertex_indices\nend_header\n";
  Bytes out;
  put_text(out, header);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) put_f32(out, static_cast<float>(m.vertices[i][k]));
    if (m.has_normals()) {
      for (int k = 0; k < 3; ++k) put_f32(out, static_cast<float>(m.normals[i][k]));
    }
    if (m.has_uv()) {
      for (int k = 0; k < 2; ++k) put_f32(out, static_cast<float>(m.uv[i][k]));
    }
  }
  for (const auto& f : m.faces) {
    out.push_back(3);
    for (int k = 0; k < 3; ++k) put_le<std::int32_t>(out, f[k]);
  }
  return out;
}

GaussianSet parse_splat_ply(ByteView bytes) {
  const PlyHeader h = parse_header(bytes);
  const PlyElement* e = find_element(h, "vertex");
  if (e == nullptr) {
    throw AssetError(AssetErrorKind::syntax, 0, "splat ply has no vertex element");
  }
  std::array<int, 14> col{};
  for (std::size_t k = 0; k < kSplatProps.size(); ++k) {
    col[k] = e->find(kSplatProps[k]);
    if (col[k] < 0 || e->properties[static_cast<std::size_t>(col[k])].is_list) {
      throw AssetError(AssetErrorKind::syntax, 0, std::string("splat ply lacks scalar property '") + kSplatProps[k] + "'");
    }
  }
  Reader r(bytes, h.data_offset);
  GaussianSet g;
  for (const auto& el : h.elements) {
    const std::size_t start = r.pos();
    const ElementData d = read_element(r, el);
    if (&el != e) continue;
    g.reserve(d.rows.size());
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      const auto& row = d.rows[i];
      auto at = [&](int k) { return row[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])]; };
      g.push_back({at(0), at(1), at(2)}, at(3), {at(4), at(5), at(6)}, Eigen::Quaterniond(at(7), at(8), at(9), at(10)),
                  {at(11), at(12), at(13)});
    }
    (void)start;
  }
  if (r.remaining() != 0) {
    throw AssetError(AssetErrorKind::bounds, r.pos(), "trailing bytes after the last element");
  }
  try {
    g.validate();
  } catch (const InvariantError& err) {
    throw AssetError(AssetErrorKind::invariant, 0, err.what());
  }
  return g;
}

Bytes format_splat_ply(const GaussianSet& g) {
  g.validate();
  std::string header = "ply\nformat binary_little_endian 1.0\ncomment gsanim splat\n";
  header += "element vertex " + std::to_string(g.size()) + "\n";
  for (const char* p : kSplatProps) {
    header += std::string("property float ") + p + "\n";
  }
  header += "end_header\n";
  Bytes out;
  out.reserve(header.size() + g.size() * 14 * 4);
  put_text(out, header);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& q = g.rotation[i];
    const double v[14] = {g.centers[i].x(), g.centers[i].y(), g.centers[i].z(), g.raw_opacity[i],
                          g.raw_scale[i].x(), g.raw_scale[i].y(), g.raw_scale[i].z(), q.w(), q.x(), q.y(), q.z(),
                          g.color[i].x(), g.color[i].y(), g.color[i].z()};
    for (double x : v) put_f32(out, static_cast<float>(x));
  }
  return out;
}

GaussianSet load_splat_ply(const std::filesystem::path& path) {
  return parse_splat_ply(read_file(path));
}

void save_splat_ply(const std::filesystem::path& path, const GaussianSet& g) {
  write_file_atomic(path, format_splat_ply(g));
}

} // namespace gsanim::io
