#include "gsanim/error.hpp"
#include "gsanim/io.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

namespace gsanim::io {

namespace {

std::string_view next_token(std::string_view& line) {
  std::size_t b = 0;
  while (b < line.size() && (line[b] == ' ' || line[b] == '\t')) ++b;
  std::size_t e = b;
  while (e < line.size() && line[e] != ' ' && line[e] != '\t') ++e;
  const std::string_view tok = line.substr(b, e - b);
  line.remove_prefix(e);
  return tok;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw AssetError(AssetErrorKind::syntax, line_no, "invalid number '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) {
    throw AssetError(AssetErrorKind::invariant, line_no, "non-finite number");
  }
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index; 0 means absent.
int resolve_index(std::string_view tok, std::size_t count, std::size_t line_no) {
  if (tok.empty()) return -1;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw AssetError(AssetErrorKind::syntax, line_no, "invalid face index '" + std::string(tok) + "'");
  }
  const long long n = static_cast<long long>(count);
  const long long idx = v > 0 ? v - 1 : n + v;
  if (idx < 0 || idx >= n) {
    throw AssetError(AssetErrorKind::bounds, line_no, "face index " + std::string(tok) + " out of range");
  }
  return static_cast<int>(idx);
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

} // namespace

Mesh parse_obj(std::string_view text) {
  std::vector<Eigen::Vector3d> positions, normals;
  std::vector<Eigen::Vector2d> uvs;
  struct Corner {
    int v, vt, vn;
  };
  std::vector<std::pair<std::array<Corner, 3>, std::size_t>> triangles;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string_view key = next_token(line);
    if (key.empty()) continue;
    if (key == "v" || key == "vn" || key == "vt") {
      double c[3] = {0, 0, 0};
      const int need = key == "vt" ? 2 : 3;
      for (int k = 0; k < need; ++k) {
        const auto tok = next_token(line);
        if (tok.empty()) throw AssetError(AssetErrorKind::syntax, line_no, "too few coordinates");
        c[k] = parse_double(tok, line_no);
      }
      // optional w / third texture coordinate, or vertex colors after xyz
      while (!next_token(line).empty()) {
      }
      if (key == "v") {
        positions.emplace_back(c[0], c[1], c[2]);
      } else if (key == "vn") {
        normals.emplace_back(c[0], c[1], c[2]);
      } else {
        uvs.emplace_back(c[0], c[1]);
      }
    } else if (key == "f") {
      std::vector<Corner> poly;
      for (auto tok = next_token(line); !tok.empty(); tok = next_token(line)) {
        std::string_view parts[3];
        int n = 0;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= tok.size(); ++i) {
          if (i == tok.size() || tok[i] == '/') {
            if (n == 3) throw AssetError(AssetErrorKind::syntax, line_no, "malformed face corner");
            parts[n++] = tok.substr(start, i - start);
            start = i + 1;
          }
        }
        Corner c{resolve_index(parts[0], positions.size(), line_no), resolve_index(parts[1], uvs.size(), line_no),
                 resolve_index(parts[2], normals.size(), line_no)};
        if (c.v < 0) throw AssetError(AssetErrorKind::syntax, line_no, "face corner without a vertex index");
        poly.push_back(c);
      }
      if (poly.size() < 3) throw AssetError(AssetErrorKind::syntax, line_no, "face with fewer than 3 corners");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        triangles.push_back({{poly[0], poly[k], poly[k + 1]}, line_no});
      }
    } else if (key == "o" || key == "g" || key == "s" || key == "usemtl" || key == "mtllib" || key == "l") {
      continue;
    } else {
      throw AssetError(AssetErrorKind::syntax, line_no, "unsupported record '" + std::string(key) + "'");
    }
  }

  bool any_vt = false, any_vn = false;
  for (const auto& [tri, ln] : triangles) {
    for (const auto& c : tri) {
      any_vt |= c.vt >= 0;
      any_vn |= c.vn >= 0;
    }
  }
  for (const auto& [tri, ln] : triangles) {
    for (const auto& c : tri) {
      if ((any_vt && c.vt < 0) || (any_vn && c.vn < 0)) {
        throw AssetError(AssetErrorKind::syntax, ln, "faces mix corners with and without vt/vn");
      }
    }
  }

  Mesh m;
  m.vertices = positions;
  if (any_vt) m.uv.assign(positions.size(), Eigen::Vector2d::Zero());
  if (any_vn) m.normals.assign(positions.size(), Eigen::Vector3d::UnitZ());
  // (vt, vn) assigned to each original vertex; conflicting corners get a split copy
  std::vector<std::pair<int, int>> assigned(positions.size(), {-2, -2});
  std::map<std::tuple<int, int, int>, int> splits;
  for (const auto& [tri, ln] : triangles) {
    std::array<int, 3> face{};
    for (int k = 0; k < 3; ++k) {
      const Corner& c = tri[static_cast<std::size_t>(k)];
      auto& a = assigned[static_cast<std::size_t>(c.v)];
      int out = c.v;
      if (a.first == -2) {
        a = {c.vt, c.vn};
      } else if (a != std::make_pair(c.vt, c.vn)) {
        const auto key = std::make_tuple(c.v, c.vt, c.vn);
        auto it = splits.find(key);
        if (it == splits.end()) {
          it = splits.emplace(key, static_cast<int>(m.vertices.size())).first;
          m.vertices.push_back(positions[static_cast<std::size_t>(c.v)]);
          if (any_vt) m.uv.emplace_back();
          if (any_vn) m.normals.emplace_back();
        }
        out = it->second;
      }
      const auto o = static_cast<std::size_t>(out);
      if (any_vt) m.uv[o] = uvs[static_cast<std::size_t>(c.vt)];
      if (any_vn) {
        const Eigen::Vector3d n = normals[static_cast<std::size_t>(c.vn)];
        const double len = n.norm();
        if (!(len > 0.0)) throw AssetError(AssetErrorKind::invariant, ln, "zero-length vertex normal");
        // unit normals are kept verbatim so that save/load/save is stable
        m.normals[o] = std::abs(len - 1.0) <= 1e-6 ? n : Eigen::Vector3d(n / len);
      }
      face[static_cast<std::size_t>(k)] = out;
    }
    m.faces.push_back(face);
  }
  try {
    m.validate();
  } catch (const InvariantError& e) {
    throw AssetError(AssetErrorKind::invariant, line_no, e.what());
  }
  return m;
}

std::string format_obj(const Mesh& m) {
  m.validate();
  std::string out = "# gsanim mesh\n";
  auto record = [&](const char* key, std::initializer_list<double> vals) {
    out += key;
    for (double v : vals) {
      out += ' ';
      append_number(out, v);
    }
    out += '\n';
  };
  for (const auto& v : m.vertices) record("v", {v.x(), v.y(), v.z()});
  if (m.has_uv()) {
    for (const auto& t : m.uv) record("vt", {t.x(), t.y()});
  }
  if (m.has_normals()) {
    for (const auto& n : m.normals) record("vn", {n.x(), n.y(), n.z()});
  }
  for (const auto& f : m.faces) {
    out += 'f';
    for (int i : f) {
      const std::string idx = std::to_string(i + 1);
      out += ' ';
      out += idx;
      if (m.has_uv() || m.has_normals()) {
        out += '/';
        if (m.has_uv()) out += idx;
        if (m.has_normals()) out += '/' + idx;
      }
    }
    out += '\n';
  }
  return out;
}

Mesh load_obj(const std::filesystem::path& path) {
  return parse_obj(read_text(path));
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  write_text_atomic(path, format_obj(mesh));
}

} // namespace gsanim::io
