#include "ltree/geometry/mesh_io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ltree/core/binio.hpp"

namespace ltree::geo {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    for (char& c : ext) c = char(std::tolower(c));
    return ext;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double to_double(const std::string& s) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::runtime_error("mesh io: bad number '" + s + "'");
    }
}

}  // namespace

TriangleMesh parse_obj(const std::string& text) {
    TriangleMesh mesh;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "v") {
            if (toks.size() < 4) throw std::runtime_error("obj: short vertex line");
            mesh.vertices.push_back({to_double(toks[1]), to_double(toks[2]), to_double(toks[3])});
        } else if (toks[0] == "f") {
            if (toks.size() < 4) throw std::runtime_error("obj: face needs >= 3 vertices");
            std::vector<int> idx;
            for (size_t i = 1; i < toks.size(); ++i) {
                // "v", "v/vt", "v//vn", "v/vt/vn"; only the position is used.
                std::string head = toks[i].substr(0, toks[i].find('/'));
                long v = std::stol(head);
                if (v < 0) v = long(mesh.vertices.size()) + v + 1;  // relative index
                idx.push_back(int(v - 1));
            }
            for (size_t i = 1; i + 1 < idx.size(); ++i)
                mesh.faces.push_back({idx[0], idx[i], idx[i + 1]});
        }
        // Other statements (vn, vt, o, g, usemtl, ...) are ignored.
    }
    mesh.validate();
    return mesh;
}

std::string format_obj(const TriangleMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        out += buf;
    }
    for (const auto& f : mesh.faces) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    return out;
}

TriangleMesh parse_ply(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("ply", 0) != 0)
        throw std::runtime_error("ply: missing magic");

    long n_vertices = -1, n_faces = -1;
    std::string current_element;
    int vx = -1, vy = -1, vz = -1, prop_count = 0;
    bool ascii = false;
    while (std::getline(is, line)) {
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "format") {
            ascii = toks.size() > 1 && toks[1] == "ascii";
        } else if (toks[0] == "element" && toks.size() >= 3) {
            current_element = toks[1];
            if (toks[1] == "vertex") n_vertices = std::stol(toks[2]);
            else if (toks[1] == "face") n_faces = std::stol(toks[2]);
            prop_count = 0;
        } else if (toks[0] == "property" && current_element == "vertex" && toks.size() >= 3) {
            if (toks.back() == "x") vx = prop_count;
            if (toks.back() == "y") vy = prop_count;
            if (toks.back() == "z") vz = prop_count;
            ++prop_count;
        } else if (toks[0] == "end_header") {
            break;
        }
    }
    if (!ascii) throw std::runtime_error("ply: only ascii format supported");
    if (n_vertices < 0 || n_faces < 0 || vx < 0 || vy < 0 || vz < 0)
        throw std::runtime_error("ply: incomplete header");

    TriangleMesh mesh;
    mesh.vertices.reserve(size_t(n_vertices));
    for (long i = 0; i < n_vertices; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("ply: truncated vertices");
        auto toks = split_ws(line);
        if (int(toks.size()) <= std::max({vx, vy, vz}))
            throw std::runtime_error("ply: short vertex line");
        mesh.vertices.push_back({to_double(toks[size_t(vx)]), to_double(toks[size_t(vy)]),
                                 to_double(toks[size_t(vz)])});
    }
    for (long i = 0; i < n_faces; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("ply: truncated faces");
        auto toks = split_ws(line);
        if (toks.empty()) throw std::runtime_error("ply: empty face line");
        long k = std::stol(toks[0]);
        if (long(toks.size()) < k + 1) throw std::runtime_error("ply: short face line");
        std::vector<int> idx;
        for (long j = 1; j <= k; ++j) idx.push_back(int(std::stol(toks[size_t(j)])));
        for (size_t j = 1; j + 1 < idx.size(); ++j)
            mesh.faces.push_back({idx[0], idx[j], idx[j + 1]});
    }
    mesh.validate();
    return mesh;
}

std::string format_ply(const TriangleMesh& mesh) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "ply\nformat ascii 1.0\nelement vertex %zu\n"
                  "property float x\nproperty float y\nproperty float z\n"
                  "element face %zu\nproperty list uchar int vertex_indices\nend_header\n",
                  mesh.vertices.size(), mesh.faces.size());
    out += buf;
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
        out += buf;
    }
    for (const auto& f : mesh.faces) {
        std::snprintf(buf, sizeof buf, "3 %d %d %d\n", f[0], f[1], f[2]);
        out += buf;
    }
    return out;
}

TriangleMesh load_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    const std::string text = io::read_file(path);
    if (ext == "obj") return parse_obj(text);
    if (ext == "ply") return parse_ply(text);
    throw std::runtime_error("unsupported mesh format (expect .obj or .ply): " + path);
}

void save_mesh(const std::string& path, const TriangleMesh& mesh) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") io::write_file_atomic(path, format_obj(mesh));
    else if (ext == "ply") io::write_file_atomic(path, format_ply(mesh));
    else throw std::runtime_error("unsupported mesh format (expect .obj or .ply): " + path);
}

}  // namespace ltree::geo
