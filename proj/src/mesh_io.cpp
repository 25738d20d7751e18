#include "dentofuse/mesh_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dfuse {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'U', 'S', 'E', 'M', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& why) {
    throw std::runtime_error("mesh io: " + p.string() + ": " + why);
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void save_binary(const std::filesystem::path& path, const TriMesh& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(path, "cannot open for writing");
    os.write(kMagic, 8);
    write_pod(os, kVersion);
    write_pod(os, std::uint8_t(m.units));
    std::uint8_t flags = 0;
    if (m.has_normals()) flags |= 1;
    if (m.has_labels()) flags |= 2;
    if (m.has_provenance()) flags |= 4;
    write_pod(os, flags);
    write_pod(os, std::uint16_t(0));
    write_pod(os, std::uint64_t(m.vertices.size()));
    write_pod(os, std::uint64_t(m.faces.size()));
    for (const auto& v : m.vertices)
        for (int i = 0; i < 3; ++i) write_pod(os, v[i]);
    if (flags & 1)
        for (const auto& n : m.vertex_normals)
            for (int i = 0; i < 3; ++i) write_pod(os, n[i]);
    if (flags & 2)
        for (auto l : m.labels) write_pod(os, l);
    if (flags & 4)
        for (auto p : m.provenance) write_pod(os, p);
    for (const auto& f : m.faces)
        for (int i = 0; i < 3; ++i) write_pod(os, f[i]);
    if (!os) fail(path, "write failed");
}

TriMesh load_binary(std::ifstream& is, const std::filesystem::path& path) {
    char magic[8];
    is.read(magic, 8);
    std::uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion) fail(path, "unsupported version");
    std::uint8_t units = 0, flags = 0;
    std::uint16_t reserved = 0;
    read_pod(is, units);
    read_pod(is, flags);
    read_pod(is, reserved);
    std::uint64_t nv = 0, nf = 0;
    read_pod(is, nv);
    read_pod(is, nf);
    if (!is) fail(path, "truncated header");
    TriMesh m;
    m.units = Units(units);
    m.vertices.resize(nv);
    for (auto& v : m.vertices)
        for (int i = 0; i < 3; ++i) read_pod(is, v[i]);
    if (flags & 1) {
        m.vertex_normals.resize(nv);
        for (auto& n : m.vertex_normals)
            for (int i = 0; i < 3; ++i) read_pod(is, n[i]);
    }
    if (flags & 2) {
        m.labels.resize(nv);
        for (auto& l : m.labels) read_pod(is, l);
    }
    if (flags & 4) {
        m.provenance.resize(nv);
        for (auto& p : m.provenance) read_pod(is, p);
    }
    m.faces.resize(nf);
    for (auto& f : m.faces)
        for (int i = 0; i < 3; ++i) read_pod(is, f[i]);
    if (!is) fail(path, "truncated payload");
    std::string err = validate_mesh(m);
    if (!err.empty()) fail(path, err);
    return m;
}

void save_text(const std::filesystem::path& path, const TriMesh& m) {
    std::ofstream os(path);
    if (!os) fail(path, "cannot open for writing");
    os.precision(17);
    os << "tmesh 1\n";
    os << "units " << (m.units == Units::mm ? "mm" : "voxel") << "\n";
    os << "counts " << m.vertices.size() << " " << m.faces.size() << "\n";
    os << "props";
    if (m.has_normals()) os << " normals";
    if (m.has_labels()) os << " labels";
    if (m.has_provenance()) os << " provenance";
    os << "\n";
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const Vec3& v = m.vertices[i];
        os << "v " << v[0] << " " << v[1] << " " << v[2];
        if (m.has_normals()) {
            const Vec3& n = m.vertex_normals[i];
            os << " " << n[0] << " " << n[1] << " " << n[2];
        }
        if (m.has_labels()) os << " " << m.labels[i];
        if (m.has_provenance()) os << " " << int(m.provenance[i]);
        os << "\n";
    }
    for (const auto& f : m.faces)
        os << "f " << f[0] << " " << f[1] << " " << f[2] << "\n";
    if (!os) fail(path, "write failed");
}

TriMesh load_text(std::ifstream& is, const std::filesystem::path& path) {
    std::string tag;
    int version = 0;
    is >> tag >> version;
    if (tag != "tmesh" || version != 1) fail(path, "not a tmesh file");
    TriMesh m;
    std::size_t nv = 0, nf = 0;
    bool want_normals = false, want_labels = false, want_prov = false;
    std::string line;
    std::getline(is, line);  // rest of version line
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "units") {
            std::string u;
            ls >> u;
            if (u == "mm")
                m.units = Units::mm;
            else if (u == "voxel")
                m.units = Units::voxel;
            else
                fail(path, "unknown units " + u);
        } else if (key == "counts") {
            ls >> nv >> nf;
        } else if (key == "props") {
            std::string p;
            while (ls >> p) {
                if (p == "normals") want_normals = true;
                else if (p == "labels") want_labels = true;
                else if (p == "provenance") want_prov = true;
                else fail(path, "unknown property " + p);
            }
        } else if (key == "v") {
            Vec3 v;
            ls >> v[0] >> v[1] >> v[2];
            if (want_normals) {
                Vec3 n;
                ls >> n[0] >> n[1] >> n[2];
                m.vertex_normals.push_back(n);
            }
            if (want_labels) {
                std::int32_t l;
                ls >> l;
                m.labels.push_back(l);
            }
            if (want_prov) {
                int p;
                ls >> p;
                m.provenance.push_back(std::uint8_t(p));
            }
            if (!ls) fail(path, "malformed vertex line");
            m.vertices.push_back(v);
        } else if (key == "f") {
            std::array<std::uint32_t, 3> f{};
            ls >> f[0] >> f[1] >> f[2];
            if (!ls) fail(path, "malformed face line");
            m.faces.push_back(f);
        } else if (key.empty() || key[0] == '#') {
            continue;
        } else {
            fail(path, "unknown record " + key);
        }
    }
    if (m.vertices.size() != nv || m.faces.size() != nf)
        fail(path, "counts do not match records");
    std::string err = validate_mesh(m);
    if (!err.empty()) fail(path, err);
    return m;
}

}  // namespace

MeshFormat mesh_format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".tmesh" ? MeshFormat::text : MeshFormat::binary;
}

TriMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(path, "cannot open");
    char head[8] = {};
    is.read(head, 8);
    if (is.gcount() == 8 && std::memcmp(head, kMagic, 8) == 0) {
        is.seekg(0);
        return load_binary(is, path);
    }
    is.close();
    std::ifstream ts(path);
    return load_text(ts, path);
}

void save_mesh(const std::filesystem::path& path, const TriMesh& m, MeshFormat fmt) {
    if (fmt == MeshFormat::text)
        save_text(path, m);
    else
        save_binary(path, m);
}

void save_mesh(const std::filesystem::path& path, const TriMesh& m) {
    save_mesh(path, m, mesh_format_for_path(path));
}

void save_transform(const std::filesystem::path& path, const Mat4& m) {
    std::ofstream os(path);
    if (!os) fail(path, "cannot open for writing");
    os.precision(17);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) os << m(r, c) << (c == 3 ? "" : " ");
        os << "\n";
    }
}

Mat4 load_transform(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(path, "cannot open");
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (!(is >> m(r, c))) fail(path, "malformed transform");
    return m;
}

}  // namespace dfuse
