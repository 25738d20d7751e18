#include "dentofuse/volume.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dfuse {

namespace {

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& why) {
    throw std::runtime_error("volume io: " + p.string() + ": " + why);
}

}  // namespace

void validate_volume(const LabelVolume& v) {
    for (int i = 0; i < 3; ++i) {
        if (!(v.spacing[i] >= 0.05 && v.spacing[i] <= 2.0))
            throw std::invalid_argument("voxel spacing outside [0.05, 2.0] mm");
    }
    if (v.labels.size() != v.voxel_count())
        throw std::invalid_argument("label count does not match dims");
    for (auto l : v.labels) {
        if (l >= kLabelClassCount) throw std::invalid_argument("unknown label value");
    }
}

LabelVolume load_volume(const std::filesystem::path& header_path) {
    std::ifstream is(header_path);
    if (!is) fail(header_path, "cannot open");
    LabelVolume v;
    std::string line, data_file;
    bool have_dims = false, have_spacing = false;
    int version = -1;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key.empty() || key[0] == '#') continue;
        if (key == "lvol") {
            ls >> version;
            if (version != 1) fail(header_path, "unsupported version");
        } else if (key == "dims") {
            ls >> v.dims[0] >> v.dims[1] >> v.dims[2];
            if (!ls) fail(header_path, "malformed dims");
            have_dims = true;
        } else if (key == "spacing") {
            ls >> v.spacing[0] >> v.spacing[1] >> v.spacing[2];
            if (!ls) fail(header_path, "malformed spacing");
            have_spacing = true;
        } else if (key == "labels") {
            // informative label map, e.g. "0=background 1=tooth 2=bone"
        } else if (key == "byteorder") {
            std::string o;
            ls >> o;
            if (o != "little") fail(header_path, "unsupported byte order " + o);
        } else if (key == "data") {
            ls >> data_file;
        } else {
            fail(header_path, "unknown header record " + key);
        }
    }
    if (version != 1) fail(header_path, "missing lvol version record");
    if (!have_dims || !have_spacing || data_file.empty())
        fail(header_path, "incomplete header");

    std::filesystem::path payload = header_path.parent_path() / data_file;
    std::ifstream ps(payload, std::ios::binary);
    if (!ps) fail(payload, "cannot open payload");
    ps.seekg(0, std::ios::end);
    std::uint64_t bytes = std::uint64_t(ps.tellg());
    if (bytes != v.voxel_count())
        fail(payload, "payload size mismatch: expected " +
                          std::to_string(v.voxel_count()) + " bytes, found " +
                          std::to_string(bytes));
    ps.seekg(0);
    v.labels.resize(v.voxel_count());
    ps.read(reinterpret_cast<char*>(v.labels.data()),
            std::streamsize(v.labels.size()));
    if (!ps) fail(payload, "payload read failed");
    validate_volume(v);
    return v;
}

void save_volume(const std::filesystem::path& header_path, const LabelVolume& v) {
    validate_volume(v);
    std::filesystem::path payload = header_path;
    payload += ".raw";
    std::ofstream os(header_path);
    if (!os) fail(header_path, "cannot open for writing");
    os.precision(17);
    os << "lvol 1\n";
    os << "dims " << v.dims[0] << " " << v.dims[1] << " " << v.dims[2] << "\n";
    os << "spacing " << v.spacing[0] << " " << v.spacing[1] << " " << v.spacing[2]
       << "\n";
    os << "labels 0=background 1=tooth 2=bone\n";
    os << "byteorder little\n";
    os << "data " << payload.filename().string() << "\n";
    if (!os) fail(header_path, "header write failed");
    std::ofstream ps(payload, std::ios::binary);
    if (!ps) fail(payload, "cannot open payload for writing");
    ps.write(reinterpret_cast<const char*>(v.labels.data()),
             std::streamsize(v.labels.size()));
    if (!ps) fail(payload, "payload write failed");
}

LabelSlice extract_slice(const LabelVolume& v, std::size_t z) {
    if (z >= v.dims[2]) throw std::invalid_argument("slice index out of range");
    LabelSlice s;
    s.rows = v.dims[1];
    s.cols = v.dims[0];
    s.labels.resize(s.rows * s.cols);
    for (std::size_t y = 0; y < v.dims[1]; ++y)
        for (std::size_t x = 0; x < v.dims[0]; ++x)
            s.labels[y * s.cols + x] = v.at(x, y, z);
    return s;
}

LabelSlice crop_preprocess(const LabelSlice& s) {
    if (s.rows < 8 || s.cols < 8)
        throw std::invalid_argument("slice too small to crop (needs >= 8x8)");
    LabelSlice out;
    out.rows = std::size_t(std::ceil(3.0 * double(s.rows) / 4.0));
    out.cols = std::size_t(std::ceil(9.0 * double(s.cols) / 10.0));
    out.labels.resize(out.rows * out.cols);
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
            out.labels[r * out.cols + c] = s.at(r, c);
    return out;
}

LabelVolume crop_preprocess_volume(const LabelVolume& v) {
    if (v.dims[2] == 0) throw std::invalid_argument("empty volume");
    LabelVolume out;
    out.spacing = v.spacing;
    LabelSlice first = crop_preprocess(extract_slice(v, 0));
    out.dims = {first.cols, first.rows, v.dims[2]};
    out.labels.resize(out.voxel_count());
    for (std::size_t z = 0; z < v.dims[2]; ++z) {
        LabelSlice s = crop_preprocess(extract_slice(v, z));
        for (std::size_t y = 0; y < out.dims[1]; ++y)
            for (std::size_t x = 0; x < out.dims[0]; ++x)
                out.at(x, y, z) = s.at(y, x);
    }
    return out;
}

}  // namespace dfuse
