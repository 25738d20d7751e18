#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dentofuse/geometry.hpp"

namespace dfuse {

constexpr std::uint8_t kLabelBackground = 0;
constexpr std::uint8_t kLabelTooth = 1;
constexpr std::uint8_t kLabelBone = 2;
constexpr std::uint8_t kLabelClassCount = 3;

/// 3-d grid of class labels with physical voxel spacing. Voxel (x,y,z) sits
/// at position ((x+0.5)*sx, (y+0.5)*sy, (z+0.5)*sz) mm; labels are stored
/// x-fastest.
struct LabelVolume {
    std::array<std::size_t, 3> dims{0, 0, 0};  // nx, ny, nz
    Vec3 spacing{1.0, 1.0, 1.0};               // mm per voxel, each in [0.05, 2.0]
    std::vector<std::uint8_t> labels;

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t z) const {
        return labels[index(x, y, z)];
    }
    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t z) {
        return labels[index(x, y, z)];
    }
    Vec3 voxel_center_mm(std::size_t x, std::size_t y, std::size_t z) const {
        return Vec3((double(x) + 0.5) * spacing[0], (double(y) + 0.5) * spacing[1],
                    (double(z) + 0.5) * spacing[2]);
    }
};

/// Throws std::invalid_argument describing the first violated invariant;
/// returns normally for a well-formed volume.
void validate_volume(const LabelVolume& v);

/// Sidecar text header + raw payload. `path` names the header file; the
/// payload lives in the file the header's `data` record points at
/// (relative to the header's directory).
LabelVolume load_volume(const std::filesystem::path& header_path);
void save_volume(const std::filesystem::path& header_path, const LabelVolume& v);

/// One axial slice as rows x cols (row r = y index, col c = x index).
struct LabelSlice {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> labels;  // row-major

    std::uint8_t at(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
};

LabelSlice extract_slice(const LabelVolume& v, std::size_t z);

/// Keeps the upper ceil(3/4*rows) rows and left ceil(9/10*cols) columns,
/// dropping the lower quarter and right tenth.
LabelSlice crop_preprocess(const LabelSlice& s);

/// Applies crop_preprocess to every axial slice.
LabelVolume crop_preprocess_volume(const LabelVolume& v);

}  // namespace dfuse
