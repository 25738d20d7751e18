#pragma once

#include <filesystem>
#include <string>

#include "dentofuse/mesh.hpp"

namespace dfuse {

enum class MeshFormat { text, binary };

/// Picks text for ".tmesh", binary otherwise.
MeshFormat mesh_format_for_path(const std::filesystem::path& path);

/// Binary files start with the magic "DFUSEMSH"; everything else is parsed
/// as the text format. Throws std::runtime_error on malformed input.
TriMesh load_mesh(const std::filesystem::path& path);

void save_mesh(const std::filesystem::path& path, const TriMesh& m);
void save_mesh(const std::filesystem::path& path, const TriMesh& m, MeshFormat fmt);

/// 4x4 row-major transform matrix as whitespace-separated text.
void save_transform(const std::filesystem::path& path, const Mat4& m);
Mat4 load_transform(const std::filesystem::path& path);

}  // namespace dfuse
