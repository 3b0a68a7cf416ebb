#pragma once

#include <filesystem>

#include "lowfield/volume.hpp"

namespace lowfield {

/// Reads a single-file NIfTI-1 volume (.nii or .nii.gz, little-endian).
///
/// Integer and floating-point scalar types are accepted and converted to
/// float; scl_slope/scl_inter are applied when set. The subject id comes from
/// the header's descrip field, or the file stem when that is empty.
/// Throws IoError when the file cannot be read and FormatError, naming the
/// header field, when the header is malformed.
Volume load_volume(const std::filesystem::path& path);

/// Writes float32 NIfTI-1 (spacing is stored as float32 in pixdim). A ".gz" extension selects gzip compression.
void save_volume(const Volume& v, const std::filesystem::path& path);

/// File name without .nii / .nii.gz.
std::string volume_stem(const std::filesystem::path& path);

bool is_volume_file(const std::filesystem::path& path);

}  // namespace lowfield
