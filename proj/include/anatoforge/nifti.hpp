// NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//
// Supported subset: datatypes uint8 / int16 / int32 / float32, dim[0] == 3
// (or 4 with a singleton fourth extent), sform or qform affines, both byte
// orders on read, optional gzip wrapping. NIfTI-2 and .hdr/.img pairs are
// rejected. Written files are always little-endian with sform_code = 1,
// scl_slope = 1 and scl_inter = 0.
#pragma once

#include "anatoforge/types.hpp"

#include <filesystem>
#include <variant>

namespace anatoforge {

using LoadedVolume = std::variant<IntensityVolume, LabelVolume>;

// Datatype decides the alternative: int16/float32 load as IntensityVolume,
// uint8/int32 as LabelVolume (with an auto-derived label table).
LoadedVolume load_volume(const std::filesystem::path& path);

// Coercing loaders for pipeline code that knows what a file means.
// load_intensity converts label payloads to float (uint8 -> int16 tag,
// int32 -> float32 tag); load_labels requires non-negative integer values.
IntensityVolume load_intensity(const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);

void write_volume(const IntensityVolume& volume, const std::filesystem::path& path);
void write_volume(const LabelVolume& volume, const std::filesystem::path& path);

}  // namespace anatoforge
