#pragma once

// Field persistence: PFM (Pf/PF, f32) and binary PNM (P5/P6).

#include <filesystem>

#include "svt/grid.hpp"

namespace svt {

/// Reads a 1-channel ("Pf") or 3-channel ("PF") float map. Rows are stored
/// bottom-to-top in the file and returned top-to-bottom. A negative scale
/// marks a little-endian payload. Throws IoError / FormatError; NaN in the
/// payload is rejected.
ImageField read_pfm(const std::filesystem::path& path);
/// Like read_pfm but requires a single-channel file.
ScalarField read_pfm_scalar(const std::filesystem::path& path);

/// Writes little-endian PFM (scale line "-1.0"). Values are narrowed to f32.
void write_pfm(const ScalarField& field, const std::filesystem::path& path);
void write_pfm(const ImageField& image, const std::filesystem::path& path);

/// Reads binary P5/P6, scaling levels to [0,1].
ImageField read_pnm(const std::filesystem::path& path);
/// Reads a P5 file and thresholds it into a mask.
Mask read_mask(const std::filesystem::path& path);

/// Writes 8-bit P5 (1 channel) or P6 (3 channels). Values are clamped to
/// [0,1] and rounded half-to-even to integer levels.
void write_pnm(const ImageField& image, const std::filesystem::path& path);
void write_pnm(const ScalarField& field, const std::filesystem::path& path);

}  // namespace svt
