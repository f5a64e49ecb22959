#pragma once

#include <filesystem>

#include "choreo/motion.hpp"

namespace choreo::motion {

// Motion clip file: text manifest (fps, frame count, skeleton) followed by the
// raw little-endian float64 N x P frame blob (same layout as to_matrix).
void save_clip(const MotionClip& clip, const std::filesystem::path& path);
MotionClip load_clip(const std::filesystem::path& path);

// Structured text keypoints export, one frame per record of (J+1) xyz triples.
void export_keypoints(const MotionClip& clip, const std::filesystem::path& path);

}  // namespace choreo::motion
