#pragma once

// Binary model files: the magic "REPCAP\x01", a versioned header describing
// the role and every network's layer layout, then little-endian float64
// parameter blobs in layer order. Student files carry an extra (mu_g, l_g)
// blob; linear files carry the PCA basis, mean and variances.

#include "repcap/mlp.hpp"
#include "repcap/projection.hpp"
#include "repcap/student.hpp"

#include <filesystem>
#include <string_view>

namespace repcap {

enum class CheckpointRole : std::uint8_t { Projector = 1, Student = 2, Linear = 3 };

std::string_view to_string(CheckpointRole r) noexcept;

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_projector(const std::filesystem::path& path, const MlpNetwork& net);
MlpNetwork load_projector(const std::filesystem::path& path);

/// Stores the network and (mu_g, l_g); validation history is not kept.
void save_student(const std::filesystem::path& path, const StudentModel& model);
StudentModel load_student(const std::filesystem::path& path);

void save_linear(const std::filesystem::path& path, const LinearProjector& pca);
LinearProjector load_linear(const std::filesystem::path& path);

/// Reads only the magic and header role. Throws Io / Format.
CheckpointRole checkpoint_role(const std::filesystem::path& path);

}  // namespace repcap
