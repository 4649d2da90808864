#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "capd/model.hpp"

namespace capd {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Binary container; layout in docs/model_format.md.
std::string serialize_model(const CapdModel& model);
CapdModel deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const CapdModel& model);
CapdModel load_model(const std::filesystem::path& path);

}  // namespace capd
