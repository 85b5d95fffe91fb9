#ifndef DPAM_MODEL_IO_HPP
#define DPAM_MODEL_IO_HPP

#include <filesystem>
#include <string>

#include "dpam/backfit.hpp"

namespace dpam {

inline constexpr int kModelFormatVersion = 1;

/// JSON document; doubles are written in shortest round-trip form.
std::string serialize_model(const DpamModel& model);

/// Throws ParseError on malformed JSON and ConfigError on a document that
/// is not a model of a supported format version.
DpamModel deserialize_model(const std::string& text);

void save_model(const DpamModel& model, const std::filesystem::path& path);
DpamModel load_model(const std::filesystem::path& path);

}  // namespace dpam

#endif  // DPAM_MODEL_IO_HPP
