#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapc/benchmarks.hpp"
#include "dapc/network.hpp"

namespace dapc {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kModelSchemaVersion = 1;

/// Comma-separated text with header w1..wn, r1..rm. Lines starting with '#'
/// are comments.
Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& data, const std::vector<std::string>& comments = {});

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string config_digest(const std::string& text);

/// "# dapc <version>" and "# config <digest> <text>" lines.
std::vector<std::string> provenance_comments(const std::string& config_text);

struct ModelProvenance {
  std::uint64_t seed = 0;
  std::string config_digest;
  double final_loss = 0.0;
};

void save_model(const NetworkState& state, const std::string& path, const ModelProvenance& provenance = {});
NetworkState load_model(const std::string& path, ModelProvenance* provenance = nullptr);

std::string model_to_json(const NetworkState& state, const ModelProvenance& provenance = {});
NetworkState model_from_json(const std::string& text, ModelProvenance* provenance = nullptr);

/// Architecture file: {"basis_mode": ..., "layers": [{"nodes", "degree", "activation"}, ...]}.
struct ArchitectureFile {
  BasisMode basis_mode = BasisMode::adaptive;
  std::vector<LayerSpec> layers;
};

ArchitectureFile load_architecture(const std::string& path);
ArchitectureFile architecture_from_json(const std::string& text);
std::string architecture_to_json(const ArchitectureFile& arch);

/// Writes `rows` (already formatted cells) under `header`, preceded by comment lines.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, const std::vector<std::string>& comments = {});

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_double(double v);

}  // namespace dapc
