#include "dapc/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dapc/error.hpp"

namespace dapc {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Parses names like "w12"; returns 0 on mismatch.
int column_number(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return 0;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
  if (ec != std::errc() || ptr != name.data() + name.size()) return 0;
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for '" + path + "'");
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::parse_error, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Dataset load_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> header;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split(t);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::empty_dataset, "'" + path + "' has no header");

  int n_in = 0;
  int n_out = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (n_out == 0 && column_number(header[c], 'w') == n_in + 1) {
      ++n_in;
    } else if (column_number(header[c], 'r') == n_out + 1) {
      ++n_out;
    } else {
      throw Error(ErrorCode::parse_error, "header column " + std::to_string(c + 1) + " ('" + header[c] +
                                              "') breaks the w1..wn, r1..rm layout");
    }
  }
  if (n_in == 0 || n_out == 0) throw Error(ErrorCode::parse_error, "header needs w1.. and r1.. columns");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    ++rows;
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::parse_error, "row " + std::to_string(rows) + " (line " + std::to_string(line_no) +
                                              ") has " + std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto& s = cells[c];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::parse_error, "row " + std::to_string(rows) + ", column " + std::to_string(c + 1) +
                                                " ('" + header[c] + "'): bad number '" + s + "'");
      }
      values.push_back(v);
    }
  }
  if (rows == 0) throw Error(ErrorCode::empty_dataset, "'" + path + "' has no data rows");

  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows), n_in);
  d.responses.resize(static_cast<Eigen::Index>(rows), n_out);
  const std::size_t width = header.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < n_in; ++c) d.inputs(static_cast<Eigen::Index>(r), c) = values[r * width + c];
    for (int c = 0; c < n_out; ++c) d.responses(static_cast<Eigen::Index>(r), c) = values[r * width + n_in + c];
  }
  return d;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << c << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  write_file(path, out.str());
}

void save_dataset(const std::string& path, const Dataset& data, const std::vector<std::string>& comments) {
  validate_dataset(data);
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) header.push_back("w" + std::to_string(c + 1));
  for (Eigen::Index c = 0; c < data.responses.cols(); ++c) header.push_back("r" + std::to_string(c + 1));
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index r = 0; r < data.inputs.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) row.push_back(format_double(data.inputs(r, c)));
    for (Eigen::Index c = 0; c < data.responses.cols(); ++c) row.push_back(format_double(data.responses(r, c)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows, comments);
}

std::string config_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> provenance_comments(const std::string& config_text) {
  return {std::string("# dapc ") + kToolVersion, "# config " + config_digest(config_text) + " " + config_text};
}

std::string model_to_json(const NetworkState& state, const ModelProvenance& provenance) {
  if (!state.has_bases()) throw Error(ErrorCode::bases_not_refreshed, "only refreshed models can be saved");
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["n_inputs"] = state.n_inputs;
  doc["basis_mode"] = std::string(basis_mode_name(state.basis_mode));
  json layers = json::array();
  for (const auto& l : state.layers) {
    json jl;
    jl["nodes"] = l.spec.n_nodes;
    jl["degree"] = l.spec.degree;
    jl["activation"] = std::string(activation_name(l.spec.activation));
    json bases = json::array();
    for (const auto& b : l.bases) bases.push_back({{"degree", b.degree}, {"coeffs", b.coeffs}, {"norms", b.norms}});
    jl["bases"] = std::move(bases);
    json stats = json::array();
    for (const auto& s : l.norm_stats) stats.push_back({s.mean, s.std});
    jl["norm_stats"] = std::move(stats);
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  doc["weights"] = state.flat_weights();
  doc["provenance"] = {{"seed", provenance.seed},
                       {"config_digest", provenance.config_digest},
                       {"final_loss", provenance.final_loss},
                       {"tool_version", kToolVersion}};
  return doc.dump(1);
}

namespace {

NetworkState model_from_doc(const json& doc, ModelProvenance* provenance) {
  const int version = field<int>(doc, "schema_version");
  if (version != kModelSchemaVersion) {
    throw Error(ErrorCode::unsupported_schema, "schema_version " + std::to_string(version) + " (supported: " +
                                                   std::to_string(kModelSchemaVersion) + ")");
  }
  const int n_inputs = field<int>(doc, "n_inputs");
  const BasisMode mode = parse_basis_mode(field<std::string>(doc, "basis_mode"));
  const json& jlayers = doc.at("layers");
  std::vector<LayerSpec> specs;
  for (const auto& jl : jlayers) {
    specs.push_back({field<int>(jl, "nodes"), field<int>(jl, "degree"),
                     parse_activation(field<std::string>(jl, "activation"))});
  }
  NetworkState state = build_network(n_inputs, specs, 0, mode);

  const auto weights = field<std::vector<double>>(doc, "weights");
  if (weights.size() != state.weight_count()) {
    throw Error(ErrorCode::weight_count_mismatch, "document has " + std::to_string(weights.size()) +
                                                      " weights, architecture needs " +
                                                      std::to_string(state.weight_count()));
  }
  state.set_flat_weights(weights);

  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    Layer& layer = state.layers[l];
    const json& jl = jlayers[l];
    const json& jb = jl.at("bases");
    if (jb.size() != static_cast<std::size_t>(layer.n_in)) {
      throw Error(ErrorCode::parse_error, "layer " + std::to_string(l + 1) + " needs " +
                                              std::to_string(layer.n_in) + " bases");
    }
    layer.bases.clear();
    for (const auto& b : jb) {
      OrthonormalBasis1D basis;
      basis.degree = field<int>(b, "degree");
      basis.coeffs = field<std::vector<std::vector<double>>>(b, "coeffs");
      basis.norms = field<std::vector<double>>(b, "norms");
      if (basis.degree < 0 || basis.degree > layer.spec.degree ||
          basis.coeffs.size() != static_cast<std::size_t>(basis.degree) + 1) {
        throw Error(ErrorCode::parse_error, "layer " + std::to_string(l + 1) + ": inconsistent basis degree");
      }
      for (std::size_t k = 0; k < basis.coeffs.size(); ++k) {
        if (basis.coeffs[k].size() != k + 1) {
          throw Error(ErrorCode::parse_error, "layer " + std::to_string(l + 1) + ": basis row " +
                                                  std::to_string(k) + " needs " + std::to_string(k + 1) +
                                                  " coefficients");
        }
      }
      layer.bases.push_back(std::move(basis));
    }
    layer.norm_stats.clear();
    for (const auto& s : jl.at("norm_stats")) {
      const auto pair = s.get<std::vector<double>>();
      if (pair.size() != 2 || !(pair[1] > 0.0)) {
        throw Error(ErrorCode::parse_error, "layer " + std::to_string(l + 1) + ": norm_stats need (mean, std > 0)");
      }
      layer.norm_stats.push_back({pair[0], pair[1]});
    }
  }

  if (provenance && doc.contains("provenance")) {
    const json& p = doc["provenance"];
    provenance->seed = p.value("seed", std::uint64_t{0});
    provenance->config_digest = p.value("config_digest", std::string{});
    provenance->final_loss = p.value("final_loss", 0.0);
  }
  return state;
}

}  // namespace

NetworkState model_from_json(const std::string& text, ModelProvenance* provenance) {
  const json doc = parse_json(text);
  try {
    return model_from_doc(doc, provenance);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

void save_model(const NetworkState& state, const std::string& path, const ModelProvenance& provenance) {
  write_file(path, model_to_json(state, provenance));
}

NetworkState load_model(const std::string& path, ModelProvenance* provenance) {
  return model_from_json(read_file(path), provenance);
}

ArchitectureFile architecture_from_json(const std::string& text) {
  const json doc = parse_json(text);
  ArchitectureFile arch;
  if (doc.contains("basis_mode")) arch.basis_mode = parse_basis_mode(field<std::string>(doc, "basis_mode"));
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw Error(ErrorCode::parse_error, "architecture needs a non-empty 'layers' array");
  }
  for (const auto& jl : doc["layers"]) {
    LayerSpec s;
    s.n_nodes = field<int>(jl, "nodes");
    s.degree = field<int>(jl, "degree");
    s.activation = jl.contains("activation") ? parse_activation(field<std::string>(jl, "activation"))
                                             : Activation::identity;
    arch.layers.push_back(s);
  }
  return arch;
}

ArchitectureFile load_architecture(const std::string& path) { return architecture_from_json(read_file(path)); }

std::string architecture_to_json(const ArchitectureFile& arch) {
  json doc;
  doc["basis_mode"] = std::string(basis_mode_name(arch.basis_mode));
  json layers = json::array();
  for (const auto& l : arch.layers) {
    layers.push_back({{"nodes", l.n_nodes}, {"degree", l.degree}, {"activation", std::string(activation_name(l.activation))}});
  }
  doc["layers"] = std::move(layers);
  doc["loss"] = "MSE+MSW";
  return doc.dump(1);
}

}  // namespace dapc
