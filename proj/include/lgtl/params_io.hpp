#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgtl/lgtl.hpp"
#include "lgtl/training.hpp"

namespace lgtl {

// Parameter file: one line of JSON describing the shapes, then the flat parameter
// vector as raw little-endian float64.

inline nlohmann::json params_header(const LgtlParams& p) {
  nlohmann::json blocks = nlohmann::json::array();
  std::size_t k = 0;
  const auto ranges = block_ranges(p);
  LgtlParams::for_each_block(p, [&](const auto& m) {
    blocks.push_back({{"name", ranges[k++].name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  return {{"format", "lgtl-params"},
          {"version", 1},
          {"hop_count", p.hop_count},
          {"sample_sizes", p.sample_sizes},
          {"leaky_slope", p.gate.leaky_slope},
          {"count", p.size()},
          {"blocks", blocks}};
}

inline void write_params(const std::filesystem::path& path, const LgtlParams& p) {
  static_assert(std::endian::native == std::endian::little, "parameter files are little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << params_header(p).dump() << '\n';
  const auto flat = p.flatten();
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

inline LgtlParams read_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  if (h.value("format", "") != "lgtl-params") throw ParseError(path.string(), 1, "not an lgtl parameter file");
  const auto& b = h.at("blocks");
  if (b.size() != 8) throw ParseError(path.string(), 1, "expected 8 parameter blocks");
  auto dims = [&](std::size_t i) { return std::pair<Eigen::Index, Eigen::Index>(b[i].at("rows"), b[i].at("cols")); };
  LgtlParams p;
  p.hop_count = h.at("hop_count");
  p.sample_sizes = h.at("sample_sizes").get<std::vector<std::size_t>>();
  const double slope = h.value("leaky_slope", 0.2);
  p.gate = {Matrix::Zero(dims(0).first, dims(0).second), Vector::Zero(dims(1).first), slope};
  p.selection = {Matrix::Zero(dims(2).first, dims(2).second), Vector::Zero(dims(3).first), slope};
  p.proj = {Matrix::Zero(dims(4).first, dims(4).second), Matrix::Zero(dims(5).first, dims(5).second),
            Matrix::Zero(dims(6).first, dims(6).second)};
  p.classifier = Matrix::Zero(dims(7).first, dims(7).second);
  std::vector<double> flat(p.size());
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != flat.size() * sizeof(double))
    throw ShapeError(path.string() + ": parameter payload shorter than the header says");
  p.assign(flat);
  p.validate();
  return p;
}

}  // namespace lgtl
