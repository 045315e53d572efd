#pragma once

// Plain-text checkpoint:
//
//   hsicwae-checkpoint 1
//   key=value            (config echo, one per line)
//   ...
//   end-header
//   matrix,<net>,<layer>,<weight|bias>,<rows>,<cols>,<activation>
//   <rows lines of comma-separated values, 17 significant digits>
//   ...
//
// Biases are stored as out x 1 columns.

#include "hsicwae/csv.hpp"
#include "hsicwae/wae.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace hsicwae {

inline constexpr const char* kCheckpointMagic = "hsicwae-checkpoint 1";

struct Checkpoint {
  std::map<std::string, std::string> header;
  WaeModel model;
};

namespace detail {

inline void write_block(std::ostream& out, const std::string& net, std::size_t layer, const char* kind,
                        const Matrix& m, Activation act) {
  out << "matrix," << net << ',' << layer << ',' << kind << ',' << m.rows() << ',' << m.cols() << ','
      << activation_name(act) << '\n';
  csv::write_matrix(out, {}, m);
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << '\n';
  for (const auto& [k, v] : ckpt.header) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint header entry '" + k + "' cannot be encoded");
    }
    out << k << '=' << v << '\n';
  }
  out << "end-header\n";
  for (const auto& [name, net] : {std::pair<std::string, const MlpParams*>{"encoder", &ckpt.model.encoder},
                                  {"decoder", &ckpt.model.decoder}}) {
    for (std::size_t i = 0; i < net->layers.size(); ++i) {
      const Layer& l = net->layers[i];
      detail::write_block(out, name, i, "weight", l.weight, l.activation);
      detail::write_block(out, name, i, "bias", l.bias, l.activation);
    }
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto out = csv::open_out(path);
  save_checkpoint(out, ckpt);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(std::istream& in, const std::string& source = "<stream>") {
  Checkpoint ckpt;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& why) {
    return IoError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    line_no = 1;
    throw fail("not a checkpoint file");
  }
  ++line_no;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "end-header") {
      header_done = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected key=value");
    ckpt.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!header_done) throw fail("missing end-header");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 7 || f[0] != "matrix") throw fail("expected a matrix block header");
    MlpParams* net = f[1] == "encoder" ? &ckpt.model.encoder : f[1] == "decoder" ? &ckpt.model.decoder : nullptr;
    if (net == nullptr) throw fail("unknown network '" + f[1] + "'");
    std::size_t layer = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    try {
      layer = std::stoul(f[2]);
      rows = std::stol(f[4]);
      cols = std::stol(f[5]);
    } catch (const std::logic_error&) {
      throw fail("bad matrix dimensions");
    }
    if (rows <= 0 || cols <= 0) throw fail("bad matrix dimensions");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw fail("truncated matrix block");
      ++line_no;
      const auto vals = csv::split_line(line);
      if (static_cast<Eigen::Index>(vals.size()) != cols) throw fail("wrong number of values in matrix row");
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!csv::parse_double(vals[static_cast<std::size_t>(c)], m(r, c))) throw fail("non-numeric value");
      }
    }
    if (layer > net->layers.size()) throw fail("layers out of order");
    if (layer == net->layers.size()) net->layers.emplace_back();
    Layer& l = net->layers[layer];
    try {
      l.activation = parse_activation(f[6]);
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
    if (f[3] == "weight") {
      l.weight = std::move(m);
    } else if (f[3] == "bias") {
      if (cols != 1) throw fail("bias block must have one column");
      l.bias = m.col(0);
    } else {
      throw fail("unknown block kind '" + f[3] + "'");
    }
  }
  if (ckpt.model.encoder.layers.empty() || ckpt.model.decoder.layers.empty()) {
    throw IoError(source + ": checkpoint is missing encoder or decoder blocks");
  }
  try {
    ckpt.model.encoder.validate();
    ckpt.model.decoder.validate();
  } catch (const Error& e) {
    throw IoError(source + ": " + e.what());
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = csv::open_in(path);
  return load_checkpoint(in, path.string());
}

}  // namespace hsicwae
