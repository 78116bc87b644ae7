#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphpde/datagen.hpp"
#include "graphpde/errors.hpp"
#include "graphpde/mpnn.hpp"
#include "graphpde/train_eval.hpp"

// File formats and report emitters.
//
// GPDS (dataset): magic "GPDS", version u32, equation descriptor (kind u8,
//   D f64, v 2xf64, bc u8, domain bounds 4xf64), sim count u32; per
//   simulation: N u32, M+1 u32, d u8, coords Nx2 f64, times f64, states
//   (M+1)xNxd f64 (time-major); trailing metadata block. All little-endian.
// GPNN (model): magic "GPNN", version u32, architecture descriptor (state dim
//   u32, hidden width u32, message width u32, K u32, use_edge_features u8),
//   param count u64, flat parameter vector f64 (per-layer input-major weights
//   then biases, phi before gamma), trailing metadata block.
// Metadata block: u32 line count, then length-prefixed (u32) UTF-8 key=value
//   lines carrying provenance (command line, seeds, format versions).

namespace graphpde::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;

using Metadata = std::vector<std::pair<std::string, std::string>>;

// ---------------------------------------------------------------------------
// Byte-buffer primitives
// ---------------------------------------------------------------------------

namespace detail {

struct Writer {
  std::string buf;
  void raw(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64s(const double* p, size_t n) { raw(p, 8 * n); }
};

struct Reader {
  const char* p;
  const char* end;
  explicit Reader(const std::string& s) : p(s.data()), end(s.data() + s.size()) {}
  void raw(void* out, size_t n) {
    require(p + n <= end, ErrorCode::FormatError, "truncated file");
    std::memcpy(out, p, n);
    p += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  void f64s(double* out, size_t n) { raw(out, 8 * n); }
  bool at_end() const { return p == end; }
};

inline void write_metadata(Writer& w, const Metadata& meta) {
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    const std::string line = k + "=" + v;
    w.u32(static_cast<std::uint32_t>(line.size()));
    w.raw(line.data(), line.size());
  }
}

inline Metadata read_metadata(Reader& r) {
  Metadata meta;
  const std::uint32_t n = r.u32();
  meta.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32();
    std::string line(len, '\0');
    r.raw(line.data(), len);
    const size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::FormatError, "metadata line without '='");
    meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return meta;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Whole-file helpers (atomic writes: temp file in the same directory, rename)
// ---------------------------------------------------------------------------

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::IoFailure, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(out.good(), ErrorCode::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  require(!ec, ErrorCode::IoFailure, "rename failed: " + ec.message());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  require(in.good() || in.eof(), ErrorCode::IoFailure, "read failed: " + path);
  return ss.str();
}

// ---------------------------------------------------------------------------
// GPDS dataset files
// ---------------------------------------------------------------------------

inline std::string encode_dataset(const datagen::Dataset& ds) {
  detail::Writer w;
  w.raw("GPDS", 4);
  w.u32(kDatasetVersion);
  w.u8(static_cast<std::uint8_t>(ds.equation.kind));
  w.f64(ds.equation.diffusion);
  w.f64(ds.equation.vel_x);
  w.f64(ds.equation.vel_y);
  w.u8(static_cast<std::uint8_t>(ds.equation.bc));
  w.f64(ds.equation.domain_lo.x);
  w.f64(ds.equation.domain_lo.y);
  w.f64(ds.equation.domain_hi.x);
  w.f64(ds.equation.domain_hi.y);
  w.u32(static_cast<std::uint32_t>(ds.sims.size()));
  for (const auto& sim : ds.sims) {
    const int n = sim.n_nodes(), mt = sim.n_times();
    const int d = sim.state_dim();
    w.u32(static_cast<std::uint32_t>(n));
    w.u32(static_cast<std::uint32_t>(mt));
    w.u8(static_cast<std::uint8_t>(d));
    for (const auto& c : sim.coords) {
      w.f64(c.x);
      w.f64(c.y);
    }
    w.f64s(sim.times.data(), sim.times.size());
    for (const auto& f : sim.states) {
      require(f.n == n && f.d == d, ErrorCode::ShapeMismatch,
              "inconsistent state shape in record");
      w.f64s(f.v.data(), f.v.size());
    }
  }
  detail::write_metadata(w, ds.metadata);
  return std::move(w.buf);
}

inline datagen::Dataset decode_dataset(const std::string& bytes) {
  detail::Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, "GPDS", 4) == 0, ErrorCode::FormatError,
          "not a GPDS dataset file");
  const std::uint32_t version = r.u32();
  require(version == kDatasetVersion, ErrorCode::FormatError,
          "unsupported GPDS version " + std::to_string(version));

  datagen::Dataset ds;
  const std::uint8_t kind = r.u8();
  require(kind <= 2, ErrorCode::FormatError, "bad equation kind");
  ds.equation = datagen::default_equation(static_cast<datagen::PdeKind>(kind));
  ds.equation.diffusion = r.f64();
  ds.equation.vel_x = r.f64();
  ds.equation.vel_y = r.f64();
  const std::uint8_t bc = r.u8();
  require(bc <= 1, ErrorCode::FormatError, "bad boundary kind");
  ds.equation.bc = static_cast<datagen::BoundaryKind>(bc);
  ds.equation.domain_lo.x = r.f64();
  ds.equation.domain_lo.y = r.f64();
  ds.equation.domain_hi.x = r.f64();
  ds.equation.domain_hi.y = r.f64();

  const std::uint32_t n_sims = r.u32();
  ds.sims.resize(n_sims);
  for (auto& sim : ds.sims) {
    const std::uint32_t n = r.u32();
    const std::uint32_t mt = r.u32();
    const std::uint8_t d = r.u8();
    require(n >= 1 && mt >= 1 && d >= 1, ErrorCode::FormatError, "bad record header");
    sim.coords.resize(n);
    for (auto& c : sim.coords) {
      c.x = r.f64();
      c.y = r.f64();
    }
    sim.times.resize(mt);
    r.f64s(sim.times.data(), mt);
    sim.states.assign(mt, Field(static_cast<int>(n), d));
    for (auto& f : sim.states) r.f64s(f.v.data(), f.v.size());
  }
  ds.metadata = detail::read_metadata(r);
  // restore generator parameters stashed in metadata
  for (const auto& [k, v] : ds.metadata) {
    if (k == "gt_grid") ds.equation.gt_grid = std::atoi(v.c_str());
    if (k == "gt_dt") ds.equation.gt_dt = std::atof(v.c_str());
    if (k == "fourier_modes") ds.equation.fourier_modes = std::atoi(v.c_str());
  }
  return ds;
}

inline void save_dataset(const datagen::Dataset& ds, const std::string& path) {
  write_file_atomic(path, encode_dataset(ds));
}

inline datagen::Dataset load_dataset(const std::string& path) {
  return decode_dataset(read_file(path));
}

// ---------------------------------------------------------------------------
// GPNN model checkpoints
// ---------------------------------------------------------------------------

inline std::string encode_model(const train::Model& model, const Metadata& meta) {
  require(static_cast<long>(model.params.size()) == mpnn::param_count(model.cfg),
          ErrorCode::ShapeMismatch, "parameter count does not match architecture");
  detail::Writer w;
  w.raw("GPNN", 4);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.cfg.state_dim));
  w.u32(static_cast<std::uint32_t>(model.cfg.hidden_width));
  w.u32(static_cast<std::uint32_t>(model.cfg.message_dim));
  w.u32(static_cast<std::uint32_t>(model.cfg.graph_layers));
  w.u8(model.cfg.use_edge_features ? 1 : 0);
  w.u64(model.params.size());
  w.f64s(model.params.data(), model.params.size());
  detail::write_metadata(w, meta);
  return std::move(w.buf);
}

inline train::Model decode_model(const std::string& bytes, Metadata* meta_out = nullptr) {
  detail::Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, "GPNN", 4) == 0, ErrorCode::FormatError,
          "not a GPNN model file");
  const std::uint32_t version = r.u32();
  require(version == kModelVersion, ErrorCode::FormatError,
          "unsupported GPNN version " + std::to_string(version));
  train::Model model;
  model.cfg.state_dim = static_cast<int>(r.u32());
  model.cfg.hidden_width = static_cast<int>(r.u32());
  model.cfg.message_dim = static_cast<int>(r.u32());
  model.cfg.graph_layers = static_cast<int>(r.u32());
  model.cfg.use_edge_features = r.u8() != 0;
  const std::uint64_t count = r.u64();
  require(static_cast<long>(count) == mpnn::param_count(model.cfg),
          ErrorCode::FormatError,
          "stored parameter count does not match architecture descriptor");
  model.params.resize(count);
  r.f64s(model.params.data(), count);
  const Metadata meta = detail::read_metadata(r);
  if (meta_out) *meta_out = meta;
  return model;
}

inline void save_model(const train::Model& model, const Metadata& meta,
                       const std::string& path) {
  write_file_atomic(path, encode_model(model, meta));
}

inline train::Model load_model(const std::string& path, Metadata* meta_out = nullptr) {
  return decode_model(read_file(path), meta_out);
}

// ---------------------------------------------------------------------------
// CSV reports. Provenance rides along as leading '#'-prefixed comment lines;
// the header and data rows follow the documented schemas.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_prologue(const Metadata& meta) {
  std::string s;
  for (const auto& [k, v] : meta) s += "# " + k + "=" + v + "\n";
  return s;
}

inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// Schema: iteration,loss,wall_ms
inline void save_train_csv(const train::TrainReport& report, const Metadata& meta,
                           const std::string& path) {
  std::string s = detail::csv_prologue(meta);
  s += "iteration,loss,wall_ms\n";
  for (size_t i = 0; i < report.loss_history.size(); ++i) {
    s += std::to_string(i) + "," + detail::fmt_g17(report.loss_history[i]) + "," +
         detail::fmt_g17(report.wall_ms[i]) + "\n";
  }
  write_file_atomic(path, s);
}

/// Schema: sim_id,t,rel_err
inline void save_eval_csv(const train::EvalReport& report, const Metadata& meta,
                          const std::string& path) {
  std::string s = detail::csv_prologue(meta);
  s += "sim_id,t,rel_err\n";
  for (size_t si = 0; si < report.rel_errors.size(); ++si)
    for (size_t ti = 0; ti < report.rel_errors[si].size(); ++ti)
      s += std::to_string(si) + "," + detail::fmt_g17(report.times[si][ti]) + "," +
           detail::fmt_g17(report.rel_errors[si][ti]) + "\n";
  write_file_atomic(path, s);
}

/// Schema: grid_id,model_id,mean_rel_err (one row per matrix entry)
inline void save_cross_grid_csv(const std::vector<std::vector<double>>& matrix,
                                const Metadata& meta, const std::string& path) {
  std::string s = detail::csv_prologue(meta);
  s += "grid_id,model_id,mean_rel_err\n";
  for (size_t g = 0; g < matrix.size(); ++g)
    for (size_t m = 0; m < matrix[g].size(); ++m)
      s += std::to_string(g) + "," + std::to_string(m) + "," +
           detail::fmt_g17(matrix[g][m]) + "\n";
  write_file_atomic(path, s);
}

/// Dumps a dataset as plain CSV (sim,t,node,x,y,components...).
inline void save_dataset_csv(const datagen::Dataset& ds, const std::string& path) {
  std::string s = detail::csv_prologue(ds.metadata);
  const int d = ds.sims.empty() ? 1 : ds.sims[0].state_dim();
  s += "sim,t,node,x,y";
  for (int c = 0; c < d; ++c) s += ",u" + std::to_string(c);
  s += "\n";
  for (size_t si = 0; si < ds.sims.size(); ++si) {
    const auto& sim = ds.sims[si];
    for (int ti = 0; ti < sim.n_times(); ++ti)
      for (int i = 0; i < sim.n_nodes(); ++i) {
        s += std::to_string(si) + "," + detail::fmt_g17(sim.times[ti]) + "," +
             std::to_string(i) + "," + detail::fmt_g17(sim.coords[i].x) + "," +
             detail::fmt_g17(sim.coords[i].y);
        for (int c = 0; c < d; ++c) s += "," + detail::fmt_g17(sim.states[ti].at(i, c));
        s += "\n";
      }
  }
  write_file_atomic(path, s);
}

// ---------------------------------------------------------------------------
// Heatmap rendering: nearest-node coloring on a square canvas, binary PPM
// (P6). Colormap: piecewise-linear blue -> cyan -> yellow -> red over [0,1].
// ---------------------------------------------------------------------------

inline std::array<std::uint8_t, 3> colormap(double t) {
  t = std::min(std::max(t, 0.0), 1.0);
  auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
  double r, g, b;
  if (t < 1.0 / 3) {
    const double u = 3.0 * t;
    r = 0.0; g = lerp(0.0, 1.0, u); b = 1.0;
  } else if (t < 2.0 / 3) {
    const double u = 3.0 * t - 1.0;
    r = lerp(0.0, 1.0, u); g = 1.0; b = lerp(1.0, 0.0, u);
  } else {
    const double u = 3.0 * t - 2.0;
    r = 1.0; g = lerp(1.0, 0.0, u); b = 0.0;
  }
  return {static_cast<std::uint8_t>(r * 255.0 + 0.5),
          static_cast<std::uint8_t>(g * 255.0 + 0.5),
          static_cast<std::uint8_t>(b * 255.0 + 0.5)};
}

/// Rasterizes per-node scalars by nearest-node coloring. `lo == hi` renders a
/// uniform mid-scale image (constant fields stay constant).
inline void save_heatmap_ppm(const std::vector<geo::Vec2>& coords,
                             const std::vector<double>& values, geo::Vec2 lo,
                             geo::Vec2 hi, double vlo, double vhi,
                             const Metadata& meta, const std::string& path,
                             int canvas = 256) {
  require(coords.size() == values.size() && !coords.empty(), ErrorCode::ShapeMismatch,
          "coords/values mismatch");
  std::string s = "P6\n";
  for (const auto& [k, v] : meta) s += "# " + k + "=" + v + "\n";
  s += std::to_string(canvas) + " " + std::to_string(canvas) + "\n255\n";
  const size_t header = s.size();
  s.resize(header + static_cast<size_t>(canvas) * canvas * 3);
  char* px = s.data() + header;
  const int n = static_cast<int>(coords.size());
  for (int py = 0; py < canvas; ++py) {
    // image rows run top-down; domain y runs bottom-up
    const double y = hi.y - (py + 0.5) * (hi.y - lo.y) / canvas;
    for (int pxi = 0; pxi < canvas; ++pxi) {
      const double x = lo.x + (pxi + 0.5) * (hi.x - lo.x) / canvas;
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double dx = coords[i].x - x, dy = coords[i].y - y;
        const double dd = dx * dx + dy * dy;
        if (dd < best_d) {
          best_d = dd;
          best = i;
        }
      }
      const double t = (vhi > vlo) ? (values[best] - vlo) / (vhi - vlo) : 0.5;
      const auto rgb = colormap(t);
      char* out = px + (static_cast<size_t>(py) * canvas + pxi) * 3;
      out[0] = static_cast<char>(rgb[0]);
      out[1] = static_cast<char>(rgb[1]);
      out[2] = static_cast<char>(rgb[2]);
    }
  }
  write_file_atomic(path, s);
}

}  // namespace graphpde::io
