#include "viewsel/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#ifndef VIEWSEL_VERSION
#define VIEWSEL_VERSION "0.0.0"
#endif

namespace viewsel {

namespace {

constexpr const char* kMagic = "VIEWSEL-ARRAY 1";
constexpr std::size_t kMaxHeaderLines = 64;

template <typename T>
void to_little_endian(std::vector<T>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& x : v) {
      auto* b = reinterpret_cast<unsigned char*>(&x);
      std::reverse(b, b + sizeof(T));
    }
  }
}

template <typename T>
std::string encode(const ArrayHeader& h, std::vector<T> data) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "kind " << h.kind << '\n';
  out << "dtype " << (sizeof(T) == 4 ? "float32_le" : "float64_le") << '\n';
  out << "shape";
  for (const auto s : h.shape) out << ' ' << s;
  out << '\n';
  out << "pitch " << format_number(h.pitch) << '\n';
  out << "angle " << format_number(h.angle) << '\n';
  if (!h.tag.empty()) out << "tag " << h.tag << '\n';
  out << "creator viewsel " << VIEWSEL_VERSION << '\n';
  out << "end\n";
  to_little_endian(data);
  std::string bytes = out.str();
  const std::size_t offset = bytes.size();
  bytes.resize(offset + data.size() * sizeof(T));
  std::memcpy(bytes.data() + offset, data.data(), data.size() * sizeof(T));
  return bytes;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(path.string() + ": malformed number '" + s + "' in header");
  }
  return v;
}

struct Decoded {
  ArrayHeader header;
  std::vector<char> payload;
};

Decoded decode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  const auto fail = [&](const std::string& why) -> void {
    throw IoError(path.string() + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line) || line != kMagic) fail("not a viewsel array file");
  Decoded d;
  bool ended = false;
  for (std::size_t n = 0; n < kMaxHeaderLines && std::getline(in, line); ++n) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "kind") {
      d.header.kind = value;
    } else if (key == "dtype") {
      d.header.dtype = value;
    } else if (key == "shape") {
      std::istringstream s(value);
      for (std::size_t x; s >> x;) d.header.shape.push_back(x);
      if (!s.eof()) fail("malformed shape");
    } else if (key == "pitch") {
      d.header.pitch = parse_double(value, path);
    } else if (key == "angle") {
      d.header.angle = parse_double(value, path);
    } else if (key == "tag") {
      d.header.tag = value;
    } else if (key == "creator") {
      d.header.creator = value;
    } else {
      fail("unknown header field '" + key + "'");
    }
  }
  if (!ended) fail("header has no end marker");
  if (d.header.dtype != "float32_le" && d.header.dtype != "float64_le") {
    fail("unsupported dtype '" + d.header.dtype + "'");
  }
  if (d.header.shape.empty()) fail("missing shape");
  std::size_t count = 1;
  for (const auto s : d.header.shape) count *= s;
  const std::size_t elem = d.header.dtype == "float32_le" ? 4 : 8;
  d.payload.resize(count * elem);
  in.read(d.payload.data(), static_cast<std::streamsize>(d.payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != d.payload.size()) fail("truncated data");
  if (in.peek() != std::char_traits<char>::eof()) fail("trailing bytes after data");
  return d;
}

template <typename T>
std::vector<T> payload_as(const Decoded& d, const std::filesystem::path& path) {
  const std::size_t elem = d.header.dtype == "float32_le" ? 4 : 8;
  if (elem != sizeof(T)) {
    throw IoError(path.string() + ": expected " + (sizeof(T) == 4 ? "float32_le" : "float64_le") +
                  " data, found " + d.header.dtype);
  }
  std::vector<T> out(d.payload.size() / sizeof(T));
  std::memcpy(out.data(), d.payload.data(), d.payload.size());
  to_little_endian(out);
  return out;
}

void expect_kind(const Decoded& d, const std::string& kind, std::size_t dims,
                 const std::filesystem::path& path) {
  if (d.header.kind != kind) {
    throw IoError(path.string() + ": expected a " + kind + " file, found '" + d.header.kind + "'");
  }
  if (d.header.shape.size() != dims) {
    throw IoError(path.string() + ": " + kind + " needs " + std::to_string(dims) + " dimensions");
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError(path.string() + ": write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(path.string() + ": cannot move temporary file into place");
  }
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_volume(const std::filesystem::path& path, const Volume& vol) {
  const auto& s = vol.shape();
  ArrayHeader h;
  h.kind = "volume";
  h.shape = {static_cast<std::size_t>(s.nx), static_cast<std::size_t>(s.ny),
             static_cast<std::size_t>(s.nz)};
  h.pitch = vol.voxel_pitch();
  const auto d = vol.data();
  write_file_atomic(path, encode(h, std::vector<float>(d.begin(), d.end())));
}

Volume read_volume(const std::filesystem::path& path) {
  const auto d = decode(path);
  expect_kind(d, "volume", 3, path);
  const Shape3 shape{static_cast<int>(d.header.shape[0]), static_cast<int>(d.header.shape[1]),
                     static_cast<int>(d.header.shape[2])};
  if (!(d.header.pitch > 0.0)) throw IoError(path.string() + ": voxel pitch must be positive");
  return Volume(shape, d.header.pitch, payload_as<float>(d, path));
}

void write_projection(const std::filesystem::path& path, const Projection& proj) {
  ArrayHeader h;
  h.kind = "projection";
  h.shape = {static_cast<std::size_t>(proj.cols()), static_cast<std::size_t>(proj.rows())};
  h.angle = proj.angle();
  const auto d = proj.data();
  write_file_atomic(path, encode(h, std::vector<float>(d.begin(), d.end())));
}

Projection read_projection(const std::filesystem::path& path) {
  const auto d = decode(path);
  expect_kind(d, "projection", 2, path);
  return Projection(static_cast<int>(d.header.shape[1]), static_cast<int>(d.header.shape[0]),
                    d.header.angle, payload_as<float>(d, path));
}

void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& dmat,
                           const std::string& tag) {
  if (tag.find('\n') != std::string::npos) throw IoError("matrix tag must be a single line");
  ArrayHeader h;
  h.kind = "matrix";
  h.shape = {dmat.size(), dmat.size()};
  h.tag = tag;
  write_file_atomic(path, encode(h, dmat.values()));
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path, std::string* tag) {
  const auto d = decode(path);
  expect_kind(d, "matrix", 2, path);
  if (d.header.shape[0] != d.header.shape[1]) throw IoError(path.string() + ": matrix not square");
  if (tag) *tag = d.header.tag;
  try {
    return DistanceMatrix(d.header.shape[0], payload_as<double>(d, path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

ArrayHeader read_header(const std::filesystem::path& path) { return decode(path).header; }

std::string trace_csv(const SelectionTrace& trace) {
  std::string out =
      "step,angle,i_cad,i_recon,dispersion,lambda,total,nrmse,ssim,select_seconds\r\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.step) + ',' + format_number(r.angle) + ',';
    if (r.scores) {
      out += format_number(r.scores->i_cad) + ',' + format_number(r.scores->i_recon) + ',' +
             format_number(r.scores->dispersion) + ',' + format_number(r.scores->lambda) + ',' +
             format_number(r.scores->total) + ',';
    } else {
      out += ",,,,,";
    }
    if (r.quality) {
      out += format_number(r.quality->nrmse) + ',' + format_number(r.quality->ssim) + ',';
    } else {
      out += ",,";
    }
    out += opt(r.select_seconds) + "\r\n";
  }
  return out;
}

std::vector<SummaryRow> summarize(const SelectionTrace& trace) {
  std::vector<SummaryRow> rows;
  const auto mean = trace.mean_select_seconds();
  for (const auto& r : trace.records) {
    if (!r.quality) continue;
    rows.push_back({trace.policy, r.step, r.quality->nrmse, r.quality->ssim, mean});
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "policy,views,nrmse,ssim,mean_select_seconds\r\n";
  for (const auto& r : rows) {
    out += csv_field(r.policy) + ',' + std::to_string(r.views) + ',' + format_number(r.nrmse) +
           ',' + format_number(r.ssim) + ',' + opt(r.mean_select_seconds) + "\r\n";
  }
  return out;
}

}  // namespace viewsel
