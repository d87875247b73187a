#include "lmhd/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lmhd {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_header(std::ostream& os, uint32_t n, uint32_t comps, uint8_t flavor) {
  os.write("LMHD", 4);
  put_u32(os, kVersion);
  put_u32(os, n);
  put_u32(os, comps);
  os.put(char(flavor));
  for (int i = 17; i < 32; ++i) os.put('\0');
}

struct Header {
  uint32_t n = 0, comps = 0;
  uint8_t flavor = 0;
};

Header read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (std::strncmp(magic, "LMHD", 4) != 0) fail_config("snapshot: bad magic");
  uint32_t ver = get_u32(is);
  if (ver != kVersion) fail_config("snapshot: unsupported version");
  Header h;
  h.n = get_u32(is);
  h.comps = get_u32(is);
  h.flavor = uint8_t(is.get());
  char pad[15];
  is.read(pad, 15);
  return h;
}

void write_components(const std::string& path, uint32_t n, uint8_t flavor,
                      const std::vector<const std::vector<cd>*>& comps) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) fail_config("cannot open for write: " + tmp);
    write_header(os, n, uint32_t(comps.size()), flavor);
    for (const auto* comp : comps)
      for (const cd& z : *comp) {
        put_f64(os, z.real());
        put_f64(os, z.imag());
      }
    if (!os) fail_config("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_snapshot(const std::string& path, const VectorField& f) {
  write_components(path, uint32_t(f.grid.n), 0, {&f.c[0], &f.c[1], &f.c[2]});
}

void write_snapshot(const std::string& path, const ScalarField& f) {
  write_components(path, uint32_t(f.grid.n), 0, {&f.c});
}

void write_snapshot(const std::string& path, const TensorField& f) {
  uint8_t flavor = f.flavor == TensorFlavor::symmetric_traceless ? 1
                   : f.flavor == TensorFlavor::skew_symmetric    ? 2
                                                                 : 0;
  std::vector<const std::vector<cd>*> comps;
  for (const auto& v : f.c) comps.push_back(&v);
  write_components(path, uint32_t(f.grid.n), flavor, comps);
}

VectorField read_snapshot_vector(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_config("cannot open snapshot: " + path);
  Header h = read_header(is);
  if (h.comps != 3) fail_config("snapshot is not a vector field: " + path);
  VectorField f{Grid(int(h.n))};
  for (int k = 0; k < 3; ++k)
    for (auto& z : f.c[k]) { double re = get_f64(is); double im = get_f64(is); z = cd(re, im); }
  if (!is) fail_config("truncated snapshot: " + path);
  return f;
}

ScalarField read_snapshot_scalar(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_config("cannot open snapshot: " + path);
  Header h = read_header(is);
  if (h.comps != 1) fail_config("snapshot is not a scalar field: " + path);
  ScalarField f{Grid(int(h.n))};
  for (auto& z : f.c) { double re = get_f64(is); double im = get_f64(is); z = cd(re, im); }
  if (!is) fail_config("truncated snapshot: " + path);
  return f;
}

TensorField read_snapshot_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_config("cannot open snapshot: " + path);
  Header h = read_header(is);
  if (h.comps != 9) fail_config("snapshot is not a tensor field: " + path);
  TensorFlavor fl = h.flavor == 1   ? TensorFlavor::symmetric_traceless
                    : h.flavor == 2 ? TensorFlavor::skew_symmetric
                                    : TensorFlavor::general;
  TensorField f{Grid(int(h.n)), fl};
  for (int k = 0; k < 9; ++k)
    for (auto& z : f.c[k]) { double re = get_f64(is); double im = get_f64(is); z = cd(re, im); }
  if (!is) fail_config("truncated snapshot: " + path);
  return f;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) fail_config("cannot open for write: " + tmp);
    os << content;
    if (!os) fail_config("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string ArtifactStamp::csv_comment() const {
  std::ostringstream os;
  os << "# ledger_hash=" << std::hex << ledger_hash << std::dec
     << " paper_faithful=" << (paper_faithful ? "true" : "false") << "\n";
  return os.str();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail_config("cannot create directory: " + path);
}

}  // namespace lmhd
