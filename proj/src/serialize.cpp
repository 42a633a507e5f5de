#include "saddle/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "saddle/errors.hpp"

namespace saddle {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'D', 'L', 'P', 'R', 'O', 'B', '\0'};
constexpr std::uint32_t kByteOrderMarker = 0x01020304;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_doubles(const double* data, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  void get_doubles(double* data, std::size_t count) {
    in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    check();
  }
  void expect_eof() {
    in_.peek();
    if (!in_.eof()) throw IoError(path_.string() + ": trailing bytes after problem data");
  }

 private:
  void check() {
    if (!in_) throw IoError(path_.string() + ": truncated problem file");
  }
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void save_problem(const SyntheticSaddleProblem& problem, const std::filesystem::path& path) {
  const SyntheticData& data = problem.data();
  const SyntheticParams& p = data.params;
  Writer w(path);
  for (char c : kMagic) w.put(c);
  w.put(kProblemFormatVersion);
  w.put(kByteOrderMarker);
  w.put<std::uint64_t>(p.n);
  w.put<std::uint64_t>(p.d);
  w.put<std::uint64_t>(p.seed);
  w.put(p.neg_eig);
  w.put(p.pos_lo);
  w.put(p.pos_hi);
  w.put(p.perturbation);
  w.put(p.offset_scale);
  w.put(data.box_radius);
  w.put(data.max_component_norm);
  w.put(data.origin_hess_norm);
  w.put(data.lipschitz_grad);
  w.put(data.lipschitz_hess);
  w.put<std::uint64_t>(data.origin_spectrum.size());
  w.put_doubles(data.origin_spectrum.data(), data.origin_spectrum.size());
  w.put_doubles(data.a.data(), data.a.size());
  w.put_doubles(data.b.data(), data.b.size());
  w.finish();
}

SyntheticSaddleProblem load_problem(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  for (char& c : magic) c = r.get<char>();
  if (magic != kMagic) throw IoError(path.string() + ": not a problem file");
  const auto version = r.get<std::uint32_t>();
  if (version != kProblemFormatVersion)
    throw IoError(path.string() + ": unsupported format version " + std::to_string(version));
  if (r.get<std::uint32_t>() != kByteOrderMarker)
    throw IoError(path.string() + ": byte order mismatch");

  SyntheticData data;
  SyntheticParams& p = data.params;
  p.n = r.get<std::uint64_t>();
  p.d = r.get<std::uint64_t>();
  p.seed = r.get<std::uint64_t>();
  p.neg_eig = r.get<double>();
  p.pos_lo = r.get<double>();
  p.pos_hi = r.get<double>();
  p.perturbation = r.get<double>();
  p.offset_scale = r.get<double>();
  data.box_radius = r.get<double>();
  data.max_component_norm = r.get<double>();
  data.origin_hess_norm = r.get<double>();
  data.lipschitz_grad = r.get<double>();
  data.lipschitz_hess = r.get<double>();
  const auto spectrum_size = r.get<std::uint64_t>();
  if (p.n == 0 || p.d == 0 || (spectrum_size != 0 && spectrum_size != p.d))
    throw IoError(path.string() + ": inconsistent header");
  data.origin_spectrum.resize(spectrum_size);
  r.get_doubles(data.origin_spectrum.data(), spectrum_size);
  data.a.resize(p.n * p.d * p.d);
  r.get_doubles(data.a.data(), data.a.size());
  data.b.resize(p.n * p.d);
  r.get_doubles(data.b.data(), data.b.size());
  r.expect_eof();
  return SyntheticSaddleProblem(std::move(data));
}

}  // namespace saddle
