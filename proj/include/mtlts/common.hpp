#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtlts {

namespace fs = std::filesystem;

// Raised for malformed inputs, bad configs, contract violations at the API
// boundary. Message carries the offending entity (thread id, key, path).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] void fail(const std::string& msg);

// Deterministic RNG (xoshiro256**). All draws are hand-rolled on the raw
// 64-bit stream so sequences never depend on standard library distribution
// internals. A named stream perturbs the seed, decoupling consumers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, const std::string& stream);

  std::uint64_t next_u64();
  double uniform01();                       // [0,1), 53-bit
  int uniform_int(int lo, int hi);          // inclusive bounds
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SHA-256 content hash (hex) of a byte string / file; files are hashed in
// path-sorted order so directory hashes are stable.
std::string sha256_hex(const std::string& bytes);
std::string hash_file(const fs::path& p);
std::string hash_paths(const std::vector<fs::path>& paths);

std::string read_file(const fs::path& p);
void write_file(const fs::path& p, const std::string& content);

// Flat key-value config: `key = value` lines, '#' comments, later keys win.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const fs::path& p);
  static KeyValueConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  bool get(const std::string& key, bool fallback) const;
  std::string require(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Little-endian scalar IO for the binary file formats.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(const std::string& in, std::size_t& pos);
std::uint64_t get_u64(const std::string& in, std::size_t& pos);
float get_f32(const std::string& in, std::size_t& pos);
double get_f64(const std::string& in, std::size_t& pos);

std::string lower_ascii(std::string s);
std::string trim(const std::string& s);
std::vector<std::string> split_ws(const std::string& s);
std::vector<std::string> split_lines(const std::string& s);

}  // namespace mtlts
