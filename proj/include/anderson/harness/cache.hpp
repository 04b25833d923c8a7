#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "anderson/harness/checksum.hpp"

namespace anderson::harness {

/// Eigenvalue files keyed by (spectra key, realization index).
///
/// Layout, little-endian: magic "ASPC", u32 version, u64 |Lambda|, u64 key,
/// u64 payload checksum (32 bytes), then |Lambda| doubles. Any mismatch on
/// load is reported as a miss.
class SpectraCache {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 32;

  explicit SpectraCache(std::filesystem::path root) : root_(std::move(root)) {}

  [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

  [[nodiscard]] std::filesystem::path path_of(std::uint64_t key, std::uint64_t realization) const {
    return root_ / hex64(key) / ("r" + std::to_string(realization) + ".spc");
  }

  [[nodiscard]] std::optional<std::vector<double>> load(std::uint64_t key, std::uint64_t realization,
                                                        std::size_t expected_size) const {
    std::ifstream in(path_of(key, realization), std::ios::binary);
    if (!in) return std::nullopt;
    std::array<unsigned char, kHeaderBytes> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) return std::nullopt;
    if (std::memcmp(header.data(), "ASPC", 4) != 0) return std::nullopt;
    if (get_u32(header.data() + 4) != kVersion) return std::nullopt;
    if (get_u64(header.data() + 8) != expected_size) return std::nullopt;
    if (get_u64(header.data() + 16) != key) return std::nullopt;
    std::vector<unsigned char> payload(expected_size * 8);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
      return std::nullopt;
    }
    if (in.peek() != std::char_traits<char>::eof()) return std::nullopt;
    Fnv1a h;
    h.update(payload);
    if (h.digest() != get_u64(header.data() + 24)) return std::nullopt;
    std::vector<double> values(expected_size);
    for (std::size_t i = 0; i < expected_size; ++i) {
      const std::uint64_t bits = get_u64(payload.data() + 8 * i);
      std::memcpy(&values[i], &bits, 8);
    }
    return values;
  }

  /// Writes through a temporary file and a rename; failures are silent
  /// (the cache is an optimisation).
  void store(std::uint64_t key, std::uint64_t realization, const std::vector<double>& values) const {
    const auto path = path_of(key, realization);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) return;
    std::vector<unsigned char> payload(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &values[i], 8);
      put_u64(payload.data() + 8 * i, bits);
    }
    Fnv1a h;
    h.update(payload);
    std::array<unsigned char, kHeaderBytes> header{};
    std::memcpy(header.data(), "ASPC", 4);
    put_u32(header.data() + 4, kVersion);
    put_u64(header.data() + 8, values.size());
    put_u64(header.data() + 16, key);
    put_u64(header.data() + 24, h.digest());
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) return;
      out.write(reinterpret_cast<const char*>(header.data()), header.size());
      out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
      if (!out) return;
    }
    std::filesystem::rename(tmp, path, ec);
  }

 private:
  static std::uint32_t get_u32(const unsigned char* p) noexcept {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  static std::uint64_t get_u64(const unsigned char* p) noexcept {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  static void put_u32(unsigned char* p, std::uint32_t v) noexcept {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
  }
  static void put_u64(unsigned char* p, std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
  }

  std::filesystem::path root_;
};

}  // namespace anderson::harness
