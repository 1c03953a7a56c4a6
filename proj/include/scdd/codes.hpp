#pragma once

// Country, sector and size-band identifiers shared by every stage.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scdd/error.hpp"

namespace scdd {

/// Short fixed-width code (ISO country, NACE sector, "ROW"). Stored inline so
/// firm records stay trivially copyable at the 10^7 scale.
class Code {
 public:
  static constexpr std::size_t capacity = 4;

  constexpr Code() = default;
  Code(std::string_view text) {  // NOLINT(google-explicit-constructor)
    if (text.size() > capacity) {
      throw Error(ErrorKind::schema, "code '" + std::string(text) + "' longer than " +
                                         std::to_string(capacity) + " characters");
    }
    std::copy(text.begin(), text.end(), chars_.begin());
  }
  Code(const char* text) : Code(std::string_view(text)) {}  // NOLINT
  Code(const std::string& text) : Code(std::string_view(text)) {}  // NOLINT

  std::string_view view() const {
    std::size_t n = 0;
    while (n < capacity && chars_[n] != '\0') ++n;
    return {chars_.data(), n};
  }
  std::string str() const { return std::string(view()); }
  bool empty() const { return chars_[0] == '\0'; }

  friend bool operator==(const Code&, const Code&) = default;
  friend auto operator<=>(const Code&, const Code&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Code& c) { return os << c.view(); }

 private:
  std::array<char, capacity> chars_{};
};

struct CountrySector {
  Code country;
  Code sector;

  friend bool operator==(const CountrySector&, const CountrySector&) = default;
  friend auto operator<=>(const CountrySector&, const CountrySector&) = default;
  std::string str() const { return country.str() + "|" + sector.str(); }
};

inline constexpr std::string_view kRowMarker = "ROW";

/// Two upper-case letters.
inline bool is_country_code(std::string_view s) {
  return s.size() == 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
         std::isupper(static_cast<unsigned char>(s[1]));
}

/// NACE rev.2 division: section letter followed by the two-digit division,
/// e.g. "C29", "A01", "G46".
inline bool is_sector_code(std::string_view s) {
  return s.size() == 3 && s[0] >= 'A' && s[0] <= 'U' &&
         std::isdigit(static_cast<unsigned char>(s[1])) &&
         std::isdigit(static_cast<unsigned char>(s[2]));
}

inline std::vector<std::string> default_eu_countries() {
  // "EL" is the Eurostat label for Greece; both spellings are treated as EU.
  return {"AT", "BE", "BG", "HR", "CY", "CZ", "DK", "EE", "FI", "FR",
          "DE", "GR", "EL", "HU", "IE", "IT", "LV", "LT", "LU", "MT",
          "NL", "PL", "PT", "RO", "SK", "SI", "ES", "SE"};
}

using CountrySet = std::set<Code>;

inline CountrySet make_country_set(const std::vector<std::string>& codes) {
  CountrySet out;
  for (const auto& c : codes) out.insert(Code(c));
  return out;
}

/// Half-open employee band [lower, upper). `upper` is empty for the open
/// top band.
struct SizeBand {
  std::int64_t lower = 0;
  std::optional<std::int64_t> upper;

  bool bounded() const { return upper.has_value(); }
  bool contains(double x) const { return x >= static_cast<double>(lower) && (!upper || x < static_cast<double>(*upper)); }
  /// Largest integer employee count inside the band.
  std::int64_t max_integer() const {
    return upper ? *upper - 1 : std::numeric_limits<std::int64_t>::max();
  }
  /// Arithmetic midpoint; lower * 1.5 for the open band.
  double midpoint() const {
    return upper ? 0.5 * static_cast<double>(lower + *upper) : 1.5 * static_cast<double>(lower);
  }

  friend bool operator==(const SizeBand&, const SizeBand&) = default;
};

/// Index into the standard band table. -1 marks "no band" (ROW dummies).
using BandIndex = std::int8_t;
inline constexpr BandIndex kNoBand = -1;

struct BandDef {
  std::string_view label;
  SizeBand band;
};

inline const std::array<BandDef, 6>& standard_bands() {
  static const std::array<BandDef, 6> bands{{
      {"0-9", {0, 10}},
      {"10-19", {10, 20}},
      {"20-49", {20, 50}},
      {"50-149", {50, 150}},
      {"150-249", {150, 250}},
      {"250+", {250, std::nullopt}},
  }};
  return bands;
}

inline std::optional<BandIndex> band_from_label(std::string_view label) {
  const auto& bands = standard_bands();
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (bands[i].label == label) return static_cast<BandIndex>(i);
  }
  return std::nullopt;
}

inline std::string_view band_label(BandIndex idx) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= standard_bands().size()) return {};
  return standard_bands()[static_cast<std::size_t>(idx)].label;
}

inline const SizeBand& band_at(BandIndex idx) {
  return standard_bands().at(static_cast<std::size_t>(idx)).band;
}

}  // namespace scdd

template <>
struct std::hash<scdd::Code> {
  std::size_t operator()(const scdd::Code& c) const noexcept {
    return std::hash<std::string_view>{}(c.view());
  }
};

template <>
struct std::hash<scdd::CountrySector> {
  std::size_t operator()(const scdd::CountrySector& cs) const noexcept {
    const std::size_t h = std::hash<scdd::Code>{}(cs.country);
    return h ^ (std::hash<scdd::Code>{}(cs.sector) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};
