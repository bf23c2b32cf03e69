#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace traitscale {

/// MOD12Q1-style plant functional types. Raster class codes are the
/// enum values (ENF=1 ... BARREN=7).
enum class PftClass : int {
  ENF = 1,
  EBF = 2,
  DNF = 3,
  DBF = 4,
  SHL = 5,
  GRL = 6,
  BARREN = 7,
};

inline constexpr int kNumPft = 7;
inline constexpr int kNumVegetatedPft = 6;  // BARREN carries no traits

inline constexpr std::array<PftClass, kNumPft> kAllPft = {
    PftClass::ENF, PftClass::EBF, PftClass::DNF, PftClass::DBF,
    PftClass::SHL, PftClass::GRL, PftClass::BARREN};

inline int pft_index(PftClass p) { return static_cast<int>(p) - 1; }
inline int pft_code(PftClass p) { return static_cast<int>(p); }

inline std::optional<PftClass> pft_from_code(int code) {
  if (code < 1 || code > kNumPft) return std::nullopt;
  return static_cast<PftClass>(code);
}

inline bool is_vegetated(PftClass p) { return p != PftClass::BARREN; }

inline std::string_view pft_name(PftClass p) {
  switch (p) {
    case PftClass::ENF: return "ENF";
    case PftClass::EBF: return "EBF";
    case PftClass::DNF: return "DNF";
    case PftClass::DBF: return "DBF";
    case PftClass::SHL: return "SHL";
    case PftClass::GRL: return "GRL";
    case PftClass::BARREN: return "BARREN";
  }
  return "?";
}

inline std::optional<PftClass> pft_from_name(std::string_view name) {
  for (PftClass p : kAllPft)
    if (pft_name(p) == name) return p;
  return std::nullopt;
}

/// The five leaf traits handled by the pipeline, in gap-fill order
/// (descending data availability).
enum class Trait : int { SLA = 0, LDMC = 1, LNC = 2, LPC = 3, LNPR = 4 };

inline constexpr int kNumTraits = 5;
inline constexpr std::array<Trait, kNumTraits> kAllTraits = {
    Trait::SLA, Trait::LDMC, Trait::LNC, Trait::LPC, Trait::LNPR};

inline std::string_view trait_name(Trait t) {
  switch (t) {
    case Trait::SLA: return "sla";
    case Trait::LDMC: return "ldmc";
    case Trait::LNC: return "lnc";
    case Trait::LPC: return "lpc";
    case Trait::LNPR: return "lnpr";
  }
  return "?";
}

inline std::optional<Trait> trait_from_name(std::string_view name) {
  for (Trait t : kAllTraits)
    if (trait_name(t) == name) return t;
  return std::nullopt;
}

}  // namespace traitscale
