#ifndef ADFIT_CONFIG_HPP
#define ADFIT_CONFIG_HPP

#include <string>
#include <string_view>

#include "adfit/timeline.hpp"

namespace adfit {

enum class RenderMode { kInline, kExtended, kExtendedInline };

inline std::string_view to_string(RenderMode m) {
  switch (m) {
    case RenderMode::kInline: return "inline";
    case RenderMode::kExtended: return "extended";
    case RenderMode::kExtendedInline: return "extended-inline";
  }
  return "inline";
}

inline RenderMode parse_render_mode(std::string_view s) {
  if (s == "inline") return RenderMode::kInline;
  if (s == "extended") return RenderMode::kExtended;
  if (s == "extended-inline" || s == "extended_inline") return RenderMode::kExtendedInline;
  throw Error("usage", "unknown render mode '" + std::string(s) +
                           "' (expected inline, extended or extended-inline)");
}

/// Every tunable constant of scoring and placement.
struct OptimizerConfig {
  // Candidate cost weights.
  double w_coh = 1.0;
  double w_info = 500.0;
  double w_edit = 10.0;
  double last_word_penalty = 20.0;   // added to the cut count when the final word is dropped
  double info_ceiling = 2.0;         // informativeness cost when no noun carries weight

  // Placement.
  double skip_cost = 10000.0;
  double near_overlap_penalty = 10.0;
  Millis near_overlap_margin{300};
  double unlabeled_region_penalty = 10.0;  // per grid window outside music/silence
  Millis time_grid{100};
  Millis placement_window{120000};
  int max_shot_crossings = 1;
  double extension_cap_factor = 2.0;
  double extension_penalty = 1.0;          // per second of gap extension

  // Extendability of music gaps.
  Millis min_extendable_music{30000};
  double min_extendable_bpm = 60.0;

  RenderMode mode = RenderMode::kInline;

  std::size_t candidate_cap = 256;

  /// Empty when usable; otherwise the first violated constraint.
  std::string check() const {
    if (w_coh < 0 || w_info < 0 || w_edit < 0) return "weights must be non-negative";
    if (skip_cost < 0 || near_overlap_penalty < 0 || extension_penalty < 0 || unlabeled_region_penalty < 0 ||
        last_word_penalty < 0 || info_ceiling < 0)
      return "penalties must be non-negative";
    if (time_grid <= Millis{0}) return "time grid must be positive";
    if (placement_window <= Millis{0}) return "placement window must be positive";
    if (near_overlap_margin < Millis{0}) return "near-overlap margin must be non-negative";
    if (max_shot_crossings < 0) return "max shot crossings must be non-negative";
    if (extension_cap_factor < 1.0) return "extension cap factor must be at least 1";
    if (candidate_cap == 0) return "candidate cap must be positive";
    return {};
  }
};

}  // namespace adfit

#endif  // ADFIT_CONFIG_HPP
