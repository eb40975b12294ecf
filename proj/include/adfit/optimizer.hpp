#ifndef ADFIT_OPTIMIZER_HPP
#define ADFIT_OPTIMIZER_HPP

// Placement of description candidates into gaps.
//
// A composition assigns every description either a skip or a (candidate,
// start) pair. Its cost is the sum over descriptions of candidate cost plus
// placement penalty; `optimize` finds the minimum by dynamic programming over
// (description index, end slot of the previous placement), and
// `brute_force_optimize` enumerates assignments directly as a test oracle.
//
// Time is discretized into grid slots of `time_grid`. A candidate of spoken
// length l occupies ceil(l / grid) slots, and starts fall on slot
// boundaries. Costs are accumulated in integer micro-units so both solvers
// agree exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adfit/candidates.hpp"
#include "adfit/config.hpp"
#include "adfit/scorer.hpp"
#include "adfit/timeline.hpp"

namespace adfit {

/// Non-negative cost in micro-units, or infinity.
class Cost {
 public:
  static constexpr std::int64_t kScale = 1'000'000;

  constexpr Cost() = default;
  static constexpr Cost infinite() { return Cost(kInf); }
  static constexpr Cost micros(std::int64_t m) { return Cost(m); }
  static Cost from_double(double v) {
    if (!std::isfinite(v)) return infinite();
    return Cost(static_cast<std::int64_t>(std::llround(v * kScale)));
  }
  static constexpr Cost from_millis(Millis t) { return Cost(t.count() * (kScale / 1000)); }

  constexpr bool is_infinite() const { return v_ == kInf; }
  constexpr std::int64_t micros() const { return v_; }
  double value() const {
    return is_infinite() ? std::numeric_limits<double>::infinity()
                         : static_cast<double>(v_) / kScale;
  }

  friend constexpr Cost operator+(Cost a, Cost b) {
    if (a.is_infinite() || b.is_infinite()) return infinite();
    return Cost(a.v_ + b.v_);
  }
  Cost& operator+=(Cost o) { return *this = *this + o; }
  friend constexpr auto operator<=>(Cost, Cost) = default;

 private:
  static constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  constexpr explicit Cost(std::int64_t v) : v_(v) {}
  std::int64_t v_ = 0;
};

struct ScoredCandidate {
  Candidate candidate;
  CostBreakdown cost;
};

/// Scored candidates of one description, in the description order used by
/// the optimizer.
using CandidateTable = std::vector<std::vector<ScoredCandidate>>;

struct PlacedDescription {
  std::string description_id;
  int candidate_index = 0;  // into the description's candidate list
  Candidate candidate;
  Millis start{0};
  Millis duration{0};    // spoken length
  Millis extension{0};   // gap lengthening consumed (extended-inline only)
  CostBreakdown cost;
  double placement_penalty = 0;
};

struct PlanEntry {
  std::string description_id;
  bool skipped = false;
  double candidate_cost = 0;   // weighted total, or the skip cost
  double placement_penalty = 0;
};

struct CompositionPlan {
  RenderMode mode = RenderMode::kInline;
  std::vector<PlacedDescription> placed;
  std::vector<std::string> skipped;
  std::vector<PlanEntry> entries;  // one per description, in draft order
  Cost total_cost;

  double total() const { return total_cost.value(); }
  const PlacedDescription* find(std::string_view id) const {
    for (const auto& p : placed)
      if (p.description_id == id) return &p;
    return nullptr;
  }
};

/// Silence and ambient gaps are always extendable; music gaps only when
/// long enough and rhythmic enough. Extendable gaps may grow by
/// (extension_cap_factor - 1) times their length.
inline GapSegment classify_extendable(GapSegment gap, std::optional<double> tempo_bpm,
                                      const OptimizerConfig& cfg,
                                      std::vector<Diagnostic>* diagnostics = nullptr) {
  switch (gap.label) {
    case AudioLabel::kSilence:
    case AudioLabel::kAmbient:
      gap.extendable = true;
      break;
    case AudioLabel::kMusic:
      if (!tempo_bpm) {
        gap.extendable = false;
        if (diagnostics)
          diagnostics->push_back({Diagnostic::Severity::kWarning, "no_tempo",
                                  "gap " + detail::fmt_time(gap.start) + "-" + detail::fmt_time(gap.end),
                                  "music gap has no tempo estimate; treated as not extendable"});
      } else {
        gap.extendable = gap.length() >= cfg.min_extendable_music && *tempo_bpm >= cfg.min_extendable_bpm;
      }
      break;
    case AudioLabel::kSpeech:
      gap.extendable = false;
      break;
  }
  gap.max_extension =
      gap.extendable
          ? Millis(static_cast<std::int64_t>(std::floor(
                (cfg.extension_cap_factor - 1.0) * static_cast<double>(gap.length().count()))))
          : Millis{0};
  return gap;
}

/// Shared geometry for placement evaluation.
struct PlacementContext {
  const Project* project = nullptr;
  const std::vector<GapSegment>* gaps = nullptr;
  const OptimizerConfig* config = nullptr;
};

namespace detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline Millis occupied_length(Millis spoken, Millis grid) {
  return grid * ceil_div(spoken.count(), grid.count());
}

inline Millis snap_to_grid(Millis t, Millis grid) {
  return grid * ((t.count() + grid.count() / 2) / grid.count());
}

inline Cost extension_cost(Millis extension, const OptimizerConfig& cfg) {
  return Cost::from_double(cfg.extension_penalty * to_seconds(extension));
}

inline int shots_between(const std::vector<Millis>& shots, Millis a, Millis b) {
  if (a > b) std::swap(a, b);
  int n = 0;
  for (Millis s : shots) n += (s > a && s < b) ? 1 : 0;
  return n;
}

}  // namespace detail

/// Where a placement sits relative to the timeline, as seen by the penalty.
struct PlacementGeometry {
  bool feasible = false;
  std::string reason;        // why infeasible
  int gap_index = -1;
  Millis extension{0};
  Millis source_end{0};      // end of the occupied source time
};

/// Penalty for putting `d` at `d.start` with duration `d.duration`, given
/// the previously placed description (or none). Infinite when the placement
/// leaves its gap (beyond what extension allows), overlaps `prev`, breaks
/// the time lock, or falls outside the search window around the anchor.
/// Fills `geometry` when given.
inline Cost placement_penalty(const PlacedDescription& d, const PlacedDescription* prev,
                              const PlacementContext& ctx,
                              PlacementGeometry* geometry = nullptr) {
  const auto& cfg = *ctx.config;
  const auto& gaps = *ctx.gaps;
  const Project& project = *ctx.project;
  const Millis grid = cfg.time_grid;
  PlacementGeometry geo;
  auto fail = [&](std::string why) {
    geo.reason = std::move(why);
    if (geometry) *geometry = geo;
    return Cost::infinite();
  };

  const DraftDescription* desc = project.find_description(d.description_id);
  if (!desc) return fail("unknown description");
  if (cfg.mode == RenderMode::kExtended) {
    geo.feasible = true;
    geo.source_end = d.start;
    if (geometry) *geometry = geo;
    return Cost{};
  }

  const Millis t = d.start;
  if (t.count() % grid.count() != 0) return fail("start is off the placement grid");
  if (desc->lock_time && t != detail::snap_to_grid(desc->anchor_time, grid))
    return fail("time-locked description must start at its anchor");
  const Millis offset = t > desc->anchor_time ? t - desc->anchor_time : desc->anchor_time - t;
  if (offset > cfg.placement_window) return fail("outside the placement window");
  if (detail::shots_between(project.shots, t, desc->anchor_time) > cfg.max_shot_crossings)
    return fail("crosses too many shot boundaries");

  const Millis occupied = detail::occupied_length(d.duration, grid);
  const Millis end = t + occupied;

  int gi = -1;
  for (int i = 0; i < static_cast<int>(gaps.size()); ++i)
    if (gaps[i].start <= t && t + grid <= gaps[i].end) gi = i;
  if (gi < 0) return fail("start is not inside a gap");
  const GapSegment& gap = gaps[gi];
  geo.gap_index = gi;

  Millis extension{0};
  if (end > gap.end) {
    if (cfg.mode != RenderMode::kExtendedInline) return fail("overlaps speech after the gap");
    extension = end - gap.end;
    if (!gap.extendable) return fail("gap is not extendable");
    if (extension > gap.max_extension) return fail("extension exceeds the gap's cap");
  }
  geo.extension = extension;
  geo.source_end = end - extension;

  Cost penalty = detail::extension_cost(extension, cfg);
  if (prev) {
    PlacementGeometry pg;
    placement_penalty(*prev, nullptr, ctx, &pg);
    const Millis prev_end = grid * detail::ceil_div(pg.source_end.count(), grid.count());
    if (t < prev_end) return fail("overlaps the previous description");
    if (t - prev_end < cfg.near_overlap_margin) penalty += Cost::from_double(cfg.near_overlap_penalty);
  }
  if (gap.start > Millis{0} && t - gap.start < cfg.near_overlap_margin)
    penalty += Cost::from_double(cfg.near_overlap_penalty);
  if (gap.end < project.source_duration && (gap.end + extension) - end < cfg.near_overlap_margin)
    penalty += Cost::from_double(cfg.near_overlap_penalty);
  if (gap.label != AudioLabel::kMusic && gap.label != AudioLabel::kSilence) {
    const auto windows = occupied.count() / grid.count();
    penalty += Cost::from_double(cfg.unlabeled_region_penalty * static_cast<double>(windows));
  }

  geo.feasible = true;
  if (geometry) *geometry = geo;
  return penalty;
}

namespace detail {

inline std::string describe_infeasible_locks(const Project& project,
                                             const std::vector<const DraftDescription*>& order,
                                             const CandidateTable& table,
                                             const PlacementContext& ctx) {
  const auto& cfg = *ctx.config;
  const Millis grid = cfg.time_grid;
  const std::int64_t slots = project.source_duration.count() / grid.count() + 1;
  std::vector<std::string> locked;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* d = order[i];
    if (!d->lock_presence) continue;
    locked.push_back(d->id);
    bool any = false;
    std::string last_reason = "no candidate";
    for (const auto& sc : table[i]) {
      for (std::int64_t s = 0; s < slots && !any; ++s) {
        PlacedDescription pd;
        pd.description_id = d->id;
        pd.start = grid * s;
        pd.duration = sc.candidate.duration;
        PlacementGeometry geo;
        if (!placement_penalty(pd, nullptr, ctx, &geo).is_infinite())
          any = true;
        else if (geo.reason != "start is not inside a gap" && geo.reason != "outside the placement window" &&
                 geo.reason != "start is off the placement grid")
          last_reason = geo.reason;
      }
    }
    if (!any) {
      Millis shortest = table[i].empty() ? Millis{0} : table[i].front().candidate.duration;
      for (const auto& sc : table[i]) shortest = std::min(shortest, sc.candidate.duration);
      std::ostringstream msg;
      msg << "presence-locked description '" << d->id << "' cannot be placed: ";
      if (d->lock_time)
        msg << "time lock at " << to_seconds(d->anchor_time) << "s leaves no room for its shortest candidate ("
            << to_seconds(shortest) << "s); " << last_reason;
      else
        msg << "no gap within " << to_seconds(cfg.placement_window) << "s and "
            << cfg.max_shot_crossings << " shot boundary(ies) of the anchor fits its shortest candidate ("
            << to_seconds(shortest) << "s)";
      return msg.str();
    }
  }
  std::ostringstream msg;
  msg << "presence-locked descriptions cannot all be placed without overlapping:";
  for (const auto& id : locked) msg << " '" << id << "'";
  return msg.str();
}

/// Descriptions in optimizer order: the project's draft order.
inline std::vector<const DraftDescription*> draft_order(const Project& p) {
  std::vector<const DraftDescription*> out;
  for (const auto& d : p.descriptions) out.push_back(&d);
  std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    return a->anchor_time < b->anchor_time;
  });
  return out;
}

inline int original_index(const std::vector<ScoredCandidate>& cands, std::size_t word_count) {
  for (int j = 0; j < static_cast<int>(cands.size()); ++j)
    if (cands[j].candidate.is_original(word_count)) return j;
  return -1;
}

inline void check_table(const std::vector<const DraftDescription*>& order, const CandidateTable& table) {
  if (table.size() != order.size())
    throw Error("validation", "candidate table has " + std::to_string(table.size()) +
                                  " rows for " + std::to_string(order.size()) + " descriptions");
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (table[i].empty())
      throw Error("validation", "description '" + order[i]->id + "' has no candidates");
    for (const auto& sc : table[i]) {
      if (sc.candidate.description_id != order[i]->id)
        throw Error("validation", "candidate row " + std::to_string(i) + " belongs to '" +
                                      sc.candidate.description_id + "', expected '" + order[i]->id + "'");
      if (sc.candidate.duration <= Millis{0})
        throw Error("validation", "candidate of '" + order[i]->id + "' has no duration");
    }
  }
}

/// Candidate cost in micro-units, as both solvers account it.
inline Cost candidate_cost_units(const ScoredCandidate& sc) {
  return Cost::from_double(sc.cost.weighted_total);
}

// Per-description option ordering for ties: earlier start, then longer
// candidate, then lower candidate index; skipping comes last.
struct OptionKey {
  std::int64_t slot;
  Millis duration;
  int index;
  bool operator<(const OptionKey& o) const {
    if (slot != o.slot) return slot < o.slot;
    if (duration != o.duration) return duration > o.duration;
    return index < o.index;
  }
};

inline CompositionPlan extended_plan(const std::vector<const DraftDescription*>& order,
                                     const CandidateTable& table) {
  CompositionPlan plan;
  plan.mode = RenderMode::kExtended;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* d = order[i];
    int j = original_index(table[i], d->words.size());
    if (j < 0) throw Error("validation", "candidates of '" + d->id + "' lack the original text");
    const auto& sc = table[i][j];
    PlacedDescription pd{d->id, j, sc.candidate, d->anchor_time, sc.candidate.duration, Millis{0}, sc.cost, 0.0};
    plan.placed.push_back(pd);
    plan.entries.push_back({d->id, false, sc.cost.weighted_total, 0.0});
    plan.total_cost += candidate_cost_units(sc);
  }
  return plan;
}

inline void append_placed(CompositionPlan& plan, const DraftDescription& d, int j,
                          const ScoredCandidate& sc, Millis start, Millis extension, Cost penalty) {
  PlacedDescription pd{d.id, j, sc.candidate, start, sc.candidate.duration, extension, sc.cost,
                       penalty.value()};
  plan.placed.push_back(std::move(pd));
  plan.entries.push_back({d.id, false, sc.cost.weighted_total, penalty.value()});
}

}  // namespace detail

/// Minimum-cost composition by dynamic programming.
///
/// Processes descriptions from last to first, computing for every "previous
/// placement ends at slot e" state the cheapest completion. A forward pass
/// then reconstructs the plan, preferring at each description the option
/// with the earliest start, then the longer candidate, with skips last.
/// Runs in O(N (M + W L)) for N descriptions, M slots, W starts inside the
/// search window and L candidates.
inline CompositionPlan optimize(const Project& project, const std::vector<GapSegment>& gaps,
                                const CandidateTable& table, const OptimizerConfig& cfg) {
  if (auto err = cfg.check(); !err.empty()) throw Error("validation", "optimizer config: " + err);
  const auto order = detail::draft_order(project);
  detail::check_table(order, table);
  if (cfg.mode == RenderMode::kExtended) return detail::extended_plan(order, table);

  const PlacementContext ctx{&project, &gaps, &cfg};
  const Millis grid = cfg.time_grid;
  const std::int64_t g = grid.count();
  const std::int64_t slots = project.source_duration.count() / g;  // slots fully inside the source
  const std::int64_t last_end = detail::ceil_div(project.source_duration.count(), g);
  const std::int64_t states = last_end + 2;  // NONE plus end slots 0..last_end
  const std::size_t n = order.size();
  const Cost skip = Cost::from_double(cfg.skip_cost);
  const Cost near = Cost::from_double(cfg.near_overlap_penalty);
  const std::int64_t margin_slots = detail::ceil_div(cfg.near_overlap_margin.count(), g);

  // Per-slot gap membership: slot k lies fully inside gap slot_gap[k].
  std::vector<int> slot_gap(slots, -1);
  for (int gi = 0; gi < static_cast<int>(gaps.size()); ++gi) {
    const auto first = detail::ceil_div(gaps[gi].start.count(), g);
    const auto last = std::min<std::int64_t>(gaps[gi].end.count() / g, slots);  // exclusive
    for (auto k = std::max<std::int64_t>(first, 0); k < last; ++k) slot_gap[k] = gi;
  }

  struct Option {
    std::int64_t slot;
    int cand;
    Cost base;            // candidate cost + penalty without the previous-placement term
    Millis extension;
    std::int64_t end_state;  // end slot in source time
  };

  // Base options per description. The penalty here is evaluated from slot
  // tables, independently of placement_penalty().
  auto options_for = [&](std::size_t i) {
    const auto* d = order[i];
    std::vector<Option> opts;
    std::int64_t lo, hi;
    if (d->lock_time) {
      lo = hi = detail::snap_to_grid(d->anchor_time, grid).count() / g;
    } else {
      lo = std::max<std::int64_t>(0, detail::ceil_div(std::max<std::int64_t>(
                                                          d->anchor_time.count() - cfg.placement_window.count(), 0), g));
      hi = std::min<std::int64_t>(slots - 1, (d->anchor_time.count() + cfg.placement_window.count()) / g);
    }
    for (std::int64_t s = lo; s <= hi && s < slots; ++s) {
      const int gi = slot_gap[s];
      if (gi < 0) continue;
      const Millis t = grid * s;
      if (!d->lock_time) {
        const Millis off = t > d->anchor_time ? t - d->anchor_time : d->anchor_time - t;
        if (off > cfg.placement_window) continue;
      }
      if (detail::shots_between(project.shots, t, d->anchor_time) > cfg.max_shot_crossings) continue;
      const GapSegment& gap = gaps[gi];
      for (int j = 0; j < static_cast<int>(table[i].size()); ++j) {
        const auto& sc = table[i][j];
        const std::int64_t len = detail::ceil_div(sc.candidate.duration.count(), g);
        const Millis end = grid * (s + len);
        Millis ext{0};
        if (end > gap.end) {
          if (cfg.mode != RenderMode::kExtendedInline || !gap.extendable) continue;
          ext = end - gap.end;
          if (ext > gap.max_extension) continue;
        }
        Cost base = detail::candidate_cost_units(sc) + detail::extension_cost(ext, cfg);
        if (gap.start > Millis{0} && t - gap.start < cfg.near_overlap_margin) base += near;
        if (gap.end < project.source_duration && gap.end + ext - end < cfg.near_overlap_margin) base += near;
        if (gap.label != AudioLabel::kMusic && gap.label != AudioLabel::kSilence)
          base += Cost::from_double(cfg.unlabeled_region_penalty * static_cast<double>(len));
        const std::int64_t end_state = detail::ceil_div((end - ext).count(), g);
        opts.push_back({s, j, base, ext, end_state});
      }
    }
    std::sort(opts.begin(), opts.end(), [&](const Option& a, const Option& b) {
      return detail::OptionKey{a.slot, table[i][a.cand].candidate.duration, a.cand} <
             detail::OptionKey{b.slot, table[i][b.cand].candidate.duration, b.cand};
    });
    return opts;
  };

  std::vector<std::vector<Option>> options(n);
  for (std::size_t i = 0; i < n; ++i) options[i] = options_for(i);

  // togo[i][state]: cheapest cost of descriptions i..n-1 given the previous
  // placement ends at slot (state - 1), or nothing placed yet (state 0).
  std::vector<std::vector<Cost>> togo(n + 1, std::vector<Cost>(states, Cost{}));
  std::vector<Cost> best_at(last_end + 1);
  std::vector<Cost> suffix(last_end + 2);
  for (std::size_t ii = n; ii-- > 0;) {
    const auto* d = order[ii];
    const auto& next = togo[ii + 1];
    std::fill(best_at.begin(), best_at.end(), Cost::infinite());
    for (const auto& o : options[ii]) {
      const Cost v = o.base + next[o.end_state + 1];
      if (v < best_at[o.slot]) best_at[o.slot] = v;
    }
    suffix[last_end + 1] = Cost::infinite();
    for (std::int64_t s = last_end; s >= 0; --s) suffix[s] = std::min(best_at[s], suffix[s + 1]);

    const Cost my_skip = d->lock_presence ? Cost::infinite() : skip;
    auto& cur = togo[ii];
    cur[0] = std::min(my_skip + next[0], suffix[0]);
    for (std::int64_t e = 0; e <= last_end; ++e) {
      const Cost far = suffix[std::min(e + margin_slots, last_end + 1)];
      const Cost close = suffix[e] + near;
      cur[e + 1] = std::min({my_skip + next[e + 1], far, close});
    }
  }

  if (togo[0][0].is_infinite())
    throw Error("infeasible", detail::describe_infeasible_locks(project, order, table, ctx));

  CompositionPlan plan;
  plan.mode = cfg.mode;
  std::int64_t state = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* d = order[i];
    const Cost target = togo[i][state];
    const auto& next = togo[i + 1];
    bool chosen = false;
    for (const auto& o : options[i]) {
      if (state > 0 && o.slot < state - 1) continue;
      Cost v = o.base + next[o.end_state + 1];
      if (state > 0 && o.slot - (state - 1) < margin_slots) v += near;
      if (v != target) continue;
      const auto& sc = table[i][o.cand];
      Cost penalty = o.base + Cost::micros(-detail::candidate_cost_units(sc).micros());
      if (state > 0 && o.slot - (state - 1) < margin_slots) penalty += near;
      detail::append_placed(plan, *d, o.cand, sc, grid * o.slot, o.extension, penalty);
      plan.total_cost += detail::candidate_cost_units(sc) + penalty;
      state = o.end_state + 1;
      chosen = true;
      break;
    }
    if (!chosen) {
      // Only the skip can realize the target now.
      plan.skipped.push_back(d->id);
      plan.entries.push_back({d->id, true, cfg.skip_cost, 0.0});
      plan.total_cost += skip;
    }
  }
  return plan;
}

/// Size limits for brute_force_optimize.
struct BruteForceLimits {
  std::size_t max_descriptions = 4;
  std::int64_t max_slots = 300;
  std::size_t max_candidates = 6;
};

/// Exhaustive search over every (skip | candidate x start) assignment, with
/// penalties from placement_penalty(). Options are visited in tie-break
/// order, so the first minimum found is the preferred plan; branches whose
/// lower bound cannot beat it are cut.
inline CompositionPlan brute_force_optimize(const Project& project, const std::vector<GapSegment>& gaps,
                                            const CandidateTable& table, const OptimizerConfig& cfg,
                                            BruteForceLimits limits = {}) {
  if (auto err = cfg.check(); !err.empty()) throw Error("validation", "optimizer config: " + err);
  const auto order = detail::draft_order(project);
  detail::check_table(order, table);
  const Millis grid = cfg.time_grid;
  const std::int64_t slots = project.source_duration.count() / grid.count();
  std::size_t widest = 0;
  for (const auto& row : table) widest = std::max(widest, row.size());
  if (order.size() > limits.max_descriptions || slots > limits.max_slots || widest > limits.max_candidates) {
    std::ostringstream msg;
    msg << "instance too large for brute force: " << order.size() << " descriptions (max "
        << limits.max_descriptions << "), " << slots << " slots (max " << limits.max_slots << "), "
        << widest << " candidates (max " << limits.max_candidates << ")";
    throw Error("too_large", msg.str());
  }
  if (cfg.mode == RenderMode::kExtended) return detail::extended_plan(order, table);

  const PlacementContext ctx{&project, &gaps, &cfg};
  const std::size_t n = order.size();

  struct Choice {
    int cand = -1;  // -1: skip
    std::int64_t slot = 0;
  };
  auto placed_of = [&](std::size_t i, const Choice& c) {
    PlacedDescription pd;
    pd.description_id = order[i]->id;
    pd.candidate_index = c.cand;
    pd.start = grid * c.slot;
    pd.duration = table[i][c.cand].candidate.duration;
    return pd;
  };
  auto skip_cost_of = [&](std::size_t i) {
    return order[i]->lock_presence ? Cost::infinite() : Cost::from_double(cfg.skip_cost);
  };
  // Every placement per description in tie-break order, then the skip.
  // A previous placement can only add penalty, so placements infeasible on
  // their own are dropped up front, and the cheapest lone cost bounds each
  // description from below.
  std::vector<std::vector<Choice>> choices(n);
  std::vector<Cost> lower(n + 1, Cost{});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<detail::OptionKey, Choice>> keyed;
    for (std::int64_t s = 0; s < slots; ++s)
      for (int j = 0; j < static_cast<int>(table[i].size()); ++j)
        keyed.push_back({{s, table[i][j].candidate.duration, j}, {j, s}});
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [k, c] : keyed)
      if (!placement_penalty(placed_of(i, c), nullptr, ctx).is_infinite()) choices[i].push_back(c);
    choices[i].push_back({-1, 0});
  }
  std::vector<Cost> alone(n);
  for (std::size_t i = 0; i < n; ++i) {
    Cost best = skip_cost_of(i);
    for (const auto& c : choices[i]) {
      if (c.cand < 0) continue;
      Cost v = detail::candidate_cost_units(table[i][c.cand]) + placement_penalty(placed_of(i, c), nullptr, ctx);
      best = std::min(best, v);
    }
    alone[i] = best;
  }
  for (std::size_t ii = n; ii-- > 0;) lower[ii] = alone[ii] + lower[ii + 1];

  std::vector<Choice> current(n), best_plan;
  Cost best = Cost::infinite();
  std::vector<PlacedDescription> stack;

  auto search = [&](auto&& self, std::size_t i, Cost partial, const PlacedDescription* prev) -> void {
    if (!best.is_infinite() && partial + lower[i] >= best) return;
    if (i == n) {
      best = partial;
      best_plan = current;
      return;
    }
    for (const auto& c : choices[i]) {
      if (c.cand < 0) {
        const Cost s = skip_cost_of(i);
        if (s.is_infinite()) continue;
        current[i] = c;
        self(self, i + 1, partial + s, prev);
        continue;
      }
      PlacedDescription pd = placed_of(i, c);
      const Cost p = placement_penalty(pd, prev, ctx);
      if (p.is_infinite()) continue;
      current[i] = c;
      self(self, i + 1, partial + detail::candidate_cost_units(table[i][c.cand]) + p, &pd);
    }
  };
  search(search, 0, Cost{}, nullptr);

  if (best.is_infinite())
    throw Error("infeasible", detail::describe_infeasible_locks(project, order, table, ctx));

  CompositionPlan plan;
  plan.mode = cfg.mode;
  std::optional<PlacedDescription> prev;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = best_plan[i];
    if (c.cand < 0) {
      plan.skipped.push_back(order[i]->id);
      plan.entries.push_back({order[i]->id, true, cfg.skip_cost, 0.0});
      plan.total_cost += Cost::from_double(cfg.skip_cost);
      continue;
    }
    PlacedDescription pd = placed_of(i, c);
    PlacementGeometry geo;
    const Cost p = placement_penalty(pd, prev ? &*prev : nullptr, ctx, &geo);
    const auto& sc = table[i][c.cand];
    detail::append_placed(plan, *order[i], c.cand, sc, pd.start, geo.extension, p);
    plan.total_cost += detail::candidate_cost_units(sc) + p;
    prev = plan.placed.back();
  }
  return plan;
}

struct PlanViolation {
  std::string description_id;
  std::string message;
};

/// Post-hoc checks that every plan must pass: placements stay clear of
/// speech and of each other, starts follow draft order, extensions stay
/// within their gap's cap, and locks are honoured.
inline std::vector<PlanViolation> check_plan(const CompositionPlan& plan, const Project& project,
                                             const std::vector<GapSegment>& gaps,
                                             Millis grid = Millis{100}) {
  std::vector<PlanViolation> out;
  std::set<std::string> seen;
  for (const auto& p : plan.placed) seen.insert(p.description_id);
  for (const auto& id : plan.skipped) {
    if (!seen.insert(id).second) out.push_back({id, "appears twice"});
    const auto* d = project.find_description(id);
    if (d && d->lock_presence) out.push_back({id, "presence-locked description was skipped"});
  }
  for (const auto& d : project.descriptions)
    if (!seen.count(d.id)) out.push_back({d.id, "missing from plan"});

  for (const auto& p : plan.placed) {
    const auto* d = project.find_description(p.description_id);
    if (!d) {
      out.push_back({p.description_id, "unknown description"});
      continue;
    }
    if (d->lock_text && !p.candidate.is_original(d->words.size()))
      out.push_back({p.description_id, "text-locked description was shortened"});
  }
  if (plan.mode == RenderMode::kExtended) return out;  // narration runs while the source is paused

  for (std::size_t k = 0; k < plan.placed.size(); ++k) {
    const auto& p = plan.placed[k];
    const auto* d = project.find_description(p.description_id);
    if (d && d->lock_time && p.start != detail::snap_to_grid(d->anchor_time, grid))
      out.push_back({p.description_id, "time-locked description moved off its anchor"});
    // Source-time footprint: narration beyond the gap end plays in inserted time.
    Millis src_end = p.start + p.duration - p.extension;
    const GapSegment* gap = nullptr;
    for (const auto& gs : gaps)
      if (gs.start <= p.start && p.start < gs.end) gap = &gs;
    if (!gap) {
      out.push_back({p.description_id, "starts inside speech"});
      continue;
    }
    if (p.extension > Millis{0}) {
      src_end = std::min(src_end, gap->end);
      if (!gap->extendable) out.push_back({p.description_id, "extends a non-extendable gap"});
      if (p.extension > gap->max_extension) out.push_back({p.description_id, "extension exceeds cap"});
    }
    if (src_end > gap->end) out.push_back({p.description_id, "overlaps speech"});
    if (k > 0) {
      const auto& q = plan.placed[k - 1];
      Millis q_end = q.start + q.duration - q.extension;
      if (q.extension > Millis{0}) {
        for (const auto& gs : gaps)
          if (gs.start <= q.start && q.start < gs.end) q_end = std::min(q_end, gs.end);
      }
      if (p.start < q_end) out.push_back({p.description_id, "overlaps description '" + q.description_id + "'"});
    }
  }
  return out;
}

}  // namespace adfit

#endif  // ADFIT_OPTIMIZER_HPP
