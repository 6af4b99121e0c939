#pragma once

/// \file
/// Audit of a shadow-mode run: per-slot lifetime disjointness, the bound on
/// retired-but-unreclaimed slots, and stale reads that escaped the guards.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rqmap/common.hpp"
#include "rqmap/object_pool.hpp"

namespace rqmap::verify {

struct audit_input {
  std::vector<lifetime_event> log;
  std::uint64_t stale_caught = 0;
  std::uint64_t stale_missed = 0;
  std::size_t peak_unreclaimed = 0;
  std::size_t threads = 1;
};

struct audit_report {
  std::vector<std::string> violations;
  std::size_t lifetimes = 0;
  std::size_t reused_slots = 0;
  std::size_t garbage_bound = 0;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

[[nodiscard]] inline audit_report audit_shadow_log(const audit_input &in) {
  audit_report r;
  r.garbage_bound = retire_batch_capacity * in.threads;

  struct lifetime {
    std::uint64_t tag = 0;
    epoch_type birth = 0;
    epoch_type retired = 0;
    int births = 0;
    int retires = 0;
  };
  std::map<std::size_t, std::map<std::uint64_t, lifetime>> slots;
  for (const auto &e : in.log) {
    auto &l = slots[e.slot][e.tag];
    l.tag = e.tag;
    if (e.kind == lifetime_event_kind::birth) {
      l.birth = e.epoch;
      ++l.births;
    } else {
      l.retired = e.epoch;
      ++l.retires;
    }
  }

  auto where = [](std::size_t slot, const lifetime &l) {
    return "slot " + std::to_string(slot) + " tag " + std::to_string(l.tag) + " [birth " +
           std::to_string(l.birth) + ", retired " + std::to_string(l.retired) + "]";
  };

  for (const auto &[slot, lives] : slots) {
    if (lives.size() > 1) ++r.reused_slots;
    const lifetime *prev = nullptr;
    for (const auto &[tag, l] : lives) {
      ++r.lifetimes;
      if (l.births != 1) r.violations.push_back("lifetime without exactly one birth: " + where(slot, l));
      if (l.retires > 1) r.violations.push_back("slot retired twice in one lifetime: " + where(slot, l));
      if (l.retires == 1 && l.retired < l.birth)
        r.violations.push_back("retired before birth: " + where(slot, l));
      if (prev != nullptr) {
        if (prev->retires == 0)
          r.violations.push_back("slot reused without retirement: " + where(slot, *prev) + " then " +
                                 where(slot, l));
        else if (l.birth <= prev->retired)
          r.violations.push_back("lifetimes share an epoch: " + where(slot, *prev) + " then " +
                                 where(slot, l));
      }
      prev = &l;
    }
  }

  if (in.stale_missed != 0)
    r.violations.push_back(std::to_string(in.stale_missed) + " stale reads passed validation");
  if (in.peak_unreclaimed > r.garbage_bound)
    r.violations.push_back("peak retired-unreclaimed " + std::to_string(in.peak_unreclaimed) +
                           " exceeds " + std::to_string(r.garbage_bound));
  return r;
}

}  // namespace rqmap::verify
