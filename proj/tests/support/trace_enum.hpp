// Test-only exhaustive agreement check between the incremental reward monitor
// and the recursive finite-trace oracle. Event streams enumerate, per tick,
// all 8 subsets of one role-appropriate event bit per color (targets emit
// collection events, enemies and bystanders emit collision events), filtered
// so that no collection event fires twice.
#pragma once

#include <string>
#include <vector>

#include "composenet/tasklang.hpp"

namespace trace_enum {

struct AgreementResult {
  long long traces = 0;
  long long mismatches = 0;
  std::string first_mismatch;
};

inline AgreementResult check_monitor_against_oracle(const composenet::TaskSpec& spec,
                                                    int max_len) {
  using namespace composenet;
  AgreementResult result;

  for (int len = 1; len <= max_len; ++len) {
    long long count = 1;
    for (int i = 0; i < len; ++i) count *= 8;
    for (long long code = 0; code < count; ++code) {
      // decode the stream
      std::vector<TickProps> stream(static_cast<size_t>(len));
      long long rest = code;
      bool valid = true;
      std::array<int, 3> collect_count{};
      for (int t = 0; t < len; ++t) {
        const int mask = static_cast<int>(rest % 8);
        rest /= 8;
        for (int c = 0; c < 3; ++c) {
          if (!(mask & (1 << c))) continue;
          if (spec.roles[static_cast<size_t>(c)] == Role::Target) {
            stream[static_cast<size_t>(t)].collected[static_cast<size_t>(c)] = true;
            if (++collect_count[static_cast<size_t>(c)] > 1) valid = false;
          } else {
            stream[static_cast<size_t>(t)].collided[static_cast<size_t>(c)] = true;
          }
        }
      }
      if (!valid) continue;
      ++result.traces;

      // run the monitor over the stream, stopping at done
      MonitorState mon;
      size_t consumed = 0;
      for (int t = 0; t < len && !mon.done; ++t) {
        EventSet ev;
        ev.collected = stream[static_cast<size_t>(t)].collected;
        ev.colliding = stream[static_cast<size_t>(t)].collided;
        monitor_step(mon, spec, ev, /*truncated=*/false);
        consumed = static_cast<size_t>(t) + 1;
      }

      const std::vector<TickProps> prefix(stream.begin(),
                                          stream.begin() + static_cast<long>(consumed));
      const TraceVerdict verdict = brute_force_satisfies(spec.formula, prefix);

      bool agree = false;
      if (mon.done && mon.status == MonitorStatus::Success)
        agree = verdict == TraceVerdict::Satisfied;
      else if (mon.done && mon.status == MonitorStatus::Failure)
        agree = verdict == TraceVerdict::Violated;
      else
        agree = verdict == TraceVerdict::Undetermined;

      if (!agree) {
        ++result.mismatches;
        if (result.first_mismatch.empty()) {
          std::string desc = spec.formula.str() + " len=" + std::to_string(len) +
                             " code=" + std::to_string(code) +
                             " verdict=" + to_string(verdict) + " monitor=";
          desc += mon.done ? (mon.status == MonitorStatus::Success ? "success" : "failure")
                           : "running";
          result.first_mismatch = desc;
        }
      }
    }
  }
  return result;
}

// Every supported task shape: 6 skills, 6 while, 3 or, 3 and, 6 then, 3 + 3
// hierarchies.
inline std::vector<std::string> all_supported_tasks() {
  using namespace composenet;
  std::vector<std::string> out;
  const char letters[3] = {'r', 'g', 'b'};
  for (char c : letters) {
    out.push_back(std::string("F ") + c);
    out.push_back(std::string("G !") + c);
  }
  for (char p : letters)
    for (char q : letters) {
      if (p == q) continue;
      out.push_back(std::string("!") + p + " U " + q);   // while
      out.push_back(std::string("F(") + p + " & F " + q + ")");  // then
    }
  out.push_back("F r | F g");
  out.push_back("F r | F b");
  out.push_back("F g | F b");
  out.push_back("G !r & G !g");
  out.push_back("G !r & G !b");
  out.push_back("G !g & G !b");
  out.push_back("(!g & !b) U r");
  out.push_back("(!r & !b) U g");
  out.push_back("(!r & !g) U b");
  out.push_back("!b U (r | g)");
  out.push_back("!g U (r | b)");
  out.push_back("!r U (g | b)");
  return out;
}

}  // namespace trace_enum
