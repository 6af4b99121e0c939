// Verification driver: oracle scripts, linearizability of random histories,
// quiescent structure probes and shadow-log audits. Prints one JSON object
// per line and exits 0 only if every check passed.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rqmap/verify/scenarios.hpp"

namespace {

using json = nlohmann::json;
using namespace rqmap;
using namespace rqmap::verify;

struct common_args {
  std::uint64_t seed = 1;
  std::size_t threads = 4;
  std::size_t ops = 10000;
  key_type key_range = 64;
  std::string index = "none";
};

index_choice parse_index(const std::string &s) {
  if (s == "none") return index_choice::none;
  if (s == "skiplist") return index_choice::skiplist;
  throw CLI::ValidationError("--index", "expected none or skiplist");
}

void add_common(CLI::App *cmd, common_args &a) {
  cmd->add_option("--seed", a.seed, "random seed")->capture_default_str();
  cmd->add_option("--threads", a.threads, "worker threads")->capture_default_str();
  cmd->add_option("--ops", a.ops, "operations (per history for linearize)")->capture_default_str();
  cmd->add_option("--key-range", a.key_range, "keys are drawn from [1, key-range]")->capture_default_str();
  cmd->add_option("--index", a.index, "none or skiplist")->capture_default_str();
}

bool emit(json j) {
  const bool ok = j.value("pass", false);
  std::cout << j.dump() << std::endl;
  return ok;
}

bool run_oracle(const common_args &a) {
  return with_index(parse_index(a.index), [&]<typename Index>() {
    const auto r = run_oracle_script<Index>(a.seed, a.ops, a.key_range);
    return emit({{"check", "oracle"}, {"index", a.index}, {"seed", a.seed}, {"ops", r.ops},
                 {"mismatches", r.mismatches}, {"first_mismatch", r.first_mismatch},
                 {"pass", r.mismatches == 0}});
  });
}

bool run_linearize(const common_args &a, std::size_t histories) {
  if (a.threads < 2 || a.ops > 64) throw CLI::ValidationError("linearize needs --threads >= 2 and --ops <= 64");
  return with_index(parse_index(a.index), [&]<typename Index>() {
    const auto b = check_random_histories<Index>(histories, a.seed, a.threads, a.ops, a.key_range);
    return emit({{"check", "linearize"}, {"index", a.index}, {"seed", a.seed}, {"histories", b.histories},
                 {"accepted", b.accepted}, {"total_ops", b.total_ops},
                 {"overlapping_pairs", b.overlapping_pairs}, {"first_rejected_seed", b.first_rejected_seed},
                 {"pass", b.accepted == b.histories}});
  });
}

bool run_probe(const common_args &a, std::size_t probes) {
  return with_index(parse_index(a.index), [&]<typename Index>() {
    const auto r = run_probe_stress<Index>(a.threads, a.ops, a.key_range, probes, a.seed);
    json j{{"check", "probe"}, {"index", a.index}, {"seed", a.seed}, {"probes", r.probes},
           {"violations", r.violations.size()}, {"truncated_chains", r.truncated_chains},
           {"pass", r.violations.empty()}};
    if (!r.violations.empty()) j["first_violation"] = r.violations.front();
    return emit(j);
  });
}

bool run_audit(const common_args &a, std::size_t batch) {
  return with_index(parse_index(a.index), [&]<typename Index>() {
    reuse_stress_spec spec;
    spec.threads = a.threads;
    spec.ops = a.ops;
    spec.key_range = a.key_range;
    spec.seed = a.seed;
    spec.batch_size = batch;
    const auto r = run_reuse_stress<Index>(spec);
    const bool pass = r.audit.ok() && r.final_probe_ok;
    json j{{"check", "audit"},
           {"index", a.index},
           {"seed", a.seed},
           {"batch_size", batch},
           {"ops", r.ops},
           {"lifetimes", r.audit.lifetimes},
           {"reused_slots", r.audit.reused_slots},
           {"stale_caught", r.stale_caught},
           {"stale_missed", r.stale_missed},
           {"rollbacks", r.rollbacks},
           {"epoch_advances", r.epoch_advances},
           {"peak_unreclaimed", r.peak_unreclaimed},
           {"garbage_bound", r.audit.garbage_bound},
           {"violations", r.audit.violations.size()},
           {"pass", pass}};
    if (!r.audit.violations.empty()) j["first_violation"] = r.audit.violations.front();
    return emit(j);
  });
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"rqmap_verify: correctness checks for the range-query map"};
  app.require_subcommand(1);

  common_args oracle_args, lin_args, probe_args, audit_args;
  lin_args.threads = 3;
  lin_args.ops = 30;
  lin_args.key_range = 8;
  audit_args.key_range = 32;
  std::size_t histories = 100;
  std::size_t probes = 50;
  std::size_t batch = 64;

  auto *oracle = app.add_subcommand("oracle", "single-threaded script against a sorted-map oracle");
  add_common(oracle, oracle_args);
  auto *lin = app.add_subcommand("linearize", "random small concurrent histories through the checker");
  add_common(lin, lin_args);
  lin->add_option("--histories", histories, "number of histories")->capture_default_str();
  auto *probe = app.add_subcommand("probe", "pause a stress run and check structural invariants");
  add_common(probe, probe_args);
  probe->add_option("--probes", probes, "number of pauses")->capture_default_str();
  auto *audit = app.add_subcommand("audit", "forced-reuse stress with shadow-log auditing");
  add_common(audit, audit_args);
  audit->add_option("--batch-size", batch, "retire batch size, 1..64")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    bool ok = false;
    if (*oracle) ok = run_oracle(oracle_args);
    if (*lin) ok = run_linearize(lin_args, histories);
    if (*probe) ok = run_probe(probe_args, probes);
    if (*audit) ok = run_audit(audit_args, batch);
    return ok ? 0 : 1;
  } catch (const CLI::Error &e) {
    return app.exit(e);
  } catch (const std::exception &e) {
    std::cout << json{{"error", e.what()}, {"pass", false}}.dump() << std::endl;
    return 2;
  }
}
