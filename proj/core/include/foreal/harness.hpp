#pragma once

#include <optional>
#include <string>
#include <vector>

#include "foreal/accounting.hpp"
#include "foreal/engine.hpp"

namespace foreal {

struct Problem {
  std::string id;
  std::string question;
  std::string answer;  // gold, canonicalized
};

// Dataset JSONL: one {"id", "question", "answer"} object per line.
std::vector<Problem> load_dataset(const std::string& path);

// Last balanced \boxed{...} group if present, else the last standalone
// number, else absent. The result is canonicalized.
std::optional<std::string> extract_answer(const std::string& response_text);

// Multiple-choice variant: last standalone capital letter A-E.
std::optional<std::string> extract_choice(const std::string& response_text);

// Trim whitespace; strip leading zeros and a redundant '+' on integers.
std::string canonicalize_answer(std::string answer);

// One (n, p) configuration of a sweep. Empty lead_count means unbounded.
struct GridPoint {
  std::optional<std::uint32_t> lead_count;
  double lead_prob = 0.0;

  bool operator==(const GridPoint&) const = default;
};

std::string grid_n_string(const std::optional<std::uint32_t>& lead_count);
std::optional<std::uint32_t> grid_n_parse(const std::string& text);

struct RunResult {
  std::string problem_id;
  GridPoint config;
  std::uint32_t hit_threshold = 5;
  std::uint64_t seed = 0;
  std::optional<std::string> predicted;
  bool correct = false;
  std::uint64_t gen_len = 0;
  double lead_ratio = 0.0;
  double tflops = 0.0;
  std::string trace_path;
};

struct SweepReportRow {
  GridPoint config;
  std::size_t problem_count = 0;
  double accuracy = 0.0;  // percent
  double mean_length = 0.0;
  double mean_lead_ratio = 0.0;
  double mean_tflops = 0.0;
};

struct SweepOptions {
  std::string dataset_id = "dataset";
  std::uint32_t hit_threshold = 5;
  bool force_first_lead = false;
  std::uint32_t max_new_tokens = 256;
  SamplingParams sampling;
  AccountingMode accounting = AccountingMode::GeneratorOnly;
  std::uint64_t master_seed = 0;
  std::string store_path;  // append-only results JSONL; empty disables
  std::string trace_dir;   // per-run trace files; empty disables
  unsigned jobs = 1;
};

struct SweepOutcome {
  std::vector<RunResult> results;
  std::vector<SweepReportRow> report;
  std::size_t decode_calls = 0;  // fresh sessions this invocation ran
};

// Per-problem seeds derive from hash(master_seed, problem id); results
// already present in the store are reused without decoding.
SweepOutcome run_sweep(const std::vector<Problem>& problems,
                       const ModelHandle& leader, const ModelHandle& draft,
                       const std::vector<GridPoint>& grid,
                       const SweepOptions& options);

// Single-model reference row with the same seeds and scoring as run_sweep.
SweepReportRow run_baseline(const ModelHandle& model, bool as_leader,
                            const std::vector<Problem>& problems,
                            const SweepOptions& options);

// Report CSV: "config_n,config_p,accuracy,mean_length,mean_lead_ratio,
// mean_tflops".
void write_report_csv(const std::vector<SweepReportRow>& rows,
                      std::ostream& out);
std::vector<SweepReportRow> read_report_csv(std::istream& in);

struct TradeoffPoint {
  double cost = 0.0;
  double accuracy = 0.0;

  bool operator==(const TradeoffPoint&) const = default;
};

// Subset not dominated by any other point (q dominates r iff q.cost <=
// r.cost and q.accuracy >= r.accuracy with at least one strict), sorted by
// cost ascending.
std::vector<TradeoffPoint> pareto_frontier(
    const std::vector<TradeoffPoint>& points);

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& id);

}  // namespace foreal
