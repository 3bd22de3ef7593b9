// foreal: collaborative fast/slow decoding, misalignment analysis, FLOPs
// accounting and sweep tooling over toy or remote models.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "foreal/accounting.hpp"
#include "foreal/engine.hpp"
#include "foreal/errors.hpp"
#include "foreal/harness.hpp"
#include "foreal/misalign.hpp"
#include "foreal/provider.hpp"
#include "foreal/remote.hpp"

namespace {

using namespace foreal;

ModelHandle load_model(const std::string& source,
                       const std::optional<std::string>& vocab_path) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    return connect_remote_model(source, vocab_path);
  }
  return build_toy_model(load_toy_spec(source));
}

struct ModelArgs {
  std::string leader;
  std::string draft;
  std::optional<std::string> vocab_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--leader", leader,
                    "Leading model: toy-spec path or server URL")
        ->required();
    cmd->add_option("--draft", draft,
                    "Draft model: toy-spec path or server URL")
        ->required();
    cmd->add_option("--vocab", vocab_path,
                    "Token-text JSON for remote models (shared)");
  }

  std::pair<ModelHandle, ModelHandle> load() const {
    return {load_model(leader, vocab_path), load_model(draft, vocab_path)};
  }
};

struct PolicyArgs {
  std::string lead_count = "15";
  double lead_prob = 1.0;
  std::uint32_t hit_threshold = 5;
  bool force_first_lead = true;
  std::uint32_t max_new_tokens = 16384;
  bool eq4_counting_start = false;
  bool first_paragraph_full = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lead-count", lead_count,
                    "Minimum Leader tokens per led sentence, or 'inf'")
        ->capture_default_str();
    cmd->add_option("--lead-prob", lead_prob,
                    "Probability that a sentence is Leader-led")
        ->capture_default_str();
    cmd->add_option("--hit-threshold", hit_threshold,
                    "Consecutive top-1 agreements required for handoff")
        ->capture_default_str();
    cmd->add_option("--force-first-lead", force_first_lead,
                    "Force the first sentence's gate to 1")
        ->capture_default_str();
    cmd->add_option("--max-new-tokens", max_new_tokens, "Generation cap")
        ->capture_default_str();
    cmd->add_flag("--eq4-counting-start", eq4_counting_start,
                  "Start agreement checks at lambda > n instead of n - k");
    cmd->add_flag("--first-paragraph-full", first_paragraph_full,
                  "Keep the Leader until the first newline boundary");
  }

  PolicyConfig to_config() const {
    PolicyConfig cfg;
    cfg.lead_count = grid_n_parse(lead_count);
    cfg.lead_probability = lead_prob;
    cfg.hit_threshold = hit_threshold;
    cfg.force_first_lead = force_first_lead;
    cfg.max_new_tokens = max_new_tokens;
    cfg.eq4_counting_start = eq4_counting_start;
    cfg.first_paragraph_full = first_paragraph_full;
    return cfg;
  }
};

struct SamplingArgs {
  SamplingParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--temperature", params.temperature)->capture_default_str();
    cmd->add_option("--top-p", params.top_p)->capture_default_str();
    cmd->add_option("--top-k", params.top_k)->capture_default_str();
    cmd->add_option("--seed", params.seed)->capture_default_str();
  }
};

std::vector<GridPoint> parse_grid(const std::string& text) {
  std::vector<GridPoint> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("grid entries must be n:p, got '" + item + "'");
    }
    GridPoint point;
    point.lead_count = grid_n_parse(item.substr(0, colon));
    point.lead_prob = std::stod(item.substr(colon + 1));
    grid.push_back(point);
  }
  if (grid.empty()) throw ConfigError("empty grid");
  return grid;
}

std::vector<TokenId> read_prompt_ids(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompt-ids file: " + path);
  std::vector<TokenId> ids;
  TokenId id;
  while (in >> id) ids.push_back(id);
  return ids;
}

bool has_token_texts(const Vocabulary& vocab) {
  for (const std::string& t : vocab.token_text) {
    if (!t.empty()) return true;
  }
  return false;
}

int cmd_decode(const ModelArgs& models, const PolicyArgs& policy,
               const SamplingArgs& sampling, const std::string& prompt_text,
               const std::string& prompt_ids_path,
               const std::string& trace_out) {
  auto [leader, draft] = models.load();
  std::vector<TokenId> prompt;
  if (!prompt_ids_path.empty()) {
    prompt = read_prompt_ids(prompt_ids_path);
  } else if (!prompt_text.empty()) {
    prompt = greedy_tokenize(leader->vocab(), prompt_text);
  } else {
    throw ConfigError("decode needs --prompt or --prompt-ids");
  }

  DecodeTrace trace =
      decode(leader, draft, prompt, policy.to_config(), sampling.params);
  if (!trace.valid) {
    std::cerr << "provider failure; partial trace is invalid\n";
    return 1;
  }
  if (!trace_out.empty()) write_trace_file(trace, trace_out);

  std::vector<TokenId> ids = trace.token_ids();
  if (has_token_texts(leader->vocab())) {
    std::cout << detokenize(leader->vocab(), ids) << '\n';
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::cout << (i ? " " : "") << ids[i];
    }
    std::cout << '\n';
  }
  std::cerr << "tokens=" << trace.records.size()
            << " lead_ratio=" << lead_ratio(trace)
            << " stop=" << to_string(trace.stop_reason) << '\n';
  return 0;
}

int cmd_analyze(const ModelArgs& models, const std::string& prompts_path,
                const std::string& out_dir, std::uint32_t max_new_tokens,
                std::uint64_t bucket_width, std::size_t top_m) {
  auto [leader, draft] = models.load();
  std::ifstream in(prompts_path);
  if (!in) throw ConfigError("cannot open prompts file: " + prompts_path);
  std::filesystem::create_directories(out_dir);

  std::vector<AlignmentReport> reports;
  std::vector<std::vector<std::uint64_t>> segmentations;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<TokenId> prompt = greedy_tokenize(leader->vocab(), line);
    std::vector<TokenId> response =
        greedy_response(leader, prompt, max_new_tokens);
    reports.push_back(aligned_positions(leader, draft, prompt, response));
    segmentations.push_back(segment_sentences(leader->vocab(), response));
  }
  if (reports.empty()) throw ConfigError("prompts file is empty");

  auto out_path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  {
    std::ofstream out(out_path("response_curve.csv"), std::ios::binary);
    write_curve_csv(response_level_curve(reports, bucket_width), out);
  }
  {
    std::ofstream out(out_path("sentence_curve.csv"), std::ios::binary);
    write_curve_csv(sentence_level_curve(reports, segmentations), out);
  }
  {
    std::ofstream out(out_path("misaligned_freq.csv"), std::ios::binary);
    write_frequency_csv(
        misaligned_frequency_table(reports, leader->vocab(), top_m), out);
  }
  std::cerr << "analyzed " << reports.size() << " prompts into " << out_dir
            << '\n';
  return 0;
}

int cmd_sweep(const ModelArgs& models, const std::string& dataset_path,
              const std::string& grid_text, SweepOptions options,
              const std::string& out_dir) {
  auto [leader, draft] = models.load();
  std::vector<Problem> problems = load_dataset(dataset_path);
  std::vector<GridPoint> grid = parse_grid(grid_text);

  std::string root = out_dir;
  if (root.empty()) {
    const char* cache = std::getenv("FOREAL_CACHE_DIR");
    root = cache ? cache : ".";
  }
  std::filesystem::create_directories(root);
  options.dataset_id = std::filesystem::path(dataset_path).stem().string();
  options.store_path = (std::filesystem::path(root) / "results.jsonl").string();
  options.trace_dir = (std::filesystem::path(root) / "traces").string();

  SweepOutcome outcome = run_sweep(problems, leader, draft, grid, options);
  std::string report_path =
      (std::filesystem::path(root) / "report.csv").string();
  {
    std::ofstream out(report_path, std::ios::binary);
    write_report_csv(outcome.report, out);
  }
  std::cerr << "ran " << outcome.decode_calls << " fresh sessions over "
            << grid.size() << " configs; report at " << report_path << '\n';
  return 0;
}

int cmd_flops(bool prefill_mode, bool decode_mode, bool total_mode,
              std::uint64_t s, std::uint64_t prompt_len, std::uint64_t gen_len,
              const ModelArchSpec& arch, const std::string& trace_path,
              const std::string& arch_file, const std::string& leader_arch_name,
              const std::string& draft_arch_name, const std::string& mode) {
  if (!trace_path.empty()) {
    if (arch_file.empty() || leader_arch_name.empty() ||
        draft_arch_name.empty()) {
      throw ConfigError(
          "--trace needs --arch-file, --leader-arch and --draft-arch");
    }
    auto archs = load_arch_file(arch_file);
    auto find = [&](const std::string& name) {
      auto it = archs.find(name);
      if (it == archs.end()) {
        throw ConfigError("unknown model in arch file: " + name);
      }
      return it->second;
    };
    DecodeTrace trace = read_trace_file(trace_path);
    MixedFlops result =
        mixed_flops(trace, find(leader_arch_name), find(draft_arch_name),
                    accounting_mode_from_string(mode));
    std::cout << flops_to_string(result.total()) << '\n';
    std::cerr << "leader=" << flops_to_string(result.leader)
              << " draft=" << flops_to_string(result.draft)
              << " tflops=" << format_tflops(to_tflops(result.total())) << '\n';
    return 0;
  }
  if (prefill_mode) {
    std::cout << flops_to_string(flops_prefill(s, arch)) << '\n';
  } else if (decode_mode) {
    std::cout << flops_to_string(flops_decode(s, arch)) << '\n';
  } else if (total_mode) {
    std::cout << flops_to_string(flops_total(prompt_len, gen_len, arch)) << '\n';
  } else {
    throw ConfigError("pick one of --prefill, --decode, --total or --trace");
  }
  return 0;
}

int cmd_frontier(const std::string& report_path, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw ConfigError("cannot open report: " + report_path);

  std::vector<TradeoffPoint> points;
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("empty report file");
  if (header.rfind("config_n", 0) == 0) {
    in.seekg(0);
    for (const SweepReportRow& row : read_report_csv(in)) {
      points.push_back({row.mean_tflops, row.accuracy});
    }
  } else if (header.rfind("cost", 0) == 0) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw ValidationError("points CSV rows must be cost,accuracy");
      }
      points.push_back(
          {std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
  } else {
    throw ValidationError("unrecognized CSV header: " + header);
  }
  if (points.empty()) throw ConfigError("no points in " + report_path);

  std::vector<TradeoffPoint> frontier = pareto_frontier(points);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw ConfigError("cannot open output: " + out_path);
    out = &file;
  }
  *out << "cost,accuracy\n";
  for (const TradeoffPoint& p : frontier) {
    char a[64], b[64];
    auto ra = std::to_chars(a, a + sizeof(a), p.cost);
    auto rb = std::to_chars(b, b + sizeof(b), p.accuracy);
    *out << std::string(a, ra.ptr) << ',' << std::string(b, rb.ptr) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FoReaL collaborative decoding toolkit"};
  app.require_subcommand(1);

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "Run a collaborative session");
  ModelArgs decode_models;
  PolicyArgs decode_policy;
  SamplingArgs decode_sampling;
  std::string prompt_text, prompt_ids_path, trace_out;
  decode_models.attach(decode_cmd);
  decode_policy.attach(decode_cmd);
  decode_sampling.attach(decode_cmd);
  decode_cmd->add_option("--prompt", prompt_text, "Inline prompt text (toy)");
  decode_cmd->add_option("--prompt-ids", prompt_ids_path,
                         "File of whitespace-separated token ids");
  decode_cmd->add_option("--trace-out", trace_out, "Trace JSONL output path");

  // analyze
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Token-misalignment diagnostics");
  ModelArgs analyze_models;
  std::string prompts_path, analyze_out = "analysis";
  std::uint32_t analyze_max_new = 256;
  std::uint64_t bucket_width = 64;
  std::size_t top_m = 50;
  analyze_models.attach(analyze_cmd);
  analyze_cmd->add_option("--prompts", prompts_path, "Prompts file, one per line")
      ->required();
  analyze_cmd->add_option("--out", analyze_out, "Output directory")
      ->capture_default_str();
  analyze_cmd->add_option("--max-new-tokens", analyze_max_new)
      ->capture_default_str();
  analyze_cmd->add_option("--bucket-width", bucket_width)->capture_default_str();
  analyze_cmd->add_option("--top-m", top_m)->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "(n, p) grid benchmark");
  ModelArgs sweep_models;
  SamplingArgs sweep_sampling;
  std::string dataset_path, grid_text, sweep_out, accounting = "generator-only";
  SweepOptions sweep_options;
  sweep_models.attach(sweep_cmd);
  sweep_sampling.attach(sweep_cmd);
  sweep_cmd->add_option("--dataset", dataset_path, "Problem JSONL")->required();
  sweep_cmd->add_option("--grid", grid_text, "Comma list of n:p, n may be inf")
      ->required();
  sweep_cmd->add_option("--hit-threshold", sweep_options.hit_threshold)
      ->capture_default_str();
  sweep_cmd->add_option("--force-first-lead", sweep_options.force_first_lead)
      ->capture_default_str();
  sweep_cmd->add_option("--max-new-tokens", sweep_options.max_new_tokens)
      ->capture_default_str();
  sweep_cmd->add_option("--master-seed", sweep_options.master_seed)
      ->capture_default_str();
  sweep_cmd->add_option("--accounting", accounting)
      ->check(CLI::IsMember({"generator-only", "full"}))
      ->capture_default_str();
  sweep_cmd->add_option("--jobs", sweep_options.jobs)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out,
                        "Output root (default $FOREAL_CACHE_DIR or .)");

  // flops
  auto* flops_cmd = app.add_subcommand("flops", "Evaluate the cost formulas");
  bool prefill_mode = false, decode_mode = false, total_mode = false;
  std::uint64_t flops_s = 1, flops_prompt = 1, flops_gen = 0;
  ModelArchSpec flops_arch;
  std::string flops_trace, flops_arch_file, flops_leader_arch, flops_draft_arch;
  std::string flops_mode = "generator-only";
  flops_cmd->add_flag("--prefill", prefill_mode, "Prefill cost at length --s");
  flops_cmd->add_flag("--decode", decode_mode, "Single-token cost at cache --s");
  flops_cmd->add_flag("--total", total_mode,
                      "Prefill plus decode over --prompt-len/--gen-len");
  flops_cmd->add_option("--s", flops_s)->capture_default_str();
  flops_cmd->add_option("--prompt-len", flops_prompt)->capture_default_str();
  flops_cmd->add_option("--gen-len", flops_gen)->capture_default_str();
  flops_cmd->add_option("--hidden", flops_arch.hidden)->capture_default_str();
  flops_cmd->add_option("--ffn", flops_arch.ffn)->capture_default_str();
  flops_cmd->add_option("--heads", flops_arch.heads)->capture_default_str();
  flops_cmd->add_option("--trace", flops_trace, "Account a trace file instead");
  flops_cmd->add_option("--arch-file", flops_arch_file);
  flops_cmd->add_option("--leader-arch", flops_leader_arch);
  flops_cmd->add_option("--draft-arch", flops_draft_arch);
  flops_cmd->add_option("--accounting", flops_mode)
      ->check(CLI::IsMember({"generator-only", "full"}))
      ->capture_default_str();

  // frontier
  auto* frontier_cmd =
      app.add_subcommand("frontier", "Pareto frontier of a report CSV");
  std::string frontier_report, frontier_out;
  frontier_cmd->add_option("--report", frontier_report, "Report or points CSV")
      ->required();
  frontier_cmd->add_option("--out", frontier_out, "Frontier CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*decode_cmd) {
      return cmd_decode(decode_models, decode_policy, decode_sampling,
                        prompt_text, prompt_ids_path, trace_out);
    }
    if (*analyze_cmd) {
      return cmd_analyze(analyze_models, prompts_path, analyze_out,
                         analyze_max_new, bucket_width, top_m);
    }
    if (*sweep_cmd) {
      sweep_options.sampling = sweep_sampling.params;
      sweep_options.accounting = accounting_mode_from_string(accounting);
      return cmd_sweep(sweep_models, dataset_path, grid_text, sweep_options,
                       sweep_out);
    }
    if (*flops_cmd) {
      return cmd_flops(prefill_mode, decode_mode, total_mode, flops_s,
                       flops_prompt, flops_gen, flops_arch, flops_trace,
                       flops_arch_file, flops_leader_arch, flops_draft_arch,
                       flops_mode);
    }
    if (*frontier_cmd) {
      return cmd_frontier(frontier_report, frontier_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
