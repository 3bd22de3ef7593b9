#include "foreal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"

namespace foreal {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool is_integer_literal(const std::string& s) {
  std::size_t i = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

// Store key for resumable sweeps.
std::string run_key(const std::string& dataset, const GridPoint& cfg,
                    std::uint32_t k, const std::string& problem,
                    std::uint64_t seed) {
  return dataset + "|" + grid_n_string(cfg.lead_count) + "|" +
         format_double(cfg.lead_prob) + "|" + std::to_string(k) + "|" +
         problem + "|" + std::to_string(seed);
}

ordered_json result_to_json(const std::string& dataset, const RunResult& r) {
  ordered_json j;
  j["dataset"] = dataset;
  if (r.config.lead_count) {
    j["n"] = *r.config.lead_count;
  } else {
    j["n"] = nullptr;
  }
  j["p"] = r.config.lead_prob;
  j["k"] = r.hit_threshold;
  j["problem"] = r.problem_id;
  j["seed"] = r.seed;
  if (r.predicted) {
    j["predicted"] = *r.predicted;
  } else {
    j["predicted"] = nullptr;
  }
  j["correct"] = r.correct;
  j["gen_len"] = r.gen_len;
  j["lead_ratio"] = r.lead_ratio;
  j["tflops"] = r.tflops;
  j["trace"] = r.trace_path;
  return j;
}

RunResult result_from_json(const ordered_json& j) {
  RunResult r;
  if (!j.at("n").is_null()) r.config.lead_count = j.at("n").get<std::uint32_t>();
  r.config.lead_prob = j.at("p").get<double>();
  r.hit_threshold = j.at("k").get<std::uint32_t>();
  r.problem_id = j.at("problem").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("predicted").is_null()) {
    r.predicted = j.at("predicted").get<std::string>();
  }
  r.correct = j.at("correct").get<bool>();
  r.gen_len = j.at("gen_len").get<std::uint64_t>();
  r.lead_ratio = j.at("lead_ratio").get<double>();
  r.tflops = j.at("tflops").get<double>();
  r.trace_path = j.at("trace").get<std::string>();
  return r;
}

SweepReportRow aggregate(const GridPoint& cfg,
                         const std::vector<RunResult>& results) {
  SweepReportRow row;
  row.config = cfg;
  row.problem_count = results.size();
  std::size_t correct = 0;
  double length_sum = 0.0, ratio_sum = 0.0, tflops_sum = 0.0;
  for (const RunResult& r : results) {
    correct += r.correct ? 1 : 0;
    length_sum += static_cast<double>(r.gen_len);
    ratio_sum += r.lead_ratio;
    tflops_sum += r.tflops;
  }
  double count = static_cast<double>(results.size());
  row.accuracy = 100.0 * static_cast<double>(correct) / count;
  row.mean_length = length_sum / count;
  row.mean_lead_ratio = ratio_sum / count;
  row.mean_tflops = tflops_sum / count;
  return row;
}

}  // namespace

std::vector<Problem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  std::vector<Problem> out;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    Problem p;
    try {
      p.id = j.at("id").get<std::string>();
      p.question = j.at("question").get<std::string>();
      p.answer = j.at("answer").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) +
                            ": missing field: " + e.what());
    }
    if (p.answer.empty()) {
      throw ValidationError("dataset line " + std::to_string(line_no) +
                            ": empty answer");
    }
    auto [it, inserted] = seen.emplace(p.id, line_no);
    if (!inserted) {
      throw ValidationError("dataset line " + std::to_string(line_no) +
                            ": duplicate id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string canonicalize_answer(std::string answer) {
  answer = trim(answer);
  if (is_integer_literal(answer)) {
    bool negative = answer[0] == '-';
    std::size_t i = (answer[0] == '-' || answer[0] == '+') ? 1 : 0;
    while (i + 1 < answer.size() && answer[i] == '0') ++i;
    std::string digits = answer.substr(i);
    if (digits == "0") return "0";
    return negative ? "-" + digits : digits;
  }
  return answer;
}

std::optional<std::string> extract_answer(const std::string& response_text) {
  // Last balanced \boxed{...} group.
  std::optional<std::string> boxed;
  const std::string marker = "\\boxed{";
  std::size_t pos = 0;
  while ((pos = response_text.find(marker, pos)) != std::string::npos) {
    std::size_t open = pos + marker.size() - 1;
    int depth = 0;
    std::size_t close = std::string::npos;
    for (std::size_t i = open; i < response_text.size(); ++i) {
      if (response_text[i] == '{') ++depth;
      if (response_text[i] == '}') {
        --depth;
        if (depth == 0) {
          close = i;
          break;
        }
      }
    }
    if (close == std::string::npos) break;  // unbalanced; stop scanning
    boxed = response_text.substr(open + 1, close - open - 1);
    pos = close + 1;
  }
  if (boxed) return canonicalize_answer(*boxed);

  // Else the last standalone number.
  std::optional<std::string> number;
  for (std::size_t i = 0; i < response_text.size(); ++i) {
    char c = response_text[i];
    bool sign = (c == '-' || c == '+') && i + 1 < response_text.size() &&
                std::isdigit(static_cast<unsigned char>(response_text[i + 1]));
    if (!sign && !std::isdigit(static_cast<unsigned char>(c))) continue;
    if (i > 0) {
      char prev = response_text[i - 1];
      if (std::isdigit(static_cast<unsigned char>(prev)) || prev == '.') {
        continue;  // inside a number already consumed
      }
    }
    std::size_t j = i + (sign ? 1 : 0);
    std::size_t start = i;
    while (j < response_text.size() &&
           std::isdigit(static_cast<unsigned char>(response_text[j]))) {
      ++j;
    }
    if (j < response_text.size() && response_text[j] == '.' &&
        j + 1 < response_text.size() &&
        std::isdigit(static_cast<unsigned char>(response_text[j + 1]))) {
      ++j;
      while (j < response_text.size() &&
             std::isdigit(static_cast<unsigned char>(response_text[j]))) {
        ++j;
      }
    }
    number = response_text.substr(start, j - start);
    i = j - 1;
  }
  if (number) return canonicalize_answer(*number);
  return std::nullopt;
}

std::optional<std::string> extract_choice(const std::string& response_text) {
  std::optional<std::string> choice;
  for (std::size_t i = 0; i < response_text.size(); ++i) {
    char c = response_text[i];
    if (c < 'A' || c > 'E') continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(
                                 response_text[i - 1]));
    bool right_ok = i + 1 == response_text.size() ||
                    !std::isalnum(static_cast<unsigned char>(
                        response_text[i + 1]));
    if (left_ok && right_ok) choice = std::string(1, c);
  }
  return choice;
}

std::string grid_n_string(const std::optional<std::uint32_t>& lead_count) {
  return lead_count ? std::to_string(*lead_count) : "inf";
}

std::optional<std::uint32_t> grid_n_parse(const std::string& text) {
  if (text == "inf" || text == "unbounded") return std::nullopt;
  std::uint32_t value = 0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError("bad lead count: " + text);
  }
  return value;
}

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& id) {
  // FNV-1a over the id, folded with the master seed.
  std::uint64_t h = 1469598103934665603ull ^ master_seed;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

SweepOutcome run_sweep(const std::vector<Problem>& problems,
                       const ModelHandle& leader, const ModelHandle& draft,
                       const std::vector<GridPoint>& grid,
                       const SweepOptions& options) {
  if (grid.empty()) throw ConfigError("empty grid");
  require_shared_vocabulary(leader, draft);
  const Vocabulary& vocab = leader->vocab();

  // Load any prior results for resumption.
  std::map<std::string, RunResult> store;
  if (!options.store_path.empty()) {
    std::ifstream in(options.store_path);
    std::string line;
    std::size_t line_no = 0;
    while (in && std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      ordered_json j;
      try {
        j = ordered_json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("results store line " + std::to_string(line_no) +
                              ": " + e.what());
      }
      if (j.at("dataset").get<std::string>() != options.dataset_id) continue;
      RunResult r = result_from_json(j);
      store.emplace(run_key(options.dataset_id, r.config, r.hit_threshold,
                            r.problem_id, r.seed),
                    r);
    }
  }

  std::ofstream append;
  if (!options.store_path.empty()) {
    std::filesystem::path p(options.store_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    append.open(options.store_path, std::ios::app);
    if (!append) {
      throw ConfigError("cannot open results store: " + options.store_path);
    }
  }
  if (!options.trace_dir.empty()) {
    std::filesystem::create_directories(options.trace_dir);
  }

  SweepOutcome outcome;
  std::atomic<std::size_t> decode_calls{0};

  for (const GridPoint& point : grid) {
    PolicyConfig cfg;
    cfg.lead_count = point.lead_count;
    cfg.lead_probability = point.lead_prob;
    cfg.hit_threshold = options.hit_threshold;
    cfg.force_first_lead = options.force_first_lead;
    cfg.max_new_tokens = options.max_new_tokens;

    std::vector<RunResult> config_results(problems.size());
    std::vector<char> fresh(problems.size(), 0);

    auto run_one = [&](std::size_t idx) {
      const Problem& problem = problems[idx];
      std::uint64_t seed = derive_seed(options.master_seed, problem.id);
      std::string key = run_key(options.dataset_id, point,
                                options.hit_threshold, problem.id, seed);
      if (auto it = store.find(key); it != store.end()) {
        config_results[idx] = it->second;
        return;
      }

      SamplingParams params = options.sampling;
      params.seed = seed;
      std::vector<TokenId> prompt = greedy_tokenize(vocab, problem.question);
      DecodeTrace trace = decode(leader, draft, prompt, cfg, params);
      decode_calls.fetch_add(1, std::memory_order_relaxed);
      if (!trace.valid) {
        throw ProviderError("provider failure on problem " + problem.id,
                            /*retryable=*/true);
      }

      RunResult r;
      r.problem_id = problem.id;
      r.config = point;
      r.hit_threshold = options.hit_threshold;
      r.seed = seed;
      std::vector<TokenId> ids = trace.token_ids();
      r.predicted = extract_answer(detokenize(vocab, ids));
      r.correct = r.predicted &&
                  canonicalize_answer(*r.predicted) ==
                      canonicalize_answer(problem.answer);
      r.gen_len = trace.records.size();
      r.lead_ratio = lead_ratio(trace);
      r.tflops = to_tflops(
          mixed_flops(trace, leader->arch(), draft->arch(), options.accounting)
              .total());
      if (!options.trace_dir.empty()) {
        std::string name = "n" + grid_n_string(point.lead_count) + "_p" +
                           format_double(point.lead_prob) + "_" + problem.id +
                           "_s" + std::to_string(seed) + ".jsonl";
        r.trace_path =
            (std::filesystem::path(options.trace_dir) / name).string();
        write_trace_file(trace, r.trace_path);
      }
      config_results[idx] = r;
      fresh[idx] = 1;
    };

    if (options.jobs <= 1 || problems.size() <= 1) {
      for (std::size_t i = 0; i < problems.size(); ++i) run_one(i);
    } else {
      std::atomic<std::size_t> next{0};
      unsigned workers = std::min<std::size_t>(options.jobs, problems.size());
      std::vector<std::thread> pool;
      std::mutex error_mutex;
      std::exception_ptr first_error;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= problems.size()) return;
            try {
              run_one(i);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!first_error) first_error = std::current_exception();
              return;
            }
          }
        });
      }
      for (std::thread& t : pool) t.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    // Persist in dataset order under a single writer.
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (fresh[i] && append.is_open()) {
        append << result_to_json(options.dataset_id, config_results[i]).dump()
               << '\n';
      }
      store.emplace(run_key(options.dataset_id, point, options.hit_threshold,
                            config_results[i].problem_id,
                            config_results[i].seed),
                    config_results[i]);
    }
    if (append.is_open()) append.flush();

    outcome.report.push_back(aggregate(point, config_results));
    outcome.results.insert(outcome.results.end(), config_results.begin(),
                           config_results.end());
  }
  outcome.decode_calls = decode_calls.load();
  return outcome;
}

SweepReportRow run_baseline(const ModelHandle& model, bool as_leader,
                            const std::vector<Problem>& problems,
                            const SweepOptions& options) {
  const Vocabulary& vocab = model->vocab();
  std::vector<RunResult> results(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& problem = problems[i];
    SamplingParams params = options.sampling;
    params.seed = derive_seed(options.master_seed, problem.id);
    std::vector<TokenId> prompt = greedy_tokenize(vocab, problem.question);
    SingleTrace trace =
        decode_single(model, prompt, params, options.max_new_tokens);

    RunResult& r = results[i];
    r.problem_id = problem.id;
    r.seed = params.seed;
    r.predicted = extract_answer(detokenize(vocab, trace.tokens));
    r.correct = r.predicted &&
                canonicalize_answer(*r.predicted) ==
                    canonicalize_answer(problem.answer);
    r.gen_len = trace.tokens.size();
    r.lead_ratio = as_leader ? 1.0 : 0.0;
    r.tflops = to_tflops(
        flops_total(prompt.size(), trace.tokens.size(), model->arch()));
  }
  GridPoint point;
  if (as_leader) {
    point.lead_count = std::nullopt;
    point.lead_prob = 1.0;
  }
  return aggregate(point, results);
}

void write_report_csv(const std::vector<SweepReportRow>& rows,
                      std::ostream& out) {
  out << "config_n,config_p,accuracy,mean_length,mean_lead_ratio,mean_tflops\n";
  for (const SweepReportRow& row : rows) {
    out << grid_n_string(row.config.lead_count) << ','
        << format_double(row.config.lead_prob) << ','
        << format_double(row.accuracy) << ',' << format_double(row.mean_length)
        << ',' << format_double(row.mean_lead_ratio) << ','
        << format_double(row.mean_tflops) << '\n';
  }
}

std::vector<SweepReportRow> read_report_csv(std::istream& in) {
  std::vector<SweepReportRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty report CSV");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw ValidationError("report CSV line " + std::to_string(line_no) +
                            ": expected 6 fields");
    }
    SweepReportRow row;
    row.config.lead_count = grid_n_parse(fields[0]);
    row.config.lead_prob = std::stod(fields[1]);
    row.accuracy = std::stod(fields[2]);
    row.mean_length = std::stod(fields[3]);
    row.mean_lead_ratio = std::stod(fields[4]);
    row.mean_tflops = std::stod(fields[5]);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TradeoffPoint> pareto_frontier(
    const std::vector<TradeoffPoint>& points) {
  if (points.empty()) throw ContractError("pareto_frontier: no points");
  std::vector<TradeoffPoint> sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TradeoffPoint& a, const TradeoffPoint& b) {
                     if (a.cost != b.cost) return a.cost < b.cost;
                     return a.accuracy > b.accuracy;
                   });

  std::vector<TradeoffPoint> frontier;
  double best_acc = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < sorted.size()) {
    // Handle all points of equal cost together: only the group's accuracy
    // maximum can survive, and duplicates of it do not dominate each other.
    std::size_t j = i;
    double group_max = -std::numeric_limits<double>::infinity();
    while (j < sorted.size() && sorted[j].cost == sorted[i].cost) {
      group_max = std::max(group_max, sorted[j].accuracy);
      ++j;
    }
    if (group_max > best_acc) {
      for (std::size_t m = i; m < j; ++m) {
        if (sorted[m].accuracy == group_max) frontier.push_back(sorted[m]);
      }
      best_acc = group_max;
    }
    i = j;
  }
  return frontier;
}

}  // namespace foreal
