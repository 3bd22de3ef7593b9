#include "foreal/engine.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"

namespace foreal {

namespace {

// Gate draws come from a stream decorrelated from token sampling so that a
// p=0 or p=1 session consumes the token stream exactly like a single-model
// loop with the same seed.
constexpr std::uint64_t kGateStreamSalt = 0x9E3779B97F4A7C15ull;

// Providers return top-K lists at least this wide; sampling then narrows to
// params.top_k.
constexpr std::uint32_t kDefaultQueryK = 64;

std::uint32_t query_k(const SamplingParams& params) {
  return std::max(kDefaultQueryK, params.top_k);
}

}  // namespace

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Eos: return "eos";
    case StopReason::MaxTokens: return "max_tokens";
    case StopReason::ProviderFailure: return "provider_failure";
  }
  return "unknown";
}

std::vector<TokenId> DecodeTrace::token_ids() const {
  std::vector<TokenId> ids;
  ids.reserve(records.size());
  for (const TokenRecord& r : records) ids.push_back(r.token_id);
  return ids;
}

DecodeTrace decode(const ModelHandle& leader, const ModelHandle& draft,
                   std::span<const TokenId> prompt, const PolicyConfig& cfg,
                   const SamplingParams& params) {
  cfg.validate();
  params.validate();
  require_shared_vocabulary(leader, draft);
  if (prompt.empty()) throw ContractError("decode: empty prompt");
  const Vocabulary& vocab = leader->vocab();
  for (TokenId id : prompt) {
    if (!vocab.contains(id)) throw ContractError("decode: prompt id out of vocabulary");
  }

  DecodeTrace trace;
  trace.prompt = {prompt.begin(), prompt.end()};
  trace.prompt_len = prompt.size();
  trace.config = cfg;
  trace.sampling = params;
  trace.sentence_starts = {0};

  std::mt19937_64 token_rng(params.seed);
  std::mt19937_64 gate_rng(params.seed ^ kGateStreamSalt);

  std::vector<TokenId> context(prompt.begin(), prompt.end());
  const std::uint32_t k_query = query_k(params);

  std::uint64_t s = 0;
  std::uint64_t sentence_start = 0;
  std::uint32_t hits = 0;
  bool transferred = false;
  int gate = cfg.force_first_lead ? 1 : sample_gate(cfg.lead_probability, gate_rng);
  bool in_first_paragraph = cfg.first_paragraph_full;

  trace.stop_reason = StopReason::MaxTokens;
  for (std::uint64_t t = 0; t < cfg.max_new_tokens; ++t) {
    if (t > 0 && is_sentence_boundary(vocab.text(trace.records.back().token_id))) {
      ++s;
      sentence_start = t;
      trace.sentence_starts.push_back(t);
      gate = sample_gate(cfg.lead_probability, gate_rng);
      hits = 0;
      transferred = false;
    }
    std::uint32_t lambda = local_position(t, sentence_start);

    Source src = in_first_paragraph
                     ? Source::Leader
                     : policy_decision(gate, lambda, transferred, cfg);

    TokenRecord rec;
    rec.t = t;
    rec.s = s;
    rec.lambda = lambda;
    rec.source = src;
    rec.gate = in_first_paragraph ? 1 : gate;

    try {
      const ModelHandle& emitter = src == Source::Leader ? leader : draft;
      TokenDistribution dist = emitter->next_distribution(context, k_query);

      if (!in_first_paragraph && gate == 1 && !transferred &&
          hit_check_active(lambda, cfg)) {
        const ModelHandle& other = src == Source::Leader ? draft : leader;
        TokenDistribution other_dist = other->next_distribution(context, k_query);
        TokenId la = src == Source::Leader ? dist.argmax() : other_dist.argmax();
        TokenId da = src == Source::Leader ? other_dist.argmax() : dist.argmax();
        rec.leader_argmax = la;
        rec.draft_argmax = da;
        rec.delta = agreement_indicator(da, la);
        hits = update_hits(hits, *rec.delta, cfg.hit_threshold);
        if (hits >= cfg.hit_threshold) transferred = true;
      }

      TokenId token = sample_token(dist, params, token_rng);
      rec.token_id = token;
      rec.hit_counter_after = hits;
      rec.logprob_chosen = std::log(dist.prob_of(token));
    } catch (const ProviderError&) {
      trace.valid = false;
      trace.stop_reason = StopReason::ProviderFailure;
      return trace;
    }

    trace.records.push_back(rec);
    context.push_back(rec.token_id);

    if (in_first_paragraph &&
        vocab.text(rec.token_id).find('\n') != std::string::npos) {
      in_first_paragraph = false;
    }
    if (vocab.is_eos(rec.token_id)) {
      trace.stop_reason = StopReason::Eos;
      break;
    }
  }
  return trace;
}

SingleTrace decode_single(const ModelHandle& model,
                          std::span<const TokenId> prompt,
                          const SamplingParams& params,
                          std::uint32_t max_new_tokens) {
  params.validate();
  if (prompt.empty()) throw ContractError("decode_single: empty prompt");
  const Vocabulary& vocab = model->vocab();

  SingleTrace out;
  std::mt19937_64 token_rng(params.seed);
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  const std::uint32_t k_query = query_k(params);

  out.stop_reason = StopReason::MaxTokens;
  for (std::uint32_t t = 0; t < max_new_tokens; ++t) {
    TokenDistribution dist = model->next_distribution(context, k_query);
    TokenId token = sample_token(dist, params, token_rng);
    out.tokens.push_back(token);
    context.push_back(token);
    if (vocab.is_eos(token)) {
      out.stop_reason = StopReason::Eos;
      break;
    }
  }
  return out;
}

double lead_ratio(const DecodeTrace& trace) {
  if (trace.records.empty()) throw ContractError("lead_ratio of empty trace");
  std::size_t leader = 0;
  for (const TokenRecord& r : trace.records) {
    if (r.source == Source::Leader) ++leader;
  }
  return static_cast<double>(leader) / static_cast<double>(trace.records.size());
}

double sentence_likelihood(const DecodeTrace& trace, std::uint64_t s) {
  if (s >= trace.sentence_starts.size()) {
    throw std::out_of_range("sentence index out of range");
  }
  std::size_t begin = trace.sentence_starts[s];
  std::size_t end = s + 1 < trace.sentence_starts.size()
                        ? trace.sentence_starts[s + 1]
                        : trace.records.size();
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += trace.records[i].logprob_chosen;
  }
  return sum;
}

bool replay_check(const DecodeTrace& trace, const ModelHandle& leader,
                  const ModelHandle& draft) {
  DecodeTrace replayed =
      decode(leader, draft, trace.prompt, trace.config, trace.sampling);
  return replayed == trace;
}

void validate_trace(const DecodeTrace& trace, const Vocabulary& vocab) {
  const PolicyConfig& cfg = trace.config;
  if (trace.sentence_starts.empty() || trace.sentence_starts[0] != 0) {
    throw ValidationError("trace: sentence_starts must begin at 0");
  }
  std::uint64_t s = 0;
  std::uint64_t sentence_start = 0;
  std::uint32_t hits = 0;
  bool transferred = false;
  bool in_first_paragraph = cfg.first_paragraph_full;

  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TokenRecord& rec = trace.records[i];
    if (rec.t != i) throw ValidationError("trace: records not contiguous in t");
    if (i > 0 &&
        is_sentence_boundary(vocab.text(trace.records[i - 1].token_id))) {
      ++s;
      sentence_start = i;
      hits = 0;
      transferred = false;
      if (s >= trace.sentence_starts.size() ||
          trace.sentence_starts[s] != i) {
        throw ValidationError("trace: sentence_starts out of step at " +
                              std::to_string(i));
      }
    }
    if (rec.s != s) throw ValidationError("trace: wrong sentence index");
    std::uint32_t lambda = local_position(rec.t, sentence_start);
    if (rec.lambda != lambda) throw ValidationError("trace: wrong lambda");

    Source expected = in_first_paragraph
                          ? Source::Leader
                          : policy_decision(rec.gate, lambda, transferred, cfg);
    if (rec.source != expected) {
      throw ValidationError("trace: source violates policy at t=" +
                            std::to_string(rec.t));
    }
    bool check_expected = !in_first_paragraph && rec.gate == 1 && !transferred &&
                          hit_check_active(lambda, cfg);
    if (check_expected != rec.delta.has_value()) {
      throw ValidationError("trace: agreement-check presence mismatch at t=" +
                            std::to_string(rec.t));
    }
    if (rec.delta) {
      hits = update_hits(hits, *rec.delta, cfg.hit_threshold);
      if (hits >= cfg.hit_threshold) transferred = true;
    }
    if (rec.hit_counter_after != hits) {
      throw ValidationError("trace: hit counter mismatch at t=" +
                            std::to_string(rec.t));
    }
    if (rec.source == Source::Leader && rec.gate != 1) {
      throw ValidationError("trace: Leader token in ungated sentence");
    }
    if (in_first_paragraph &&
        vocab.text(rec.token_id).find('\n') != std::string::npos) {
      in_first_paragraph = false;
    }
  }
  if (s + 1 != trace.sentence_starts.size() && !trace.records.empty()) {
    throw ValidationError("trace: trailing sentence_starts entries");
  }
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json config_to_json(const PolicyConfig& cfg) {
  ordered_json j;
  if (cfg.lead_count) {
    j["lead_count"] = *cfg.lead_count;
  } else {
    j["lead_count"] = nullptr;
  }
  j["lead_prob"] = cfg.lead_probability;
  j["hit_threshold"] = cfg.hit_threshold;
  j["force_first_lead"] = cfg.force_first_lead;
  j["max_new_tokens"] = cfg.max_new_tokens;
  j["eq4_counting_start"] = cfg.eq4_counting_start;
  j["first_paragraph_full"] = cfg.first_paragraph_full;
  return j;
}

PolicyConfig config_from_json(const ordered_json& j) {
  PolicyConfig cfg;
  if (j.at("lead_count").is_null()) {
    cfg.lead_count.reset();
  } else {
    cfg.lead_count = j.at("lead_count").get<std::uint32_t>();
  }
  cfg.lead_probability = j.at("lead_prob").get<double>();
  cfg.hit_threshold = j.at("hit_threshold").get<std::uint32_t>();
  cfg.force_first_lead = j.at("force_first_lead").get<bool>();
  cfg.max_new_tokens = j.at("max_new_tokens").get<std::uint32_t>();
  cfg.eq4_counting_start = j.at("eq4_counting_start").get<bool>();
  cfg.first_paragraph_full = j.at("first_paragraph_full").get<bool>();
  return cfg;
}

ordered_json sampling_to_json(const SamplingParams& p) {
  ordered_json j;
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["top_k"] = p.top_k;
  j["seed"] = p.seed;
  return j;
}

SamplingParams sampling_from_json(const ordered_json& j) {
  SamplingParams p;
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  p.top_k = j.at("top_k").get<std::uint32_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "eos") return StopReason::Eos;
  if (s == "max_tokens") return StopReason::MaxTokens;
  if (s == "provider_failure") return StopReason::ProviderFailure;
  throw ValidationError("unknown stop reason: " + s);
}

}  // namespace

void write_trace(const DecodeTrace& trace, std::ostream& out) {
  ordered_json header;
  header["type"] = "header";
  header["prompt_len"] = trace.prompt_len;
  header["prompt"] = trace.prompt;
  header["config"] = config_to_json(trace.config);
  header["sampling"] = sampling_to_json(trace.sampling);
  header["stop_reason"] = to_string(trace.stop_reason);
  header["valid"] = trace.valid;
  header["sentence_starts"] = trace.sentence_starts;
  out << header.dump() << '\n';

  for (const TokenRecord& rec : trace.records) {
    ordered_json j;
    j["t"] = rec.t;
    j["s"] = rec.s;
    j["lambda"] = rec.lambda;
    j["source"] = to_string(rec.source);
    j["token"] = rec.token_id;
    j["gate"] = rec.gate;
    j["h"] = rec.hit_counter_after;
    if (rec.delta) j["delta"] = *rec.delta;
    if (rec.leader_argmax) j["leader_argmax"] = *rec.leader_argmax;
    if (rec.draft_argmax) j["draft_argmax"] = *rec.draft_argmax;
    j["logprob"] = rec.logprob_chosen;
    out << j.dump() << '\n';
  }
}

void write_trace_file(const DecodeTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open trace file for writing: " + path);
  write_trace(trace, out);
}

DecodeTrace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trace: missing header");
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trace: malformed header: ") + e.what());
  }
  if (header.value("type", "") != "header") {
    throw ValidationError("trace: first line is not a header");
  }

  DecodeTrace trace;
  trace.prompt_len = header.at("prompt_len").get<std::uint64_t>();
  trace.prompt = header.at("prompt").get<std::vector<TokenId>>();
  trace.config = config_from_json(header.at("config"));
  trace.sampling = sampling_from_json(header.at("sampling"));
  trace.stop_reason = stop_reason_from_string(header.at("stop_reason"));
  trace.valid = header.at("valid").get<bool>();
  trace.sentence_starts =
      header.at("sentence_starts").get<std::vector<std::uint64_t>>();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("trace: malformed record at line " +
                            std::to_string(line_no) + ": " + e.what());
    }
    TokenRecord rec;
    rec.t = j.at("t").get<std::uint64_t>();
    rec.s = j.at("s").get<std::uint64_t>();
    rec.lambda = j.at("lambda").get<std::uint32_t>();
    rec.source = j.at("source").get<std::string>() == "L" ? Source::Leader
                                                          : Source::Draft;
    rec.token_id = j.at("token").get<TokenId>();
    rec.gate = j.at("gate").get<int>();
    rec.hit_counter_after = j.at("h").get<std::uint32_t>();
    if (j.contains("delta")) rec.delta = j.at("delta").get<int>();
    if (j.contains("leader_argmax")) {
      rec.leader_argmax = j.at("leader_argmax").get<TokenId>();
    }
    if (j.contains("draft_argmax")) {
      rec.draft_argmax = j.at("draft_argmax").get<TokenId>();
    }
    rec.logprob_chosen = j.at("logprob").get<double>();
    trace.records.push_back(rec);
  }
  return trace;
}

DecodeTrace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  return read_trace(in);
}

}  // namespace foreal
