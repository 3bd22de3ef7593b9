#include "foreal/flops.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "foreal/errors.hpp"

namespace foreal {

namespace {

Flops checked_add(Flops a, Flops b) {
  Flops r = a + b;
  if (r < a) throw OverflowError("FLOPs addition overflow");
  return r;
}

Flops checked_mul(Flops a, Flops b) {
  if (a == 0 || b == 0) return 0;
  Flops r = a * b;
  if (r / a != b) throw OverflowError("FLOPs multiplication overflow");
  return r;
}

}  // namespace

void ModelArchSpec::validate() const {
  if (hidden == 0 || ffn == 0 || heads == 0) {
    throw ConfigError("architecture constants must be positive");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden size must be divisible by head count");
  }
}

Flops flops_prefill(std::uint64_t s, const ModelArchSpec& arch) {
  if (s < 1) throw ContractError("flops_prefill: sequence length must be >= 1");
  arch.validate();
  Flops S = s, h = arch.hidden, f = arch.ffn, n = arch.heads;
  Flops total = checked_mul(8, checked_mul(S, checked_mul(h, h)));
  total = checked_add(total, checked_mul(16, checked_mul(S, h)));
  total = checked_add(total, checked_mul(4, checked_mul(S, checked_mul(S, h))));
  total = checked_add(total, checked_mul(4, checked_mul(S, checked_mul(S, n))));
  total = checked_add(total, checked_mul(6, checked_mul(S, checked_mul(h, f))));
  total = checked_add(total, checked_mul(2, checked_mul(S, f)));
  return total;
}

Flops flops_decode(std::uint64_t s, const ModelArchSpec& arch) {
  if (s < 1) throw ContractError("flops_decode: cache length must be >= 1");
  arch.validate();
  Flops S = s, h = arch.hidden, f = arch.ffn, n = arch.heads;
  Flops total = checked_mul(8, checked_mul(h, h));
  total = checked_add(total, checked_mul(16, h));
  total = checked_add(total, checked_mul(4, checked_mul(S, h)));
  total = checked_add(total, checked_mul(4, checked_mul(S, n)));
  total = checked_add(total, checked_mul(6, checked_mul(h, f)));
  total = checked_add(total, checked_mul(2, f));
  return total;
}

Flops flops_total(std::uint64_t prompt_len, std::uint64_t gen_len,
                  const ModelArchSpec& arch) {
  Flops total = flops_prefill(prompt_len, arch);
  for (std::uint64_t i = 0; i < gen_len; ++i) {
    total = checked_add(total, flops_decode(prompt_len + i, arch));
  }
  return total;
}

double to_tflops(Flops flops) {
  return static_cast<double>(flops) / 1e12;
}

std::string flops_to_string(Flops flops) {
  if (flops == 0) return "0";
  std::string out;
  while (flops > 0) {
    out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(flops % 10)));
    flops /= 10;
  }
  return out;
}

std::string format_tflops(double tflops) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", tflops);
  return buf;
}

std::map<std::string, ModelArchSpec> load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open arch file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed arch file " + path + ": " + e.what());
  }
  std::map<std::string, ModelArchSpec> out;
  for (auto& [name, spec] : j.items()) {
    ModelArchSpec arch;
    arch.hidden = spec.at("hidden").get<std::uint64_t>();
    arch.ffn = spec.at("ffn").get<std::uint64_t>();
    arch.heads = spec.at("heads").get<std::uint64_t>();
    arch.validate();
    out.emplace(name, arch);
  }
  return out;
}

}  // namespace foreal
