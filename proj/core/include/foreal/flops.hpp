#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace foreal {

// 128-bit unsigned accumulator for exact FLOPs arithmetic.
using Flops = unsigned __int128;

// Transformer architecture constants feeding the FLOPs formulas.
struct ModelArchSpec {
  std::uint64_t hidden = 64;
  std::uint64_t ffn = 128;
  std::uint64_t heads = 4;

  void validate() const;  // hidden divisible by heads
};

// Cost of one forward pass over a sequence of length s:
//   8sh^2 + 16sh + 4s^2h + 4s^2n + 6shh' + 2sh'
Flops flops_prefill(std::uint64_t s, const ModelArchSpec& arch);

// Cost of emitting one token with a KV cache of length s:
//   8h^2 + 16h + 4sh + 4sn + 6hh' + 2h'
Flops flops_decode(std::uint64_t s, const ModelArchSpec& arch);

// flops_prefill(prompt_len) + sum of flops_decode(prompt_len + i) for
// i in [0, gen_len).
Flops flops_total(std::uint64_t prompt_len, std::uint64_t gen_len,
                  const ModelArchSpec& arch);

// FLOPs / 10^12.
double to_tflops(Flops flops);

std::string flops_to_string(Flops flops);

// Format a TFLOPs value with two decimal places (table style).
std::string format_tflops(double tflops);

// Arch data file: JSON mapping model name -> {hidden, ffn, heads}.
std::map<std::string, ModelArchSpec> load_arch_file(const std::string& path);

}  // namespace foreal
