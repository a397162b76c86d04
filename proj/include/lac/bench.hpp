#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lac/model.hpp"

namespace lac {

// One benchmark measurement for a single (variant, sequence length) cell.
struct BenchRecord {
  std::string variant;                     // "mhsa" or "mhlsa"
  int t = 0;                               // sequence length
  std::int64_t wall_ns = 0;                // median over repeats
  std::int64_t peak_workspace_scalars = 0; // instrumented allocator peak
  std::int64_t flops = 0;                  // analytic multiply-accumulate count
};

// Log-log least-squares fit of wall time against T over the largest grid
// points (at least 4 of them).
struct SlopeFit {
  std::string variant;
  double slope = 0.0;
  double r2 = 0.0;
  int points_used = 0;
};

struct BenchOptions {
  std::vector<std::string> variants = {"mhsa", "mhlsa"};
  std::vector<int> lengths = {256, 512, 1024, 2048, 4096, 8192};
  int d_model = 256;
  int heads = 4;
  int repeats = 5;  // timed repeats, after warmup
  int warmup = 2;
  std::uint64_t seed = 1;

  void validate() const;  // ascending grid, >= 6 points, repeats >= 5
};

struct BenchResult {
  std::vector<BenchRecord> records;
  std::vector<SlopeFit> fits;
};

BenchResult bench_attention(const BenchOptions& opt);

// Analytic per-forward multiply-accumulate counts (projections, attention
// products, softmax element work, output projection).
std::int64_t mhsa_flops(std::int64_t t, int d_model, int heads);
std::int64_t mhlsa_flops(std::int64_t t, int d_model, int heads);

// CSV schema: variant,T,wall_ns,peak_workspace,flops (header mandatory).
std::string bench_csv(const BenchResult& r);
std::string bench_json(const BenchResult& r);

// Parameter-count reporting over model variants.
struct ParamReportRow {
  std::string variant;  // display spelling
  int d_bn = 0;
  std::int64_t total = 0;
  std::vector<std::pair<std::string, std::int64_t>> sections;
};

struct ParamReport {
  std::vector<ParamReportRow> rows;
  double lac_over_conformer = 0.0;  // set when both rows present
  std::int64_t dbn_slope = 0;       // params per unit d_bn (sweep mode)
};

// Fixed-variant report over all four variants, or a d_bn sweep of the LAC
// variant at {50, 75, 100, 125} when sweep_dbn is set.
ParamReport report_params(const ModelConfig& base, bool sweep_dbn);

std::string params_text(const ParamReport& r);
std::string params_json(const ParamReport& r);

}  // namespace lac
