// lac: benchmark, parameter-report, verification and demo CLI.
//
// Subcommands:
//   bench   attention complexity benchmark (CSV or JSON on stdout)
//   params  parameter-count report per variant, optional d_bn sweep
//   verify  invariant suites with a machine-readable report
//   demo    single-utterance forward: losses + greedy CTC hypothesis
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lac/bench.hpp"
#include "lac/model.hpp"
#include "lac/verify.hpp"

namespace {

std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> ids;
  std::istringstream is(text);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    if (cell.empty()) continue;
    ids.push_back(std::stoi(cell));
  }
  return ids;
}

lac::Tensor load_features(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return lac::read_features_csv(path);
  return lac::read_features_binary(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear-attention conformer numerical core"};
  app.require_subcommand(1);

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "attention complexity benchmark");
  std::vector<std::string> variants = {"mhsa", "mhlsa"};
  std::vector<int> lengths = {256, 512, 1024, 2048, 4096, 8192};
  int d_model = 256, heads = 4, repeats = 5, threads = 1;
  std::string out_format = "csv";
  bench_cmd->add_option("--variants", variants, "variants to run (mhsa, mhlsa)")
      ->delimiter(',');
  bench_cmd->add_option("--lengths", lengths, "ascending sequence-length grid (>= 6 points)")
      ->delimiter(',');
  bench_cmd->add_option("--d-model", d_model, "model width");
  bench_cmd->add_option("--heads", heads, "attention heads");
  bench_cmd->add_option("--repeats", repeats, "timed repeats per cell (>= 5)");
  bench_cmd->add_option("--threads", threads, "reserved; timing runs single-threaded");
  bench_cmd->add_option("--out", out_format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  // --- params ---
  auto* params_cmd = app.add_subcommand("params", "parameter-count report");
  std::string config_path;
  bool sweep_dbn = false, params_json_flag = false;
  params_cmd->add_option("--config", config_path, "model config file");
  params_cmd->add_flag("--sweep-dbn", sweep_dbn, "sweep d_bn over {50, 75, 100, 125}");
  params_cmd->add_flag("--json", params_json_flag, "emit JSON instead of text");

  // --- verify ---
  auto* verify_cmd = app.add_subcommand("verify", "run invariant suites");
  std::string suite = "all";
  bool verify_json_flag = false;
  verify_cmd->add_option("--suite", suite, "suite name or 'all'");
  verify_cmd->add_flag("--json", verify_json_flag, "emit the JSON report only");

  // --- demo ---
  auto* demo_cmd = app.add_subcommand("demo", "forward one utterance");
  std::string feats_path, ckpt_path, tokens_text, demo_config_path, save_ckpt_path;
  std::uint64_t demo_seed = 1;
  bool demo_json_flag = false;
  demo_cmd->add_option("--feats", feats_path, "feature file (.lacf binary or .csv)")
      ->required();
  demo_cmd->add_option("--ckpt", ckpt_path, "checkpoint file");
  demo_cmd->add_option("--config", demo_config_path,
                       "config file for a fresh random model (alternative to --ckpt)");
  demo_cmd->add_option("--seed", demo_seed, "seed for the fresh random model");
  demo_cmd->add_option("--save-ckpt", save_ckpt_path, "write the model used to this path");
  demo_cmd->add_option("--tokens", tokens_text, "comma-separated reference token ids")
      ->required();
  demo_cmd->add_flag("--json", demo_json_flag, "emit JSON instead of text");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench_cmd) {
      lac::BenchOptions opt;
      opt.variants = variants;
      opt.lengths = lengths;
      opt.d_model = d_model;
      opt.heads = heads;
      opt.repeats = repeats;
      const lac::BenchResult result = lac::bench_attention(opt);
      std::cout << (out_format == "json" ? lac::bench_json(result)
                                         : lac::bench_csv(result));
      if (out_format == "csv")
        for (const auto& f : result.fits)
          std::cerr << "# " << f.variant << " log-log slope " << f.slope << " (r2 " << f.r2
                    << ", " << f.points_used << " points)\n";
      return 0;
    }

    if (*params_cmd) {
      lac::ModelConfig cfg;
      if (!config_path.empty()) cfg = lac::ModelConfig::load_file(config_path);
      const lac::ParamReport report = lac::report_params(cfg, sweep_dbn);
      std::cout << (params_json_flag ? lac::params_json(report)
                                     : lac::params_text(report));
      if (params_json_flag) std::cout << '\n';
      return 0;
    }

    if (*verify_cmd) {
      const auto results = lac::verify::run_suite(suite);
      if (verify_json_flag)
        std::cout << lac::verify::report_json(results) << '\n';
      else
        std::cout << lac::verify::report_text(results);
      return lac::verify::all_passed(results) ? 0 : 1;
    }

    if (*demo_cmd) {
      if (ckpt_path.empty() == demo_config_path.empty())
        throw CLI::ValidationError("demo", "give exactly one of --ckpt or --config");
      lac::Tensor feats = load_features(feats_path);
      lac::Model model = ckpt_path.empty()
                             ? lac::Model::build(
                                   lac::ModelConfig::load_file(demo_config_path), demo_seed)
                             : lac::Model::load(ckpt_path);
      if (!save_ckpt_path.empty()) model.save(save_ckpt_path);
      const std::vector<int> tokens = parse_id_list(tokens_text);
      const auto result = model.forward(feats, tokens);
      lac::Tensor enc = model.encode(feats);
      lac::Tensor ctc_logp = lac::log_softmax_rows(lac::matmul(enc, model.ctc_proj));
      const std::vector<int> hyp = lac::ctc_greedy_decode(ctc_logp, lac::kBlankId);
      const double att = result.att_nll.item();
      const double ctc = result.ctc_nll.item();
      const double joint = result.joint.item();
      const double score =
          lac::joint_score(-att, -ctc, model.cfg.ctc());
      if (demo_json_flag) {
        nlohmann::json j;
        j["att_nll"] = att;
        j["ctc_nll"] = ctc;
        j["joint_loss"] = joint;
        j["joint_score"] = score;
        j["greedy_ctc_hypothesis"] = hyp;
        j["encoder_frames"] = enc.dim(0);
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "attention nll : " << att << '\n';
        std::cout << "ctc nll       : " << ctc << '\n';
        std::cout << "joint loss    : " << joint << " (ctc weight "
                  << model.cfg.ctc_train_weight << ")\n";
        std::cout << "joint score   : " << score << " (ctc weight "
                  << model.cfg.ctc_decode_weight << ")\n";
        std::cout << "greedy ctc    : ";
        for (std::size_t i = 0; i < hyp.size(); ++i)
          std::cout << (i ? "," : "") << hyp[i];
        std::cout << '\n';
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
